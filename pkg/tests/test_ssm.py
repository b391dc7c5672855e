import math

import pytest
import torch

from autodiff.errors import ShapeError
from autodiff.finite_difference import max_gradient_error
from ssm.mamba_block import MambaBlock
from ssm.params import DiscretizedSsm, SsmParams, discretize
from ssm.scan import scan_kernel, scan_recurrent, selective_scan, ssm_kernel


def random_params(generator, state_dim, dtype=torch.float64):
    A = -torch.rand(state_dim, generator=generator, dtype=dtype) * 2 - 0.05
    B = torch.randn(state_dim, generator=generator, dtype=dtype)
    C = torch.randn(state_dim, generator=generator, dtype=dtype)
    return SsmParams(A=A, B=B, C=C)


class TestDiscretize:
    def test_scalar_example(self, float64):
        params = SsmParams(
            A=torch.tensor([-1.0]), B=torch.tensor([1.0]), C=torch.tensor([1.0])
        )
        d = discretize(params, 1.0)
        assert d.A_bar.item() == pytest.approx(math.exp(-1), abs=1e-12)
        assert d.B_bar.item() == pytest.approx(1 - math.exp(-1), abs=1e-12)

    def test_half_decay_example(self, float64):
        params = SsmParams(
            A=torch.tensor([-1.0]), B=torch.tensor([1.0]), C=torch.tensor([1.0])
        )
        d = discretize(params, math.log(2))
        assert d.A_bar.item() == pytest.approx(0.5, abs=1e-12)
        assert d.B_bar.item() == pytest.approx(0.5, abs=1e-12)

    def test_small_step_limit(self, float64):
        params = SsmParams(
            A=torch.tensor([-2.0, -0.5]), B=torch.tensor([1.0, 3.0]), C=torch.ones(2)
        )
        d = discretize(params, 1e-6)
        assert torch.allclose(d.A_bar, torch.ones(2), atol=1e-5)
        assert torch.allclose(d.B_bar, 1e-6 * params.B, rtol=1e-5)

    def test_rejects_non_positive_step(self, float64):
        params = SsmParams(A=-torch.ones(2), B=torch.ones(2), C=torch.ones(2))
        with pytest.raises(ValueError):
            discretize(params, 0.0)
        with pytest.raises(ValueError):
            discretize(params, torch.tensor([0.1, -0.1]))

    def test_rejects_non_negative_A(self):
        with pytest.raises(ValueError):
            SsmParams(A=torch.tensor([-1.0, 0.0]), B=torch.ones(2), C=torch.ones(2))

    def test_rejects_mismatched_B(self):
        with pytest.raises(ShapeError):
            SsmParams(A=-torch.ones(3), B=torch.ones(2), C=torch.ones(3))

    def test_per_token_step(self, float64):
        params = SsmParams(A=-torch.ones(2), B=torch.ones(2), C=torch.ones(2))
        d = discretize(params, torch.tensor([0.5, 1.0, 2.0]))
        assert not d.is_time_invariant
        assert d.A_bar.shape == (3, 2)
        assert d.A_bar[2, 0].item() == pytest.approx(math.exp(-2.0))


class TestScan:
    def test_impulse_response_matches_kernel(self, float64):
        generator = torch.Generator().manual_seed(7)
        d = discretize(random_params(generator, 4), 0.3)
        C = torch.randn(4, generator=generator)
        x = torch.zeros(6)
        x[0] = 1.0
        assert torch.allclose(scan_recurrent(d, C, x), ssm_kernel(d, C, 6), atol=1e-12)

    def test_scalar_example(self, float64):
        params = SsmParams(
            A=torch.tensor([-1.0]), B=torch.tensor([1.0]), C=torch.tensor([1.0])
        )
        d = discretize(params, 1.0)
        y = scan_recurrent(d, params.C, torch.tensor([1.0, 0.0]))
        b_bar = 1 - math.exp(-1)
        assert y[0].item() == pytest.approx(b_bar, abs=1e-12)
        assert y[1].item() == pytest.approx(math.exp(-1) * b_bar, abs=1e-12)

    def test_hand_recurrence(self, float64):
        d = DiscretizedSsm(A_bar=torch.tensor([0.5]), B_bar=torch.tensor([1.0]))
        C = torch.tensor([1.0])
        y = scan_recurrent(d, C, torch.tensor([1.0, 0.0, 0.0]))
        assert y.tolist() == [1.0, 0.5, 0.25]
        assert scan_recurrent(d, C, torch.zeros(4)).tolist() == [0.0] * 4
        assert scan_kernel(d, C, torch.tensor([3.0])).tolist() == [3.0]

    def test_linearity(self, float64):
        generator = torch.Generator().manual_seed(11)
        d = discretize(random_params(generator, 3), 0.7)
        C = torch.randn(3, generator=generator)
        x1 = torch.randn(9, generator=generator)
        x2 = torch.randn(9, generator=generator)
        combined = scan_recurrent(d, C, 2.0 * x1 - 0.5 * x2)
        separate = 2.0 * scan_recurrent(d, C, x1) - 0.5 * scan_recurrent(d, C, x2)
        assert torch.allclose(combined, separate, atol=1e-12)

    def test_kernel_and_recurrent_agree(self, float64):
        generator = torch.Generator().manual_seed(0)
        for _ in range(50):
            state_dim = int(torch.randint(1, 9, (1,), generator=generator))
            length = int(torch.randint(1, 33, (1,), generator=generator))
            delta = float(torch.rand(1, generator=generator)) + 0.01
            d = discretize(random_params(generator, state_dim), delta)
            C = torch.randn(state_dim, generator=generator)
            x = torch.randn(length, generator=generator)
            recurrent = scan_recurrent(d, C, x)
            kernel = scan_kernel(d, C, x)
            assert torch.max(torch.abs(recurrent - kernel)).item() < 1e-10

    def test_states_stay_bounded(self, float64):
        generator = torch.Generator().manual_seed(11)
        for _ in range(50):
            state_dim = int(torch.randint(1, 9, (1,), generator=generator))
            length = int(torch.randint(1, 65, (1,), generator=generator))
            deltas = torch.rand(length, generator=generator) * 2 + 0.01
            d = discretize(random_params(generator, state_dim), deltas)
            x = torch.randn(length, generator=generator) * 5
            _, states = scan_recurrent(d, torch.ones(state_dim), x, return_states=True)
            assert states.shape == (length, state_dim)
            sup_B = d.B_bar.abs().max(dim=0).values
            sup_A = d.A_bar.max(dim=0).values
            bound = x.abs().max() * sup_B / (1 - sup_A)
            assert (states.abs() <= bound * (1 + 1e-12)).all()

    def test_causality(self, float64):
        generator = torch.Generator().manual_seed(3)
        d = discretize(random_params(generator, 4), 0.5)
        C = torch.randn(4, generator=generator)
        x = torch.randn(10, generator=generator)
        perturbed = x.clone()
        perturbed[6:] += 5.0
        assert torch.equal(scan_recurrent(d, C, x)[:6], scan_recurrent(d, C, perturbed)[:6])

    def test_kernel_rejects_time_varying(self, float64):
        params = SsmParams(A=-torch.ones(2), B=torch.ones(2), C=torch.ones(2))
        d = discretize(params, torch.tensor([0.5, 1.0]))
        with pytest.raises(ValueError):
            scan_kernel(d, params.C, torch.ones(2))

    def test_empty_sequence(self, float64):
        params = SsmParams(A=-torch.ones(2), B=torch.ones(2), C=torch.ones(2))
        with pytest.raises(ShapeError):
            scan_recurrent(discretize(params, 1.0), params.C, torch.zeros(0))

    def test_selective_scan_matches_recurrent(self, float64):
        generator = torch.Generator().manual_seed(5)
        length, state_dim = 7, 3
        A = -torch.rand(1, state_dim, generator=generator) - 0.1
        delta = torch.rand(1, length, 1, generator=generator) + 0.05
        B = torch.randn(1, length, state_dim, generator=generator)
        C = torch.randn(1, length, state_dim, generator=generator)
        u = torch.randn(1, length, 1, generator=generator)
        selective = selective_scan(u, delta, A, B, C)

        d = discretize(SsmParams(A=A[0], B=B[0], C=C[0]), delta[0, :, 0])
        recurrent = scan_recurrent(d, C[0], u[0, :, 0])
        assert torch.allclose(selective[0, :, 0], recurrent, atol=1e-12)

    def test_gradients_match_finite_differences(self, float64):
        generator = torch.Generator().manual_seed(2)
        A = (-torch.rand(3, generator=generator) - 0.2).requires_grad_()
        B = torch.randn(3, generator=generator).requires_grad_()
        C = torch.randn(3, generator=generator).requires_grad_()
        x = torch.randn(5, generator=generator)

        def loss():
            d = discretize(SsmParams(A=A, B=B, C=C), 0.4)
            return torch.sum(scan_recurrent(d, C, x) ** 2)

        assert max_gradient_error(loss, [A, B, C]) < 1e-6


class TestMambaBlock:
    def test_shape_preserved(self, float64):
        torch.manual_seed(0)
        block = MambaBlock(8, state_dim=4)
        assert block(torch.randn(2, 5, 8)).shape == (2, 5, 8)
        assert block(torch.randn(5, 8)).shape == (5, 8)

    def test_A_is_negative(self, float64):
        block = MambaBlock(4, state_dim=3)
        assert (block.A < 0).all()
        assert block.A[0].tolist() == pytest.approx([-1.0, -2.0, -3.0])

    def test_causal(self, float64):
        torch.manual_seed(1)
        block = MambaBlock(6, state_dim=4)
        x = torch.randn(1, 9, 6)
        perturbed = x.clone()
        perturbed[:, 5:] += 3.0
        with torch.no_grad():
            assert torch.allclose(block(x)[:, :5], block(perturbed)[:, :5], atol=1e-12)

    def test_jacobian_is_lower_triangular(self, float64):
        torch.manual_seed(2)
        block = MambaBlock(2, state_dim=3)
        x = torch.randn(7, 2)
        jacobian = torch.autograd.functional.jacobian(block, x)
        for i in range(7):
            for j in range(7):
                if j > i:
                    assert torch.count_nonzero(jacobian[i, :, j, :]) == 0
        assert torch.count_nonzero(jacobian[6, :, 0, :]) > 0

    def test_zero_init_is_identity(self, float64):
        block = MambaBlock(6, state_dim=4, zero_init_out=True)
        x = torch.randn(2, 4, 6)
        with torch.no_grad():
            assert torch.equal(block(x), x)

    def test_empty_sequence(self, float64):
        with pytest.raises(ValueError):
            MambaBlock(4)(torch.zeros(1, 0, 4))

    def test_A_log_gradient(self, float64):
        torch.manual_seed(4)
        block = MambaBlock(3, state_dim=2)
        x = torch.randn(1, 4, 3)

        def loss():
            return torch.sum(block(x) ** 2)

        assert max_gradient_error(loss, [block.A_log]) < 1e-5
