import pytest
import torch

from autodiff import tensor_ops as ops
from autodiff.errors import MissingGradientError, ShapeError
from autodiff.finite_difference import max_gradient_error, relative_error
from autodiff.optim import CheckedAdamW, cosine_schedule
from autodiff.precision import default_precision, dtype_for


class TestForwardOps:
    def test_exp_of_zero(self):
        assert torch.equal(ops.exp(torch.tensor([0.0])), torch.tensor([1.0]))

    def test_identity_matmul(self):
        v = torch.tensor([1.0, -2.0, 3.5])
        assert torch.equal(ops.matmul(torch.eye(3), v), v)

    def test_gather_by_index_list(self):
        x = torch.tensor([10.0, 20.0, 30.0])
        assert ops.gather(x, [2, 0]).tolist() == [30.0, 10.0]

    def test_mismatch_names_op_and_shapes(self):
        with pytest.raises(ShapeError) as err:
            ops.add(torch.zeros(2, 3), torch.zeros(3, 2))
        assert "add" in str(err.value)
        assert err.value.left_shape == (2, 3)
        assert err.value.right_shape == (3, 2)

    def test_no_implicit_broadcast(self):
        with pytest.raises(ShapeError):
            ops.mul(torch.zeros(4, 3), torch.zeros(3))
        assert ops.mul(torch.ones(4, 3), torch.tensor(2.0)).sum().item() == 24.0
        assert ops.expand(torch.ones(1, 3), (4, 3)).shape == (4, 3)

    def test_matmul_inner_extent(self):
        with pytest.raises(ShapeError):
            ops.matmul(torch.zeros(2, 3), torch.zeros(2, 3))

    def test_reshape_element_count(self):
        with pytest.raises(ShapeError):
            ops.reshape(torch.zeros(6), (4, 2))

    def test_round_trips_are_exact(self):
        x = torch.randn(2, 3, 4)
        assert torch.equal(ops.reshape(ops.reshape(x, (6, 4)), (2, 3, 4)), x)
        assert torch.equal(ops.permute(ops.permute(x, (2, 0, 1)), (1, 2, 0)), x)
        parts = [ops.slice_along(x, 1, 0, 1), ops.slice_along(x, 1, 1, 3)]
        assert torch.equal(ops.concat(parts, dim=1), x)
        perm = torch.randperm(4)
        inverse = torch.argsort(perm)
        assert torch.equal(ops.gather(ops.gather(x, perm, dim=2), inverse, dim=2), x)

    def test_gather_out_of_range(self):
        with pytest.raises(ShapeError):
            ops.gather(torch.zeros(3), [3])

    def test_scatter_rejects_duplicates(self):
        with pytest.raises(ValueError):
            ops.scatter(torch.zeros(4, 2), [1, 1], torch.ones(2, 2))

    def test_scatter_is_out_of_place(self):
        base = torch.zeros(4, 2)
        out = ops.scatter(base, [3, 0], torch.ones(2, 2))
        assert base.sum().item() == 0.0
        assert out[:, 0].tolist() == [1.0, 0.0, 0.0, 1.0]

    def test_pool_and_upsample_extents(self):
        x = torch.randn(1, 2, 4, 6, 8)
        assert ops.max_pool2x(x).shape == (1, 2, 2, 3, 4)
        assert ops.upsample2x(x).shape == (1, 2, 8, 12, 16)
        with pytest.raises(ShapeError):
            ops.max_pool2x(torch.zeros(1, 1, 3, 4, 4))

    def test_conv3d_channel_check(self):
        with pytest.raises(ShapeError):
            ops.conv3d(torch.zeros(1, 2, 4, 4, 4), torch.zeros(3, 1, 3, 3, 3))


class TestBackward:
    def test_square_gradient(self):
        x = torch.tensor([1.0, 2.0], requires_grad=True)
        ops.backward(ops.sum(ops.mul(x, x)))
        assert x.grad.tolist() == [2.0, 4.0]

    def test_exp_gradient(self):
        a = torch.tensor(0.0, requires_grad=True)
        ops.backward(ops.exp(a))
        assert a.grad.item() == 1.0

    def test_non_scalar_loss(self):
        x = torch.ones(2, requires_grad=True)
        with pytest.raises(ShapeError):
            ops.backward(ops.mul(x, x))

    def test_gradients_accumulate_until_zeroed(self):
        x = torch.tensor([3.0], requires_grad=True)
        ops.backward(ops.sum(ops.scale(x, 2.0)))
        ops.backward(ops.sum(ops.scale(x, 2.0)))
        assert x.grad.item() == 4.0
        ops.zero_grad([x])
        assert x.grad.item() == 0.0

    def test_shared_subexpression_sum_rule(self, float64):
        x = torch.randn(5, dtype=float64, requires_grad=True)

        def loss():
            shared = ops.softplus(x)
            return ops.sum(ops.add(ops.mul(shared, shared), ops.silu(shared)))

        assert max_gradient_error(loss, [x]) < 1e-6

    def test_composite_graph_matches_finite_differences(self, float64):
        generator = torch.Generator().manual_seed(0)
        x = torch.randn(1, 2, 4, 4, 4, generator=generator, dtype=float64, requires_grad=True)
        w = torch.randn(3, 2, 3, 3, 3, generator=generator, dtype=float64, requires_grad=True)
        m = torch.randn(3, 3, generator=generator, dtype=float64, requires_grad=True)

        def loss():
            y = ops.silu(ops.conv3d(x, w, padding=1))
            y = ops.upsample2x(ops.max_pool2x(y))
            flat = ops.reshape(ops.permute(y, (0, 2, 3, 4, 1)), (64, 3))
            return ops.mean(ops.sigmoid(ops.matmul(flat, m)))

        assert max_gradient_error(loss, [w, m]) < 1e-6


class TestCheckedAdamW:
    def test_step_decreases_convex_objective(self):
        w = torch.tensor([1.0], requires_grad=True)
        optimizer = CheckedAdamW([w], lr=0.1)
        ops.backward(ops.sum(ops.mul(w, w)))
        optimizer.step()
        assert w.item() < 1.0

    def test_zero_gradient_leaves_parameter(self):
        w = torch.tensor([1.5], requires_grad=True)
        optimizer = CheckedAdamW([w], lr=0.1, weight_decay=0.0)
        w.grad = torch.zeros_like(w)
        optimizer.step()
        assert w.item() == 1.5

    def test_converges_on_quadratic(self):
        w = torch.tensor([1.0], requires_grad=True)
        optimizer = CheckedAdamW([w], lr=0.1)
        for _ in range(100):
            optimizer.zero_grad()
            diff = ops.sub(w, torch.tensor(3.0))
            ops.backward(ops.sum(ops.mul(diff, diff)))
            optimizer.step()
        assert abs(w.item() - 3.0) < 0.05

    def test_missing_gradient(self):
        a = torch.ones(2, requires_grad=True)
        b = torch.ones(3, requires_grad=True)
        optimizer = CheckedAdamW([a, b], lr=0.1)
        ops.backward(ops.sum(a))
        with pytest.raises(MissingGradientError):
            optimizer.step()

    def test_cosine_schedule_reaches_zero(self):
        w = torch.ones(1, requires_grad=True)
        optimizer = CheckedAdamW([w], lr=0.5)
        scheduler = cosine_schedule(optimizer, 4)
        lrs = []
        for _ in range(4):
            lrs.append(optimizer.param_groups[0]["lr"])
            w.grad = torch.ones_like(w)
            optimizer.step()
            scheduler.step()
        assert lrs[0] == 0.5
        assert lrs == sorted(lrs, reverse=True)
        assert optimizer.param_groups[0]["lr"] == pytest.approx(0.0, abs=1e-12)


class TestPrecision:
    def test_dtype_for(self):
        assert dtype_for(32) == torch.float32
        assert dtype_for(64) == torch.float64
        with pytest.raises(ValueError):
            dtype_for(16)

    def test_default_precision_restores(self):
        before = torch.get_default_dtype()
        with default_precision(64):
            assert torch.zeros(1).dtype == torch.float64
        assert torch.get_default_dtype() == before

    def test_relative_error_floor(self):
        assert relative_error(0.0, 0.0) == 0.0
        assert relative_error(1.0, 1.1) == pytest.approx(0.1 / 1.1)
