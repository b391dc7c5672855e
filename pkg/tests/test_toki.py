import math

import numpy as np
import pytest
import torch

from autodiff.errors import ShapeError
from autodiff.finite_difference import max_gradient_error
from constants import TOKEN_INIT_STD
from model.decoder import HybridDecoder
from models.enums import TokiVariant
from toki import GapSpec, LearnableTokenFill, TokenInterpolation
from toki.interpolation import blend_weights


def scalar_gap(u, v, q):
    return GapSpec(torch.tensor([u]), torch.tensor([v]), q)


class TestInterpolateGap:
    def test_empty_gap(self, float64):
        toki = TokenInterpolation(3)
        out = toki.interpolate_gap(GapSpec(torch.ones(3), torch.ones(3), 0))
        assert out.shape == (0, 3)

    def test_single_masked_token(self, float64):
        toki = TokenInterpolation(1, init=-1.0)
        z = toki.interpolate_gap(scalar_gap(1.0, 0.0, 1))
        assert z.shape == (1, 1)
        assert z.item() == pytest.approx(-(math.exp(-2) + 2 / 3 * math.exp(-1)), abs=1e-12)
        assert z.item() == pytest.approx(-0.38058824401757425, abs=1e-12)

        z = toki.interpolate_gap(scalar_gap(1.0, 2.0, 1))
        assert z.item() == pytest.approx(-0.6258412047985358, abs=1e-12)

    def test_linear_in_endpoints(self, float64):
        generator = torch.Generator().manual_seed(0)
        toki = TokenInterpolation(4, init=-0.7)
        u1, v1, u2, v2 = (torch.randn(4, generator=generator) for _ in range(4))
        combined = toki.interpolate_gap(GapSpec(2 * u1 + u2, 2 * v1 + v2, 5))
        separate = 2 * toki.interpolate_gap(GapSpec(u1, v1, 5)) + toki.interpolate_gap(
            GapSpec(u2, v2, 5)
        )
        assert torch.allclose(combined, separate, atol=1e-12)

    def test_strong_decay_vanishes(self, float64):
        toki = TokenInterpolation(2, init=-20.0)
        z = toki.interpolate_gap(GapSpec(torch.ones(2), torch.ones(2), 4))
        assert torch.max(torch.abs(z)).item() < 1e-9

    def test_matches_explicit_recurrence(self, float64):
        generator = torch.Generator().manual_seed(1)
        toki = TokenInterpolation(3, init=-0.5)
        u, v = torch.randn(3, generator=generator), torch.randn(3, generator=generator)
        q = 4
        a = toki.a_prime.detach()
        a_bar, b_bar = torch.exp(a), torch.exp(a) / a
        h = torch.zeros(3)
        expected = []
        for n in range(q + 1):
            s = ((q + 2 - n) * u + n * v) / (q + 2)
            h = a_bar * h + b_bar * s
            if n >= 1:
                expected.append(h)
        z = toki.interpolate_gap(GapSpec(u, v, q))
        assert torch.allclose(z, torch.stack(expected), atol=1e-12)

    def test_batched_endpoints(self, float64):
        toki = TokenInterpolation(2)
        out = toki.interpolate_gap(GapSpec(torch.zeros(3, 2), torch.ones(3, 2), 2))
        assert out.shape == (3, 2, 2)

    def test_alg3_single_token(self, float64):
        toki = TokenInterpolation(1, init=-1.0, variant=TokiVariant.ALG3)
        z = toki.interpolate_gap(scalar_gap(1.0, 2.0, 1))
        expected = (1 + math.exp(-1)) / -1.0 * (2 / 3 * 1.0 + 1 / 3 * 2.0)
        assert z.item() == pytest.approx(expected, abs=1e-12)

    def test_invalid_gaps(self, float64):
        with pytest.raises(ValueError):
            scalar_gap(1.0, 0.0, -1)
        with pytest.raises(ShapeError):
            GapSpec(torch.ones(2), torch.ones(3), 1)
        with pytest.raises(ValueError):
            scalar_gap(float("nan"), 0.0, 1)
        with pytest.raises(ShapeError):
            TokenInterpolation(3).interpolate_gap(GapSpec(torch.ones(2), torch.ones(2), 1))

    def test_non_negative_init(self):
        with pytest.raises(ValueError):
            TokenInterpolation(2, init=0.0)

    def test_blend_weights_sum_to_one(self, float64):
        left, right = blend_weights(3, 4, torch.float64)
        assert torch.allclose(left + right, torch.ones(4))
        assert left[0].item() == 1.0 and right[0].item() == 0.0


class TestFillSequence:
    def test_structure_and_preservation(self, float64):
        generator = torch.Generator().manual_seed(2)
        toki = TokenInterpolation(3)
        tokens = torch.randn(2, 3, 3, generator=generator)
        ranks = np.array([1, 2, 6])
        dense = toki.fill_ranks(tokens, ranks, 8)
        assert dense.shape == (2, 8, 3)
        assert torch.equal(dense[:, ranks], tokens)

    def test_fully_visible_is_unchanged(self, float64):
        tokens = torch.randn(2, 5, 3)
        dense = TokenInterpolation(3).fill_ranks(tokens, np.arange(5), 5)
        assert torch.equal(dense, tokens)

    def test_interior_gap_uses_interpolate_gap(self, float64):
        toki = TokenInterpolation(2, init=-0.5)
        tokens = torch.tensor([[[1.0, 0.0], [3.0, -1.0]]])
        dense = toki.fill_ranks(tokens, np.array([0, 3]), 4)
        gap = toki.interpolate_gap(GapSpec(tokens[0, 0], tokens[0, 1], 2))
        assert torch.allclose(dense[0, 1:3], gap)

    def test_gap_depends_only_on_bounding_tokens(self, float64):
        generator = torch.Generator().manual_seed(3)
        toki = TokenInterpolation(2)
        tokens = torch.randn(1, 4, 2, generator=generator)
        ranks = np.array([0, 3, 5, 9])
        before = toki.fill_ranks(tokens, ranks, 10)
        changed = tokens.clone()
        changed[:, 2] += 10.0
        after = toki.fill_ranks(changed, ranks, 10)
        assert torch.equal(before[:, :4], after[:, :4])
        assert not torch.equal(before[:, 6:9], after[:, 6:9])

    def test_prefix_and_suffix_use_duplicated_endpoint(self, float64):
        toki = TokenInterpolation(1, init=-1.0)
        tokens = torch.tensor([[[2.0]]])
        dense = toki.fill_ranks(tokens, np.array([2]), 5)
        edge = toki.interpolate_gap(GapSpec(torch.tensor([2.0]), torch.tensor([2.0]), 2))
        assert torch.allclose(dense[0, :2], edge)
        assert torch.allclose(dense[0, 3:], edge)

    def test_invalid_ranks(self, float64):
        toki = TokenInterpolation(1)
        with pytest.raises(ValueError):
            toki.fill_ranks(torch.zeros(1, 0, 1), np.array([], dtype=np.int64), 4)
        with pytest.raises(ValueError):
            toki.fill_ranks(torch.zeros(1, 2, 1), np.array([2, 1]), 4)
        with pytest.raises(ShapeError):
            toki.fill_ranks(torch.zeros(1, 2, 1), np.array([1]), 4)

    def test_decay_gradient(self, float64):
        generator = torch.Generator().manual_seed(4)
        toki = TokenInterpolation(2, init=-0.8)
        tokens = torch.randn(1, 3, 2, generator=generator)
        ranks = np.array([1, 4, 5])

        def loss():
            return torch.sum(toki.fill_ranks(tokens, ranks, 8) ** 2)

        assert max_gradient_error(loss, [toki.log_decay]) < 1e-6

    def test_decay_stays_negative_after_update(self, float64):
        toki = TokenInterpolation(2)
        with torch.no_grad():
            toki.log_decay.add_(5.0)
        toki.validate()
        assert (toki.a_prime < 0).all()


class TestLearnableFill:
    def test_masked_positions_share_token(self, float64):
        fill = LearnableTokenFill(3)
        tokens = torch.randn(2, 2, 3)
        dense = fill.fill_ranks(tokens, np.array([0, 3]), 5)
        assert torch.equal(dense[:, [0, 3]], tokens)
        for rank in (1, 2, 4):
            assert torch.equal(dense[0, rank], fill.token.detach())

    def test_token_receives_gradient(self, float64):
        fill = LearnableTokenFill(2)
        dense = fill.fill_ranks(torch.zeros(1, 1, 2), np.array([1]), 3)
        dense.sum().backward()
        assert fill.token.grad.tolist() == [2.0, 2.0]

    def test_no_visible_tokens(self, float64):
        with pytest.raises(ValueError):
            LearnableTokenFill(2).fill_ranks(torch.zeros(1, 0, 2), np.array([], dtype=np.int64), 3)

    def test_tokens_start_at_the_shared_init_scale(self):
        torch.manual_seed(0)
        fill = LearnableTokenFill(4096)
        assert fill.token.detach().std().item() == pytest.approx(TOKEN_INIT_STD, rel=0.1)
        decoder = HybridDecoder([4096, 4096], model_dim=8)
        for token in decoder.fill_tokens:
            assert token.detach().std().item() == pytest.approx(TOKEN_INIT_STD, rel=0.1)
