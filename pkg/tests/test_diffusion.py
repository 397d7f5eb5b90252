"""Tests for the noise schedule, the training losses and DDIM sampling."""

import numpy as np
import pytest
import torch

from posetryon.attention.core import AttentionRecord
from posetryon.diffusion import (
    LossConfig,
    NoiseSchedule,
    add_noise,
    ddim_sample,
    ddim_timesteps,
    guide,
    initial_noise,
    ldm_loss,
    loss_components,
    q_sample,
    total_loss,
    tra_loss,
)
from posetryon.errors import ConfigurationError, ShapeError


def _swap_record(gamma_layer: str = "up.0") -> AttentionRecord:
    first = torch.tensor([[1.0, 0.0], [0.0, 1.0]])
    second = torch.tensor([[0.0, 1.0], [1.0, 0.0]])
    return AttentionRecord(gamma_layer, torch.stack([first, second]).unsqueeze(0))


class TestNoiseSchedule:
    """Tests for ``NoiseSchedule`` and the forward process."""

    def test_default_range(self) -> None:
        schedule = NoiseSchedule.linear()
        assert schedule.num_steps == 1000
        assert schedule.beta[0] == pytest.approx(1e-4)
        assert schedule.beta[-1] == pytest.approx(0.02)

    def test_alpha_bar_consistency(self) -> None:
        schedule = NoiseSchedule.linear(200)
        recomputed = np.array([np.prod(1.0 - schedule.beta[: t + 1]) for t in range(200)])
        assert np.max(np.abs(recomputed - schedule.alpha_bar)) < 1e-12

    def test_alpha_bar_out_of_range(self) -> None:
        schedule = NoiseSchedule.linear(10)
        with pytest.raises(IndexError):
            schedule.alpha_bar_at(10)
        with pytest.raises(IndexError):
            schedule.alpha_bar_at(torch.tensor([0, -1]))

    def test_invalid_lengths(self) -> None:
        with pytest.raises(ConfigurationError):
            NoiseSchedule.linear(0)
        with pytest.raises(ConfigurationError):
            NoiseSchedule.linear(10, beta_start=0.02, beta_end=0.01)

    def test_q_sample_quarter(self) -> None:
        z = q_sample(torch.ones(2, 3), torch.zeros(2, 3), 0.25)
        assert torch.allclose(z, torch.full((2, 3), 0.5))

    def test_q_sample_limits(self) -> None:
        z0, eps = torch.randn(4), torch.randn(4)
        assert torch.equal(q_sample(z0, eps, 1.0), z0)
        assert torch.equal(q_sample(z0, eps, 0.0), eps)

    def test_add_noise_per_item_timesteps(self) -> None:
        schedule = NoiseSchedule.linear(100)
        z0, eps = torch.randn(2, 3, 4), torch.randn(2, 3, 4)
        z = add_noise(schedule, z0, eps, torch.tensor([0, 99]))
        for i, t in enumerate((0, 99)):
            a = float(schedule.alpha_bar[t])
            assert torch.allclose(z[i], a**0.5 * z0[i] + (1 - a) ** 0.5 * eps[i], atol=1e-6)

    def test_add_noise_shape_mismatch(self) -> None:
        with pytest.raises(ValueError):
            add_noise(NoiseSchedule.linear(10), torch.zeros(2), torch.zeros(3), 0)


class TestLosses:
    """Tests for ``ldm_loss``, ``tra_loss`` and ``total_loss``."""

    def test_ldm_examples(self) -> None:
        eps = torch.randn(2, 3, 4)
        assert float(ldm_loss(eps, eps)) == 0.0
        assert float(ldm_loss(eps + 1, eps)) == pytest.approx(1.0)

    def test_ldm_matches_sum_of_squares(self) -> None:
        g = torch.Generator().manual_seed(0)
        a, b = torch.randn(3, 5, generator=g), torch.randn(3, 5, generator=g)
        expected = sum(float(x - y) ** 2 for x, y in zip(a.flatten(), b.flatten())) / 15
        assert float(ldm_loss(a, b)) == pytest.approx(expected, abs=1e-7)

    def test_tra_hand_example(self) -> None:
        assert float(tra_loss([_swap_record()], LossConfig(gamma=0.5, tra_layers=1))) == 0.5

    def test_tra_linear_in_gamma(self) -> None:
        records = [AttentionRecord("up.0", torch.rand(2, 3, 4, 6))]
        base = float(tra_loss(records, LossConfig(gamma=0.5, tra_layers=1)))
        doubled = float(tra_loss(records, LossConfig(gamma=1.0, tra_layers=1)))
        assert doubled == pytest.approx(2 * base)
        assert base >= 0.0

    def test_tra_identical_frames_and_single_frame(self) -> None:
        same = torch.rand(1, 1, 4, 6).expand(2, 3, 4, 6)
        cfg = LossConfig(tra_layers=2)
        assert float(tra_loss([AttentionRecord("a", same)], cfg)) == 0.0
        assert float(tra_loss([AttentionRecord("b", torch.rand(2, 1, 4, 6))], cfg)) == 0.0

    def test_tra_per_layer_gammas(self) -> None:
        cfg = LossConfig(tra_layers=2, gammas=[1.0, 0.0])
        records = [_swap_record("up.1"), _swap_record("up.0")]
        assert float(tra_loss(records, cfg)) == 1.0

    def test_tra_rejects_flat_maps(self) -> None:
        with pytest.raises(ShapeError):
            tra_loss([AttentionRecord("up.0", torch.rand(3, 4, 6))], LossConfig())

    def test_gamma_count_mismatch(self) -> None:
        with pytest.raises(ConfigurationError):
            LossConfig(tra_layers=2, gammas=[0.5])

    def test_total_arithmetic(self) -> None:
        eps = torch.zeros(4)
        ldm, tra, total = loss_components(eps + 1, eps, [_swap_record()], LossConfig(tra_layers=1))
        assert float(ldm) == 1.0
        assert float(tra) == 0.5
        assert float(total) == pytest.approx(1.0005)

    def test_zero_lambda_is_ldm(self) -> None:
        eps_pred, eps = torch.randn(2, 4), torch.randn(2, 4)
        cfg = LossConfig(lam=0.0, tra_layers=1)
        total = total_loss(eps_pred, eps, [_swap_record()], cfg)
        assert torch.equal(total, ldm_loss(eps_pred, eps))

    def test_both_zero(self) -> None:
        eps = torch.zeros(3)
        same = AttentionRecord("up.0", torch.ones(1, 2, 2, 2))
        assert float(total_loss(eps, eps, [same], LossConfig(tra_layers=1))) == 0.0


class TestSampler:
    """Tests for guidance and DDIM."""

    def test_guide_scale_one(self) -> None:
        c, u = torch.randn(5), torch.randn(5)
        assert torch.equal(guide(c, u, 1.0), c)

    def test_guide_arithmetic(self) -> None:
        c, u = torch.tensor([2.0]), torch.tensor([1.0])
        assert float(guide(c, u, 1.5)) == 2.5

    def test_timesteps(self) -> None:
        assert ddim_timesteps(1000, 1) == [999]
        steps = ddim_timesteps(1000, 25)
        assert steps[0] == 999 and steps[-1] == 0 and len(steps) == 25
        assert all(a > b for a, b in zip(steps, steps[1:]))

    def test_invalid_steps(self) -> None:
        schedule = NoiseSchedule.linear(10)
        with pytest.raises(ConfigurationError):
            ddim_sample(lambda z, t, c: z, torch.zeros(2), schedule, 0)
        with pytest.raises(ConfigurationError):
            ddim_sample(lambda z, t, c: z, torch.zeros(2), schedule, 11)

    def test_true_noise_recovers_clean_latent(self) -> None:
        schedule = NoiseSchedule.linear(100)
        z0 = torch.randn(2, 3, 4, dtype=torch.float64)
        eps = torch.randn(2, 3, 4, dtype=torch.float64)
        z_t = add_noise(schedule, z0, eps, 99)
        out = ddim_sample(lambda z, t, c: eps, z_t, schedule, 1, guidance_scale=1.0)
        assert torch.allclose(out, z0, atol=1e-10)

    def test_guidance_branches(self) -> None:
        calls: list[bool] = []

        def eps_fn(z: torch.Tensor, t: int, conditional: bool) -> torch.Tensor:
            calls.append(conditional)
            return torch.zeros_like(z)

        schedule = NoiseSchedule.linear(10)
        ddim_sample(eps_fn, torch.zeros(2), schedule, 2, guidance_scale=1.0)
        assert calls == [True, True]
        calls.clear()
        ddim_sample(eps_fn, torch.zeros(2), schedule, 2, guidance_scale=1.5)
        assert sorted(calls) == [False, False, True, True]

    def test_deterministic(self) -> None:
        schedule = NoiseSchedule.linear(50)

        def eps_fn(z: torch.Tensor, t: int, conditional: bool) -> torch.Tensor:
            return 0.3 * z + (0.1 if conditional else -0.1)

        a = ddim_sample(eps_fn, initial_noise((2, 4), seed=3), schedule, 5)
        b = ddim_sample(eps_fn, initial_noise((2, 4), seed=3), schedule, 5)
        assert torch.equal(a, b)
        assert not torch.equal(initial_noise((2, 4), seed=3), initial_noise((2, 4), seed=4))
