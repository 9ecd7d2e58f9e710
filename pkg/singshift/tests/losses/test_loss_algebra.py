# ==============================================================================
# test_loss_algebra.py  –  Tests for loss terms, mixing and composition
# ==============================================================================

import math

import pytest
import torch

from singshift.dsp.features import STFT_PRESETS
from singshift.losses.loss_algebra import (
    LOG_COLUMNS,
    DivergenceError,
    LossError,
    LossWeights,
    adversarial_generator_loss,
    compose,
    discriminator_loss,
    feature_matching_loss,
    format_log_line,
    mel_reconstruction_loss,
    mix,
    parse_log_line,
)
from singshift.schedule.mixing_schedule import MixWeight

DESK = STFT_PRESETS["desk"]


def _t(value):
    return torch.tensor(float(value), dtype=torch.float64)


def _compose(p, weights=LossWeights(), **overrides):
    terms = {
        "l_d": _t(0.0), "l_ma": _t(0.0),
        "l_adv_pred": _t(0.0), "l_adv_gt": _t(0.0),
        "l_f_pred": _t(0.0), "l_f_gt": _t(0.0),
        "l_m_pred": _t(0.0), "l_m_gt": _t(0.0),
        "l_disc_pred": _t(0.0), "l_disc_gt": _t(0.0),
    }
    terms.update({k: _t(v) for k, v in overrides.items()})
    return compose(MixWeight(p, 0), weights, **terms)


# ------------------------------------------------------------------------------
# mix
# ------------------------------------------------------------------------------
def test_mix_midpoint():
    assert mix(0.5, 2.0, 4.0) == 3.0


@pytest.mark.parametrize("p, expected", [(0.0, 7.0), (1.0, 5.0)])
def test_mix_endpoints(p, expected):
    assert mix(p, 5.0, 7.0) == expected


def test_mix_accepts_schedule_weight():
    assert mix(MixWeight(0.25, 3), 4.0, 0.0) == 1.0


@pytest.mark.parametrize("p", [-0.01, 1.5])
def test_mix_rejects_out_of_range(p):
    with pytest.raises(LossError):
        mix(p, 1.0, 2.0)


# ------------------------------------------------------------------------------
# Adversarial terms
# ------------------------------------------------------------------------------
def test_generator_adversarial_values():
    assert float(adversarial_generator_loss([torch.ones(3, 5), torch.ones(3, 2)])) == 0.0
    assert float(adversarial_generator_loss([torch.zeros(3, 5)])) == 1.0
    half = torch.tensor([[0.0, 1.0]])
    assert float(adversarial_generator_loss([half])) == 0.5


def test_discriminator_loss_values():
    ones, zeros = [torch.ones(2, 4)], [torch.zeros(2, 4)]
    assert float(discriminator_loss(ones, zeros)) == 0.0
    assert float(discriminator_loss(zeros, ones)) == 2.0


def test_discriminator_loss_matches_elementwise_sum():
    gen = torch.Generator().manual_seed(2)
    real = [torch.randn(2, 3, generator=gen), torch.randn(2, 5, generator=gen)]
    fake = [torch.randn(2, 3, generator=gen), torch.randn(2, 5, generator=gen)]

    expected = 0.0
    for dr, dg in zip(real, fake):
        n = dr.numel()
        expected += sum((float(v) - 1.0) ** 2 for v in dr.flatten()) / n
        expected += sum(float(v) ** 2 for v in dg.flatten()) / n
    expected /= 2

    assert float(discriminator_loss(real, fake)) == pytest.approx(expected, rel=1e-6)


def test_adversarial_shape_checks():
    with pytest.raises(LossError):
        adversarial_generator_loss([])
    with pytest.raises(LossError):
        discriminator_loss([torch.ones(2)], [])
    with pytest.raises(LossError):
        discriminator_loss([torch.ones(2)], [torch.ones(3)])


# ------------------------------------------------------------------------------
# Feature matching
# ------------------------------------------------------------------------------
def test_feature_matching_values():
    real = [[torch.zeros(2, 3), torch.zeros(4)], [torch.zeros(5)]]
    assert float(feature_matching_loss(real, real)) == 0.0
    shifted = [[f + 1.0 for f in fmaps] for fmaps in real]
    assert float(feature_matching_loss(real, shifted)) == 1.0


def test_feature_matching_brute_force():
    gen = torch.Generator().manual_seed(5)
    real = [[torch.randn(3, generator=gen), torch.randn(2, 2, generator=gen)]]
    fake = [[torch.randn(3, generator=gen), torch.randn(2, 2, generator=gen)]]
    layer_means = [
        sum(abs(float(a) - float(b)) for a, b in zip(r.flatten(), f.flatten())) / r.numel()
        for r, f in zip(real[0], fake[0])
    ]
    assert float(feature_matching_loss(real, fake)) == pytest.approx(sum(layer_means) / 2, rel=1e-6)


def test_feature_matching_blocks_gradient_to_real_maps():
    real = [[torch.randn(4, requires_grad=True)]]
    fake = [[torch.randn(4, requires_grad=True)]]
    feature_matching_loss(real, fake).backward()
    assert real[0][0].grad is None
    assert fake[0][0].grad is not None


def test_feature_matching_layer_mismatch():
    with pytest.raises(LossError):
        feature_matching_loss([[torch.zeros(2)]], [[torch.zeros(2), torch.zeros(2)]])


# ------------------------------------------------------------------------------
# Mel reconstruction
# ------------------------------------------------------------------------------
def _tone(n_hops=12):
    t = torch.arange(n_hops * DESK.hop, dtype=torch.float64) / DESK.sample_rate
    return 0.3 * torch.sin(2 * math.pi * 440.0 * t) + 0.2 * torch.sin(2 * math.pi * 1210.0 * t)


def test_mel_reconstruction_of_exact_copy_is_zero():
    w = _tone()
    assert float(mel_reconstruction_loss(w.clone(), w, DESK)) == 0.0


def test_mel_reconstruction_scale_offset():
    alpha = 2.0
    w = _tone() + 0.05 * torch.randn(12 * DESK.hop, dtype=torch.float64, generator=torch.Generator().manual_seed(0))
    loss = mel_reconstruction_loss(alpha * w, w, DESK)
    assert float(loss) == pytest.approx(2.0 * math.log(alpha), rel=1e-6)


def test_mel_reconstruction_length_mismatch():
    w = _tone()
    with pytest.raises(LossError):
        mel_reconstruction_loss(w[: -2 * DESK.hop], w, DESK)


# ------------------------------------------------------------------------------
# Composition
# ------------------------------------------------------------------------------
def test_published_weights_totals():
    b = _compose(
        0.5,
        l_d=0.5, l_ma=0.5,
        l_adv_pred=1.0, l_adv_gt=1.0,
        l_f_pred=1.0, l_f_gt=1.0,
        l_m_pred=1.0, l_m_gt=1.0,
    )
    assert float(b.l_am) == 1.0
    assert float(b.l_v) == 48.0
    assert float(b.l_g) == 49.0
    assert float(b.l_tot) == 49.0


def test_p_zero_selects_ground_truth_terms():
    b = _compose(0.0, l_adv_pred=9, l_adv_gt=1, l_f_pred=9, l_f_gt=2, l_m_pred=9, l_m_gt=3, l_disc_pred=9, l_disc_gt=4)
    assert [float(b.l_adv_mix), float(b.l_f_mix), float(b.l_m_mix), float(b.l_disc_mix)] == [1, 2, 3, 4]


def test_p_one_selects_predicted_terms():
    b = _compose(1.0, l_adv_pred=1, l_adv_gt=9, l_f_pred=2, l_f_gt=9, l_m_pred=3, l_m_gt=9, l_disc_pred=4, l_disc_gt=9)
    assert [float(b.l_adv_mix), float(b.l_f_mix), float(b.l_m_mix), float(b.l_disc_mix)] == [1, 2, 3, 4]


def test_applied_weight_overrides_schedule_value():
    b = _compose(0.3, l_m_pred=10.0, l_m_gt=0.0, applied=1.0)
    assert float(b.l_m_mix) == 10.0
    assert b.p_used.p == 0.3
    assert b.applied == 1.0


def test_non_finite_component_raises():
    with pytest.raises(DivergenceError, match="L_f_gt"):
        _compose(0.5, l_f_gt=float("nan"))
    with pytest.raises(DivergenceError):
        _compose(0.5, l_d=float("inf"))


def test_loss_weights_validation():
    with pytest.raises(LossError):
        LossWeights(lambda_m=-1.0)
    with pytest.raises(LossError):
        LossWeights(lambda_f=float("nan"))


def test_scalars_cover_every_term():
    scalars = _compose(0.5, l_d=1.0).scalars()
    assert scalars["l_d"] == 1.0
    assert "l_tot" in scalars and "l_disc_mix" in scalars


def test_log_line_round_trip():
    b = _compose(0.25, l_d=0.5, l_adv_pred=1.0, l_m_gt=2.0)
    line = format_log_line(3, 7, b)
    row = parse_log_line(line)
    assert len(line.split()) == len(LOG_COLUMNS)
    assert row["epoch"] == 3 and row["iter"] == 7
    assert row["p"] == 0.25
    assert row["L_tot"] == pytest.approx(float(b.l_tot))


def test_log_line_keeps_every_digit():
    b = _compose(1 / 3, l_d=2 / 7, l_m_pred=0.1, l_m_gt=0.2)
    row = parse_log_line(format_log_line(0, 0, b))
    assert row["p"] == 1 / 3
    assert row["L_AM"] == float(b.l_am)
    assert row["L_m_mix"] == float(b.l_m_mix)
    assert row["L_tot"] == float(b.l_tot)


def test_parse_log_line_field_count():
    with pytest.raises(LossError):
        parse_log_line("1 2 3")
