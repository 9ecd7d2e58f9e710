# ==============================================================================
# test_run_config.py  –  Tests for run-config files, presets and overrides
# ==============================================================================

from dataclasses import replace

import pytest

from singshift.schedule.mixing_schedule import jt_ft, linear
from singshift.trainer.config import (
    PRESETS,
    ConfigError,
    ExperimentConfig,
    MixMode,
    TrainConfig,
    preset,
)
from singshift.utils.run_config import (
    apply_overrides,
    load_run_config,
    parse_run_config,
    parse_sections,
    render_run_config,
)


# ------------------------------------------------------------------------------
# Presets
# ------------------------------------------------------------------------------
@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_render_and_parse_back(name):
    exp = preset(name)
    text = render_run_config(exp)
    assert parse_run_config(text) == exp
    assert render_run_config(parse_run_config(text)) == text


def test_paper_preset_values():
    exp = preset("paper")
    assert exp.dsp.sample_rate == 24000
    assert exp.dsp.n_mels == 80
    assert exp.train.weights.lambda_m == 45.0
    assert exp.train.weights.lambda_f == 2.0


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset("studio")


# ------------------------------------------------------------------------------
# Parsing
# ------------------------------------------------------------------------------
def test_partial_file_fills_from_preset():
    exp = parse_run_config("[train]\npreset = micro\nlr = 0.005\n[schedule]\nT_start = 1\nT_end = 1\n")
    assert exp.preset == "micro"
    assert exp.train.lr == 0.005
    assert exp.schedule == jt_ft(1, 4)
    assert exp.am == preset("micro").am


def test_epochs_follow_schedule_length():
    exp = parse_run_config("[train]\npreset = micro\n[schedule]\nT_max = 6\n")
    assert exp.train.epochs == 6


def test_booleans_tuples_and_enums():
    exp = parse_run_config(
        "[train]\npreset = micro\nmix_mode = bernoulli\n[voc]\nperiods = 2, 5\n[data]\ninventory = a, i\n"
        "[am]\nphoneme_vocab = 3\n"
    )
    assert exp.train.mix_mode == MixMode.BERNOULLI.value
    assert exp.voc.periods == (2, 5)
    assert exp.data.inventory == ("a", "i")


@pytest.mark.parametrize(
    "text, line_no",
    [
        ("[schedule]\nK = lots\n", 2),
        ("[schedule]\nshape = wavy\n", 2),
        ("lr = 1\n", 1),
        ("[train]\nlr\n", 2),
        ("[train]\nlr = 1\nlr = 2\n", 3),
        ("[train]\n[train]\n", 2),
        ("[cooking]\nsalt = 1\n", 2),
        ("[schedule]\nK = 1.5\n", 2),
    ],
)
def test_errors_carry_line_numbers(text, line_no):
    with pytest.raises(ConfigError) as excinfo:
        parse_run_config(text)
    assert excinfo.value.line_no == line_no
    assert f"line {line_no}" in str(excinfo.value)


def test_cross_section_consistency():
    with pytest.raises(ConfigError, match="n_mels"):
        parse_run_config("[train]\npreset = micro\n[dsp]\nn_mels = 20\n")
    with pytest.raises(ConfigError, match="upsample"):
        parse_run_config("[train]\npreset = micro\n[voc]\nupsample_factors = 5, 4\n")


def test_epochs_must_match_schedule():
    with pytest.raises(ConfigError):
        TrainConfig(schedule=jt_ft(2, 4), epochs=5)


def test_comments_and_blank_lines():
    sections = parse_sections("# header\n\n[train]  # trailing\nlr = 0.1  # note\n")
    assert sections == {"train": [(4, "lr", "0.1")]}


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "missing.txt")


def test_load_from_file(tmp_path):
    path = tmp_path / "run.txt"
    path.write_text(render_run_config(preset("micro")))
    assert load_run_config(path) == preset("micro")


# ------------------------------------------------------------------------------
# Overrides
# ------------------------------------------------------------------------------
def test_overrides_apply_on_top():
    exp = apply_overrides(preset("micro"), {"schedule.pattern": "linear", "schedule.T_start": "0", "schedule.T_end": "4"})
    assert exp.schedule == linear(1.0, 0, 4, 4)


def test_t_max_override_moves_epochs():
    exp = apply_overrides(preset("micro"), {"schedule.T_max": "8"})
    assert exp.schedule.T_max == 8
    assert exp.train.epochs == 8


@pytest.mark.parametrize("key", ["lr", "kitchen.lr"])
def test_bad_override_keys(key):
    with pytest.raises(ConfigError):
        apply_overrides(preset("micro"), {key: "1"})


def test_with_schedule_keeps_epochs_consistent():
    exp = preset("micro").with_schedule(jt_ft(3, 9))
    assert isinstance(exp, ExperimentConfig)
    assert exp.train.epochs == 9
    assert replace(exp.train, lr=1e-3).schedule.T_max == 9
