import pytest
import yaml

from geneq.config import PRESETS, RunConfig, build_config, resolve_config
from geneq.errors import ValidationError


def base(tmp_path):
    for name in ("in.wav", "ref.csv"):
        (tmp_path / name).write_bytes(b"")
    return {"input": str(tmp_path / "in.wav"), "output": str(tmp_path / "out.wav"), "reference": str(tmp_path / "ref.csv")}


def test_defaults_are_piano_values(tmp_path):
    cfg = build_config(base(tmp_path))
    assert (cfg.schedule.sigma_start, cfg.schedule.sigma_min, cfg.schedule.rho, cfg.schedule.steps) == (0.5, 4e-5, 13.0, 51)
    assert cfg.schedule.s_churn == 10.0 and cfg.guidance.xi_prime == 1.0 and cfg.guidance.noise_reg_gamma == 0.25
    assert cfg.inner.iterations == 100 and cfg.inner.learning_rate == 10.0
    assert cfg.block.overlap_fraction == 0.10
    assert cfg.sampler_mode == "plain"


def test_vocals_preset(tmp_path):
    cfg = resolve_config(preset="vocals", overrides=base(tmp_path))
    assert cfg.schedule.sigma_start == 10.0 and cfg.schedule.sigma_min == 1e-3
    assert cfg.guidance.xi_prime == 0.5 and cfg.guidance.noise_reg_gamma == 1.0
    assert set(PRESETS) == {"piano", "vocals"}


def test_precedence(tmp_path):
    data = {"preset": "vocals", "seed": 4, "guidance": {"xi_prime": 0.8}, **base(tmp_path)}
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(data))
    cfg = resolve_config(path, overrides={"seed": 9, "mode": None})
    assert cfg.seed == 9  # command line beats file
    assert cfg.guidance.xi_prime == 0.8  # file beats preset
    assert cfg.schedule.sigma_start == 10.0  # preset beats defaults
    assert cfg.mode == "babe2"  # None overrides are ignored


def test_all_problems_reported_at_once(tmp_path):
    data = {
        "mode": "magic",
        "schedule": {"sigma_start": 1e-6, "steps": 1, "order": 3, "bogus": 1},
        "guidance": {"weighting": "loud", "noise_reg_gamma": -1},
        "block": {"overlap_fraction": 0.7},
        "inner": {"iterations": "many"},
        "input": str(tmp_path / "missing.wav"),
    }
    with pytest.raises(ValidationError) as info:
        build_config(data)
    text = "\n".join(info.value.problems)
    for needle in ("mode", "sigma_start", "schedule.steps", "schedule.order", "schedule.bogus", "weighting",
                   "noise_reg_gamma", "overlap_fraction", "inner.iterations", "does not exist", "output: required"):
        assert needle in text, needle
    assert len(info.value.problems) >= 11


def test_bad_yaml(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("a: [1, 2\n")
    with pytest.raises(ValidationError):
        resolve_config(p)
    p.write_text("- 1\n- 2\n")
    with pytest.raises(ValidationError):
        resolve_config(p)


def test_unknown_preset(tmp_path):
    with pytest.raises(ValidationError):
        resolve_config(preset="organ", overrides=base(tmp_path))


def test_round_trip_dict(tmp_path):
    cfg = build_config(base(tmp_path))
    again = build_config(cfg.to_dict())
    assert again == cfg and isinstance(again, RunConfig)


def test_integer_like_floats_accepted(tmp_path):
    cfg = build_config({**base(tmp_path), "schedule": {"steps": 21.0}, "inner": {"learning_rate": 5}})
    assert cfg.schedule.steps == 21 and cfg.inner.learning_rate == 5.0
