from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from irrevdyn.config import ConfigError, load_config, parse_config, volume_sites

CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.yaml"))


def problems(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "cfg.yaml")
    return info.value.lines()


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_shipped_configs_are_valid(path):
    cfg = load_config(path)
    assert cfg.experiment in path.read_text()


def test_defaults_fill_in():
    cfg = parse_config("experiment: check-hypotheses\nmodel: {name: dephasing}\nvolume: {sites: 1}\n")
    assert cfg.volume.kind == "chain" and cfg.volume.max_dim == 256
    assert cfg.tolerances.check == 1e-10 and cfg.seed is None
    assert cfg.times.grid()[0] == 0.0
    assert volume_sites(cfg) == [1]


def test_negative_rate_names_field_and_line():
    text = "experiment: check-hypotheses\nmodel:\n  name: dephasing\n  params:\n    gamma: -0.5\nvolume: {sites: 1}\n"
    (line,) = problems(text)
    assert line == "cfg.yaml:5: model.params.gamma: must be >= 0, got -0.5"


def test_unknown_model_and_parameter():
    (line,) = problems("experiment: lr-scan\nmodel: {name: nope}\nvolume: {sites: 1}\n")
    assert "model.name" in line and "unknown model 'nope'" in line and line.startswith("cfg.yaml:2:")
    (line,) = problems("experiment: lr-scan\nmodel: {name: dephasing, params: {omega: 1}}\nvolume: {sites: 1}\n")
    assert "model.params.omega: unknown parameter" in line


def test_schema_errors_carry_lines():
    text = "experiment: lr-scan\nmodel: {name: dephasing}\ntolerances:\n  ode: -1\nbogus: 3\n"
    lines = problems(text)
    assert any(l.startswith("cfg.yaml:4: tolerances.ode") for l in lines)
    assert any(l.startswith("cfg.yaml:5: bogus") for l in lines)
    (line,) = problems("experiment: fly\nmodel: {name: dephasing}\n")
    assert line.startswith("cfg.yaml:1: experiment")


def test_yaml_syntax_error():
    (line,) = problems("experiment: [lr-scan\nmodel: x\n")
    assert "YAML syntax error" in line


def test_seed_is_mandatory_for_random_models():
    (line,) = problems("experiment: lr-scan\nmodel: {name: random-decaying}\nvolume: {sites: 3}\n")
    assert "seed: model random-decaying is random; a seed is mandatory" in line
    parse_config("experiment: lr-scan\nmodel: {name: random-decaying}\nvolume: {sites: 3}\nseed: 4\n")


def test_volume_cap_suggests_smaller_volume():
    (line,) = problems("experiment: lr-scan\nmodel: {name: tfim-dephasing}\nvolume: {kind: chain, sites: 20}\n")
    assert "above the cap 256; use at most 8 sites" in line
    (line,) = problems(
        "experiment: euler-convergence\nmodel: {name: tfim-dephasing}\nvolume: {sites: 8, max_dim: 4096}\n"
    )
    assert "superoperators" in line and "use at most 6 sites" in line
    (line,) = problems("experiment: lr-scan\nmodel: {name: dephasing}\nvolume: {sites: 3, max_dim: 8192}\n")
    assert "volume.max_dim" in line


def test_volume_kind_requirements():
    (line,) = problems("experiment: lr-scan\nmodel: {name: dephasing}\n")
    assert "volume.sites: required for volume kind chain" in line
    (line,) = problems("experiment: lr-scan\nmodel: {name: dephasing}\nvolume: {kind: grid, nx: 2}\n")
    assert "volume.ny: required" in line
    lines = problems("experiment: thermo-sweep\nmodel: {name: dephasing}\nvolume: {kind: chain, sites: 3}\n")
    assert any("centered-chains" in l for l in lines)
    (line,) = problems(
        "experiment: thermo-sweep\nmodel: {name: dephasing}\nvolume: {kind: centered-chains, half_widths: [2, 1]}\n"
    )
    assert "strictly increasing" in line


def test_custom_model_terms():
    text = """
experiment: check-hypotheses
model:
  name: custom
  terms:
    - place: bonds
      phi: ZZ
    - place: sites
      lindblads: [Z, [[[0, 0], [0, 0]], [[1, 0], [0, 0]]]]
      rate: 0.2
volume: {sites: 3}
"""
    cfg = parse_config(text)
    assert len(cfg.model.terms) == 2
    bad = text.replace("phi: ZZ", "phi: QQ")
    assert any("unknown Pauli string" in l for l in problems(bad))
    odd = text.replace("[[[0, 0], [0, 0]], [[1, 0], [0, 0]]]", "[[[0, 0], [0, 0]]]")
    assert any("square" in l for l in problems(odd))


def test_time_grid_forms():
    head = "experiment: lr-scan\nmodel: {name: dephasing}\nvolume: {sites: 1}\n"
    cfg = parse_config(head + "times: {values: [0.0, 0.5, 1.0]}\n")
    assert cfg.times.grid() == [0.0, 0.5, 1.0]
    (line,) = problems(head + "times: {values: [0.5, 0.0, 1.0]}\n")
    assert line.startswith("cfg.yaml:4: times") and "nondecreasing" in line
    cfg = parse_config(head + "times: {start: 0, stop: 2, num: 21}\n")
    assert len(cfg.times.grid()) == 21 and cfg.times.grid()[-1] == 2.0


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.yaml")


@given(st.floats(-10, 10, allow_nan=False))
def test_rate_sign_decides_validity(gamma):
    text = (
        "experiment: check-hypotheses\nvolume: {sites: 1}\n"
        f"model: {{name: amplitude-damping, params: {{gamma: {gamma!r}}}}}\n"
    )
    if gamma < 0:
        assert problems(text)
    else:
        assert parse_config(text).model.params["gamma"] == gamma
