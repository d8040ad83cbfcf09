import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from irrevdyn.cli import main

CONFIGS = Path(__file__).parent.parent / "configs"


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(tmp_path, text, *extra, out="out"):
    cfg = write(tmp_path, text)
    code = main(["run", "--config", cfg, "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(autouse=True)
def no_cache(monkeypatch):
    monkeypatch.delenv("IRREVDYN_CACHE_DIR", raising=False)


def test_check_hypotheses_dephasing(tmp_path, capsys):
    code, out = run(tmp_path, "experiment: check-hypotheses\nmodel: {name: dephasing}\nvolume: {sites: 2}\nseed: 0\n")
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    d = summary["results"]["defects"]
    assert d["unit_defect"] <= 1e-10 and d["hermiticity_defect"] <= 1e-10
    assert d["dissipativity_min"] >= -1e-10 and d["dissipativity_residual"] <= 1e-10
    assert summary["passed"] and summary["environment"]["numpy"]
    assert "overall: PASS" in (out / "report.txt").read_text()
    assert "overall: PASS" in capsys.readouterr().out


def test_lr_scan_zero_generator(tmp_path):
    text = """experiment: lr-scan
model: {name: dephasing, params: {gamma: 0.0}}
volume: {sites: 4}
times: {start: 0.0, stop: 1.0, num: 3}
probes: {observable: X, site: 1}
lr: {mu_grid: [1.0], bound_form: iterated}
"""
    code, out = run(tmp_path, text)
    assert code == 0
    rows = read_rows(out / "results.csv")
    assert rows and list(rows[0]) == [
        "mu", "site", "distance", "time", "empirical", "bound_sum", "bound_iterated", "bound_exp", "ratio"
    ]
    assert all(float(r["empirical"]) == 0.0 for r in rows if r["site"] != "1")
    cert = json.loads((out / "summary.json").read_text())["results"]["certificates"][0]
    assert set(cert) >= {"mu", "alpha", "f_norm", "c_mu", "psi_norm", "velocity"}


def test_negative_rate_is_a_config_error(tmp_path, capsys):
    code, out = run(tmp_path, "experiment: check-hypotheses\nmodel:\n  name: dephasing\n  params: {gamma: -1}\nvolume: {sites: 1}\n")
    assert code == 2
    assert "cfg.yaml:4: model.params.gamma: must be >= 0" in capsys.readouterr().err
    assert not (out / "results.csv").exists()


def test_validate_examples(tmp_path, capsys):
    assert main(["validate", "--config", str(CONFIGS / "lr-tfim.yaml")]) == 0
    assert capsys.readouterr().out.startswith("ok: lr-scan on tfim-dephasing")
    big = write(tmp_path, "experiment: euler-convergence\nmodel: {name: tfim-dephasing}\nvolume: {sites: 20}\n")
    assert main(["validate", "--config", big]) == 2
    assert "use at most 8 sites" in capsys.readouterr().err
    unknown = write(tmp_path, "experiment: lr-scan\nmodel: {name: warp-drive}\nvolume: {sites: 2}\n", "u.yaml")
    assert main(["validate", "--config", unknown]) == 2
    assert "unknown model 'warp-drive'" in capsys.readouterr().err


def test_models_subcommands(capsys):
    assert main(["models", "list"]) == 0
    listing = capsys.readouterr().out
    assert "tfim-dephasing" in listing and "random-decaying" in listing
    assert main(["models", "show", "amplitude-damping"]) == 0
    assert "closed form" in capsys.readouterr().out
    assert main(["models", "show", "nope"]) == 2


def test_bad_thread_count(tmp_path):
    cfg = write(tmp_path, "experiment: check-hypotheses\nmodel: {name: dephasing}\nvolume: {sites: 1}\n")
    assert main(["run", "--config", cfg, "--threads", "0"]) == 2


def test_gating_failure_exits_one(tmp_path):
    # the plain sum form sits below ||[A, B]|| = 2 at t = 0 on the shared site
    text = """experiment: bound-domination
model: {name: tfim-dephasing}
volume: {sites: 2}
times: {values: [0.0, 0.1]}
probes: {b_sites: [0], basis: XZ}
"""
    code, out = run(tmp_path, text)
    assert code == 1
    summary = json.loads((out / "summary.json").read_text())
    failed = [a for a in summary["assertions"] if not a["passed"]]
    assert [a["name"] for a in failed] == ["domination-sum"]
    assert "all with overlapping supports" in failed[0]["detail"]


def test_seed_override_and_determinism(tmp_path):
    text = """experiment: bound-domination
model: {name: random-decaying}
volume: {sites: 3}
times: {values: [0.0, 0.5]}
probes: {basis: XZ}
lr: {bound_form: iterated}
seed: 3
"""
    _, a = run(tmp_path, text, out="a")
    _, b = run(tmp_path, text, "--threads", "2", out="b")
    _, c = run(tmp_path, text, "--seed-override", "4", out="c")
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()
    assert (a / "results.csv").read_bytes() != (c / "results.csv").read_bytes()
    assert json.loads((c / "summary.json").read_text())["seed"] == 4


def test_plot_is_reproducible(tmp_path):
    text = "experiment: euler-convergence\nmodel: {name: dephasing}\nvolume: {sites: 1}\neuler: {n: [10, 20]}\nplot: true\n"
    _, a = run(tmp_path, text, out="a")
    _, b = run(tmp_path, text, out="b")
    assert (a / "plot.svg").read_bytes() == (b / "plot.svg").read_bytes()


def test_cache_directory_is_used(tmp_path, monkeypatch):
    cache = tmp_path / "cache"
    monkeypatch.setenv("IRREVDYN_CACHE_DIR", str(cache))
    text = "experiment: check-hypotheses\nmodel: {name: dephasing}\nvolume: {sites: 1}\n"
    _, a = run(tmp_path, text, out="a")
    assert any(cache.rglob("*"))
    _, b = run(tmp_path, text, out="b")
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "irrevdyn.cli", "models", "list"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0 and "dephasing" in proc.stdout
