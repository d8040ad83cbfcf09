"""Command-line runner: ``irrevdyn run | validate | models list | models show``.

Exit codes: 0 success, 1 a gating assertion failed (bound domination or a
generator hypothesis), 2 invalid configuration, 3 runtime failure.

Set ``IRREVDYN_CACHE_DIR`` to cache experiment cells on disk.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config, volume_sites
from .models import card, list_models

CACHE_ENV = "IRREVDYN_CACHE_DIR"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):  # numpy scalars
        return _jsonable(v.item())
    return v


def _write_plot(path: Path, draw) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "irrevdyn"
    fig, ax = plt.subplots(figsize=(6, 4))
    draw(ax)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _apply_seed_override(cfg: ExperimentConfig, seed: int | None) -> ExperimentConfig:
    if seed is None:
        return cfg
    data = cfg.model_dump()
    data["seed"] = seed
    if "seed" in data["model"]["params"]:
        data["model"]["params"]["seed"] = seed
    return ExperimentConfig.model_validate(data)


def _report(cfg: ExperimentConfig, result, out: Path) -> str:
    lines = [
        f"experiment: {cfg.experiment}",
        f"model: {cfg.model.name} {dict(cfg.model.params) or ''}".rstrip(),
        f"volume: {cfg.volume.kind}, sites {volume_sites(cfg)}",
        f"seed: {'none' if cfg.seed is None else cfg.seed}",
        f"rows: {len(result.rows)} -> {out / 'results.csv'}",
        "",
    ]
    for a in result.assertions:
        tag = "PASS" if a.passed else "FAIL"
        kind = "" if a.gating else " (informational)"
        lines.append(f"[{tag}] {a.name}{kind}: {a.detail}")
    lines.append("")
    lines.append("overall: " + ("PASS" if result.ok else "FAIL"))
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    from .experiments import environment_info, run_experiment

    try:
        cfg = _apply_seed_override(load_config(args.config), args.seed_override)
    except ConfigError as exc:
        print("\n".join(exc.lines()), file=sys.stderr)
        return 2
    out = Path(args.out or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        result = run_experiment(cfg, threads=args.threads, cache_dir=os.environ.get(CACHE_ENV))
    except Exception as exc:  # surfaced as a diagnostic, not a traceback
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    elapsed = time.perf_counter() - t0
    write_csv(out / "results.csv", result.columns, result.rows)
    summary = {
        "inputs": cfg.model_dump(mode="json"),
        "environment": environment_info(),
        "seed": cfg.seed,
        "assertions": [
            {"name": a.name, "passed": a.passed, "gating": a.gating, "detail": a.detail} for a in result.assertions
        ],
        "passed": result.ok,
        "results": result.summary,
        "elapsed_seconds": elapsed,
    }
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    report = _report(cfg, result, out)
    (out / "report.txt").write_text(report)
    if cfg.plot and result.plot is not None:
        try:
            _write_plot(out / "plot.svg", result.plot)
        except ImportError:
            print("warning: plot: true needs matplotlib (pip install irrevdyn[plot]); skipped", file=sys.stderr)
    sys.stdout.write(report)
    return 0 if result.ok else 1


def cmd_validate(args) -> int:
    try:
        cfg = _apply_seed_override(load_config(args.config), args.seed_override)
    except ConfigError as exc:
        print("\n".join(exc.lines()), file=sys.stderr)
        return 2
    from .experiments import KINDS

    n_cells = len(KINDS[cfg.experiment][0](cfg))
    sizes = volume_sites(cfg)
    print(f"ok: {cfg.experiment} on {cfg.model.name}, sites {sizes}, total dimension {[2**n for n in sizes]}")
    print(f"cells: {n_cells}")
    return 0


def cmd_models(args) -> int:
    if args.action == "list":
        for name in list_models():
            print(f"{name:20s} {card(name).summary}")
        return 0
    try:
        print(card(args.name).describe())
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="irrevdyn", description="Irreversible quantum dynamics experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="YAML experiment config")
        sp.add_argument("--seed-override", type=int, default=None, help="replace the config seed")

    r = sub.add_parser("run", help="run an experiment and write artifacts")
    common(r)
    r.add_argument("--out", default=None, help="output directory (default: config 'output')")
    r.add_argument("--threads", type=int, default=1, help="worker processes for independent cells")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check a config without computing")
    common(v)
    v.set_defaults(func=cmd_validate)

    m = sub.add_parser("models", help="list or describe registered models")
    msub = m.add_subparsers(dest="action", required=True)
    msub.add_parser("list")
    show = msub.add_parser("show")
    show.add_argument("name")
    m.set_defaults(func=cmd_models)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("--threads must be >= 1", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
