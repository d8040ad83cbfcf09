"""Experiment kinds run by the command-line runner.

Each kind splits into independent keyed cells.  Cells may run on a worker
pool and may be cached on disk; the assembled table is always ordered by
cell key so the output does not depend on completion order.
"""

from __future__ import annotations

import math
import os
import platform
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np
import scipy

from . import __version__
from .algebra import LocalOperator, Volume, pauli_string
from .config import ExperimentConfig
from .generator import (
    Constant,
    GeneratorSpec,
    InteractionTerm,
    PiecewiseLinear,
    Sinusoidal,
    check_hypotheses,
)
from .lattice import DecayFunction, centered_chain, chain, grid, power_law
from .lrbound import (
    certificate,
    domination_scan,
    lightcone_scan,
    lr_bound_exponential,
    lr_bound_iterated,
    lr_bound_sum,
)
from .models import _bonds, build, card, default_decay
from .propagator import euler_report, propagator_matrix
from .thermolimit import VolumeSequence, cauchy_sweep, sequence_certificate

__all__ = ["Assertion", "Result", "make_volume", "make_decay", "make_spec", "run_experiment", "FP_CAVEAT"]

FP_CAVEAT = (
    "results.csv is byte-identical for identical config, seed, package versions and platform; "
    "a different BLAS build, thread count inside BLAS, or CPU instruction set may change trailing digits"
)


@dataclass(frozen=True)
class Assertion:
    name: str
    passed: bool
    gating: bool
    detail: str = ""


@dataclass
class Result:
    columns: list[str]
    rows: list[dict]
    assertions: list[Assertion]
    summary: dict = field(default_factory=dict)
    plot: Callable | None = None

    @property
    def ok(self) -> bool:
        return all(a.passed for a in self.assertions if a.gating)


# -- building blocks from config ---------------------------------------------


def make_volume(cfg: ExperimentConfig, half_width: int | None = None) -> Volume:
    v = cfg.volume
    if v.kind == "chain":
        g = chain(v.sites)
    elif v.kind == "centered-chain":
        g = centered_chain(v.half_width)
    elif v.kind == "grid":
        g = grid(v.nx, v.ny)
    else:
        g = centered_chain(half_width if half_width is not None else max(v.half_widths or [4]))
    return Volume(g, cap=v.max_dim)


def make_decay(cfg: ExperimentConfig, volume: Volume) -> DecayFunction:
    if cfg.decay.alpha is None:
        return default_decay(volume.graph, cfg.decay.mu)
    return power_law(cfg.decay.alpha, cfg.decay.mu)


def _matrix(m) -> np.ndarray:
    if isinstance(m, str):
        return pauli_string(m)
    a = np.asarray(m, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def _profile(p):
    if p.kind == "constant":
        return Constant(p.value)
    if p.kind == "sinusoidal":
        return Sinusoidal(p.offset, p.amplitude, p.omega, p.phase)
    return PiecewiseLinear(tuple(p.knots), tuple(p.values))


def _custom_terms(cfg: ExperimentConfig, volume: Volume) -> tuple:
    terms = []
    for i, T in enumerate(cfg.model.terms):
        if T.place == "sites":
            supports = [(x,) for x in volume.sites]
        elif T.place == "bonds":
            supports = list(_bonds(volume.graph))
        else:
            supports = [tuple(T.sites)]
        phi = None if T.phi is None else T.coefficient * _matrix(T.phi)
        lind = tuple(math.sqrt(T.rate) * _matrix(L) for L in T.lindblads)
        for sup in supports:
            d = volume.dim_of(sup)
            for m in ([phi] if phi is not None else []) + list(lind):
                if m.shape != (d, d):
                    raise ValueError(f"model.terms[{i}]: matrix of shape {m.shape} on {len(sup)} site(s)")
            label = f"t{i}:" + ",".join(map(str, sup))
            terms.append(InteractionTerm(sup, phi=phi, lindblads=lind, profile=_profile(T.profile), label=label))
    return tuple(terms)


def model_params(cfg: ExperimentConfig) -> dict:
    p = dict(cfg.model.params)
    if cfg.model.name != "custom" and card(cfg.model.name).needs_seed:
        p["seed"] = int(cfg.seed if cfg.seed is not None else p["seed"])
    return p


def make_spec(cfg: ExperimentConfig, volume: Volume, decay: DecayFunction | None = None) -> GeneratorSpec:
    decay = decay or make_decay(cfg, volume)
    if cfg.model.name == "custom":
        return GeneratorSpec(volume, _custom_terms(cfg, volume), decay)
    return build(cfg.model.name, model_params(cfg), volume, decay)


def _site(volume: Volume, label, default):
    if label is None:
        return default
    for x in volume.sites:
        if x == label or str(x) == str(label):
            return x
    raise ValueError(f"site {label!r} is not in the volume")


def _sites(volume: Volume, labels):
    return None if labels is None else [_site(volume, s, None) for s in labels]


def _seed(cfg: ExperimentConfig) -> int:
    return int(cfg.seed) if cfg.seed is not None else 0


# -- check-hypotheses --------------------------------------------------------


def _hyp_cells(cfg):
    return list(range(len(cfg.times.grid())))


def _hyp_cell(cfg, i):
    V = make_volume(cfg)
    spec = make_spec(cfg, V)
    t = cfg.times.grid()[i]
    seed = int(np.random.SeedSequence([_seed(cfg), i]).generate_state(1)[0])
    rep = check_hypotheses(spec, [t], n_random=cfg.probes.n_random, seed=seed, tol=cfg.tolerances.check)
    row = {"time": t} | {k: v for k, v in rep.as_dict().items() if k not in ("continuity_modulus", "delta", "tol", "ok")}
    return row


def _hyp_assemble(cfg, payloads):
    rows = [payloads[k] for k in sorted(payloads)]
    tol = cfg.tolerances.check
    V = make_volume(cfg)
    spec = make_spec(cfg, V)
    grid_ = cfg.times.grid()
    cont = check_hypotheses(spec, grid_, n_random=1, seed=_seed(cfg), tol=tol) if len(grid_) > 1 else None
    worst = {
        "unit_defect": max(r["unit_defect"] for r in rows),
        "hermiticity_defect": max(r["hermiticity_defect"] for r in rows),
        "dissipativity_min": min(r["dissipativity_min"] for r in rows),
        "dissipativity_residual": max(r["dissipativity_residual"] for r in rows),
    }
    asserts = [
        Assertion("unitality", worst["unit_defect"] <= tol, True, f"max ||L(1)|| = {worst['unit_defect']:.3e}"),
        Assertion(
            "hermiticity",
            worst["hermiticity_defect"] <= tol,
            True,
            f"max ||L(A*) - L(A)*|| = {worst['hermiticity_defect']:.3e}",
        ),
        Assertion(
            "complete-dissipativity",
            worst["dissipativity_min"] >= -tol,
            True,
            f"min eigenvalue {worst['dissipativity_min']:.3e}",
        ),
        Assertion(
            "commutator-identity",
            worst["dissipativity_residual"] <= tol,
            True,
            f"max residual {worst['dissipativity_residual']:.3e}",
        ),
    ]
    summary = {"defects": worst, "tolerance": tol}
    if cont is not None:
        summary["continuity"] = {"modulus": cont.continuity_modulus, "delta": cont.delta}
    cols = ["time", "unit_defect", "hermiticity_defect", "dissipativity_min", "dissipativity_residual"]
    return Result(cols, rows, asserts, summary)


# -- euler-convergence -------------------------------------------------------


def _euler_cells(cfg):
    return list(cfg.euler.n)


def _euler_cell(cfg, n):
    V = make_volume(cfg)
    spec = make_spec(cfg, V)
    t = cfg.euler.t
    gamma = propagator_matrix(spec, 0.0, t, min(cfg.tolerances.ode, 1e-12)).matrix
    rep = euler_report(spec, n, t, gamma=gamma)
    rep2 = euler_report(spec, 2 * n, t, gamma=gamma)
    row = {
        "n": n,
        "t": t,
        "error": rep.error,
        "bound": rep.bound,
        "error_2n": rep2.error,
        "halving": rep.error / rep2.error if rep2.error > 0 else math.inf,
        "eps_n": rep.eps_n,
        "M_t": rep.M_t,
        "step_condition": int(rep.step_condition),
        "holds": int(rep.holds and rep2.holds),
    }
    return row


def _euler_assemble(cfg, payloads):
    rows = [payloads[k] for k in sorted(payloads)]
    V = make_volume(cfg)
    constant = make_spec(cfg, V).is_constant
    asserts = [
        Assertion(
            "euler-bound",
            all(r["holds"] for r in rows),
            True,
            "; ".join(f"n={r['n']}: {r['error']:.3e} <= {r['bound']:.3e}" for r in rows),
        )
    ]
    if constant:
        asserts.append(
            Assertion(
                "first-order-convergence",
                all(abs(r["halving"] - 2.0) <= 0.2 for r in rows),
                False,
                "error(n)/error(2n): " + ", ".join(f"{r['halving']:.4f}" for r in rows),
            )
        )
    cols = ["n", "t", "error", "bound", "error_2n", "halving", "eps_n", "M_t", "step_condition", "holds"]

    def plot(ax):
        ns = [r["n"] for r in rows]
        ax.loglog(ns, [r["error"] for r in rows], "o-", label="measured")
        ax.loglog(ns, [r["bound"] for r in rows], "s--", label="bound")
        ax.set_xlabel("n")
        ax.set_ylabel("||T_n - gamma||")
        ax.legend()

    return Result(cols, rows, asserts, {"constant_generator": constant}, plot)


# -- lr-scan -----------------------------------------------------------------


def _lr_cells(cfg):
    return [0]


def _lr_cell(cfg, _):
    V = make_volume(cfg)
    spec = make_spec(cfg, V)
    y = _site(V, cfg.probes.site, V.sites[0])
    B = LocalOperator.pauli(y, cfg.probes.observable)
    times = cfg.times.grid()
    scan = lightcone_scan(spec, B, None, times, None, cfg.tolerances.ode, cfg.tolerances.theta, cfg.probes.basis)
    certs, rows = [], []
    t_max = max(times)
    for mu in sorted(cfg.lr.mu_grid):
        cert = certificate(spec, t_max, mu=mu, exclude_single_site=cfg.lr.exclude_single_site)
        cert = replace(cert, bound_form=cfg.lr.bound_form)
        certs.append(cert.as_dict())
        for i, x in enumerate(scan.sites):
            for j, t in enumerate(scan.times):
                e = float(scan.empirical[i, j])
                bs = lr_bound_sum(cert, 2.0, B.norm, [x], B.support, t)
                bi = lr_bound_iterated(cert, 2.0, B.norm, [x], B.support, t)
                be = lr_bound_exponential(cert, 2.0, B.norm, [x], B.support, t)
                rows.append(
                    {
                        "mu": mu,
                        "site": x,
                        "distance": float(scan.distances[i]),
                        "time": float(t),
                        "empirical": e,
                        "bound_sum": bs,
                        "bound_iterated": bi,
                        "bound_exp": be,
                        "ratio": e / bs if bs > 0 else (0.0 if e == 0 else math.inf),
                    }
                )
    return {
        "rows": rows,
        "certificates": certs,
        "v_emp": scan.v_emp,
        "theta": scan.theta,
        "arrival": [None if math.isinf(a) else float(a) for a in scan.arrival],
        "distances": [float(d) for d in scan.distances],
        "sites": list(scan.sites),
        "front_monotone": scan.front_monotone(),
        "observable": B.label,
    }


def _lr_assemble(cfg, payloads):
    p = payloads[0]
    rows = p["rows"]
    key = "bound_" + cfg.lr.bound_form
    viol = [r for r in rows if r["empirical"] > r[key]]
    asserts = [
        Assertion(
            f"domination-{cfg.lr.bound_form}",
            not viol,
            True,
            f"{len(viol)} of {len(rows)} cells above the bound"
            + (f"; first at site {viol[0]['site']}, t={viol[0]['time']:g}, mu={viol[0]['mu']:g}" if viol else ""),
        ),
        Assertion("front-monotone", p["front_monotone"], False, f"arrival times {p['arrival']}"),
    ]
    for c in p["certificates"]:
        asserts.append(
            Assertion(
                f"velocity-mu={c['mu']:g}",
                p["v_emp"] <= c["velocity"],
                True,
                f"v_emp = {p['v_emp']:.4g} <= v = {c['velocity']:.4g}",
            )
        )
    ratios = [r["ratio"] for r in rows if math.isfinite(r["ratio"])]
    summary = {
        "observable": p["observable"],
        "v_emp": p["v_emp"],
        "v_cert": {f"{c['mu']:g}": c["velocity"] for c in p["certificates"]},
        "max_ratio": max(ratios, default=0.0),
        "theta": p["theta"],
        "front": [{"site": s, "distance": d, "arrival": a} for s, d, a in zip(p["sites"], p["distances"], p["arrival"])],
        "certificates": p["certificates"],
    }
    cols = ["mu", "site", "distance", "time", "empirical", "bound_sum", "bound_iterated", "bound_exp", "ratio"]
    mu0 = min(cfg.lr.mu_grid)

    def plot(ax):
        for s in p["sites"]:
            pts = [(r["time"], r["empirical"]) for r in rows if r["site"] == s and r["mu"] == mu0]
            ax.plot(*zip(*pts), label=f"site {s}")
        ax.set_xlabel("t")
        ax.set_ylabel("max_a ||[sigma_a(x), gamma_t(B)]||")
        ax.legend(fontsize="small")

    return Result(cols, rows, asserts, summary, plot)


# -- bound-domination --------------------------------------------------------


def _dom_cells(cfg):
    V = make_volume(cfg)
    b = _sites(V, cfg.probes.b_sites) or list(V.sites)
    return [V.sites.index(y) for y in b]


def _dom_cell(cfg, idx):
    V = make_volume(cfg)
    spec = make_spec(cfg, V)
    times = cfg.times.grid()
    cert = certificate(spec, max(times), exclude_single_site=cfg.lr.exclude_single_site)
    cert = replace(cert, bound_form=cfg.lr.bound_form)
    y = V.sites[idx]
    scan = domination_scan(
        spec, cert, times, [y], _sites(V, cfg.probes.k_sites), cfg.probes.basis, cfg.tolerances.ode
    )
    order = {x: i for i, x in enumerate(V.sites)}
    recs = sorted(scan.records, key=lambda r: (r["b_op"], order[r["k_site"]], r["k_op"], r["time"]))
    for r in recs:
        r["ratio"] = r["empirical"] / r["bound_sum"] if r["bound_sum"] > 0 else (0.0 if r["empirical"] == 0 else math.inf)
    return {"records": recs, "certificate": cert.as_dict()}


def _dom_assemble(cfg, payloads):
    rows = [r for k in sorted(payloads) for r in payloads[k]["records"]]
    cert = payloads[min(payloads)]["certificate"]
    key = "bound_" + cfg.lr.bound_form
    viol = [r for r in rows if r["empirical"] > r[key]]
    viol_iter = [r for r in rows if r["empirical"] > r["bound_iterated"]]
    detail = f"{len(viol)} of {len(rows)} cells above the {cfg.lr.bound_form} bound"
    if viol:
        ts = sorted({r["time"] for r in viol})
        overlap = all(r["k_site"] == r["b_site"] for r in viol)
        detail += f"; at times {ts[:5]}{'...' if len(ts) > 5 else ''}" + ("; all with overlapping supports" if overlap else "")
    asserts = [Assertion(f"domination-{cfg.lr.bound_form}", not viol, True, detail)]
    if cfg.lr.bound_form != "iterated":
        asserts.append(
            Assertion("domination-iterated", not viol_iter, False, f"{len(viol_iter)} cells above the iterated bound")
        )
    ratios = [r["ratio"] for r in rows if math.isfinite(r["ratio"])]
    summary = {
        "cells": len(rows),
        "violations": len(viol),
        "max_ratio": max(ratios, default=0.0),
        "max_ratio_disjoint": max(
            (r["ratio"] for r in rows if r["k_site"] != r["b_site"] and math.isfinite(r["ratio"])), default=0.0
        ),
        "certificate": cert,
    }
    cols = ["b_site", "b_op", "k_site", "k_op", "time", "empirical", "bound_sum", "bound_iterated", "bound_exp", "ratio"]
    V = make_volume(cfg)
    g = V.graph

    def plot(ax):
        by_d: dict = {}
        for r in rows:
            d = g.d(r["k_site"], r["b_site"])
            by_d.setdefault(d, {}).setdefault(r["time"], 0.0)
            by_d[d][r["time"]] = max(by_d[d][r["time"]], r["empirical"])
        for d in sorted(by_d):
            ts = sorted(by_d[d])
            ax.plot(ts, [by_d[d][t] for t in ts], label=f"d = {d:g}")
        ax.set_xlabel("t")
        ax.set_ylabel("max empirical at distance d")
        ax.legend(fontsize="small")

    return Result(cols, rows, asserts, summary, plot)


# -- thermo-sweep ------------------------------------------------------------


def _thermo_cells(cfg):
    return [0]


def _sequence(cfg) -> VolumeSequence:
    hws = cfg.volume.half_widths or [1, 2, 3, 4]
    vols = tuple(make_volume(cfg, L) for L in hws)
    decay = make_decay(cfg, vols[-1])
    return VolumeSequence(vols, lambda V: make_spec(cfg, V, decay))


def _thermo_cell(cfg, _):
    seq = _sequence(cfg)
    seq.check_restriction()
    V0 = seq.volumes[0]
    x = _site(V0, cfg.probes.site, 0)
    A = LocalOperator.pauli(x, cfg.probes.observable)
    t = cfg.times.grid()[-1]
    s = cfg.times.grid()[0] if len(cfg.times.grid()) > 1 else 0.0
    cert = sequence_certificate(seq, t)
    sw = cauchy_sweep(seq, A, s, t, cfg.tolerances.ode, cert)
    return {
        "rows": sw.rows,
        "slope": sw.slope,
        "tail": sw.certified_tail,
        "certificate": cert.as_dict(),
        "dominated": sw.dominated,
        "monotone": sw.monotone,
        "s": s,
        "t": t,
        "observable": A.label,
    }


def _thermo_assemble(cfg, payloads):
    p = payloads[0]
    rows = p["rows"]
    mu = cfg.decay.mu
    asserts = [
        Assertion(
            "difference-domination",
            p["dominated"],
            True,
            "; ".join(f"n={r['n']}: {r['measured']:.3e} <= {r['bound']:.3e}" for r in rows),
        ),
        Assertion("monotone-decay", p["monotone"], False, ", ".join(f"{r['measured']:.3e}" for r in rows)),
    ]
    if len(rows) >= 3:
        asserts.append(
            Assertion("decay-slope", p["slope"] <= -mu / 2, False, f"fitted slope {p['slope']:.4g} vs {-mu / 2:g}")
        )
    summary = {
        "observable": p["observable"],
        "s": p["s"],
        "t": p["t"],
        "fit_slope": p["slope"],
        "certified_tail": p["tail"],
        "certificate": p["certificate"],
    }
    cols = ["n", "sites", "boundary_distance", "measured", "bound", "ratio"]

    def plot(ax):
        d = [r["boundary_distance"] for r in rows]
        ax.semilogy(d, [r["measured"] for r in rows], "o-", label="measured")
        ax.semilogy(d, [r["bound"] for r in rows], "s--", label="bound")
        ax.set_xlabel("boundary distance")
        ax.set_ylabel("||gamma^(n) - gamma^(n-1)||")
        ax.legend()

    return Result(cols, rows, asserts, summary, plot)


KINDS: dict[str, tuple[Callable, Callable, Callable]] = {
    "check-hypotheses": (_hyp_cells, _hyp_cell, _hyp_assemble),
    "euler-convergence": (_euler_cells, _euler_cell, _euler_assemble),
    "lr-scan": (_lr_cells, _lr_cell, _lr_assemble),
    "bound-domination": (_dom_cells, _dom_cell, _dom_assemble),
    "thermo-sweep": (_thermo_cells, _thermo_cell, _thermo_assemble),
}


def _run_cell(kind: str, cfg_data: dict, key: Any):
    cfg = ExperimentConfig.model_validate(cfg_data)
    return KINDS[kind][1](cfg, key)


def run_experiment(cfg: ExperimentConfig, threads: int = 1, cache_dir: str | None = None) -> Result:
    """Run every cell of ``cfg.experiment`` and assemble the keyed results."""
    from joblib import Memory, Parallel, delayed

    cells_fn, _, assemble = KINDS[cfg.experiment]
    keys = cells_fn(cfg)
    data = cfg.model_dump(mode="json")
    fn = Memory(cache_dir, verbose=0).cache(_run_cell) if cache_dir else _run_cell
    if threads > 1 and len(keys) > 1:
        outs = Parallel(n_jobs=threads)(delayed(fn)(cfg.experiment, data, k) for k in keys)
    else:
        outs = [fn(cfg.experiment, data, k) for k in keys]
    result = assemble(cfg, dict(zip(keys, outs)))
    result.summary["seed"] = cfg.seed
    return result


def environment_info() -> dict:
    return {
        "irrevdyn": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "platform": platform.platform(),
        "machine": platform.machine(),
        "cache_dir": os.environ.get("IRREVDYN_CACHE_DIR"),
        "fp_caveat": FP_CAVEAT,
    }
