"""YAML experiment configuration: schema, line-aware diagnostics and volume caps.

Complete schema (every key except ``experiment`` and ``model.name`` is optional)::

    experiment: lr-scan          # check-hypotheses | euler-convergence | lr-scan
                                 # | bound-domination | thermo-sweep
    model:
      name: tfim-dephasing       # a registered model, or "custom"
      params: {J: 1.0, h: 1.0}   # overrides of the card defaults
      terms:                     # custom models only
        - place: bonds           # sites | bonds | explicit (then give `sites`)
          sites: [0, 1]
          phi: ZZ                # Pauli string or [[[re, im], ...], ...]
          coefficient: 1.0
          lindblads: [Z]         # list of Pauli strings or complex matrices
          rate: 0.1              # multiplies every L^* . L
          profile: {kind: sinusoidal, offset: 1, amplitude: 0.5, omega: 2}
    volume:
      kind: chain                # chain | centered-chain | grid | centered-chains
      sites: 8                   # chain
      half_width: 2              # centered-chain
      nx: 2                      # grid
      ny: 3
      half_widths: [1, 2, 3, 4]  # centered-chains (thermo-sweep)
      max_dim: 256               # full-matrix cap, at most 4096
    decay: {alpha: 2.0, mu: 1.0} # alpha defaults to lattice dimension + 1
    times: {start: 0.0, stop: 2.0, num: 21}   # or {values: [...]}
    tolerances: {ode: 1.0e-8, check: 1.0e-10, theta: 1.0e-3}
    probes:
      observable: X              # B for lr-scan and thermo-sweep
      site: 0                    # defaults: first site (lr-scan), center (thermo-sweep)
      b_sites: null              # bound-domination: defaults to all sites
      k_sites: null
      basis: XYZ
      n_random: 5                # check-hypotheses probes per time
    euler: {n: [10, 100, 1000], t: 0.5}
    lr: {mu_grid: [0.5, 1.0, 2.0], bound_form: sum, exclude_single_site: false}
    seed: 0                      # mandatory for random models
    plot: false                  # write an SVG chart next to results.csv
    output: out
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Literal, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .algebra import MAX_TOTAL_DIM, pauli_string
from .generator import SUPEROP_CAP
from .models import REGISTRY

__all__ = ["ExperimentConfig", "ConfigError", "load_config", "parse_config", "check_config", "EXPERIMENTS"]

EXPERIMENTS = ("check-hypotheses", "euler-convergence", "lr-scan", "bound-domination", "thermo-sweep")
SUPEROP_EXPERIMENTS = ("euler-convergence",)
DEFAULT_MAX_DIM = 256

Matrix = list[list[list[float]]]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ProfileSection(_Strict):
    kind: Literal["constant", "sinusoidal", "piecewise-linear"] = "constant"
    value: float = 1.0
    offset: float = 0.0
    amplitude: float = 0.0
    omega: float = 0.0
    phase: float = 0.0
    knots: list[float] = []
    values: list[float] = []


class TermSection(_Strict):
    place: Literal["sites", "bonds", "explicit"] = "sites"
    sites: list[Union[int, str]] | None = None
    phi: Union[str, Matrix, None] = None
    coefficient: float = 1.0
    lindblads: list[Union[str, Matrix]] = []
    rate: float = Field(1.0, ge=0)
    profile: ProfileSection = ProfileSection()

    @model_validator(mode="after")
    def _placement(self):
        if self.place == "explicit" and not self.sites:
            raise ValueError("explicit placement needs 'sites'")
        if self.place != "explicit" and self.sites is not None:
            raise ValueError("'sites' is only allowed with place: explicit")
        return self


class ModelSection(_Strict):
    name: str
    params: dict[str, float] = {}
    terms: list[TermSection] | None = None


class VolumeSection(_Strict):
    kind: Literal["chain", "centered-chain", "grid", "centered-chains"] = "chain"
    sites: int | None = Field(None, ge=1)
    half_width: int | None = Field(None, ge=0)
    nx: int | None = Field(None, ge=1)
    ny: int | None = Field(None, ge=1)
    half_widths: list[int] | None = None
    max_dim: int = Field(DEFAULT_MAX_DIM, ge=1, le=MAX_TOTAL_DIM)


class DecaySection(_Strict):
    alpha: float | None = Field(None, gt=0)
    mu: float = Field(1.0, gt=0)


class TimeSection(_Strict):
    start: float = 0.0
    stop: float = 1.0
    num: int = Field(11, ge=1)
    values: list[float] | None = None

    def grid(self) -> list[float]:
        if self.values is not None:
            return [float(v) for v in self.values]
        return [float(v) for v in np.linspace(self.start, self.stop, self.num)]

    @model_validator(mode="after")
    def _order(self):
        g = self.grid()
        if any(t < 0 for t in g):
            raise ValueError("times must be >= 0")
        if any(b < a for a, b in zip(g, g[1:])):
            raise ValueError("times must be nondecreasing")
        return self


class ToleranceSection(_Strict):
    ode: float = Field(1e-8, gt=0)
    check: float = Field(1e-10, gt=0)
    theta: float = Field(1e-3, gt=0)


class ProbeSection(_Strict):
    observable: str = "X"
    site: Union[int, str, None] = None
    b_sites: list[Union[int, str]] | None = None
    k_sites: list[Union[int, str]] | None = None
    basis: str = "XYZ"
    n_random: int = Field(5, ge=1)

    @field_validator("basis")
    @classmethod
    def _basis(cls, v):
        if not v or set(v) - set("XYZ"):
            raise ValueError("basis must be a nonempty string over X, Y, Z")
        return v


class EulerSection(_Strict):
    n: list[int] = [10, 100, 1000]
    t: float = Field(0.5, gt=0)

    @field_validator("n")
    @classmethod
    def _positive(cls, v):
        if not v or min(v) < 1:
            raise ValueError("step counts must be >= 1")
        return v


class LRSection(_Strict):
    mu_grid: list[float] = [0.5, 1.0, 2.0]
    bound_form: Literal["sum", "iterated"] = "sum"
    exclude_single_site: bool = False

    @field_validator("mu_grid")
    @classmethod
    def _mus(cls, v):
        if not v or min(v) <= 0:
            raise ValueError("mu_grid entries must be > 0")
        return v


class ExperimentConfig(_Strict):
    experiment: Literal[EXPERIMENTS]  # type: ignore[valid-type]
    model: ModelSection
    volume: VolumeSection = VolumeSection()
    decay: DecaySection = DecaySection()
    times: TimeSection = TimeSection()
    tolerances: ToleranceSection = ToleranceSection()
    probes: ProbeSection = ProbeSection()
    euler: EulerSection = EulerSection()
    lr: LRSection = LRSection()
    seed: int | None = None
    plot: bool = False
    output: str = "out"


class ConfigError(ValueError):
    """One or more problems, each ``(path, message, line)``; ``line`` may be None."""

    def __init__(self, problems: list[tuple[str, str, int | None]], source: str = "<config>"):
        self.problems = problems
        self.source = source
        super().__init__("\n".join(self.lines()))

    def lines(self) -> list[str]:
        out = []
        for path, msg, line in self.problems:
            where = f"{self.source}:{line}" if line else self.source
            out.append(f"{where}: {path or '<root>'}: {msg}")
        return out


# -- YAML line lookup --------------------------------------------------------


def _line_map(text: str) -> dict[tuple, int]:
    """Map key paths (tuples of keys / list indices) to 1-based line numbers."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    lines: dict[tuple, int] = {}

    def walk(node, path):
        lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = (*path, k.value)
                lines[key] = k.start_mark.line + 1
                walk(v, key)
                lines[key] = k.start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, (*path, i))

    if root is not None:
        walk(root, ())
    return lines


def _lookup(lines: dict, path: tuple) -> int | None:
    path = tuple(str(p) if not isinstance(p, int) else p for p in path)
    while path:
        if path in lines:
            return lines[path]
        path = path[:-1]
    return lines.get(())


def _dotted(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


# -- loading -----------------------------------------------------------------


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate YAML text; raises :class:`ConfigError` with line numbers."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError([("", f"YAML syntax error: {exc}", mark.line + 1 if mark else None)], source) from None
    if not isinstance(data, dict):
        raise ConfigError([("", "top level must be a mapping", 1)], source)
    lines = _line_map(text)
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        probs = []
        for e in exc.errors():
            loc = tuple(p for p in e["loc"] if not (isinstance(p, str) and ("[" in p or p.startswith("function-"))))
            probs.append((_dotted(loc), e["msg"], _lookup(lines, loc)))
        raise ConfigError(probs, source) from None
    problems = check_config(cfg)
    if problems:
        raise ConfigError([(p, m, _lookup(lines, tuple(_split(p)))) for p, m in problems], source)
    return cfg


def _split(dotted: str) -> list:
    out: list = []
    for part in dotted.replace("]", "").split("."):
        head, *idx = part.split("[")
        if head:
            out.append(head)
        out += [int(i) for i in idx]
    return out


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError([("", f"cannot read config: {exc.strerror}", None)], str(p)) from None
    return parse_config(text, str(p))


# -- semantic checks ---------------------------------------------------------


def volume_sites(cfg: ExperimentConfig) -> list[int]:
    """Site counts of every volume the experiment touches."""
    v = cfg.volume
    if v.kind == "chain":
        return [v.sites if v.sites is not None else 1]
    if v.kind == "centered-chain":
        return [2 * (v.half_width or 0) + 1]
    if v.kind == "grid":
        return [(v.nx or 1) * (v.ny or 1)]
    return [2 * L + 1 for L in (v.half_widths or [1, 2, 3, 4])]


def _matrix_problems(m, path: str) -> list[tuple[str, str]]:
    if isinstance(m, str):
        try:
            pauli_string(m)
        except (KeyError, ValueError):
            return [(path, f"unknown Pauli string {m!r}")]
        return []
    rows = len(m)
    if rows == 0 or any(len(r) != rows for r in m) or any(len(c) != 2 for r in m for c in r):
        return [(path, "matrix must be square with [re, im] entries")]
    if rows & (rows - 1):
        return [(path, "custom matrices must act on qubits (dimension a power of 2)")]
    return []


def check_config(cfg: ExperimentConfig) -> list[tuple[str, str]]:
    """Name resolution, parameter domains, seeds and caps; no computation."""
    probs: list[tuple[str, str]] = []
    m = cfg.model
    if m.name == "custom":
        if not m.terms:
            probs.append(("model.terms", "custom model needs at least one term"))
        if m.params:
            probs.append(("model.params", "custom models take no params"))
        for i, T in enumerate(m.terms or []):
            if T.phi is None and not T.lindblads:
                probs.append((f"model.terms[{i}]", "term needs phi or lindblads"))
            if T.phi is not None:
                probs += _matrix_problems(T.phi, f"model.terms[{i}].phi")
            for j, L in enumerate(T.lindblads):
                probs += _matrix_problems(L, f"model.terms[{i}].lindblads[{j}]")
    elif m.name not in REGISTRY:
        probs.append(("model.name", f"unknown model {m.name!r}; registered: {', '.join(sorted(REGISTRY))}"))
    else:
        card = REGISTRY[m.name]
        if m.terms is not None:
            probs.append(("model.terms", "terms are only allowed for custom models"))
        for k, val in m.params.items():
            if k not in card.defaults:
                probs.append((f"model.params.{k}", f"unknown parameter for {m.name}"))
            elif k in card.rates and val < 0:
                probs.append((f"model.params.{k}", f"must be >= 0, got {val:g}"))
            elif k == "seed" and val != int(val):
                probs.append((f"model.params.{k}", "must be an integer"))
        if card.needs_seed and cfg.seed is None and "seed" not in m.params:
            probs.append(("seed", f"model {m.name} is random; a seed is mandatory"))
        if card.needs_seed and cfg.seed is not None and "seed" in m.params and m.params["seed"] != cfg.seed:
            probs.append(("model.params.seed", "conflicts with top-level seed"))

    v = cfg.volume
    need = {"chain": ("sites",), "centered-chain": ("half_width",), "grid": ("nx", "ny"), "centered-chains": ()}[v.kind]
    for key in need:
        if getattr(v, key) is None:
            probs.append((f"volume.{key}", f"required for volume kind {v.kind}"))
    if cfg.experiment == "thermo-sweep":
        if v.kind != "centered-chains":
            probs.append(("volume.kind", "thermo-sweep needs kind: centered-chains"))
        hw = v.half_widths or [1, 2, 3, 4]
        if len(hw) < 2 or any(b <= a for a, b in zip(hw, hw[1:])) or hw[0] < 0:
            probs.append(("volume.half_widths", "need at least two strictly increasing half widths"))
    elif v.kind == "centered-chains":
        probs.append(("volume.kind", "centered-chains is only used by thermo-sweep"))

    max_dim = v.max_dim
    superop = cfg.experiment in SUPEROP_EXPERIMENTS
    for n in volume_sites(cfg):
        D = 2.0**n
        if D > max_dim:
            fit = int(math.floor(math.log2(max_dim)))
            probs.append(
                ("volume", f"{n} qubits give total dimension 2^{n} above the cap {max_dim}; use at most {fit} sites")
            )
        elif superop and D * D > SUPEROP_CAP:
            fit = int(math.floor(math.log2(SUPEROP_CAP) / 2))
            probs.append(
                (
                    "volume",
                    f"{cfg.experiment} works with superoperators of size 4^{n} above the cap {SUPEROP_CAP}; "
                    f"use at most {fit} sites",
                )
            )
    if not set(cfg.probes.observable) <= set("IXYZ") or len(cfg.probes.observable) != 1:
        probs.append(("probes.observable", "must be one of I, X, Y, Z"))
    if cfg.experiment in ("lr-scan", "bound-domination") and len(cfg.times.grid()) < 1:
        probs.append(("times", "need at least one time"))
    if cfg.experiment == "euler-convergence" and cfg.euler.n != sorted(set(cfg.euler.n)):
        probs.append(("euler.n", "step counts must be strictly increasing"))
    return probs
