"""Registry of generator models used by the tests, experiments and demos.

Conventions for qubits: ``sigma_z = diag(1, -1)`` and ``sigma_minus``
maps ``|0>`` (sigma_z = +1) to ``|1>``.  Under amplitude damping with
``L = sqrt(gamma) sigma_minus`` the Heisenberg-picture observable obeys::

    sigma_z(t) = exp(-gamma t) sigma_z - (1 - exp(-gamma t)) 1

i.e. every state relaxes to ``|1>``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .algebra import Volume, op_norm, pauli, pauli_string
from .generator import GeneratorSpec, InteractionTerm, Sinusoidal
from .lattice import DecayFunction, MetricGraph, chain, power_law

__all__ = ["ModelCard", "REGISTRY", "build", "card", "list_models", "default_decay"]

RANDOM_MODEL_VERSION = "random-decaying/v1"


@dataclass(frozen=True)
class ModelCard:
    name: str
    summary: str
    defaults: dict
    rates: tuple[str, ...]
    closed_form: str
    exercises: str
    builder: Callable = field(repr=False, compare=False)
    min_sites: int = 1
    needs_seed: bool = False

    def describe(self) -> str:
        lines = [
            f"{self.name}: {self.summary}",
            "parameters: " + ", ".join(f"{k}={v}" for k, v in self.defaults.items()),
            f"closed form: {self.closed_form}",
            f"exercises: {self.exercises}",
            f"minimum sites: {self.min_sites}",
        ]
        return "\n".join(lines)


def default_decay(graph: MetricGraph, mu: float = 1.0) -> DecayFunction:
    """``F(r) = (1 + r)**-(dim + 1)`` with the given weight ``mu``."""
    dim = graph.dimension or 1
    return power_law(alpha=dim + 1.0, mu=mu)


def _bonds(graph: MetricGraph):
    n = len(graph)
    for i, j in itertools.combinations(range(n), 2):
        if graph.dist[i, j] == 1:
            yield graph.vertices[i], graph.vertices[j]


def _onsite(volume: Volume, op: np.ndarray, label: str, as_lindblad=False):
    for x in volume.sites:
        if as_lindblad:
            yield InteractionTerm((x,), lindblads=(op,), label=f"{label}{x}")
        else:
            yield InteractionTerm((x,), phi=op, label=f"{label}{x}")


def _dephasing(volume, p, decay):
    if p["gamma"] == 0:
        return ()
    return tuple(_onsite(volume, np.sqrt(p["gamma"]) * pauli("Z"), "deph", as_lindblad=True))


def _amplitude_damping(volume, p, decay):
    if p["gamma"] == 0:
        return ()
    return tuple(_onsite(volume, np.sqrt(p["gamma"]) * pauli("-"), "damp", as_lindblad=True))


def _tfim_dephasing(volume, p, decay):
    terms = [
        InteractionTerm((x, y), phi=p["J"] * pauli_string("ZZ"), label=f"zz{x},{y}")
        for x, y in _bonds(volume.graph)
    ]
    if p["h"]:
        terms += _onsite(volume, p["h"] * pauli("X"), "field")
    if p["gamma"]:
        terms += _onsite(volume, np.sqrt(p["gamma"]) * pauli("Z"), "deph", as_lindblad=True)
    return tuple(terms)


def _driven_xy(volume, p, decay):
    drive = Sinusoidal(p["offset"], p["amplitude"], p["omega"], p["phase"])
    xy = p["J"] * (pauli_string("XX") + pauli_string("YY"))
    terms = [
        InteractionTerm((x, y), phi=xy, profile=drive, label=f"xy{x},{y}")
        for x, y in _bonds(volume.graph)
    ]
    if p["gamma"]:
        terms += _onsite(volume, np.sqrt(p["gamma"]) * pauli("Z"), "deph", as_lindblad=True)
    return tuple(terms)


def _zigzag(v: int) -> int:
    return 2 * v if v >= 0 else -2 * v - 1


def _site_entropy(x) -> list[int]:
    coords = x if isinstance(x, tuple) else (x,)
    return [len(coords)] + [_zigzag(int(c)) for c in coords]


def _rng_for(seed: int, *sites) -> np.random.Generator:
    entropy = [int(seed), 1]  # trailing 1 tags version v1 of the draw procedure
    for x in sites:
        entropy += _site_entropy(x)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _random_hermitian(rng, d):
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    H = 0.5 * (G + G.conj().T)
    return H / op_norm(H)


def _random_lindblad(rng, d):
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return G / op_norm(G)


def _random_decaying(volume, p, decay):
    """Seeded random terms on every site pair, scaled by ``F_mu(d(x, y))``.

    Each pair term has ``cb`` bound exactly ``2 (J + g) F_mu(d)``, so the
    off-diagonal pair ratio in the interaction norm is ``2 (J + g)`` for
    every volume.  Draws depend only on ``(seed, site labels)``, which keeps
    nested volumes consistent.
    """
    terms = []
    g = volume.graph
    for x in volume.sites:
        d = volume.dim_of((x,))
        rng = _rng_for(p["seed"], x)
        H = _random_hermitian(rng, d)
        L = _random_lindblad(rng, d)
        terms.append(
            InteractionTerm(
                (x,),
                phi=p["h"] * H if p["h"] else None,
                lindblads=(np.sqrt(p["onsite_rate"]) * L,) if p["onsite_rate"] else (),
                label=f"rand{x}",
            )
        )
    for x, y in itertools.combinations(volume.sites, 2):
        w = float(decay.F_mu(g.d(x, y)))
        d = volume.dim_of((x, y))
        rng = _rng_for(p["seed"], x, y)
        H = _random_hermitian(rng, d)
        L = _random_lindblad(rng, d)
        terms.append(
            InteractionTerm(
                (x, y),
                phi=p["J"] * w * H if p["J"] else None,
                lindblads=(np.sqrt(p["g"] * w) * L,) if p["g"] else (),
                label=f"rand{x},{y}",
            )
        )
    return tuple(terms)


REGISTRY: dict[str, ModelCard] = {}


def _register(card: ModelCard) -> None:
    REGISTRY[card.name] = card


_register(
    ModelCard(
        "dephasing",
        "on-site dephasing L = sqrt(gamma) sigma_z on every site",
        {"gamma": 0.5},
        ("gamma",),
        "sigma_x(t) = exp(-2 gamma t) sigma_x, sigma_z(t) = sigma_z (single qubit)",
        "unitality, complete dissipativity, strictly local dynamics",
        _dephasing,
    )
)
_register(
    ModelCard(
        "amplitude-damping",
        "on-site decay L = sqrt(gamma) sigma_minus on every site",
        {"gamma": 0.5},
        ("gamma",),
        "sigma_z(t) = exp(-gamma t) sigma_z - (1 - exp(-gamma t)) 1 (single qubit)",
        "non-unital Schrodinger dynamics, unital Heisenberg dynamics",
        _amplitude_damping,
    )
)
_register(
    ModelCard(
        "tfim-dephasing",
        "Ising J sigma_z sigma_z on bonds, transverse field h sigma_x, on-site dephasing gamma",
        {"J": 1.0, "h": 1.0, "gamma": 0.1},
        ("gamma",),
        "none beyond small-volume expm",
        "finite-range interactions, Lieb-Robinson light cone, thermodynamic limit",
        _tfim_dephasing,
    )
)
_register(
    ModelCard(
        "driven-xy",
        "XY coupling J (XX + YY) with drive offset + amplitude sin(omega t + phase), plus dephasing",
        {"J": 1.0, "gamma": 0.1, "offset": 1.0, "amplitude": 0.5, "omega": 2.0, "phase": 0.0},
        ("gamma",),
        "none; time dependent",
        "time-dependent generators, cocycle law, Euler products with eps_n > 0",
        _driven_xy,
    )
)
_register(
    ModelCard(
        "random-decaying",
        "seeded random Hamiltonian and Lindblad terms on all pairs, scaled by F_mu(d)",
        {"seed": 0, "J": 1.0, "g": 0.5, "h": 0.5, "onsite_rate": 0.1},
        ("g", "onsite_rate"),
        "none; interaction norm equals 2 (J + g) on volumes with >= 2 sites",
        "long-range decaying interactions, volume-uniform interaction norm",
        _random_decaying,
        needs_seed=True,
    )
)


def list_models() -> list[str]:
    return sorted(REGISTRY)


def card(name: str) -> ModelCard:
    try:
        return REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; registered: {', '.join(list_models())}") from None


def resolve_params(name: str, params: dict | None = None) -> dict:
    c = card(name)
    params = dict(params or {})
    unknown = set(params) - set(c.defaults)
    if unknown:
        raise ValueError(f"{name}: unknown parameter(s) {sorted(unknown)}")
    p = {**c.defaults, **params}
    for key in c.rates:
        if p[key] < 0:
            raise ValueError(f"{name}: parameter {key!r} must be >= 0, got {p[key]}")
    if "seed" in p and int(p["seed"]) != p["seed"]:
        raise ValueError(f"{name}: parameter 'seed' must be an integer")
    return p


def build(
    name: str,
    params: dict | None = None,
    volume: Volume | int | None = None,
    decay: DecayFunction | None = None,
) -> GeneratorSpec:
    """Deterministic :class:`GeneratorSpec` for a registered model.

    ``volume`` may be a :class:`Volume` or a chain length.
    """
    c = card(name)
    p = resolve_params(name, params)
    if volume is None:
        volume = 1
    if isinstance(volume, int):
        volume = Volume(chain(volume))
    if volume.n_sites < c.min_sites:
        raise ValueError(f"{name} needs at least {c.min_sites} sites")
    if decay is None:
        decay = default_decay(volume.graph)
    return GeneratorSpec(volume, c.builder(volume, p, decay), decay)
