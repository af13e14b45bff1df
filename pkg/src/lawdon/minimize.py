"""Energy minimisation for the lattice model.

Plain gradient descent on (u, a0) with either a fixed step or Armijo
backtracking; optionally Polak-Ribiere conjugate directions (still
line-searched, so the energy trace stays monotone).  The outer flux search
repeats the minimisation across average-field sectors, since the integer
face fluxes cannot change under continuous descent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, StallError
from .lattice import (
    EnergyBreakdown,
    LatticeGeometry,
    LatticeState,
    ModelParams,
    flux_quantum_field,
    ld_energy,
    ld_energy_grad,
)

__all__ = [
    "MinimizeOptions",
    "MinimizeReport",
    "FluxSearchResult",
    "random_initial_state",
    "minimize",
    "outer_flux_search",
]

_ARMIJO_C1 = 1e-4
_MAX_HALVINGS = 60
_STEP_GROWTH = 2.0
_MAX_STEP = 1e8


@dataclass(frozen=True, slots=True)
class MinimizeOptions:
    """Knobs for :func:`minimize`.

    ``grad_tol`` defaults to 1e-6 / epsilon^2 (the natural gradient scale of
    the quartic term).  ``step_rule`` is "backtracking" (monotone, Armijo)
    or "fixed"; ``accel`` is "none" or "cg".
    """

    max_iters: int = 2000
    grad_tol: float | None = None
    step_rule: str = "backtracking"
    step_size: float | None = None
    accel: str = "none"
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.step_rule not in ("backtracking", "fixed"):
            raise ConfigError(f"unknown step_rule {self.step_rule!r}")
        if self.accel not in ("none", "cg"):
            raise ConfigError(f"unknown accel {self.accel!r}")
        if self.step_rule == "fixed" and (self.step_size is None or self.step_size <= 0):
            raise ConfigError("fixed step rule needs a positive step_size")
        if self.grad_tol is not None and self.grad_tol < 0:
            raise ConfigError(f"grad_tol must be non-negative, got {self.grad_tol}")


@dataclass(slots=True)
class MinimizeReport:
    """Outcome of a minimisation run: final state, monotone energy trace,
    gradient norms, and why the loop stopped."""

    state: LatticeState
    energies: list[float]
    grad_norms: list[float]
    iterations: int
    converged: bool
    stop_reason: str
    breakdown: EnergyBreakdown


def random_initial_state(
    geometry: LatticeGeometry, h_bar: np.ndarray, seed: int = 0
) -> LatticeState:
    """Unit-modulus random-phase order parameter, zero link correction."""
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=(geometry.N, geometry.M, geometry.M))
    u = np.exp(1j * phases)
    a0 = np.zeros((3, geometry.nz, geometry.M, geometry.M))
    return LatticeState(u, a0, np.asarray(h_bar, dtype=float), geometry)


def _dot(gu1, ga1, gu2, ga2) -> float:
    return float(np.sum(gu1.real * gu2.real + gu1.imag * gu2.imag) + np.sum(ga1 * ga2))


def minimize(
    geometry: LatticeGeometry,
    params: ModelParams,
    options: MinimizeOptions = MinimizeOptions(),
    h_bar: np.ndarray | None = None,
    initial_state: LatticeState | None = None,
) -> MinimizeReport:
    """Descend the lattice energy from a random (or given) starting state.

    Raises :class:`~lawdon.errors.StallError` if Armijo backtracking cannot
    find an acceptable step after 60 halvings; the partial report rides on
    the exception.
    """
    if initial_state is not None:
        if initial_state.geometry != geometry:
            raise ConfigError("initial_state geometry does not match")
        state = initial_state.copy()
        if h_bar is not None and not np.allclose(state.h_bar, h_bar, rtol=0, atol=0):
            raise ConfigError("initial_state carries a different average field")
    else:
        if h_bar is None:
            h_bar = np.zeros(3)
        state = random_initial_state(geometry, h_bar, seed=options.seed)

    grad_tol = options.grad_tol
    if grad_tol is None:
        grad_tol = 1e-6 / params.epsilon**2

    breakdown, gu, ga = ld_energy_grad(state, params)
    energy = breakdown.total
    gn2 = _dot(gu, ga, gu, ga)
    energies = [energy]
    grad_norms = [math.sqrt(gn2)]

    du = -gu
    da = -ga
    step = options.step_size if options.step_size is not None else 1.0
    converged = False
    stop_reason = "max_iters"
    iterations = 0

    for it in range(options.max_iters):
        if math.sqrt(gn2) <= grad_tol:
            converged = True
            stop_reason = "grad_tol"
            break
        slope = _dot(gu, ga, du, da)
        if slope >= 0.0:
            # conjugate direction lost descent; restart steepest
            du, da = -gu, -ga
            slope = -gn2
        if slope == 0.0:
            report = MinimizeReport(
                state, energies, grad_norms, it, False, "stalled", breakdown
            )
            raise StallError("zero descent direction with gradient above tolerance", report)

        if options.step_rule == "fixed":
            t = options.step_size
            state.u += t * du
            state.a0 += t * da
            new_breakdown, new_gu, new_ga = ld_energy_grad(state, params)
            new_energy = new_breakdown.total
        else:
            t = min(step * _STEP_GROWTH, _MAX_STEP)
            accepted = False
            for _ in range(_MAX_HALVINGS + 1):
                trial_u = state.u + t * du
                trial_a0 = state.a0 + t * da
                trial = LatticeState(trial_u, trial_a0, state.h_bar, geometry)
                trial_breakdown = ld_energy(trial, params)
                if trial_breakdown.total <= energy + _ARMIJO_C1 * t * slope:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                report = MinimizeReport(
                    state, energies, grad_norms, it, False, "stalled", breakdown
                )
                raise StallError(
                    f"line search found no acceptable step after {_MAX_HALVINGS} halvings",
                    report,
                )
            step = t
            state = trial
            new_breakdown, new_gu, new_ga = ld_energy_grad(state, params)
            new_energy = new_breakdown.total

        new_gn2 = _dot(new_gu, new_ga, new_gu, new_ga)
        if options.accel == "cg" and new_gn2 > 0 and gn2 > 0:
            # Polak-Ribiere+ with automatic restart via the slope check above
            beta = max(0.0, (new_gn2 - _dot(new_gu, new_ga, gu, ga)) / gn2)
            du = -new_gu + beta * du
            da = -new_ga + beta * da
        else:
            du, da = -new_gu, -new_ga

        breakdown, gu, ga = new_breakdown, new_gu, new_ga
        energy = new_energy
        gn2 = new_gn2
        energies.append(energy)
        grad_norms.append(math.sqrt(gn2))
        iterations = it + 1
    else:
        iterations = options.max_iters
        if math.sqrt(gn2) <= grad_tol:
            converged = True
            stop_reason = "grad_tol"

    return MinimizeReport(
        state=state,
        energies=energies,
        grad_norms=grad_norms,
        iterations=iterations,
        converged=converged,
        stop_reason=stop_reason,
        breakdown=breakdown,
    )


@dataclass(slots=True)
class FluxSearchResult:
    """Best sector of an outer flux search plus every per-sector report."""

    best_sector: tuple[int, int, int]
    best: MinimizeReport
    reports: dict = field(default_factory=dict)


def _normalize_sectors(flux_range) -> list[tuple[int, int, int]]:
    sectors = []
    for q in flux_range:
        if isinstance(q, (int, np.integer)):
            sectors.append((0, 0, int(q)))
        else:
            q = tuple(int(v) for v in q)
            if len(q) != 3:
                raise ConfigError(f"flux sector must be an int or a 3-tuple, got {q!r}")
            sectors.append(q)
    if not sectors:
        raise ConfigError("flux_range is empty")
    return sectors


def outer_flux_search(
    geometry: LatticeGeometry,
    params: ModelParams,
    options: MinimizeOptions = MinimizeOptions(),
    flux_range: Sequence = (0,),
    initial_states: dict | None = None,
) -> FluxSearchResult:
    """Minimise within each integer flux sector and keep the best.

    ``flux_range`` lists sectors as ints (vertical quanta) or (q1, q2, q3)
    triples.  ``initial_states`` may map a sector to a warm-start state.
    Ties in energy (relative 1e-12) resolve toward the smaller |flux|.
    """
    sectors = _normalize_sectors(flux_range)
    reports: dict[tuple[int, int, int], MinimizeReport] = {}
    for idx, sector in enumerate(sectors):
        h_bar = flux_quantum_field(geometry, *sector)
        start = None
        if initial_states is not None:
            start = initial_states.get(sector)
        sector_options = MinimizeOptions(
            max_iters=options.max_iters,
            grad_tol=options.grad_tol,
            step_rule=options.step_rule,
            step_size=options.step_size,
            accel=options.accel,
            seed=options.seed + 1000 * idx,
        )
        reports[sector] = minimize(
            geometry, params, sector_options, h_bar=h_bar, initial_state=start
        )

    best_energy = min(r.energies[-1] for r in reports.values())
    tol = 1e-12 * (1.0 + abs(best_energy))
    candidates = [s for s, r in reports.items() if r.energies[-1] <= best_energy + tol]
    candidates.sort(key=lambda s: (abs(s[2]), abs(s[0]) + abs(s[1]), s))
    best_sector = candidates[0]
    return FluxSearchResult(best_sector=best_sector, best=reports[best_sector], reports=reports)
