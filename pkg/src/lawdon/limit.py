"""Macroscopic equilibrium of a layered superconductor in an applied field.

The reduced free energy of a constant internal field H under an applied
field H_ex is

    F(H) = 1/2 [ (1 - alpha) |H . e3| + alpha ||H||_g + |H - H_ex|^2 ],

with alpha in (0, 1) a coupling weight and g the anisotropy metric.  Convex
duality identifies the minimiser as the Euclidean projection of the origin
onto the shifted convex body K + H_ex, where K is a finite cylinder with
ellipsoidal caps joined C^1 at the rim:

    cylinder  { |U'| <= R, |U3| <= z0 },  R = alpha/(2 lam),  z0 = (1-alpha)/2
    caps      { lam^2 |U'|^2 + (|U3| - z0)^2 <= b^2 },  b = alpha/2.

At the optimum F(H*) = |H_ex|^2/2 - |H*|^2/2, which gives a cheap duality-gap
certificate.  The same geometry yields the closed-form onset field hc1(theta)
and the Meissner / lock-in / tilted phase classification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

from .errors import ConfigError, SolverError
from .metric import AnisotropyMetric, FieldVector, norm_g

__all__ = [
    "LimitParams",
    "ConvexBodyK",
    "PhaseResult",
    "PhaseRow",
    "eval_F",
    "project_onto_K_shifted",
    "minimize_F_oracle",
    "hc1",
    "classify",
    "phase_diagram_sweep",
    "write_sweep_csv",
    "SWEEP_CSV_HEADER",
]

# A state counts as field-free (Meissner) below this absolute magnitude, and
# as layer-locked when the out-of-plane component stays below it.
REGIME_TOL = 1e-12

_MAX_NEWTON_ITERS = 200
_NEWTON_RESIDUAL_TOL = 1e-13


@dataclass(frozen=True, slots=True)
class LimitParams:
    """Inputs of the reduced model: coupling weight, anisotropy, applied field."""

    alpha: float
    metric: AnisotropyMetric
    h_ex: FieldVector

    def __post_init__(self):
        if not (isinstance(self.alpha, (int, float)) and math.isfinite(self.alpha)):
            raise ConfigError(f"alpha must be a finite number, got {self.alpha!r}")
        if not (0.0 < self.alpha < 1.0):
            raise ConfigError(f"alpha must lie strictly between 0 and 1, got {self.alpha}")
        for v in self.h_ex:
            if not math.isfinite(v):
                raise ConfigError(f"applied field has a non-finite component: {self.h_ex}")


@dataclass(frozen=True, slots=True)
class ConvexBodyK:
    """Capped cylinder whose shifted copy K + H_ex receives the projection.

    ``z0`` is the cylinder half-height, ``R`` the cylinder radius, ``b`` the
    vertical semi-axis of the caps, ``lam`` the anisotropy ratio (the caps
    are level sets of lam^2 r^2 + (|z| - z0)^2).
    """

    z0: float
    R: float
    b: float
    lam: float

    @staticmethod
    def from_params(alpha: float, metric: AnisotropyMetric) -> "ConvexBodyK":
        if not (0.0 < alpha < 1.0):
            raise ConfigError(f"alpha must lie strictly between 0 and 1, got {alpha}")
        lam = metric.lam
        return ConvexBodyK(z0=(1.0 - alpha) / 2.0, R=alpha / (2.0 * lam), b=alpha / 2.0, lam=lam)

    def contains(self, u: FieldVector, tol: float = 0.0) -> bool:
        """Membership test, with a non-negative slack ``tol`` on the defining inequalities."""
        r = u.horizontal_norm()
        az = abs(u.h3)
        if az <= self.z0 + tol and r <= self.R + tol:
            return True
        dz = az - self.z0
        if dz < 0.0:
            dz = 0.0
        return (self.lam * r) ** 2 + dz**2 <= self.b**2 + tol

    def support_slack(self, u: FieldVector, v: FieldVector, alpha: float) -> float:
        """Slack of the supporting-halfspace inequality of K at direction v.

        Non-negative for every v exactly when u lies in K; used as an
        independent membership oracle in tests.
        """
        metric = AnisotropyMetric(self.lam)
        return -u.dot(v) + self.z0 * abs(v.h3) + (alpha / 2.0) * norm_g(v, metric)


def eval_F(h: FieldVector, params: LimitParams) -> float:
    """Reduced free energy of the constant internal field ``h``."""
    alpha = params.alpha
    diff = h - params.h_ex
    return 0.5 * (
        (1.0 - alpha) * abs(h.h3) + alpha * norm_g(h, params.metric) + diff.dot(diff)
    )


def _project_cap(lam: float, r: float, dz: float, b: float) -> tuple[float, float]:
    """Project the point (r, z0 + dz), dz > 0, onto the upper cap boundary.

    Works in the cap frame: find (r*, dz*) on lam^2 r^2 + dz^2 = b^2 closest
    to (r, dz).  The KKT multiplier mu solves

        G(mu) = (lam r / (1 + 2 mu lam^2))^2 + (dz / (1 + 2 mu))^2 - b^2 = 0,

    which is strictly decreasing in mu, so a guarded Newton iteration on the
    bracket [0, mu_max] converges unconditionally.
    """
    lr = lam * r
    p2 = lr * lr + dz * dz
    # G(mu_max) <= 0: shrinking both denominators to (1 + 2 mu min(1, lam^2))
    # bounds G above by (|P|/(1 + 2 mu m))^2 - b^2, zero at the mu_max below.
    m = min(1.0, lam * lam)
    mu_hi = (math.sqrt(p2) / b + 1.0) / (2.0 * m)
    lo, hi = 0.0, mu_hi
    mu = 0.0
    tol = _NEWTON_RESIDUAL_TOL * max(1.0, p2)
    for _ in range(_MAX_NEWTON_ITERS):
        d1 = 1.0 + 2.0 * mu * lam * lam
        d2 = 1.0 + 2.0 * mu
        t1 = (lr / d1) ** 2
        t2 = (dz / d2) ** 2
        g = t1 + t2 - b * b
        if abs(g) <= tol:
            break
        if g > 0.0:
            lo = mu
        else:
            hi = mu
        dg = -4.0 * (lam * lam * t1 / d1 + t2 / d2)
        step = g / dg if dg != 0.0 else 0.0
        mu_new = mu - step
        if not (lo < mu_new < hi):
            mu_new = 0.5 * (lo + hi)
        if mu_new == mu:
            break
        mu = mu_new
    else:
        raise SolverError("cap projection did not converge within the iteration budget")
    d1 = 1.0 + 2.0 * mu * lam * lam
    d2 = 1.0 + 2.0 * mu
    return r / d1, dz / d2


def project_onto_K_shifted(params: LimitParams, query: FieldVector = FieldVector(0.0, 0.0, 0.0)) -> FieldVector:
    """Euclidean projection of ``query`` onto the shifted body K + H_ex.

    With the default query (the origin) the result is the equilibrium
    internal field H*.
    """
    body = ConvexBodyK.from_params(params.alpha, params.metric)
    w = query - params.h_ex
    r = w.horizontal_norm()
    z = w.h3
    az = abs(z)
    sz = -1.0 if z < 0.0 else 1.0

    if az <= body.z0:
        if r <= body.R:
            foot_r, foot_z = r, z  # interior (or boundary): the point itself
        else:
            foot_r, foot_z = body.R, z  # cylinder side: drop radially
    else:
        dz = az - body.z0
        if (body.lam * r) ** 2 + dz**2 <= body.b**2:
            foot_r, foot_z = r, z
        else:
            cr, cdz = _project_cap(body.lam, r, dz, body.b)
            foot_r, foot_z = cr, sz * (body.z0 + cdz)

    if r > 0.0:
        scale = foot_r / r
        foot = FieldVector(w.h1 * scale, w.h2 * scale, foot_z)
    else:
        foot = FieldVector(0.0, 0.0, foot_z)
    return foot + params.h_ex


def _golden_min(fun, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Golden-section minimum of a unimodal function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    invphi2 = (3.0 - math.sqrt(5.0)) / 2.0
    a, bnd = lo, hi
    h = bnd - a
    c = a + invphi2 * h
    d = a + invphi * h
    fc = fun(c)
    fd = fun(d)
    while h > tol:
        if fc < fd:
            bnd, d, fd = d, c, fc
            h = bnd - a
            c = a + invphi2 * h
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            h = bnd - a
            d = a + invphi * h
            fd = fun(d)
    x = 0.5 * (a + bnd)
    return x, fun(x)


def minimize_F_oracle(params: LimitParams, tol: float = 1e-9) -> tuple[FieldVector, float]:
    """Minimise F directly by nested golden-section search.

    Independent of the projection formula: restricts to the plane spanned by
    e3 and the in-plane direction of H_ex (optimal by strict convexity of
    the quadratic term in the orthogonal coordinate) and runs a nested 1-D
    search.  Returns (argmin, minimum value).  Intended as a slow,
    assumption-free cross-check.
    """
    alpha = params.alpha
    lam = params.metric.lam
    hx = params.h_ex
    c = hx.horizontal_norm()
    if c > 0.0:
        e1x, e1y = hx.h1 / c, hx.h2 / c
    else:
        e1x, e1y = 1.0, 0.0
    h3 = hx.h3
    bound = 2.0 * hx.norm() + 1.0
    one_minus = 1.0 - alpha

    def value(p: float, q: float) -> float:
        return 0.5 * (
            one_minus * abs(q)
            + alpha * math.hypot(p / lam, q)
            + (p - c) ** 2
            + (q - h3) ** 2
        )

    def over_p(q: float) -> float:
        return _golden_min(lambda p: value(p, q), 0.0, bound, tol)[1]

    q_best, _ = _golden_min(over_p, -bound, bound, tol)
    p_best, f_best = _golden_min(lambda p: value(p, q_best), 0.0, bound, tol)
    h_star = FieldVector(p_best * e1x, p_best * e1y, q_best)
    return h_star, f_best


def hc1(theta: float, alpha: float, metric: AnisotropyMetric) -> float:
    """Critical applied-field magnitude at tilt angle theta in [0, pi/2].

    Below hc1 the equilibrium internal field vanishes (Meissner response).
    Two closed-form branches meet continuously where tan(theta) =
    lam (1 - alpha) / alpha; the small-angle branch reads alpha/(2 lam cos),
    the steep branch comes from first contact with the cap rim.
    """
    if not (0.0 < alpha < 1.0):
        raise ConfigError(f"alpha must lie strictly between 0 and 1, got {alpha}")
    if not (-1e-12 <= theta <= math.pi / 2 + 1e-12):
        raise ConfigError(f"tilt angle must lie in [0, pi/2], got {theta}")
    theta = min(max(theta, 0.0), math.pi / 2)
    lam = metric.lam
    st, ct = math.sin(theta), math.cos(theta)
    if alpha * st <= lam * (1.0 - alpha) * ct:
        return alpha / (2.0 * lam * ct)
    rad = (alpha * st) ** 2 - (1.0 - 2.0 * alpha) * (lam * ct) ** 2
    if rad < -1e-12:
        raise SolverError(
            f"negative radicand {rad} in the steep-angle branch; inputs are inconsistent"
        )
    rad = max(rad, 0.0)
    return ((1.0 - alpha) * st + math.sqrt(rad)) / (2.0 * ((lam * ct) ** 2 + st**2))


@dataclass(frozen=True, slots=True)
class PhaseResult:
    """Equilibrium response: regime label, internal field, energy, gap certificate."""

    regime: str
    h_star: FieldVector
    energy: float
    duality_gap: float


def classify(params: LimitParams) -> PhaseResult:
    """Compute H* by projection and label the regime.

    ``Meissner``: the internal field vanishes (|H*| <= 1e-12).
    ``LockIn``: H* is nonzero but confined to the layer plane although the
    applied field is not (|H*_3| <= 1e-12, H_ex . e3 != 0).
    ``Tilted``: anything else.
    """
    h_star = project_onto_K_shifted(params)
    energy = eval_F(h_star, params)
    gap = abs(energy + 0.5 * h_star.dot(h_star) - 0.5 * params.h_ex.dot(params.h_ex))
    if h_star.norm() <= REGIME_TOL:
        regime = "Meissner"
    elif abs(h_star.h3) <= REGIME_TOL and params.h_ex.h3 != 0.0:
        regime = "LockIn"
    else:
        regime = "Tilted"
    return PhaseResult(regime=regime, h_star=h_star, energy=energy, duality_gap=gap)


@dataclass(frozen=True, slots=True)
class PhaseRow:
    """One sweep sample: applied field at (theta, magnitude) and its response."""

    theta: float
    magnitude: float
    h_ex: FieldVector
    h_star: FieldVector
    regime: str
    energy: float
    duality_gap: float


def phase_diagram_sweep(
    alpha: float,
    metric: AnisotropyMetric,
    thetas: Sequence[float],
    magnitudes: Sequence[float],
) -> list[PhaseRow]:
    """Classify the response on a (theta, magnitude) grid.

    The applied field direction is the canonical tilted one,
    (cos theta, 0, sin theta); rows are emitted theta-major in input order.
    """
    rows: list[PhaseRow] = []
    for theta in thetas:
        ct, st = math.cos(theta), math.sin(theta)
        for mag in magnitudes:
            h_ex = FieldVector(mag * ct, 0.0, mag * st)
            res = classify(LimitParams(alpha=alpha, metric=metric, h_ex=h_ex))
            rows.append(
                PhaseRow(
                    theta=theta,
                    magnitude=mag,
                    h_ex=h_ex,
                    h_star=res.h_star,
                    regime=res.regime,
                    energy=res.energy,
                    duality_gap=res.duality_gap,
                )
            )
    return rows


SWEEP_CSV_HEADER = "theta,magnitude,hex1,hex2,hex3,hstar1,hstar2,hstar3,regime,F,duality_gap"


def _fmt(x: float) -> str:
    return format(x, ".17g")


def write_sweep_csv(rows: Iterable[PhaseRow], out: TextIO) -> None:
    """Write sweep rows as CSV with 17-significant-digit floats (round-trip exact)."""
    out.write(SWEEP_CSV_HEADER + "\n")
    for r in rows:
        fields = [
            _fmt(r.theta),
            _fmt(r.magnitude),
            _fmt(r.h_ex.h1),
            _fmt(r.h_ex.h2),
            _fmt(r.h_ex.h3),
            _fmt(r.h_star.h1),
            _fmt(r.h_star.h2),
            _fmt(r.h_star.h3),
            r.regime,
            _fmt(r.energy),
            _fmt(r.duality_gap),
        ]
        out.write(",".join(fields) + "\n")
