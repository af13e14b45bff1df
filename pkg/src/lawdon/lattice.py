"""Discretized layered-superconductor model on a periodic lattice.

Order parameters u_n live on N stacked planes (each an M x M grid over an
Lx x Ly cell); the magnetic potential splits as A = Abar + a0, where Abar is
the linear potential of the constant average field h_bar (Abar = h_bar x X / 2)
and a0 is a periodic correction stored on the lattice links (Kz sub-links per
inter-plane gap).  All couplings use link phases = exact line integrals of A,
so gauge transformations by periodic scalars leave every energy term invariant
to machine precision.

Periodicity is twisted: crossing a period face multiplies u by a Floquet
factor determined by h_bar.  Consistency of these factors around the cell
edges forces all three average-flux quantizations

    h1 Ly L, h2 Lx L, h3 Lx Ly  in  2 pi Z,

which are enforced at state construction.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np

from .errors import ConfigError, PropertyError
from .metric import FieldVector

__all__ = [
    "LatticeGeometry",
    "ModelParams",
    "LatticeState",
    "EnergyBreakdown",
    "flux_quantum_field",
    "assert_flux_quantized",
    "ld_energy",
    "ld_energy_grad",
    "gauge_transform",
    "plane_flux",
    "plane_degree",
    "save_state",
    "load_state",
]

_FLUX_TOL = 1e-9
_STATE_MAGIC = "lawdon-state"


@dataclass(frozen=True, slots=True)
class LatticeGeometry:
    """Discretization: N planes, M x M in-plane nodes, Kz sub-links per gap,
    over a periodic cell of size Lx x Ly x L."""

    N: int
    M: int
    Kz: int
    Lx: float
    Ly: float
    L: float

    def __post_init__(self):
        if self.N < 1 or self.M < 2 or self.Kz < 1:
            raise ConfigError(
                f"need N >= 1, M >= 2, Kz >= 1; got N={self.N}, M={self.M}, Kz={self.Kz}"
            )
        for name, v in (("Lx", self.Lx), ("Ly", self.Ly), ("L", self.L)):
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive finite length, got {v!r}")

    @property
    def s(self) -> float:
        """Inter-plane spacing L / N."""
        return self.L / self.N

    @property
    def ax(self) -> float:
        return self.Lx / self.M

    @property
    def ay(self) -> float:
        return self.Ly / self.M

    @property
    def az(self) -> float:
        return self.s / self.Kz

    @property
    def nz(self) -> int:
        """Number of z-levels carrying links: N * Kz."""
        return self.N * self.Kz

    def xs(self) -> np.ndarray:
        return np.arange(self.M) * self.ax

    def ys(self) -> np.ndarray:
        return np.arange(self.M) * self.ay

    def z_levels(self) -> np.ndarray:
        return np.arange(self.nz) * self.az

    def z_planes(self) -> np.ndarray:
        return np.arange(self.N) * self.s

    def plane_levels(self) -> np.ndarray:
        return np.arange(self.N) * self.Kz


@dataclass(frozen=True, slots=True)
class ModelParams:
    """Material parameters: coherence scale epsilon, anisotropy lam, coupling
    weight alpha (used by the normalized comparisons), applied field h_ex."""

    epsilon: float
    lam: float
    alpha: float
    h_ex: FieldVector

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ConfigError(f"lam must be positive and finite, got {self.lam}")
        if not (0.0 < self.alpha < 1.0):
            raise ConfigError(f"alpha must lie strictly between 0 and 1, got {self.alpha}")
        for v in self.h_ex:
            if not math.isfinite(v):
                raise ConfigError(f"applied field has a non-finite component: {self.h_ex}")


def flux_quantum_field(geometry: LatticeGeometry, q1: int = 0, q2: int = 0, q3: int = 0) -> np.ndarray:
    """Average field with the given integer flux quanta through the three
    period faces: h = 2 pi (q1/(Ly L), q2/(Lx L), q3/(Lx Ly))."""
    return np.array(
        [
            2.0 * math.pi * q1 / (geometry.Ly * geometry.L),
            2.0 * math.pi * q2 / (geometry.Lx * geometry.L),
            2.0 * math.pi * q3 / (geometry.Lx * geometry.Ly),
        ]
    )


def assert_flux_quantized(geometry: LatticeGeometry, h_bar: np.ndarray, tol: float = _FLUX_TOL) -> None:
    """Raise ConfigError unless all three face fluxes of h_bar are integer
    multiples of 2 pi (twisted-periodicity consistency)."""
    fluxes = (
        ("h1 * Ly * L", h_bar[0] * geometry.Ly * geometry.L),
        ("h2 * Lx * L", h_bar[1] * geometry.Lx * geometry.L),
        ("h3 * Lx * Ly", h_bar[2] * geometry.Lx * geometry.Ly),
    )
    for name, flux in fluxes:
        frac = flux / (2.0 * math.pi)
        if abs(frac - round(frac)) > tol * (1.0 + abs(frac)):
            raise ConfigError(
                f"average field is not flux-quantized: {name} = {flux} is not a multiple of 2 pi"
            )


@dataclass(slots=True)
class LatticeState:
    """Order parameters on the planes plus the periodic link potential.

    ``u``: complex (N, M, M); ``a0``: real (3, N*Kz, M, M) holding the
    averaged A-component on x-, y- and z-links; ``h_bar``: length-3 average
    field, flux-quantized through all three period faces.
    """

    u: np.ndarray
    a0: np.ndarray
    h_bar: np.ndarray
    geometry: LatticeGeometry = field(repr=False)

    def __post_init__(self):
        g = self.geometry
        self.u = np.ascontiguousarray(self.u, dtype=np.complex128)
        self.a0 = np.ascontiguousarray(self.a0, dtype=np.float64)
        self.h_bar = np.asarray(self.h_bar, dtype=np.float64).reshape(3)
        if self.u.shape != (g.N, g.M, g.M):
            raise ConfigError(f"u must have shape {(g.N, g.M, g.M)}, got {self.u.shape}")
        if self.a0.shape != (3, g.nz, g.M, g.M):
            raise ConfigError(f"a0 must have shape {(3, g.nz, g.M, g.M)}, got {self.a0.shape}")
        if not np.all(np.isfinite(self.u.view(np.float64))) or not np.all(np.isfinite(self.a0)):
            raise ConfigError("state contains non-finite entries")
        assert_flux_quantized(g, self.h_bar)

    def copy(self) -> "LatticeState":
        return LatticeState(self.u.copy(), self.a0.copy(), self.h_bar.copy(), self.geometry)


@dataclass(frozen=True, slots=True)
class EnergyBreakdown:
    """Energy split: in-plane term (covariant Dirichlet + quartic well),
    Josephson inter-plane coupling, magnetic field mismatch."""

    dirichlet: float
    quartic: float
    josephson: float
    magnetic: float

    @property
    def in_plane(self) -> float:
        return self.dirichlet + self.quartic

    @property
    def total(self) -> float:
        return self.dirichlet + self.quartic + self.josephson + self.magnetic


# --------------------------------------------------------------------------
# link phases and twisted shifts


def _abar_links(geometry: LatticeGeometry, h_bar: np.ndarray):
    """Averaged components of Abar = (h_bar x X)/2 on x-, y-, z-links.

    Abar is linear, so the midpoint value equals the exact link average.
    Shapes are broadcast-ready against (nz, M, M): x-links depend on (z, y),
    y-links on (z, x), z-links on (x, y).
    """
    xs, ys, zs = geometry.xs(), geometry.ys(), geometry.z_levels()
    h1, h2, h3 = h_bar
    abx = 0.5 * (h2 * zs[:, None, None] - h3 * ys[None, None, :])  # (nz, 1, M)
    aby = 0.5 * (h3 * xs[None, :, None] - h1 * zs[:, None, None])  # (nz, M, 1)
    abz = 0.5 * (h1 * ys[None, None, :] - h2 * xs[None, :, None])  # (1, M, M)
    return abx, aby, abz


def _twists(geometry: LatticeGeometry, h_bar: np.ndarray, z: np.ndarray):
    """Floquet factors picked up when crossing the +x / +y period faces, for
    fields living at heights ``z``; shapes (len(z), 1, M) and (len(z), M, 1)."""
    xs, ys = geometry.xs(), geometry.ys()
    h1, h2, h3 = h_bar
    phx = 0.5 * (h2 * z[:, None, None] - h3 * ys[None, None, :]) * geometry.Lx
    phy = 0.5 * (h3 * xs[None, :, None] - h1 * z[:, None, None]) * geometry.Ly
    return np.exp(-1j * phx), np.exp(-1j * phy)


def _twist_z(geometry: LatticeGeometry, h_bar: np.ndarray) -> np.ndarray:
    """Floquet factor for crossing the +z period face; shape (M, M)."""
    xs, ys = geometry.xs(), geometry.ys()
    h1, h2, h3 = h_bar
    ph = 0.5 * (h1 * ys[None, :] - h2 * xs[:, None]) * geometry.L
    return np.exp(-1j * ph)


def _shift_x(stack: np.ndarray, tw_x: np.ndarray) -> np.ndarray:
    """Neighbor in +x with the twisted wrap: stack shape (K, M, M)."""
    out = np.roll(stack, -1, axis=1)
    out[:, -1, :] = stack[:, 0, :] * tw_x[:, 0, :]
    return out


def _shift_y(stack: np.ndarray, tw_y: np.ndarray) -> np.ndarray:
    out = np.roll(stack, -1, axis=2)
    out[:, :, -1] = stack[:, :, 0] * tw_y[:, :, 0]
    return out


def _link_phases(state: LatticeState):
    """Full link phases theta = a * (Abar_link + a0_link) on all links."""
    g = state.geometry
    abx, aby, abz = _abar_links(g, state.h_bar)
    thx = g.ax * (abx + state.a0[0])
    thy = g.ay * (aby + state.a0[1])
    thz = g.az * (abz + state.a0[2])
    return thx, thy, thz


def _gap_phases(state: LatticeState, thz: np.ndarray) -> np.ndarray:
    """Accumulated z-link phase across each inter-plane gap; shape (N, M, M)."""
    g = state.geometry
    return thz.reshape(g.N, g.Kz, g.M, g.M).sum(axis=1)


def _plane_differences(state: LatticeState, thx: np.ndarray, thy: np.ndarray):
    """Covariant in-plane differences D = u(+) e^{-i theta} - u per plane."""
    g = state.geometry
    kp = g.plane_levels()
    zp = g.z_planes()
    tw_x, tw_y = _twists(g, state.h_bar, zp)
    ux = _shift_x(state.u, tw_x)
    uy = _shift_y(state.u, tw_y)
    phase_x = np.exp(-1j * thx[kp])
    phase_y = np.exp(-1j * thy[kp])
    dx = ux * phase_x - state.u
    dy = uy * phase_y - state.u
    return dx, dy, ux, uy, phase_x, phase_y


def _gap_differences(state: LatticeState, phi: np.ndarray):
    """Josephson difference u_above - u_below e^{i phi} per gap (gap n sits
    between plane n and plane n+1, the last one wrapping with the z-twist)."""
    g = state.geometry
    u_up = np.roll(state.u, -1, axis=0)
    u_up[-1] = state.u[0] * _twist_z(g, state.h_bar)
    trans = np.exp(1j * phi)
    jd = u_up - state.u * trans
    return jd, u_up, trans


def _plaquette_fields(state: LatticeState):
    """Discrete magnetic field per plaquette orientation.

    The Abar contribution to any plaquette circulation is its exact flux, so
    only the periodic a0 circulations are assembled numerically.
    """
    g = state.geometry
    ax, ay, az = g.ax, g.ay, g.az
    a0x, a0y, a0z = state.a0
    h1, h2, h3 = state.h_bar
    circ_yz = (
        ay * a0y
        + az * np.roll(a0z, -1, axis=2)
        - ay * np.roll(a0y, -1, axis=0)
        - az * a0z
    )
    circ_zx = (
        az * a0z
        + ax * np.roll(a0x, -1, axis=0)
        - az * np.roll(a0z, -1, axis=1)
        - ax * a0x
    )
    circ_xy = (
        ax * a0x
        + ay * np.roll(a0y, -1, axis=1)
        - ax * np.roll(a0x, -1, axis=2)
        - ay * a0y
    )
    fx = h1 + circ_yz / (ay * az)
    fy = h2 + circ_zx / (az * ax)
    fz = h3 + circ_xy / (ax * ay)
    return fx, fy, fz


def ld_energy(state: LatticeState, params: ModelParams) -> EnergyBreakdown:
    """Total lattice energy with its term-by-term breakdown.

    in-plane: (s/2) sum |D u|^2 + (s / 4 eps^2) sum (|u|^2 - 1)^2, per-plane,
    with covariant link differences; Josephson: 1/(2 lam^2 s^2) couplings
    across each gap; magnetic: (1/2) |curl A - h_ex|^2 over the full cell.
    """
    g = state.geometry
    thx, thy, thz = _link_phases(state)
    dx, dy, *_ = _plane_differences(state, thx, thy)
    area = g.ax * g.ay
    dirichlet = 0.5 * g.s * area * float(
        np.sum(np.abs(dx) ** 2) / g.ax**2 + np.sum(np.abs(dy) ** 2) / g.ay**2
    )
    quartic = g.s * area / (4.0 * params.epsilon**2) * float(
        np.sum((np.abs(state.u) ** 2 - 1.0) ** 2)
    )
    phi = _gap_phases(state, thz)
    jd, *_ = _gap_differences(state, phi)
    josephson = area / (2.0 * params.lam**2 * g.s) * float(np.sum(np.abs(jd) ** 2))
    fx, fy, fz = _plaquette_fields(state)
    hex1, hex2, hex3 = params.h_ex
    magnetic = 0.5 * area * g.az * float(
        np.sum((fx - hex1) ** 2) + np.sum((fy - hex2) ** 2) + np.sum((fz - hex3) ** 2)
    )
    return EnergyBreakdown(
        dirichlet=dirichlet, quartic=quartic, josephson=josephson, magnetic=magnetic
    )


def ld_energy_grad(state: LatticeState, params: ModelParams):
    """Energy breakdown together with its analytic gradient.

    Returns ``(breakdown, grad_u, grad_a0)`` where ``grad_u`` is the
    derivative with respect to (Re u, Im u) packed as a complex array
    (i.e. 2 dE/d conj(u)) and ``grad_a0`` matches ``state.a0`` in shape.
    """
    g = state.geometry
    ax, ay, az, s = g.ax, g.ay, g.az, g.s
    area = ax * ay
    kp = g.plane_levels()
    thx, thy, thz = _link_phases(state)
    dx, dy, ux, uy, phase_x, phase_y = _plane_differences(state, thx, thy)
    tw_x, tw_y = _twists(g, state.h_bar, g.z_planes())

    cx = 0.5 * s * ay / ax
    cy = 0.5 * s * ax / ay
    dirichlet = cx * float(np.sum(np.abs(dx) ** 2)) + cy * float(np.sum(np.abs(dy) ** 2))

    grad_u = np.zeros_like(state.u)
    grad_a0 = np.zeros_like(state.a0)

    # x-links: -2c D at the base node, +2c e^{+i theta} D at the neighbor
    grad_u -= 2.0 * cx * dx
    wx = 2.0 * cx * dx * np.conj(phase_x)
    wx[:, -1, :] *= np.conj(tw_x[:, 0, :])
    grad_u += np.roll(wx, 1, axis=1)
    # y-links
    grad_u -= 2.0 * cy * dy
    wy = 2.0 * cy * dy * np.conj(phase_y)
    wy[:, :, -1] *= np.conj(tw_y[:, :, 0])
    grad_u += np.roll(wy, 1, axis=2)

    # in-plane link potentials (only the plane levels carry in-plane energy)
    grad_a0[0][kp] = 2.0 * cx * ax * np.imag(ux * phase_x * np.conj(dx))
    grad_a0[1][kp] = 2.0 * cy * ay * np.imag(uy * phase_y * np.conj(dy))

    # quartic well
    mod2 = np.abs(state.u) ** 2
    quartic = s * area / (4.0 * params.epsilon**2) * float(np.sum((mod2 - 1.0) ** 2))
    grad_u += (s * area / params.epsilon**2) * (mod2 - 1.0) * state.u

    # Josephson coupling
    cj = area / (2.0 * params.lam**2 * s)
    phi = _gap_phases(state, thz)
    jd, u_up, trans = _gap_differences(state, phi)
    josephson = cj * float(np.sum(np.abs(jd) ** 2))
    grad_u -= 2.0 * cj * jd * np.conj(trans)
    wz = 2.0 * cj * jd.copy()
    wz[-1] *= np.conj(_twist_z(g, state.h_bar))
    grad_u += np.roll(wz, 1, axis=0)
    dphi = 2.0 * cj * az * np.imag(state.u * trans * np.conj(jd))
    grad_a0[2] = np.repeat(dphi, g.Kz, axis=0)

    # magnetic term
    fx, fy, fz = _plaquette_fields(state)
    hex1, hex2, hex3 = params.h_ex
    rx, ry, rz = fx - hex1, fy - hex2, fz - hex3
    magnetic = 0.5 * area * az * float(np.sum(rx**2) + np.sum(ry**2) + np.sum(rz**2))
    grad_a0[0] += ax * ay * (np.roll(ry, 1, axis=0) - ry) + ax * az * (rz - np.roll(rz, 1, axis=2))
    grad_a0[1] += ax * ay * (rx - np.roll(rx, 1, axis=0)) + ay * az * (np.roll(rz, 1, axis=1) - rz)
    grad_a0[2] += ax * az * (np.roll(rx, 1, axis=2) - rx) + ay * az * (ry - np.roll(ry, 1, axis=1))

    breakdown = EnergyBreakdown(
        dirichlet=dirichlet, quartic=quartic, josephson=josephson, magnetic=magnetic
    )
    return breakdown, grad_u, grad_a0


def gauge_transform(state: LatticeState, gamma: np.ndarray) -> LatticeState:
    """Apply the periodic gauge change u -> u e^{i gamma}, a0 -> a0 + grad gamma.

    ``gamma`` is a real scalar on the full node lattice, shape (N*Kz, M, M);
    the forward link differences of gamma are added to a0 so that every
    gauge-invariant quantity is preserved exactly.
    """
    g = state.geometry
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.shape != (g.nz, g.M, g.M):
        raise ConfigError(f"gamma must have shape {(g.nz, g.M, g.M)}, got {gamma.shape}")
    u2 = state.u * np.exp(1j * gamma[g.plane_levels()])
    a0 = state.a0.copy()
    a0[0] += (np.roll(gamma, -1, axis=1) - gamma) / g.ax
    a0[1] += (np.roll(gamma, -1, axis=2) - gamma) / g.ay
    a0[2] += (np.roll(gamma, -1, axis=0) - gamma) / g.az
    return LatticeState(u2, a0, state.h_bar.copy(), g)


def plane_flux(state: LatticeState, n: int) -> float:
    """Magnetic flux through plane n in units of 2 pi.

    The a0 circulations telescope over the periodic plane, so the result is
    the quantized average-face flux up to rounding noise.
    """
    g = state.geometry
    if not (0 <= n < g.N):
        raise ConfigError(f"plane index {n} out of range [0, {g.N})")
    k = n * g.Kz
    a0x, a0y = state.a0[0][k], state.a0[1][k]
    circ = (
        g.ax * a0x
        + g.ay * np.roll(a0y, -1, axis=0)
        - g.ax * np.roll(a0x, -1, axis=1)
        - g.ay * a0y
    )
    total = state.h_bar[2] * g.Lx * g.Ly + float(np.sum(circ))
    return total / (2.0 * math.pi)


MIN_WINDING_MODULUS = 0.1


def plane_degree(state: LatticeState, n: int) -> int:
    """Total winding of u on plane n, counted gauge-invariantly.

    Sums, per plaquette, the branch-folded covariant phase increments plus
    the plaquette gauge flux; each plaquette contributes an exact multiple of
    2 pi, so the total is an integer vortex count (relative to the uniform
    connection of h_bar).  Requires min |u| > 0.1 on the plane.
    """
    g = state.geometry
    if not (0 <= n < g.N):
        raise ConfigError(f"plane index {n} out of range [0, {g.N})")
    un = state.u[n]
    min_mod = float(np.min(np.abs(un)))
    if min_mod <= MIN_WINDING_MODULUS:
        raise PropertyError(
            f"plane {n} modulus dips to {min_mod:.3g} <= {MIN_WINDING_MODULUS}; "
            "winding count is unreliable"
        )
    k = n * g.Kz
    abx, aby, _ = _abar_links(g, state.h_bar)
    thx = g.ax * (abx[k] + state.a0[0][k])  # (1, M) + (M, M) -> (M, M)
    thy = g.ay * (aby[k] + state.a0[1][k])
    z = np.array([n * g.s])
    tw_x, tw_y = _twists(g, state.h_bar, z)
    stack = un[None]
    ux = _shift_x(stack, tw_x)[0]
    uy = _shift_y(stack, tw_y)[0]
    d_x = np.angle(ux * np.exp(-1j * thx) * np.conj(un))
    d_y = np.angle(uy * np.exp(-1j * thy) * np.conj(un))
    circ_a0 = (
        g.ax * state.a0[0][k]
        + g.ay * np.roll(state.a0[1][k], -1, axis=0)
        - g.ax * np.roll(state.a0[0][k], -1, axis=1)
        - g.ay * state.a0[1][k]
    )
    theta_plq = state.h_bar[2] * g.ax * g.ay + circ_a0
    raw = (d_x + np.roll(d_y, -1, axis=0) - np.roll(d_x, -1, axis=1) - d_y + theta_plq) / (
        2.0 * math.pi
    )
    rounded = np.round(raw)
    if float(np.max(np.abs(raw - rounded))) > 1e-3:
        raise PropertyError("plaquette winding sums are not integral; state is inconsistent")
    return int(rounded.sum())


# --------------------------------------------------------------------------
# serialization: length-prefixed JSON header, then raw '<c16' u and '<f8' a0


def _header_dict(state: LatticeState, params: ModelParams | None) -> dict:
    g = state.geometry
    head = {
        "format": _STATE_MAGIC,
        "version": 1,
        "geometry": {"N": g.N, "M": g.M, "Kz": g.Kz, "Lx": g.Lx, "Ly": g.Ly, "L": g.L},
        "h_bar": [float(v) for v in state.h_bar],
        "u_dtype": "<c16",
        "a0_dtype": "<f8",
        "order": "C",
    }
    if params is not None:
        head["params"] = {
            "epsilon": params.epsilon,
            "lam": params.lam,
            "alpha": params.alpha,
            "h_ex": list(params.h_ex.as_tuple()),
        }
    return head


def save_state(path, state: LatticeState, params: ModelParams | None = None) -> None:
    """Write a state: uint64-LE length prefix, JSON header, then the raw
    little-endian complex u block and float a0 block in C order."""
    header = json.dumps(_header_dict(state, params), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(state.u, dtype="<c16").tobytes())
        fh.write(np.ascontiguousarray(state.a0, dtype="<f8").tobytes())


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ConfigError(f"state file truncated: wanted {n} bytes, got {len(data)}")
    return data


def load_state(path):
    """Read a state written by :func:`save_state`.

    Returns ``(state, params)`` where params is None when the file carries no
    model block.
    """
    with open(path, "rb") as fh:
        (hlen,) = struct.unpack("<Q", _read_exact(fh, 8))
        if hlen > 1_000_000:
            raise ConfigError(f"implausible header length {hlen}; not a state file")
        try:
            head = json.loads(_read_exact(fh, hlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"unreadable state header: {exc}") from exc
        if head.get("format") != _STATE_MAGIC or head.get("version") != 1:
            raise ConfigError(f"unrecognized state format {head.get('format')!r}")
        try:
            gd = head["geometry"]
            geometry = LatticeGeometry(
                N=int(gd["N"]), M=int(gd["M"]), Kz=int(gd["Kz"]),
                Lx=float(gd["Lx"]), Ly=float(gd["Ly"]), L=float(gd["L"]),
            )
            h_bar = np.array([float(v) for v in head["h_bar"]])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed state header: {exc}") from exc
        nu = geometry.N * geometry.M * geometry.M
        na = 3 * geometry.nz * geometry.M * geometry.M
        u = np.frombuffer(_read_exact(fh, 16 * nu), dtype="<c16").reshape(
            geometry.N, geometry.M, geometry.M
        )
        a0 = np.frombuffer(_read_exact(fh, 8 * na), dtype="<f8").reshape(
            3, geometry.nz, geometry.M, geometry.M
        )
        extra = fh.read(1)
        if extra:
            raise ConfigError("state file has trailing bytes")
    params = None
    if "params" in head:
        pd = head["params"]
        params = ModelParams(
            epsilon=float(pd["epsilon"]),
            lam=float(pd["lam"]),
            alpha=float(pd["alpha"]),
            h_ex=FieldVector.from_iterable(pd["h_ex"]),
        )
    state = LatticeState(u.copy(), a0.copy(), h_bar, geometry)
    return state, params
