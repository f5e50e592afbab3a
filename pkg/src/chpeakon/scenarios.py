"""Initial data and the multipeakon ODE oracle.

The oracle integrates positions q and momenta p of
``u = sum_i p_i exp(-|x - q_i|)`` independently of the Lagrangian solver and
is trusted only strictly before a collision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .conserved import _bump
from .exceptions import InvalidInputError, InvalidParameterError, OracleRangeError
from .lagrangian import LagrangianState, alpha_transform, make_alpha_grid, particle_grid, reconstruct
from .measures import (
    DataPair,
    EnergyMeasure,
    GridFunction,
    PeakonSum,
    h1_distance_sq,
    kink_aligned_grid,
    singular_mass,
    truncation_radius,
)

__all__ = [
    "DATA_NODES",
    "data_nodes",
    "make_zero",
    "make_peakon",
    "make_perturbed_peakon",
    "make_peakon_antipeakon",
    "mirror",
    "peakon_anchors",
    "initial_state",
    "MultipeakonState",
    "multipeakon_rhs",
    "multipeakon_energy",
    "integrate_multipeakon",
    "oracle_blowup_time",
    "oracle_compare",
]

# Initial data are sampled much more finely than the alpha grid: linear
# interpolation of u at the particle positions otherwise leaves grid-scale
# noise in U that breaks the cells squeezed ahead of a crest.
DATA_NODES = 2**18 + 1
DATA_REFINE = 64
ORACLE_CAP = 1e3


def data_nodes(n_alpha: int) -> int:
    """Data-grid size for an alpha grid of ``n_alpha`` nodes.

    The initial-data error has to shrink with the alpha spacing for the
    solver error to show its convergence order.
    """
    return max(DATA_NODES, DATA_REFINE * int(n_alpha) + 1)


def _peakon_pair(ps: PeakonSum, lo: float, hi: float, n_nodes: int, atoms=()) -> DataPair:
    return DataPair.from_profile(ps.on_grid(kink_aligned_grid(lo, hi, n_nodes, ps.centers)), atoms)


def make_zero(radius: float = 5.0, n_nodes: int = 257) -> DataPair:
    x = np.linspace(-radius, radius, n_nodes)
    return DataPair.from_profile(GridFunction(x, np.zeros_like(x), np.zeros_like(x)))


def make_peakon(c: float, x0: float = 0.0, n_nodes: int = DATA_NODES, radius: float | None = None) -> DataPair:
    """``c exp(-|x - x0|)`` on a kink-aligned grid, truncated where the energy tail is 1e-12."""
    if c == 0 or not np.isfinite(c):
        raise InvalidParameterError("peakon speed c must be finite and non-zero")
    R = truncation_radius(abs(c)) if radius is None else radius
    return _peakon_pair(PeakonSum([c], [x0]), x0 - R, x0 + R, n_nodes)


@lru_cache(maxsize=None)
def _bump_moments() -> tuple[float, float]:
    """``int b^2`` and ``int b'^2`` of the standard bump on (-1, 1)."""
    def q(k):
        val, _ = integrate.quad(lambda s: float(_bump(s)[k] ** 2), -1.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=200)
        return val

    return q(0), q(1)


def _bump_profile(center: float, width: float, h1: float):
    """Bump of width ``width`` scaled to H^1 norm ``h1``, with its derivative."""
    i0, i1 = _bump_moments()
    amp = h1 / math.sqrt(width * i0 + i1 / width)

    def value(x):
        return amp * _bump((np.asarray(x) - center) / width)[0]

    def slope(x):
        return amp * _bump((np.asarray(x) - center) / width)[1] / width

    return value, slope


def make_perturbed_peakon(
    c: float,
    kind: str,
    size: float,
    n_nodes: int = DATA_NODES,
    position: float = 3.0,
    width: float = 1.0,
) -> tuple[DataPair, float]:
    """A peakon ``c phi`` with one of three perturbations, plus the measured defect.

    ``scaled``: ``(1 + size) c phi``; ``bump``: add a smooth bump of H^1 norm
    ``size`` centred at ``position``; ``atom``: add an atom of mass ``size`` at
    ``position``. The defect is ``mu_s(R) + ||u - c phi||_{H^1}^2``.
    """
    if not c > 0:
        raise InvalidParameterError("c must be positive")
    if size < 0 or not np.isfinite(size):
        raise InvalidParameterError("size must be finite and non-negative")
    R = truncation_radius(c * (1.0 + size))
    ps = PeakonSum([c], [0.0])
    x = kink_aligned_grid(-R, R, n_nodes, [0.0])
    if kind == "scaled":
        data = _peakon_pair(PeakonSum([c * (1.0 + size)], [0.0]), -R, R, n_nodes)
    elif kind == "bump":
        if not -R + width < position < R - width:
            raise InvalidParameterError("bump must fit inside the data grid")
        bv, bs = _bump_profile(position, width, size)
        u = GridFunction.from_closed_form(
            lambda z: ps.value(z) + bv(z),
            lambda z: ps.slope(z) + bs(z),
            x,
            df_left=lambda z: ps.slope(z, -1) + bs(z),
            df_right=lambda z: ps.slope(z, +1) + bs(z),
        )
        data = DataPair.from_profile(u)
    elif kind == "atom":
        if not -R < position < R:
            raise InvalidParameterError("atom must sit inside the data grid")
        data = _peakon_pair(ps, -R, R, n_nodes, [(position, size)] if size > 0 else ())
    else:
        raise InvalidParameterError(f"unknown perturbation kind {kind!r}")
    defect = singular_mass(data.mu) + h1_distance_sq(data.u, ps)
    return data, defect


def make_peakon_antipeakon(p: float, halfsep: float, n_nodes: int = DATA_NODES) -> DataPair:
    """``p phi(x + halfsep) - p phi(x - halfsep)``: the two crests approach and collide."""
    if not p > 0 or not halfsep > 0:
        raise InvalidParameterError("p and halfsep must be positive")
    R = truncation_radius(p) + halfsep
    return _peakon_pair(PeakonSum([p, -p], [-halfsep, halfsep]), -R, R, n_nodes)


def peakon_anchors(data: DataPair) -> list[float]:
    """Kink positions (one-sided slopes differ) of a data profile."""
    u = data.u
    jump = np.abs(u.right_derivative - u.left_derivative)
    return [float(v) for v in u.nodes[jump > 1e-9 * (1.0 + np.max(np.abs(u.values)))]]


def _exact_increments(H0: float, m: np.ndarray) -> np.ndarray:
    # round to a dyadic grid fine enough for every partial sum to be exact,
    # so that np.diff of the stored H returns m bit for bit in either order
    top = abs(H0) + math.fsum(m)
    if not top > 0:
        return np.full(m.size + 1, H0)
    q = 2.0 ** (math.ceil(math.log2(top)) - 52)
    m = np.round(m / q) * q
    return np.round(H0 / q) * q + np.concatenate([[0.0], np.cumsum(m)])


def initial_state(data: DataPair, n_alpha: int, pad: float) -> LagrangianState:
    """Initial Lagrangian state on an alpha grid anchored at the peakon crests.

    The transform of ``data`` is averaged with the reflection of the transform
    of ``mirror(data)``. The result is then exactly equivariant: mirrored data
    give the reflected state bit for bit, which the stepper preserves. The
    two transforms differ at rounding level only. If the two alpha grids are
    not reflections of each other the plain transform is returned; this
    happens for a single anchor with an even node count, where the anchor
    cannot sit at the centre of a symmetric grid.
    """
    def plain(d):
        return alpha_transform(d, make_alpha_grid(d, n_alpha, pad, peakon_anchors(d)))

    a, b = plain(data), plain(mirror(data))
    total = data.mu.total_mass
    if a.n != b.n or np.max(np.abs(a.alpha - (total - b.alpha[::-1]))) > 1e-9 * a.dalpha:
        return a
    y = 0.5 * (a.y - b.y[::-1])
    U = 0.5 * (a.U - b.U[::-1])
    m = np.maximum(0.5 * (np.diff(a.H) + np.diff(b.H)[::-1]), 0.0)
    return LagrangianState(a.alpha, y, U, _exact_increments(float(a.H[0]), m), 0.0)


def mirror(data: DataPair) -> DataPair:
    """The data of ``-u(-x)``: reflected profile, reflected measure."""
    u = data.u
    x = -u.nodes[::-1]
    um = GridFunction(
        x,
        -u.values[::-1],
        u.derivative[::-1],
        u.right_derivative[::-1],
        u.left_derivative[::-1],
    )
    d = data.mu.ac_density
    dm = GridFunction(-d.nodes[::-1], d.values[::-1], -d.derivative[::-1])
    atoms = data.mu.atoms[::-1] * np.array([-1.0, 1.0]) if data.mu.atoms.size else None
    return DataPair(um, EnergyMeasure(dm, atoms), data.compat_tol)


@dataclass(frozen=True, eq=False)
class MultipeakonState:
    q: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        q = np.atleast_1d(np.array(self.q, dtype=float))
        p = np.atleast_1d(np.array(self.p, dtype=float))
        if q.ndim != 1 or q.shape != p.shape or q.size < 1:
            raise InvalidInputError("q and p must be equal-length 1-d arrays with n >= 1")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise InvalidInputError("q and p must be finite")
        if np.any(np.diff(q) <= 0):
            raise InvalidInputError("q must be strictly increasing")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "t", float(self.t))

    def profile(self) -> PeakonSum:
        return PeakonSum(self.p, self.q)


def _mp_rhs(q, p):
    z = q[:, None] - q[None, :]
    k = np.exp(-np.abs(z))
    dq = k @ p
    dp = p * ((np.sign(z) * k) @ p)
    return dq, dp


def multipeakon_rhs(state: MultipeakonState) -> tuple[np.ndarray, np.ndarray]:
    """``dq_i = sum_j p_j e^{-|q_i - q_j|}``, ``dp_i = sum_j p_i p_j sgn(q_i - q_j) e^{-|q_i - q_j|}``."""
    return _mp_rhs(state.q, state.p)


def multipeakon_energy(q, p) -> float:
    """``E(u) = 2 sum_ij p_i p_j e^{-|q_i - q_j|}`` for the multipeakon profile."""
    q, p = np.asarray(q, dtype=float), np.asarray(p, dtype=float)
    return float(2.0 * p @ np.exp(-np.abs(q[:, None] - q[None, :])) @ p)


def _mp_step(q, p, h):
    k1 = _mp_rhs(q, p)
    k2 = _mp_rhs(q + 0.5 * h * k1[0], p + 0.5 * h * k1[1])
    k3 = _mp_rhs(q + 0.5 * h * k2[0], p + 0.5 * h * k2[1])
    k4 = _mp_rhs(q + h * k3[0], p + h * k3[1])
    return (
        q + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        p + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
    )


def integrate_multipeakon(
    state: MultipeakonState, times, dt: float, cap: float = ORACLE_CAP
) -> list[MultipeakonState]:
    """RK4 with step ``dt`` through the increasing output ``times``.

    Raises :class:`OracleRangeError` once ``max|p|`` exceeds ``cap * max|p(0)|``
    or the positions lose their order.
    """
    if not dt > 0:
        raise InvalidParameterError("dt must be positive")
    limit = cap * float(np.max(np.abs(state.p)))
    q, p, t = state.q.copy(), state.p.copy(), state.t
    out = []
    for target in np.asarray(times, dtype=float):
        if target < t - 1e-12:
            raise InvalidParameterError("output times must be increasing and not before the start")
        n = int(round((target - t) / dt))
        h = (target - t) / n if n else 0.0
        for _ in range(n):
            q, p = _mp_step(q, p, h)
            if not (np.all(np.isfinite(p)) and np.max(np.abs(p)) <= limit and np.all(np.diff(q) > 0)):
                raise OracleRangeError(f"multipeakon oracle left its range before t = {target:.6g}")
        t = float(target)
        out.append(MultipeakonState(q.copy(), p.copy(), t))
    return out


def oracle_blowup_time(state: MultipeakonState, dt: float, t_max: float, cap: float = ORACLE_CAP) -> float:
    """First step time at which the oracle leaves its range, or ``inf`` before ``t_max``."""
    limit = cap * float(np.max(np.abs(state.p)))
    q, p, t = state.q.copy(), state.p.copy(), state.t
    while t < t_max:
        q, p = _mp_step(q, p, dt)
        t += dt
        if not (np.all(np.isfinite(p)) and np.max(np.abs(p)) <= limit and np.all(np.diff(q) > 0)):
            return t
    return math.inf


def oracle_compare(traj, mp0: MultipeakonState, t_stop: float, refine: int = 4) -> float:
    """Max H^1 distance between the solver and the oracle over checkpoints up to ``t_stop``.

    The oracle runs with RK4 at a tenth of the solver step; the solver profile
    is reconstructed on its particle grid with ``refine`` points per cell.
    """
    cps = [cp for cp in traj.checkpoints if cp.state is not None and cp.t <= t_stop + 1e-12]
    if not cps:
        raise InvalidInputError("no stored checkpoints before t_stop")
    ref = integrate_multipeakon(mp0, [cp.t for cp in cps], traj.dt / 10.0)
    worst = 0.0
    for cp, mp in zip(cps, ref):
        st = cp.state
        u = reconstruct(st, particle_grid(st, refine), traj.thickness_tol).u
        worst = max(worst, math.sqrt(max(h1_distance_sq(u, mp.profile()), 0.0)))
    return worst
