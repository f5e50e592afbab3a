"""Lagrangian (alpha) coordinates: the initial transform and push-forward reconstruction.

A state stores particle positions ``y``, particle velocities ``U = u(y)`` and
the cumulative energy ``H`` to the left of each particle, all on a uniform
alpha grid. The energy measure is recovered as the push-forward of ``dH``
under ``y``; cells squeezed to (numerically) zero width carry the singular
part.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import CorruptedStateError, DomainCoverageError, InvalidInputError, InvalidParameterError
from .measures import DataPair, EnergyMeasure, GridFunction, measure_cdf

__all__ = [
    "LagrangianState",
    "make_alpha_grid",
    "alpha_transform",
    "reconstruct",
    "singular_mass_estimate",
    "thin_runs",
    "particle_grid",
    "spline_energy",
    "DEFAULT_THICKNESS_TOL",
]

DEFAULT_THICKNESS_TOL = 1e-3


def _readonly(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LagrangianState:
    alpha: np.ndarray
    y: np.ndarray
    U: np.ndarray
    H: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        arrays = [_readonly(getattr(self, k)) for k in ("alpha", "y", "U", "H")]
        n = arrays[0].size
        if n < 2 or any(a.ndim != 1 or a.size != n for a in arrays):
            raise InvalidInputError("alpha, y, U, H must be 1-d arrays of equal length >= 2")
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise InvalidInputError("state entries must be finite")
        da = np.diff(arrays[0])
        h = (arrays[0][-1] - arrays[0][0]) / (n - 1)
        if not h > 0 or np.max(np.abs(da - h)) > 1e-9 * h:
            raise InvalidInputError("alpha grid must be uniform and increasing")
        for k, a in zip(("alpha", "y", "U", "H"), arrays):
            object.__setattr__(self, k, a)
        object.__setattr__(self, "t", float(self.t))
        if np.any(np.diff(self.y) < 0):
            raise CorruptedStateError("particle positions y must be non-decreasing")
        scale = 1.0 + abs(self.H[-1] - self.H[0])
        if np.any(np.diff(self.H) < -1e-10 * scale):
            raise CorruptedStateError("cumulative energy H must be non-decreasing")

    @property
    def n(self) -> int:
        return self.alpha.size

    @property
    def dalpha(self) -> float:
        return float((self.alpha[-1] - self.alpha[0]) / (self.n - 1))

    @property
    def beta(self) -> np.ndarray:
        return self.y + self.H

    @property
    def zeta(self) -> np.ndarray:
        return self.y - self.alpha

    def cell_weights(self) -> np.ndarray:
        """Energy-plus-u^2 mass per cell: ``dH + Ubar^2 dy``."""
        ubar = 0.5 * (self.U[1:] + self.U[:-1])
        return np.diff(self.H) + ubar**2 * np.diff(self.y)

    def identity_residual(self) -> np.ndarray:
        """Discrete defect of ``y_a H_a = U^2 y_a^2 + U_a^2`` per cell."""
        dy, dH, dU = np.diff(self.y), np.diff(self.H), np.diff(self.U)
        ubar = 0.5 * (self.U[1:] + self.U[:-1])
        return dy * dH - ubar**2 * dy**2 - dU**2

    def with_arrays(self, y=None, U=None, H=None, t=None) -> LagrangianState:
        return replace(
            self,
            y=self.y if y is None else y,
            U=self.U if U is None else U,
            H=self.H if H is None else H,
            t=self.t if t is None else t,
        )


def _support(data: DataPair) -> tuple[float, float]:
    pts = [data.u.nodes, data.mu.ac_density.nodes, data.mu.positions]
    pts = np.concatenate([p for p in pts if p.size])
    return float(pts.min()), float(pts.max())


def _G(mu: EnergyMeasure, x, closed: bool = True):
    return x + measure_cdf(mu, x, closed=closed)


def make_alpha_grid(data: DataPair, n: int, pad: float, anchors=()) -> np.ndarray:
    """Uniform alpha grid covering the data support plus ``pad`` on both sides.

    Each anchor x-position (a peakon crest, say) is mapped to its label
    ``x + mu((-inf, x])`` and placed exactly on a node. With one anchor the
    grid has ``n`` nodes; with several, the spacing is adjusted so the two
    outermost anchors are both nodes and the node count may differ from
    ``n`` by a few.
    """
    if n < 16:
        raise InvalidParameterError("need at least 16 alpha nodes")
    if pad < 0:
        raise InvalidParameterError("pad must be non-negative")
    x_lo, x_hi = _support(data)
    a = x_lo - pad
    b = x_hi + data.mu.total_mass + pad
    h0 = (b - a) / (n - 1)
    anchors = sorted(float(v) for v in anchors)
    if not anchors:
        return np.linspace(a, b, n)
    labels = [float(_G(data.mu, v)) for v in anchors]
    lo, hi = labels[0], labels[-1]
    if len(labels) == 1 or hi - lo < h0:
        k = int(round((lo - a) / h0))
        return lo + h0 * (np.arange(n) - k)
    m = max(1, int(round((hi - lo) / h0)))
    h = (hi - lo) / m
    k_left = int(round((lo - a) / h))
    k_right = int(round((b - hi) / h))
    return lo + h * (np.arange(k_left + m + k_right + 1) - k_left)


def alpha_transform(data: DataPair, alpha_grid) -> LagrangianState:
    """Initial Lagrangian state: invert ``G(x) = x + mu((-inf, x])``.

    ``y0(alpha)`` is the smallest x with ``G(x) >= alpha`` (vectorized
    bisection); labels inside the plateau of an atom map exactly to the atom.
    """
    alpha = np.asarray(alpha_grid, dtype=float)
    mu = data.mu
    total = mu.total_mass
    x_lo, x_hi = _support(data)
    if alpha.size < 2 or alpha[0] > x_lo or alpha[-1] < x_hi + total:
        raise DomainCoverageError(
            f"alpha grid [{alpha[0]:.6g}, {alpha[-1]:.6g}] must cover [{x_lo:.6g}, {x_hi + total:.6g}]"
        )
    lo = alpha - total - 1.0
    hi = alpha + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        # stop once every bracket is down to adjacent floats
        if np.all((mid <= lo) | (mid >= hi)):
            break
        ge = _G(mu, mid) >= alpha
        hi = np.where(ge, mid, hi)
        lo = np.where(ge, lo, mid)
    xbar = hi
    for pos, mass in mu.atoms:
        g_open = pos + measure_cdf(mu, pos, closed=False)
        xbar = np.where((alpha >= g_open) & (alpha <= g_open + mass), pos, xbar)
    xbar = np.where(alpha <= x_lo, alpha, xbar)
    xbar = np.where(alpha >= x_hi + total, alpha - total, xbar)
    # bisection noise must not break monotonicity
    xbar = np.maximum.accumulate(xbar)
    # H = alpha - xbar, taken from the CDF itself: the difference of two
    # large labels would leave absolute rounding noise in the tails
    H = np.clip(alpha - xbar, measure_cdf(mu, xbar, closed=False), measure_cdf(mu, xbar))
    return LagrangianState(alpha, xbar, data.u(xbar), np.maximum.accumulate(H), 0.0)


def thin_runs(state: LagrangianState, thickness_tol: float) -> list[tuple[int, int]]:
    """Maximal runs ``[s, e)`` of cells with ``dy / dalpha <= thickness_tol``."""
    thin = np.diff(state.y) <= thickness_tol * state.dalpha
    edges = np.diff(np.concatenate([[0], thin.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return list(zip(starts.tolist(), ends.tolist()))


def _atoms(state: LagrangianState, thickness_tol: float) -> list[tuple[float, float]]:
    dH = np.diff(state.H)
    ymid = 0.5 * (state.y[1:] + state.y[:-1])
    atoms: list[tuple[float, float]] = []
    for s, e in thin_runs(state, thickness_tol):
        mass = float(np.sum(dH[s:e]))
        if not mass > 0:
            continue
        pos = float(np.sum(dH[s:e] * ymid[s:e]) / mass)
        pos = min(max(pos, state.y[s]), state.y[e])
        if atoms and pos <= atoms[-1][0]:
            atoms[-1] = (atoms[-1][0], atoms[-1][1] + mass)
        else:
            atoms.append((pos, mass))
    return atoms


def singular_mass_estimate(state: LagrangianState, thickness_tol: float = DEFAULT_THICKNESS_TOL) -> float:
    """Total mass of the atoms :func:`reconstruct` would produce."""
    if not thickness_tol > 0:
        raise InvalidParameterError("thickness_tol must be positive")
    return math.fsum(m for _, m in _atoms(state, thickness_tol))


def _spline_eval(y, U, x, k, thin):
    """Exponential spline on cell k (u - u_xx = 0 between the two nodes).

    Returns (u, u_x) at points x in [y_k, y_{k+1}]; thin cells are linear in
    value with zero slope.
    """
    a, b = U[k], U[k + 1]
    d = y[k + 1] - y[k]
    s = np.clip(x - y[k], 0.0, None)
    s = np.minimum(s, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        E = np.exp(-d)
        D = -np.expm1(-2.0 * d)
        es = np.exp(-s)
        eds = np.exp(-(d - s))
        u = (a * (es - E * eds) + b * (eds - E * es)) / D
        ux = (-a * (es + E * eds) + b * (eds + E * es)) / D
        frac = np.where(d > 0, s / np.where(d > 0, d, 1.0), 0.0)
    u = np.where(thin[k], a + frac * (b - a), u)
    ux = np.where(thin[k], 0.0, ux)
    return u, ux


def particle_grid(state: LagrangianState, refine: int = 1) -> np.ndarray:
    """Distinct particle positions with ``refine - 1`` extra points in every cell."""
    y = np.unique(state.y)
    if refine <= 1 or y.size < 2:
        return y
    frac = np.arange(refine) / refine
    x = (y[:-1, None] + np.diff(y)[:, None] * frac[None, :]).ravel()
    return np.unique(np.concatenate([x, y[-1:]]))


def spline_energy(state: LagrangianState, thickness_tol: float = DEFAULT_THICKNESS_TOL) -> float:
    """Exact ``int u^2 + u_x^2`` of the reconstructed profile (thick cells only)."""
    d = np.diff(state.y)
    keep = d > thickness_tol * state.dalpha
    a, b, d = state.U[:-1][keep], state.U[1:][keep], d[keep]
    E = np.exp(-d)
    D = -np.expm1(-2.0 * d)
    cell = ((a - b) ** 2 * (1.0 + E * E) + 2.0 * a * b * (1.0 - E) ** 2) / D
    return math.fsum(cell)


def reconstruct(
    state: LagrangianState, x_grid=None, thickness_tol: float = DEFAULT_THICKNESS_TOL
) -> DataPair:
    """Push a Lagrangian state forward to an Eulerian pair ``(u, mu)``.

    On thick cells u is the exponential spline through ``(y, U)`` (exact for
    peakon profiles); thin cells are collapsed and their energy goes into
    atoms. ``x_grid=None`` uses the distinct particle positions. Derivatives
    at particles are one-sided, and the density is ``u^2 + u_x^2`` on the
    output grid.
    """
    if not thickness_tol > 0:
        raise InvalidParameterError("thickness_tol must be positive")
    y, U = state.y, state.U
    thin = np.diff(y) <= thickness_tol * state.dalpha
    x = particle_grid(state) if x_grid is None else np.asarray(x_grid, dtype=float)
    if x.size and np.any(np.diff(x) <= 0):
        raise InvalidInputError("x_grid must be strictly increasing")
    last = y.size - 2
    inside = (x >= y[0]) & (x <= y[-1])
    kr = np.clip(np.searchsorted(y, x, side="right") - 1, 0, last)
    kl = np.clip(np.searchsorted(y, x, side="left") - 1, 0, last)
    values, right = _spline_eval(y, U, x, kr, thin)
    _, left = _spline_eval(y, U, x, kl, thin)
    values = np.where(inside, values, 0.0)
    right = np.where(inside & (x < y[-1]), right, 0.0)
    left = np.where(inside & (x > y[0]), left, 0.0)
    u = GridFunction(x, values, 0.5 * (left + right), left, right)
    density = values**2 + u.nodal_dx2()
    mu = EnergyMeasure(GridFunction.from_samples(x, density), np.asarray(_atoms(state, thickness_tol)))
    return DataPair(u, mu, 0.0)
