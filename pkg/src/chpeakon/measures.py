"""Eulerian profiles, energy measures and the classical conserved functionals.

Everything here is integrated with the composite trapezoid rule on the stored
grid. Profiles with kinks (peakons) carry one-sided derivative limits at the
kink nodes so that cellwise quadrature never straddles a derivative jump.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .exceptions import InvalidInputError, InvalidParameterError

__all__ = [
    "GridFunction",
    "EnergyMeasure",
    "DataPair",
    "PeakonSum",
    "kink_aligned_grid",
    "truncation_radius",
    "h1_norm",
    "energy_E",
    "energy_F",
    "measure_cdf",
    "singular_mass",
    "generalized_E",
    "generalized_F",
    "h1_distance_sq",
]


def _readonly(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional")
    arr.setflags(write=False)
    return arr


def kink_aligned_grid(x_min: float, x_max: float, n: int, kinks: Iterable[float] = ()) -> np.ndarray:
    """Uniform grid on ``[x_min, x_max]`` with every kink position made a node.

    The nearest uniform node is moved onto a kink when it lies within half a
    cell; otherwise (two kinks competing for one node) the kink is inserted.
    """
    if n < 2 or not x_max > x_min:
        raise InvalidParameterError("need n >= 2 and x_max > x_min")
    nodes = np.linspace(x_min, x_max, n)
    h = (x_max - x_min) / (n - 1)
    snapped = set()
    extra = []
    for k in sorted(set(float(v) for v in kinks)):
        if not x_min < k < x_max:
            continue
        i = int(np.argmin(np.abs(nodes - k)))
        if i not in snapped and 0 < i < n - 1 and abs(nodes[i] - k) <= 0.5 * h:
            nodes[i] = k
            snapped.add(i)
        else:
            extra.append(k)
    if extra:
        nodes = np.union1d(nodes, extra)
    return nodes


def truncation_radius(c: float, tail: float = 1e-12) -> float:
    """Radius R with the energy of ``c*phi`` outside ``[-R, R]`` below ``tail``.

    The energy density of a peakon is ``2 c^2 exp(-2|x|)``, so the two tails
    carry ``2 c^2 exp(-2R)``.
    """
    return max(0.5 * np.log(2.0 * c * c / tail), 1.0)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """A real function sampled on a strictly increasing grid.

    ``derivative`` holds nodal derivative estimates. Where the function has a
    derivative jump, ``left_derivative``/``right_derivative`` hold the
    one-sided limits and ``derivative`` their mean; when omitted both default
    to ``derivative``.
    """

    nodes: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    left_derivative: np.ndarray | None = None
    right_derivative: np.ndarray | None = None

    def __post_init__(self):
        nodes = _readonly(self.nodes, "nodes")
        values = _readonly(self.values, "values")
        deriv = _readonly(self.derivative, "derivative")
        n = nodes.size
        if values.size != n or deriv.size != n:
            raise InvalidInputError("values and derivative must match nodes in length")
        if n > 1 and not np.all(np.diff(nodes) > 0):
            raise InvalidInputError("nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "derivative", deriv)
        for name in ("left_derivative", "right_derivative"):
            side = getattr(self, name)
            if side is None:
                side = deriv
            else:
                side = _readonly(side, name)
                if side.size != n:
                    raise InvalidInputError(f"{name} must match nodes in length")
            object.__setattr__(self, name, side)
        for arr in (nodes, values, deriv, self.left_derivative, self.right_derivative):
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError("grid function entries must be finite")

    def __len__(self) -> int:
        return self.nodes.size

    @classmethod
    def from_samples(cls, nodes, values) -> GridFunction:
        """Sampled data; derivative by central differences, one-sided at the ends."""
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        if nodes.size < 2:
            return cls(nodes, values, np.zeros_like(values))
        return cls(nodes, values, np.gradient(values, nodes, edge_order=1))

    @classmethod
    def from_closed_form(
        cls,
        f: Callable[[np.ndarray], np.ndarray],
        df: Callable[[np.ndarray], np.ndarray],
        nodes,
        df_left: Callable[[np.ndarray], np.ndarray] | None = None,
        df_right: Callable[[np.ndarray], np.ndarray] | None = None,
    ) -> GridFunction:
        nodes = np.asarray(nodes, dtype=float)
        left = None if df_left is None else df_left(nodes)
        right = None if df_right is None else df_right(nodes)
        deriv = df(nodes) if left is None or right is None else 0.5 * (left + right)
        return cls(nodes, f(nodes), deriv, left, right)

    @property
    def cell_widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    def nodal_dx2(self) -> np.ndarray:
        """Squared derivative at nodes; at kinks the one-sided squares weighted by the adjacent cell widths.

        With these weights the trapezoid rule over the two cells at a kink
        equals the sum of the one-sided cell trapezoids, for any cell widths.
        """
        n = self.nodes.size
        if n < 2:
            return 0.5 * (self.left_derivative**2 + self.right_derivative**2)
        h = self.cell_widths
        hl = np.concatenate([[0.0], h])
        hr = np.concatenate([h, [0.0]])
        return (hl * self.left_derivative**2 + hr * self.right_derivative**2) / (hl + hr)

    def __call__(self, x) -> np.ndarray:
        """Linear interpolation of the values; zero outside the grid."""
        return np.interp(x, self.nodes, self.values, left=0.0, right=0.0)

    def with_nodes(self, points: Iterable[float]) -> GridFunction:
        """Insert extra nodes, treating the function as piecewise linear between nodes.

        Inserted nodes inherit the slope of the cell they split on both sides.
        """
        pts = np.setdiff1d(np.asarray(list(points), dtype=float), self.nodes)
        pts = pts[(pts > self.nodes[0]) & (pts < self.nodes[-1])]
        if pts.size == 0:
            return self
        cell = np.searchsorted(self.nodes, pts) - 1
        slope = np.diff(self.values)[cell] / self.cell_widths[cell]
        nodes = np.concatenate([self.nodes, pts])
        order = np.argsort(nodes, kind="stable")
        cat = lambda own, new: np.concatenate([own, new])[order]  # noqa: E731
        return GridFunction(
            nodes[order],
            cat(self.values, self(pts)),
            cat(self.derivative, slope),
            cat(self.left_derivative, slope),
            cat(self.right_derivative, slope),
        )


def _cellwise(u: GridFunction, g: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]) -> float:
    """Trapezoid of ``g(x, u, u_x)`` using one-sided derivatives at each cell end."""
    if len(u) == 0:
        raise InvalidInputError("empty grid")
    if len(u) == 1:
        return 0.0
    x, v = u.nodes, u.values
    start = g(x[:-1], v[:-1], u.right_derivative[:-1])
    end = g(x[1:], v[1:], u.left_derivative[1:])
    return float(np.sum(0.5 * u.cell_widths * (start + end)))


def energy_E(u: GridFunction) -> float:
    """Classical energy: integral of ``u^2 + u_x^2``."""
    return _cellwise(u, lambda x, v, d: v * v + d * d)


def h1_norm(u: GridFunction) -> float:
    return float(np.sqrt(energy_E(u)))


def energy_F(u: GridFunction) -> float:
    """Classical cubic invariant: integral of ``u^3 + u u_x^2``."""
    return _cellwise(u, lambda x, v, d: v**3 + v * d * d)


@dataclass(frozen=True, eq=False)
class PeakonSum:
    """Closed form ``sum_j a_j exp(-|x - q_j|)``.

    Serves both as a data builder (peakons, peakon-antipeakon pairs) and as
    the exact comparison target in distance computations.
    """

    amplitudes: np.ndarray
    centers: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.amplitudes, dtype=float))
        q = np.atleast_1d(np.asarray(self.centers, dtype=float))
        if a.shape != q.shape:
            raise InvalidInputError("amplitudes and centers must have the same length")
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "centers", q)

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        z = np.abs(x[..., None] - self.centers)
        return np.exp(-z) @ self.amplitudes

    def slope(self, x, side: int = 0) -> np.ndarray:
        """Derivative; at a center ``side=-1``/``+1`` picks the left/right limit."""
        x = np.asarray(x, dtype=float)
        z = x[..., None] - self.centers
        s = np.where(z == 0.0, float(side), np.sign(z))
        return -(s * np.exp(-np.abs(z))) @ self.amplitudes

    def on_grid(self, nodes) -> GridFunction:
        return GridFunction.from_closed_form(
            self.value,
            self.slope,
            nodes,
            df_left=lambda x: self.slope(x, -1),
            df_right=lambda x: self.slope(x, +1),
        )

    def grid_function(self, x_min: float, x_max: float, n: int) -> GridFunction:
        return self.on_grid(kink_aligned_grid(x_min, x_max, n, self.centers))


def h1_distance_sq(u: GridFunction, target: PeakonSum) -> float:
    """``||u - target||_{H^1}^2`` on the union of u's nodes and the target kinks.

    Cellwise Simpson: the target is evaluated exactly at cell midpoints, u by
    linear interpolation of its nodal values and one-sided slopes there.
    Cells with a target kink inside cannot occur since kinks become nodes.
    """
    if len(u) < 2:
        raise InvalidInputError("need at least two nodes")
    u = u.with_nodes(target.centers)
    x, v = u.nodes, u.values
    h = u.cell_widths
    mid = 0.5 * (x[:-1] + x[1:])
    vm = 0.5 * (v[:-1] + v[1:])
    dm = 0.5 * (u.right_derivative[:-1] + u.left_derivative[1:])

    def g(xx, vv, dd, side):
        return (vv - target.value(xx)) ** 2 + (dd - target.slope(xx, side)) ** 2

    start = g(x[:-1], v[:-1], u.right_derivative[:-1], +1)
    end = g(x[1:], v[1:], u.left_derivative[1:], -1)
    inner = float(np.sum(h / 6.0 * (start + 4.0 * g(mid, vm, dm, 0) + end)))
    # target mass outside the grid, where u is taken as zero
    lo, hi = x[0], x[-1]
    a, q = target.amplitudes, target.centers
    tail = 0.0
    for i in range(a.size):
        for j in range(a.size):
            # integral of 2 a_i a_j exp(-(q_i - x) - (q_j - x)) for x < lo, etc.
            if q[i] >= lo and q[j] >= lo:
                tail += a[i] * a[j] * np.exp(2 * lo - q[i] - q[j])
            if q[i] <= hi and q[j] <= hi:
                tail += a[i] * a[j] * np.exp(q[i] + q[j] - 2 * hi)
    return inner + float(tail)


@dataclass(frozen=True, eq=False)
class EnergyMeasure:
    """Finite positive measure: density on a grid plus finitely many atoms.

    ``atoms`` is an ``(k, 2)`` array of ``(position, mass)`` rows, sorted by
    position with distinct positions and positive masses.
    """

    ac_density: GridFunction
    atoms: np.ndarray = None

    def __post_init__(self):
        if np.any(self.ac_density.values < 0):
            raise InvalidInputError("density must be non-negative")
        atoms = np.zeros((0, 2)) if self.atoms is None else np.array(self.atoms, dtype=float)
        atoms = atoms.reshape(-1, 2)
        atoms = atoms[np.argsort(atoms[:, 0], kind="stable")]
        if not np.all(np.isfinite(atoms)):
            raise InvalidInputError("atoms must be finite")
        if np.any(atoms[:, 1] <= 0):
            raise InvalidInputError("atom masses must be positive")
        if np.any(np.diff(atoms[:, 0]) <= 0):
            raise InvalidInputError("atom positions must be distinct")
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def from_density(cls, nodes, density, atoms: Sequence[tuple[float, float]] = ()) -> EnergyMeasure:
        return cls(GridFunction.from_samples(nodes, density), np.asarray(atoms, dtype=float))

    @property
    def positions(self) -> np.ndarray:
        return self.atoms[:, 0]

    @property
    def masses(self) -> np.ndarray:
        return self.atoms[:, 1]

    @property
    def ac_mass(self) -> float:
        d = self.ac_density
        if len(d) < 2:
            return 0.0
        return float(np.sum(0.5 * d.cell_widths * (d.values[:-1] + d.values[1:])))

    @property
    def total_mass(self) -> float:
        return self.ac_mass + float(np.sum(self.masses))


def singular_mass(mu: EnergyMeasure) -> float:
    return float(np.sum(mu.masses))


def measure_cdf(mu: EnergyMeasure, x, closed: bool = True):
    """``mu((-inf, x])`` (``closed``) or ``mu((-inf, x))``; vectorized in x."""
    x = np.asarray(x, dtype=float)
    side = "right" if closed else "left"
    cum_atoms = np.concatenate([[0.0], np.cumsum(mu.masses)])
    out = cum_atoms[np.searchsorted(mu.positions, x, side=side)]
    d = mu.ac_density
    if len(d) >= 2:
        xs, ds, h = d.nodes, d.values, d.cell_widths
        # extended-precision running sum: the CDF of a reflected measure then
        # agrees with the reflected CDF to rounding, independent of grid size
        cells = 0.5 * h * (ds[:-1] + ds[1:])
        cum = np.concatenate([[0.0], np.cumsum(cells, dtype=np.longdouble).astype(float)])
        k = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.size - 2)
        t = np.clip(x - xs[k], 0.0, h[k])
        dx = ds[k] + (ds[k + 1] - ds[k]) * (t / h[k])
        ac = cum[k] + 0.5 * t * (ds[k] + dx)
        ac = np.where(x < xs[0], 0.0, np.where(x >= xs[-1], cum[-1], ac))
        out = out + ac
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class DataPair:
    """A profile u together with its energy measure.

    The absolutely continuous part must have density ``u^2 + u_x^2`` at the
    nodes the two grids share, up to ``compat_tol``.
    """

    u: GridFunction
    mu: EnergyMeasure
    compat_tol: float = 0.0

    def __post_init__(self):
        if self.compat_tol < 0:
            raise InvalidParameterError("compat_tol must be non-negative")
        defect = self.compat_defect()
        if defect > self.compat_tol:
            raise InvalidInputError(
                f"density differs from u^2 + u_x^2 by {defect:.3e} > {self.compat_tol:.3e}"
            )

    def compat_defect(self) -> float:
        _, iu, im = np.intersect1d(self.u.nodes, self.mu.ac_density.nodes, return_indices=True)
        if iu.size == 0:
            return 0.0
        expected = self.u.values[iu] ** 2 + self.u.nodal_dx2()[iu]
        return float(np.max(np.abs(self.mu.ac_density.values[im] - expected)))

    @classmethod
    def from_profile(cls, u: GridFunction, atoms: Sequence[tuple[float, float]] = ()) -> DataPair:
        density = u.values**2 + u.nodal_dx2()
        mu = EnergyMeasure(GridFunction.from_samples(u.nodes, density), np.asarray(atoms, dtype=float))
        return cls(u, mu, 0.0)


def generalized_E(data: DataPair) -> float:
    """Total energy ``mu(R)`` including the singular part."""
    return data.mu.total_mass


def generalized_F(data: DataPair) -> float:
    """``integral of u dmu``: trapezoid against the density plus atom point values."""
    d = data.mu.ac_density
    ud = data.u(d.nodes) * d.values
    ac = float(np.sum(0.5 * d.cell_widths * (ud[:-1] + ud[1:]))) if len(d) > 1 else 0.0
    return ac + float(np.dot(data.u(data.mu.positions), data.mu.masses))
