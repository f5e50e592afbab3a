"""Generalized conserved quantities, drift tracking and weak-form residuals."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from ._kernels import node_exp_sums
from .exceptions import InvalidInputError, InvalidTestFunctionError
from .lagrangian import DEFAULT_THICKNESS_TOL, LagrangianState, reconstruct
from .measures import DataPair

if TYPE_CHECKING:
    from .evolution import Trajectory

__all__ = [
    "tilde_E",
    "tilde_F",
    "ConservationReport",
    "drift_report",
    "BumpTestFunction",
    "eulerian_P",
    "weak_residual",
]


def tilde_E(state: LagrangianState) -> float:
    """Total energy: the pushed-forward mass ``H_N - H_1``."""
    return float(state.H[-1] - state.H[0])


def tilde_F(state: LagrangianState) -> float:
    """``integral of u dmu`` in Lagrangian form, ``sum Ubar_i dH_i``."""
    ubar = 0.5 * (state.U[1:] + state.U[:-1])
    return float(np.dot(ubar, np.diff(state.H)))


@dataclass(frozen=True)
class ConservationReport:
    times: np.ndarray
    E_tilde: np.ndarray
    F_tilde: np.ndarray
    E_ac: np.ndarray
    mu_s: np.ndarray
    rel_drift_E: float
    rel_drift_F: float

    def to_csv(self, path) -> None:
        from .io import write_table

        write_table(
            path,
            ["t", "E_tilde", "F_tilde", "E_ac", "mu_s"],
            [self.times, self.E_tilde, self.F_tilde, self.E_ac, self.mu_s],
        )

    def summary(self) -> dict:
        return {"rel_drift_E": self.rel_drift_E, "rel_drift_F": self.rel_drift_F}

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2))


def drift_report(traj: Trajectory) -> ConservationReport:
    if len(traj) == 0:
        raise InvalidInputError("empty trajectory")
    col = lambda k: np.array([cp.diagnostics[k] for cp in traj.checkpoints])  # noqa: E731
    E, F = col("E_tilde"), col("F_tilde")
    e0 = E[0]
    rel_E = float(np.max(np.abs(E - e0)) / e0) if e0 > 0 else float(np.max(np.abs(E - e0)))
    denom = max(abs(F[0]), e0)
    rel_F = float(np.max(np.abs(F - F[0])) / denom) if denom > 0 else float(np.max(np.abs(F - F[0])))
    return ConservationReport(col("t"), E, F, col("E_ac"), col("mu_s"), rel_E, rel_F)


def _bump(s):
    """Standard C-infinity bump ``exp(-1/(1-s^2))`` and its derivative."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    q = np.where(inside, 1.0 - s * s, 1.0)
    b = np.where(inside, np.exp(-1.0 / q), 0.0)
    db = np.where(inside, b * (-2.0 * s / (q * q)), 0.0)
    return b, db


@dataclass(frozen=True)
class BumpTestFunction:
    """Tensor-product bump ``b((x - x0)/wx) b((t - t0)/wt)``."""

    x0: float
    wx: float
    t0: float
    wt: float

    def __call__(self, x, t):
        bx, dbx = _bump((np.asarray(x) - self.x0) / self.wx)
        bt, dbt = _bump((t - self.t0) / self.wt)
        return bx * bt, bx * dbt / self.wt, dbx * bt / self.wx

    @property
    def x_support(self) -> tuple[float, float]:
        return self.x0 - self.wx, self.x0 + self.wx

    @property
    def t_support(self) -> tuple[float, float]:
        return self.t0 - self.wt, self.t0 + self.wt


def _exp_sums(x, f):
    """Trapezoid approximations of ``int e^{-|x_k - s|} f(s) ds`` split at x_k.

    Returns (left, right, g) with the node's own weighted sample g_k in ``right``.
    """
    h = np.diff(x)
    omega = np.zeros_like(x)
    omega[:-1] += 0.5 * h
    omega[1:] += 0.5 * h
    g = omega * f
    left, right = node_exp_sums(x, g)
    return left, right, g


def eulerian_P(data: DataPair, x=None):
    """``P = (phi * mu)/4 + (phi * u^2)/4`` and ``P_x`` at the nodes x.

    Purely Eulerian: trapezoid weights on the density grid plus exact atom
    contributions. ``x`` defaults to the density grid.
    """
    d = data.mu.ac_density
    xs = d.nodes
    f = d.values + data.u(xs) ** 2
    left, right, g = _exp_sums(xs, f)
    P = 0.25 * (left + right)
    Px = 0.25 * ((right - g) - left)
    if x is not None:
        x = np.asarray(x, dtype=float)
        P = np.interp(x, xs, P)
        Px = np.interp(x, xs, Px)
    else:
        x = xs
    if data.mu.atoms.size:
        z = x[:, None] - data.mu.positions[None, :]
        k = np.exp(-np.abs(z)) * data.mu.masses
        P = P + 0.25 * k.sum(axis=1)
        Px = Px - 0.25 * (np.sign(z) * k).sum(axis=1)
    return P, Px


IDENTITIES = ("momentum", "energy", "F_flux")


def _slice_terms(state: LagrangianState, phi: BumpTestFunction, identity: str, thickness_tol: float) -> float:
    """Spatial integral of the weak-form integrand at one time."""
    data = reconstruct(state, None, thickness_tol)
    u = data.u
    x = u.nodes
    P, Px = eulerian_P(data, x)
    f, ft, fx = phi(x, state.t)

    def cellwise(vals_start, vals_end):
        return float(np.sum(0.5 * u.cell_widths * (vals_start + vals_end)))

    v = u.values
    if identity == "momentum":
        def g(d):
            return v * ft - f * (v * d + Px)
        return cellwise(g(u.right_derivative)[:-1], g(u.left_derivative)[1:])

    # dmu terms by the Lagrangian change of variables (cell midpoints)
    ym = 0.5 * (state.y[1:] + state.y[:-1])
    um = 0.5 * (state.U[1:] + state.U[:-1])
    dH = np.diff(state.H)
    fm, ftm, fxm = phi(ym, state.t)
    if identity == "energy":
        lhs = float(np.dot(ftm + um * fxm, dH))
        flux = fx * v * (v * v - 2.0 * P)
        return lhs - cellwise(flux[:-1], flux[1:])
    # F_flux: Lagrangian dmu term plus the Eulerian flux
    lhs = float(np.dot((ftm + um * fxm) * um, dH))
    flux = fx * (P * v * v - 0.75 * v**4 + P * P - Px * Px)
    return lhs + cellwise(flux[:-1], flux[1:])


def weak_residual(
    traj: Trajectory,
    phi: BumpTestFunction,
    identity: str,
    thickness_tol: float = DEFAULT_THICKNESS_TOL,
) -> float:
    """Absolute discretized residual of one of the weak identities.

    ``momentum``: the weak form of ``u_t + u u_x + P_x = 0``;
    ``energy``: the distributional energy balance for mu;
    ``F_flux``: the weak flux identity for ``u dmu``.
    Time integration is the trapezoid rule over the checkpoints.
    """
    if identity not in IDENTITIES:
        raise InvalidInputError(f"identity must be one of {IDENTITIES}")
    states = [cp.state for cp in traj.checkpoints]
    if len(states) < 2:
        raise InvalidTestFunctionError("need at least two checkpoints for a space-time integral")
    times = np.array([s.t for s in states])
    t_lo, t_hi = min(times[0], times[-1]), max(times[0], times[-1])
    x_lo = min(float(s.y[0]) for s in states)
    x_hi = max(float(s.y[-1]) for s in states)
    (a, b), (c, d) = phi.x_support, phi.t_support
    if a < x_lo or b > x_hi or c < t_lo or d > t_hi:
        raise InvalidTestFunctionError("test function support escapes the trajectory box")
    vals = np.array([_slice_terms(s, phi, identity, thickness_tol) for s in states])
    return abs(float(np.trapezoid(vals, times)))
