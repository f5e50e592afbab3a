"""Semilinear Lagrangian system: right-hand side, RK4 stepping and trajectories.

The system is

    y_t = U,    H_t = U^3 - 2 U P,    U_t = -P_x,

with ``P`` and ``P_x`` the exponential-kernel sums over the cell masses
(see ``_kernels``). The sums are evaluated in O(N) by two sweeps.

Cells that collapse (y_alpha -> 0, as at a collision or just ahead of a
crest) can be pushed through zero by the time stepper. Positions are then
projected back onto a monotone sequence, particles sharing a position get a
common velocity (y_alpha = 0 forces U_alpha = 0) and negative energy
increments are returned to their neighbours (or, failing that, absorbed by
a proportional rescaling of all positive increments).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._kernels import GAUSS_W, GAUSS_X, cell_samples, isotonic, limit_increments, merge_collapsed, rhs_arrays
from .conserved import tilde_E, tilde_F
from .exceptions import CorruptedStateError, InvalidParameterError, SchemeBlowUpError
from .lagrangian import (
    DEFAULT_THICKNESS_TOL,
    LagrangianState,
    singular_mass_estimate,
    spline_energy,
)

__all__ = [
    "RhsEvaluation",
    "convolve_P",
    "convolve_P_direct",
    "rhs",
    "step_rk4",
    "Checkpoint",
    "Trajectory",
    "checkpoint_diagnostics",
    "evolve",
]


@dataclass(frozen=True, eq=False)
class RhsEvaluation:
    dy: np.ndarray
    dH: np.ndarray
    dU: np.ndarray
    P: np.ndarray
    Px: np.ndarray


# largest inversion (in units of dalpha) that is projected away; colliding
# peakons produce up to ~4e-3 at dt = 1e-3
CLAMP_TOL = 1e-2
LIMITER_SWEEPS = 50


def _check_order(y: np.ndarray, dalpha: float) -> None:
    d = np.diff(y)
    if d.size and np.min(d) < -CLAMP_TOL * dalpha:
        i = int(np.argmin(d))
        raise CorruptedStateError(f"cell {i} inverted by {-d[i]:.3e} (> {CLAMP_TOL:g} * dalpha); reduce dt")


def convolve_P(state: LagrangianState) -> tuple[np.ndarray, np.ndarray]:
    """Nonlocal pressure ``P`` and its gradient ``P_x`` at every particle."""
    _check_order(state.y, state.dalpha)
    P, Px, _ = rhs_arrays(state.y, state.U, np.diff(state.H), GAUSS_X, GAUSS_W)
    return P, Px


def convolve_P_direct(state: LagrangianState) -> tuple[np.ndarray, np.ndarray]:
    """O(N^2) reference: the same cell samples summed directly against the kernel."""
    _check_order(state.y, state.dalpha)
    X, W = cell_samples(state.y, state.U, np.diff(state.H), GAUSS_X, GAUSS_W)
    # the sign follows the labels: cell i lies left of node k iff i < k,
    # which matters when a collapsed cell sits on the node itself
    cell = np.repeat(np.arange(X.shape[0]), X.shape[1])
    X, W = X.ravel(), W.ravel()
    z = state.y[:, None] - X[None, :]
    k = np.exp(-np.abs(z)) * W[None, :]
    sgn = np.where(cell[None, :] < np.arange(state.n)[:, None], 1.0, -1.0)
    P = 0.25 * k.sum(axis=1)
    Px = -0.25 * (sgn * k).sum(axis=1)
    return P, Px


def rhs(state: LagrangianState) -> RhsEvaluation:
    _check_order(state.y, state.dalpha)
    P, Px, dH = rhs_arrays(state.y, state.U, np.diff(state.H), GAUSS_X, GAUSS_W)
    return RhsEvaluation(state.U.copy(), dH, -Px, P, Px)


def _snap(y: np.ndarray, dalpha: float) -> np.ndarray:
    d = np.diff(y)
    if np.all(d >= 0):
        return y
    _check_order(y, dalpha)
    return isotonic(y)


def _settle(y, U, m, dalpha):
    """End-of-step projection for collapsed cells (see module docstring)."""
    y = _snap(y, dalpha)
    if np.any(np.diff(y) == 0):
        U = merge_collapsed(y, U)
    if np.any(m < 0):
        m = m.copy()
        limit_increments(m, LIMITER_SWEEPS)
        if np.any(m < 0):
            # deficits stranded between empty cells: rescale all positive
            # increments instead (relative change is at rounding/noise level)
            pos = np.maximum(m, 0.0)
            total, kept = math.fsum(m), math.fsum(pos)
            m = pos * (total / kept) if kept > 0 else np.zeros_like(m)
    return y, U, m


def _f(y, U, m):
    _, Px, flux = rhs_arrays(y, U, m, GAUSS_X, GAUSS_W)
    return U, np.diff(flux), -Px


def _rk4_arrays(y, U, m, dt, dalpha):
    """One step on (y, U, m) with m the cell increments of H.

    Working with increments rather than H keeps every operation exactly
    equivariant under the reflection (y, U, m) -> (-y, -U, m) reversed.
    """
    k1 = _f(y, U, m)
    k2 = _f(_snap(y + 0.5 * dt * k1[0], dalpha), U + 0.5 * dt * k1[2], m + 0.5 * dt * k1[1])
    k3 = _f(_snap(y + 0.5 * dt * k2[0], dalpha), U + 0.5 * dt * k2[2], m + 0.5 * dt * k2[1])
    k4 = _f(_snap(y + dt * k3[0], dalpha), U + dt * k3[2], m + dt * k3[1])
    s = dt / 6.0
    y_new = y + s * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    U_new = U + s * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    m_new = m + s * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(U_new)) and np.all(np.isfinite(m_new))):
        raise SchemeBlowUpError("non-finite values after RK4 step")
    return _settle(y_new, U_new, m_new, dalpha)


def _cum(H0: float, m: np.ndarray) -> np.ndarray:
    return np.concatenate([[H0], H0 + np.cumsum(m)])


def step_rk4(state: LagrangianState, dt: float) -> LagrangianState:
    """One classical RK4 step; a negative ``dt`` steps backward in time."""
    if not np.isfinite(dt) or dt == 0:
        raise InvalidParameterError("dt must be finite and non-zero")
    _check_order(state.y, state.dalpha)
    y, U, m = _rk4_arrays(state.y, state.U, np.diff(state.H), dt, state.dalpha)
    return state.with_arrays(y, U, _cum(state.H[0], m), state.t + dt)


def checkpoint_diagnostics(
    state: LagrangianState, thickness_tol: float = DEFAULT_THICKNESS_TOL, crest_sign: float = 1.0
) -> dict:
    """Conserved quantities, energy split and the crest (leftmost max of ``crest_sign * U``)."""
    # the spline has u'' = u on each cell, so a positive maximum sits on a particle
    i = int(np.argmax(crest_sign * state.U))
    return {
        "t": state.t,
        "E_tilde": tilde_E(state),
        "F_tilde": tilde_F(state),
        "E_ac": spline_energy(state, thickness_tol),
        "mu_s": singular_mass_estimate(state, thickness_tol),
        "xi": float(state.y[i]),
        "M": float(state.U[i]),
    }


@dataclass
class Checkpoint:
    state: LagrangianState | None
    diagnostics: dict

    @property
    def t(self) -> float:
        return self.diagnostics["t"]


@dataclass
class Trajectory:
    dt: float
    thickness_tol: float = DEFAULT_THICKNESS_TOL
    checkpoints: list[Checkpoint] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.checkpoints)

    @property
    def times(self) -> np.ndarray:
        return np.array([cp.t for cp in self.checkpoints])

    @property
    def states(self) -> list[LagrangianState]:
        return [cp.state for cp in self.checkpoints if cp.state is not None]

    @property
    def final(self) -> LagrangianState:
        return self.checkpoints[-1].state

    def series(self, key: str) -> np.ndarray:
        return np.array([cp.diagnostics[key] for cp in self.checkpoints])


def evolve(
    state: LagrangianState,
    t_end: float,
    dt: float,
    checkpoint_every: int = 1,
    thickness_tol: float = DEFAULT_THICKNESS_TOL,
    keep_states: bool = True,
    on_checkpoint: Callable[[Checkpoint, LagrangianState], None] | None = None,
    crest_sign: float = 1.0,
) -> Trajectory:
    """Integrate to ``t_end`` with fixed steps of size ``dt`` (backward if ``t_end < t``).

    Diagnostics are recorded at the start, every ``checkpoint_every`` steps
    and at the end. With ``keep_states=False`` only the first and last states
    are retained; ``on_checkpoint(checkpoint, state)`` sees every state as it
    is produced. ``crest_sign = -1`` tracks the trough instead of the crest.
    """
    if not dt > 0:
        raise InvalidParameterError("dt must be positive")
    if checkpoint_every < 1:
        raise InvalidParameterError("checkpoint_every must be a positive integer")
    span = t_end - state.t
    n_steps = int(round(abs(span) / dt))
    if abs(n_steps * dt - abs(span)) > 1e-9 * max(1.0, abs(span)):
        raise InvalidParameterError("dt must divide t_end - t")
    h = math.copysign(dt, span) if n_steps else dt
    traj = Trajectory(dt=dt, thickness_tol=thickness_tol)

    def record(s: LagrangianState, keep: bool) -> None:
        cp = Checkpoint(s if keep else None, checkpoint_diagnostics(s, thickness_tol, crest_sign))
        traj.checkpoints.append(cp)
        if on_checkpoint is not None:
            on_checkpoint(cp, s)

    record(state, True)
    y, U, m = state.y, state.U, np.diff(state.H)
    t0, da, H0 = state.t, state.dalpha, float(state.H[0])
    for k in range(1, n_steps + 1):
        y, U, m = _rk4_arrays(y, U, m, h, da)
        if k % checkpoint_every == 0 or k == n_steps:
            record(state.with_arrays(y, U, _cum(H0, m), t0 + k * h), keep_states or k == n_steps)
    return traj
