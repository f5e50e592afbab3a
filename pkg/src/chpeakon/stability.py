"""Peakon-stability diagnostics.

For data (u, mu) near a peakon ``c phi`` the monitored quantity is

    total = mu_s(R) + ||u - c phi(. - xi)||_{H^1}^2,

with xi a crest of u. The checks here cover the identity and inequalities
that bound ``total`` in terms of the initial defect.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .exceptions import InvalidInputError, InvalidParameterError
from .lagrangian import particle_grid, reconstruct
from .measures import (
    DataPair,
    GridFunction,
    PeakonSum,
    generalized_E,
    generalized_F,
    h1_distance_sq,
    h1_norm,
    singular_mass,
)

__all__ = [
    "StabilityRecord",
    "MonitorResult",
    "crest",
    "peakon_distance",
    "lemma_i_identity",
    "lemma_ii_check",
    "lemma_iii_iv_check",
    "cubic_Q",
    "algebraic_check",
    "lemma_bound",
    "theorem_monitor",
    "initial_defect",
    "monitor_record",
    "monitor_result",
    "morrey_gap",
    "HYPOTHESIS_NOT_MET",
]

HYPOTHESIS_NOT_MET = "hypothesis-not-met"
# absolute slack for inequalities evaluated by quadrature
QUAD_TOL = 1e-6


@dataclass(frozen=True)
class StabilityRecord:
    t: float
    xi: float
    M: float
    dist2: float
    mu_s: float
    total: float
    lemma_bound: float
    eps2: float

    def __post_init__(self):
        if self.total < -QUAD_TOL:
            raise InvalidInputError("total must be non-negative")


def crest(u: GridFunction, sign: float = 1.0) -> tuple[float, float]:
    """Leftmost node where ``sign * u`` is largest, and the value of u there.

    ``sign = -1`` locates the trough of an antipeakon.
    """
    if len(u) == 0:
        raise InvalidInputError("empty grid")
    i = int(np.argmax(sign * u.values))
    return float(u.nodes[i]), float(u.values[i])


def peakon_distance(data: DataPair, c: float) -> dict:
    """``xi, M, dist2, mu_s, total`` for the peakon ``c phi`` placed at the crest."""
    if c == 0:
        raise InvalidParameterError("c must be non-zero")
    xi, M = crest(data.u, math.copysign(1.0, c))
    dist2 = h1_distance_sq(data.u, PeakonSum([c], [xi]))
    mu_s = singular_mass(data.mu)
    return {"xi": xi, "M": M, "dist2": dist2, "mu_s": mu_s, "total": mu_s + dist2}


def lemma_i_identity(data: DataPair, c: float, xi: float) -> tuple[float, float]:
    """Both sides of ``E~ - E(c phi) = mu_s + ||u - c phi(. - xi)||^2 + 4c(u(xi) - c)``.

    The left side comes from the measure, the right side from the profile, by
    separate quadratures; xi need not be a crest.
    """
    lhs = generalized_E(data) - 2.0 * c * c
    u = data.u.with_nodes([xi])
    rhs = singular_mass(data.mu) + h1_distance_sq(u, PeakonSum([c], [xi])) + 4.0 * c * (float(u(xi)) - c)
    return lhs, rhs


def lemma_ii_check(data: DataPair) -> tuple[float, float]:
    """``F~`` and the bound ``M E~ - (2/3) M^3`` with ``M = max u``."""
    M = float(np.max(data.u.values))
    E = generalized_E(data)
    return generalized_F(data), M * E - 2.0 / 3.0 * M**3


def lemma_iii_iv_check(data: DataPair, c: float, delta: float) -> dict:
    """Energy, cubic-invariant and height bounds near ``c phi``.

    The hypothesis ``delta < min(c/30, sqrt 2)`` and
    ``mu_s + ||u - c phi||^2 < delta^2 / 2`` (peakon at the origin) is checked
    first; when it fails only the status is reported.
    """
    if not c > 0 or not delta > 0:
        raise InvalidParameterError("c and delta must be positive")
    defect = singular_mass(data.mu) + h1_distance_sq(data.u, PeakonSum([c], [0.0]))
    out = {"defect": defect, "delta": delta}
    if not (delta < min(c / 30.0, math.sqrt(2.0)) and defect < 0.5 * delta * delta):
        out["status"] = HYPOTHESIS_NOT_MET
        return out
    M = float(np.max(data.u.values))
    pairs = {
        "energy": (abs(generalized_E(data) - 2.0 * c * c), 4.0 * c * delta),
        "cubic": (abs(generalized_F(data) - 4.0 / 3.0 * c**3), 8.0 * c * c * delta),
        "height": (abs(M - c), math.sqrt(6.0 * c * delta)),
    }
    out.update(pairs)
    out["status"] = "pass" if all(a <= b + QUAD_TOL for a, b in pairs.values()) else "fail"
    return out


@dataclass(frozen=True)
class CubicQ:
    Q: float
    Q0: float
    Q0_expanded: float


def cubic_Q(y: float, E_t: float, F_t: float, c: float) -> CubicQ:
    """``Q(y) = y^3 - 3/2 y E~ + 3/2 F~`` and ``Q0(y) = (y - c)^2 (y + 2c)``."""
    Q = y**3 - 1.5 * y * E_t + 1.5 * F_t
    return CubicQ(Q, (y - c) ** 2 * (y + 2.0 * c), y**3 - 3.0 * c * c * y + 2.0 * c**3)


def lemma_bound(c: float, delta: float) -> float:
    return 4.0 * c * delta + 4.0 * c * math.sqrt(6.0 * c * delta)


def algebraic_check(c: float, eps: float) -> tuple[float, float]:
    """Left side ``4c delta + 4c sqrt(6c delta)`` with ``delta = c eps^4 / (6^4 (1+c)^4)``, and ``eps^2``."""
    delta = c * eps**4 / (6.0**4 * (1.0 + c) ** 4)
    return lemma_bound(c, delta), eps * eps


@dataclass
class MonitorResult:
    records: list[StabilityRecord]
    c: float
    eps: float
    delta0: float
    hypothesis_met: bool
    bound_holds: bool
    bound_below_eps2: bool
    algebraic_ok: bool
    theorem_hypothesis_met: bool

    @property
    def max_total(self) -> float:
        return max(r.total for r in self.records)

    def summary(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "c", "eps", "delta0", "hypothesis_met", "bound_holds", "bound_below_eps2",
            "algebraic_ok", "theorem_hypothesis_met",
        )}
        d["max_total"] = self.max_total
        d["lemma_bound"] = self.records[0].lemma_bound
        d["status"] = ("pass" if self.bound_holds else "fail") if self.hypothesis_met else HYPOTHESIS_NOT_MET
        return d

    def to_csv(self, path) -> None:
        from .io import write_table

        names = [f.name for f in fields(StabilityRecord)]
        write_table(path, names, [[getattr(r, k) for r in self.records] for k in names])


def initial_defect(data: DataPair, c: float) -> tuple[float, float]:
    """``mu_s + ||u - c phi||^2`` (peakon at the origin) and ``delta0 = sqrt(2 * defect)``."""
    defect = singular_mass(data.mu) + h1_distance_sq(data.u, PeakonSum([c], [0.0]))
    return defect, math.sqrt(2.0 * max(defect, 0.0))


def monitor_record(state, c: float, bound: float, eps: float, thickness_tol: float, refine: int = 4) -> StabilityRecord:
    """One checkpoint of the monitor, from a Lagrangian state."""
    pd = peakon_distance(_data(state, thickness_tol, refine), c)
    return StabilityRecord(state.t, pd["xi"], pd["M"], pd["dist2"], pd["mu_s"], pd["total"], bound, eps * eps)


def monitor_result(records: list[StabilityRecord], c: float, eps: float, defect0: float) -> MonitorResult:
    a = abs(c)
    delta0 = math.sqrt(2.0 * max(defect0, 0.0))
    bound = lemma_bound(a, delta0)
    lhs, rhs = algebraic_check(a, eps)
    return MonitorResult(
        records,
        c,
        eps,
        delta0,
        delta0 < min(a / 30.0, math.sqrt(2.0)),
        all(r.total <= bound + QUAD_TOL for r in records),
        bound <= eps * eps,
        lhs <= rhs,
        defect0 <= 0.5 * a * a * (eps / (6.0 * (1.0 + a))) ** 8,
    )


def theorem_monitor(traj, c: float, eps: float, refine: int = 4, data0: DataPair | None = None) -> MonitorResult:
    """Monitor ``total(t)`` against ``4c delta0 + 4c sqrt(6c delta0)`` and ``eps^2``.

    ``delta0 = sqrt(2 * (mu_s(0) + ||u(0) - c phi||^2))`` is the smallest delta
    for which the initial data meet the hypothesis. ``data0`` overrides the
    reconstructed initial state (the original data are more accurate). For
    ``c < 0`` the same quantities are measured against the antipeakon.
    """
    if c == 0:
        raise InvalidParameterError("c must be non-zero")
    if not 0 < eps < 1:
        raise InvalidParameterError("eps must lie in (0, 1)")
    if len(traj) == 0:
        raise InvalidInputError("empty trajectory")
    cps = [cp for cp in traj.checkpoints if cp.state is not None]
    first = data0 if data0 is not None else _data(cps[0].state, traj.thickness_tol, refine)
    defect0, delta0 = initial_defect(first, c)
    bound = lemma_bound(abs(c), delta0)
    records = [monitor_record(cp.state, c, bound, eps, traj.thickness_tol, refine) for cp in cps]
    return monitor_result(records, c, eps, defect0)


def _data(state, thickness_tol, refine):
    return reconstruct(state, particle_grid(state, refine), thickness_tol)


def morrey_gap(u: GridFunction) -> float:
    """``max|u| - h1_norm(u)/sqrt(2)``; non-positive up to quadrature error."""
    return float(np.max(np.abs(u.values))) - h1_norm(u) / math.sqrt(2.0)
