"""Closed-loop simulation, constraint audits and the open/closed-loop comparison."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .l1lp import InfeasibleError, SolverError
from .model import (Compensator, DimensionError, LtiSystem, Norm, SolutionPair, SynthesisSpec,
                    TrackingCompensator, Variant, basis_vector)
from .realization import selector_matrices
from .synthesis import solve_open_loop
from .tracking import ReferenceSignal


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Trajectory:
    """Rows are time steps t = 0..T."""

    t: np.ndarray
    x: np.ndarray
    z: np.ndarray
    u: np.ndarray
    y: np.ndarray
    r: np.ndarray | None = None

    @property
    def error(self) -> np.ndarray:
        if self.r is None:
            raise ValueError("trajectory has no reference")
        return self.y - self.r

    def header(self) -> list[str]:
        cols = ["t"]
        for name, arr in (("x", self.x), ("z", self.z), ("u", self.u), ("y", self.y)):
            cols += [f"{name}{i + 1}" for i in range(arr.shape[1])]
        if self.r is not None:
            cols += [f"r{i + 1}" for i in range(self.r.shape[1])]
        return cols

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            for k in range(self.t.size):
                row = [str(int(self.t[k]))]
                parts = [self.x[k], self.z[k], self.u[k], self.y[k]]
                if self.r is not None:
                    parts.append(self.r[k])
                row += [f"{v:.17g}" for part in parts for v in part]
                w.writerow(row)


def default_steps(N: int) -> int:
    return math.ceil(5 * N / 4)


def _run(sys: LtiSystem, comp: Compensator, x0, T: int, r=None, M=None, L=None) -> Trajectory:
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != sys.n:
        raise DimensionError(f"x0 has length {x0.size}, expected {sys.n}")
    if T < 1:
        raise ValueError("simulation needs at least one step")
    n, m, p, nz = sys.n, sys.m, sys.p, comp.nz
    xs = np.zeros((T + 1, n))
    zs = np.zeros((T + 1, nz))
    us = np.zeros((T + 1, m))
    ys = np.zeros((T + 1, p))
    x, z = x0, comp.z0
    with np.errstate(over="ignore", invalid="ignore"):  # divergence is reported below
        for t in range(T + 1):
            u = comp.H @ z + comp.K @ x
            if r is not None:
                u = u + M @ r
            xs[t], zs[t], us[t], ys[t] = x, z, u, sys.C @ x + sys.D @ u
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
                raise DivergenceError(f"non-finite state at step {t}")
            znext = comp.F @ z + comp.G @ x
            if r is not None:
                znext = znext + L @ r
            x, z = sys.A @ x + sys.B @ u, znext
    rs = None if r is None else np.tile(r, (T + 1, 1))
    return Trajectory(t=np.arange(T + 1), x=xs, z=zs, u=us, y=ys, r=rs)


def run_closed_loop(sys: LtiSystem, comp: Compensator, x0, T: int) -> Trajectory:
    """Iterate the plant with ``u = H z + K x`` from ``z(0) = 0``."""
    return _run(sys, comp, x0, T)


def run_tracking(sys: LtiSystem, tcomp: TrackingCompensator, x0, ref: ReferenceSignal,
                 T: int) -> Trajectory:
    """Iterate the tracking loop with ``r(t) = r_plus`` for all recorded t >= 0."""
    if tcomp.M.shape[0] != ref.r_plus.size:
        raise DimensionError("reference size does not match the input count")
    return _run(sys, tcomp.base, x0, T, r=ref.r_plus, M=tcomp.M, L=tcomp.L)


@dataclass(frozen=True)
class IdentityReport:
    x: float
    z: float
    u: float

    @property
    def worst(self) -> float:
        return max(self.x, self.z, self.u)


def trajectory_identities(sys: LtiSystem, pair: SolutionPair, comp: Compensator,
                          x0s=None) -> IdentityReport:
    """Largest deviation of simulated ``x(t), z(t), u(t)`` from ``X_t x0, Z_t x0, U_t x0``, t < N."""
    n, N = pair.n, pair.N
    Z, _ = selector_matrices(n, N)
    if x0s is None:
        x0s = np.eye(n)
    ex = ez = eu = 0.0
    for x0 in np.atleast_2d(x0s):
        traj = run_closed_loop(sys, comp, x0, N)
        for t in range(N):
            ex = max(ex, np.abs(traj.x[t] - pair.X_t(t) @ x0).max())
            eu = max(eu, np.abs(traj.u[t] - pair.U_t(t) @ x0).max())
            if Z.shape[0]:
                ez = max(ez, np.abs(traj.z[t] - Z[:, t * n:(t + 1) * n] @ x0).max())
    return IdentityReport(x=float(ex), z=float(ez), u=float(eu))


@dataclass
class BasisCheck:
    index: int
    input_residual: float
    closed_cost: float
    open_cost: float | None
    value_match: bool | None
    vector_match: bool | None


@dataclass
class EquivalenceReport:
    checks: list = field(default_factory=list)
    input_tol: float = 1e-8
    value_rtol: float = 1e-6

    @property
    def passed(self) -> bool:
        return all(c.input_residual <= self.input_tol and c.value_match is not False
                   for c in self.checks)


def check_equivalence(sys: LtiSystem, spec: SynthesisSpec, pair: SolutionPair, comp: Compensator,
                      input_tol: float = 1e-8, value_rtol: float = 1e-6,
                      compare_values: bool | None = None) -> EquivalenceReport:
    """Compare closed-loop inputs from each basis initial state with the open-loop optimum.

    Inputs must reproduce the columns of ``U`` exactly. The l1 costs are
    compared with the open-loop program's optimal value; this is only
    meaningful for the sparse variant with the entrywise norm, which is the
    default for ``compare_values``. Vector equality is reported but never
    required, since the open-loop minimizer need not be unique.
    """
    if compare_values is None:
        compare_values = spec.variant is Variant.SPARSE and spec.norm is Norm.SUM
    n, N, m = pair.n, pair.N, pair.m
    report = EquivalenceReport(input_tol=input_tol, value_rtol=value_rtol)
    for i in range(n):
        e = basis_vector(i, n)
        traj = run_closed_loop(sys, comp, e, N)
        u_cl = traj.u[:N]
        u_cols = np.array([pair.U_t(t) @ e for t in range(N)])
        res = float(np.abs(u_cl - u_cols).max())
        closed_cost = float(np.abs(u_cl).sum())
        open_cost = value_match = vector_match = None
        if compare_values:
            s = spec.s if spec.bounded else None
            try:
                ol = solve_open_loop(sys, e, N, s)
            except (InfeasibleError, SolverError):
                value_match = False
            else:
                open_cost = ol.objective
                value_match = abs(closed_cost - open_cost) <= value_rtol * max(1.0, abs(open_cost))
                vector_match = bool(np.allclose(ol.u.reshape(N, m), u_cl, atol=1e-6))
        report.checks.append(BasisCheck(i, res, closed_cost, open_cost, value_match, vector_match))
    return report


def audit_constraints(traj: Trajectory, s, steps: int | None = None) -> np.ndarray:
    """Per-channel worst bound overshoot ``max_t max(0, |y(t)| - s)``.

    ``steps`` restricts the audit to the first ``steps`` rows.
    """
    y = traj.y if steps is None else traj.y[:steps]
    if s is None:
        return np.zeros(y.shape[1])
    s = np.asarray([np.inf if v is None else v for v in np.atleast_1d(s)], dtype=float)
    if s.size != y.shape[1]:
        raise DimensionError(f"bounds have length {s.size}, trajectory has {y.shape[1]} outputs")
    over = np.abs(y) - s
    return np.maximum(over, 0.0).max(axis=0)
