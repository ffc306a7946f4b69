"""Assemble the matrix programs over (X, U) and the single-trajectory open-loop program.

Decision vector layout (column-major ``vec``)::

    [ vec(X) (n*nN) | vec(U) (m*nN) | vec(U (P kron I_n) - U) (m*nN, minimum attention only) ]
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import l1lp
from .l1lp import InfeasibleError, L1Program, SolverError, Status
from .model import (DimensionError, LtiSystem, Norm, SolutionPair, SynthesisSpec,
                    Variant, reachability_matrix, shift_matrix)


@dataclass(frozen=True)
class OpenLoopSolution:
    u: np.ndarray
    objective: float
    status: Status = Status.OPTIMAL

    def u_t(self, t: int, m: int) -> np.ndarray:
        return self.u[t * m:(t + 1) * m]


@dataclass(frozen=True)
class FeasibilityReport:
    dynamics: float
    initial: float
    output_violation: float

    @property
    def worst(self) -> float:
        return max(self.dynamics, self.initial, self.output_violation)


def _output_bounds(s, count: int):
    """Tile per-channel bounds over ``count`` columns, dropping unbounded channels."""
    s = np.asarray(s, dtype=float)
    tiled = np.tile(s, count)
    keep = np.isfinite(tiled)
    return keep, -tiled[keep], tiled[keep]


def build_program(sys: LtiSystem, spec: SynthesisSpec) -> L1Program:
    """The lifted l1 program for ``synthesize`` (exposed for inspection and dumping)."""
    spec.check_against(sys)
    n, m, N = sys.n, sys.m, spec.N
    nN = n * N
    nx, nu = n * nN, m * nN
    minatt = spec.variant is Variant.MINIMUM_ATTENTION
    nd = nu if minatt else 0
    nvar = nx + nu + nd

    I_nN = sp.identity(nN, format="csr")
    Pi = sp.kron(shift_matrix(N), sp.identity(n), format="csr")

    # A X + B U - X (P kron I) = 0
    dyn = sp.hstack([sp.kron(I_nN, sys.A) - sp.kron(Pi.T, sp.identity(n)),
                     sp.kron(I_nN, sys.B), sp.csr_matrix((nx, nd))])
    # X (e_1 kron I_n) = I_n  ->  first n*n entries of vec(X)
    init = sp.hstack([sp.identity(n * n), sp.csr_matrix((n * n, nvar - n * n))])
    blocks = [dyn, init]
    rhs = [np.zeros(nx), np.eye(n).ravel(order="F")]
    if minatt:
        # d - vec(U (P kron I) - U) = 0
        diff = sp.kron(Pi.T, sp.identity(m)) - sp.identity(nu)
        blocks.append(sp.hstack([sp.csr_matrix((nd, nx)), -diff, sp.identity(nd)]))
        rhs.append(np.zeros(nd))
    Aeq = sp.vstack(blocks, format="csr")
    beq = np.concatenate(rhs)

    Aineq = lo = hi = None
    if spec.bounded and not minatt:
        Y = sp.hstack([sp.kron(I_nN, sys.C), sp.kron(I_nN, sys.D), sp.csr_matrix((sys.p * nN, nd))],
                      format="csr")
        keep, lo, hi = _output_bounds(spec.s, nN)
        Aineq = Y[np.flatnonzero(keep)]

    first = nx + nu if minatt else nx
    penalized = np.arange(first, first + nu)
    # row i of the penalized matrix occupies vec indices i, i+m, i+2m, ...
    groups = np.tile(np.arange(m), nN) if spec.norm is Norm.MAX_ROW else None
    return L1Program(nvar=nvar, penalized=penalized, Aeq=Aeq, beq=beq,
                     Aineq=Aineq, lo=lo, hi=hi, groups=groups)


def unpack(v: np.ndarray, n: int, m: int, N: int):
    nN = n * N
    X = v[:n * nN].reshape((n, nN), order="F")
    U = v[n * nN:n * nN + m * nN].reshape((m, nN), order="F")
    return X, U


def _require_optimal(sol: l1lp.L1Solution, what: str) -> None:
    if sol.status is Status.INFEASIBLE:
        raise InfeasibleError(f"{what} is infeasible (horizon too short or bounds too tight?)")
    if sol.status is not Status.OPTIMAL:
        raise SolverError(f"{what}: solver stopped with status {sol.status.value} after "
                          f"{sol.iterations} iterations (eq residual {sol.eq_residual:.3g}, "
                          f"bound violation {sol.ineq_violation:.3g})")


def synthesize(sys: LtiSystem, spec: SynthesisSpec, tol_feas: float = 1e-8,
               tol_gap: float = 1e-8, max_iter: int = 200, full_output: bool = False):
    """Solve the sparse (or minimum-attention) matrix program for ``(X, U)``.

    Output bounds are ignored for the minimum-attention variant. Raises
    :class:`InfeasibleError` or :class:`SolverError` unless the solve is optimal.
    With ``full_output`` the raw :class:`~sparse_feedback.l1lp.L1Solution` is
    returned as a second element.
    """
    prog = build_program(sys, spec)
    sol = l1lp.solve(prog, tol_feas=tol_feas, tol_gap=tol_gap, max_iter=max_iter)
    _require_optimal(sol, "synthesis program")
    X, U = unpack(sol.v, sys.n, sys.m, spec.N)
    pair = SolutionPair(X=X, U=U, objective=sol.objective)
    return (pair, sol) if full_output else pair


def prediction_matrices(sys: LtiSystem, N: int):
    """Stacked maps with ``x(t) = Sx[t] x0 + Su[t] u`` for t = 0..N."""
    n, m = sys.n, sys.m
    Sx = np.zeros((N + 1, n, n))
    Su = np.zeros((N + 1, n, m * N))
    Sx[0] = np.eye(n)
    for t in range(N):
        Sx[t + 1] = sys.A @ Sx[t]
        Su[t + 1] = sys.A @ Su[t]
        Su[t + 1][:, t * m:(t + 1) * m] += sys.B
    return Sx, Su


def solve_open_loop(sys: LtiSystem, x0, N: int, s=None, tol_feas: float = 1e-8,
                    tol_gap: float = 1e-8, max_iter: int = 200) -> OpenLoopSolution:
    """Minimum-l1 input sequence steering ``x0`` to the origin in ``N`` steps.

    Output bounds, when given, apply at t = 0..N-1; the terminal output is free.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != sys.n:
        raise DimensionError(f"x0 has length {x0.size}, expected {sys.n}")
    m = sys.m
    Phi, _ = reachability_matrix(sys, N)
    AN = np.linalg.matrix_power(sys.A, N)
    Aineq = lo = hi = None
    if s is not None:
        spec = SynthesisSpec(N=N, s=s)
        spec.check_against(sys)
        if spec.s is not None:
            Sx, Su = prediction_matrices(sys, N)
            rows, offs = [], []
            for t in range(N):
                Dt = np.zeros((sys.p, m * N))
                Dt[:, t * m:(t + 1) * m] = sys.D
                rows.append(sys.C @ Su[t] + Dt)
                offs.append(sys.C @ Sx[t] @ x0)
            Y = np.vstack(rows)
            off = np.concatenate(offs)
            keep, lo, hi = _output_bounds(spec.s, N)
            Aineq = Y[keep]
            lo, hi = lo - off[keep], hi - off[keep]
    prog = L1Program(nvar=m * N, penalized=np.arange(m * N), Aeq=Phi, beq=-AN @ x0,
                     Aineq=Aineq, lo=lo, hi=hi)
    sol = l1lp.solve(prog, tol_feas=tol_feas, tol_gap=tol_gap, max_iter=max_iter)
    _require_optimal(sol, "open-loop program")
    return OpenLoopSolution(u=sol.v, objective=sol.objective, status=sol.status)


def objective_value(pair: SolutionPair, spec: SynthesisSpec) -> float:
    """Objective of ``spec`` evaluated at any ``(X, U)``."""
    U = pair.U
    if spec.variant is Variant.MINIMUM_ATTENTION:
        U = U @ np.kron(shift_matrix(pair.N), np.eye(pair.n)) - U
    rows = np.abs(U).sum(axis=1)
    return float(rows.max() if spec.norm is Norm.MAX_ROW else rows.sum())


def project_onto_constraints(pair: SolutionPair, sys: LtiSystem) -> SolutionPair:
    """Smallest Euclidean correction of ``(X, U)`` satisfying the equality constraints.

    Meant for matrices stored with few digits: rounding breaks the
    dynamics identity slightly, and the realization formula amplifies that
    error by the size of ``U``. Output bounds are not enforced.
    """
    n, m, N = pair.n, pair.m, pair.N
    if sys.n != n or sys.m != m:
        raise DimensionError("solution pair does not match the system dimensions")
    prog = build_program(sys, SynthesisSpec(N=N))
    Aeq = prog.Aeq.toarray()
    v = np.concatenate([pair.X.ravel(order="F"), pair.U.ravel(order="F")])
    dv = np.linalg.lstsq(Aeq, Aeq @ v - prog.beq, rcond=None)[0]
    X, U = unpack(v - dv, n, m, N)
    return SolutionPair(X=X, U=U, objective=pair.objective)


def feasibility_report(pair: SolutionPair, sys: LtiSystem, spec: SynthesisSpec | None = None
                       ) -> FeasibilityReport:
    """Infinity-norm residuals of the matrix-program constraints for any ``(X, U)``."""
    n, N = pair.n, pair.N
    if sys.n != n or sys.m != pair.m:
        raise DimensionError("solution pair does not match the system dimensions")
    Pi = np.kron(shift_matrix(N), np.eye(n))
    dyn = np.abs(sys.A @ pair.X + sys.B @ pair.U - pair.X @ Pi).max()
    init = np.abs(pair.X_t(0) - np.eye(n)).max()
    viol = 0.0
    if spec is not None and spec.bounded and spec.variant is Variant.SPARSE:
        Y = sys.C @ pair.X + sys.D @ pair.U
        viol = float(np.max(np.maximum(np.abs(Y) - spec.s[:, None], 0.0)))
    return FeasibilityReport(dynamics=float(dyn), initial=float(init), output_violation=viol)
