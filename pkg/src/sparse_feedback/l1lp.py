"""l1-norm linear programs solved with a primal-dual interior-point method.

Programs have the form::

    minimize    max_g  sum_{k in g} |v[pen[k]]|
    subject to  Aeq @ v == beq
                lo <= Aineq @ v <= hi

With a single group (the default) the objective is the plain l1 norm of the
penalized coordinates. Internally the program is lifted to an LP in equality
form with free and nonnegative variables and solved with Mehrotra's
predictor-corrector scheme on the sparse augmented KKT system.
"""

from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional, TextIO

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

logger = logging.getLogger(__name__)


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ITER_LIMIT = "iter_limit"


class InfeasibleError(RuntimeError):
    """Raised by callers that require an optimal solve but got an infeasibility certificate."""


class SolverError(RuntimeError):
    """Raised when the solver stops without meeting its tolerances."""


def _csr(M, rows: int, cols: int) -> sp.csr_matrix:
    if M is None:
        return sp.csr_matrix((rows, cols))
    M = sp.csr_matrix(M, dtype=float)
    if M.shape[1] != cols:
        raise ValueError(f"constraint matrix has {M.shape[1]} columns, expected {cols}")
    return M


@dataclass(frozen=True)
class L1Program:
    nvar: int
    penalized: np.ndarray
    Aeq: Optional[sp.spmatrix] = None
    beq: Optional[np.ndarray] = None
    Aineq: Optional[sp.spmatrix] = None
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    groups: Optional[np.ndarray] = None

    def __post_init__(self):
        nvar = int(self.nvar)
        pen = np.asarray(self.penalized, dtype=int).ravel()
        if pen.size and (pen.min() < 0 or pen.max() >= nvar):
            raise ValueError("penalized index out of range")
        if np.unique(pen).size != pen.size:
            raise ValueError("each penalized coordinate must be selected exactly once")
        Aeq = _csr(self.Aeq, 0, nvar)
        beq = np.zeros(0) if self.beq is None else np.asarray(self.beq, dtype=float).ravel()
        if beq.size != Aeq.shape[0]:
            raise ValueError(f"beq has length {beq.size}, Aeq has {Aeq.shape[0]} rows")
        Aineq = _csr(self.Aineq, 0, nvar)
        k = Aineq.shape[0]
        lo = np.full(k, -np.inf) if self.lo is None else np.asarray(self.lo, dtype=float).ravel()
        hi = np.full(k, np.inf) if self.hi is None else np.asarray(self.hi, dtype=float).ravel()
        if lo.size != k or hi.size != k:
            raise ValueError("lo/hi must match the number of inequality rows")
        if np.any(lo > hi):
            raise ValueError("lo must not exceed hi")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or not np.all(np.isfinite(beq)):
            raise ValueError("bounds and right-hand sides must not be NaN")
        groups = np.zeros(pen.size, dtype=int) if self.groups is None else np.asarray(self.groups).ravel()
        if groups.size != pen.size:
            raise ValueError("groups must label every penalized coordinate")
        _, groups = np.unique(groups, return_inverse=True)
        for name, val in (("nvar", nvar), ("penalized", pen), ("Aeq", Aeq), ("beq", beq),
                          ("Aineq", Aineq), ("lo", lo), ("hi", hi), ("groups", groups)):
            object.__setattr__(self, name, val)

    @property
    def W(self) -> sp.csr_matrix:
        """0/1 selector mapping variables to penalized coordinates."""
        k = self.penalized.size
        return sp.csr_matrix((np.ones(k), (np.arange(k), self.penalized)), shape=(k, self.nvar))

    @property
    def n_groups(self) -> int:
        return int(self.groups.max()) + 1 if self.groups.size else 0

    def objective(self, v) -> float:
        a = np.abs(np.asarray(v)[self.penalized])
        if a.size == 0:
            return 0.0
        return float(np.bincount(self.groups, weights=a).max())

    def eq_residual(self, v) -> float:
        if self.Aeq.shape[0] == 0:
            return 0.0
        return float(np.max(np.abs(self.Aeq @ v - self.beq)))

    def ineq_violation(self, v) -> float:
        if self.Aineq.shape[0] == 0:
            return 0.0
        w = self.Aineq @ v
        return float(max(0.0, np.max(self.lo - w), np.max(w - self.hi)))


@dataclass
class L1Solution:
    v: np.ndarray
    objective: float
    eq_residual: float
    ineq_violation: float
    status: Status
    dual_objective: float = float("nan")
    iterations: int = 0
    history: list = field(default_factory=list, repr=False)
    certificate: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def gap(self) -> float:
        return self.objective - self.dual_objective


@dataclass
class _StandardForm:
    A: sp.csc_matrix
    b: np.ndarray
    c: np.ndarray
    free: np.ndarray  # boolean mask
    nvar: int


def _lift(prog: L1Program, eq_rows: np.ndarray) -> _StandardForm:
    """Equality-form LP over ``[v | p | q | s_hi | s_lo | xi | w]``."""
    nvar, pen = prog.nvar, prog.penalized
    k = pen.size
    finite_hi = np.flatnonzero(np.isfinite(prog.hi))
    finite_lo = np.flatnonzero(np.isfinite(prog.lo))
    nh, nl = finite_hi.size, finite_lo.size
    G = prog.n_groups if k else 0
    grouped = G > 1
    ng = G + 1 if grouped else 0
    ntot = nvar + 2 * k + nh + nl + ng

    Aeq = prog.Aeq[eq_rows]
    blocks = [sp.hstack([Aeq, sp.csr_matrix((Aeq.shape[0], ntot - nvar))])]
    rhs = [prog.beq[eq_rows]]

    if k:
        Ik = sp.identity(k, format="csr")
        blocks.append(sp.hstack([prog.W, -Ik, Ik, sp.csr_matrix((k, ntot - nvar - 2 * k))]))
        rhs.append(np.zeros(k))
    off = nvar + 2 * k
    if nh:
        blocks.append(sp.hstack([prog.Aineq[finite_hi], sp.csr_matrix((nh, 2 * k)),
                                 sp.identity(nh), sp.csr_matrix((nh, ntot - off - nh))]))
        rhs.append(prog.hi[finite_hi])
    off += nh
    if nl:
        blocks.append(sp.hstack([prog.Aineq[finite_lo], sp.csr_matrix((nl, 2 * k + nh)),
                                 -sp.identity(nl), sp.csr_matrix((nl, ntot - off - nl))]))
        rhs.append(prog.lo[finite_lo])
    off += nl
    c = np.zeros(ntot)
    if grouped:
        member = sp.csr_matrix((np.ones(k), (prog.groups, np.arange(k))), shape=(G, k))
        blocks.append(sp.hstack([sp.csr_matrix((G, nvar)), member, member,
                                 sp.csr_matrix((G, nh + nl)), sp.identity(G),
                                 -np.ones((G, 1))]))
        rhs.append(np.zeros(G))
        c[-1] = 1.0
    else:
        c[nvar:nvar + 2 * k] = 1.0
    free = np.zeros(ntot, dtype=bool)
    free[:nvar] = True
    A = sp.vstack(blocks, format="csc")
    return _StandardForm(A=A, b=np.concatenate(rhs), c=c, free=free, nvar=nvar)


def _independent_rows(A: sp.spmatrix, b: np.ndarray, tol: float):
    """Drop linearly dependent equality rows; detect inconsistent ones.

    Returns ``(rows, certificate)``. ``certificate`` is a vector ``y`` with
    ``A.T @ y ~ 0`` and ``b @ y = 1`` when the equalities are inconsistent.
    """
    m = A.shape[0]
    if m == 0:
        return np.arange(0), None
    dense = A.toarray()
    _, R, piv = scipy.linalg.qr(dense.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    scale = diag[0] if diag.size and diag[0] > 0 else 1.0
    rank = int(np.sum(diag > max(dense.shape) * np.finfo(float).eps * scale * 10))
    rows = np.sort(piv[:rank])
    if rank == m:
        return rows, None
    sol, *_ = np.linalg.lstsq(dense[rows].T, dense.T, rcond=None)
    # each dropped row is a combination of kept rows; compare right-hand sides
    mismatch = b - sol.T @ b[rows]
    bad = np.flatnonzero(np.abs(mismatch) > tol * (1 + np.abs(b).max()))
    if bad.size:
        j = bad[0]
        y = np.zeros(m)
        y[j] = 1.0
        y[rows] -= sol[:, j]
        y /= y @ b
        return rows, y
    return rows, None


class _Kkt:
    """Factorized augmented system ``[[-D, A^T], [A, delta I]]``."""

    def __init__(self, A: sp.csc_matrix, d: np.ndarray, delta: float):
        m, n = A.shape
        self.n = n
        self.A = A
        self.d = d
        K = sp.bmat([[sp.diags(-d), A.T], [A, sp.identity(m) * delta]], format="csc")
        self.lu = spla.splu(K, permc_spec="COLAMD")

    def solve(self, r1: np.ndarray, r2: np.ndarray, refine: int = 2):
        rhs = np.concatenate([r1, r2])
        sol = self.lu.solve(rhs)
        n = self.n
        for _ in range(refine):
            dx, dy = sol[:n], sol[n:]
            res = rhs - np.concatenate([-self.d * dx + self.A.T @ dy, self.A @ dx])
            sol = sol + self.lu.solve(res)
        return sol[:n], sol[n:]


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    """Largest alpha keeping ``x + alpha dx >= 0`` (inf when unconstrained)."""
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


def _starting_point(sf: _StandardForm, reg: float):
    A, b, c, free = sf.A, sf.b, sf.c, sf.free
    kkt = _Kkt(A, np.ones(A.shape[1]), reg)
    # least-norm primal point and least-squares dual point
    x, _ = kkt.solve(np.zeros(A.shape[1]), b)
    negz, y = kkt.solve(c, np.zeros(A.shape[0]))
    z = -negz
    nn = ~free
    if not np.any(nn):
        return x, y, z
    xn, zn = x[nn], z[nn]
    xn = xn + max(-1.5 * xn.min(), 0.0)
    zn = zn + max(-1.5 * zn.min(), 0.0)
    if xn.sum() == 0:
        xn = xn + 1.0
    if zn.sum() == 0:
        zn = zn + 1.0
    xz = xn @ zn
    xn = xn + 0.5 * xz / zn.sum()
    zn = zn + 0.5 * xz / xn.sum()
    x[nn], z[nn] = xn, zn
    z[free] = 0.0
    return x, y, z


def solve(prog: L1Program, tol_feas: float = 1e-8, tol_gap: float = 1e-8,
          max_iter: int = 200) -> L1Solution:
    """Solve an :class:`L1Program` to certified tolerances.

    Deterministic: no randomness, fixed starting heuristic, fixed pivoting.
    """
    rows, cert = _independent_rows(prog.Aeq, prog.beq, tol_feas)
    if cert is not None:
        v = np.zeros(prog.nvar)
        return L1Solution(v=v, objective=prog.objective(v), eq_residual=prog.eq_residual(v),
                          ineq_violation=prog.ineq_violation(v), status=Status.INFEASIBLE,
                          certificate=cert)
    sf = _lift(prog, rows)
    A, b, c, free = sf.A, sf.b, sf.c, sf.free
    nn = ~free
    n_nonneg = int(nn.sum())
    reg = 1e-10
    cnorm = 1.0 + np.abs(c).max(initial=0.0)

    x, y, z = _starting_point(sf, reg)
    history = []
    status = Status.ITER_LIMIT
    certificate = None
    it = 0
    for it in range(max_iter + 1):
        rp = b - A @ x
        rd = c - A.T @ y - z
        pobj, dobj = float(c @ x), float(b @ y)
        mu = float(x[nn] @ z[nn]) / max(n_nonneg, 1)
        history.append({"iter": it, "primal": pobj, "dual": dobj, "mu": mu,
                        "rp": float(np.abs(rp).max(initial=0.0)),
                        "rd": float(np.abs(rd).max(initial=0.0))})
        v = x[:sf.nvar]
        if (np.abs(rp).max(initial=0.0) <= tol_feas
                and np.abs(rd).max(initial=0.0) <= tol_feas * cnorm
                and abs(prog.objective(v) - dobj) <= tol_gap * (1 + abs(prog.objective(v)))):
            status = Status.OPTIMAL
            break
        certificate = _farkas(A, b, y, free, cnorm, rd)
        if certificate is not None:
            status = Status.INFEASIBLE
            break
        if it == max_iter:
            break

        d = np.full(x.size, reg)
        d[nn] = z[nn] / x[nn]
        try:
            kkt = _Kkt(A, d, reg)
        except RuntimeError:  # exactly singular factor
            logger.warning("KKT factorization failed at iteration %d", it)
            break

        def direction(rc):
            # rc is the complementarity right-hand side on nonneg variables
            r1 = rd.copy()
            r1[nn] -= rc / x[nn]
            dx, dy = kkt.solve(r1, rp)
            dz = np.zeros_like(z)
            dz[nn] = (rc - z[nn] * dx[nn]) / x[nn]
            return dx, dy, dz

        xn, zn = x[nn], z[nn]
        dxa, dya, dza = direction(-xn * zn)
        ap = min(1.0, _max_step(xn, dxa[nn]))
        ad = min(1.0, _max_step(zn, dza[nn]))
        mu_aff = float((xn + ap * dxa[nn]) @ (zn + ad * dza[nn])) / max(n_nonneg, 1)
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        rc = -xn * zn - dxa[nn] * dza[nn] + sigma * mu
        dx, dy, dz = direction(rc)
        eta = max(0.9, 1.0 - mu)
        ap = min(1.0, eta * _max_step(xn, dx[nn]))
        ad = min(1.0, eta * _max_step(zn, dz[nn]))
        x = x + ap * dx
        y = y + ad * dy
        z = z + ad * dz

    v = x[:sf.nvar].copy()
    sol = L1Solution(v=v, objective=prog.objective(v), eq_residual=prog.eq_residual(v),
                     ineq_violation=prog.ineq_violation(v), status=status,
                     dual_objective=float(b @ y), iterations=it, history=history,
                     certificate=certificate)
    if status is Status.OPTIMAL and (sol.eq_residual > tol_feas or sol.ineq_violation > tol_feas):
        sol.status = Status.ITER_LIMIT
    logger.debug("l1lp: %s after %d iterations, objective %.10g", sol.status.value, it, sol.objective)
    return sol


def _farkas(A, b, y, free, cnorm, rd) -> Optional[np.ndarray]:
    """Return a normalized ray ``y`` proving primal infeasibility, if the iterate provides one.

    The certificate satisfies ``b @ y == 1``, ``(A.T @ y)[free] ~ 0`` and
    ``(A.T @ y)[~free] <= ~0``.
    """
    t = float(b @ y)
    if t <= 0 or (cnorm + np.abs(rd).max(initial=0.0)) > 1e-7 * t:
        return None
    ray = y / t
    g = A.T @ ray
    scale = 1.0 + np.abs(ray).max()
    if np.abs(g[free]).max(initial=0.0) <= 1e-7 * scale and g[~free].max(initial=0.0) <= 1e-7 * scale:
        return ray
    return None


def brute_force_oracle(prog: L1Program, grid: int = 41, radius: Optional[float] = None):
    """Minimum sampled objective over a grid of the equality-reduced variables.

    Test oracle only. Returns ``(objective, point)`` or ``(None, None)`` when no
    sampled point is feasible. Refuses programs with more than four degrees of
    freedom left after eliminating equalities.
    """
    nvar = prog.nvar
    Aeq = prog.Aeq.toarray()
    if Aeq.shape[0]:
        vp, *_ = np.linalg.lstsq(Aeq, prog.beq, rcond=None)
        if np.abs(Aeq @ vp - prog.beq).max() > 1e-9 * (1 + np.abs(prog.beq).max()):
            return None, None
        basis = scipy.linalg.null_space(Aeq)
    else:
        vp = np.zeros(nvar)
        basis = np.eye(nvar)
    dof = basis.shape[1]
    if dof > 4:
        raise ValueError(f"brute force oracle supports at most 4 free dimensions, got {dof}")
    if dof == 0:
        points = vp[None, :]
    else:
        if radius is None:
            radius = _default_radius(prog, vp)
        axis = np.linspace(-radius, radius, grid)
        coords = np.array(list(itertools.product(axis, repeat=dof)))
        points = vp[None, :] + coords @ basis.T
    Aineq = prog.Aineq.toarray()
    feasible = np.ones(points.shape[0], dtype=bool)
    if Aineq.shape[0]:
        w = points @ Aineq.T
        feasible &= np.all(w >= prog.lo - 1e-12, axis=1) & np.all(w <= prog.hi + 1e-12, axis=1)
    if not feasible.any():
        return None, None
    pts = points[feasible]
    a = np.abs(pts[:, prog.penalized])
    if a.shape[1] == 0:
        vals = np.zeros(pts.shape[0])
    else:
        member = np.zeros((a.shape[1], prog.n_groups))
        member[np.arange(a.shape[1]), prog.groups] = 1.0
        vals = (a @ member).max(axis=1)
    best = int(np.argmin(vals))
    return float(vals[best]), pts[best]


def _default_radius(prog: L1Program, vp: np.ndarray) -> float:
    # every variable boxed by single-variable rows -> the feasible set fits in this ball
    Aineq = prog.Aineq.tocsr()
    box = np.full(prog.nvar, np.inf)
    for i in range(Aineq.shape[0]):
        cols = Aineq.indices[Aineq.indptr[i]:Aineq.indptr[i + 1]]
        vals = Aineq.data[Aineq.indptr[i]:Aineq.indptr[i + 1]]
        if cols.size == 1 and vals[0] != 0:
            bound = max(abs(prog.lo[i]), abs(prog.hi[i])) / abs(vals[0])
            box[cols[0]] = min(box[cols[0]], bound)
    if np.all(np.isfinite(box)):
        return float(np.linalg.norm(box) + np.linalg.norm(vp))
    return float(10.0 * (1.0 + np.abs(vp).max(initial=0.0)))


def dump_program(prog: L1Program, fh: TextIO) -> None:
    """Write the program as plain text: one section per block, one row per line."""
    def rows(M):
        for row in M.toarray():
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")

    fh.write(f"nvar {prog.nvar}\n")
    fh.write("penalized " + " ".join(map(str, prog.penalized)) + "\n")
    fh.write("groups " + " ".join(map(str, prog.groups)) + "\n")
    fh.write(f"Aeq {prog.Aeq.shape[0]}\n")
    rows(prog.Aeq)
    fh.write("beq " + " ".join(f"{x:.17g}" for x in prog.beq) + "\n")
    fh.write(f"Aineq {prog.Aineq.shape[0]}\n")
    rows(prog.Aineq)
    fh.write("lo " + " ".join(f"{x:.17g}" for x in prog.lo) + "\n")
    fh.write("hi " + " ".join(f"{x:.17g}" for x in prog.hi) + "\n")
