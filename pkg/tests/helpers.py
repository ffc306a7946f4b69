"""Shared test utilities: packaged example configs and random small l1 programs."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

import sparse_feedback
from sparse_feedback import io
from sparse_feedback.l1lp import L1Program

CONFIG_DIR = Path(sparse_feedback.__file__).parent / "configs"
FIXTURES = Path(__file__).parent / "fixtures"


def config(name: str) -> io.Config:
    return io.load_config(CONFIG_DIR / f"{name}.json")


def fixture_pair(name: str):
    from sparse_feedback import SolutionPair
    d = FIXTURES / name
    return SolutionPair(X=io.load_matrix(d / "X.csv"), U=io.load_matrix(d / "U.csv"))


@dataclass
class RandomProgram:
    prog: L1Program
    center: np.ndarray
    rho: float
    radius: float


def random_program(rng: np.random.Generator, nvar: int | None = None) -> RandomProgram:
    """Bounded program in at most four variables whose feasible set holds a ball.

    A center ``c`` is drawn first; equalities are made to pass through it and
    every interval row keeps ``c`` at least ``rho`` away from both faces.
    """
    nvar = int(rng.integers(1, 5)) if nvar is None else nvar
    c = rng.uniform(-1.0, 1.0, nvar)
    neq = int(rng.integers(0, nvar))
    Aeq = rng.normal(size=(neq, nvar))
    beq = Aeq @ c
    # box rows keep the oracle's search radius finite
    box = np.abs(c) + rng.uniform(0.3, 2.0, nvar)
    rows = [np.eye(nvar)]
    lo, hi = [-box], [box]
    dist = [box - np.abs(c)]
    k = int(rng.integers(0, 3))
    if k:
        G = rng.normal(size=(k, nvar))
        w = rng.uniform(0.2, 1.5, k)
        rows.append(G)
        lo.append(G @ c - w)
        hi.append(G @ c + w)
        dist.append(w / np.linalg.norm(G, axis=1))
    groups = None
    if nvar > 1 and rng.random() < 0.3:
        groups = rng.integers(0, 2, nvar)
    prog = L1Program(nvar=nvar, penalized=np.arange(nvar), Aeq=Aeq if neq else None,
                     beq=beq if neq else None, Aineq=np.vstack(rows),
                     lo=np.concatenate(lo), hi=np.concatenate(hi), groups=groups)
    # the grid lives in null-space coordinates around the least-squares point
    vp = np.linalg.lstsq(Aeq, beq, rcond=None)[0] if neq else np.zeros(nvar)
    radius = float(np.linalg.norm(box) + np.linalg.norm(vp))
    return RandomProgram(prog=prog, center=c, rho=float(np.concatenate(dist).min()), radius=radius)


def grid_slack(rp: RandomProgram, v_opt: np.ndarray, grid: int) -> float:
    """How far the best feasible grid point can sit above the true optimum.

    Pulling the optimum toward the center by the fraction ``t`` leaves a ball
    of radius ``t * rho`` inside the feasible set; once that ball covers half a
    grid cell diagonal it contains a grid point. Both moves are bounded with
    the objective's l1 Lipschitz constant.
    """
    nvar = rp.prog.nvar
    dof = nvar - rp.prog.Aeq.shape[0]
    h = 2.0 * rp.radius / (grid - 1)
    reach = 0.5 * h * np.sqrt(max(dof, 1))
    t = min(1.0, reach / rp.rho)
    return t * np.abs(rp.center - v_opt).sum() + np.sqrt(nvar) * reach + 1e-9


ACCEPTANCE: list[str] = []


def report(label: str, ok: bool, detail: str, info: bool = False) -> None:
    """Record one criterion line; ``info`` lines are context, not criteria."""
    status = "INFO" if info else ("PASS" if ok else "FAIL")
    line = f"{status}  {label}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
