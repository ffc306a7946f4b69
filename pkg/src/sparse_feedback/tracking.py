"""Feedforward gains for step-reference tracking with the dynamic compensator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (AssumptionError, Compensator, DimensionError, LtiSystem,
                    TrackingCompensator, numerical_rank, rank_condition)
from .realization import closed_loop


class TrackingError(ValueError):
    pass


class RankConditionError(TrackingError):
    pass


class SingularConditionError(TrackingError):
    def __init__(self, which: str, det: float):
        self.which = which
        self.det = det
        label = "I - (A + BK)" if which == "i" else "I - F"
        super().__init__(f"condition ({which}) fails: det({label}) = {det:.3g} is numerically zero")


class DCGainSingularError(TrackingError):
    pass


@dataclass(frozen=True)
class ReferenceSignal:
    """Step reference: ``r_minus`` before t = 0, ``r_plus`` from t = 0 on."""

    r_plus: np.ndarray
    r_minus: np.ndarray | None = None

    def __post_init__(self):
        r_plus = np.atleast_1d(np.asarray(self.r_plus, dtype=float))
        r_minus = np.zeros_like(r_plus) if self.r_minus is None else \
            np.atleast_1d(np.asarray(self.r_minus, dtype=float))
        if r_minus.shape != r_plus.shape:
            raise DimensionError("r_minus and r_plus must have the same length")
        if not (np.all(np.isfinite(r_plus)) and np.all(np.isfinite(r_minus))):
            raise ValueError("reference values must be finite")
        object.__setattr__(self, "r_plus", r_plus)
        object.__setattr__(self, "r_minus", r_minus)

    def at(self, t: int) -> np.ndarray:
        return self.r_plus if t >= 0 else self.r_minus


@dataclass(frozen=True)
class SteadyState:
    x_inf: np.ndarray
    z_inf: np.ndarray
    y_inf: np.ndarray


@dataclass(frozen=True)
class FeedforwardGains:
    M: np.ndarray
    L: np.ndarray
    det_closed: float  # det(I - (A + BK))
    det_comp: float  # det(I - F)
    det_x1: float | None = None  # det(I - X_1), when X_1 was supplied


def _nonsingular(M: np.ndarray, rel: float = 1e-9) -> tuple[bool, float]:
    if M.size == 0:
        return True, 1.0
    det = float(np.linalg.det(M))
    scale = max(float(np.abs(M).sum(axis=1).max()), 1.0)
    # scale-normalized threshold; plain det is meaningless across units
    return abs(det) >= rel * scale ** M.shape[0] and numerical_rank(M) == M.shape[0], det


def feedforward_gains(sys: LtiSystem, comp: Compensator, X1: np.ndarray | None = None
                      ) -> FeedforwardGains:
    """Gains ``M = (C (I-(A+BK))^-1 B)^-1`` and ``L = -G (I-(A+BK))^-1 B M``.

    Checks the square/strictly-proper assumption, the steady-state rank
    condition, and nonsingularity of ``I - (A+BK)`` and ``I - F`` first.
    """
    ok, rank = rank_condition(sys)
    if not ok:
        raise RankConditionError(f"rank [[I-A, B], [C, 0]] = {rank} < n + m = {sys.n + sys.m}")
    n = sys.n
    Rcl = np.eye(n) - (sys.A + sys.B @ comp.K)
    ok_i, det_i = _nonsingular(Rcl)
    if not ok_i:
        raise SingularConditionError("i", det_i)
    ok_ii, det_ii = _nonsingular(np.eye(comp.nz) - comp.F)
    if not ok_ii:
        raise SingularConditionError("ii", det_ii)
    RB = np.linalg.solve(Rcl, sys.B)
    dc = sys.C @ RB
    if numerical_rank(dc) < dc.shape[0]:
        raise DCGainSingularError("C (I - (A+BK))^-1 B is singular")
    M = np.linalg.inv(dc)
    L = -comp.G @ RB @ M
    det_x1 = None if X1 is None else float(np.linalg.det(np.eye(n) - np.asarray(X1, dtype=float)))
    return FeedforwardGains(M=M, L=L, det_closed=det_i, det_comp=det_ii, det_x1=det_x1)


def assemble_tracking(comp: Compensator, M, L) -> TrackingCompensator:
    return TrackingCompensator(base=comp, L=L, M=M)


def steady_state(sys: LtiSystem, tcomp: TrackingCompensator, r_plus, check: bool = False,
                 tol: float = 1e-8) -> SteadyState:
    """Affine fixed point ``psi = Acl psi + Mr r_plus`` of the tracking loop.

    With ``check=True`` a :class:`TrackingError` is raised unless ``y = r_plus``
    and ``z = 0`` to ``tol`` (scaled by ``1 + |r_plus|``).
    """
    if np.any(sys.D != 0):
        raise AssumptionError("tracking needs D == 0")
    r_plus = np.atleast_1d(np.asarray(r_plus, dtype=float))
    aug = closed_loop(sys, tcomp.base)
    Mr = tcomp.Mr(sys)
    dim = aug.Acl.shape[0]
    psi = np.linalg.solve(np.eye(dim) - aug.Acl, Mr @ r_plus)
    n = sys.n
    ss = SteadyState(x_inf=psi[:n], z_inf=psi[n:], y_inf=sys.C @ psi[:n])
    if check:
        scale = 1.0 + np.abs(r_plus).max(initial=0.0)
        ey = np.abs(ss.y_inf - r_plus).max(initial=0.0)
        ez = np.abs(ss.z_inf).max(initial=0.0)
        if ey > tol * scale or ez > tol * scale:
            raise TrackingError(f"steady state misses the reference: |y - r| = {ey:.3g}, |z| = {ez:.3g}")
    return ss
