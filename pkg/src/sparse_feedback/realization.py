"""Recover compensator gains from a solved ``(X, U)`` pair and inspect the closed loop."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (AugmentedSystem, Compensator, DimensionError, LtiSystem, SolutionPair,
                    shift_matrix)


class RealizationError(ValueError):
    """The solution pair cannot be realized (first state block is not the identity)."""


@dataclass(frozen=True)
class RealizationData:
    Z: np.ndarray
    V: np.ndarray
    Psi: np.ndarray
    gains: Compensator
    residual: float


@dataclass(frozen=True)
class NilpotencyReport:
    power_norm: float
    spectral_radius: float
    similarity_residual: float
    passed: bool


def selector_matrices(n: int, N: int):
    """``Z = [0 I]`` and ``V = Z (P kron I_n)``."""
    nz = n * (N - 1)
    Z = np.hstack([np.zeros((nz, n)), np.eye(nz)])
    V = Z @ np.kron(shift_matrix(N), np.eye(n))
    return Z, V


def realize(pair: SolutionPair, n: int | None = None, N: int | None = None,
            x0_tol: float = 1e-6, method: str = "structural") -> RealizationData:
    """Solve ``[K H; G F] [X; Z] = [U; V]`` for the compensator gains.

    ``X_0`` is snapped to the identity before use; deviations above ``x0_tol``
    raise :class:`RealizationError`. ``method="solve"`` uses a general dense
    solve instead of the closed-form inverse of ``Psi`` (kept as a cross-check).
    """
    n = pair.n if n is None else n
    N = pair.N if N is None else N
    if pair.n != n or pair.N != N:
        raise DimensionError(f"pair has n={pair.n}, N={pair.N}; expected n={n}, N={N}")
    dev = float(np.abs(pair.X_t(0) - np.eye(n)).max())
    if dev > x0_tol:
        raise RealizationError(f"X_0 deviates from the identity by {dev:.3g} (> {x0_tol:g})")
    X = np.array(pair.X)
    X[:, :n] = np.eye(n)
    U = pair.U
    Z, V = selector_matrices(n, N)
    Psi = np.vstack([X, Z])
    UV = np.vstack([U, V])
    if method == "structural":
        Xrest = X[:, n:]
        first = UV[:, :n]
        gains = np.hstack([first, UV[:, n:] - first @ Xrest])
    elif method == "solve":
        gains = np.linalg.solve(Psi.T, UV.T).T
    else:
        raise ValueError(f"unknown method {method!r}")
    m = U.shape[0]
    comp = Compensator(K=gains[:m, :n], H=gains[:m, n:], G=gains[m:, :n], F=gains[m:, n:])
    residual = float(np.abs(gains @ Psi - UV).max())
    return RealizationData(Z=Z, V=V, Psi=Psi, gains=comp, residual=residual)


def closed_loop(sys: LtiSystem, comp: Compensator) -> AugmentedSystem:
    if comp.n != sys.n or comp.m != sys.m:
        raise DimensionError(f"compensator is for n={comp.n}, m={comp.m}; "
                             f"system has n={sys.n}, m={sys.m}")
    Acl = np.block([[sys.A + sys.B @ comp.K, sys.B @ comp.H], [comp.G, comp.F]])
    Ccl = np.hstack([sys.C + sys.D @ comp.K, sys.D @ comp.H])
    return AugmentedSystem(Acl=Acl, Ccl=Ccl)


def similarity_residual(aug: AugmentedSystem, Psi: np.ndarray, n: int, N: int) -> float:
    """``|| Acl Psi - Psi (P kron I_n) ||_inf`` (max entry)."""
    return float(np.abs(aug.Acl @ Psi - Psi @ np.kron(shift_matrix(N), np.eye(n))).max())


def verify_nilpotent(aug: AugmentedSystem, N: int, Psi: np.ndarray | None = None,
                     tol: float = 1e-6, similarity_tol: float = 1e-8) -> NilpotencyReport:
    """Check that ``Acl^N`` vanishes.

    Without ``Psi`` the test is ``||Acl^N||_inf <= tol * max(1, ||Acl||_inf)``.
    With ``Psi`` the N-independent similarity identity decides instead, since
    powering a nilpotent matrix amplifies roundoff.
    """
    Acl = aug.Acl
    power = np.eye(Acl.shape[0])
    for _ in range(int(N)):
        power = power @ Acl
    power_norm = float(np.abs(power).sum(axis=1).max()) if power.size else 0.0
    rho = float(np.abs(np.linalg.eigvals(Acl)).max()) if Acl.size else 0.0
    if Psi is not None:
        n = Acl.shape[0] // N
        sim = similarity_residual(aug, Psi, n, N)
        passed = sim <= similarity_tol
    else:
        sim = float("nan")
        scale = max(1.0, float(np.abs(Acl).sum(axis=1).max()) if Acl.size else 0.0)
        passed = power_norm <= tol * scale
    return NilpotencyReport(power_norm=power_norm, spectral_radius=rho,
                            similarity_residual=sim, passed=passed)


def companion_blocks(pair: SolutionPair) -> tuple[np.ndarray, np.ndarray]:
    """``A + BK`` and ``F`` predicted directly from ``X``: ``X_1`` and the block companion form."""
    n, N = pair.n, pair.N
    nz = n * (N - 1)
    F = np.zeros((nz, nz))
    if nz:
        F[:n, :] = -pair.X[:, n:]
        F[n:, :nz - n] = np.eye(nz - n)
    X1 = pair.X_t(1) if N > 1 else np.zeros((n, n))
    return X1, F


def gain_pattern(comp: Compensator) -> np.ndarray:
    """Absolute values of the stacked gain matrix, for heat-map plotting."""
    return np.abs(comp.gain_matrix())
