"""Plant/controller containers and the small matrix toolkit shared by the package."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import expm


class DimensionError(ValueError):
    """Raised when matrix shapes do not conform."""


class AssumptionError(ValueError):
    """Raised when a standing modelling assumption is violated (e.g. p != m)."""


class Variant(str, enum.Enum):
    SPARSE = "sparse"
    MINIMUM_ATTENTION = "minimum_attention"


class Norm(str, enum.Enum):
    # "sum": entrywise l1 of U.  "max_row": largest per-input l1 row sum.
    SUM = "sum"
    MAX_ROW = "max_row"


def _as_matrix(name, value, rows=None, cols=None) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        # 1-D input is read as a column when a single column is expected
        arr = arr.reshape(-1, 1) if cols == 1 else arr.reshape(1, -1)
    arr = arr.copy()
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if rows is not None and arr.shape[0] != rows:
        raise DimensionError(f"{name} has {arr.shape[0]} rows, expected {rows}")
    if cols is not None and arr.shape[1] != cols:
        raise DimensionError(f"{name} has {arr.shape[1]} columns, expected {cols}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LtiSystem:
    """Discrete plant ``x(t+1) = A x(t) + B u(t)``, ``y(t) = C x(t) + D u(t)``.

    ``C`` and ``D`` default to ``I_n`` and a zero block. Arrays are copied and
    frozen on construction.
    """

    A: np.ndarray
    B: np.ndarray
    C: Optional[np.ndarray] = None
    D: Optional[np.ndarray] = None

    def __post_init__(self):
        A = _as_matrix("A", self.A)
        n = A.shape[0]
        if A.shape[1] != n:
            raise DimensionError(f"A must be square, got shape {A.shape}")
        B = _as_matrix("B", self.B, n, 1 if np.ndim(self.B) == 1 else None)
        m = B.shape[1]
        if m > n:
            raise DimensionError(f"input count m={m} exceeds state dimension n={n}")
        C = np.eye(n) if self.C is None else self.C
        C = _as_matrix("C", C, None, n)
        p = C.shape[0]
        D = np.zeros((p, m)) if self.D is None else self.D
        D = _as_matrix("D", D, p, m)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def step(self, x, u):
        return self.A @ x + self.B @ u

    def output(self, x, u):
        return self.C @ x + self.D @ u


@dataclass(frozen=True)
class SynthesisSpec:
    """Horizon, output bounds and objective selection for one synthesis run.

    ``s`` may be ``None`` (no output constraints) or a length-``p`` vector whose
    entries are positive or ``inf`` for an unbounded channel.
    """

    N: int
    s: Optional[np.ndarray] = None
    variant: Variant = Variant.SPARSE
    norm: Norm = Norm.SUM

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise DimensionError(f"horizon N must be a positive integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "norm", Norm(self.norm))
        if self.s is not None:
            s = np.array([np.inf if v is None else v for v in np.atleast_1d(self.s)], dtype=float)
            if s.ndim != 1:
                raise DimensionError("s must be a vector")
            if np.any(np.isnan(s)) or np.any(s <= 0):
                raise ValueError("output bounds s must be strictly positive")
            if np.all(np.isinf(s)):
                s = None
            else:
                s.setflags(write=False)
            object.__setattr__(self, "s", s)

    @property
    def bounded(self) -> bool:
        return self.s is not None

    def check_against(self, sys: LtiSystem) -> None:
        if self.s is not None and self.s.shape[0] != sys.p:
            raise DimensionError(f"s has length {self.s.shape[0]}, system has p={sys.p} outputs")


@dataclass(frozen=True)
class SolutionPair:
    """Trajectory matrices ``X`` (n x nN) and ``U`` (m x nN) of the matrix program."""

    X: np.ndarray
    U: np.ndarray
    objective: float = float("nan")

    def __post_init__(self):
        X = _as_matrix("X", self.X)
        n = X.shape[0]
        if X.shape[1] % n:
            raise DimensionError(f"X has {X.shape[1]} columns, not a multiple of n={n}")
        U = _as_matrix("U", self.U, None, X.shape[1])
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "objective", float(self.objective))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.U.shape[0]

    @property
    def N(self) -> int:
        return self.X.shape[1] // self.n

    def X_t(self, t: int) -> np.ndarray:
        n = self.n
        return self.X[:, t * n:(t + 1) * n]

    def U_t(self, t: int) -> np.ndarray:
        n = self.n
        return self.U[:, t * n:(t + 1) * n]


@dataclass(frozen=True)
class Compensator:
    """Dynamic state feedback ``z(t+1) = F z + G x``, ``u = H z + K x``, ``z(0) = 0``."""

    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    K: np.ndarray

    def __post_init__(self):
        K = _as_matrix("K", self.K)
        m, n = K.shape
        F = np.asarray(self.F, dtype=float)
        nz = F.shape[0] if F.ndim == 2 else 0
        F = _as_matrix("F", F.reshape(nz, nz), nz, nz)
        G = _as_matrix("G", np.asarray(self.G, dtype=float).reshape(nz, n), nz, n)
        H = _as_matrix("H", np.asarray(self.H, dtype=float).reshape(m, nz), m, nz)
        for name, val in (("F", F), ("G", G), ("H", H), ("K", K)):
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.K.shape[1]

    @property
    def m(self) -> int:
        return self.K.shape[0]

    @property
    def nz(self) -> int:
        return self.F.shape[0]

    @property
    def z0(self) -> np.ndarray:
        return np.zeros(self.nz)

    def gain_matrix(self) -> np.ndarray:
        """The stacked gain ``[[K, H], [G, F]]``."""
        return np.block([[self.K, self.H], [self.G, self.F]])


@dataclass(frozen=True)
class TrackingCompensator:
    base: Compensator
    L: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        m = self.base.m
        object.__setattr__(self, "M", _as_matrix("M", self.M, m, m))
        object.__setattr__(self, "L", _as_matrix("L", np.asarray(self.L, float).reshape(self.base.nz, m),
                                                 self.base.nz, m))

    def Mr(self, sys: LtiSystem) -> np.ndarray:
        """Reference input matrix ``[B M; L]`` of the closed tracking loop."""
        return np.vstack([sys.B @ self.M, self.L])


@dataclass(frozen=True)
class AugmentedSystem:
    """Closed loop in the stacked state ``psi = [x; z]``."""

    Acl: np.ndarray
    Ccl: np.ndarray
    Mr: Optional[np.ndarray] = field(default=None)

    @property
    def dim(self) -> int:
        return self.Acl.shape[0]


def shift_matrix(N: int) -> np.ndarray:
    """Nilpotent N x N Jordan block: ones on the first subdiagonal."""
    if int(N) != N or N < 1:
        raise DimensionError(f"shift matrix size must be a positive integer, got {N}")
    return np.eye(int(N), k=-1)


def kron(left, right) -> np.ndarray:
    return np.kron(np.asarray(left, dtype=float), np.asarray(right, dtype=float))


def basis_vector(i: int, dim: int) -> np.ndarray:
    """Zero-based standard basis vector ``e_{i+1}`` of length ``dim``."""
    if not 0 <= i < dim:
        raise DimensionError(f"basis index {i} out of range for dimension {dim}")
    e = np.zeros(dim)
    e[i] = 1.0
    return e


def numerical_rank(M) -> int:
    """Rank with the conventional ``max(shape) * eps * sigma_max`` cutoff."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    tol = max(M.shape) * np.finfo(float).eps * sv[0]
    return int(np.sum(sv > tol))


def reachability_matrix(sys: LtiSystem, N: int) -> tuple[np.ndarray, int]:
    """Return ``[A^{N-1}B ... AB B]`` and its numerical rank."""
    if int(N) != N or N < 1:
        raise DimensionError(f"N must be a positive integer, got {N}")
    blocks = []
    AkB = sys.B.copy()
    for _ in range(int(N)):
        blocks.append(AkB)
        AkB = sys.A @ AkB
    Phi = np.hstack(blocks[::-1])
    return Phi, numerical_rank(Phi)


def zoh_discretize(Ac, Bc, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Zero-order-hold discretization through one exponential of ``[[Ac, Bc], [0, 0]] dt``."""
    Ac = np.atleast_2d(np.asarray(Ac, dtype=float))
    Bc = np.asarray(Bc, dtype=float)
    if Bc.ndim == 1:
        Bc = Bc.reshape(-1, 1)
    n = Ac.shape[0]
    if Ac.shape != (n, n) or Bc.shape[0] != n:
        raise DimensionError(f"incompatible shapes Ac {Ac.shape}, Bc {Bc.shape}")
    if not (np.all(np.isfinite(Ac)) and np.all(np.isfinite(Bc)) and np.isfinite(dt)):
        raise ValueError("zoh_discretize requires finite inputs")
    if dt <= 0:
        raise ValueError(f"sampling period must be positive, got {dt}")
    m = Bc.shape[1]
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = Ac
    aug[:n, n:] = Bc
    E = expm(aug * dt)
    return E[:n, :n], E[:n, n:]


def rank_condition(sys: LtiSystem) -> tuple[bool, int]:
    """Steady-state tracking condition ``rank [[I - A, B], [C, 0]] == n + m``.

    Requires square output/input (p == m) and D == 0; either violation raises
    :class:`AssumptionError`.
    """
    if sys.p != sys.m:
        raise AssumptionError(f"tracking needs p == m, got p={sys.p}, m={sys.m}")
    if np.any(sys.D != 0):
        raise AssumptionError("tracking needs D == 0")
    n, m = sys.n, sys.m
    stacked = np.block([[np.eye(n) - sys.A, sys.B], [sys.C, np.zeros((m, m))]])
    r = numerical_rank(stacked)
    return r == n + m, r
