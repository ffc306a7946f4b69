"""scikit-learn style wrappers around the synthesis pipeline.

``fit`` takes a plant instead of a data matrix; ``predict`` maps a batch of
initial states (one per row) to closed-loop input sequences. Hyperparameters
live in ``__init__`` so ``get_params``/``set_params``/``clone`` work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from .model import LtiSystem, SynthesisSpec, Variant
from .realization import closed_loop, realize
from .simulate import default_steps, run_closed_loop, run_tracking
from .synthesis import feasibility_report, synthesize
from .tracking import ReferenceSignal, assemble_tracking, feedforward_gains, steady_state


def check_system(system) -> LtiSystem:
    """Accept an :class:`LtiSystem`, an ``(A, B[, C[, D]])`` tuple or a dict with those keys."""
    if isinstance(system, LtiSystem):
        return system
    if isinstance(system, dict):
        return LtiSystem(system["A"], system["B"], system.get("C"), system.get("D"))
    if isinstance(system, (tuple, list)) and 2 <= len(system) <= 4:
        return LtiSystem(*system)
    raise TypeError(f"cannot interpret {type(system).__name__} as a plant")


def check_initial_states(X0, n: int) -> np.ndarray:
    X0 = check_array(np.atleast_2d(np.asarray(X0, dtype=float)), ensure_min_samples=1)
    if X0.shape[1] != n:
        raise ValueError(f"initial states must have {n} columns, got {X0.shape[1]}")
    return X0


class SparseFeedbackController(BaseEstimator):
    """Sparse dynamic state-feedback compensator.

    Parameters
    ----------
    horizon : int
        Deadbeat horizon N.
    bounds : array-like or None
        Output bounds ``s`` (``|y(t)| <= s``); ``None`` for unconstrained.
    variant : {"sparse", "minimum_attention"}
    norm : {"sum", "max_row"}
        Entrywise l1 of U, or the largest per-input row sum.
    tol_feas, tol_gap, max_iter
        Interior-point solver settings.
    """

    def __init__(self, horizon=10, bounds=None, variant="sparse", norm="sum",
                 tol_feas=1e-8, tol_gap=1e-8, max_iter=200):
        self.horizon = horizon
        self.bounds = bounds
        self.variant = variant
        self.norm = norm
        self.tol_feas = tol_feas
        self.tol_gap = tol_gap
        self.max_iter = max_iter

    def _spec(self) -> SynthesisSpec:
        return SynthesisSpec(N=self.horizon, s=self.bounds, variant=self.variant, norm=self.norm)

    def fit(self, system, y=None):
        sys = check_system(system)
        spec = self._spec()
        pair = synthesize(sys, spec, tol_feas=self.tol_feas, tol_gap=self.tol_gap,
                          max_iter=self.max_iter)
        data = realize(pair)
        self.system_ = sys
        self.spec_ = spec
        self.solution_ = pair
        self.realization_ = data
        self.compensator_ = data.gains
        self.closed_loop_ = closed_loop(sys, data.gains)
        self.objective_ = pair.objective
        self.residuals_ = feasibility_report(pair, sys, spec)
        self.n_features_in_ = sys.n
        return self

    def simulate(self, x0, steps=None):
        check_is_fitted(self)
        steps = default_steps(self.spec_.N) if steps is None else steps
        return run_closed_loop(self.system_, self.compensator_, x0, steps)

    def predict(self, X0):
        """Closed-loop inputs ``u(0..N-1)`` for each row of ``X0``; shape ``(k, N, m)``."""
        check_is_fitted(self)
        X0 = check_initial_states(X0, self.system_.n)
        N = self.spec_.N
        return np.stack([self.simulate(x0, N).u[:N] for x0 in X0])

    def transform(self, X0):
        """State trajectories ``x(0..N)`` for each row of ``X0``; shape ``(k, N+1, n)``."""
        check_is_fitted(self)
        X0 = check_initial_states(X0, self.system_.n)
        N = self.spec_.N
        return np.stack([self.simulate(x0, N).x for x0 in X0])

    def fit_transform(self, system, X0):
        return self.fit(system).transform(X0)


class TrackingController(SparseFeedbackController):
    """Minimum-attention compensator plus feedforward gains for step references."""

    def __init__(self, horizon=10, bounds=None, variant="minimum_attention", norm="sum",
                 tol_feas=1e-8, tol_gap=1e-8, max_iter=200):
        super().__init__(horizon=horizon, bounds=bounds, variant=variant, norm=norm,
                         tol_feas=tol_feas, tol_gap=tol_gap, max_iter=max_iter)

    def fit(self, system, y=None):
        super().fit(system)
        pair = self.solution_
        ff = feedforward_gains(self.system_, self.compensator_,
                               pair.X_t(1) if pair.N > 1 else None)
        self.feedforward_ = ff
        self.M_, self.L_ = ff.M, ff.L
        self.tracking_compensator_ = assemble_tracking(self.compensator_, ff.M, ff.L)
        return self

    def steady_state(self, r_plus):
        check_is_fitted(self)
        return steady_state(self.system_, self.tracking_compensator_, r_plus)

    def track(self, x0, r_plus, steps=None):
        check_is_fitted(self)
        steps = 2 * self.spec_.N if steps is None else steps
        return run_tracking(self.system_, self.tracking_compensator_, x0,
                            ReferenceSignal(r_plus), steps)


__all__ = ["SparseFeedbackController", "TrackingController", "check_system",
           "check_initial_states", "Variant"]
