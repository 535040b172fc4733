"""
Gradient MM fitting loop

Each sweep takes, from the previous state, one scalar Newton step per baseline log-jump
eta_k and one p-dimensional Newton step for beta, using the first and second derivatives
of the surrogate at its anchor. Each block is halved toward its old value until the
log-likelihood does not drop.

By default every outer iteration that does not stop after its first sweep runs a second
sweep, extrapolates along the two steps and stabilises with one more sweep; an
extrapolation that loses likelihood falls back to the plain second sweep.
"""
import logging
import time
from dataclasses import dataclass, replace

import numpy as np

from src.models.params import ModelParams, SolverConfig
from src.models.results import FitResult
from src.services.likelihood import (
    Design, a1, a2, guarded_ratio, loglik, loglik_gradient
)
from src.utils.errors import ConvergenceError, DomainError, EstimationError, PositivityError
from src.utils.monitoring import fit_tracker, log_fit_event

logger = logging.getLogger(__name__)

RIDGE_SCALE = 1e-8
STATIONARY_SCALE = 1e-4


def _active(values, mask):
    return np.where(mask, values, 1.0)


def score_eta(design, state, k=None, u=None):
    """S_1k: derivative in eta_k, equal to the log-likelihood gradient at the anchor"""
    grad_eta, _ = loglik_gradient(design, state, u)
    return grad_eta if k is None else float(grad_eta[k])


def curvature_eta(design, state, k=None, u=None):
    """S_1kk: second derivative in eta_k of the surrogate, taken at its anchor"""
    u = u if u is not None else design.u_terms(state)
    ul = _active(u.u_left, design.on_left)
    ug = _active(u.u_between, design.on_interval)
    w_left = design.dl * (a1(ul) - 2 * a2(ul) * ul - 2 / ul) - design.di
    w_between = design.di * (a1(ug) - 2 * a2(ug) * ug - 2 / ug)
    w_right = -design.dr
    curv = state.lam * (design.upto_left.T @ w_left
                        + design.between.T @ w_between
                        + design.upto_right.T @ w_right)
    return curv if k is None else float(curv[k])


def score_beta(design, state, u=None):
    """S_2: gradient of the log-likelihood in beta"""
    _, grad_beta = loglik_gradient(design, state, u)
    return grad_beta


def curvature_beta(design, state, u=None):
    """
    S_22 = -2 sum_i { dL (A2(uL) uL + 1/uL) Z(L)Z(L)' / beta'Z(L)
                      + dI (A2(uLR) uLR + 1/uLR) dZ dZ' / beta'dZ }

    with 0/0 terms dropped.
    """
    u = u if u is not None else design.u_terms(state)
    s_left, s_between = design.regression_terms(state.beta)
    ul = _active(u.u_left, design.on_left)
    ug = _active(u.u_between, design.on_interval)
    c_left = np.where(design.zero_left, 0.0, design.dl * (a2(ul) * ul + 1 / ul))
    c_between = np.where(design.zero_between, 0.0, design.di * (a2(ug) * ug + 1 / ug))
    w_left = guarded_ratio(c_left, s_left, design.on_left)
    w_between = guarded_ratio(c_between, s_between, design.on_interval)
    zl, zb = design.z_left, design.z_between
    hess = -2.0 * ((zl.T * w_left) @ zl + (zb.T * w_between) @ zb)
    return 0.5 * (hess + hess.T)


def newton_beta_step(curvature, score):
    """
    Newton direction -S_22^{-1} S_2; a singular S_22 gets one retry with ridge
    1e-8 trace/p. Returns None when the curvature carries no information.
    """
    p = score.shape[0]
    if p == 0 or not np.any(curvature):
        return None
    try:
        step = np.linalg.solve(curvature, -score)
        if np.all(np.isfinite(step)):
            return step
    except np.linalg.LinAlgError:
        pass

    ridge = RIDGE_SCALE * abs(np.trace(curvature)) / p
    logger.warning(f"Singular beta curvature, retrying with ridge {ridge:.3e}")
    try:
        step = np.linalg.solve(curvature - ridge * np.eye(p), -score)
    except np.linalg.LinAlgError:
        step = None
    if step is None or not np.all(np.isfinite(step)):
        raise EstimationError("Singular beta curvature even after ridge", {'ridge': ridge})
    return step


@dataclass(frozen=True, eq=False)
class SweepOutcome:
    state: ModelParams
    loglik: float
    eta_accepted: bool
    beta_accepted: bool
    halvings: int
    flat_coordinates: int


class MMSolver:
    """Runs sweeps of the gradient MM update on a fixed design"""

    def __init__(self, design, config=None, tracker=None):
        self.design = design
        self.config = (config or SolverConfig()).validate()
        self.tracker = tracker or fit_tracker
        self.strict = not self.config.freeze_beta

    def _valid_loglik(self, state):
        try:
            self.design.check_state(state, self.strict)
            return loglik(self.design, state)
        except (PositivityError, DomainError):
            return None

    def _halve(self, make, reference):
        """Largest step in 1, 1/2, 1/4, ... that keeps the state valid without losing ascent"""
        t = 1.0
        for halvings in range(self.config.step_halving_max + 1):
            candidate = make(t)
            value = self._valid_loglik(candidate)
            if value is not None and value >= reference - self.config.ascent_tol:
                return candidate, value, halvings
            t *= 0.5
        return None, reference, self.config.step_halving_max

    def _is_stationary(self, grad_eta, grad_beta):
        limit = STATIONARY_SCALE * self.design.n
        return (np.max(np.abs(grad_eta), initial=0.0) < limit
                and np.max(np.abs(grad_beta), initial=0.0) < limit)

    def sweep(self, state, current=None):
        """One Jacobi sweep: every eta_k from the old state, then beta"""
        design = self.design
        u = design.check_state(state, self.strict)
        current = loglik(design, state) if current is None else current

        grad_eta, grad_beta = loglik_gradient(design, state, u)
        curv = curvature_eta(design, state, u=u)
        flat = ~(curv < 0)
        if np.any(flat):
            logger.debug(f"{int(flat.sum())} eta coordinate(s) with zero curvature left in place")
        step_eta = np.where(flat, 0.0, -grad_eta / np.where(flat, -1.0, curv))

        step_beta = None
        if not self.config.freeze_beta:
            step_beta = newton_beta_step(curvature_beta(design, state, u), grad_beta)

        candidate, value, halvings = self._halve(lambda t: state.with_eta(state.eta + t * step_eta), current)
        eta_accepted = candidate is not None
        middle = candidate if eta_accepted else state
        middle_value = value if eta_accepted else current

        beta_accepted = True
        new_state, new_value = middle, middle_value
        if step_beta is not None:
            candidate, value, more = self._halve(lambda t: middle.with_beta(state.beta + t * step_beta),
                                             max(middle_value, current))
            halvings += more
            beta_accepted = candidate is not None
            if beta_accepted:
                new_state, new_value = candidate, value

        if not eta_accepted or not beta_accepted:
            blocks = [name for name, ok in (('eta', eta_accepted), ('beta', beta_accepted)) if not ok]
            logger.warning(f"Step halving exhausted for block(s) {blocks}; keeping old values")
            log_fit_event('step_halving_exhausted', {'blocks': blocks, 'loglik': current})
            stuck = not eta_accepted and (step_beta is None or not beta_accepted)
            if stuck and not self._is_stationary(grad_eta, grad_beta):
                raise ConvergenceError("Step halving exhausted for every parameter block",
                                       details={'loglik': current})

        return SweepOutcome(
            state=new_state,
            loglik=new_value,
            eta_accepted=eta_accepted,
            beta_accepted=beta_accepted,
            halvings=halvings,
            flat_coordinates=int(flat.sum())
        )

    def change(self, old, new):
        """
        Summed absolute parameter change. Each eta coordinate is weighted by its share of
        the baseline mass, capped at 1 above negligible_mass * Lambda(t_m), so jumps that
        are vanishing count on the lambda scale. Coordinates already below the boundary
        level and still falling do not count.
        """
        d_eta = new.eta - old.eta
        boundary = (new.lam < self.config.boundary_lambda) & (d_eta < 0)
        weight = np.ones_like(d_eta)
        floor = self.config.negligible_mass * max(float(np.sum(old.lam)), float(np.sum(new.lam)))
        if floor > 0:
            weight = np.minimum(1.0, np.maximum(old.lam, new.lam) / floor)
        eta_change = np.sum(np.abs(d_eta[~boundary]) * weight[~boundary])
        return float(eta_change + np.sum(np.abs(new.beta - old.beta)))

    def extrapolate(self, origin, first, second, floor_value):
        """
        Squared extrapolation from three successive sweep states. The step length
        alpha = -|r|/|v| is pulled back toward -1, which reproduces `second`, until the
        extrapolated state is valid and at least as good as floor_value.
        """
        r = first.vector() - origin.vector()
        v = second.vector() - first.vector() - r
        r_norm, v_norm = np.linalg.norm(r), np.linalg.norm(v)
        if r_norm == 0 or v_norm == 0:
            return None
        alpha = -r_norm / v_norm
        for _ in range(self.config.extrapolation_backtracks + 1):
            if alpha >= -1.0:
                return None
            theta = origin.vector() - 2 * alpha * r + alpha ** 2 * v
            if np.all(np.isfinite(theta)):
                candidate = ModelParams.from_vector(theta, self.design.m)
                value = self._valid_loglik(candidate)
                if value is not None and value >= floor_value:
                    return candidate, value
            alpha = (alpha - 1.0) / 2
        return None

    def iterate(self, state, value):
        """
        One outer iteration. Returns (outcome, change of its first plain sweep, sweeps run).
        With acceleration on, a non-final iteration continues with a second sweep, an
        extrapolation and one stabilising sweep from the extrapolated state.
        """
        first = self.sweep(state, value)
        delta = self.change(state, first.state)
        if not self.config.accelerate or delta < self.config.tol:
            return first, delta, 1
        second = self.sweep(first.state, first.loglik)
        halvings = first.halvings + second.halvings
        jumped = self.extrapolate(state, first.state, second.state, second.loglik)
        if jumped is None:
            return replace(second, halvings=halvings), delta, 2
        final = self.sweep(*jumped)
        return replace(final, halvings=halvings + final.halvings), delta, 3

    def initial_state(self):
        cfg = self.config
        return ModelParams.initial(self.design.m, self.design.p, cfg.init_eta, cfg.init_beta)

    def fit(self, init=None, label='mm_fit'):
        design = self.design
        cfg = self.config
        if not (np.any(design.on_left) or np.any(design.on_interval)):
            raise EstimationError(
                "Degenerate data: no left- or interval-censored observations, the likelihood has no finite maximizer",
                {'censoring': design.data.censoring_counts()}
            )

        state = init if init is not None else self.initial_state()
        try:
            design.check_state(state, self.strict)
        except (PositivityError, DomainError) as e:
            raise EstimationError(f"Initial state is not valid: {e.message}", e.details)

        started = time.perf_counter()
        value = loglik(design, state)
        trace = [value]
        converged = False
        n_iter = 0
        halvings = 0
        flat = 0
        sweeps = 0

        for n_iter in range(1, cfg.max_iter + 1):
            try:
                outcome, delta, ran = self.iterate(state, value)
            except ConvergenceError as e:
                self.tracker.record_error(label, 'ConvergenceError', e.message)
                raise ConvergenceError(e.message, trace=trace + [value], details={'iteration': n_iter}) from e
            state, value = outcome.state, outcome.loglik
            trace.append(value)
            sweeps += ran
            halvings += outcome.halvings
            flat = outcome.flat_coordinates
            logger.debug(f"iteration {n_iter}: loglik={value:.10f} change={delta:.3e}")
            if delta < cfg.tol:
                converged = True
                break

        duration = time.perf_counter() - started
        grad_eta, grad_beta = loglik_gradient(design, state)
        diagnostics = {
            'max_score_eta': float(np.max(np.abs(grad_eta), initial=0.0)),
            'max_score_beta': float(np.max(np.abs(grad_beta), initial=0.0)),
            'halvings': int(halvings),
            'sweeps': int(sweeps),
            'flat_coordinates': int(flat),
            'boundary_coordinates': int(np.sum(state.lam < cfg.boundary_lambda)),
            'duration_s': duration
        }
        self.tracker.record_fit(label, converged, n_iter, duration, value)
        log_fit_event('fit_complete' if converged else 'nonconvergence',
                      {'label': label, 'n_iter': n_iter, 'loglik': value})

        return FitResult(
            params=state,
            loglik=value,
            n_iter=n_iter,
            converged=converged,
            grid=design.grid,
            loglik_trace=tuple(trace),
            method='mm',
            diagnostics=diagnostics
        )


def sweep(design, state, config=None):
    return MMSolver(design, config).sweep(state).state


def fit(data, config=None, process=None, design=None, init=None):
    """Fit the additive risks model to a dataset by gradient MM"""
    design = design if design is not None else Design.build(data, process)
    return MMSolver(design, config).fit(init)
