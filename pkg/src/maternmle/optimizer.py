"""Fisher-scoring maximum-likelihood driver with backtracking line search
and a Nelder-Mead fallback.

One run proceeds as: pick a starting point from the nine-row orthogonal
(L9) design spanned by an initialization cube; iterate Fisher-scoring steps
phi = I(theta)^{-1} grad, each step halved until a relaxed Armijo condition
accepts it; stop once ||grad||_2 drops below tolerance.  If the evaluation
budgets (likelihood / gradient call counts) are exhausted first, the run
shifts to a derivative-free Nelder-Mead polish from the current iterate and
finishes with one Fisher-information evaluation at the final estimate.

The initialization cube constrains only the candidate starting points; the
final estimate is free to leave it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .likelihood import NotPositiveDefinite, grad_and_fisher, log_likelihood
from .matern import MaternParams, SpatialDataset

__all__ = [
    "FisherBTConfig",
    "Termination",
    "OptResult",
    "InitializationFailed",
    "SingularInformation",
    "LikelihoodObjective",
    "l9_candidates",
    "select_initial",
    "fisher_step",
    "armijo_relaxed",
    "nelder_mead",
    "fisher_bt",
]


class InitializationFailed(Exception):
    """Every initial candidate failed covariance factorization."""


class SingularInformation(Exception):
    """The Fisher information could not be solved even with heavy damping."""


class Termination(enum.Enum):
    GRADIENT_TOL = "gradient_tol"
    FALLBACK_CONVERGED = "fallback_converged"
    BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class FisherBTConfig:
    """Tuning constants of the Fisher-scoring driver.

    The defaults are the published operating point: Armijo constant and
    slack 0.001, halving backtracking, gradient tolerance 0.001, shift
    after 60 likelihood calls (initialization included) or 20 gradient
    calls, Nelder-Mead improvement tolerance 1e-9.
    """

    theta_lower: MaternParams
    theta_upper: MaternParams
    armijo_c: float = 0.001
    armijo_slack: float = 0.001
    backtrack_rho: float = 0.5
    grad_tol: float = 0.001
    max_loglik_calls: int = 60
    max_grad_calls: int = 20
    nm_tol: float = 1e-9
    max_halvings: int = 30
    rng_seed: int = 0

    def __post_init__(self):
        lo = self.theta_lower.as_array()
        hi = self.theta_upper.as_array()
        if not np.all(lo <= hi):
            raise ValueError("theta_lower must not exceed theta_upper componentwise")
        for name in ("armijo_c", "armijo_slack", "backtrack_rho", "grad_tol", "nm_tol"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        for name in ("max_loglik_calls", "max_grad_calls", "max_halvings"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class OptResult:
    """Outcome of one optimization run.

    ``loglik_calls`` and ``grad_calls`` count every evaluation made by the
    run, fallback and final information evaluation included; the
    ``fisher_phase_*`` counters are snapshots taken when the Fisher-scoring
    phase ended, which is what the shift budgets govern.
    """

    theta_hat: MaternParams
    fisher_at_hat: np.ndarray
    loglik_at_hat: float
    loglik_calls: int
    grad_calls: int
    used_fallback: bool
    termination: Termination
    iterate_trace: list = field(default_factory=list)
    fisher_phase_loglik_calls: int = 0
    fisher_phase_grad_calls: int = 0


class LikelihoodObjective:
    """Counting adapter around the exact likelihood pipeline for one dataset.

    Failed factorizations are reported as -inf values (the attempt still
    counts toward the call budgets).  Any object with the same three-method
    surface can stand in for it, e.g. an analytic surrogate in tests.
    """

    def __init__(self, data: SpatialDataset):
        self.data = data
        self.loglik_calls = 0
        self.grad_calls = 0

    def loglik(self, theta_vec: np.ndarray) -> float:
        self.loglik_calls += 1
        try:
            with np.errstate(over="ignore", under="ignore", invalid="ignore"):
                value = log_likelihood(self.data, MaternParams.from_array(theta_vec))
        except (NotPositiveDefinite, ValueError):
            return -math.inf
        return value if not math.isnan(value) else -math.inf

    def eval_all(self, theta_vec: np.ndarray):
        """(loglik, grad, fisher) at theta; counts one call of each kind."""
        self.loglik_calls += 1
        self.grad_calls += 1
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            ev = grad_and_fisher(self.data, MaternParams.from_array(theta_vec))
        return ev.loglik, ev.grad, ev.fisher


# L9 orthogonal design: each coordinate mixes the cube corners with weights
# (1/2, 1/2), (5/6, 1/6) or (1/6, 5/6); levels indexed 0, 1, 2 below.
_L9_WEIGHTS = ((0.5, 0.5), (5.0 / 6.0, 1.0 / 6.0), (1.0 / 6.0, 5.0 / 6.0))
_L9_ROWS = (
    (0, 0, 0),
    (0, 1, 1),
    (0, 2, 2),
    (1, 0, 1),
    (1, 1, 2),
    (1, 2, 0),
    (2, 0, 2),
    (2, 1, 0),
    (2, 2, 1),
)


def l9_candidates(theta_lower: MaternParams, theta_upper: MaternParams):
    """The nine starting-point candidates spanned by the initialization cube."""
    lo = theta_lower.as_array()
    hi = theta_upper.as_array()
    candidates = []
    for row in _L9_ROWS:
        coords = [
            _L9_WEIGHTS[level][0] * lo[i] + _L9_WEIGHTS[level][1] * hi[i]
            for i, level in enumerate(row)
        ]
        candidates.append(MaternParams.from_array(coords))
    return candidates


def select_initial(data: SpatialDataset, candidates) -> tuple[MaternParams, int]:
    """Evaluate the log-likelihood at every candidate and keep the argmax.

    Ties break toward the lowest candidate index.  Raises
    InitializationFailed when every candidate fails factorization.
    """
    if not candidates:
        raise ValueError("select_initial needs at least one candidate")
    objective = LikelihoodObjective(data)
    theta, calls = _select_initial(objective, candidates)
    return theta, calls


def _select_initial(objective, candidates):
    best_idx = None
    best_val = -math.inf
    for idx, candidate in enumerate(candidates):
        value = objective.loglik(candidate.as_array())
        if value > best_val:
            best_idx, best_val = idx, value
    if best_idx is None or best_val == -math.inf:
        raise InitializationFailed("all initial candidates failed factorization")
    return candidates[best_idx], len(candidates)


def fisher_step(grad: np.ndarray, fisher: np.ndarray) -> np.ndarray:
    """Solve I(theta) phi = grad for the scoring direction phi.

    A non-positive-definite information matrix is damped Levenberg-style,
    solving (I + lam diag(I)) phi = grad with lam doubling from 1e-8.

    Raises
    ------
    SingularInformation
        If no damping up to lam = 1e2 produces a solvable system.
    """
    grad = np.asarray(grad, dtype=float)
    fisher = np.asarray(fisher, dtype=float)

    def try_solve(matrix):
        try:
            np.linalg.cholesky(matrix)  # positive-definiteness probe
        except np.linalg.LinAlgError:
            return None
        step = np.linalg.solve(matrix, grad)
        return step if np.all(np.isfinite(step)) else None

    if np.all(np.isfinite(fisher)):
        step = try_solve(fisher)
        if step is not None:
            return step
        damping = 1e-8
        diag = np.diag(np.diag(fisher))
        while damping <= 1e2:
            step = try_solve(fisher + damping * diag)
            if step is not None:
                return step
            damping *= 2.0
    raise SingularInformation("information matrix unsolvable even with damping")


def armijo_relaxed(l_new: float, l_old: float, grad, phi, cfg: FisherBTConfig) -> bool:
    """Relaxed sufficient-increase test for a candidate step phi.

    Accepts when l_new >= l_old + c * grad.phi - slack; the absolute slack
    keeps nearly-flat directions from shrinking the step to nothing.
    """
    return l_new >= l_old + cfg.armijo_c * float(np.dot(grad, phi)) - cfg.armijo_slack


def _initial_simplex(theta0: np.ndarray) -> np.ndarray:
    simplex = np.tile(theta0, (theta0.size + 1, 1))
    for i in range(theta0.size):
        simplex[i + 1, i] += max(0.1 * theta0[i], 0.01)
    return simplex


def _positive_trial(trial: np.ndarray, previous: np.ndarray) -> np.ndarray:
    """Replace non-positive trial coordinates by half their previous value."""
    bad = trial <= 0.0
    if bad.any():
        trial = trial.copy()
        trial[bad] = 0.5 * previous[bad]
    return trial


def _nm_maximize(func, theta0: np.ndarray, tol: float, max_ops: int = 20000,
                 stall_ops: int = 2000):
    """Downhill-simplex maximization with positivity-preserving trials.

    Textbook coefficients (reflect 1, expand 2, contract 0.5, shrink 0.5);
    the initial simplex perturbs each coordinate by max(0.1 theta_i, 0.01).
    Terminates when an operation that improves the best value does so by
    less than ``tol``; returns the incumbent best before that operation.
    """
    f0 = func(theta0)
    best_x = theta0.copy()
    best_f = f0
    simplex = _initial_simplex(theta0)
    values = np.array([f0] + [func(v) for v in simplex[1:]])

    stall = 0
    for _ in range(max_ops):
        order = np.argsort(values)[::-1]  # descending: best first
        simplex = simplex[order]
        values = values[order]
        if values[0] > best_f:
            if values[0] - best_f < tol:
                return best_x, best_f
            best_x = simplex[0].copy()
            best_f = values[0]
            stall = 0
        else:
            stall += 1
        if stall >= stall_ops:
            break

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        reflected = _positive_trial(centroid + (centroid - worst), worst)
        f_reflected = func(reflected)
        if f_reflected > values[0]:
            expanded = _positive_trial(centroid + 2.0 * (centroid - worst), worst)
            f_expanded = func(expanded)
            if f_expanded > f_reflected:
                simplex[-1], values[-1] = expanded, f_expanded
            else:
                simplex[-1], values[-1] = reflected, f_reflected
        elif f_reflected > values[-2]:
            simplex[-1], values[-1] = reflected, f_reflected
        else:
            contracted = _positive_trial(centroid + 0.5 * (worst - centroid), worst)
            f_contracted = func(contracted)
            if f_contracted > values[-1]:
                simplex[-1], values[-1] = contracted, f_contracted
            else:
                for i in range(1, simplex.shape[0]):
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                    values[i] = func(simplex[i])
    return best_x, best_f


def nelder_mead(data: SpatialDataset, theta0: MaternParams, tol: float,
                objective=None) -> tuple[MaternParams, int]:
    """Nelder-Mead maximization of the log-likelihood from theta0.

    Returns the best accepted iterate and the number of likelihood calls.
    ``objective`` may replace the exact likelihood (shared counters when
    called from the Fisher-scoring driver).
    """
    obj = objective if objective is not None else LikelihoodObjective(data)
    calls_before = obj.loglik_calls
    best_x, _ = _nm_maximize(obj.loglik, theta0.as_array(), tol)
    return MaternParams.from_array(best_x), obj.loglik_calls - calls_before


def fisher_bt(data: SpatialDataset, cfg: FisherBTConfig, objective=None) -> OptResult:
    """Run the full Fisher-scoring / backtracking / fallback pipeline.

    ``objective`` substitutes the likelihood pipeline (same surface as
    LikelihoodObjective); used for surrogate-objective tests.
    """
    obj = objective if objective is not None else LikelihoodObjective(data)

    theta0, _ = _select_initial(obj, l9_candidates(cfg.theta_lower, cfg.theta_upper))
    theta = theta0.as_array()
    loglik, grad, fisher = obj.eval_all(theta)
    trace = [(MaternParams.from_array(theta), loglik)]

    converged = False
    while True:
        if float(np.linalg.norm(grad)) <= cfg.grad_tol:
            converged = True
            break
        if obj.loglik_calls > cfg.max_loglik_calls or obj.grad_calls > cfg.max_grad_calls:
            break
        try:
            phi = fisher_step(grad, fisher)
        except SingularInformation:
            break

        accepted = False
        for _ in range(cfg.max_halvings + 1):
            trial = theta + phi
            if np.any(trial <= 0.0):
                ok = False  # outside the positive octant: rejected unevaluated
            else:
                trial_loglik = obj.loglik(trial)
                ok = armijo_relaxed(trial_loglik, loglik, grad, phi, cfg)
            if ok:
                accepted = True
                break
            if obj.loglik_calls > cfg.max_loglik_calls:
                break  # likelihood budget tripped mid-search
            phi = cfg.backtrack_rho * phi
        if not accepted:
            break  # halving cap or budget inside the search forces the shift
        assert armijo_relaxed(trial_loglik, loglik, grad, phi, cfg)
        theta = trial
        trace.append((MaternParams.from_array(theta), trial_loglik))
        loglik, grad, fisher = obj.eval_all(theta)

    phase_loglik_calls = obj.loglik_calls
    phase_grad_calls = obj.grad_calls

    if converged:
        return OptResult(
            theta_hat=MaternParams.from_array(theta),
            fisher_at_hat=fisher,
            loglik_at_hat=loglik,
            loglik_calls=obj.loglik_calls,
            grad_calls=obj.grad_calls,
            used_fallback=False,
            termination=Termination.GRADIENT_TOL,
            iterate_trace=trace,
            fisher_phase_loglik_calls=phase_loglik_calls,
            fisher_phase_grad_calls=phase_grad_calls,
        )

    # Shift: Nelder-Mead from the current iterate, then one information
    # evaluation at its result.
    shift_loglik = loglik
    best_x, _ = _nm_maximize(obj.loglik, theta, cfg.nm_tol)
    final_loglik, _, final_fisher = obj.eval_all(best_x)
    trace.append((MaternParams.from_array(best_x), final_loglik))
    improved = final_loglik > shift_loglik
    return OptResult(
        theta_hat=MaternParams.from_array(best_x),
        fisher_at_hat=final_fisher,
        loglik_at_hat=final_loglik,
        loglik_calls=obj.loglik_calls,
        grad_calls=obj.grad_calls,
        used_fallback=True,
        termination=Termination.FALLBACK_CONVERGED if improved else Termination.BUDGET_EXHAUSTED,
        iterate_trace=trace,
        fisher_phase_loglik_calls=phase_loglik_calls,
        fisher_phase_grad_calls=phase_grad_calls,
    )
