"""Weighted least-squares fits of scaling parameters to sweep data.

Each observation (n, eps, p_hat, trials) is transformed to y = Q^-1(p_hat),
where the scaling model is linear in epsilon_star and beta and nonlinear only
through alpha:

    y = sqrt(n) * (epsilon_star - beta*omega*n^(-2/3) - eps) / alpha

Weights come from the delta method: Var(y) = p(1-p) / (trials * phi(y)^2).
Gauss-Newton with the analytic Jacobian handles every free-parameter mask.
"""
import math

import numpy as np

from .errors import FssError
from .scaling import ScalingParams, q_inverse

PARAM_NAMES = ("epsilon_star", "alpha", "beta")


class FitError(FssError):
    """Raised for unusable data, singular designs, or non-convergence."""


class FitProblem:
    """Observations plus the free/fixed split.

    base is a complete ScalingParams bundle: it supplies the fixed values,
    omega, and the bookkeeping fields (nu_star, alpha_mode, gamma) that the
    fitted bundle inherits.  init overrides starting guesses per free name.
    """

    def __init__(self, observations, free, base, init=None):
        free = tuple(free)
        if not free or len(set(free)) != len(free):
            raise FitError("free parameter list must be nonempty and unique")
        for name in free:
            if name not in PARAM_NAMES:
                raise FitError("unknown parameter %r, want subset of %s"
                               % (name, PARAM_NAMES))
        obs = []
        for n, eps, p_hat, trials in observations:
            n, eps, p_hat, trials = int(n), float(eps), float(p_hat), int(trials)
            if n < 1 or trials < 1:
                raise FitError("observations need n >= 1 and trials >= 1")
            if not 0.0 <= p_hat <= 1.0:
                raise FitError("p_hat must be in [0,1]")
            obs.append((n, eps, p_hat, trials))
        if not obs:
            raise FitError("no observations")
        self.observations = obs
        self.free = free
        self.base = base
        self.init = dict(init or {})


class FitResult:

    def __init__(self, params, estimates, se, residual, dropped, iterations,
                 n_used):
        self.params = params
        self.estimates = estimates
        self.se = se
        self.residual = residual
        self.dropped = dropped
        self.iterations = iterations
        self.n_used = n_used

    def __repr__(self):
        inner = ", ".join("%s=%.6g+-%.2g" % (k, self.estimates[k], self.se[k])
                          for k in sorted(self.se))
        return "FitResult(%s, residual=%.4g, used=%d, dropped=%d)" % (
            inner, self.residual, self.n_used, self.dropped)


def problem_from_rows(rows, free, base, init=None):
    """Build a FitProblem from sweep-CSV rows (uses pB_hat)."""
    obs = [(r["n"], r["eps"], r["pB_hat"], r["trials"]) for r in rows]
    return FitProblem(obs, free, base, init)


def _model(theta, ns, eps, omega):
    es, alpha, beta = theta
    sq = np.sqrt(ns)
    f = sq * (es - beta * omega * ns ** (-2.0 / 3.0) - eps) / alpha
    return f


def _jacobian(theta, f, ns, free, omega):
    es, alpha, beta = theta
    sq = np.sqrt(ns)
    cols = []
    for name in free:
        if name == "epsilon_star":
            cols.append(sq / alpha)
        elif name == "beta":
            cols.append(-omega * ns ** (-1.0 / 6.0) / alpha)
        else:
            cols.append(-f / alpha)
    return np.stack(cols, axis=1)


def fit_scaling(problem, max_iter=100):
    """Gauss-Newton WLS fit; returns estimates, standard errors, residual."""
    base, free = problem.base, problem.free
    usable = [(n, e, p, t) for n, e, p, t in problem.observations
              if 0.0 < p < 1.0]
    dropped = len(problem.observations) - len(usable)
    if not usable:
        raise FitError("degenerate: every observation has p_hat in {0, 1}")
    if len(usable) < len(free) + 1:
        raise FitError(
            "underdetermined: %d free parameters need at least %d usable "
            "observations, got %d" % (len(free), len(free) + 1, len(usable)))

    ns = np.array([u[0] for u in usable], dtype=float)
    eps = np.array([u[1] for u in usable])
    ph = np.array([u[2] for u in usable])
    trials = np.array([u[3] for u in usable], dtype=float)
    y = np.array([q_inverse(p) for p in ph])
    dens = np.exp(-0.5 * y * y) / math.sqrt(2.0 * math.pi)
    w = trials * dens ** 2 / (ph * (1.0 - ph))

    theta = {name: getattr(base, name) for name in PARAM_NAMES}
    theta.update({k: float(v) for k, v in problem.init.items()
                  if k in free})

    def vec():
        return (theta["epsilon_star"], theta["alpha"], theta["beta"])

    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        f = _model(vec(), ns, eps, base.omega)
        J = _jacobian(vec(), f, ns, free, base.omega)
        A = J.T @ (w[:, None] * J)
        g = J.T @ (w * (y - f))
        if not np.all(np.isfinite(A)) or np.linalg.cond(A) > 1e12:
            raise FitError("degenerate design: singular information matrix")
        try:
            delta = np.linalg.solve(A, g)
        except np.linalg.LinAlgError:
            raise FitError("degenerate design: singular information matrix")
        if "alpha" in free:
            # keep alpha positive: halve any step that would cross zero
            i = free.index("alpha")
            guard = 0
            while theta["alpha"] + delta[i] <= 0.0:
                delta = delta / 2.0
                guard += 1
                if guard > 60:
                    raise FitError("no convergence: alpha driven to zero")
        for i, name in enumerate(free):
            theta[name] += delta[i]
        scale = max(abs(theta[name]) + 1e-3 for name in free)
        if np.max(np.abs(delta)) < 1e-12 * scale:
            converged = True
            break
    if not converged:
        raise FitError("no convergence after %d iterations" % max_iter)

    f = _model(vec(), ns, eps, base.omega)
    J = _jacobian(vec(), f, ns, free, base.omega)
    A = J.T @ (w[:, None] * J)
    if np.linalg.cond(A) > 1e12:
        raise FitError("degenerate design: singular information matrix")
    cov = np.linalg.inv(A)
    se = {name: math.sqrt(max(cov[i, i], 0.0)) for i, name in enumerate(free)}
    residual = float(np.sum(w * (y - f) ** 2))

    params = ScalingParams(theta["epsilon_star"], base.nu_star,
                           theta["alpha"], base.alpha_mode, theta["beta"],
                           base.omega, base.gamma)
    return FitResult(params, dict(theta), se, residual, dropped, iterations,
                     len(usable))
