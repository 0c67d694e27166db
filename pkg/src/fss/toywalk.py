"""One-dimensional biased walk probing the finite-size correction exponents.

The walk starts at x(0) = n/8 and drifts along the parabola
x_av(l) = (l - l*)^2 / (2n) + const with l* = n/2: steps are +-1 with
P(+1) = 1/2 + (l - l*)/(2n).  A trial fails when x touches zero (first
passage).  Failure probability approaches 1/2 from above like n^(-1/6); for
surviving trials the minimum sits |l_g - l*| = O(n^(2/3)) away from l* at
depth x(l*) - x(l_g) = O(n^(1/3)).
"""
import math

import numpy as np
from numba import njit

from .errors import FssError
from .experiment import wilson_interval
from .seeds import mix

_U = np.uint64
_GAMMA = _U(0x9E3779B97F4A7C15)
_MIX1 = _U(0xBF58476D1CE4E5B9)
_MIX2 = _U(0x94D049BB133111EB)
_S30 = _U(30)
_S27 = _U(27)
_S31 = _U(31)
_S11 = _U(11)


class ToyWalkError(FssError):
    """Raised for invalid walk configurations or unresolvable fits."""


class WalkConfig:
    """Walk scale n with derived geometry: l* = n/2, horizon n, x0 = n/8."""

    def __init__(self, n, trials, seed):
        n = int(n)
        if n < 8:
            raise ToyWalkError("n must be >= 8 so that x(0) >= 1")
        if trials < 1:
            raise ToyWalkError("trials must be >= 1")
        self.n = n
        self.trials = int(trials)
        self.seed = int(seed)
        self.lstar = n // 2
        self.horizon = n
        self.x0 = int(round(n / 8.0))


class WalkResult:

    def __init__(self, cfg, failures, lg_offsets, depths, checkpoint_means):
        self.n = cfg.n
        self.trials = cfg.trials
        self.failures = int(failures)
        self.p_hat = failures / cfg.trials
        self.ci_lo, self.ci_hi = wilson_interval(failures, cfg.trials)
        self.lg_offsets = lg_offsets
        self.depths = depths
        self.survivors = int(lg_offsets.size)
        self.median_lg_offset = float(np.median(lg_offsets)) if lg_offsets.size else math.nan
        self.median_depth = float(np.median(depths)) if depths.size else math.nan
        self.checkpoint_means = checkpoint_means

    def __repr__(self):
        return "WalkResult(n=%d, p_hat=%.4f, median_lg_offset=%g, median_depth=%g)" % (
            self.n, self.p_hat, self.median_lg_offset, self.median_depth)


@njit(cache=True)
def _walk_kernel(n, lstar, x0, thr, trials, seed, absorb,
                 lg_out, depth_out, cksum, ckpts):
    failures = 0
    survivors = 0
    for t in range(trials):
        state = seed + _GAMMA * _U(t + 1)
        z = state
        z = (z ^ (z >> _S30)) * _MIX1
        z = (z ^ (z >> _S27)) * _MIX2
        state = z ^ (z >> _S31)  # per-trial stream seed, then walk below
        x = x0
        xmin = x0
        lmin = 0
        xstar = -1
        failed = False
        for l in range(n):
            state = state + _GAMMA
            z = state
            z = (z ^ (z >> _S30)) * _MIX1
            z = (z ^ (z >> _S27)) * _MIX2
            z = z ^ (z >> _S31)
            if (z >> _S11) < thr[l]:
                x += 1
            else:
                x -= 1
            if x < xmin:
                xmin = x
                lmin = l + 1
            if l + 1 == lstar:
                xstar = x
            if x <= 0:
                failed = True
                if absorb:
                    break
            for k in range(ckpts.size):
                if l + 1 == ckpts[k]:
                    cksum[k] += x
        if failed:
            failures += 1
        else:
            off = lmin - lstar
            lg_out[survivors] = off if off >= 0 else -off
            depth_out[survivors] = xstar - xmin
            survivors += 1
    return failures, survivors


def walk_simulate(cfg, absorb=True, checkpoints=()):
    """Run cfg.trials walks; failure = first passage to zero.

    With absorb=False walks continue through zero (still counted as failed),
    which makes the unconditioned drift testable via `checkpoints`: the mean
    of x at those steps is accumulated over all trials.
    """
    p = 0.5 + (np.arange(cfg.n) - cfg.lstar) / (2.0 * cfg.n)
    p = np.clip(p, 0.0, 1.0)
    thr = np.rint(p * 2.0 ** 53).astype(np.uint64)
    ckpts = np.asarray(sorted(checkpoints), dtype=np.int64)
    if ckpts.size and (ckpts.min() < 1 or ckpts.max() > cfg.n):
        raise ToyWalkError("checkpoints must lie in [1, n]")
    lg_out = np.empty(cfg.trials, np.int64)
    depth_out = np.empty(cfg.trials, np.int64)
    cksum = np.zeros(max(ckpts.size, 1), np.int64)
    failures, survivors = _walk_kernel(
        cfg.n, cfg.lstar, cfg.x0, thr, cfg.trials,
        _U(cfg.seed & 0xFFFFFFFFFFFFFFFF), absorb,
        lg_out, depth_out, cksum, ckpts)
    means = None
    if ckpts.size:
        means = {int(l): cksum[i] / cfg.trials for i, l in enumerate(ckpts)}
    return WalkResult(cfg, failures, lg_out[:survivors].copy(),
                      depth_out[:survivors].copy(), means)


def walk_exponent_fit(points):
    """Weighted log-log fit of (p_hat - 1/2) against n.

    points: (n, p_hat, trials) triples, at least 4, each with p_hat - 1/2
    resolved at 3 sigma.  Returns (slope, stderr).
    """
    if len(points) < 4:
        raise ToyWalkError("need at least 4 grid points, got %d" % len(points))
    xs, ys, ws = [], [], []
    for n, p_hat, trials in points:
        se = math.sqrt(p_hat * (1.0 - p_hat) / trials)
        excess = p_hat - 0.5
        if excess <= 3.0 * se:
            raise ToyWalkError(
                "unresolved: p_hat - 1/2 = %.3g at n = %d is within 3 sigma "
                "(%.3g)" % (excess, n, 3.0 * se))
        xs.append(math.log(n))
        ys.append(math.log(excess))
        ws.append((excess / se) ** 2)  # Var(log excess) = (se/excess)^2
    xs, ys, ws = np.array(xs), np.array(ys), np.array(ws)
    W = ws.sum()
    xbar = (ws * xs).sum() / W
    ybar = (ws * ys).sum() / W
    sxx = (ws * (xs - xbar) ** 2).sum()
    slope = (ws * (xs - xbar) * (ys - ybar)).sum() / sxx
    return slope, math.sqrt(1.0 / sxx)


def fit_power(ns, values):
    """Unweighted log-log slope of values against ns (medians etc.)."""
    xs = np.log(np.asarray(ns, dtype=float))
    ys = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(xs, ys, 1)[0])


def write_walk_csv(results, path):
    """CSV columns: n,trials,failures,p_hat,ci_lo,ci_hi,median_lg_offset,median_depth"""
    with open(path, "w") as f:
        f.write("n,trials,failures,p_hat,ci_lo,ci_hi,median_lg_offset,"
                "median_depth\n")
        for r in results:
            f.write("%d,%d,%d,%.12g,%.12g,%.12g,%.12g,%.12g\n"
                    % (r.n, r.trials, r.failures, r.p_hat, r.ci_lo, r.ci_hi,
                       r.median_lg_offset, r.median_depth))
