"""Monte Carlo harness: (n, eps) sweeps on sampled graphs.

Failures are classified by residual size against gamma * nu_star * n: at the
critical point the decoder's large stalls concentrate near nu_star * n erased
variables while floor-type stalls stay O(1), so one relative cut separates the
regimes cleanly for n >= 512.

Every trial seed is counter-derived (see seeds.mix), so tallies merge exactly
across runs and worker scheduling cannot change the result.
"""
import struct
from concurrent.futures import ThreadPoolExecutor

from .cache import ResultCache, cache_root, config_hash
from .decoder import erase, peel
from .ensemble import critical_point
from .errors import FssError
from .graph import degree_counts, sample_graph
from .scaling import q_inverse
from .seeds import mix

Z95 = -q_inverse(0.975)  # two-sided 95% normal quantile

CSV_COLUMNS = ("ensemble,n,eps,mode,gamma,trials,large_failures,"
               "small_failures,bit_erasure_sum,pB_hat,pB_lo,pB_hi,pb_hat")


class ExperimentError(FssError):
    """Raised for invalid sweep configurations or unresolvable estimates."""


def wilson_interval(k, trials, z=Z95):
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ExperimentError("trials must be positive")
    z2 = z * z
    center = (k + z2 / 2.0) / (trials + z2)
    half = (z / (trials + z2)) * (k * (trials - k) / trials + z2 / 4.0) ** 0.5
    return max(0.0, center - half), min(1.0, center + half)


def _eps_key(channel, x):
    """Stable 64-bit identity of a grid value (float bit pattern or weight)."""
    if channel == "fixed_weight":
        return int(x)
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]


class SweepConfig:

    def __init__(self, e, ns, grid, trials, seed, gamma=0.1, channel="iid",
                 fresh_graph=True, trial_offset=0, max_ci_width=None):
        if trials < 1:
            raise ExperimentError("trials must be >= 1")
        if not 0.0 < gamma < 1.0:
            raise ExperimentError("gamma must be in (0,1)")
        if channel not in ("iid", "fixed_weight"):
            raise ExperimentError("channel must be iid or fixed_weight")
        if not ns or not grid:
            raise ExperimentError("need at least one n and one grid value")
        if channel == "iid" and not all(0.0 <= x <= 1.0 for x in grid):
            raise ExperimentError("iid grid values must be in [0,1]")
        if channel == "fixed_weight" and not all(int(x) >= 0 for x in grid):
            raise ExperimentError("fixed weights must be >= 0")
        if trial_offset < 0:
            raise ExperimentError("trial_offset must be >= 0")
        self.e = e
        self.ns = [int(n) for n in ns]
        self.grid = list(grid)
        self.trials = int(trials)
        self.seed = int(seed)
        self.gamma = float(gamma)
        self.channel = channel
        self.fresh_graph = bool(fresh_graph)
        self.trial_offset = int(trial_offset)
        self.max_ci_width = max_ci_width

    def cache_name(self):
        return config_hash({
            "ensemble": self.e.label(),
            "trials": self.trials,
            "seed": self.seed,
            "gamma": self.gamma,
            "channel": self.channel,
            "fresh_graph": self.fresh_graph,
            "trial_offset": self.trial_offset,
        })


class PointResult:
    """Raw tallies plus derived rates for one (n, eps-or-weight) grid point."""

    def __init__(self, n, x, trials, large, small, residual_sum,
                 large_residual_sum, hist):
        self.n = n
        self.x = x
        self.trials = trials
        self.large_failures = large
        self.small_failures = small
        self.residual_sum = residual_sum
        self.large_residual_sum = large_residual_sum
        self.hist = hist  # hist[i] counts failures with 2^i <= residual < 2^(i+1)
        self.pB_hat = large / trials
        self.pB_lo, self.pB_hi = wilson_interval(large, trials)
        self.pb_hat = residual_sum / (n * trials)
        self.flagged = False

    @property
    def failures(self):
        return self.large_failures + self.small_failures

    def to_record(self, key):
        return {"n": self.n, "k": key, "trials": self.trials,
                "large": self.large_failures, "small": self.small_failures,
                "rsum": self.residual_sum, "lrsum": self.large_residual_sum,
                "hist": self.hist}

    @staticmethod
    def from_record(rec, x):
        return PointResult(rec["n"], x, rec["trials"], rec["large"],
                           rec["small"], rec["rsum"], rec["lrsum"],
                           list(rec["hist"]))


class SweepResult:

    def __init__(self, config, nu_star, points):
        self.config = config
        self.nu_star = nu_star
        self.points = points
        self._index = {(p.n, _eps_key(config.channel, p.x)): p for p in points}

    def point(self, n, x):
        key = (int(n), _eps_key(self.config.channel, x))
        if key not in self._index:
            raise ExperimentError("no grid point (n=%s, %s)" % (n, x))
        return self._index[key]


def _tally_point(cfg, n, x, threshold, nbins):
    """Run cfg.trials seeded trials at one grid point and tally residuals."""
    point_seed = mix(mix(cfg.seed, n), _eps_key(cfg.channel, x))
    shared = None
    if not cfg.fresh_graph:
        shared = sample_graph(cfg.e, n, mix(mix(cfg.seed, n), 0))
    large = small = 0
    rsum = lrsum = 0
    hist = [0] * nbins
    for t in range(cfg.trial_offset, cfg.trial_offset + cfg.trials):
        ts = mix(point_seed, t)
        g = shared if shared is not None else sample_graph(cfg.e, n, mix(ts, 1))
        if cfg.channel == "iid":
            pat = erase(g, eps=x, seed=mix(ts, 2))
        else:
            pat = erase(g, weight=x, seed=mix(ts, 2))
        out = peel(g, pat, seed=mix(ts, 3))
        r = out.residual_size
        if r > 0:
            rsum += r
            hist[r.bit_length() - 1] += 1
            if r >= threshold:
                large += 1
                lrsum += r
            else:
                small += 1
    return PointResult(n, x, cfg.trials, large, small, rsum, lrsum, hist)


def run_sweep(cfg, cache="auto", threads=1):
    """Monte Carlo over the full (n, grid) product; resumable via the cache."""
    if cache == "auto":
        root = cache_root()
        cache = ResultCache(root) if root else None
    nu = critical_point(cfg.e).nu_star
    for n in cfg.ns:
        degree_counts(cfg.e, n)  # fail fast on unrealizable blocklengths

    name = cfg.cache_name() if cache else None
    known = {}
    if cache:
        for rec in cache.load(name):
            known[(rec["n"], rec["k"])] = rec

    jobs = [(n, x) for n in cfg.ns for x in cfg.grid]

    def solve(job):
        n, x = job
        key = _eps_key(cfg.channel, x)
        if (n, key) in known:
            return PointResult.from_record(known[(n, key)], x)
        threshold = cfg.gamma * nu * n
        nbins = max(1, int(n).bit_length())
        p = _tally_point(cfg, n, x, threshold, nbins)
        if cache:
            cache.append(name, p.to_record(key))
        return p

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(solve, jobs))
    else:
        points = [solve(job) for job in jobs]

    if cfg.max_ci_width is not None:
        for p in points:
            p.flagged = (p.pB_hi - p.pB_lo) > cfg.max_ci_width
    return SweepResult(cfg, nu, points)


def merge_sweeps(a, b):
    """Combine two sweeps over the same grid with disjoint trial windows."""
    ca, cb = a.config, b.config
    if (ca.e.label() != cb.e.label() or ca.ns != cb.ns or ca.grid != cb.grid
            or ca.gamma != cb.gamma or ca.channel != cb.channel
            or ca.seed != cb.seed or ca.fresh_graph != cb.fresh_graph):
        raise ExperimentError("sweeps differ in more than the trial window")
    lo, hi = (a, b) if ca.trial_offset <= cb.trial_offset else (b, a)
    if lo.config.trial_offset + lo.config.trials != hi.config.trial_offset:
        raise ExperimentError("trial windows are not adjacent")
    cfg = SweepConfig(ca.e, ca.ns, ca.grid, ca.trials + cb.trials, ca.seed,
                      ca.gamma, ca.channel, ca.fresh_graph,
                      lo.config.trial_offset, ca.max_ci_width)
    points = []
    for pa, pb in zip(lo.points, hi.points):
        hist = [u + v for u, v in zip(pa.hist, pb.hist)]
        points.append(PointResult(
            pa.n, pa.x, pa.trials + pb.trials,
            pa.large_failures + pb.large_failures,
            pa.small_failures + pb.small_failures,
            pa.residual_sum + pb.residual_sum,
            pa.large_residual_sum + pb.large_residual_sum, hist))
    return SweepResult(cfg, a.nu_star, points)


def residual_histogram(result, n, x):
    """Log-2 binned residual sizes at one point, plus the mean residual
    fraction over large failures (None when there were none)."""
    p = result.point(n, x)
    edges = [(1 << i, 1 << (i + 1)) for i in range(len(p.hist))]
    mean_frac = None
    if p.large_failures > 0:
        mean_frac = p.large_residual_sum / (p.n * p.large_failures)
    return edges, list(p.hist), mean_frac


class ThresholdEstimate:

    def __init__(self, n, estimate, bracket, probes, trials_used):
        self.n = n
        self.estimate = estimate
        self.bracket = bracket
        self.probes = probes
        self.trials_used = trials_used

    def __repr__(self):
        return "ThresholdEstimate(n=%d, estimate=%.6f, bracket=(%.6f, %.6f))" % (
            self.n, self.estimate, self.bracket[0], self.bracket[1])


def estimate_fl_threshold(e, n, trials_per_probe=10_000, tol=5e-4, seed=0,
                          gamma=0.1, bracket=None, budget=30):
    """Stochastic bisection for the eps where the large-failure rate is 1/2.

    Each probe adds trials_per_probe trials at the current midpoint; the
    bracket moves only when the accumulated Wilson interval excludes 0.5.
    Probes at an unchanged midpoint accumulate, so an ambiguous probe tightens
    the interval instead of being thrown away.
    """
    cp = critical_point(e)
    degree_counts(e, n)
    if bracket is None:
        bracket = (max(0.01, cp.epsilon_star - 0.08),
                   min(0.99, cp.epsilon_star + 0.04))
    lo, hi = bracket
    if not 0.0 <= lo < hi <= 1.0:
        raise ExperimentError("bad bracket")
    if budget < 1:
        raise ExperimentError("budget must be >= 1")
    threshold = gamma * cp.nu_star * n
    nbins = max(1, int(n).bit_length())
    acc_k = acc_t = 0
    offset = 0
    probes = 0
    while hi - lo >= tol:
        if probes == budget:
            raise ExperimentError(
                "budget exhausted: bracket (%.6f, %.6f) wider than tol %g"
                % (lo, hi, tol))
        mid = 0.5 * (lo + hi)
        cfg = SweepConfig(e, [n], [mid], trials_per_probe, seed, gamma,
                          trial_offset=offset)
        p = _tally_point(cfg, n, mid, threshold, nbins)
        probes += 1
        acc_k += p.large_failures
        acc_t += p.trials
        w_lo, w_hi = wilson_interval(acc_k, acc_t)
        if w_hi < 0.5:
            lo, acc_k, acc_t, offset = mid, 0, 0, 0
        elif w_lo > 0.5:
            hi, acc_k, acc_t, offset = mid, 0, 0, 0
        else:
            offset += trials_per_probe  # same midpoint, fresh trial window
    return ThresholdEstimate(n, 0.5 * (lo + hi), (lo, hi), probes,
                             probes * trials_per_probe)


def write_sweep_csv(result, path):
    """One row per grid point, columns per CSV_COLUMNS."""
    cfg = result.config
    with open(path, "w") as f:
        f.write(CSV_COLUMNS + "\n")
        for p in result.points:
            f.write("%s,%d,%.12g,%s,%.12g,%d,%d,%d,%d,%.12g,%.12g,%.12g,%.12g\n"
                    % (cfg.e.label(), p.n, p.x, cfg.channel, cfg.gamma,
                       p.trials, p.large_failures, p.small_failures,
                       p.residual_sum, p.pB_hat, p.pB_lo, p.pB_hi, p.pb_hat))


def read_sweep_csv(path):
    """Rows of the sweep CSV as dicts with numeric fields parsed."""
    rows = []
    with open(path) as f:
        header = f.readline().strip()
        if header != CSV_COLUMNS:
            raise ExperimentError("unexpected CSV header %r" % header)
        keys = CSV_COLUMNS.split(",")
        for line in f:
            line = line.strip()
            if not line:
                continue
            # irregular ensemble labels contain commas, so split from the right
            vals = line.rsplit(",", len(keys) - 1)
            if len(vals) != len(keys):
                raise ExperimentError("malformed CSV row %r" % line)
            row = dict(zip(keys, vals))
            row["n"] = int(row["n"])
            row["eps"] = float(row["eps"])
            row["gamma"] = float(row["gamma"])
            for k in ("trials", "large_failures", "small_failures",
                      "bit_erasure_sum"):
                row[k] = int(row[k])
            for k in ("pB_hat", "pB_lo", "pB_hi", "pb_hat"):
                row[k] = float(row[k])
            rows.append(row)
    return rows
