"""LDPC degree-distribution ensembles and their asymptotic quantities.

Degree distributions are edge-perspective polynomials p(x) = sum_i c_i x^(i-1).
Regular pairs (l, k) use node degrees: lambda(x) = x^(l-1), rho(x) = x^(k-1),
which is the convention the standard threshold/scaling tables correspond to.
"""

import math

from .errors import FssError

DEGREE_CAP = 10_000

# Coefficient sums off by more than this are user error, not rounding noise.
NORMALIZE_SLACK = 1e-9


class EnsembleError(FssError):
    pass


class DegreeDistribution:
    """Edge-perspective degree polynomial sum_i c_i x^(i-1).

    Coefficients must be nonnegative and sum to 1; sums within 1e-9 of 1 are
    renormalized, anything further off is rejected.
    """

    def __init__(self, pairs):
        seen = {}
        for d, c in pairs:
            if int(d) != d or d < 1:
                raise EnsembleError("degrees must be positive integers, got %r" % (d,))
            d = int(d)
            if d > DEGREE_CAP:
                raise EnsembleError("degree %d exceeds cap %d" % (d, DEGREE_CAP))
            if d in seen:
                raise EnsembleError("duplicate degree %d" % d)
            c = float(c)
            if c < 0:
                raise EnsembleError("negative coefficient at degree %d" % d)
            if c > 0:
                seen[d] = c
        if not seen:
            raise EnsembleError("empty degree distribution")
        total = math.fsum(seen.values())
        if abs(total - 1.0) > NORMALIZE_SLACK:
            raise EnsembleError("coefficients sum to %.12g, not 1" % total)
        self.degrees = tuple(sorted(seen))
        self.coeffs = tuple(seen[d] / total for d in self.degrees)
        if self.degrees[-1] < 2:
            raise EnsembleError("maximum degree must be at least 2")
        # single-term distributions (every regular ensemble) are by far the
        # hottest __call__ case inside the de_evolve loop; special-case them
        self._mono = (self.coeffs[0], self.degrees[0] - 1) \
            if len(self.degrees) == 1 else None

    @property
    def min_degree(self):
        return self.degrees[0]

    @property
    def max_degree(self):
        return self.degrees[-1]

    def __call__(self, x):
        if self._mono is not None:
            c, p = self._mono
            return c * x ** p
        return math.fsum(c * x ** (d - 1) for d, c in zip(self.degrees, self.coeffs))

    def derivative(self, x):
        return math.fsum(
            c * (d - 1) * x ** (d - 2) for d, c in zip(self.degrees, self.coeffs) if d >= 2
        )

    def integral(self):
        """int_0^1 p(u) du = sum_i c_i / i."""
        return math.fsum(c / d for d, c in zip(self.degrees, self.coeffs))

    def integral_to(self, x):
        """int_0^x p(u) du."""
        return math.fsum(c * x ** d / d for d, c in zip(self.degrees, self.coeffs))

    def node_fractions(self):
        """Node-perspective fractions: (c_i / i) normalized to sum 1."""
        z = self.integral()
        return {d: (c / d) / z for d, c in zip(self.degrees, self.coeffs)}

    def __eq__(self, other):
        return (
            isinstance(other, DegreeDistribution)
            and self.degrees == other.degrees
            and self.coeffs == other.coeffs
        )

    def __repr__(self):
        return "DegreeDistribution(%s)" % (
            ", ".join("%d:%g" % (d, c) for d, c in zip(self.degrees, self.coeffs))
        )


class Ensemble:
    """A pair (lambda, rho) of edge-perspective degree distributions."""

    def __init__(self, lam, rho):
        self.lam = lam
        self.rho = rho
        # edges per variable node = 1 / int(lambda); checks per variable = int(rho)/int(lambda)
        self.check_fraction = rho.integral() / lam.integral()
        self.design_rate = 1.0 - self.check_fraction
        if not 0.0 < self.design_rate < 1.0:
            raise EnsembleError("nonpositive design rate %.6g" % self.design_rate)
        self.l_min = lam.min_degree
        self.k_max = rho.max_degree
        self.unconditionally_stable = self.l_min >= 3

    def L(self, x):
        """Node-perspective variable generating function, L(1) = 1."""
        return self.lam.integral_to(x) / self.lam.integral()

    def var_edge_avg(self):
        """Average variable node degree = edges per variable."""
        return 1.0 / self.lam.integral()

    def check_edge_avg(self):
        """Average check node degree."""
        return 1.0 / self.rho.integral()

    def label(self):
        if len(self.lam.degrees) == 1 and len(self.rho.degrees) == 1:
            return "%d,%d" % (self.lam.degrees[0], self.rho.degrees[0])
        lam = ",".join("%d:%g" % p for p in zip(self.lam.degrees, self.lam.coeffs))
        rho = ",".join("%d:%g" % p for p in zip(self.rho.degrees, self.rho.coeffs))
        return lam + "/" + rho

    def __eq__(self, other):
        return (
            isinstance(other, Ensemble) and self.lam == other.lam and self.rho == other.rho
        )

    def __repr__(self):
        return "Ensemble(%s)" % self.label()


class CriticalPoint:
    """Threshold tangency data: (epsilon*, x*, y*, nu*)."""

    def __init__(self, epsilon_star, x_star, y_star, nu_star):
        self.epsilon_star = epsilon_star
        self.x_star = x_star
        self.y_star = y_star
        self.nu_star = nu_star

    def __repr__(self):
        return "CriticalPoint(eps*=%.8f, x*=%.8f, y*=%.8f, nu*=%.8f)" % (
            self.epsilon_star,
            self.x_star,
            self.y_star,
            self.nu_star,
        )


def make_regular(l, k):
    """Regular ensemble with variable node degree l and check node degree k."""
    if int(l) != l or int(k) != k:
        raise EnsembleError("regular degrees must be integers")
    if l < 2:
        raise EnsembleError("variable degree must be at least 2")
    if l >= k:
        raise EnsembleError("nonpositive design rate: need l < k")
    return Ensemble(DegreeDistribution([(l, 1.0)]), DegreeDistribution([(k, 1.0)]))


def parse_distribution(text):
    """Parse 'degree:coeff,degree:coeff,...' into a DegreeDistribution."""
    pairs = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            d, c = item.split(":")
            pairs.append((int(d), float(c)))
        except ValueError:
            raise EnsembleError("bad degree:coefficient pair %r" % item)
    return DegreeDistribution(pairs)


def parse_ensemble(text):
    """Parse an ensemble description.

    'l,k' (two integers) gives the regular ensemble; 'LAM/RHO' where each side
    is a degree:coeff list gives an irregular one, e.g. '2:0.5,3:0.5/6:1.0'.
    """
    text = text.strip()
    if "/" in text:
        lam_text, rho_text = text.split("/", 1)
        return Ensemble(parse_distribution(lam_text), parse_distribution(rho_text))
    parts = text.split(",")
    if len(parts) == 2:
        try:
            l, k = int(parts[0]), int(parts[1])
        except ValueError:
            raise EnsembleError("bad regular ensemble %r, want 'l,k'" % text)
        return make_regular(l, k)
    raise EnsembleError("bad ensemble description %r" % text)


def de_evolve(e, eps, tol=1e-12, max_iter=10**6):
    """Iterate x <- eps * lambda(1 - rho(1 - x)) from x = eps; return the limit.

    The iteration decreases monotonically from x = eps, so it always
    converges; near the threshold it slows down through the tangency
    bottleneck, which is what max_iter guards.
    """
    if not 0.0 <= eps <= 1.0:
        raise EnsembleError("eps must be in [0,1]")
    lam, rho = e.lam, e.rho
    x = eps
    for _ in range(max_iter):
        xn = eps * lam(1.0 - rho(1.0 - x))
        if abs(xn - x) < tol:
            return xn
        x = xn
    return x


# de_evolve limits below threshold collapse superexponentially once small
# (l_min >= 3), so anything above this cutoff is a genuine nonzero fixed point.
_DE_POSITIVE = 1e-6


def de_threshold(e, tol=1e-7):
    """Bisection threshold: largest eps with de_evolve limit 0."""
    if tol <= 0:
        raise EnsembleError("tol must be positive")
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if de_evolve(e, mid) > _DE_POSITIVE:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _tangency_gap(e, x):
    """lambda(y) - x * lambda'(y) * rho'(1-x) with y = 1 - rho(1-x).

    Zero exactly where eps(x) = x / lambda(y) is stationary; the sign flips
    from - to + across a local minimum of eps(x).
    """
    y = 1.0 - e.rho(1.0 - x)
    return e.lam(y) - x * e.lam.derivative(y) * e.rho.derivative(1.0 - x)


_SCAN_POINTS = 10_000


def critical_point(e, tol=1e-12):
    """Solve the threshold tangency for (eps*, x*, y*, nu*).

    eps(x) = x / lambda(1 - rho(1 - x)) is scanned on a fixed grid; a single
    interior minimum is required, then polished by bisection on the
    stationarity condition.
    """
    if not e.unconditionally_stable:
        raise EnsembleError("not unconditionally stable")
    lam, rho = e.lam, e.rho

    def eps_of(x):
        return x / lam(1.0 - rho(1.0 - x))

    xs = [i / _SCAN_POINTS for i in range(1, _SCAN_POINTS)]
    hs = [eps_of(x) for x in xs]
    minima = [
        i
        for i in range(1, len(xs) - 1)
        if hs[i] < hs[i - 1] and hs[i] <= hs[i + 1]
    ]
    if len(minima) > 1:
        raise EnsembleError("multiple critical points")
    if not minima:
        raise EnsembleError("no interior critical point found")
    i = minima[0]

    lo, hi = xs[i - 1], xs[i + 1]
    glo = _tangency_gap(e, lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = _tangency_gap(e, mid)
        if (gm < 0) == (glo < 0):
            lo, glo = mid, gm
        else:
            hi = mid
        if hi - lo < tol:
            break
    x_star = 0.5 * (lo + hi)
    eps_star = eps_of(x_star)
    y_star = 1.0 - rho(1.0 - x_star)
    nu_star = eps_star * e.L(y_star)
    return CriticalPoint(eps_star, x_star, y_star, nu_star)
