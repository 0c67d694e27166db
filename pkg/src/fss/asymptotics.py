"""Mean and covariance evolution of the peeling process; the scaling parameter alpha.

The peeling chain is tracked through the exact per-degree profile: v_d is the
fraction of undecoded variables of node degree d and r_j the fraction of edges
attached to checks of residual degree j, both normalized by n.  One step of
the decoder removes a uniformly chosen degree-one check together with its
variable; the expected increment gives the mean ODE dz/dtau = f(z), and the
increment covariance B together with the Jacobian A = df/dz drives covariance
evolution dGamma/dtau = A Gamma + Gamma A^T + B.  The classic 3-coordinate
description (v, s, t) is the projection s = r_1, t = sum_{j>=2} r_j / j.
"""

import math

import numpy as np

from .ensemble import critical_point
from .errors import FssError


class AsymptoticsError(FssError):
    pass


# stop integrating once fewer than this fraction of variables remains
ETA = 1e-9

# central finite-difference step for the Jacobian A = df/dz
FD_STEP = 1e-6

# covariance matrices may dip this far below PSD before we flag them
PSD_TOL = -1e-9

MODES = ("conditional", "binomial")


class ProfileState:
    """Mean profile at one time: tau, per-degree v, residual-degree r."""

    __slots__ = ("tau", "v", "r")

    def __init__(self, tau, v, r):
        self.tau = tau
        self.v = v
        self.r = r

    @property
    def v_total(self):
        return float(self.v.sum())

    @property
    def s(self):
        """Edge fraction at degree-one checks (one edge per such check)."""
        return float(self.r[0])

    @property
    def t(self):
        """Fraction of check nodes with residual degree >= 2."""
        j = np.arange(1, len(self.r) + 1)
        return float((self.r[1:] / j[1:]).sum())

    def __repr__(self):
        return "ProfileState(tau=%.6f, v=%.6f, s=%.6g, t=%.6f)" % (
            self.tau, self.v_total, self.s, self.t,
        )


class CovarianceState:
    """Symmetric positive-semidefinite profile covariance (times n)."""

    __slots__ = ("gamma",)

    def __init__(self, gamma):
        self.gamma = gamma

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.gamma).min())


class MeanResult:
    def __init__(self, states, status):
        self.states = states
        self.status = status

    def __iter__(self):
        return iter(self.states)

    def __len__(self):
        return len(self.states)


class CovarianceResult(MeanResult):
    def __init__(self, states, gammas, status, tau_star, sigma_star, gamma_star, min_eig):
        MeanResult.__init__(self, states, status)
        self.gammas = gammas
        self.tau_star = tau_star
        self.sigma_star = sigma_star
        self.gamma_star = gamma_star
        self.min_eig = min_eig

    @property
    def psd_ok(self):
        return self.min_eig >= PSD_TOL


class AlphaResult:
    def __init__(self, alpha, mode, epsilon_star, nu_star, tau_star, sigma_star, c):
        self.alpha = alpha
        self.mode = mode
        self.epsilon_star = epsilon_star
        self.nu_star = nu_star
        self.tau_star = tau_star
        self.sigma_star = sigma_star
        self.c = c

    def __repr__(self):
        return "AlphaResult(alpha=%.6f, mode=%s)" % (self.alpha, self.mode)


class _System:
    """Precomputed arrays for one ensemble: degrees, node fractions, binomials."""

    def __init__(self, e):
        self.e = e
        nf = e.lam.node_fractions()
        self.dv = np.array(sorted(nf), dtype=float)
        self.Lam = np.array([nf[d] for d in sorted(nf)])
        cf = e.rho.node_fractions()
        self.dc = sorted(cf)
        self.Pd = np.array([cf[d] for d in self.dc])
        self.kmax = e.k_max
        self.jr = np.arange(1, self.kmax + 1, dtype=float)
        self.mn = e.check_fraction          # m/n
        self.dbar = 1.0 / e.lam.integral()  # edges per variable node
        self.nd = len(self.dv)
        self.dim = self.nd + self.kmax
        # binomial coefficients C(delta, j) per check degree
        self.choose = {d: np.array([math.comb(d, j) for j in range(d + 1)], dtype=float)
                       for d in self.dc}

    # ----- initial profile and covariance -----

    def rbar(self, pi):
        """Mean r_j(0) when each check socket is held with probability pi."""
        r = np.zeros(self.kmax)
        for d, P in zip(self.dc, self.Pd):
            j = np.arange(d + 1)
            b = self.choose[d] * pi ** j * (1.0 - pi) ** (d - j)
            r[: d] += self.mn * P * j[1:] * b[1:]
        return r

    def drbar(self, pi):
        """d rbar / d pi, used for the erasure-count variance term."""
        g = np.zeros(self.kmax)
        for d, P in zip(self.dc, self.Pd):
            j = np.arange(d + 1)
            db = self.choose[d] * (
                j * pi ** np.maximum(j - 1, 0) * (1.0 - pi) ** (d - j)
                - (d - j) * pi ** j * (1.0 - pi) ** np.maximum(d - j - 1, 0)
            )
            g[: d] += self.mn * P * j[1:] * db[1:]
        return g

    def gamma_socket(self, pi):
        """Covariance of r when check sockets are held independently w.p. pi."""
        G = np.zeros((self.kmax, self.kmax))
        for d, P in zip(self.dc, self.Pd):
            j = np.arange(d + 1)
            b = self.choose[d] * pi ** j * (1.0 - pi) ** (d - j)
            jb = (j[1:] * b[1:])
            G[: d, : d] += self.mn * P * (np.diag(j[1:] ** 2 * b[1:]) - np.outer(jb, jb))
        return G

    def initial(self, eps, mode):
        if mode not in MODES:
            raise AsymptoticsError("unknown mode %r, want one of %s" % (mode, MODES))
        z = np.empty(self.dim)
        z[: self.nd] = eps * self.Lam
        z[self.nd:] = self.rbar(eps)

        q = eps * (1.0 - eps)
        gr = self.drbar(eps)
        # socket occupancy given the exact occupied-socket count: condition the
        # independent-socket covariance on its total
        Gs = self.gamma_socket(eps)
        s = Gs.sum(axis=1)
        chyp = Gs - np.outer(s, s) / (self.dbar * q)

        G = np.zeros((self.dim, self.dim))
        # variable side given the exact erasure count: hypergeometric across
        # degree classes
        G[: self.nd, : self.nd] = q * (np.diag(self.Lam) - np.outer(self.Lam, self.Lam))
        # the occupied-socket count still fluctuates with the degree mix
        cov_v_es = q * self.Lam * (self.dv - self.dbar)   # cov(v_d, sockets/n)
        G[: self.nd, self.nd:] = np.outer(cov_v_es / self.dbar, gr)
        G[self.nd:, : self.nd] = G[: self.nd, self.nd:].T
        var_l = float(self.Lam @ self.dv ** 2) - self.dbar ** 2
        G[self.nd:, self.nd:] = chyp + (q * var_l / self.dbar ** 2) * np.outer(gr, gr)

        if mode == "binomial":
            # add the variance of the erasure count itself
            g = np.empty(self.dim)
            g[: self.nd] = self.Lam
            g[self.nd:] = gr
            G = G + q * np.outer(g, g)
        return z, 0.5 * (G + G.T)

    # ----- drift, increment covariance, Jacobian -----

    def f(self, z):
        v = z[: self.nd]
        r = z[self.nd:]
        ev = float(self.dv @ v)
        er = float(r.sum())
        p = self.dv * v / ev
        abar = float(p @ (self.dv - 1.0))
        q = r / er
        qup = np.append(q[1:], 0.0)
        u = self.jr * (qup - q)
        out = np.empty(self.dim)
        out[: self.nd] = -p
        out[self.nd:] = abar * u
        out[self.nd] -= 1.0
        return out

    def B(self, z):
        v = z[: self.nd]
        r = z[self.nd:]
        ev = float(self.dv @ v)
        er = float(r.sum())
        p = self.dv * v / ev
        abar = float(p @ (self.dv - 1.0))
        var_d = float(p @ self.dv ** 2) - float(p @ self.dv) ** 2
        q = r / er
        qup = np.append(q[1:], 0.0)
        u = self.jr * (qup - q)

        # companion-edge single-step second moments
        S = np.diag(self.jr ** 2 * (q + qup))
        off = -self.jr[:-1] * self.jr[1:] * q[1:]
        S += np.diag(off, 1) + np.diag(off, -1)

        B = np.zeros((self.dim, self.dim))
        B[: self.nd, : self.nd] = np.diag(p) - np.outer(p, p)
        bvr = -np.outer(p * (self.dv - 1.0 - abar), u)
        B[: self.nd, self.nd:] = bvr
        B[self.nd:, : self.nd] = bvr.T
        B[self.nd:, self.nd:] = abar * (S - np.outer(u, u)) + var_d * np.outer(u, u)
        return B

    def A(self, z):
        n = self.dim
        A = np.empty((n, n))
        for i in range(n):
            zp = z.copy()
            zm = z.copy()
            zp[i] += FD_STEP
            zm[i] -= FD_STEP
            A[:, i] = (self.f(zp) - self.f(zm)) / (2.0 * FD_STEP)
        return A


def _rk4_mean(sys_, z, h):
    k1 = sys_.f(z)
    k2 = sys_.f(z + 0.5 * h * k1)
    k3 = sys_.f(z + 0.5 * h * k2)
    k4 = sys_.f(z + h * k3)
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4_joint(sys_, z, G, h):
    def dG(zz, GG):
        A = sys_.A(zz)
        return A @ GG + GG @ A.T + sys_.B(zz)

    k1 = sys_.f(z)
    K1 = dG(z, G)
    z2 = z + 0.5 * h * k1
    G2 = G + 0.5 * h * K1
    k2 = sys_.f(z2)
    K2 = dG(z2, G2)
    z3 = z + 0.5 * h * k2
    G3 = G + 0.5 * h * K2
    k3 = sys_.f(z3)
    K3 = dG(z3, G3)
    z4 = z + h * k3
    G4 = G + h * K3
    k4 = sys_.f(z4)
    K4 = dG(z4, G4)
    zn = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    Gn = G + (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)
    return zn, 0.5 * (Gn + Gn.T)


# integration stops `_POST_DIP` steps after the running minimum of r1 when the
# caller only needs the dip (the tangency region is quadratic, so a handful of
# points past the vertex pins the parabola)
_POST_DIP = 16


def _integrate(sys_, eps, step, mode=None, past_dip=False):
    """Shared engine.  mode=None integrates the mean only; otherwise the
    covariance rides along.  past_dip=True ignores the r1 <= 0 stop and runs
    until the dip of r1 has clearly formed (used by alpha near threshold,
    where the dip value may be slightly negative)."""
    z, G = sys_.initial(eps, mode or "conditional")
    if mode is None:
        G = None
    taus = [0.0]
    zs = [z]
    gs = [G]
    min_eig = np.inf
    status = "decoded"
    tau = 0.0
    i_min = 0
    r1_min = z[sys_.nd]
    k = 0
    while True:
        if z[: sys_.nd].sum() <= ETA:
            status = "decoded"
            break
        if tau >= eps - 1e-12:
            status = "decoded"
            break
        if not past_dip and z[sys_.nd] <= 0.0:
            status = "stalled"
            break
        if past_dip and k - i_min >= _POST_DIP:
            status = "dip"
            break
        if G is None:
            z = _rk4_mean(sys_, z, step)
        else:
            z, G = _rk4_joint(sys_, z, G, step)
            ev = float(np.linalg.eigvalsh(G).min())
            if ev < min_eig:
                min_eig = ev
        tau += step
        k += 1
        taus.append(tau)
        zs.append(z)
        gs.append(G)
        if z[sys_.nd] < r1_min:
            r1_min = z[sys_.nd]
            i_min = k
    return taus, zs, gs, status, i_min, min_eig


def _parabola_min(x0, y0, y1, y2, h):
    """Vertex of the parabola through (x0, y0), (x0+h, y1), (x0+2h, y2)."""
    denom = y0 - 2.0 * y1 + y2
    if denom <= 0.0:
        return x0 + h, y1
    delta = 0.5 * (y0 - y2) / denom          # vertex offset from the middle, in h
    xv = x0 + h * (1.0 + delta)
    yv = y1 - 0.125 * (y0 - y2) ** 2 / denom
    return xv, yv


def _dip(taus, zs, nd):
    """First interior local minimum of r1, parabola-refined.

    Below threshold the trajectory also drives r1 to zero at the very end of
    decoding, so the global minimum would pick up that harmless endpoint; the
    critical dip is always the first interior local minimum.  Returns
    (tau, value, index), or (None, None, None) when r1 has no interior dip.
    """
    r1 = [z[nd] for z in zs]
    for i in range(1, len(r1) - 1):
        if r1[i] <= r1[i - 1] and r1[i] < r1[i + 1]:
            h = taus[i] - taus[i - 1]
            tv, rv = _parabola_min(taus[i - 1], r1[i - 1], r1[i], r1[i + 1], h)
            return tv, rv, i
    return None, None, None


def _interp3(taus, ys, i, tau_at):
    """Quadratic interpolation of ys through points i-1, i, i+1."""
    t = np.array(taus[i - 1: i + 2])
    y = np.array(ys[i - 1: i + 2])
    c = np.polyfit(t - t[1], y, 2)
    return float(np.polyval(c, tau_at - t[1]))


def initial_state(e, eps, mode="conditional"):
    """Profile and covariance at tau = 0."""
    if not 0.0 < eps <= 1.0:
        raise AsymptoticsError("eps must be in (0,1]")
    if mode not in MODES:
        raise AsymptoticsError("unknown mode %r, want one of %s" % (mode, MODES))
    sys_ = _System(e)
    if eps == 1.0:
        # nothing removed by the channel: deterministic start, zero covariance
        z = np.empty(sys_.dim)
        z[: sys_.nd] = sys_.Lam
        z[sys_.nd:] = sys_.rbar(1.0)
        return ProfileState(0.0, z[: sys_.nd], z[sys_.nd:]), CovarianceState(
            np.zeros((sys_.dim, sys_.dim)))
    z, G = sys_.initial(eps, mode)
    return ProfileState(0.0, z[: sys_.nd], z[sys_.nd:]), CovarianceState(G)


def mean_evolution(e, eps, step=1e-4):
    """Integrate the mean profile ODE; status is 'decoded' or 'stalled'."""
    if not 0.0 < eps < 1.0:
        raise AsymptoticsError("eps must be in (0,1)")
    if step <= 0.0:
        raise AsymptoticsError("step must be positive")
    sys_ = _System(e)
    taus, zs, _, status, _, _ = _integrate(sys_, eps, step)
    states = [ProfileState(t, z[: sys_.nd], z[sys_.nd:]) for t, z in zip(taus, zs)]
    return MeanResult(states, status)


def covariance_evolution(e, eps, step=1e-4, mode="conditional"):
    """Joint mean + covariance integration.

    Returns the trajectory plus the covariance at the interior dip of the mean
    r1 (tau_star); sigma_star is the standard deviation of the s-projection
    there.  When the trajectory has no interior dip, those fields are None.
    """
    if not 0.0 < eps < 1.0:
        raise AsymptoticsError("eps must be in (0,1)")
    if step <= 0.0:
        raise AsymptoticsError("step must be positive")
    if mode not in MODES:
        raise AsymptoticsError("unknown mode %r, want one of %s" % (mode, MODES))
    sys_ = _System(e)
    taus, zs, gs, status, _, min_eig = _integrate(sys_, eps, step, mode=mode)
    states = [ProfileState(t, z[: sys_.nd], z[sys_.nd:]) for t, z in zip(taus, zs)]
    gammas = [CovarianceState(G) for G in gs]
    tau_star, _, i_dip = _dip(taus, zs, sys_.nd)
    sigma_star = gamma_star = None
    if tau_star is not None:
        i1 = sys_.nd  # index of r1 in the state vector
        gss = [G[i1, i1] for G in gs]
        var_s = _interp3(taus, gss, i_dip, tau_star)
        sigma_star = math.sqrt(max(var_s, 0.0))
        gamma_star = gs[i_dip]
    return CovarianceResult(states, gammas, status, tau_star, sigma_star, gamma_star, min_eig)


def _dip_value(sys_, eps, step):
    taus, zs, _, _, _, _ = _integrate(sys_, eps, step, past_dip=True)
    value = _dip(taus, zs, sys_.nd)[1]
    if value is None:
        raise AsymptoticsError("no interior dip of r1 at eps = %g" % eps)
    return value


def alpha(e, mode="conditional", step=1e-4, delta=1e-4):
    """Scaling parameter alpha = sigma*/c at the ensemble threshold.

    sigma* is the standard deviation of the s-projection at the critical time
    (from covariance evolution at eps*); c = -d(dip of mean r1)/d(eps),
    estimated by central differences at eps* +- delta with one Richardson step.
    """
    if mode not in MODES:
        raise AsymptoticsError("unknown mode %r, want one of %s" % (mode, MODES))
    cp = critical_point(e)
    eps_star = cp.epsilon_star
    sys_ = _System(e)

    taus, zs, gs, _, _, min_eig = _integrate(sys_, eps_star, step, mode=mode, past_dip=True)
    if min_eig < PSD_TOL:
        raise AsymptoticsError(
            "covariance lost positive semidefiniteness (min eigenvalue %.3g)" % min_eig)
    tau_star, _, i_dip = _dip(taus, zs, sys_.nd)
    if tau_star is None:
        raise AsymptoticsError("no interior dip of r1 at eps*")
    i1 = sys_.nd
    gss = [G[i1, i1] for G in gs]
    sigma_star = math.sqrt(max(_interp3(taus, gss, i_dip, tau_star), 0.0))

    def cdiff(d):
        lo = _dip_value(sys_, eps_star - d, step)
        hi = _dip_value(sys_, eps_star + d, step)
        return (lo - hi) / (2.0 * d)

    c1 = cdiff(delta)
    c2 = cdiff(0.5 * delta)
    c = (4.0 * c2 - c1) / 3.0
    if abs(c) < 1e-6:
        raise AsymptoticsError("degenerate: |c| = %.3g < 1e-6" % abs(c))
    return AlphaResult(sigma_star / c, mode, eps_star, cp.nu_star, tau_star, sigma_star, c)
