"""Configuration-model sampling of Tanner multigraphs.

Node-degree sequences are fixed by largest-remainder rounding of the
ensemble's node-perspective fractions; the check side gets a per-degree +-1
repair so the two socket totals match exactly.  Sockets are then paired by a
seeded uniform permutation; parallel edges are kept.
"""
import numpy as np

from .errors import FssError


class GraphError(FssError):
    """Raised for unrealizable degree sequences or malformed dumps."""


class TannerGraph:
    """Immutable bipartite multigraph in CSR form on both sides.

    var_adj[var_ptr[v]:var_ptr[v+1]] lists the check endpoint of each of v's
    sockets; chk_adj is the mirror image.  Edge i (in dump order) joins
    var_of_socket(i) to var_adj[i].
    """

    def __init__(self, n, m, seed, var_deg, chk_deg, var_adj, chk_adj):
        self.n = int(n)
        self.m = int(m)
        self.seed = int(seed)
        self.var_deg = var_deg
        self.chk_deg = chk_deg
        self.var_ptr = np.concatenate([[0], np.cumsum(var_deg)]).astype(np.int64)
        self.chk_ptr = np.concatenate([[0], np.cumsum(chk_deg)]).astype(np.int64)
        self.var_adj = var_adj
        self.chk_adj = chk_adj

    @property
    def E(self):
        return int(self.var_ptr[-1])

    def edges(self):
        """(variable, check) pairs in canonical variable-socket order."""
        ev = np.repeat(np.arange(self.n, dtype=np.int32), self.var_deg)
        return np.stack([ev, self.var_adj], axis=1)

    def __repr__(self):
        return "TannerGraph(n=%d, m=%d, E=%d, seed=%d)" % (
            self.n, self.m, self.E, self.seed)


def _apportion(total, fracs):
    """Largest-remainder integer counts summing to total."""
    degrees = sorted(fracs)
    quotas = {d: total * fracs[d] for d in degrees}
    counts = {d: int(quotas[d]) for d in degrees}
    left = total - sum(counts.values())
    order = sorted(degrees, key=lambda d: (-(quotas[d] - counts[d]), d))
    for d in order[:left]:
        counts[d] += 1
    return counts


def _repair_check_counts(counts, edge_total):
    """Adjust each degree count by at most +-1 so socket totals balance."""
    degrees = sorted(counts)
    have = sum(d * counts[d] for d in degrees)
    need = edge_total - have
    # first-found assignment over per-class adjustments in {0,+1,-1}
    reach = {0: {}}
    for d in degrees:
        nxt = {}
        for s, asg in reach.items():
            for a in (0, 1, -1):
                if a == -1 and counts[d] == 0:
                    continue
                ns = s + a * d
                if ns not in nxt:
                    nxt[ns] = {**asg, d: a} if a else asg
        reach = nxt
    if need not in reach:
        raise GraphError(
            "unrealizable degree sequence: %d variable sockets cannot be "
            "balanced by check degrees %s within +-1 per-degree slack"
            % (edge_total, degrees))
    out = dict(counts)
    for d, a in reach[need].items():
        out[d] += a
    return {d: c for d, c in out.items() if c > 0}


def degree_counts(e, n):
    """Integer node-degree counts for both sides at blocklength n."""
    if n < 1:
        raise GraphError("n must be >= 1")
    if n < e.lam.max_degree:
        raise GraphError(
            "n=%d is smaller than the maximum variable degree %d"
            % (n, e.lam.max_degree))
    var_counts = _apportion(n, e.lam.node_fractions())
    edge_total = sum(d * c for d, c in var_counts.items())
    m = int(round(edge_total * e.rho.integral()))
    if m < 1:
        raise GraphError("degree sequence needs at least one check node")
    chk_counts = _repair_check_counts(_apportion(m, e.rho.node_fractions()),
                                      edge_total)
    return var_counts, chk_counts


def sample_graph(e, n, seed):
    """Sample a Tanner multigraph; deterministic in (e, n, seed)."""
    var_counts, chk_counts = degree_counts(e, n)
    var_deg = np.repeat(
        np.array(sorted(var_counts), dtype=np.int32),
        [var_counts[d] for d in sorted(var_counts)])
    chk_deg = np.repeat(
        np.array(sorted(chk_counts), dtype=np.int32),
        [chk_counts[d] for d in sorted(chk_counts)])
    m = int(chk_deg.size)
    E = int(var_deg.sum())

    rng = np.random.default_rng(seed)
    perm = rng.permutation(E)
    var_of_socket = np.repeat(np.arange(n, dtype=np.int32), var_deg)
    chk_of_socket = np.repeat(np.arange(m, dtype=np.int32), chk_deg)
    var_adj = chk_of_socket[perm]             # check endpoint per var socket
    chk_adj = np.empty(E, dtype=np.int32)     # var endpoint per check socket
    chk_adj[perm] = var_of_socket
    return TannerGraph(n, m, seed, var_deg, chk_deg, var_adj, chk_adj)


def degree_census(g):
    """Exact per-degree node counts: (variable side, check side)."""
    var = dict(zip(*(u.tolist() for u in np.unique(g.var_deg, return_counts=True))))
    chk = dict(zip(*(u.tolist() for u in np.unique(g.chk_deg, return_counts=True))))
    return var, chk


def dump_graph(g, path):
    """Text dump: header `n m E seed`, then one `var_index check_index` line per edge."""
    with open(path, "w") as f:
        f.write("%d %d %d %d\n" % (g.n, g.m, g.E, g.seed))
        ev = np.repeat(np.arange(g.n, dtype=np.int32), g.var_deg)
        for v, c in zip(ev.tolist(), g.var_adj.tolist()):
            f.write("%d %d\n" % (v, c))


def load_graph(path):
    """Rebuild a TannerGraph from dump_graph output."""
    with open(path) as f:
        header = f.readline().split()
        if len(header) != 4:
            raise GraphError("malformed dump header, want 'n m E seed'")
        n, m, E, seed = (int(x) for x in header)
        pairs = np.loadtxt(f, dtype=np.int64, ndmin=2)
    if pairs.shape != (E, 2):
        raise GraphError("dump has %d edge lines, header says %d"
                         % (pairs.shape[0], E))
    ev, ec = pairs[:, 0], pairs[:, 1]
    if ev.min() < 0 or ev.max() >= n or ec.min() < 0 or ec.max() >= m:
        raise GraphError("edge endpoints out of range")
    var_deg = np.bincount(ev, minlength=n).astype(np.int32)
    chk_deg = np.bincount(ec, minlength=m).astype(np.int32)
    # dump order is canonical variable-socket order already
    if np.any(np.diff(ev) < 0):
        raise GraphError("dump edges are not in variable order")
    var_adj = ec.astype(np.int32)
    order = np.argsort(ec, kind="stable")
    chk_adj = ev[order].astype(np.int32)
    return TannerGraph(n, m, seed, var_deg, chk_deg, var_adj, chk_adj)
