"""Peeling decoder for erasures on a Tanner graph.

The kernel keeps a registry of degree-one checks with swap-remove indexing,
picks one uniformly at random each step (splitmix64 stream, so the draw
sequence is reproducible from the 64-bit seed alone), and resolves its unique
erased neighbor.  Each variable's identity is recovered in O(1) from a running
sum of erased-neighbor ids per check.  Total work is O(E) socket operations.

The terminal residual is the maximal stopping set inside the erasure pattern,
so its identity does not depend on the selection order; only the recorded
(step, v, s, t) trajectory does.
"""
import numpy as np
from numba import njit

from .errors import FssError

_U = np.uint64
_GAMMA = _U(0x9E3779B97F4A7C15)
_MIX1 = _U(0xBF58476D1CE4E5B9)
_MIX2 = _U(0x94D049BB133111EB)
_S30 = _U(30)
_S27 = _U(27)
_S31 = _U(31)


class DecoderError(FssError):
    """Raised for invalid erasure parameters or mismatched inputs."""


class ErasurePattern:
    """Erasure indicator over the n variables plus how it was sampled."""

    def __init__(self, mask, mode, param, seed):
        self.mask = mask
        self.mode = mode
        self.param = param
        self.seed = int(seed)

    @property
    def weight(self):
        return int(self.mask.sum())

    def __repr__(self):
        return "ErasurePattern(n=%d, mode=%s, param=%r, weight=%d, seed=%d)" % (
            self.mask.size, self.mode, self.param, self.weight, self.seed)


class Trajectory:
    """Recorded decoder state per step: all integers.

    step  iteration index, 0 is the state before any peeling
    v     erased variables remaining
    s     degree-one checks in the registry
    t     edges into still-erased variables (sum of residual check degrees)
    """

    def __init__(self, step, v, s, t):
        self.step = step
        self.v = v
        self.s = s
        self.t = t

    def __len__(self):
        return self.step.size


class DecodeOutcome:

    def __init__(self, status, residual, iterations, trajectory=None):
        self.status = status
        self.residual = residual
        self.residual_size = int(residual.size)
        self.iterations = int(iterations)
        self.trajectory = trajectory

    @property
    def success(self):
        return self.status == "success"

    def __repr__(self):
        return "DecodeOutcome(%s, residual=%d, iterations=%d)" % (
            self.status, self.residual_size, self.iterations)


def erase(g, eps=None, weight=None, seed=0):
    """Sample an erasure pattern: iid(eps) or fixed_weight(weight)."""
    if (eps is None) == (weight is None):
        raise DecoderError("give exactly one of eps (iid) or weight (fixed)")
    rng = np.random.default_rng(seed)
    if eps is not None:
        if not 0.0 <= eps <= 1.0:
            raise DecoderError("eps must be in [0,1]")
        mask = (rng.random(g.n) < eps).astype(np.uint8)
        return ErasurePattern(mask, "iid", float(eps), seed)
    weight = int(weight)
    if not 0 <= weight <= g.n:
        raise DecoderError("weight must be in [0, n]")
    mask = np.zeros(g.n, dtype=np.uint8)
    mask[rng.choice(g.n, size=weight, replace=False)] = 1
    return ErasurePattern(mask, "fixed_weight", weight, seed)


@njit(cache=True)
def _peel_kernel(var_ptr, var_adj, chk_ptr, chk_adj, erased, seed, record,
                 step_out, v_out, s_out, t_out):
    n = erased.size
    m = chk_ptr.size - 1
    rdeg = np.zeros(m, np.int64)
    vsum = np.zeros(m, np.int64)
    v_left = 0
    for v in range(n):
        if erased[v]:
            v_left += 1
            for i in range(var_ptr[v], var_ptr[v + 1]):
                c = var_adj[i]
                rdeg[c] += 1
                vsum[c] += v
    reg = np.empty(m, np.int64)
    pos = np.full(m, -1, np.int64)
    size = 0
    t_edges = 0
    for c in range(m):
        t_edges += rdeg[c]
        if rdeg[c] == 1:
            reg[size] = c
            pos[c] = size
            size += 1
    if record:
        step_out[0] = 0
        v_out[0] = v_left
        s_out[0] = size
        t_out[0] = t_edges
    state = _U(seed)
    steps = 0
    while size > 0:
        state = state + _GAMMA
        z = state
        z = (z ^ (z >> _S30)) * _MIX1
        z = (z ^ (z >> _S27)) * _MIX2
        z = z ^ (z >> _S31)
        c = reg[np.int64(z % _U(size))]
        v = vsum[c]
        erased[v] = 0
        v_left -= 1
        for i in range(var_ptr[v], var_ptr[v + 1]):
            c2 = var_adj[i]
            rdeg[c2] -= 1
            vsum[c2] -= v
            t_edges -= 1
            if rdeg[c2] == 1:
                reg[size] = c2
                pos[c2] = size
                size += 1
            elif rdeg[c2] == 0 and pos[c2] >= 0:
                j = pos[c2]
                last = reg[size - 1]
                reg[j] = last
                pos[last] = j
                size -= 1
                pos[c2] = -1
        steps += 1
        if record:
            step_out[steps] = steps
            v_out[steps] = v_left
            s_out[steps] = size
            t_out[steps] = t_edges
    return steps, v_left


def peel(g, pattern, seed=0, record=False):
    """Peel until no degree-one check remains; residual is the maximal stopping set."""
    mask = np.ascontiguousarray(pattern.mask, dtype=np.uint8)
    if mask.size != g.n:
        raise DecoderError("pattern has %d variables, graph has %d"
                           % (mask.size, g.n))
    mask = mask.copy()
    w = int(mask.sum())
    size = w + 1 if record else 1
    step_out = np.zeros(size, np.int64)
    v_out = np.zeros(size, np.int64)
    s_out = np.zeros(size, np.int64)
    t_out = np.zeros(size, np.int64)
    seed64 = _U(int(seed) & 0xFFFFFFFFFFFFFFFF)
    steps, v_left = _peel_kernel(g.var_ptr, g.var_adj, g.chk_ptr, g.chk_adj,
                                 mask, seed64, record,
                                 step_out, v_out, s_out, t_out)
    residual = np.flatnonzero(mask).astype(np.int64)
    status = "success" if v_left == 0 else "stalled"
    traj = None
    if record:
        k = steps + 1
        traj = Trajectory(step_out[:k], v_out[:k], s_out[:k], t_out[:k])
    return DecodeOutcome(status, residual, steps, traj)


def trajectory_csv(traj, path):
    """Write a recorded trajectory as CSV with columns step,v,s,t."""
    with open(path, "w") as f:
        f.write("step,v,s,t\n")
        for row in zip(traj.step.tolist(), traj.v.tolist(),
                       traj.s.tolist(), traj.t.tolist()):
            f.write("%d,%d,%d,%d\n" % row)
