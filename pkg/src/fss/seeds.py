"""Counter-derived 64-bit seeding.

Every Monte Carlo trial gets its seed as mix(base_seed, counter), so a sweep
split across workers (or re-run with a different chunking) produces exactly
the same graphs, erasure patterns, and decoder choices trial by trial.
"""

MASK64 = (1 << 64) - 1

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix(base, t):
    """Mix a base seed with a counter into a decorrelated 64-bit seed.

    This is the splitmix64 output function applied to base + (t+1)*gamma,
    i.e. the (t+1)-th output of a splitmix64 stream seeded with base.
    """
    x = (base + _GAMMA * (t + 1)) & MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & MASK64
    return (x ^ (x >> 31)) & MASK64


def splitmix_stream(seed, count):
    """First `count` outputs of the splitmix64 stream (reference for mix)."""
    return [mix(seed, t) for t in range(count)]
