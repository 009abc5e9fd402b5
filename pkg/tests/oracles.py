"""Direct-summation reference implementations in exact rational arithmetic."""

import math
from fractions import Fraction


def naive_cusum(q, k):
    n = len(q)
    return abs(sum(q[:k]) - Fraction(k, n) * sum(q))


def naive_normalizer(q, k):
    n = len(q)

    def energy(seg):
        mean = sum(seg) / len(seg)
        total, s = Fraction(0), Fraction(0)
        for v in seg:
            s += v - mean
            total += s * s
        return total

    return (energy(q[:k]) + energy(q[k:])) / n


def naive_sn_squared_at(q, k):
    return naive_cusum(q, k) ** 2 / naive_normalizer(q, k)


def naive_sn_squared(q):
    """Maximum of CUSUM_k^2 / V^2_k over k with a nonzero normalizer, and its k."""
    best, arg = None, None
    for k in range(1, len(q)):
        if naive_normalizer(q, k) == 0:
            continue
        r = naive_sn_squared_at(q, k)
        if best is None or r > best:
            best, arg = r, k
    return best, arg


def naive_cusum_max(q):
    values = [naive_cusum(q, k) for k in range(1, len(q))]
    best = max(values)
    return best, values.index(best) + 1


def kolmogorov_cdf(x, terms=100):
    """P(sup |Brownian bridge| <= x) from the alternating series."""
    return 1.0 - 2.0 * sum((-1) ** (k - 1) * math.exp(-2.0 * k * k * x * x)
                           for k in range(1, terms + 1))
