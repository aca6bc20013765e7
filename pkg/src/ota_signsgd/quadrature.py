"""Half-range Gauss-Hermite rules for the standard normal density.

Full-line Gauss-Hermite converges only like O(1/n) on integrands with a jump
at the origin (the sign likelihood has one), so the oracle integrates each
half-axis separately. The rule for weight exp(-x^2/2) on [0, inf) is built
from its moments with the Chebyshev algorithm in extended precision and then
diagonalized in double precision (Golub-Welsch).
"""

from functools import lru_cache

import mpmath
import numpy as np
from scipy.linalg import eigh_tridiagonal


def _half_normal_moments(count: int):
    # int_0^inf x^j exp(-x^2/2) dx / sqrt(2 pi)
    norm = mpmath.sqrt(2 * mpmath.pi)
    return [mpmath.power(2, mpmath.mpf(j - 1) / 2) * mpmath.gamma(mpmath.mpf(j + 1) / 2) / norm
            for j in range(count)]


def _recurrence(n: int):
    mom = _half_normal_moments(2 * n)
    alpha = [mom[1] / mom[0]]
    beta = [mom[0]]
    prev = [mpmath.mpf(0)] * (2 * n)
    cur = list(mom)
    for k in range(1, n):
        nxt = [mpmath.mpf(0)] * (2 * n)
        for l in range(k, 2 * n - k):
            nxt[l] = cur[l + 1] - alpha[k - 1] * cur[l] - beta[k - 1] * prev[l]
        alpha.append(nxt[k + 1] / nxt[k] - cur[k] / cur[k - 1])
        beta.append(nxt[k] / cur[k - 1])
        prev, cur = cur, nxt
    return alpha, beta


@lru_cache(maxsize=None)
def half_normal_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights with sum(w * f(x)) ~ E[f(Z) 1{Z > 0}], Z ~ N(0, 1).

    Exact for polynomials of degree < 2n. Weights sum to 1/2.
    """
    if n < 1:
        raise ValueError("order must be positive")
    with mpmath.workdps(40 + 3 * n):
        alpha, beta = _recurrence(n)
        diag = np.array([float(a) for a in alpha])
        off = np.array([float(mpmath.sqrt(b)) for b in beta[1:]])
        total = float(beta[0])
    nodes, vecs = eigh_tridiagonal(diag, off)
    weights = total * vecs[0] ** 2
    return nodes, weights


def symmetric_normal_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated rule over (-inf, 0) and (0, inf) for N(0, 1), 2n nodes."""
    x, w = half_normal_rule(n)
    return np.concatenate([-x[::-1], x]), np.concatenate([w[::-1], w])
