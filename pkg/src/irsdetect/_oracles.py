"""Reference values by adaptive quadrature in mpmath.

None of these touch scipy, so they can judge the library's special
functions without sharing an implementation with them.  Tail integrals
are shifted to start at zero and the exponential prefactor is pulled
out; without that the quadrature nodes miss the narrow boundary layer
at large arguments and the reference loses about five digits.
"""
import mpmath as mp

mp.mp.dps = 40


def _tail_nodes(scale):
    h = 1 / mp.mpf(scale)
    return [0, h, 10 * h, 60 * h, mp.inf]


def q_oracle(x):
    x = mp.mpf(x)
    rate = max(x, 1)
    body = mp.quad(lambda s: mp.exp(-x * s - s * s / 2), _tail_nodes(rate))
    return float(mp.exp(-x * x / 2) / mp.sqrt(2 * mp.pi) * body)


def gamma_upper_oracle(a, x):
    a, x = mp.mpf(a), mp.mpf(x)
    nodes = sorted(set([0, 1, a + 1, 10 * (a + 1), 60 * (a + 1)])) + [mp.inf]
    body = mp.quad(lambda s: (x + s) ** (a - 1) * mp.exp(-s), nodes)
    return float(mp.exp(-x) * body / mp.gamma(a))


def beta_oracle(a, b, x):
    a, b = mp.mpf(a), mp.mpf(b)
    f = lambda t: t ** (a - 1) * (1 - t) ** (b - 1)
    return float(mp.quad(f, [0, x]) / mp.beta(a, b))


def marcum_oracle(order, a, b):
    """Defining integral of the generalized Marcum-Q function."""
    a, b = mp.mpf(a), mp.mpf(b)
    if a == 0:
        return gamma_upper_oracle(order, b * b / 2)

    # exponent folded with the scaled Bessel function to keep it O(1)
    def f(s):
        t = b + s
        return (t * (t / a) ** (order - 1) * mp.exp(-(t - a) ** 2 / 2)
                * mp.besseli(order - 1, a * t) * mp.exp(-a * t))

    peak = max(a - b, 0)
    nodes = sorted(set([0, 1 / max(b, 1), peak, peak + 1, peak + 10, peak + 60])) + [mp.inf]
    return float(mp.quad(f, nodes))


def bisect(fun, target, lo, hi, iters=200):
    """Plain bisection for a non-increasing ``fun``."""
    lo, hi = mp.mpf(lo), mp.mpf(hi)
    for _ in range(iters):
        mid = (lo + hi) / 2
        if fun(mid) > target:
            lo = mid
        else:
            hi = mid
    return float((lo + hi) / 2)
