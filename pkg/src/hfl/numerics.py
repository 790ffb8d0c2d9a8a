"""Shared numerical kernels: quadrature, root bracketing, finite differences.

The quadrature routines use a 15-point Gauss-Kronrod rule on each
subinterval.  All Kronrod nodes are interior, so integrands are never
evaluated at interval endpoints; integrable endpoint singularities
(x**-0.5 and milder) are handled by adaptive bisection toward the
endpoint.  Error control is global: the worst subinterval is split
until the summed error estimate meets the tolerance.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class DepthExceeded(RuntimeError):
    """Raised when adaptive bisection hits max_depth before converging."""


class InvalidEnvelope(ValueError):
    """Raised when a claimed damping envelope is not decreasing."""


@dataclass(frozen=True)
class QuadSpec:
    """Tolerance and subdivision budget for adaptive quadrature.

    abs_tol and rel_tol combine as max(abs_tol, rel_tol * |result|);
    max_depth caps the number of bisections applied to any one
    subinterval of the original range.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_depth: int = 60

    def __post_init__(self) -> None:
        if self.abs_tol <= 0.0 or self.rel_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")


DEFAULT_QUAD = QuadSpec()

ROOT_TOL = 1e-12


@dataclass(frozen=True)
class Bracket:
    """Sign-changing interval [lo, hi] with cached endpoint values."""

    lo: float
    hi: float
    f_lo: float
    f_hi: float

    def __post_init__(self) -> None:
        if not (self.lo < self.hi):
            raise ValueError("bracket requires lo < hi")
        if not (np.isfinite(self.f_lo) and np.isfinite(self.f_hi)):
            raise ValueError("bracket endpoint values must be finite")
        if self.f_lo == 0.0 or self.f_hi == 0.0:
            return
        if math.copysign(1.0, self.f_lo) == math.copysign(1.0, self.f_hi):
            raise ValueError("bracket endpoints must differ in sign")


def bracket_from(f: Callable[[float], float], lo: float, hi: float) -> Bracket:
    """Evaluate f at both ends and build a Bracket."""
    return Bracket(lo, hi, float(f(lo)), float(f(hi)))


# 15-point Kronrod extension of 7-point Gauss on [-1, 1].  Nodes are
# symmetric and strictly interior.  Odd-indexed nodes form the embedded
# Gauss rule.
_XK = np.array([
    -0.9914553711208126, -0.9491079123427585, -0.8648644233597691,
    -0.7415311855993944, -0.5860872354676911, -0.4058451513773972,
    -0.2077849550078985, 0.0,
    0.2077849550078985, 0.4058451513773972, 0.5860872354676911,
    0.7415311855993944, 0.8648644233597691, 0.9491079123427585,
    0.9914553711208126,
])
_WK = np.array([
    0.022935322010529224, 0.06309209262997855, 0.10479001032225018,
    0.14065325971552592, 0.1690047266392679, 0.19035057806478542,
    0.20443294007529889, 0.20948214108472782,
    0.20443294007529889, 0.19035057806478542, 0.1690047266392679,
    0.14065325971552592, 0.10479001032225018, 0.06309209262997855,
    0.022935322010529224,
])
_WG = np.array([
    0.12948496616886969, 0.27970539148927664, 0.3818300505051189,
    0.41795918367346935, 0.3818300505051189, 0.27970539148927664,
    0.12948496616886969,
])
_GAUSS_IDX = np.arange(1, 15, 2)


def _eval_vector(f: Callable, xs: np.ndarray) -> np.ndarray:
    """Call f on an array of nodes, falling back to a scalar loop."""
    try:
        out = np.asarray(f(xs), dtype=float)
        if out.shape == xs.shape:
            return out
    except Exception:
        pass
    return np.array([float(f(float(x))) for x in xs], dtype=float)


def _gk15(f: Callable, lo: float, hi: float) -> tuple[float, float]:
    """Kronrod estimate and |K15 - G7| error proxy on [lo, hi]."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    fx = _eval_vector(f, mid + half * _XK)
    k15 = half * float(np.dot(_WK, fx))
    g7 = half * float(np.dot(_WG, fx[_GAUSS_IDX]))
    err = abs(k15 - g7)
    if not np.all(np.isfinite(fx)):
        err = math.inf
    return k15, err


def integrate(f: Callable, lo: float, hi: float,
              spec: QuadSpec = DEFAULT_QUAD) -> float:
    """Adaptive integral of f over [lo, hi].

    The integrand is only evaluated at interior nodes.  f may accept a
    numpy array of nodes and return an array; scalar-only callables are
    handled transparently.

    Raises DepthExceeded if the worst subinterval has already been
    bisected max_depth times and the global error estimate still
    exceeds the tolerance.
    """
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ValueError("integration limits must be finite")
    if not (lo < hi):
        raise ValueError("integration requires lo < hi")

    val, err = _gk15(f, lo, hi)
    # Heap of (-error, tiebreak, lo, hi, value, depth).
    counter = 0
    heap = [(-err, counter, lo, hi, val, 0)]
    total_val = val
    total_err = err

    # The |K15 - G7| proxy can understate the Kronrod error near an
    # integrable singularity; the factor 2 keeps the true error inside
    # the advertised tolerance.
    while 2.0 * total_err > max(spec.abs_tol, spec.rel_tol * abs(total_val)):
        neg_err, _, a, b, v, depth = heapq.heappop(heap)
        if depth >= spec.max_depth or (b - a) <= abs(a) * 1e-16:
            raise DepthExceeded(
                f"quadrature on [{lo}, {hi}] stalled at depth {depth} "
                f"with error {total_err:.3e}")
        m = 0.5 * (a + b)
        v1, e1 = _gk15(f, a, m)
        v2, e2 = _gk15(f, m, b)
        total_val += v1 + v2 - v
        total_err += e1 + e2 + neg_err  # neg_err = -old error
        counter += 1
        heapq.heappush(heap, (-e1, counter, a, m, v1, depth + 1))
        counter += 1
        heapq.heappush(heap, (-e2, counter, m, b, v2, depth + 1))
        if counter > 200000:
            raise DepthExceeded("quadrature subdivision budget exhausted")
        # Re-sum occasionally to shed accumulated float error in the
        # running totals.
        if counter % 4096 == 0:
            total_val = sum(item[4] for item in heap)
            total_err = sum(-item[0] for item in heap)

    return total_val


def integrate_semi_infinite(f: Callable, lo: float,
                            damping: Callable[[float], float],
                            spec: QuadSpec = DEFAULT_QUAD) -> float:
    """Integral of f over [lo, infinity) using a known damping envelope.

    The envelope must be positive and decreasing beyond lo; the range is
    truncated where the envelope falls below abs_tol / 100 and the
    remainder integrated adaptively.

    Raises InvalidEnvelope when sampled envelope values increase.
    """
    if not np.isfinite(lo):
        raise ValueError("lower limit must be finite")
    start = lo + 1.0
    samples = [damping(start + k * 0.5) for k in range(8)]
    for u, v in zip(samples, samples[1:]):
        if v > u * (1.0 + 1e-12) + 1e-300:
            raise InvalidEnvelope("damping envelope is not decreasing")

    threshold = spec.abs_tol / 100.0
    width = 1.0
    for _ in range(200):
        if damping(lo + width) < threshold:
            break
        width *= 2.0
    else:
        raise InvalidEnvelope("damping envelope never falls below cutoff")
    return integrate(f, lo, lo + width, spec)


def find_root(f: Callable[[float], float], bracket: Bracket,
              tol: float = ROOT_TOL) -> float:
    """Brent's method on a sign-changing bracket.

    Inverse-quadratic and secant steps are accepted only while they stay
    inside the current bracket and shrink it fast enough; otherwise the
    step falls back to bisection.  Terminates when the bracket width is
    below tol (plus a few ulps of the abscissa).
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    a, b = bracket.lo, bracket.hi
    fa, fb = bracket.f_lo, bracket.f_hi
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    c, fc = a, fa
    d = e = b - a

    for _ in range(400):
        if (fb > 0.0) == (fc > 0.0):
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol1 = 0.5 * tol + 2.0 * abs(b) * np.finfo(float).eps
        xm = 0.5 * (c - b)
        if abs(xm) <= tol1 or fb == 0.0:
            return b
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * xm * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0.0:
                q = -q
            p = abs(p)
            if 2.0 * p < min(3.0 * xm * q - abs(tol1 * q), abs(e * q)):
                e = d
                d = p / q
            else:
                d = xm
                e = d
        else:
            d = xm
            e = d
        a, fa = b, fb
        if abs(d) > tol1:
            b += d
        else:
            b += math.copysign(tol1, xm)
        fb = float(f(b))
    raise RuntimeError("root iteration failed to converge")


def fd_derivatives(f: Callable[[float], float], x: float,
                   h: float) -> tuple[float, float]:
    """Central-difference first and second derivatives at x.

    Both estimates are second order in h; the integrand is evaluated at
    x - h, x, and x + h only.
    """
    if h <= 0.0:
        raise ValueError("step h must be positive")
    fp = float(f(x + h))
    fm = float(f(x - h))
    f0 = float(f(x))
    d1 = (fp - fm) / (2.0 * h)
    d2 = (fp - 2.0 * f0 + fm) / (h * h)
    return d1, d2
