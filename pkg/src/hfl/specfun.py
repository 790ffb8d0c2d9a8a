"""Special functions for the spectral machinery.

Kummer's confluent hypergeometric function M(alpha, beta, z) and Bessel
functions of real order are evaluated from their ascending power series
with compensated (Kahan) summation, switching to a large-argument
asymptotic expansion for J where the series would thrash.  Alternating
series lose digits to cancellation once the largest partial sum dwarfs
the result; each evaluation tracks that ratio and transparently re-runs
itself in arbitrary-precision arithmetic (mpmath number type, same
algorithm) when float64 cannot deliver the requested accuracy.  This
matters for deep eigenfunctions, where the series peak grows like
exp(2*sqrt(alpha*|z|)) while the value stays O(1).

Argument arrays are supported everywhere; the order parameters are
scalar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np


class BetaPole(ValueError):
    """Kummer M is undefined at beta = 0, -1, -2, ..."""


class NoConvergence(RuntimeError):
    """A series failed to converge within its term budget."""


class NonIntegerOnly(ValueError):
    """Connection formulas for Y and K require non-integer order."""


@dataclass(frozen=True)
class SeriesControl:
    """Term budget and relative tail cutoff for the power series."""

    max_terms: int = 1200
    term_tol: float = 1e-16

    def __post_init__(self) -> None:
        if self.max_terms < 50:
            raise ValueError("max_terms must be at least 50")
        if self.term_tol <= 0.0:
            raise ValueError("term_tol must be positive")


DEFAULT_SERIES = SeriesControl()

# Escalate to extended precision once more than ~6 digits cancel.
_CANCEL_RATIO = 1e6
_TINY = 1e-300


def _as_array(z) -> tuple[np.ndarray, bool]:
    arr = np.asarray(z, dtype=float)
    return np.atleast_1d(arr), arr.ndim == 0


def _near_integer(nu: float, window: float = 1e-9) -> bool:
    return abs(nu - round(nu)) < window


# ---------------------------------------------------------------------------
# Kummer M
# ---------------------------------------------------------------------------

def _kummer_f64(alpha: float, beta: float, z: np.ndarray,
                control: SeriesControl) -> tuple[np.ndarray, np.ndarray]:
    """Compensated ascending series; returns (sums, needs_escalation)."""
    s = np.ones_like(z)
    comp = np.zeros_like(z)
    term = np.ones_like(z)
    smax = np.ones_like(z)
    small_run = np.zeros(z.shape, dtype=int)
    converged = np.zeros(z.shape, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(control.max_terms):
            term = term * z * ((alpha + k) / ((beta + k) * (k + 1.0)))
            y = term - comp
            t = s + y
            comp = (t - s) - y
            s = t
            np.maximum(smax, np.abs(s), out=smax)
            small = np.abs(term) <= control.term_tol * (np.abs(s) + _TINY)
            small_run = np.where(small, small_run + 1, 0)
            converged = small_run >= 3
            if np.all(converged):
                break
    bad = ~np.isfinite(s) | ~converged
    bad |= smax > _CANCEL_RATIO * (np.abs(s) + _TINY)
    return s, bad


def _kummer_mp(alpha: float, beta: float, z: float,
               control: SeriesControl) -> float:
    """Same series in arbitrary precision, raising precision until the
    cancellation margin is covered."""
    dps = 40
    while dps <= 40000:
        with mpmath.workdps(dps):
            a = mpmath.mpf(alpha)
            b = mpmath.mpf(beta)
            zz = mpmath.mpf(z)
            cutoff = mpmath.mpf(10) ** (-(dps + 4))
            s = mpmath.mpf(1)
            term = mpmath.mpf(1)
            smax = mpmath.mpf(1)
            small_run = 0
            converged = False
            for k in range(4 * control.max_terms):
                term = term * zz * (a + k) / ((b + k) * (k + 1))
                s += term
                if abs(s) > smax:
                    smax = abs(s)
                if abs(term) <= cutoff * (abs(s) + cutoff):
                    small_run += 1
                    if small_run >= 3:
                        converged = True
                        break
                else:
                    small_run = 0
            if converged and s != 0:
                cancelled = mpmath.log10(smax / abs(s))
                if dps >= float(cancelled) + 16 + 6:
                    return float(s)
                dps = int(float(cancelled)) + 40
                continue
            if converged:
                # An exactly zero sum at 40+ digits means the true value
                # sits below the working precision times the series peak,
                # which rounds to 0.0 in double precision anyway.  This
                # happens at the roots of terminating (polynomial) cases
                # such as M(-1, 2, 2).
                return 0.0
        raise NoConvergence(
            f"Kummer series did not converge for alpha={alpha}, z={z}")
    raise NoConvergence(
        f"Kummer series needed more than {dps} digits for alpha={alpha}")


def kummer_m(alpha: float, beta: float, z, control: SeriesControl = DEFAULT_SERIES):
    """Kummer's confluent hypergeometric function M(alpha, beta, z).

    For z below -30 the reflection M(alpha, beta, z) =
    exp(z) M(beta - alpha, beta, -z) avoids summing a violently
    alternating series.  Elsewhere the series is summed directly with
    compensated summation, escalating to extended precision when
    cancellation is detected.
    """
    if _near_integer(beta, 1e-12) and round(beta) <= 0:
        raise BetaPole(f"beta={beta} is a non-positive integer")
    zs, scalar = _as_array(z)
    out = np.empty_like(zs)

    flip = zs < -30.0
    if np.any(flip):
        refl = kummer_m(beta - alpha, beta, -zs[flip], control)
        out[flip] = np.exp(zs[flip]) * np.atleast_1d(refl)

    direct = ~flip
    if np.any(direct):
        vals, bad = _kummer_f64(alpha, beta, zs[direct], control)
        if np.any(bad):
            idx = np.nonzero(bad)[0]
            sub = zs[direct]
            for i in idx:
                vals[i] = _kummer_mp(alpha, beta, float(sub[i]), control)
        out[direct] = vals

    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Bessel J (series and large-argument asymptotics)
# ---------------------------------------------------------------------------

def _bessel_j_series_f64(nu: float, x: np.ndarray,
                         control: SeriesControl) -> tuple[np.ndarray, np.ndarray]:
    pref = (0.5 * x) ** nu / math.gamma(nu + 1.0)
    s = pref.copy()
    comp = np.zeros_like(x)
    term = pref.copy()
    smax = np.abs(s)
    q = 0.25 * x * x
    small_run = np.zeros(x.shape, dtype=int)
    converged = np.zeros(x.shape, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, control.max_terms):
            term = term * (-q) / (k * (nu + k))
            y = term - comp
            t = s + y
            comp = (t - s) - y
            s = t
            np.maximum(smax, np.abs(s), out=smax)
            small = np.abs(term) <= control.term_tol * (np.abs(s) + _TINY)
            small_run = np.where(small, small_run + 1, 0)
            converged = small_run >= 3
            if np.all(converged):
                break
    bad = ~np.isfinite(s) | ~converged
    bad |= smax > _CANCEL_RATIO * (np.abs(s) + _TINY)
    return s, bad


def _bessel_j_series_mp(nu: float, x: float, control: SeriesControl) -> float:
    dps = 40
    while dps <= 40000:
        with mpmath.workdps(dps):
            xx = mpmath.mpf(x)
            nn = mpmath.mpf(nu)
            pref = (xx / 2) ** nn / mpmath.gamma(nn + 1)
            q = xx * xx / 4
            cutoff = mpmath.mpf(10) ** (-(dps + 4))
            s = pref
            term = pref
            smax = abs(s)
            small_run = 0
            converged = False
            for k in range(1, 4 * control.max_terms):
                term = term * (-q) / (k * (nn + k))
                s += term
                if abs(s) > smax:
                    smax = abs(s)
                if abs(term) <= cutoff * (abs(s) + cutoff):
                    small_run += 1
                    if small_run >= 3:
                        converged = True
                        break
                else:
                    small_run = 0
            if converged and s != 0:
                cancelled = mpmath.log10(smax / abs(s))
                if dps >= float(cancelled) + 16 + 6:
                    return float(s)
                dps = int(float(cancelled)) + 40
                continue
            if converged:
                dps *= 2
                continue
        raise NoConvergence(f"Bessel J series stalled at nu={nu}, x={x}")
    raise NoConvergence(f"Bessel J series needed too many digits at x={x}")


def _bessel_j_asym(nu: float, x: np.ndarray) -> np.ndarray:
    """Hankel's large-argument expansion, truncated at its smallest term."""
    mu = 4.0 * nu * nu
    inv8x = 1.0 / (8.0 * x)
    c = np.ones_like(x)
    p = np.ones_like(x)
    q = np.zeros_like(x)
    last = np.full_like(x, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for m in range(60):
        c = c * (mu - (2 * m + 1.0) ** 2) * inv8x / (m + 1.0)
        mag = np.abs(c)
        active &= mag < last
        if not np.any(active):
            break
        last = np.where(active, mag, last)
        j = m + 1
        sign = -1.0 if (j // 2) % 2 else 1.0
        if j % 2 == 1:
            q = np.where(active, q + sign * c, q)
        else:
            p = np.where(active, p + sign * c, p)
        if np.all(mag < 1e-18):
            break
    omega = x - (0.5 * nu + 0.25) * math.pi
    return np.sqrt(2.0 / (math.pi * x)) * (np.cos(omega) * p - np.sin(omega) * q)


def bessel_j(nu: float, x, control: SeriesControl = DEFAULT_SERIES):
    """Bessel function of the first kind, real order.

    The ascending series is used up to x_switch = max(12, 2 nu^2), the
    Hankel asymptotic expansion beyond it.  Series evaluations that lose
    more than ~6 digits to cancellation re-run in extended precision.
    """
    xs, scalar = _as_array(x)
    if np.any(xs <= 0.0):
        raise ValueError("bessel_j requires x > 0")
    if abs(nu) > 20.0:
        raise ValueError("order |nu| <= 20 supported")
    if nu < 0.0 and _near_integer(nu):
        # J_{-n} = (-1)^n J_n
        n = round(-nu)
        res = bessel_j(float(-nu), xs, control)
        out = ((-1.0) ** n) * np.atleast_1d(res)
        return float(out[0]) if scalar else out

    switch = max(12.0, 2.0 * nu * nu)
    out = np.empty_like(xs)
    ser = xs <= switch
    if np.any(ser):
        vals, bad = _bessel_j_series_f64(nu, xs[ser], control)
        if np.any(bad):
            sub = xs[ser]
            for i in np.nonzero(bad)[0]:
                vals[i] = _bessel_j_series_mp(nu, float(sub[i]), control)
        out[ser] = vals
    if np.any(~ser):
        out[~ser] = _bessel_j_asym(nu, xs[~ser])
    return float(out[0]) if scalar else out


def bessel_y(nu: float, x, control: SeriesControl = DEFAULT_SERIES):
    """Bessel function of the second kind via the connection formula
    (J_nu cos(nu pi) - J_{-nu}) / sin(nu pi); non-integer order only."""
    if _near_integer(nu):
        raise NonIntegerOnly(f"Y connection formula undefined at nu={nu}")
    jp = bessel_j(nu, x, control)
    jm = bessel_j(-nu, x, control)
    return (jp * math.cos(nu * math.pi) - jm) / math.sin(nu * math.pi)


# ---------------------------------------------------------------------------
# Modified Bessel I and K
# ---------------------------------------------------------------------------

def _bessel_i_f64(nu: float, x: np.ndarray,
                  control: SeriesControl) -> tuple[np.ndarray, np.ndarray]:
    pref = (0.5 * x) ** nu / math.gamma(nu + 1.0)
    s = pref.copy()
    comp = np.zeros_like(x)
    term = pref.copy()
    smax = np.abs(s)
    q = 0.25 * x * x
    small_run = np.zeros(x.shape, dtype=int)
    converged = np.zeros(x.shape, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, control.max_terms):
            term = term * q / (k * (nu + k))
            y = term - comp
            t = s + y
            comp = (t - s) - y
            s = t
            np.maximum(smax, np.abs(s), out=smax)
            small = np.abs(term) <= control.term_tol * (np.abs(s) + _TINY)
            small_run = np.where(small, small_run + 1, 0)
            converged = small_run >= 3
            if np.all(converged):
                break
    bad = ~np.isfinite(s) | ~converged
    bad |= smax > _CANCEL_RATIO * (np.abs(s) + _TINY)
    return s, bad


def _bessel_i_mp_raw(nu: float, x: float, control: SeriesControl,
                     dps: int):
    """One extended-precision I series at the current mpmath precision."""
    xx = mpmath.mpf(x)
    nn = mpmath.mpf(nu)
    pref = (xx / 2) ** nn / mpmath.gamma(nn + 1)
    q = xx * xx / 4
    cutoff = mpmath.mpf(10) ** (-(dps + 4))
    s = pref
    term = pref
    small_run = 0
    for k in range(1, 4 * control.max_terms):
        term = term * q / (k * (nn + k))
        s += term
        if abs(term) <= cutoff * (abs(s) + cutoff):
            small_run += 1
            if small_run >= 3:
                return s
        else:
            small_run = 0
    raise NoConvergence(f"Bessel I series stalled at nu={nu}, x={x}")


def bessel_i(nu: float, x, control: SeriesControl = DEFAULT_SERIES):
    """Modified Bessel function of the first kind from its series.

    Terms are single-signed for positive order, so the series is stable;
    mildly alternating prefixes at negative order are covered by the
    cancellation guard.
    """
    xs, scalar = _as_array(x)
    if np.any(xs <= 0.0):
        raise ValueError("bessel_i requires x > 0")
    if abs(nu) > 20.0:
        raise ValueError("order |nu| <= 20 supported")
    vals, bad = _bessel_i_f64(nu, xs, control)
    if np.any(bad):
        for i in np.nonzero(bad)[0]:
            with mpmath.workdps(60):
                vals[i] = float(_bessel_i_mp_raw(nu, float(xs[i]), control, 60))
    return float(vals[0]) if scalar else vals


def bessel_k(nu: float, x, control: SeriesControl = DEFAULT_SERIES):
    """Macdonald function via pi (I_{-nu} - I_nu) / (2 sin(nu pi)).

    Non-integer order only.  The difference of exponentially growing
    I values cancels to an exponentially small K, so the evaluation
    escalates to extended precision once x is large enough for the
    subtraction to matter.
    """
    if _near_integer(nu):
        raise NonIntegerOnly(f"K connection formula undefined at nu={nu}")
    xs, scalar = _as_array(x)
    if np.any(xs <= 0.0):
        raise ValueError("bessel_k requires x > 0")
    im = bessel_i(-nu, xs, control)
    ip = bessel_i(nu, xs, control)
    im = np.atleast_1d(im)
    ip = np.atleast_1d(ip)
    diff = im - ip
    out = math.pi * diff / (2.0 * math.sin(nu * math.pi))
    risky = (np.abs(im) + np.abs(ip)) > 1e5 * (np.abs(diff) + _TINY)
    if np.any(risky):
        for i in np.nonzero(risky)[0]:
            xi = float(xs[i])
            # x/ln(10) extra digits cover the e^{2x} blow-up of the ratio.
            dps = int(30 + xi)
            with mpmath.workdps(dps):
                a = _bessel_i_mp_raw(-nu, xi, control, dps)
                b = _bessel_i_mp_raw(nu, xi, control, dps)
                out[i] = float(mpmath.pi * (a - b)
                               / (2 * mpmath.sin(mpmath.mpf(nu) * mpmath.pi)))
    return float(out[0]) if scalar else out


def abs_k_imag(nu: float, w, control: SeriesControl = DEFAULT_SERIES):
    """|K_nu(i w)| for real order and positive real w.

    Equals (pi/2) sqrt(J_nu(w)^2 + Y_nu(w)^2), the modulus of the Hankel
    function scaled by pi/2.
    """
    ws, scalar = _as_array(w)
    if np.any(ws <= 0.0):
        raise ValueError("abs_k_imag requires w > 0")
    j = np.atleast_1d(bessel_j(nu, ws, control))
    y = np.atleast_1d(bessel_y(nu, ws, control))
    out = 0.5 * math.pi * np.hypot(j, y)
    return float(out[0]) if scalar else out
