"""Bond prices, yields, and the generic Duhamel pricer.

Three routes to the same quantities, kept deliberately independent so
they can cross-check each other: a series bond formula for k=1/2 over
the discrete eigensystem, a double-quadrature bond formula for k=-1/2
over the continuous spectrum, and a nested-quadrature pricer that works
directly from the transition density for any smooth payoff.

The k=-1/2 kernel printed as a single rational expression hides a slow
O(rho^-2) tail in its exp(xi (t-T)) part, which a truncation point
chosen from the Gaussian exp(L rho^2 (t-T)) part would miss at the
1e-4 level.  The evaluation here therefore splits the underlying time
integral at tau_min before the horizon: the far part regains a Gaussian
envelope exp(-L rho^2 tau_min) and is integrated numerically, while the
near sliver collapses to the delta limit of the density and is added in
closed form (one-sided, error O(tau_min^2)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import model
from .model import ModelParams, OutOfDomain
from .numerics import DEFAULT_QUAD, QuadSpec, _WK, _XK, integrate
from .specfun import abs_k_imag, bessel_j
from .spectral import (TAU_MIN, DensityField, EigenSystem, HorizonTooShort,
                       density, rho_cutoff, theta_rho)

_SQRT2 = math.sqrt(2.0)

# Last-term relative threshold for declaring the k=1/2 bond series
# converged.  The terms alternate irregularly in sign and decay roughly
# like n^-3, so the last term overstates the actual truncation error by
# an order of magnitude; 1e-4 here was measured to leave the sum within
# ~3e-7 of a doubled-length reference.
SERIES_REL_TOL = 1e-4

_H_SWITCH = 1e-3
# The far kernel below lacks an expm1-style compensated form, so its
# series region is wider to keep the direct branch out of the worst of
# the 1/d^3 cancellation.
_HFAR_SWITCH = 0.05
_H_SERIES_TOL = 1e-14


class SeriesNotConverged(RuntimeError):
    """Eigen-series truncated before its last term became negligible."""


@dataclass(frozen=True)
class Payoff:
    """Terminal payoff with caller-supplied first and second derivatives.

    The source term of the Duhamel representation applies the generator
    to the payoff, so derivatives enter the price directly; differencing
    them inside a double quadrature would multiply cost and error,
    hence the three callbacks.
    """

    g: callable
    g_prime: callable
    g_double_prime: callable

    def validate(self, lo: float, hi: float, n: int = 7,
                 tol: float = 1e-4) -> None:
        """Spot-check callback consistency by central differences."""
        from .numerics import fd_derivatives
        for x in np.linspace(lo, hi, n):
            d1, d2 = fd_derivatives(self.g, float(x), 1e-5 * (hi - lo))
            if abs(d1 - self.g_prime(x)) > tol * (1.0 + abs(d1)):
                raise ValueError(f"g_prime inconsistent with g near x={x}")
            if abs(d2 - self.g_double_prime(x)) > tol * (1.0 + abs(d2)):
                raise ValueError(
                    f"g_double_prime inconsistent with g near x={x}")


def payoff_one() -> Payoff:
    """Unit payoff: prices the zero-coupon bond."""
    return Payoff(lambda x: np.ones_like(np.asarray(x, dtype=float)),
                  lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                  lambda x: np.zeros_like(np.asarray(x, dtype=float)))


def payoff_linear() -> Payoff:
    """Payoff g(x) = x."""
    return Payoff(lambda x: np.asarray(x, dtype=float),
                  lambda x: np.ones_like(np.asarray(x, dtype=float)),
                  lambda x: np.zeros_like(np.asarray(x, dtype=float)))


def payoff_put_on_rate(strike: float, width: float = 0.02) -> Payoff:
    """Put on the terminal rate, (strike - x)+, smoothed to C^2.

    The kink is mollified over [strike - width, strike + width] with a
    parabolic second derivative so the generator can be applied to the
    payoff; the smoothing shifts the price by O(width^2).
    """
    if width <= 0.0:
        raise ValueError("width must be positive")
    k, w = strike, width

    def g2(x):
        u = np.asarray(x, dtype=float) - k
        inside = np.abs(u) < w
        return np.where(inside, 0.75 / w ** 3 * (w ** 2 - u ** 2), 0.0)

    def g1(x):
        u = np.asarray(x, dtype=float) - k
        ramp = -1.0 + 0.75 / w ** 3 * (
            w ** 2 * (u + w) - (u ** 3 + w ** 3) / 3.0)
        return np.where(u <= -w, -1.0, np.where(u >= w, 0.0, ramp))

    def g(x):
        u = np.asarray(x, dtype=float) - k
        # Antiderivative of g1, shifted so the payoff vanishes at u = w.
        uc = np.clip(u, -w, w)
        poly = (-uc + 0.75 / w ** 3 * (
            0.5 * w ** 2 * uc ** 2 + (2.0 / 3.0) * w ** 3 * uc
            - uc ** 4 / 12.0))
        smooth = poly + 3.0 * w / 16.0
        return np.where(u <= -w, -u, np.where(u >= w, 0.0, smooth))

    return Payoff(g, g1, g2)


@dataclass(frozen=True)
class CurvePoint:
    maturity: float
    bond: float
    yld: float


@dataclass(frozen=True)
class Curve:
    """Zero-coupon curve; bonds respect the rate-band bounds and yields
    follow from Y = -log(B) / T."""

    params: ModelParams
    points: tuple[CurvePoint, ...]

    def __post_init__(self) -> None:
        for pt in self.points:
            lo = math.exp(-self.params.L * pt.maturity) * (1.0 - 1e-9)
            if not lo <= pt.bond <= 1.0:
                raise ValueError(
                    f"bond {pt.bond} at T={pt.maturity} outside "
                    f"[{lo}, 1]")
            if abs(pt.yld + math.log(pt.bond) / pt.maturity) > 1e-12:
                raise ValueError("yield inconsistent with bond")


def f_double_prime(p: ModelParams, x):
    xs = np.asarray(x, dtype=float)
    return -(_SQRT2 / p.a) * (p.k - 0.5) * xs ** (p.k - 1.5)


def q_source(p: ModelParams, pay: Payoff, t: float, x, T: float,
             f_offset: float = 0.0):
    """Duhamel source (d/ds + generator) exp(-x(T-s) + f(x)) g(x) at s=t.

    Closed-form chain-rule expansion; f_offset adds a constant to the
    state shift and must cancel against the matching factor in
    price_general (offset-invariance of the representation).
    """
    if t >= T:
        raise OutOfDomain("need t < T")
    # The source stays smooth up to the cap, and the spectral quadratures
    # sample it there, so the right endpoint is allowed.
    xs = model._check_interior(p, x, closed_right=True)
    tau = T - t
    f_v = model.f_func(p, xs) + f_offset
    fp = model.f_prime(p, xs)
    fpp = f_double_prime(p, xs)
    mu_t = model.drift_tilde(p, xs)
    half_s2 = 0.5 * model.vol(p, xs) ** 2
    g = np.asarray(pay.g(xs), dtype=float)
    g1 = np.asarray(pay.g_prime(xs), dtype=float)
    g2 = np.asarray(pay.g_double_prime(xs), dtype=float)
    h_x = -tau + fp
    e_h = np.exp(-xs * tau + f_v)
    return e_h * (xs * g
                  + mu_t * (h_x * g + g1)
                  + half_s2 * ((h_x ** 2 + fpp) * g + 2.0 * h_x * g1 + g2))


# ---------------------------------------------------------------------------
# k = 1/2: series bond over the discrete spectrum
# ---------------------------------------------------------------------------

def h_kernel_k_half(a: float, t: float, T: float, xi, lam: float):
    """Time-integrated source kernel of the k=1/2 bond series.

    Equal to (a^2/2) xi exp(xi(sqrt(2)/a - tau)) (2 e^eps - eps^2 -
    2 eps - 2) / (lam + xi)^3 with eps = (lam + xi)(T - t); the bracket
    has a removable third-order zero at lam + xi = 0, so below
    |eps| = 1e-3 the evaluation switches to the Taylor series in eps.
    """
    tau = T - t
    if tau < 0.0:
        raise OutOfDomain("need t <= T")
    xs = np.asarray(xi, dtype=float)
    if tau == 0.0:
        out = np.zeros_like(xs)
        return float(out) if np.ndim(xi) == 0 else out
    beta = lam + xs
    eps = beta * tau
    pref = 0.5 * a * a * xs * np.exp(xs * (_SQRT2 / a - tau))

    big = np.abs(eps) > _H_SWITCH
    beta_safe = np.where(big, beta, 1.0)
    # expm1 keeps the bracket accurate into the cancellation regime
    # approaching the branch switch.
    bracket = 2.0 * (np.expm1(eps) - eps * (1.0 + 0.5 * eps))
    direct = bracket / beta_safe ** 3

    # sum_{j>=0} 2 eps^j / (j+3)!, times tau^3.
    series = np.zeros_like(xs)
    term = np.full_like(xs, 2.0 / 6.0)
    j = 0
    while True:
        series = series + term
        if np.all(np.abs(term) <= _H_SERIES_TOL * np.abs(series)) or j > 40:
            break
        j += 1
        term = term * eps / (j + 3.0)
    series = series * tau ** 3

    out = pref * np.where(big, direct, series)
    return float(out) if np.ndim(xi) == 0 else out


def bond_k_half(p: ModelParams, sys: EigenSystem, t: float, x,
                T: float, quad: QuadSpec = DEFAULT_QUAD,
                series_rel_tol: float = SERIES_REL_TOL):
    """Zero-coupon bond price for k=1/2 from the eigenfunction series.

    Boundary starting points short-circuit to the absorbed closed
    forms; interior points sum x exp(sqrt(2)x/a) M_n(x)/c_n against the
    xi-integrated kernel, one quadrature per eigenpair.  `x` may be an
    array: the kernel quadratures do not depend on x, so a batch call
    prices every point for the cost of one.
    """
    if p is not sys.params and p != sys.params:
        raise ValueError("params do not match the eigensystem")
    if t >= T:
        raise OutOfDomain("need t < T")
    tau = T - t
    scalar = np.ndim(x) == 0
    if scalar:
        x = float(x)
        if not 0.0 <= x <= p.L:
            raise OutOfDomain("x must lie in [0, L]")
        if x == 0.0:
            return 1.0
        if x == p.L:
            return math.exp(-p.L * tau)
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0.0) or np.any(xs > p.L):
        raise OutOfDomain("x must lie in [0, L]")
    a = p.a
    total = np.exp(-xs * tau)
    last_term = np.zeros_like(total)
    for pr in sys.pairs:
        def integrand(xi, n=pr.n, lam=pr.lam):
            return (h_kernel_k_half(a, t, T, xi, lam)
                    * sys.kummer_factor(n, xi))

        coeff = integrate(integrand, 0.0, p.L, quad) / pr.c_n
        last_term = (xs * np.exp(_SQRT2 * xs / a)
                     * sys.kummer_factor(pr.n, xs) * coeff)
        total = total + last_term
    if np.any(np.abs(last_term) > series_rel_tol * np.abs(total)):
        raise SeriesNotConverged(
            f"last series term {np.max(np.abs(last_term)):.3e} above "
            f"{series_rel_tol:.0e} of the sum; raise n_max")
    return float(total) if scalar else total


# ---------------------------------------------------------------------------
# k = -1/2: double-quadrature bond over the continuous spectrum
# ---------------------------------------------------------------------------

def _s2_series(w):
    """sum w^m / (m! (m+2)); the integral of v e^{dv} over [0,1] scaled."""
    total = np.zeros_like(w)
    term = np.full_like(w, 0.5)
    m = 0
    while True:
        total = total + term
        if np.all(np.abs(term) <= 1e-16 * np.abs(total)) or m > 30:
            return total
        m += 1
        term = term * w * (m + 1) / (m * (m + 2.0))


def _s3_series(w):
    """sum w^m / (m! (m+3))."""
    total = np.zeros_like(w)
    term = np.full_like(w, 1.0 / 3.0)
    m = 0
    while True:
        total = total + term
        if np.all(np.abs(term) <= 1e-16 * np.abs(total)) or m > 30:
            return total
        m += 1
        term = term * w * (m + 2) / (m * (m + 3.0))


def h_far_k_neg_half(tau: float, tau_min: float, xi, big_a):
    """Far part of the k=-1/2 time kernel, integrated over the source
    times at least tau_min before the horizon.

    This is the integral over v in [0, tau - tau_min] of
    exp(-A(tau - v) - xi v)(-v)(1 - v xi); every exponential in the
    result carries at least exp(-A tau_min), restoring the Gaussian
    rho-envelope the truncation relies on.  The removable singularity
    at A = xi switches to series in d = A - xi.
    """
    xs = np.asarray(xi, dtype=float)
    aa = np.asarray(big_a, dtype=float)
    tp = tau - tau_min
    if tp <= 0.0:
        raise ValueError("tau must exceed tau_min")
    d = aa - xs
    w = d * tp
    big = np.abs(w) > _HFAR_SWITCH
    d_safe = np.where(big, d, 1.0)

    e_near = np.exp(-aa * tau_min - xs * tp)
    e_full = np.exp(-aa * tau)
    direct = -(e_near * ((w - 1.0) / d_safe ** 2
                         - xs * (w * w - 2.0 * w + 2.0) / d_safe ** 3)
               + e_full * (1.0 / d_safe ** 2 + 2.0 * xs / d_safe ** 3))
    series = -e_full * (tp ** 2 * _s2_series(w) - xs * tp ** 3 * _s3_series(w))
    out = np.where(big, direct, series)
    return float(out) if (np.ndim(xi) == 0 and np.ndim(big_a) == 0) else out


def _near_sliver(p: ModelParams, t: float, x: float, T: float) -> float:
    """Delta-limit value of the clipped time sliver of the bond integral.

    Equals exp(-f(x)) times the integral of the bond source q(s, x)
    over s in [t, t + tau_min]; exact in the s-dependence of q, with
    the density's spread around x contributing the O(tau_min^2) error.
    """
    # exp(-f(x)) q(s, x) for the unit payoff collapses to
    # (a^2/2) x^2 exp(-(T-s)x) (s-T)(1 + (s-T)x); integrate by GK15.
    half = 0.5 * TAU_MIN
    mid = t + half
    s = mid + half * _XK

    def val(sv):
        st = sv - T
        return 0.5 * p.a ** 2 * x * x * np.exp(st * x) * st * (1.0 + st * x)

    return half * float(np.dot(_WK, val(s)))


# Hankel-asymptotics switch for the inner spectral integral: beyond
# phase u w = _PHASE_ASYM the Bessel factors are replaced by their
# large-argument form and integrated against exp(i u w) exactly.
_PHASE_ASYM = 30.0
_FILON_DEG = 10
_FILON_DOUBLINGS = 5


def _hankel_a(nu: float, r_max: int) -> np.ndarray:
    """Coefficients a_r of the large-argument Hankel expansion."""
    out = np.empty(r_max + 1)
    out[0] = 1.0
    acc = 1.0
    for r in range(1, r_max + 1):
        acc *= (4.0 * nu * nu - (2 * r - 1) ** 2) / (8.0 * r)
        out[r] = acc
    return out


_CHEB_T = np.cos(np.pi * np.arange(_FILON_DEG + 1) / _FILON_DEG)


def _filon_panel(u: float, lo: float, hi: float, phi) -> complex:
    """Integral of phi(w) exp(i u w) over [lo, hi] for smooth phi.

    Chebyshev interpolation of phi against exact complex moments of
    t^m exp(i theta t); the upward moment recurrence is stable because
    panels are cut so that theta = u (hi - lo) / 2 stays above the
    polynomial degree.
    """
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    theta = u * half
    vals = phi(mid + half * _CHEB_T)
    coef = np.polynomial.chebyshev.chebfit(_CHEB_T, vals, _FILON_DEG)
    power = np.polynomial.chebyshev.cheb2poly(coef)
    e_plus = complex(math.cos(theta), math.sin(theta))
    e_minus = e_plus.conjugate()
    moments = np.empty(_FILON_DEG + 1, dtype=complex)
    moments[0] = 2.0 * math.sin(theta) / theta
    iu = 1j * theta
    for m in range(1, _FILON_DEG + 1):
        sgn = -1.0 if m % 2 else 1.0
        moments[m] = (e_plus - sgn * e_minus) / iu - (m / iu) * moments[m - 1]
    phase_mid = complex(math.cos(u * mid), math.sin(u * mid))
    return half * phase_mid * complex(np.dot(power, moments))


def _inner_spectral(p: ModelParams, rho: float, s_of_xi,
                    hankel: np.ndarray, w_quad: QuadSpec) -> float:
    """Integral over xi in (0, L) of theta(rho, xi) s_of_xi(xi).

    Evaluated in w = sqrt(L / xi), where the Bessel phase u w is linear:
    a short numeric stretch up to phase _PHASE_ASYM, then Filon panels
    on the Hankel form with doubling widths and a two-term endpoint
    correction for the remainder.  s_of_xi must be smooth, bounded near
    xi = 0, and vectorized.
    """
    nu = 2.0 * _SQRT2 / p.a
    u = nu * rho
    two_l = 2.0 * p.L

    def numeric(w):
        ws = np.asarray(w, dtype=float)
        xi = p.L / ws ** 2
        return (two_l * ws ** -3.0 * theta_rho(p, rho, xi)
                * s_of_xi(xi))

    w_f = max(1.0, _PHASE_ASYM / u)
    total = 0.0
    if w_f > 1.0:
        total += integrate(numeric, 1.0, w_f, w_quad)

    # Hankel form J_sigma(z) ~ Re[sqrt(2/(pi z)) e^{i(z - sigma pi/2
    # - pi/4)} H(z)] with H shared by both orders (it depends on nu^2),
    # so theta collapses to Re[e^{iuw} Phi(w)] for a smooth Phi.
    j_pos = bessel_j(nu, u)
    j_neg = bessel_j(-nu, u)
    d_u = (j_pos * np.exp(1j * (0.5 * nu * math.pi - 0.25 * math.pi))
           - j_neg * np.exp(1j * (-0.5 * nu * math.pi - 0.25 * math.pi)))
    c_u = two_l * d_u * math.sqrt(2.0 / (math.pi * u)) / abs_k_imag(nu, u)

    def phi(w):
        ws = np.asarray(w, dtype=float)
        z = u * ws
        h_ser = np.zeros_like(ws, dtype=complex)
        for r in range(hankel.size - 1, -1, -1):
            h_ser = h_ser / z + (1j ** r) * hankel[r]
        return c_u * ws ** -3.5 * h_ser * s_of_xi(p.L / ws ** 2)

    w_lo = w_f
    tail = 0.0 + 0.0j
    for _ in range(_FILON_DOUBLINGS):
        w_hi = 2.0 * w_lo
        tail += _filon_panel(u, w_lo, w_hi, phi)
        w_lo = w_hi
    # Two-term integration-by-parts remainder beyond the last panel.
    end = w_lo
    phi_end = complex(phi(np.array([end]))[0])
    dw = 1e-3 * end
    phi_p = complex((phi(np.array([end + dw]))[0]
                     - phi(np.array([end - dw]))[0]) / (2.0 * dw))
    e_end = complex(math.cos(u * end), math.sin(u * end))
    tail += e_end * (-phi_end / (1j * u) + phi_p / (1j * u) ** 2)
    return total + tail.real


def bond_k_neg_half(p: ModelParams, t: float, x: float, T: float,
                    quad: QuadSpec | None = None) -> float:
    """Zero-coupon bond price for k=-1/2 by spectral double quadrature.

    Outer quadrature over the spectral parameter rho up to the Gaussian
    cutoff for the tau_min-split kernel; the inner integral over the
    source state is the Filon-accelerated _inner_spectral.
    """
    if not 0.0 <= x <= p.L:
        raise OutOfDomain("x must lie in [0, L]")
    tau = T - t
    if tau < TAU_MIN:
        raise HorizonTooShort(f"T - t = {tau} below the {TAU_MIN} floor")
    if x == 0.0:
        return 1.0
    if x == p.L:
        return math.exp(-p.L * tau)
    if quad is None:
        quad = QuadSpec(abs_tol=2e-9, rel_tol=1e-8, max_depth=48)
    nu = 2.0 * _SQRT2 / p.a
    csc = 1.0 / math.sin(nu * math.pi)
    pref = 0.5 * p.L * math.pi ** 2 * csc ** 2
    w_quad = QuadSpec(abs_tol=1e-12, rel_tol=1e-10, max_depth=48)
    hankel = _hankel_a(nu, 8)

    def outer(rho_nodes):
        rr = np.atleast_1d(np.asarray(rho_nodes, dtype=float))
        out = np.empty_like(rr)
        for i, rho in enumerate(rr):
            if rho <= 0.0:
                out[i] = 0.0
                continue
            th_x = float(theta_rho(p, rho, x))
            big_a = p.L * rho * rho
            out[i] = rho * th_x * _inner_spectral(
                p, rho,
                lambda xi: h_far_k_neg_half(tau, TAU_MIN, xi, big_a),
                hankel, w_quad)
        return out if np.ndim(rho_nodes) else float(out[0])

    # Both kernel pieces decay at least like exp(-L rho^2 tau_min).
    rho_max = math.sqrt(math.log(1e12) / (p.L * TAU_MIN))
    far = integrate(outer, 0.0, rho_max, quad)
    # exp(-f(x)) is already folded into the sliver's closed form.
    return math.exp(-x * tau) + pref * far + _near_sliver(p, t, x, T)


# ---------------------------------------------------------------------------
# Generic Duhamel pricer
# ---------------------------------------------------------------------------

def _duhamel_discrete(p: ModelParams, field: DensityField, pay: Payoff,
                      t: float, x: float, T: float, f_offset: float,
                      xi_panels: int, s_quad: QuadSpec) -> float:
    """Time-state double integral of density times source, k = 1/2.

    Adaptive in the intermediate time s, fixed composite panels in the
    state xi so the cached eigenfunction values are reused across every
    s evaluation.
    """
    edges = np.linspace(0.0, p.L, xi_panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1] - edges[0])
    xi_nodes = (mid[:, None] + half * _XK[None, :]).ravel()
    xi_wts = np.tile(half * _WK, xi_panels)

    def time_slice(s_nodes):
        ss = np.atleast_1d(np.asarray(s_nodes, dtype=float))
        out = np.empty_like(ss)
        for i, s in enumerate(ss):
            q_vals = q_source(p, pay, float(s), xi_nodes, T, f_offset)
            dens = np.array([density(field, t, x, float(s), float(y))
                             for y in xi_nodes])
            out[i] = float(np.dot(xi_wts, dens * q_vals))
        return out if np.ndim(s_nodes) else float(out[0])

    return integrate(time_slice, t + TAU_MIN, T, s_quad)


def _duhamel_continuous(p: ModelParams, pay: Payoff, t: float, x: float,
                        T: float, f_offset: float,
                        s_quad: QuadSpec) -> float:
    """Time-state double integral of density times source, k = -1/2.

    The spectral integral of the density is hoisted outside the state
    integral, so each (s, rho) pair needs one Filon-accelerated pass
    over the source state instead of one Bessel quadrature per state
    node.  Mathematically this is still the plain double integral.
    """
    nu = 2.0 * _SQRT2 / p.a
    csc = 1.0 / math.sin(nu * math.pi)
    pref = 0.5 * p.L * math.pi ** 2 * csc ** 2 * x ** (-0.5 * nu)
    hankel = _hankel_a(nu, 8)
    w_quad = QuadSpec(abs_tol=1e-10, rel_tol=1e-9, max_depth=48)
    rho_quad = QuadSpec(abs_tol=1e-8, rel_tol=1e-7, max_depth=44)

    def time_slice(s_nodes):
        ss = np.atleast_1d(np.asarray(s_nodes, dtype=float))
        out = np.empty_like(ss)
        for i, s in enumerate(ss):
            tau_s = float(s) - t

            def s_q(xi, s=float(s)):
                # Chebyshev panel edges can overshoot the cap by an ulp.
                xs = np.minimum(np.asarray(xi, dtype=float), p.L)
                return (model.speed_density(p, xs) * xs ** (-0.5 * nu)
                        * q_source(p, pay, s, xs, T, f_offset))

            def rho_slice(rho_nodes):
                rr = np.atleast_1d(np.asarray(rho_nodes, dtype=float))
                vals = np.empty_like(rr)
                for j, rho in enumerate(rr):
                    if rho <= 0.0:
                        vals[j] = 0.0
                        continue
                    damp = math.exp(-p.L * rho * rho * tau_s)
                    vals[j] = (rho * damp * float(theta_rho(p, rho, x))
                               * _inner_spectral(p, rho, s_q, hankel,
                                                 w_quad))
                return vals if np.ndim(rho_nodes) else float(vals[0])

            out[i] = pref * integrate(rho_slice, 0.0, rho_cutoff(p, tau_s),
                                      rho_quad)
        return out if np.ndim(s_nodes) else float(out[0])

    return integrate(time_slice, t + TAU_MIN, T, s_quad)


def price_general(p: ModelParams, field: DensityField, pay: Payoff,
                  t: float, x: float, T: float, f_offset: float = 0.0,
                  xi_panels: int = 12,
                  s_quad: QuadSpec = QuadSpec(abs_tol=1e-8, rel_tol=1e-7,
                                              max_depth=40)) -> float:
    """Price a smooth terminal payoff from the transition density.

    Nested quadrature of the Duhamel double integral: adaptive in the
    intermediate time s on [t + tau_min, T], backend-specific in the
    state, plus the delta-limit closed form for the clipped
    [t, t + tau_min] sliver.
    """
    if not 0.0 < x < p.L:
        raise OutOfDomain("x must lie in (0, L)")
    if t < 0.0 or T - t < TAU_MIN:
        raise HorizonTooShort("need T - t >= the density horizon floor")

    if T - t - TAU_MIN < 1e-14:
        integral = 0.0
    elif field.eigen is not None:
        integral = _duhamel_discrete(p, field, pay, t, x, T, f_offset,
                                     xi_panels, s_quad)
    else:
        integral = _duhamel_continuous(p, pay, t, x, T, f_offset, s_quad)

    # Sliver: density collapses to the delta at x for s near t.
    s_half = 0.5 * TAU_MIN
    s_mid = t + s_half
    s_sl = s_mid + s_half * _XK
    q_sl = np.array([float(q_source(p, pay, float(s), x, T, f_offset))
                     for s in s_sl])
    sliver = s_half * float(np.dot(_WK, q_sl))

    f_x = float(model.f_func(p, x)) + f_offset
    g_x = float(np.asarray(pay.g(x), dtype=float))
    return math.exp(-x * (T - t)) * g_x + math.exp(-f_x) * (integral + sliver)


def yield_curve(p: ModelParams, pricer, x: float,
                maturities: list[float]) -> Curve:
    """Evaluate bonds at each maturity and convert to yields.

    pricer is any callable (t, x, T) -> bond price, letting callers
    choose the series, double-quadrature, or generic route.
    """
    mats = [float(m) for m in maturities]
    if any(m2 <= m1 for m1, m2 in zip(mats, mats[1:])):
        raise ValueError("maturities must be strictly increasing")
    if mats and mats[0] < TAU_MIN:
        raise ValueError(f"maturities must be >= {TAU_MIN}")
    points = []
    for m in mats:
        b = float(pricer(0.0, x, m))
        points.append(CurvePoint(m, b, -math.log(b) / m))
    return Curve(p, tuple(points))
