"""Spectral machinery for the two tractable family members.

For k = 1/2 the transformed generator has a purely discrete spectrum;
eigenvalues are roots of a Kummer function and eigenfunctions are
x * M(alpha_n, 2; -(2 sqrt(2)/a) x) normalized against the speed
density.  For k = -1/2 the spectrum is purely continuous on (-inf, 0);
the improper eigenfunctions combine Bessel J of orders +-2 sqrt(2)/a
and the transition density is an integral over the spectral parameter
rho with Gaussian damping exp(-L rho^2 (T-t)).

Transition densities refuse horizons shorter than TAU_MIN: both
backends would need unbounded truncation orders to resolve the delta
limit, which is instead covered by short-time identity tests.

A note on normalization: the printed eigenfunction prefactor
sqrt(a/(2 c_n)) makes <psi_n, psi_n> = 1 only for a = 1 (the value used
in all quoted figures).  The prefactor a/sqrt(2 c_n) used here satisfies
the normalization for every a and reproduces the printed density series
verbatim, so the two agree wherever the source quotes numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import model
from .model import ModelParams, OutOfDomain
from .numerics import DEFAULT_QUAD, QuadSpec, bracket_from, find_root, integrate
from .specfun import abs_k_imag, bessel_i, bessel_j, bessel_k, kummer_m

_SQRT2 = math.sqrt(2.0)

TAU_MIN = 0.01
# Damping threshold defining the rho-integral truncation point.
RHO_TAIL_EPS = 1e-12
# psi(rho, x) oscillates without bound as x -> 0; refuse evaluation
# below this fraction of L.
X_FLOOR_FACTOR = 1e-6
# Discrete series terms are skipped once their envelope bound drops
# below this.
_TERM_FLOOR = 1e-15

_SCAN_LIMIT_FACTOR = 1e4


class BracketScanExhausted(RuntimeError):
    """Eigenvalue scan ran past its cutoff without enough sign changes."""


class IndexOutOfRange(ValueError):
    """Eigenfunction index outside the solved range."""


class HorizonTooShort(ValueError):
    """Density evaluation requested below the TAU_MIN horizon."""


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalue lam (< 0) and its normalization integral c_n (> 0)."""

    n: int
    lam: float
    c_n: float


def _require_k(p: ModelParams, k: float, what: str) -> None:
    if p.k != k:
        raise ValueError(f"{what} requires k={k}, got k={p.k}")


class EigenSystem:
    """Solved discrete spectrum for k=1/2, with cached evaluations.

    Immutable after construction apart from internal memo tables; all
    evaluation methods are pure.
    """

    def __init__(self, params: ModelParams, pairs: tuple[EigenPair, ...]):
        self.params = params
        self.pairs = pairs
        self.n_max = len(pairs)
        self._m_cache: dict[tuple[int, float], float] = {}
        self._env_cache: dict[int, tuple[float, float]] = {}

    def alpha(self, n: int) -> float:
        """First Kummer parameter 1 - lam_n / (a sqrt(2))."""
        return 1.0 - self.pair(n).lam / (self.params.a * _SQRT2)

    def pair(self, n: int) -> EigenPair:
        if not 1 <= n <= self.n_max:
            raise IndexOutOfRange(f"n={n} outside 1..{self.n_max}")
        return self.pairs[n - 1]

    def kummer_factor(self, n: int, x):
        """M(alpha_n, 2; -(2 sqrt(2)/a) x), cached for scalar x."""
        a = self.params.a
        z = -(2.0 * _SQRT2 / a) * x
        if np.ndim(x) == 0:
            key = (n, float(x))
            hit = self._m_cache.get(key)
            if hit is None:
                hit = float(kummer_m(self.alpha(n), 2.0, float(z)))
                self._m_cache[key] = hit
            return hit
        return kummer_m(self.alpha(n), 2.0, z)

    def psi(self, n: int, x):
        """Normalized eigenfunction; vanishes at both endpoints."""
        pr = self.pair(n)
        norm = self.params.a / math.sqrt(2.0 * pr.c_n)
        return norm * x * self.kummer_factor(n, x)

    def envelopes(self, n: int) -> tuple[float, float]:
        """Coarse upper estimates of sup|psi_n| and sup|psi_n * m_tilde|."""
        hit = self._env_cache.get(n)
        if hit is None:
            L = self.params.L
            xs = np.linspace(L * 1e-3, L, 80)
            pv = np.asarray(self.psi(n, xs), dtype=float)
            mv = model.speed_density(self.params, xs)
            hit = (1.5 * float(np.max(np.abs(pv))),
                   1.5 * float(np.max(np.abs(pv * mv))))
            self._env_cache[n] = hit
        return hit

    def truncation_bound(self, tau: float) -> float:
        """Crude bound on the dropped density tail beyond n_max."""
        last = self.pairs[-1]
        e_psi, e_psim = self.envelopes(last.n)
        return math.exp(last.lam * tau) * e_psi * e_psim * self.n_max


def solve_eigen(p: ModelParams, n_max: int = 25,
                quad: QuadSpec = DEFAULT_QUAD) -> EigenSystem:
    """Find the first n_max eigenvalues and normalization integrals.

    Roots of M(1 - lam/(a sqrt(2)), 2; -(2 sqrt(2)/a) L) are bracketed
    by scanning lam downward from zero in steps of a/sqrt(2) and
    refined by Brent iteration; the scan aborts below -1e4 * a.
    """
    _require_k(p, 0.5, "discrete eigensolver")
    if n_max < 1:
        raise ValueError("n_max must be positive")
    a, L = p.a, p.L
    z_l = -(2.0 * _SQRT2 / a) * L

    def eigencondition(lam: float) -> float:
        return float(kummer_m(1.0 - lam / (a * _SQRT2), 2.0, z_l))

    step = a / _SQRT2
    limit = -_SCAN_LIMIT_FACTOR * a
    pairs = []
    lam_prev, f_prev = 0.0, eigencondition(0.0)
    i = 0
    while len(pairs) < n_max:
        i += 1
        lam_next = -i * step
        if lam_next < limit:
            raise BracketScanExhausted(
                f"found {len(pairs)} of {n_max} eigenvalues above {limit}")
        f_next = eigencondition(lam_next)
        if f_prev == 0.0 or (f_prev < 0.0) != (f_next < 0.0):
            lo, hi = lam_next, lam_prev
            root = find_root(eigencondition, bracket_from(eigencondition, lo, hi))
            n = len(pairs) + 1
            alpha = 1.0 - root / (a * _SQRT2)

            def c_integrand(x, alpha=alpha):
                m = kummer_m(alpha, 2.0, -(2.0 * _SQRT2 / a) * x)
                return x * np.exp(2.0 * _SQRT2 * x / a) * m * m

            c_n = integrate(c_integrand, 0.0, L, quad)
            pairs.append(EigenPair(n, root, c_n))
        lam_prev, f_prev = lam_next, f_next
    return EigenSystem(p, tuple(pairs))


def psi_n(sys: EigenSystem, n: int, x):
    """Discrete eigenfunction psi_n evaluated at x in [0, L]."""
    xs = np.asarray(x, dtype=float)
    if np.any((xs < 0.0) | (xs > sys.params.L)):
        raise OutOfDomain(f"x must lie in [0, {sys.params.L}]")
    return sys.psi(n, x)


# ---------------------------------------------------------------------------
# Continuous spectrum, k = -1/2
# ---------------------------------------------------------------------------

def theta_rho(p: ModelParams, rho, x):
    """Cross product of Bessel J at orders +-2 sqrt(2)/a over |K(i...)|.

    This is the x-dependent bracket of the improper eigenfunction
    with the x^(-sqrt(2)/a) prefactor stripped; it vanishes identically
    at x = L.  Vectorized over rho for scalar x, or over x for scalar
    rho (one direction at a time; the bond quadratures need both).
    """
    _require_k(p, -0.5, "continuous-spectrum machinery")
    nu = 2.0 * _SQRT2 / p.a
    if np.ndim(x) > 0:
        if np.ndim(rho) > 0:
            raise OutOfDomain("only one of rho, x may be an array")
        xs = np.asarray(x, dtype=float)
        u = nu * float(rho)
        j_pos_u = bessel_j(nu, u)
        j_neg_u = bessel_j(-nu, u)
        scale = np.sqrt(p.L / xs)
        at_l = scale == 1.0
        args = np.where(at_l, 2.0 * u, u * scale)
        bracket = (j_pos_u * bessel_j(-nu, args)
                   - j_neg_u * bessel_j(nu, args))
        return np.where(at_l, 0.0, bracket) / abs_k_imag(nu, u)
    u = np.asarray(nu * np.asarray(rho, dtype=float))
    scale = math.sqrt(p.L / x)
    j_pos_u = bessel_j(nu, u)
    j_neg_u = bessel_j(-nu, u)
    if scale == 1.0:
        bracket = j_pos_u * j_neg_u - j_neg_u * j_pos_u
    else:
        bracket = (j_pos_u * bessel_j(-nu, u * scale)
                   - j_neg_u * bessel_j(nu, u * scale))
    return bracket / abs_k_imag(nu, u)


def psi_rho(p: ModelParams, rho: float, x: float) -> float:
    """Improper eigenfunction of the continuous spectrum at (rho, x).

    Delta-normalized in rho against the speed density.  Evaluation is
    refused for x below 1e-6 * L where the Bessel cross terms oscillate
    without bound.
    """
    _require_k(p, -0.5, "improper eigenfunctions")
    if rho <= 0.0:
        raise OutOfDomain("rho must be positive")
    if not X_FLOOR_FACTOR * p.L <= x <= p.L:
        raise OutOfDomain(
            f"x must lie in [{X_FLOOR_FACTOR * p.L}, {p.L}]")
    nu = 2.0 * _SQRT2 / p.a
    pref = (math.sqrt(0.5 * p.L * rho) * math.pi / math.sin(nu * math.pi)
            * x ** (-0.5 * nu))
    return pref * float(theta_rho(p, rho, x))


def rho_cutoff(p: ModelParams, tau: float) -> float:
    """Truncation point where exp(-L rho^2 tau) falls below RHO_TAIL_EPS."""
    return math.sqrt(math.log(1.0 / RHO_TAIL_EPS) / (p.L * tau))


# ---------------------------------------------------------------------------
# Transition density
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DensityField:
    """Assembled transition-density backend for one parameter set.

    Exactly one of the two backends is populated, matching the spectral
    class of the parameters: eigen for the discrete k=1/2 series,
    a quadrature rule for the continuous k=-1/2 integral.
    """

    params: ModelParams
    eigen: EigenSystem | None = None
    quad: QuadSpec = DEFAULT_QUAD

    def __post_init__(self) -> None:
        kind = model.classify_spectrum(self.params).kind
        if kind == "discrete":
            if self.eigen is None:
                raise ValueError("discrete spectrum needs an EigenSystem")
        elif kind == "continuous":
            if self.eigen is not None:
                raise ValueError("continuous spectrum takes no EigenSystem")
        else:
            raise ValueError(
                f"no density backend for spectrum class '{kind}'")


def make_density_field(p: ModelParams, n_max: int = 25,
                       quad: QuadSpec = DEFAULT_QUAD) -> DensityField:
    """Build the density backend appropriate to the spectrum of p."""
    kind = model.classify_spectrum(p).kind
    if kind == "discrete":
        _require_k(p, 0.5, "the discrete density backend")
        return DensityField(p, eigen=solve_eigen(p, n_max, quad), quad=quad)
    if kind == "continuous":
        _require_k(p, -0.5, "the continuous density backend")
        return DensityField(p, eigen=None, quad=quad)
    raise ValueError(f"no density backend for spectrum class '{kind}'")


def _check_density_args(p: ModelParams, t: float, x: float, T: float,
                        y: float) -> float:
    if t < 0.0:
        raise OutOfDomain("t must be non-negative")
    tau = T - t
    if tau < TAU_MIN:
        raise HorizonTooShort(f"T - t = {tau} below the {TAU_MIN} floor")
    if not 0.0 < x < p.L:
        raise OutOfDomain("x must lie in (0, L)")
    if not 0.0 < y <= p.L:
        raise OutOfDomain("y must lie in (0, L]")
    return tau


def density(field: DensityField, t: float, x: float, T: float,
            y: float) -> float:
    """Sub-probability transition density of the interior part of X
    under the transformed measure, from state x at t to y at T."""
    p = field.params
    tau = _check_density_args(p, t, x, T, y)
    if field.eigen is not None:
        sys = field.eigen
        m_y = float(model.speed_density(p, y))
        total = 0.0
        for pr in sys.pairs:
            e_psi, e_psim = sys.envelopes(pr.n)
            weight = math.exp(pr.lam * tau)
            if weight * e_psi * e_psim < _TERM_FLOOR:
                break
            total += weight * sys.psi(pr.n, x) * sys.psi(pr.n, y) * m_y
        return total

    # Continuous backend: Gaussian-damped integral over rho.
    if x < X_FLOOR_FACTOR * p.L:
        raise OutOfDomain("x below the continuous-backend floor")
    nu = 2.0 * _SQRT2 / p.a
    if y == p.L:
        return 0.0
    m_y = float(model.speed_density(p, y))
    csc = 1.0 / math.sin(nu * math.pi)
    pref = (m_y * 0.5 * p.L * math.pi ** 2 * csc ** 2
            * (x * y) ** (-0.5 * nu))

    def integrand(rho):
        rr = np.asarray(rho, dtype=float)
        return (np.exp(-p.L * rr ** 2 * tau) * rr
                * theta_rho(p, rr, x) * theta_rho(p, rr, y))

    value = integrate(integrand, 0.0, rho_cutoff(p, tau), field.quad)
    return pref * value


# ---------------------------------------------------------------------------
# Green's function Wronskian cross-check, k = -1/2
# ---------------------------------------------------------------------------

def greens_wronskian(p: ModelParams, lam: float, x: float) -> float:
    """Wronskian of the increasing/decreasing resolvent solutions.

    Evaluates (psi' phi - psi phi') / s_tilde at the given x from the
    closed Bessel forms; the result is independent of x and equal to
    (1/2) K_nu(nu sqrt(lam / L)) with nu = 2 sqrt(2)/a, which is what
    constancy tests verify.
    """
    _require_k(p, -0.5, "the resolvent Wronskian")
    if lam <= 0.0:
        raise OutOfDomain("lam must be positive (resolvent abscissa)")
    if not 0.0 < x < p.L:
        raise OutOfDomain("x must lie in (0, L)")
    a, L = p.a, p.L
    c = _SQRT2 / a
    nu = 2.0 * c
    w = nu * math.sqrt(lam / x)
    w_l = nu * math.sqrt(lam / L)

    k_w = bessel_k(nu, w)
    i_w = bessel_i(nu, w)
    k_l = bessel_k(nu, w_l)
    i_l = bessel_i(nu, w_l)
    kp_w = -0.5 * (bessel_k(nu - 1.0, w) + bessel_k(nu + 1.0, w))
    ip_w = 0.5 * (bessel_i(nu - 1.0, w) + bessel_i(nu + 1.0, w))

    # d/dx of the Bessel argument w(x) is -w/(2x).
    psi = x ** (-c) * k_w
    phi = x ** (-c) * (i_w * k_l - i_l * k_w)
    dpsi = x ** (-c - 1.0) * (-c * k_w - 0.5 * w * kp_w)
    dphi = x ** (-c - 1.0) * (-c * (i_w * k_l - i_l * k_w)
                              - 0.5 * w * (ip_w * k_l - i_l * kp_w))
    s_t = float(model.scale_density(p, x))
    return (dpsi * phi - psi * dphi) / s_t
