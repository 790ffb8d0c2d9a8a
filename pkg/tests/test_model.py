"""Coefficient, transform, and boundary-classification checks."""

import math

import numpy as np
import pytest

from hfl.model import (
    BoundaryClass,
    ModelParams,
    OutOfDomain,
    classify_origin,
    classify_origin_numeric,
    classify_spectrum,
    drift,
    drift_tilde,
    f_func,
    f_prime,
    liouville,
    scale_density,
    speed_density,
    vol,
)
from hfl.numerics import fd_derivatives

_SQRT2 = math.sqrt(2.0)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(k=math.nan, a=1.0, L=1.0)
    with pytest.raises(ValueError):
        ModelParams(k=0.5, a=0.0, L=1.0)
    with pytest.raises(ValueError):
        ModelParams(k=0.5, a=1.0, L=-2.0)


def test_params_rejects_integer_bessel_order():
    # a = 2 sqrt(2)/3 puts the order 2 sqrt(2)/a exactly on 3, where the
    # continuous-spectrum connection formulas blow up.
    with pytest.raises(ValueError):
        ModelParams(k=-0.5, a=2.0 * _SQRT2 / 3.0, L=1.0)


def test_params_rejects_large_bessel_order():
    with pytest.raises(ValueError):
        ModelParams(k=-0.5, a=0.1, L=1.0)


def test_origin_classification_rule():
    cases = {
        -0.7: BoundaryClass.NATURAL,
        0.0: BoundaryClass.NATURAL,
        0.3: BoundaryClass.EXIT,
        0.5: BoundaryClass.EXIT,
        0.8: BoundaryClass.REGULAR,
    }
    for k, want in cases.items():
        assert classify_origin(ModelParams(k=k, a=1.0, L=1.0)) is want, k


def test_spectrum_classification():
    assert classify_spectrum(ModelParams(k=0.5, a=1.0)).kind == "discrete"
    assert classify_spectrum(ModelParams(k=-0.5, a=1.0)).kind == "continuous"
    mixed = classify_spectrum(ModelParams(k=0.0, a=2.0))
    assert mixed.kind == "mixed"
    assert mixed.cutoff == -0.125


def test_coefficient_closed_forms():
    p = ModelParams(k=0.3, a=1.7, L=2.0)
    x = 0.6
    assert abs(vol(p, x) - 1.7 * x ** 0.7) < 1e-15
    assert abs(drift(p, x) - 1.7 ** 2 * 0.1 * x ** 0.4) < 1e-15
    want = drift(p, x) + 1.7 * _SQRT2 * x ** 1.2
    assert abs(drift_tilde(p, x) - want) < 1e-15


def test_f_prime_matches_vol_form():
    # f'(x) = -sqrt(2 x) / sigma(x) for every k.
    for k in (-0.5, 0.0, 0.5, 1.0):
        p = ModelParams(k=k, a=1.3, L=1.0)
        for x in (0.1, 0.5, 0.9):
            want = -math.sqrt(2.0 * x) / vol(p, x)
            assert abs(f_prime(p, x) - want) < 1e-14, (k, x)


def test_f_func_derivative():
    for k in (-0.5, 0.25, 0.5):
        p = ModelParams(k=k, a=1.0, L=1.0)
        d1, _ = fd_derivatives(lambda x: f_func(p, x), 0.4, 1e-6)
        assert abs(d1 - f_prime(p, 0.4)) < 2e-8, k


def test_f_func_logarithmic_branch():
    p = ModelParams(k=-0.5, a=1.1, L=1.0)
    x = 0.37
    assert abs(f_func(p, x) + (_SQRT2 / 1.1) * math.log(x)) < 1e-15


def test_f_func_k_half_is_linear():
    p = ModelParams(k=0.5, a=1.0, L=1.0)
    assert abs(f_func(p, 0.25) + _SQRT2 * 0.25) < 1e-15
    assert abs(f_func(p, 1.0) + _SQRT2) < 1e-15


def test_scale_speed_product_identity():
    # s_tilde * m_tilde * sigma^2 / 2 = 1 pins the shared normalization
    # constant across both density branches.
    for k in (-0.5, -0.2, 0.0, 0.5, 1.1):
        p = ModelParams(k=k, a=0.9, L=1.5)
        for x in (0.05, 0.6, 1.5):
            prod = (scale_density(p, x) * speed_density(p, x)
                    * vol(p, x) ** 2 / 2.0)
            assert abs(prod - 1.0) < 1e-12, (k, x)


def test_domain_guards():
    p = ModelParams(k=0.5, a=1.0, L=1.0)
    with pytest.raises(OutOfDomain):
        drift(p, 0.0)
    with pytest.raises(OutOfDomain):
        drift(p, 1.0)
    with pytest.raises(OutOfDomain):
        vol(p, 1.0 + 1e-12)
    # The cap itself stays inside the closed-right domains.
    assert vol(p, 1.0) == 1.0
    assert f_func(p, 1.0) == -_SQRT2


def test_liouville_k_half():
    p = ModelParams(k=0.5, a=1.0, L=1.0)
    z, u = liouville(p, 0.64)
    assert abs(z - 2.0 * 0.8) < 1e-15
    assert abs(u - (0.64 + 3.0 / (32.0 * 0.64))) < 1e-14


def test_liouville_k_zero_matches_cutoff():
    # At k=0 the potential is x plus a constant equal to minus the
    # continuum cutoff of the mixed spectrum.
    p = ModelParams(k=0.0, a=2.0, L=1.0)
    cut = classify_spectrum(p).cutoff
    for x in (0.2, 0.7):
        _, u = liouville(p, x)
        assert abs((u - x) + cut) < 1e-15


def test_liouville_array():
    p = ModelParams(k=0.5, a=1.0, L=1.0)
    z, u = liouville(p, np.array([0.25, 0.64]))
    assert z.shape == (2,)
    assert abs(u[1] - liouville(p, 0.64)[1]) < 1e-15


def test_numeric_probe_agrees_with_rule():
    # One representative from each boundary class; the full sweep lives
    # in the acceptance suite.
    for k in (-0.5, 0.5, 1.0):
        p = ModelParams(k=k, a=1.0, L=1.0)
        report = classify_origin_numeric(p)
        assert report.boundary is classify_origin(p), k
    exit_rep = classify_origin_numeric(ModelParams(k=0.5, a=1.0, L=1.0))
    assert exit_rep.i0_finite and not exit_rep.j0_finite
    nat_rep = classify_origin_numeric(ModelParams(k=-0.5, a=1.0, L=1.0))
    assert not nat_rep.i0_finite and not nat_rep.j0_finite


def test_numeric_probe_eps_guard():
    p = ModelParams(k=0.5, a=1.0, L=1.0)
    with pytest.raises(OutOfDomain):
        classify_origin_numeric(p, eps=1.0)
