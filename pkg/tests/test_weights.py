import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from heatlab import (
    TimeCurve,
    WeightFamily,
    antiderivative,
    coefficient_residuals,
    curvature_certificate,
    family_from_rate,
    first_family_rate,
    limit_family,
    minimal_stabilizer,
    quadratic_form_coefficients,
    refine_pair,
    run_refinement,
    solve_cross,
    solve_cross_bvp,
    solve_freq,
)
from heatlab.errors import CertificationError
from heatlab.timecurve import uniform_grid
from heatlab.weights import growth_identity, limit_rate


def test_antiderivative_zero_and_constant():
    zero = TimeCurve(np.zeros(129))
    assert np.max(np.abs(antiderivative(zero).values)) == 0.0
    one = TimeCurve(np.ones(129))
    t = one.nodes
    assert np.max(np.abs(antiderivative(one).values - (t - 1.0))) < 1e-14


def test_solve_cross_rejects_bad_boundary_data():
    zero = TimeCurve(np.zeros(129))
    with pytest.raises(ValueError, match="boundary data"):
        solve_cross(zero, antiderivative(zero), 3.0)


def test_fixed_point_family_has_zero_cross_coefficient():
    fam = limit_family(3.0)
    assert np.max(np.abs(fam.b.values)) == 0.0
    relation = fam.a.values * fam.clock() - fam.a.nodes / 9.0
    assert np.max(np.abs(relation)) < 1e-12


def test_cross_closed_form_value_against_quadrature(family3):
    # independent evaluation of b(1/2) through adaptive quadrature of the rate
    delta = 3.0
    rate = lambda s: s / (delta + 2.0 - 2.0 * s) ** 2
    big_a_half = -quad(rate, 0.5, 1.0, epsabs=1e-13)[0]
    expected = 2.0 * (rate(0.5) - 0.5 * math.exp(-8.0 * big_a_half) / delta**2)
    got = float(family3.b.sample_at(0.5))
    assert abs(got - expected) < 1e-10


def test_cross_bvp_route_matches_closed_form(family3):
    b_bvp = solve_cross_bvp(family3.a, family3.A)
    assert np.max(np.abs(b_bvp.values - family3.b.values)) < 1e-9


def test_cross_residual_certificate(family3):
    r1, _ = coefficient_residuals(family3)
    assert np.max(np.abs(r1.values)) < 1e-6


def test_freq_zero_inputs_give_zero():
    m = 128
    zero = TimeCurve(np.zeros(m + 1))
    T = solve_freq(zero, zero, zero, 3.0, residual_tol=None)
    assert np.max(np.abs(T.values)) < 1e-15


def test_freq_against_refined_midpoint_quadrature(family3):
    # rebuild T at 10x resolution with a plain midpoint rule and compare
    delta = 3.0
    m_fine = 5120
    a = first_family_rate(delta, m_fine)
    big_a = antiderivative(a)
    b = solve_cross(a, big_a, delta)
    h = a.h

    def midpoint_cum(values):
        mids = 0.5 * (values[1:] + values[:-1])
        out = np.zeros(values.size)
        np.cumsum(mids * h, out=out[1:])
        return out

    int_b2 = midpoint_cum(b.values**2)
    int_a2 = midpoint_cum(a.values**2)
    int_em = midpoint_cum(np.exp(-8.0 * big_a.values))
    c = (a.values[-1] - 2.0 * int_b2[-1] + 8.0 * int_a2[-1]) / int_em[-1]
    t_oracle = 2.0 * int_b2 - a.values - 8.0 * int_a2 + c * int_em
    coarse_on_fine = family3.T.sample_at(a.nodes)
    assert np.max(np.abs(coarse_on_fine - t_oracle)) < 1e-8


def test_freq_positive_interior_for_valid_families(family3):
    assert np.min(family3.T.values[1:-1]) > 0.0
    for delta in (2.5, 10.0):
        fam = family_from_rate(delta, first_family_rate(delta, 512))
        assert np.min(fam.T.values[1:-1]) > 0.0


def test_curvature_certificate_constant_rate():
    c = 0.3
    m = 256
    a = TimeCurve(np.full(m + 1, c))
    big_a = TimeCurve(c * (uniform_grid(m) - 1.0))
    cert = curvature_certificate(a, big_a)
    assert cert.verdict == "positive"
    # a'' and a' vanish, so the identity route reduces to 64 c^3 e^{8A};
    # the minimum over interior nodes sits at the first one
    expected_min = 64.0 * c**3 * math.exp(8.0 * c * (1.0 / m - 1.0))
    assert abs(cert.min_identity - expected_min) < 1e-10


def test_curvature_certificate_first_family(family3):
    cert = curvature_certificate(family3.a, family3.A)
    assert cert.verdict == "positive"
    assert cert.min_identity > 0.04


def test_curvature_certificate_limit_family_is_borderline():
    # the fixed point satisfies a e^{8A} = t/delta^2, so the curvature collapses
    a, big_a, _ = limit_rate(math.sqrt(5.0), 512)
    cert = curvature_certificate(a, big_a)
    assert cert.verdict == "nonnegative"
    assert abs(cert.min_identity) < 1e-8
    assert abs(cert.min_direct) < 1e-8


def test_coefficient_residuals_fixed_point(family3):
    fam = limit_family(3.0)
    r1, r2 = coefficient_residuals(fam)
    assert np.max(np.abs(r1.values)) < 1e-7
    assert np.max(np.abs(r2.values)) < 1e-5  # 1/(4t)-type steepness near t=0


def test_coefficient_residuals_shrink_at_stencil_order():
    sups = {}
    for m in (128, 256):
        fam = family_from_rate(3.0, first_family_rate(3.0, m))
        r1, r2 = coefficient_residuals(fam)
        sups[m] = (np.max(np.abs(r1.values)), np.max(np.abs(r2.values)))
    assert sups[128][0] / sups[256][0] > 8.0
    assert sups[128][1] / sups[256][1] > 8.0


def test_corrupted_cross_coefficient_is_detected(family3):
    t = family3.b.nodes
    bad_b = family3.b.with_values(family3.b.values + 1e-3 * t * (1.0 - t))
    bad = WeightFamily(delta=3.0, a=family3.a, A=family3.A, b=bad_b, T=family3.T)
    r1_bad, _ = coefficient_residuals(bad)
    r1_good, _ = coefficient_residuals(family3)
    assert np.max(np.abs(r1_bad.values)) > 100.0 * np.max(np.abs(r1_good.values))
    assert np.max(np.abs(r1_bad.values)) > 1e-4


def test_minimal_stabilizer_trivial_cases():
    m = 128
    zero = TimeCurve(np.zeros(m + 1))
    assert minimal_stabilizer(zero, zero) == 1.0
    minus_two = TimeCurve(np.full(m + 1, -2.0))
    assert abs(minimal_stabilizer(minus_two, zero) - 2.0) < 1e-12


def test_minimal_stabilizer_stable_under_refinement():
    vals = {}
    for m in (512, 1024):
        fam = family_from_rate(3.0, first_family_rate(3.0, m))
        vals[m] = minimal_stabilizer(fam.b, fam.T)
    assert abs(vals[512] - vals[1024]) < 1e-3


def test_refine_fixed_point_is_unchanged():
    fam = limit_family(3.0)
    a_next, big_a_next = refine_pair(fam.a, fam.A, fam.b, 1.0)
    assert np.array_equal(a_next.values, fam.a.values)
    assert np.array_equal(big_a_next.values, fam.A.values)


def test_refine_step_monotone_and_boundary_exact(family3):
    assert float(family3.a.sample_at(0.5)) == 0.5 / 16.0
    stab = minimal_stabilizer(family3.b, family3.T)
    a2, big_a2 = refine_pair(family3.a, family3.A, family3.b, stab)
    assert float(a2.sample_at(0.5)) > 0.03125
    assert a2.values[0] == 0.0
    assert a2.values[-1] == family3.a.values[-1] == 1.0 / 9.0
    assert np.all(a2.values[1:-1] > family3.a.values[1:-1])


def test_refine_rejects_small_stabilizer(family3):
    with pytest.raises(ValueError):
        refine_pair(family3.a, family3.A, family3.b, 0.5)


def test_run_refinement_chain_certificates_delta3():
    trace = run_refinement(3.0, 50, tol=1e-5, store_every=10)
    assert trace.steps_run == 50 and not trace.converged
    assert np.all(np.diff(trace.gap_to_limit) < 0.0)
    assert np.all(np.diff(trace.sup_cross) < 0.0)
    for fam in trace.families:
        fam.validate(strict_signs=True)
        assert np.max(fam.a.values) <= 0.2 + 1e-9
    # the refinement target in closed form
    a_lim, _, _ = limit_rate(3.0, 512)
    assert abs(float(a_lim.sample_at(0.5)) - 1.0 / 12.0) < 1e-15
    assert abs(a_lim.values[-1] - 1.0 / 9.0) < 1e-15


def test_run_refinement_ceiling_delta10():
    trace = run_refinement(10.0, 30, tol=1e-5, store_every=10)
    for fam in trace.families:
        assert np.max(fam.a.values) <= 1.0 / 96.0 + 1e-9


def test_run_refinement_near_critical_stress():
    trace = run_refinement(2.01, 20, tol=1e-5, store_every=20)
    assert np.all(np.diff(trace.gap_to_limit) < 0.0)
    assert trace.steps_run == 20


def test_limit_family_values():
    fam2 = limit_family(2.0)
    assert fam2.singular
    assert fam2.a.values[-1] == 0.25
    assert np.max(np.abs(fam2.a.values * 4.0 * fam2.a.nodes - 1.0)) < 1e-12
    fam3 = limit_family(3.0)
    assert not fam3.singular
    assert abs(float(fam3.a.sample_at(0.5)) - 1.0 / 12.0) < 1e-15
    relation = fam3.a.values * fam3.clock() - fam3.a.nodes / 9.0
    assert np.max(np.abs(relation)) < 1e-12
    with pytest.raises(ValueError):
        limit_family(1.5)


def test_validate_flags_sign_corruption(family3):
    flipped = WeightFamily(
        delta=3.0, a=family3.a, A=family3.A, b=family3.b.with_values(-family3.b.values),
        T=family3.T,
    )
    with pytest.raises(CertificationError):
        flipped.validate(strict_signs=True)


@given(
    x=st.floats(min_value=-5.0, max_value=5.0, allow_nan=False),
    xi=st.floats(min_value=-5.0, max_value=5.0, allow_nan=False),
    node=st.integers(min_value=1, max_value=511),
)
@settings(max_examples=40, deadline=None)
def test_quadratic_form_collapses_to_square(family3, x, xi, node):
    c_xx, c_xxi, c_xixi = quadratic_form_coefficients(family3)
    ident = growth_identity(family3.a, family3.A)
    assembled = c_xx[node] * x**2 + c_xxi[node] * x * xi + c_xixi[node] * xi**2
    collapsed = ident[node] * (x + xi) ** 2
    scale = max(1.0, abs(collapsed), abs(ident[node]) * (x**2 + xi**2))
    assert abs(assembled - collapsed) < 1e-6 * scale
    assert assembled > -1e-6 * scale
