import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from spectral_levy import (
    Exponential,
    LevyModel,
    Normal,
    Uniform,
    ValidationError,
    char_exponent_deriv,
    char_fn,
    char_fn_deriv,
    check_assumptions,
    levy_moment,
    levy_tail,
    sample_increments,
)
from spectral_levy.models import gamma_variates

# 0.5 * E1(1), mpmath at 30 digits
GAMMA_HALF_TAIL_AT_1 = 0.10969196719776014

STOCK = [
    LevyModel.compound_poisson(1.0),
    LevyModel.compound_poisson(2.0, Uniform(-1.0, 2.0), gamma=0.3),
    LevyModel.compound_poisson(0.7, Normal(0.5, 0.8)),
    LevyModel.gamma_process(0.4),
    LevyModel.gamma_process(0.25, lam=2.0, gamma=-0.1),
    LevyModel.gamma_plus_poisson(0.4),
]


def test_frozen_tail_constant_matches_mpmath():
    mp.mp.dps = 30
    assert abs(float(0.5 * mp.e1(1)) - GAMMA_HALF_TAIL_AT_1) < 1e-17


# --- sampling -------------------------------------------------------------


def test_no_jumps_no_drift_gives_zeros():
    x = sample_increments(LevyModel.compound_poisson(0.0), 50, 1.0, 3)
    assert np.all(x == 0.0)


def test_gamma_sample_mean():
    n = 10**5
    x = sample_increments(LevyModel.gamma_process(0.5), n, 1.0, 2024)
    sd = np.sqrt(0.5)
    assert abs(x.mean() - 0.5) < 3 * sd / np.sqrt(n)


@pytest.mark.parametrize("model", STOCK, ids=lambda m: m.kind.value)
def test_sampling_is_deterministic(model):
    a = sample_increments(model, 1000, 0.5, 99)
    b = sample_increments(model, 1000, 0.5, 99)
    assert np.array_equal(a, b)
    c = sample_increments(model, 1000, 0.5, 100)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("shape", [0.05, 0.4, 0.999, 1.0, 2.5])
def test_gamma_variates_pass_ks(shape):
    rng = np.random.default_rng(7)
    x = gamma_variates(rng, shape, 10**5)
    assert stats.kstest(x, stats.gamma(shape).cdf).pvalue > 0.01


def test_gamma_increments_pass_ks_with_rate():
    x = sample_increments(LevyModel.gamma_process(0.4, lam=3.0), 10**5, 1.0, 5)
    assert stats.kstest(x, stats.gamma(0.4, scale=1 / 3.0).cdf).pvalue > 0.01


def test_compound_poisson_increment_moments():
    m = LevyModel.compound_poisson(2.0, Exponential(3.0), gamma=0.5)
    x = sample_increments(m, 2 * 10**5, 0.5, 1)
    # mean = gamma*delta + intensity*delta*E[J], var = intensity*delta*E[J^2]
    mean, var = 0.25 + 1.0 / 3.0, 1.0 * 2.0 / 9.0
    assert abs(x.mean() - mean) < 4 * np.sqrt(var / x.size)
    assert abs(x.var() - var) < 0.02


@pytest.mark.parametrize("n,delta", [(0, 1.0), (5, 0.0), (5, -1.0)])
def test_sampling_rejects_bad_arguments(n, delta):
    with pytest.raises(ValidationError):
        sample_increments(LevyModel.gamma_process(0.4), n, delta, 0)


# --- characteristic function ---------------------------------------------


@pytest.mark.parametrize("model", STOCK, ids=lambda m: m.kind.value)
def test_char_fn_at_zero_is_one(model):
    assert char_fn(model, 0.7, 0.0) == pytest.approx(1.0 + 0j, abs=1e-15)


def test_gamma_char_fn_modulus():
    v = char_fn(LevyModel.gamma_process(0.5), 1.0, 1.0)
    assert abs(abs(v) - 2 ** -0.25) < 1e-14


def test_gamma_char_fn_principal_branch():
    u = np.array([-1e4, -3.0, 0.5, 1e4])
    ref = np.array([complex((1 - 1j * mp.mpf(v)) ** mp.mpf(-0.4)) for v in u])
    np.testing.assert_allclose(char_fn(LevyModel.gamma_process(0.4), 1.0, u), ref, rtol=1e-13)


def test_compound_poisson_modulus_bounded_below():
    u = np.linspace(-200, 200, 40001)
    assert np.min(np.abs(char_fn(LevyModel.compound_poisson(1.0), 1.0, u))) >= np.exp(-2)


@pytest.mark.parametrize("model", STOCK, ids=lambda m: m.kind.value)
def test_hermitian_and_bounded(model):
    u = np.linspace(-60, 60, 1201)
    phi = char_fn(model, 1.3, u)
    np.testing.assert_allclose(char_fn(model, 1.3, -u), np.conj(phi), rtol=0, atol=1e-15)
    assert np.all(np.abs(phi) <= 1 + 1e-15)


@settings(max_examples=60, deadline=None)
@given(u=st.floats(-1e6, 1e6), alpha=st.floats(0.05, 3.0), lam=st.floats(0.1, 10.0))
def test_gamma_modulus_never_exceeds_one(u, alpha, lam):
    assert abs(complex(char_fn(LevyModel.gamma_process(alpha, lam), 1.0, u))) <= 1 + 1e-15


def test_gamma_exponent_derivative_at_zero():
    assert char_exponent_deriv(LevyModel.gamma_process(0.5), 0.0) == pytest.approx(0.5)


@pytest.mark.parametrize("model", STOCK, ids=lambda m: m.kind.value)
def test_exponent_derivative_at_zero_is_drift_plus_first_moment(model):
    # int x nu(dx) by quadrature of the Levy density / jump law
    m1 = 0.0
    if model.has_gamma_part:
        m1 += integrate.quad(lambda x: model.alpha * np.exp(-model.lam * x), 0, np.inf)[0]
    if model.cp_intensity > 0:
        if model.jump_law is None:
            m1 += model.cp_intensity
        else:
            lo, hi = model.jump_law.support()
            m1 += model.cp_intensity * integrate.quad(
                lambda x: x * float(model.jump_law.pdf(x)), lo, hi)[0]
    assert complex(char_exponent_deriv(model, 0.0)) == pytest.approx(model.gamma + m1, abs=1e-9)


@pytest.mark.parametrize("model", STOCK, ids=lambda m: m.kind.value)
@pytest.mark.parametrize("u", [0.5, 2.0, 10.0])
def test_derivative_matches_finite_difference(model, u):
    delta, step = 1.0, 1e-5
    fd = (char_fn(model, delta, u + step) - char_fn(model, delta, u - step)) / (2 * step)
    exact = char_fn_deriv(model, delta, u)
    # absolute floor: Normal jumps make phi' itself ~1e-14 at u = 10
    assert abs(exact - fd) <= 1e-6 * abs(exact) + 1e-11


# --- tail ------------------------------------------------------------------


def test_gamma_tail_value():
    assert levy_tail(LevyModel.gamma_process(0.5), 1.0) == pytest.approx(GAMMA_HALF_TAIL_AT_1,
                                                                          rel=1e-13)
    assert levy_tail(LevyModel.gamma_process(0.5), -1.0) == 0.0


def test_compound_poisson_tail_value():
    assert levy_tail(LevyModel.compound_poisson(1.0), 1.0) == pytest.approx(np.exp(-1), rel=1e-14)


def test_normal_jump_tails_against_quadrature():
    law = Normal(0.5, 0.8)
    m = LevyModel.compound_poisson(0.7, law)
    pdf = lambda x: float(law.pdf(x))  # noqa: E731
    assert levy_tail(m, 1.2) == pytest.approx(0.7 * integrate.quad(pdf, 1.2, np.inf)[0], rel=1e-9)
    assert levy_tail(m, -0.4) == pytest.approx(0.7 * integrate.quad(pdf, -np.inf, -0.4)[0],
                                               rel=1e-9)


@pytest.mark.parametrize("model", STOCK, ids=lambda m: m.kind.value)
def test_tail_monotone(model):
    pos = np.array([levy_tail(model, t) for t in np.geomspace(0.05, 60, 200)])
    neg = np.array([levy_tail(model, -t) for t in np.geomspace(0.05, 60, 200)])
    assert np.all(np.diff(pos) <= 1e-15)
    assert np.all(np.diff(neg) <= 1e-15)
    assert pos[-1] < 1e-10


def test_tail_at_zero_rejected():
    with pytest.raises(ValidationError):
        levy_tail(LevyModel.gamma_process(0.4), 0.0)


# --- identification identity ----------------------------------------------


@pytest.mark.parametrize("model", [LevyModel.gamma_process(0.4), LevyModel.compound_poisson(1.0),
                                   LevyModel.compound_poisson(1.5, Uniform(-0.5, 1.5))],
                         ids=["gamma", "cp_exp", "cp_uniform"])
def test_identification_identity(model):
    u = np.linspace(-50, 50, 1001)
    step = 1e-6
    fd = (char_fn(model, 1.0, u + step) - char_fn(model, 1.0, u - step)) / (2 * step)
    lhs = fd / char_fn(model, 1.0, u) / 1j
    rhs = char_exponent_deriv(model, u)
    assert np.max(np.abs(lhs - rhs) / np.abs(rhs)) < 1e-5


# --- assumptions ------------------------------------------------------------


def test_assumptions_gamma_admissible():
    rep = check_assumptions(LevyModel.gamma_process(0.4), 1.0, 0.05)
    assert rep.pass_c and rep.pass_a and rep.pass_b


def test_assumptions_gamma_too_ill_posed():
    rep = check_assumptions(LevyModel.gamma_process(0.6), 1.0, 0.05)
    assert not rep.pass_c


def test_assumptions_compound_poisson():
    rep = check_assumptions(LevyModel.compound_poisson(1.0), 1.0)
    assert rep.pass_a and rep.pass_b and rep.pass_c
    assert not rep.inconclusive


def test_assumptions_report_contents():
    rep = check_assumptions(LevyModel.gamma_process(0.4), 1.0, 0.05, u_max=1e4)
    d = rep.to_dict()
    assert {"epsilon", "u_max", "pass_a", "pass_b", "pass_c", "integral_c",
            "decay_b_ratio"} <= set(d)
    assert rep.integral_c > 0


def test_unit_jump_part_breaks_fourier_decay():
    # the Poisson atom at 1 keeps |F[x nu](u)| from decaying
    rep = check_assumptions(LevyModel.gamma_plus_poisson(0.4), 1.0)
    assert not rep.pass_b


def test_moment_closed_form_matches_quadrature():
    m = LevyModel.gamma_process(0.4, lam=1.5)
    eps = 0.05
    f = lambda x: max(x, x ** 2.05) * 0.4 * np.exp(-1.5 * x) / x  # noqa: E731
    ref = integrate.quad(f, 0, 1)[0] + integrate.quad(f, 1, np.inf)[0]
    assert levy_moment(m, eps) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("kwargs", [dict(epsilon=0.0), dict(epsilon=1.0), dict(u_max=100.0)])
def test_assumption_arguments_validated(kwargs):
    with pytest.raises(ValidationError):
        check_assumptions(LevyModel.gamma_process(0.4), 1.0, **kwargs)


# --- records -----------------------------------------------------------------


@pytest.mark.parametrize("model", STOCK, ids=lambda m: m.kind.value)
def test_record_round_trip(model):
    assert LevyModel.from_dict(model.to_dict()) == model


def test_record_field_names():
    rec = {"kind": "gamma", "alpha": 0.4, "lambda": 1.0, "gamma": 0.0}
    assert LevyModel.from_dict(rec) == LevyModel.gamma_process(0.4)


@pytest.mark.parametrize("rec", [
    {"kind": "gamma", "alpha": -1.0},
    {"kind": "gamma", "alpha": 0.4, "lambda": 0.0},
    {"kind": "levy"},
    {"kind": "gamma", "alpha": 0.4, "colour": "red"},
    {"kind": "compound_poisson", "cp_intensity": -1.0, "jump_law": {"name": "exponential"}},
    {"kind": "compound_poisson", "cp_intensity": 1.0, "jump_law": {"name": "cauchy"}},
    {"kind": "compound_poisson", "cp_intensity": 1.0, "jump_law": {"name": "uniform", "a": 2, "b": 1}},
])
def test_invalid_records_rejected(rec):
    with pytest.raises(ValidationError):
        LevyModel.from_dict(rec)
