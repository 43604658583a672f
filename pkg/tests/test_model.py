import math

import numpy as np
import pytest
import sympy as sym
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from nlsd.errors import DomainError, NonFiniteError
from nlsd.model import (ComplexField, Grid, ModelParams, RealProfile, SalernoParams, check_finite,
                        diagnostic_gradient, hamiltonian, momentum, read_field_csv, rhs_evolution,
                        salerno_cutoff, salerno_invariants, total_power, write_field_csv)

SQRT_PI = math.sqrt(math.pi)


def sech_field(grid, k=1.0):
    q = math.sqrt(2 * k) / np.cosh(math.sqrt(k) * grid.eta)
    return ComplexField.from_complex(q, grid)


# ---------------------------------------------------------------- types


def test_params_reject_non_finite():
    with pytest.raises(DomainError):
        ModelParams(float("nan"), 0.0)
    with pytest.raises(DomainError):
        ModelParams(0.0, float("inf"))


def test_params_negative_sum_rejected_by_stationary_entry():
    with pytest.raises(DomainError):
        ModelParams(-1.0, 0.5).require_stationary()


@pytest.mark.parametrize("beta, gamma, expected", [
    (1.0, 1.0, 1.0), (2.0, 0.0, 1.0), (0.0, 2.0, 1.0), (0.0, 0.0, math.inf), (0.08, 0.0, 25.0),
    (-1.0, 0.0, math.inf),
])
def test_critical_intensity(beta, gamma, expected):
    assert ModelParams(beta, gamma).critical_intensity() == pytest.approx(expected)


def test_critical_intensity_marks_loss_of_dispersion():
    p = ModelParams(0.7, 0.3)
    rho = p.critical_intensity()
    for r in (0.5 * rho, 0.99 * rho):
        assert (1 - p.beta * r / 2) ** 2 > (p.gamma * r / 2) ** 2
    assert (1 - p.beta * rho / 2) ** 2 == pytest.approx((p.gamma * rho / 2) ** 2)


def test_grid_validation():
    with pytest.raises(DomainError):
        Grid(0.0, 1.0, 2)
    with pytest.raises(DomainError):
        Grid(1.0, 0.0, 10)
    g = Grid(-1.0, 1.0, 5)
    assert g.dx == 0.5


def test_symmetric_grid_is_exact():
    g = Grid.symmetric(10.0, 0.03)
    assert g.n % 2 == 1
    assert np.array_equal(g.eta, -g.eta[::-1])
    assert g.eta[g.center_index] == 0.0
    assert g.dx == pytest.approx(0.03, rel=1e-15)


def test_profile_length_and_finiteness():
    g = Grid(0.0, 1.0, 5)
    with pytest.raises(DomainError):
        RealProfile(np.zeros(4), g)
    with pytest.raises(NonFiniteError) as err:
        RealProfile(np.array([0, 0, np.nan, 0, 0.0]), g)
    assert err.value.index == 2
    assert err.value.eta == pytest.approx(0.5)


def test_check_finite_reports_first_bad_index():
    with pytest.raises(NonFiniteError) as err:
        check_finite(np.array([1.0, np.inf, np.nan]))
    assert err.value.index == 1


def test_salerno_params_range():
    SalernoParams(0.0)
    for m in (-0.1, 1.0, 1.5):
        with pytest.raises(DomainError):
            SalernoParams(m)


# ---------------------------------------------------------------- rhs


def test_rhs_zero_field():
    g = Grid.symmetric(5.0, 0.1)
    out = rhs_evolution(ComplexField(np.zeros(g.n), np.zeros(g.n), g), ModelParams(1.0, 1.0))
    assert np.all(out.values == 0)


def test_rhs_constant_field_interior():
    g = Grid.symmetric(5.0, 0.1)
    A = 0.7
    f = ComplexField(np.full(g.n, A), np.zeros(g.n), g)
    out = rhs_evolution(f, ModelParams(0.4, 0.9)).values
    assert np.allclose(out[1:-1], 1j * A ** 3, rtol=0, atol=1e-13)


def test_rhs_rejects_non_finite():
    g = Grid.symmetric(1.0, 0.5)
    with pytest.raises(NonFiniteError):
        rhs_evolution(ComplexField(np.array([0, np.nan, 0, 0, 0.0]), np.zeros(5), g), ModelParams())


def test_rhs_nls_soliton_second_order():
    errs = []
    for dx in (0.04, 0.02):
        g = Grid.symmetric(20.0, dx)
        f = sech_field(g)
        errs.append(np.max(np.abs(rhs_evolution(f, ModelParams()).values - 1j * f.values)))
    assert errs[1] < 1e-3
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def _sympy_rhs(beta, gamma):
    """Continuous right-hand side for a complex Gaussian wave packet."""
    x = sym.symbols("x", real=True)
    u = sym.exp(-x ** 2 / 2) * (0.8 + 0.3 * x)
    v = sym.exp(-x ** 2 / 2) * 0.5 * sym.sin(0.7 * x)
    q = u + sym.I * v
    qc = u - sym.I * v
    q1, qc1 = sym.diff(q, x), sym.diff(qc, x)
    q2, qc2 = sym.diff(q, x, 2), sym.diff(qc, x, 2)
    a2 = q * qc
    t = (q2 + a2 * q - sym.Rational(1, 2) * beta * (a2 * q2 + qc * q1 ** 2)
         + sym.Rational(1, 2) * gamma * (qc * q1 ** 2 - 2 * q * q1 * qc1 - q ** 2 * qc2))
    return sym.lambdify(x, q, "numpy"), sym.lambdify(x, sym.I * t, "numpy")


def test_rhs_matches_symbolic_oracle():
    qf, rf = _sympy_rhs(sym.Rational(3, 10), sym.Rational(7, 10))
    p = ModelParams(0.3, 0.7)
    errs = []
    for dx in (0.02, 0.01):
        g = Grid.symmetric(12.0, dx)
        f = ComplexField.from_complex(qf(g.eta), g)
        errs.append(np.max(np.abs(rhs_evolution(f, p).values - rf(g.eta))))
    assert errs[1] < 1e-3
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_rhs_accepts_real_profile():
    g = Grid.symmetric(10.0, 0.05)
    prof = RealProfile(np.sqrt(2) / np.cosh(g.eta), g)
    a = rhs_evolution(prof, ModelParams(0.2, 0.1)).values
    b = rhs_evolution(ComplexField.from_real(prof), ModelParams(0.2, 0.1)).values
    assert np.array_equal(a, b)


# ---------------------------------------------------------------- power


def test_power_zero_and_sech(fine_grid):
    g = fine_grid
    assert total_power(ComplexField(np.zeros(g.n), np.zeros(g.n), g)) == 0.0
    assert total_power(sech_field(g)) == pytest.approx(4 / SQRT_PI, rel=1e-5)
    # independent quadrature of the same integrand
    ref = quad(lambda x: 2 / np.cosh(x) ** 2, -60, 60, epsabs=1e-14)[0] / SQRT_PI
    assert ref == pytest.approx(4 / SQRT_PI, rel=1e-12)


@pytest.mark.parametrize("A, W", [(1.0, 1.0), (0.4, 3.0), (2.0, 0.5)])
def test_power_of_gaussian_is_A2W(A, W):
    g = Grid.symmetric(40.0, 0.01)
    f = ComplexField.from_complex(A * np.exp(-g.eta ** 2 / (2 * W * W)), g)
    assert total_power(f) == pytest.approx(A * A * W, rel=1e-10)


@given(theta=st.floats(0, 2 * math.pi), c=st.floats(-2, 2), w=st.floats(0.5, 3))
def test_power_phase_invariance(theta, c, w):
    g = Grid.symmetric(15.0, 0.05)
    q = np.exp(-g.eta ** 2 / w ** 2) * np.exp(1j * c * g.eta)
    a = total_power(ComplexField.from_complex(q, g))
    b = total_power(ComplexField.from_complex(q * np.exp(1j * theta), g))
    assert b == pytest.approx(a, rel=1e-14)


# ---------------------------------------------------------------- hamiltonian


def test_hamiltonian_zero_and_sech(fine_grid):
    g = fine_grid
    assert hamiltonian(ComplexField(np.zeros(g.n), np.zeros(g.n), g), ModelParams(1, 1)) == 0.0
    assert hamiltonian(sech_field(g), ModelParams()) == pytest.approx(-4 / 3, abs=2e-4)


def test_hamiltonian_real_gaussian_against_quadrature():
    p = ModelParams(1.0, 1.0)
    A, W = 0.9, 1.3
    Q = lambda x: A * np.exp(-x * x / (2 * W * W))
    dQ = lambda x: -x / (W * W) * Q(x)
    dens = lambda x: dQ(x) ** 2 - Q(x) ** 4 / 2 - (p.sigma / 2) * Q(x) ** 2 * dQ(x) ** 2
    ref = quad(dens, -np.inf, np.inf, epsabs=1e-13)[0]
    g = Grid.symmetric(15.0, 0.005)
    got = hamiltonian(ComplexField.from_complex(Q(g.eta), g), p)
    assert got == pytest.approx(ref, abs=1e-5)


@given(a=st.floats(0.1, 2), w=st.floats(0.5, 3), beta=st.floats(-2, 2), gamma=st.floats(-2, 2))
def test_hamiltonian_real_field_reduced_form(a, w, beta, gamma):
    g = Grid.symmetric(15.0, 0.05)
    Q = a * np.exp(-g.eta ** 2 / (2 * w * w)) * (1 + 0.2 * np.tanh(g.eta))
    dQ = diagnostic_gradient(Q, g.dx)
    reduced = np.trapezoid(dQ ** 2 - Q ** 4 / 2 - (beta + gamma) / 2 * Q ** 2 * dQ ** 2, dx=g.dx)
    got = hamiltonian(ComplexField.from_complex(Q, g), ModelParams(beta, gamma))
    assert got == pytest.approx(reduced, rel=1e-12, abs=1e-14)


def test_hamiltonian_beta_gamma_terms_equal_for_real_fields():
    g = Grid.symmetric(15.0, 0.02)
    f = ComplexField.from_complex(np.exp(-g.eta ** 2 / 2), g)
    h0 = hamiltonian(f, ModelParams())
    hb = hamiltonian(f, ModelParams(1.0, 0.0)) - h0
    hg = hamiltonian(f, ModelParams(0.0, 1.0)) - h0
    assert hb == pytest.approx(hg, rel=1e-13)


# ---------------------------------------------------------------- momentum


@given(a=st.floats(0.1, 3), w=st.floats(0.3, 3), s=st.floats(-3, 3))
def test_momentum_of_real_field_vanishes(a, w, s):
    g = Grid.symmetric(12.0, 0.07)
    Q = a * np.exp(-(g.eta - s) ** 2 / w ** 2)
    assert abs(momentum(ComplexField.from_complex(Q, g))) < 1e-10


def test_momentum_of_tilted_profile(fine_grid):
    g = fine_grid
    c = 0.6
    Q = np.sqrt(2) / np.cosh(g.eta)
    f = ComplexField.from_complex(Q * np.exp(1j * c * g.eta), g)
    m, residue = momentum(f, return_residue=True)
    assert m == pytest.approx(c * SQRT_PI * total_power(f), rel=1e-4)
    assert abs(residue) < 1e-8


def test_momentum_zero_field():
    g = Grid.symmetric(3.0, 0.1)
    assert momentum(ComplexField(np.zeros(g.n), np.zeros(g.n), g)) == 0.0


# ---------------------------------------------------------------- Salerno


def test_salerno_zero_field():
    g = Grid.symmetric(3.0, 0.1)
    pm, hm = salerno_invariants(ComplexField(np.zeros(g.n), np.zeros(g.n), g), SalernoParams(0.4))
    assert pm == 0.0 and hm == 0.0


def test_salerno_constant_field_unit_interval():
    g = Grid(0.0, 1.0, 101)
    f = ComplexField(np.full(g.n, math.sqrt(0.5)), np.zeros(g.n), g)
    pm, _ = salerno_invariants(f, SalernoParams(0.5))
    assert pm == pytest.approx(math.log(0.75), rel=1e-14)
    assert pm == pytest.approx(-0.2877, abs=1e-4)


def test_salerno_domain_error_names_index():
    g = Grid(0.0, 1.0, 5)
    re = np.array([0.1, 0.2, 1.0, 0.2, 0.1])
    with pytest.raises(DomainError) as err:
        salerno_invariants(ComplexField(re * math.sqrt(2), np.zeros(5), g), SalernoParams(0.5))
    assert err.value.index == 2


def test_salerno_m_zero():
    g = Grid.symmetric(3.0, 0.1)
    pm, hm = salerno_invariants(sech_field(g), SalernoParams(0.0))
    assert pm == 0.0 and math.isnan(hm)


@pytest.mark.parametrize("m, expected", [(0.5, 1.0), (0.2, 4.0)])
def test_salerno_cutoff_examples(m, expected):
    assert salerno_cutoff(SalernoParams(m)) == pytest.approx(expected, rel=1e-15)


def test_salerno_cutoff_limits():
    assert salerno_cutoff(0.0) == math.inf
    assert salerno_cutoff(1 - 1e-12) < 1e-11
    with pytest.raises(DomainError):
        salerno_cutoff(1.0)


@given(m=st.floats(1e-6, 1 - 1e-6))
def test_salerno_cutoff_identity(m):
    assert salerno_cutoff(m) * m / (1 - m) == pytest.approx(1.0, rel=4 * np.finfo(float).eps)


# ---------------------------------------------------------------- CSV


def test_field_csv_roundtrip(tmp_path):
    g = Grid.symmetric(4.0, 0.1)
    q = (np.exp(-g.eta ** 2) * np.exp(0.3j * g.eta)) / 3.0
    f = ComplexField.from_complex(q, g)
    path = write_field_csv(tmp_path / "f.csv", f, {"xi": 1.5})
    text = path.read_text().splitlines()
    assert text[0].startswith("# eta_min=") and text[2] == f"# n={g.n}"
    assert "eta,re_q,im_q,abs2_q" in text
    back = read_field_csv(path)
    assert back.grid == g
    assert np.array_equal(back.re, f.re) and np.array_equal(back.im, f.im)
