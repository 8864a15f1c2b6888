import math

import numpy as np
import pytest

from specglauber.gibbs_exact import GibbsParams
from specglauber.tree_recursion import (PotentialParams, RecursionParamError, _grid_sup_abs_h, delta_c,
                                        delta_contraction_sup, f_d, f_sym, h_d, h_deriv, hc_potential_chi,
                                        hc_potential_params, hc_potential_psi, lambda_c, log_ratio_interval,
                                        log_ratio_set, potential_exponent, potential_premise_check,
                                        sym_fixpoint, u_ising, uniqueness_margin_check, verify_potential, xi)

HC1 = GibbsParams.hardcore(1.0)
IS5 = GibbsParams.ising(0.5)


def test_f_d_examples():
    assert f_d([0, 0], HC1) == 1
    assert f_d([1], GibbsParams.hardcore(2)) == 1
    assert f_d([1], IS5) == pytest.approx(1)
    assert f_d([math.inf], HC1) == 0
    assert f_d([math.inf], GibbsParams(0.5, 2.0, 1.0)) == pytest.approx(0.5)


def test_h_d_examples():
    assert h_d([0], HC1) == pytest.approx(math.log(0.5))
    assert h_d([1.3, -2.0, 7.0], GibbsParams.ising(1.0)) == 0
    assert h_d([], GibbsParams.hardcore(4)) == pytest.approx(math.log(4))


def test_h_d_is_log_f_exp():
    rng = np.random.default_rng(0)
    params = [HC1, IS5, GibbsParams.ising(2.0), GibbsParams(0.3, 1.7, 0.6), GibbsParams.hardcore(7.0)]
    for _ in range(2000):
        p = params[int(rng.integers(len(params)))]
        ys = rng.uniform(-8, 8, size=int(rng.integers(1, 6)))
        assert h_d(ys, p) == pytest.approx(math.log(f_d(np.exp(ys), p)), abs=1e-12)


def test_h_deriv_examples():
    assert h_deriv(0.0, HC1) == pytest.approx(-0.5)
    assert h_deriv(0.0, IS5) == pytest.approx(-1 / 3)
    assert np.all(h_deriv(np.linspace(-5, 5, 11), GibbsParams(2.0, 0.5, 3.0)) == 0)
    assert h_deriv(-math.inf, HC1) == 0


def test_h_deriv_finite_differences():
    rng = np.random.default_rng(1)
    for p in (HC1, IS5, GibbsParams(0.3, 1.7, 0.6)):
        for _ in range(200):
            ys = rng.uniform(-6, 6, size=3)
            i = int(rng.integers(3))
            step = 1e-5
            up, dn = ys.copy(), ys.copy()
            up[i] += step
            dn[i] -= step
            fd = (h_d(up, p) - h_d(dn, p)) / (2 * step)
            assert h_deriv(ys[i], p) == pytest.approx(fd, abs=1e-6)


def test_h_deriv_bounded():
    xs = np.linspace(-40, 40, 4001)
    for p in (HC1, IS5, GibbsParams(0.01, 5.0, 9.0)):
        assert np.abs(h_deriv(xs, p)).max() <= 1


def test_log_ratio_interval_examples():
    j = log_ratio_interval(2, HC1)
    assert j.lo == -math.inf and j.hi == 0
    j = log_ratio_interval(3, IS5)
    assert j.lo == pytest.approx(-3 * math.log(2)) and j.hi == pytest.approx(3 * math.log(2))
    j = log_ratio_interval(1, GibbsParams.ising(2.0))
    assert j.lo == pytest.approx(-math.log(2)) and j.hi == pytest.approx(math.log(2))
    assert log_ratio_set(3, IS5).hi == pytest.approx(3 * math.log(2))


def test_delta_contraction_sup_examples():
    assert delta_contraction_sup(IS5) == pytest.approx(1 / 3)
    assert delta_contraction_sup(HC1) == pytest.approx(0.5)
    assert delta_contraction_sup(GibbsParams.ising(1.0)) == 0


def test_hardcore_h_bounded_on_J():
    for lam in (0.3, 1.0, 4.0):
        p = GibbsParams.hardcore(lam)
        assert _grid_sup_abs_h(p, -60.0, math.log(lam)) <= lam / (1 + lam) + 1e-12


def test_ising_grid_sup_and_uniqueness_contraction():
    for beta in (0.2, 0.5, 0.9, 1.3, 4.0):
        p = GibbsParams.ising(beta)
        assert _grid_sup_abs_h(p, -30.0, 30.0) <= abs(beta - 1) / (beta + 1) + 1e-12
    for R in (1.5, 2.0, 3.0, 4.7):
        for zeta in (0.1, 0.5, 0.9):
            lo, hi = u_ising(R, zeta)
            for beta in (lo, 0.5 * (lo + hi), hi):
                assert delta_contraction_sup(GibbsParams.ising(beta)) <= (1 - zeta) / R + 1e-12


def test_lambda_c_examples_and_monotone():
    assert lambda_c(2) == 4
    assert lambda_c(3) == pytest.approx(27 / 16)
    assert lambda_c(1.5) == pytest.approx(1.5 ** 1.5 / 0.5 ** 2.5)
    ks = np.linspace(1.1, 20, 50)
    vals = [lambda_c(k) for k in ks]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(RecursionParamError):
        lambda_c(1.0)


def test_delta_c_examples_and_roundtrip():
    assert delta_c(4) == pytest.approx(2, abs=1e-10)
    assert delta_c(27 / 16) == pytest.approx(3, abs=1e-10)
    for lam in (0.1, 1, 4, 10):
        assert abs(lambda_c(delta_c(lam)) - lam) <= 1e-10
    assert delta_c(0.5) > delta_c(1) > delta_c(2)


def test_u_ising_examples():
    lo, hi = u_ising(3, 0.5)
    assert lo == pytest.approx(2.5 / 3.5) and hi == pytest.approx(1.4)
    assert lo * hi == pytest.approx(1)
    lo, hi = u_ising(2, 1e-12)
    assert lo == pytest.approx(1 / 3) and hi == pytest.approx(3)


def test_potential_functions():
    assert hc_potential_chi(0.0) == pytest.approx(math.sqrt(0.5))
    assert hc_potential_psi(1.0) == pytest.approx(1 / (2 * math.sqrt(2)))
    assert np.all(hc_potential_chi(np.linspace(-30, 30, 101)) > 0)


@pytest.mark.parametrize("lam", [4.0, 27 / 16, 1.0])
def test_xi_fixpoint_equality(lam):
    dc = delta_c(lam)
    q = potential_exponent(dc)
    x = sym_fixpoint(dc, lam)
    assert f_sym(dc, x, lam) == pytest.approx(x)
    assert xi(q, dc, x, lam) == pytest.approx(1 / dc, abs=1e-9)


def test_potential_params_examples():
    pp = hc_potential_params(4.0)
    assert 1 / pp.s == pytest.approx(1 - 0.5 * math.log(2), abs=1e-9)
    assert pp.s == pytest.approx(1.53039, abs=1e-5)
    assert 1 / hc_potential_params(27 / 16).s == pytest.approx(1 - math.log(1.5), abs=1e-9)
    for lam in (0.2, 1.0, 3.0):
        pp = hc_potential_params(lam)
        assert pp.delta * delta_c(lam) == pytest.approx(1)
        assert pp.c == pytest.approx(lam / (1 + lam))


def test_verify_potential_pass_and_premise_failure():
    lam = 0.8 * lambda_c(3)
    rep = verify_potential(GibbsParams.hardcore(lam), hc_potential_params(lam), 3, spot_checks=2000)
    assert rep.passed and rep.spot_max_ratio <= 1 + 1e-9
    lam = 1.2 * lambda_c(3)
    rep = potential_premise_check(lam, 3.0, 0.2)
    assert not rep.passed and rep.witness is not None and rep.witness["d"] >= 1
    with pytest.raises(RecursionParamError):
        verify_potential(IS5, PotentialParams(2, 0.5, 1), 3)


def test_uniqueness_margin_check():
    rep = uniqueness_margin_check(0.5, 2, 2.0 - 1e-9)
    assert rep.passed and rep.delta_c > 2
    # lambda just below (1-eps) lambda_c(L): z increases towards 1 as eps -> 1
    z = [uniqueness_margin_check(e, 3, 0.99 * (1 - e) * lambda_c(3)).z for e in (0.1, 0.5, 0.9, 0.999)]
    assert all(a < b for a, b in zip(z, z[1:])) and z[-1] > 0.9
    with pytest.raises(RecursionParamError):
        uniqueness_margin_check(0.5, 2, 3.0)
