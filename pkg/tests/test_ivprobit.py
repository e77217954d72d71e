"""Joint ML estimator: likelihood value, analytic score, optimizer behavior."""

import numpy as np
import pytest

from ivdr.dataio import Dataset
from ivdr.errors import BoundarySolution, DegenerateOutcome
from ivdr.ivprobit import (
    IvProbitMlFit,
    ThetaFull,
    default_start,
    ml_cdf_at,
    ml_fit,
    ml_loglik,
    pack_theta,
    transforms_for,
    unpack_theta,
)
from ivdr.numerics import MaximizeResult, std_normal_cdf, std_normal_log_cdf
from ivdr.simulation import DgpConfig, draw_dgp


def overidentified_data(n, seed, rho=0.5):
    """Two-instrument design where the ML and control-function fits differ."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    z = rng.normal(size=(n, 2))
    e1 = rng.normal(size=n)
    e2 = rng.normal(size=n)
    v = rho * e1 + np.sqrt(1.0 - rho * rho) * e2
    y2 = 1.0 + x + z @ np.array([1.0, 0.7]) + v
    y1 = 1.0 + x + y2 + e1
    return Dataset(outcome=y1, endogenous=y2,
                   exogenous=np.column_stack([np.ones(n), x]), instruments=z)


def fd_score(theta, data, y, h=1e-6):
    """Central finite differences of the log-likelihood in the packed vector."""
    base = pack_theta(theta)
    k, l = data.k, data.l
    out = np.empty(base.shape[0])
    for j in range(base.shape[0]):
        up, dn = base.copy(), base.copy()
        up[j] += h
        dn[j] -= h
        f_up, _ = ml_loglik(unpack_theta(up, k, l), data, y)
        f_dn, _ = ml_loglik(unpack_theta(dn, k, l), data, y)
        out[j] = (f_up - f_dn) / (2.0 * h)
    return out


class TestThetaFull:
    def test_pack_unpack_round_trip(self):
        theta = ThetaFull(beta1=[0.5, -1.2], beta2=0.3, gamma1=[1.0, 2.0],
                          gamma2=[0.7], rho=-0.4, sigma2_sq=1.5)
        again = unpack_theta(pack_theta(theta), k=2, l=1)
        np.testing.assert_array_equal(pack_theta(again), pack_theta(theta))

    def test_unpack_wrong_length(self):
        with pytest.raises(ValueError, match="expected 8"):
            unpack_theta(np.zeros(7), k=2, l=1)

    def test_rho_outside_unit_interval(self):
        with pytest.raises(ValueError, match="rho"):
            ThetaFull(beta1=[0.0], beta2=0.0, gamma1=[0.0], gamma2=[0.0],
                      rho=1.0, sigma2_sq=1.0)

    def test_nonpositive_variance(self):
        with pytest.raises(ValueError, match="sigma2_sq"):
            ThetaFull(beta1=[0.0], beta2=0.0, gamma1=[0.0], gamma2=[0.0],
                      rho=0.0, sigma2_sq=0.0)

    def test_mismatched_exogenous_blocks(self):
        with pytest.raises(ValueError, match="same length"):
            ThetaFull(beta1=[0.0, 1.0], beta2=0.0, gamma1=[0.0], gamma2=[0.0],
                      rho=0.0, sigma2_sq=1.0)

    def test_derived_quantities(self):
        theta = ThetaFull(beta1=[0.0], beta2=0.0, gamma1=[0.0], gamma2=[0.0],
                          rho=0.6, sigma2_sq=4.0)
        assert theta.sigma_eps == pytest.approx(0.8)
        assert theta.resid_coef == pytest.approx(0.3)

    def test_transforms_shape(self):
        assert transforms_for(2, 1) == ("identity",) * 6 + ("tanh", "exp")


class TestLoglik:
    def theta(self):
        return ThetaFull(beta1=[1.5, -0.8], beta2=-0.9, gamma1=[0.9, 1.1],
                         gamma2=[1.05], rho=0.3, sigma2_sq=1.2)

    def test_value_matches_per_observation_formula(self):
        data = draw_dgp(DgpConfig(rho=0.7, n=60, seed=20))
        theta = self.theta()
        y = 3.0
        value, _ = ml_loglik(theta, data, y)
        total = 0.0
        for i in range(data.n):
            v = (data.endogenous[i] - data.exogenous[i] @ theta.gamma1
                 - data.instruments[i] @ theta.gamma2)
            m = (data.exogenous[i] @ theta.beta1 + data.endogenous[i] * theta.beta2
                 + theta.resid_coef * v) / theta.sigma_eps
            if data.outcome[i] <= y:
                total += float(std_normal_log_cdf(m))
            else:
                total += float(std_normal_log_cdf(-m))
            total += (-0.5 * np.log(2.0 * np.pi) - 0.5 * np.log(theta.sigma2_sq)
                      - v * v / (2.0 * theta.sigma2_sq))
        assert value == pytest.approx(total, rel=1e-12)

    def test_score_matches_finite_differences(self):
        data = draw_dgp(DgpConfig(rho=0.7, n=80, seed=21))
        theta = self.theta()
        _, grad = ml_loglik(theta, data, 3.0)
        numeric = fd_score(theta, data, 3.0)
        np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-4)

    def test_score_matches_finite_differences_overidentified(self):
        data = overidentified_data(70, seed=22)
        theta = ThetaFull(beta1=[2.0, -1.0], beta2=-1.0, gamma1=[1.0, 1.0],
                          gamma2=[1.0, 0.7], rho=-0.45, sigma2_sq=1.1)
        _, grad = ml_loglik(theta, data, 4.0)
        numeric = fd_score(theta, data, 4.0)
        np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-4)


class TestMlFit:
    def test_just_identified_fit_equals_mapped_control_function(self):
        # with one instrument the control-function values already solve the
        # likelihood equations, so the optimizer should not move
        data = draw_dgp(DgpConfig(rho=0.7, n=400, seed=23))
        fit = ml_fit(data, 3.0)
        start = default_start(data, 3.0)
        assert fit.converged
        np.testing.assert_allclose(pack_theta(fit.theta), pack_theta(start),
                                   rtol=0.0, atol=1e-7)
        assert float(np.linalg.norm(fit.score_at_opt)) < 1e-6

    def test_recovers_dgp_parameters(self):
        # outcome <= y is u <= y - 1 - x - y2, so the threshold-equation error
        # is -u: slopes flip sign and the correlation target is -rho
        data = draw_dgp(DgpConfig(rho=0.7, n=4000, seed=24))
        fit = ml_fit(data, 3.0)
        np.testing.assert_allclose(fit.theta.beta1, [2.0, -1.0], atol=0.15)
        assert fit.theta.beta2 == pytest.approx(-1.0, abs=0.12)
        assert fit.theta.rho == pytest.approx(-0.7, abs=0.06)
        assert fit.theta.sigma2_sq == pytest.approx(1.0, abs=0.08)
        np.testing.assert_allclose(fit.theta.gamma1, [1.0, 1.0], atol=0.06)
        np.testing.assert_allclose(fit.theta.gamma2, [1.0], atol=0.06)

    def test_overidentified_fit_improves_on_start_and_converges(self):
        data = overidentified_data(600, seed=25)
        start = default_start(data, 4.0)
        start_ll, _ = ml_loglik(start, data, 4.0)
        fit = ml_fit(data, 4.0)
        assert fit.converged
        assert fit.loglik >= start_ll - 1e-9
        assert float(np.linalg.norm(fit.score_at_opt)) < 1e-5
        assert fit.theta.rho == pytest.approx(-0.5, abs=0.15)

    def test_perturbed_start_returns_to_same_optimum(self):
        data = overidentified_data(300, seed=26)
        fit = ml_fit(data, 4.0)
        jostled = pack_theta(fit.theta)
        jostled[:-2] += 0.2
        jostled[-2] = 0.1
        jostled[-1] *= 1.5
        refit = ml_fit(data, 4.0, start=unpack_theta(jostled, data.k, data.l))
        np.testing.assert_allclose(pack_theta(refit.theta), pack_theta(fit.theta),
                                   rtol=0.0, atol=5e-5)

    def test_exogenous_data_gives_small_rho(self):
        data = draw_dgp(DgpConfig(rho=0.0, n=2000, seed=27))
        fit = ml_fit(data, 3.0)
        assert abs(fit.theta.rho) < 0.08

    def test_degenerate_threshold_raises(self):
        data = draw_dgp(DgpConfig(rho=0.7, n=200, seed=28))
        with pytest.raises(DegenerateOutcome):
            ml_fit(data, float(data.outcome.max()) + 1.0)

    def test_boundary_correlation_raises(self, monkeypatch):
        data = draw_dgp(DgpConfig(rho=0.7, n=200, seed=29))

        def pinned(objective, start, transforms, **kwargs):
            vec = np.asarray(start, dtype=float).copy()
            vec[-2] = 1.0 - 1e-8
            return MaximizeResult(argmax=vec, value=0.0, converged=True,
                                  iterations=3, grad_norm=0.0)

        monkeypatch.setattr("ivdr.ivprobit.maximize_smooth", pinned)
        with pytest.raises(BoundarySolution):
            ml_fit(data, 3.0)

    def test_fit_is_deterministic(self):
        data = overidentified_data(250, seed=30)
        a = ml_fit(data, 4.0)
        b = ml_fit(data, 4.0)
        np.testing.assert_array_equal(pack_theta(a.theta), pack_theta(b.theta))


class TestCdf:
    def test_matches_normal_cdf_of_index(self):
        theta = ThetaFull(beta1=[1.0, -0.5], beta2=-1.0, gamma1=[0.0, 0.0],
                          gamma2=[0.0], rho=0.2, sigma2_sq=1.0)
        x = np.array([1.0, 0.4])
        expected = float(std_normal_cdf(1.0 - 0.5 * 0.4 - 1.0 * 1.3))
        assert ml_cdf_at(theta, x, 1.3) == pytest.approx(expected, abs=1e-15)

    def test_wrong_x_length_raises(self):
        theta = ThetaFull(beta1=[1.0], beta2=0.0, gamma1=[0.0], gamma2=[0.0],
                          rho=0.0, sigma2_sq=1.0)
        with pytest.raises(ValueError, match="length"):
            ml_cdf_at(theta, np.array([1.0, 2.0]), 0.5)
