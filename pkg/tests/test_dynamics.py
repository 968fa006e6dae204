"""Model registry, drift evaluation, decay certificate, growth constants."""

import math

import numpy as np
import pytest

from etconsensus.dynamics import (
    CmfCertificate,
    SystemModel,
    available_models,
    check_cmf,
    estimate_lipschitz,
    eval_f,
    make_model,
    register_model,
    trig_grid,
)
from etconsensus.errors import CertificateError, ModelError


def linear_model(F: np.ndarray) -> SystemModel:
    F = np.asarray(F, dtype=float)
    n = F.shape[0]
    return SystemModel(
        name="linear-test",
        state_dim=n,
        input_dim=n,
        param_dim=1,
        f=lambda x, th: x @ F.T,
        jacobian_f=lambda x, th: F,
        B=np.eye(n),
        theta_true=[0.0],
        theta_hat=[0.0],
        param_low=[0.0],
        param_high=[1.0],
    )


class TestDrift:
    def test_pointwise_values(self):
        model = make_model("paper-sys")
        assert np.allclose(eval_f(model, [0.0, 0.0], 0.5), [0.5, 0.5], atol=1e-15)
        assert np.allclose(
            eval_f(model, [0.0, math.pi / 2.0], 0.0), [math.pi / 2.0, 0.0], atol=1e-15
        )
        th = 0.5
        want = [
            1.0 + th * math.cos(1.0),
            -1.0 + th * math.cos(1.0) + th * th * math.cos(1.0) * math.sin(1.0),
        ]
        assert np.allclose(eval_f(model, [1.0, 1.0], th), want, atol=1e-15)

    def test_batch_matches_loop(self):
        model = make_model("paper-sys")
        rng = np.random.default_rng(3)
        xs = rng.normal(size=(40, 2))
        batch = eval_f(model, xs, 0.37)
        for k in range(xs.shape[0]):
            assert np.array_equal(batch[k], eval_f(model, xs[k], 0.37))

    def test_dimension_validation(self):
        model = make_model("paper-sys")
        with pytest.raises(ModelError):
            eval_f(model, [1.0, 2.0, 3.0], 0.5)
        with pytest.raises(ModelError):
            eval_f(model, 1.0, 0.5)
        with pytest.raises(ModelError):
            eval_f(model, [1.0, 2.0], [0.1, 0.2])

    def test_jacobian_matches_finite_differences(self):
        model = make_model("paper-sys")
        rng = np.random.default_rng(5)
        eps = 1e-6
        for _ in range(20):
            x = rng.uniform(-3.0, 3.0, size=2)
            th = np.array([rng.uniform(0.0, 1.0)])
            J = model.jacobian_f(x, th)
            for col in range(2):
                dx = np.zeros(2)
                dx[col] = eps
                num = (model.f(x + dx, th) - model.f(x - dx, th)) / (2.0 * eps)
                assert np.allclose(J[:, col], num, atol=1e-6)


class TestRegistry:
    def test_paper_sys_registered_with_defaults(self):
        assert "paper-sys" in available_models()
        model = make_model("paper-sys")
        assert model.theta_true.tolist() == [0.5]
        assert model.theta_hat.tolist() == [0.40]
        assert model.B.tolist() == [[0.0], [-1.0]]
        assert (model.state_dim, model.input_dim, model.param_dim) == (2, 1, 1)

    def test_unknown_model_rejected(self):
        with pytest.raises(ModelError):
            make_model("no-such-system")

    def test_parameter_box_enforced(self):
        with pytest.raises(ModelError):
            make_model("paper-sys", [1.5], [0.4])
        with pytest.raises(ModelError):
            make_model("paper-sys", [0.5], [-0.1])

    def test_custom_model_roundtrip(self):
        register_model("linear-test", lambda th, thh: linear_model(-np.eye(2)))
        model = make_model("linear-test")
        assert np.allclose(eval_f(model, [1.0, 2.0], 0.0), [-1.0, -2.0])

    def test_b_shape_validated(self):
        with pytest.raises(ModelError):
            SystemModel(
                name="bad",
                state_dim=2,
                input_dim=1,
                param_dim=1,
                f=lambda x, th: x,
                jacobian_f=lambda x, th: np.eye(2),
                B=np.zeros((3, 1)),
                theta_true=[0.5],
                theta_hat=[0.5],
                param_low=[0.0],
                param_high=[1.0],
            )


class TestTrigGrid:
    def test_shape_and_bounds(self):
        grid = trig_grid()
        per_axis = int(math.floor(2.0 * math.pi / 0.05)) + 1
        assert grid.shape == (per_axis * per_axis, 2)
        assert grid.min() >= -math.pi - 1e-12
        assert grid.max() <= math.pi + 1e-12

    def test_custom_step(self):
        grid = trig_grid(step=1.0, bound=1.0)
        assert grid.shape == (9, 2)


class TestCertificate:
    def test_validation(self):
        with pytest.raises(CertificateError):
            CmfCertificate(P=np.array([[1.0, 0.5], [0.0, 1.0]]), rho=0.0, q=1.0)
        with pytest.raises(CertificateError):
            CmfCertificate(P=-np.eye(2), rho=0.0, q=1.0)
        with pytest.raises(CertificateError):
            CmfCertificate(P=np.eye(2), rho=-0.1, q=1.0)
        with pytest.raises(CertificateError):
            CmfCertificate(P=np.eye(2), rho=0.0, q=0.0)
        cert = CmfCertificate(P=np.eye(2), rho=0.0, q=1.0)
        assert cert.sample_report is None

    def test_linear_decay_margins(self):
        # For dx/dt = -x with P = I, rho = 0 the sampled matrix is (q - 2) I.
        model = linear_model(-np.eye(2))
        grid = np.array([[0.0, 0.0], [1.0, -1.0]])
        r1 = check_cmf(model, CmfCertificate(P=np.eye(2), rho=0.0, q=1.0), grid)
        assert r1.holds and math.isclose(r1.worst_margin, -1.0, abs_tol=1e-12)
        r2 = check_cmf(model, CmfCertificate(P=np.eye(2), rho=0.0, q=2.0), grid)
        assert r2.holds and abs(r2.worst_margin) <= 1e-12
        r3 = check_cmf(model, CmfCertificate(P=np.eye(2), rho=0.0, q=3.0), grid)
        assert not r3.holds and math.isclose(r3.worst_margin, 1.0, abs_tol=1e-12)

    def test_benchmark_certificate_on_coarse_grid(self):
        model = make_model("paper-sys")
        grid = trig_grid(step=0.5)
        cert = CmfCertificate(
            P=np.array([[5.0, 2.0], [2.0, 1.0]]), rho=0.02, q=1.0
        )
        report = check_cmf(model, cert, grid, thetas=[[0.5], [0.40], [0.35]])
        assert not report.holds
        assert report.worst_margin > 1.0
        assert cert.sample_report is report
        assert report.n_points == grid.shape[0] * 3

    def test_large_rho_restores_decay_on_coarse_grid(self):
        model = make_model("paper-sys")
        grid = trig_grid(step=0.5)
        cert = CmfCertificate(
            P=np.array([[5.0, 2.0], [2.0, 1.0]]), rho=20.0, q=1.0
        )
        report = check_cmf(model, cert, grid, thetas=[[0.5], [0.40], [0.35]])
        assert report.holds

    def test_empty_grid_rejected(self):
        model = make_model("paper-sys")
        cert = CmfCertificate(P=np.eye(2), rho=0.0, q=1.0)
        with pytest.raises(ModelError):
            check_cmf(model, cert, np.zeros((0, 2)))
        with pytest.raises(ModelError):
            check_cmf(model, cert, np.zeros((4, 3)))


class TestLipschitz:
    def test_benchmark_constants(self, lipschitz_cache):
        model, lip = lipschitz_cache([0.40])
        assert math.isclose(lip.k_grid_max, 1.676895, abs_tol=1e-3)
        assert lip.k == 1.05 * lip.k_grid_max
        assert math.isclose(lip.delta_grid_max, 0.176139, abs_tol=1e-3)
        assert lip.Delta == 1.05 * lip.delta_grid_max
        assert lip.safety == 1.05

    def test_larger_mismatch_for_worse_estimate(self, lipschitz_cache):
        _, lip40 = lipschitz_cache([0.40])
        _, lip35 = lipschitz_cache([0.35])
        assert math.isclose(lip35.delta_grid_max, 0.261130, abs_tol=1e-3)
        assert lip35.Delta > lip40.Delta
        assert math.isclose(lip35.k_grid_max, lip40.k_grid_max, rel_tol=1e-6)

    def test_zero_mismatch_when_estimate_exact(self):
        model = make_model("paper-sys", [0.5], [0.5])
        lip = estimate_lipschitz(model, trig_grid(step=0.5))
        assert lip.Delta == 0.0
        assert lip.delta_grid_max == 0.0
        assert lip.k > 0.0

    def test_empty_grid_rejected(self):
        model = make_model("paper-sys")
        with pytest.raises(ModelError):
            estimate_lipschitz(model, np.zeros((0, 2)))
