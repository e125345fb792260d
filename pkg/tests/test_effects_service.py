import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.graph_core import (
    degree_summary,
    empty_graph,
    exposure,
    generate_ba,
    generate_er,
    generate_ws,
    matrix_power,
    permute,
)
from src.services.data_service import Dataset, DataService
from src.services.edge_list_service import EdgeListService
from src.services.effects_service import (
    compare_networks,
    estimate_naive,
    estimate_partially_known,
    estimate_total_known,
    plug_in_psi,
    plug_in_variance,
    variance_bias_diagnostic,
    wald_ci,
    z_quantile,
)
from src.services.regression_service import VcovSpec, build_design, fit_ols, sandwich_vcov
from src.services.simulation_service import ErrorSpec, generate_dgp
from src.utils.errors import NotPositiveDefiniteError, ValidationError

from conftest import noise_free, random_dataset, ring_graph


@pytest.fixture
def toy(toy_paths):
    data, _ = DataService().load_dataset(toy_paths["units"], "Y", "A", ["L"])
    G = EdgeListService().read_edge_list(toy_paths["edges"], directed=True)
    return data, G


class TestPlugIn:
    def test_psi(self):
        assert plug_in_psi(2.0, [0.5], [3.0]) == 3.5
        assert plug_in_psi(0.7, [], []) == 0.7
        assert plug_in_psi(1.0, [1.0, 2.0], [0.5, 0.25]) == 2.0

    def test_psi_length_mismatch(self):
        with pytest.raises(ValidationError):
            plug_in_psi(1.0, [1.0, 2.0], [0.5])

    def test_variance_single_network(self):
        V = np.array([[0.04, 0.005], [0.005, 0.01]])
        assert plug_in_variance(V, [2.0]) == pytest.approx(0.10)
        assert plug_in_variance(V, [0.0]) == pytest.approx(0.04)

    def test_variance_two_networks(self):
        assert plug_in_variance(np.eye(3), [1.0, 2.0]) == pytest.approx(6.0)

    def test_variance_rejects_indefinite_matrix(self):
        with pytest.raises(NotPositiveDefiniteError):
            plug_in_variance(np.array([[1.0, 2.0], [2.0, 1.0]]), [1.0])

    def test_variance_shape_checked(self):
        with pytest.raises(ValidationError, match="expected"):
            plug_in_variance(np.eye(2), [1.0, 2.0])


class TestWaldInterval:
    def test_standard_normal(self):
        lower, upper = wald_ci(0.0, 1.0, 0.05)
        assert lower == pytest.approx(-1.959964, abs=1e-6)
        assert upper == pytest.approx(1.959964, abs=1e-6)

    def test_zero_variance(self):
        assert wald_ci(2.5, 0.0) == (2.5, 2.5)

    def test_one_sigma_level(self):
        assert z_quantile(0.32) == pytest.approx(0.994458, abs=1e-6)
        lower, upper = wald_ci(1.0, 4.0, 0.32)
        assert upper - 1.0 == pytest.approx(2.0 * 0.994458, abs=1e-5)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValidationError):
            wald_ci(0.0, -1.0)
        with pytest.raises(ValidationError, match="alpha"):
            wald_ci(0.0, 1.0, alpha=1.0)


class TestTotalKnown:
    @pytest.mark.parametrize(
        "graph",
        [
            generate_er(200, 0.03, seed=1),
            generate_ba(200, power=0.05, m=2, seed=2),
            generate_ws(200, nei=3, p_rewire=0.05, seed=3),
        ],
        ids=["er", "ba", "ws"],
    )
    def test_noise_free_recovery(self, graph):
        data, true_psi = noise_free(graph)
        estimate = estimate_total_known(data, [graph])
        assert estimate.psi == pytest.approx(true_psi, abs=1e-8)
        assert estimate.beta_a == pytest.approx(1.0, abs=1e-8)
        assert estimate.f_bar[0] == pytest.approx(degree_summary(graph).F_bar)

    def test_toy_example(self, toy):
        data, G = toy
        full = estimate_total_known(data, [G])
        naive = estimate_naive(data)
        assert full.estimator == "full"
        assert full.f_bar == pytest.approx((3.0,))
        assert full.psi == pytest.approx(4.0, abs=1e-8)
        assert naive.psi == pytest.approx(1.0, abs=1e-8)
        assert naive.psi - full.psi == pytest.approx(-full.f_bar[0], abs=1e-8)
        assert full.spillover == pytest.approx((3.0,), abs=1e-8)

    def test_higher_order_network(self):
        G = generate_er(200, 0.03, seed=12)
        G2 = matrix_power(G, 2)
        base, _ = noise_free(G)
        data = Dataset(y=base.y + 0.5 * exposure(G2, base.a), a=base.a, L=base.L)
        estimate = estimate_total_known(data, [G, G2])
        assert estimate.estimator == "multi"
        assert_allclose(estimate.beta_as, [1.0, 0.5], atol=1e-8)
        expected = 1.0 + degree_summary(G).F_bar + 0.5 * degree_summary(G2).F_bar
        assert estimate.psi == pytest.approx(expected, abs=1e-8)
        assert estimate.f_bar[1] == pytest.approx(degree_summary(G2).F_bar)

    def test_null_graph_matches_naive(self):
        data = random_dataset(30, seed=4)
        full = estimate_total_known(data, [empty_graph(30)])
        naive = estimate_naive(data)
        assert full.psi == pytest.approx(naive.psi, abs=1e-10)
        assert full.se == pytest.approx(naive.se, abs=1e-10)
        assert full.beta_as == (0.0,)
        assert "G1:A" in full.dropped
        assert any("G1:A" in warning for warning in full.warnings)

    def test_duplicate_graph_reduces_to_single(self):
        G = generate_er(120, 0.05, seed=8)
        data, _ = generate_dgp(120, G, ErrorSpec("homo"), np.random.default_rng(3))
        single = estimate_total_known(data, [G])
        again = estimate_total_known(data, [G])
        double = estimate_total_known(data, [G, G])
        assert single == again
        assert double.estimator == "multi"
        assert double.psi == single.psi
        assert double.se == pytest.approx(single.se, rel=1e-12)
        assert double.beta_as == (single.beta_as[0], 0.0)
        assert "G2:A" in double.dropped

    def test_permutation_invariance(self):
        G = generate_er(100, 0.05, seed=5)
        data, _ = generate_dgp(100, G, ErrorSpec("homo"), np.random.default_rng(6))
        perm = np.random.default_rng(7).permutation(100)
        for kind in ("classical", "hc3"):
            base = estimate_total_known(data, [G], VcovSpec(kind))
            moved = estimate_total_known(data.permute(perm), [permute(G, perm)], VcovSpec(kind))
            assert moved.psi == pytest.approx(base.psi, abs=1e-10)
            assert moved.se == pytest.approx(base.se, abs=1e-10)
            assert_allclose(moved.ci, base.ci, atol=1e-10)
            assert_allclose(moved.beta_as, base.beta_as, atol=1e-10)

    def test_gls_reports_network_correlation(self):
        G = ring_graph(60)
        data, _ = generate_dgp(60, G, ErrorSpec("corr", a=3.0, b=1.0), np.random.default_rng(1))
        estimate = estimate_total_known(data, [G], VcovSpec("gls"))
        assert estimate.vcov_kind == "gls"
        assert set(estimate.diagnostics) >= {"theta", "rho", "sigma2", "loglik"}
        assert -0.5 < estimate.diagnostics["theta"] < 0.5

    def test_known_sigma_needs_gls(self):
        G = ring_graph(20)
        data, _ = noise_free(G)
        with pytest.raises(ValidationError, match="gls"):
            estimate_total_known(data, [G], VcovSpec("hc0"), known_sigma=(1.0, 0.2))

    def test_needs_a_graph(self):
        with pytest.raises(ValidationError):
            estimate_total_known(random_dataset(10), [])

    def test_rejects_bad_alpha(self):
        G = ring_graph(20)
        data, _ = noise_free(G)
        with pytest.raises(ValidationError, match="alpha"):
            estimate_total_known(data, [G], alpha=0.0)


class TestPartiallyKnown:
    def test_plug_in_arithmetic(self):
        rng = np.random.default_rng(0)
        F = np.tile([0.0, 0.4], 10)
        a = rng.normal(size=20)
        data = Dataset(y=1.0 + 1.5 * a + 0.7 * F, a=a, L=np.zeros((20, 0)))
        estimate = estimate_partially_known(data, F)
        assert estimate.beta_a == pytest.approx(1.5)
        assert estimate.f_bar == pytest.approx((0.2,))
        assert estimate.psi == pytest.approx(1.8)
        assert estimate.diagnostics["degree_coefficient"] == pytest.approx(0.7)

    def test_variance_scales_with_mean_degree(self):
        data = random_dataset(50, seed=2)
        F = np.random.default_rng(3).poisson(2.0, size=50).astype(float)
        estimate = estimate_partially_known(data, F, VcovSpec("hc1"))
        design = build_design(data, spec="degree_only", degrees=[F])
        fit = fit_ols(design, data.y)
        var_beta = sandwich_vcov(fit, design, VcovSpec("hc1"))[1, 1]
        assert estimate.variance == pytest.approx((1.0 + F.mean()) ** 2 * var_beta)

    def test_toy_example(self, toy):
        data, G = toy
        estimate = estimate_partially_known(data, degree_summary(G).F)
        assert estimate.psi == pytest.approx(4.0, abs=1e-8)

    def test_constant_degree_warns(self):
        data = random_dataset(30, seed=1)
        estimate = estimate_partially_known(data, np.full(30, 2.0))
        assert "F1" in estimate.dropped
        assert any("constant" in warning for warning in estimate.warnings)
        assert estimate.psi == pytest.approx(3.0 * estimate.beta_a)

    def test_rejects_negative_degrees(self):
        data = random_dataset(5, seed=1)
        with pytest.raises(ValidationError, match="nonnegative"):
            estimate_partially_known(data, [1.0, -1.0, 0.0, 2.0, 1.0])

    def test_rejects_gls(self):
        data = random_dataset(5, seed=1)
        with pytest.raises(ValidationError, match="gls"):
            estimate_partially_known(data, np.ones(5), VcovSpec("gls"))


class TestNaive:
    def test_no_interference_agrees_with_full(self):
        data, _ = generate_dgp(80, empty_graph(80), ErrorSpec("homo"), np.random.default_rng(9))
        naive = estimate_naive(data)
        full = estimate_total_known(data, [empty_graph(80)])
        assert naive.psi == pytest.approx(full.psi, abs=1e-10)
        assert naive.beta_as == ()
        assert naive.f_bar == ()


class TestDiagnostics:
    def test_random_graph_variance_bias(self):
        assert variance_bias_diagnostic([1.0], 100, [470.25]) == pytest.approx(-0.047025)

    def test_fixed_weight_family_has_no_bias(self):
        assert variance_bias_diagnostic([2.0], 100, [0.0]) == 0.0

    def test_covariance_terms(self):
        cov = np.array([[0.0, 0.5], [0.5, 0.0]])
        assert variance_bias_diagnostic([1.0, 2.0], 10, [1.0, 1.0], cov) == pytest.approx(-7.0 / 100)

    def test_compare_networks_prefers_true_graph(self):
        G = generate_er(200, 0.03, seed=4)
        data, _ = generate_dgp(200, G, ErrorSpec("homo"), np.random.default_rng(5))
        rows = compare_networks(data, [("empty", empty_graph(200)), ("true", G)])
        assert [row["name"] for row in rows] == ["true", "empty"]
        assert rows[0]["aic"] < rows[1]["aic"]
        assert set(rows[0]) == {"name", "aic", "loglik", "k", "psi"}
