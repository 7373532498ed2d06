import math

import numpy as np
import pytest

from arratia import analytics as an
from arratia import harness as H
from arratia.errors import ConfigError, DomainError
from arratia.report import FAIL, INFO, PASS


class TestGeometricTimeGrid:
    def test_times(self):
        g = H.GeometricTimeGrid(0.1, 3, 5)
        np.testing.assert_allclose(g.times, [1e-3, 1e-4, 1e-5])
        g.check_envelope_domain()

    def test_domain(self):
        with pytest.raises(DomainError):
            H.GeometricTimeGrid(0.9, 3, 5).check_envelope_domain()
        with pytest.raises(ConfigError):
            H.GeometricTimeGrid(0.1, 5, 3)
        with pytest.raises(ConfigError):
            H.GeometricTimeGrid(1.5, 1, 3)


def test_family_k():
    assert H.family_k(1) == pytest.approx(2.5758, abs=1e-4)
    assert H.family_k(8) > H.family_k(1)


class TestDistributionCheck:
    def test_minimum_replications(self):
        with pytest.raises(ConfigError):
            H.run_distribution_check(replications=9999)

    def test_small_run(self):
        rep = H.run_distribution_check(t=0.5, replications=10_000, flow_replications=500, seed=3)
        assert rep.row("exact_freq_r0").value == 1.0
        assert rep.row("flow_freq_r0").value == 1.0
        assert rep.row("exact_ks").verdict in (PASS, FAIL)
        # exact columns come from the closed form
        r = rep.config["r_grid"][3]
        assert rep.row(f"exact_freq_r{r:g}").threshold == an.cluster_survival(0.5, r)
        assert rep.row("flow_boundary_touches").verdict == PASS
        assert rep.row("flow_mean_nu_hat").verdict == INFO
        assert {s for _, _, s in rep.plot_data["survival"]} == {"exact", "sampler", "flow_right", "flow_nu_hat"}
        assert rep.passed, [(x.name, x.value) for x in rep.failures]

    def test_reproducible(self):
        a = H.run_distribution_check(replications=10_000, flow_replications=100, seed=1)
        b = H.run_distribution_check(replications=10_000, flow_replications=100, seed=1)
        assert a.to_json() == b.to_json() and a.to_csv() == b.to_csv()


class TestScaling:
    def test_needs_two_times(self):
        with pytest.raises(ConfigError):
            H.run_scaling_check(t_list=(1.0, 1.0))

    def test_small_run(self):
        rep = H.run_scaling_check(t_list=(0.5, 2.0), replications=500, seed=2)
        names = [r.name for r in rep.rows]
        assert "two_sample_right_t0.5_t2.0" in names and "two_sample_nu_t0.5_t2.0" in names
        assert "darling_ks_t0.5" in names and "median_right_t2.0" in names
        assert rep.row("median_right_t2.0").threshold == pytest.approx(0.953873, abs=5e-7)


class TestLilMarginals:
    def test_domain(self):
        with pytest.raises(DomainError):
            H.run_lil_marginals(alpha=0.5, n_range=(1, 4), replications=100)

    def test_small_run(self):
        rep = H.run_lil_marginals(replications=5000, flow_replications=500, seed=4)
        assert rep.row("alpha_admissible").verdict == INFO
        assert rep.row("closed_form_consistency").verdict == PASS
        rows = rep.tables["series"]
        assert [r["n"] for r in rows] == list(range(3, 11))
        assert all(b["partial_upper"] > a["partial_upper"] for a, b in zip(rows, rows[1:]))
        for r in rows:
            t = r["t_n"]
            ll = math.log(math.log(1 / t))
            assert r["p_lower"] == pytest.approx(math.erfc(0.5 * math.sqrt(ll / 2)), rel=1e-12)
            assert r["p_upper"] == pytest.approx(math.erfc(1.5 * math.sqrt(ll)), rel=1e-12)
        assert rep.row("lower_series_decay_exponent").verdict == PASS
        assert rep.row("upper_series_decay_exponent").verdict == PASS

    def test_deep_range_series_converges(self):
        # the relative gap shrinks once the range reaches far enough
        rep = H.run_lil_marginals(n_range=(3, 40), replications=100, flow_replications=10, seed=0,
                                  series_tolerance=0.05)
        assert rep.row("upper_series_rel_gap").value < 0.1375


class TestLilPaths:
    def test_small_run(self):
        rep = H.run_lil_paths(paths=100, seed=5, n_range=(3, 6))
        assert rep.row("alpha_admissible").verdict == INFO
        assert rep.row("boundary_touches").verdict == PASS
        env = rep.tables["envelopes"]
        # path maxima dominate every single-time frequency
        for e in env:
            assert e["frac_right_over_psi"] <= rep.row("frac_right_exceeds_lower").value
            assert e["frac_right_over_phi"] <= rep.row("frac_right_exceeds_upper").value
        for m in rep.tables["path_maxima"]:
            assert m["max_nu_over_psi"] >= m["max_right_over_psi"]
        assert rep.passed


class TestSudakovCheck:
    def test_flags_and_table(self):
        rep = H.run_sudakov_check(params_list=((0.5, 0.1, 30, 40), (0.5, 0.1, 30, 60)), mesh=64,
                                  replications=300, seed=6)
        small = rep.row("sudakov[eps=0.5,alpha=0.1,n=30,N=40]")
        assert small.verdict == INFO and "not-certified" in small.note
        assert rep.row("sudakov[eps=0.5,alpha=0.1,n=30,N=60]").verdict == PASS
        table = rep.tables["gaussian"]
        assert len(table) == 4
        assert set(table[0]) >= {"n", "N", "epsilon", "alpha", "sigma", "delta", "capacity", "sudakov_bound",
                                 "mc_mean_xi", "mc_se", "tail_r", "tail_freq", "tail_bound"}
        assert table[0]["certified"] is False and table[2]["certified"] is True


class TestAnchors:
    def test_engine_anchor_small(self):
        rep = H.run_engine_anchor(replications=1000, dt=1e-3, seed=1)
        assert rep.passed

    def test_mean_width_rows(self):
        rep = H.run_mean_width_check(points=61, extent=3.0, replications=300, seed=2)
        assert rep.row("boundary_touches").verdict == INFO
        assert {r.name for r in rep.rows} >= {"mean_nu_hat_vs_one_sided_mean", "mean_right_vs_one_sided_mean"}
