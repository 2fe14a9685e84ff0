"""Tests for the Monte Carlo harness, its statistics and CSV/JSON output."""

import json

import numpy as np
import pytest

from smelab.experiments import (
    CSV_HEADER,
    ExperimentConfig,
    MonteCarloRecord,
    _trial_rng,
    default_config,
    empirical_coverage,
    empty_fraction,
    export_csv,
    fit_loglog_slope,
    load_records_csv,
    mean_volume,
    run_monte_carlo,
    summarize,
    write_summary,
)
from smelab.noise import kappa_delta
from smelab.sme import build_stochastic_set, is_empty, radius_sq, set_volume
from smelab.systems import LtiParams, simulate_lti


def small_config(**overrides):
    base = dict(system="lti", sigma_grid=[1.0], N_grid=[50, 120], trials=4,
                delta=0.05, sigma_u=5.0, seed=3,
                methods=("stochastic-sme", "noise-filtered", "chi2"))
    base.update(overrides)
    return ExperimentConfig(**base)


class TestConfig:
    def test_validation_messages_name_fields(self):
        with pytest.raises(ValueError, match="delta"):
            small_config(delta=1.5)
        with pytest.raises(ValueError, match="N_grid"):
            small_config(N_grid=[100, 100])
        with pytest.raises(ValueError, match="trials"):
            small_config(trials=0)
        with pytest.raises(ValueError, match="method"):
            small_config(methods=("bogus",))
        with pytest.raises(ValueError, match="system"):
            small_config(system="rocket")

    def test_dict_roundtrip(self):
        cfg = small_config(dof=2, kappa=1.0, system_params={"a": 0.8})
        clone = ExperimentConfig.from_dict(cfg.to_dict())
        assert clone.to_dict() == cfg.to_dict()

    def test_unknown_field_rejected(self):
        with pytest.raises(ValueError, match="bogus_field"):
            ExperimentConfig.from_dict({"system": "lti", "bogus_field": 1})

    def test_defaults(self):
        cfg = default_config("pendulum")
        assert cfg.resolved_sigma_nominal() == 0.01
        assert cfg.resolved_dof() == 3
        assert "chi2" not in cfg.methods


class TestRunMonteCarlo:
    def test_record_count_is_cartesian(self):
        cfg = small_config(sigma_grid=[0.9, 1.0], trials=3)
        records = run_monte_carlo(cfg, threads=1)
        assert len(records) == 2 * 3 * 2 * 3  # sigma x trials x N x methods

    def test_deterministic_and_thread_invariant(self):
        cfg = small_config(sigma_grid=[0.9, 1.1], trials=3)
        a = run_monte_carlo(cfg, threads=1)
        b = run_monte_carlo(cfg, threads=2)
        assert a == b

    def test_records_sorted_by_full_key(self):
        records = run_monte_carlo(small_config(sigma_grid=[0.9, 1.0]), threads=1)
        keys = [(r.method, r.sigma, r.N, r.trial) for r in records]
        assert keys == sorted(keys)

    def test_method_subset_gives_identical_records(self):
        # paired design: dropping methods must not change the shared trajectory
        cfg_all = small_config()
        cfg_one = small_config(methods=("stochastic-sme",))
        all_recs = [r for r in run_monte_carlo(cfg_all, threads=1)
                    if r.method == "stochastic-sme"]
        one_recs = run_monte_carlo(cfg_one, threads=1)
        assert all_recs == one_recs

    def test_trajectory_streams_are_counter_derived(self):
        # trial 1 of a 2-trial run equals trial 1 of a 5-trial run
        a = [r for r in run_monte_carlo(small_config(trials=2), threads=1) if r.trial == 1]
        b = [r for r in run_monte_carlo(small_config(trials=5), threads=1) if r.trial == 1]
        assert a == b

    def test_empty_record_invariant(self):
        # sigma far above nominal forces plenty of empty sets at N = 2000
        cfg = small_config(sigma_grid=[2.0], N_grid=[2000], trials=20,
                           methods=("stochastic-sme",))
        records = run_monte_carlo(cfg, threads=1)
        empties = [r for r in records if r.empty]
        assert empties, "expected empty sets with badly underestimated noise"
        for r in empties:
            assert r.volume == 0.0 and not r.contains_true

    def test_matches_per_trial_simulation(self):
        cfg = small_config(trials=2, N_grid=[60, 150])
        records = run_monte_carlo(cfg, threads=1)
        kappa = kappa_delta(cfg.delta, 1, 1.0, 0.5)
        for trial in range(2):
            u = _trial_rng(cfg.seed, 0, trial).standard_normal(150) * cfg.sigma_u
            e = _trial_rng(cfg.seed, 1, trial).standard_normal(150) * 1.0
            data = simulate_lti(LtiParams(), u, e.reshape(1, -1), x0=0.0)
            for n in (60, 150):
                pset = build_stochastic_set(data.prefix(n), kappa)
                ref_vol = 0.0 if is_empty(pset) else set_volume(pset)
                ref_rad = 0.0 if is_empty(pset) else radius_sq(pset)
                rec = next(r for r in records if r.method == "stochastic-sme"
                           and r.trial == trial and r.N == n)
                assert rec.volume == pytest.approx(ref_vol, rel=1e-9)
                assert rec.radius_sq == pytest.approx(ref_rad, rel=1e-9)

    def test_coverage_at_nominal_sigma(self):
        cfg = small_config(sigma_grid=[1.0], N_grid=[1000], trials=100,
                           methods=("stochastic-sme",))
        records = run_monte_carlo(cfg, threads=1)
        assert empirical_coverage(records, "stochastic-sme", 1.0, 1000) >= 0.95
        # empty fraction stays within delta plus binomial slack
        frac = empty_fraction(records, "stochastic-sme", 1.0, 1000)
        assert frac <= 0.05 + 3.0 * np.sqrt(0.05 * 0.95 / 100)

    def test_volume_nondecreasing_in_kappa(self):
        lo = run_monte_carlo(small_config(kappa=1.0), threads=1)
        hi = run_monte_carlo(small_config(kappa=2.5), threads=1)
        pairs = 0
        for a, b in zip(lo, hi):
            if a.method != "stochastic-sme" or a.empty or b.empty:
                continue
            assert (a.method, a.sigma, a.N, a.trial) == (b.method, b.sigma, b.N, b.trial)
            assert a.volume <= b.volume * (1.0 + 1e-12)
            pairs += 1
        assert pairs > 0


class TestStatistics:
    def test_coverage_fractions(self):
        recs = [MonteCarloRecord("chi2", 1.0, 10, t, 1.0, 1.0, False, t < 5, 0.1)
                for t in range(10)]
        assert empirical_coverage(recs, "chi2", 1.0, 10) == 0.5
        assert empirical_coverage(recs[:5], "chi2", 1.0, 10) == 1.0
        assert empirical_coverage(recs[5:], "chi2", 1.0, 10) == 0.0

    def test_empty_selection_rejected(self):
        with pytest.raises(ValueError):
            empirical_coverage([], "chi2", 1.0, 10)

    def test_mean_volume_excludes_empties(self):
        recs = [MonteCarloRecord("chi2", 1.0, 10, 0, 2.0, 1.0, False, True, 0.1),
                MonteCarloRecord("chi2", 1.0, 10, 1, 0.0, 0.0, True, False, 0.1)]
        assert mean_volume(recs, "chi2", 1.0, 10) == 2.0
        only_empty = [recs[1]]
        assert mean_volume(only_empty, "chi2", 1.0, 10) is None


class TestSlopeFit:
    def test_exact_inverse_power(self):
        ns = [100, 1000, 10000, 100000]
        fit = fit_loglog_slope(ns, [7.0 / n for n in ns])
        assert fit.slope == pytest.approx(-1.0, abs=1e-9)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-9)

    def test_constant_volumes(self):
        fit = fit_loglog_slope([10, 100, 1000], [0.4, 0.4, 0.4])
        assert fit.slope == pytest.approx(0.0, abs=1e-12)

    def test_inverse_sqrt(self):
        ns = [100, 1000, 10000]
        fit = fit_loglog_slope(ns, [3.0 / np.sqrt(n) for n in ns])
        assert fit.slope == pytest.approx(-0.5, abs=1e-9)

    def test_rejects_nonpositive_volumes(self):
        with pytest.raises(ValueError):
            fit_loglog_slope([10, 100, 1000], [1.0, 0.0, 0.1])
        with pytest.raises(ValueError):
            fit_loglog_slope([10, 100], [1.0, 0.5])


class TestCsvRoundtrip:
    def test_header_only_for_no_records(self, tmp_path):
        path = tmp_path / "empty.csv"
        export_csv([], path)
        assert path.read_text() == CSV_HEADER + "\n"
        assert load_records_csv(path) == []

    def test_column_order(self, tmp_path):
        path = tmp_path / "one.csv"
        export_csv([MonteCarloRecord("chi2", 1.0, 100, 0, 0.25, 0.5, False, True, 0.01)], path)
        lines = path.read_text().splitlines()
        assert lines[0] == "method,sigma,N,trial,volume,radius_sq,empty,contains_true,ols_error_sq"
        assert lines[1] == "chi2,1,100,0,0.25,0.5,0,1,0.01"

    def test_roundtrip_identity(self, tmp_path):
        records = run_monte_carlo(small_config(trials=3), threads=1)
        path = tmp_path / "records.csv"
        export_csv(records, path)
        loaded = load_records_csv(path)
        assert len(loaded) == len(records)
        for a, b in zip(loaded, records):
            assert (a.method, a.N, a.trial, a.empty, a.contains_true) == \
                   (b.method, b.N, b.trial, b.empty, b.contains_true)
            assert a.sigma == pytest.approx(b.sigma, rel=1e-11)
            assert a.volume == pytest.approx(b.volume, rel=1e-11, abs=1e-300)
            assert a.radius_sq == pytest.approx(b.radius_sq, rel=1e-11, abs=1e-300)
            assert a.ols_error_sq == pytest.approx(b.ols_error_sq, rel=1e-11)
        # re-export of the parsed records is byte-identical (stable 12-digit form)
        path2 = tmp_path / "records2.csv"
        export_csv(loaded, path2)
        assert path.read_text() == path2.read_text()

    def test_rejects_wrong_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("method,sigma\n")
        with pytest.raises(ValueError):
            load_records_csv(path)

    def test_write_failure_carries_path(self):
        with pytest.raises(OSError, match="no/such/dir"):
            export_csv([], "no/such/dir/out.csv")


class TestSummary:
    def test_summary_structure(self, tmp_path):
        records = run_monte_carlo(small_config(trials=5), threads=1)
        summary = summarize(records)
        assert {g["method"] for g in summary["groups"]} == set(small_config().methods)
        for g in summary["groups"]:
            assert g["records"] == 5
            assert 0.0 <= g["empty_fraction"] <= 1.0
            assert 0.0 <= g["coverage"] <= 1.0
        path = tmp_path / "summary.json"
        write_summary(records, path)
        parsed = json.loads(path.read_text())
        assert parsed["groups"] == summary["groups"]

    def test_slope_entries_need_three_points(self):
        records = run_monte_carlo(small_config(trials=3), threads=1)
        summary = summarize(records)
        for entry in summary["slopes"]:
            assert entry["slope"] is None  # only two N points in the grid
