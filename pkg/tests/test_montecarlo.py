"""Tests for the shot sampler: statistics against the exact model, determinism."""

import math
import time

import numpy as np
import pytest

from qndsim.montecarlo import (
    DRAWS_PER_SHOT,
    RunResult,
    SequenceConfig,
    ShotRecord,
    read_records_csv,
    run_kappa_sweep,
    run_sequence,
    sample_shot,
    shot_stream,
    sweep_seed,
)

SEED = 61803398


def cfg(**kwargs) -> SequenceConfig:
    base = dict(mode="qnd", kappa_nominal=0.62, shots=2600, seed=SEED)
    base.update(kwargs)
    return SequenceConfig(**base)


def se_var(var, n):
    return var * math.sqrt(2.0 / (n - 1))


def se_cov(v1, v2, c, n):
    return math.sqrt((v1 * v2 + c * c) / (n - 1))


class TestConfigValidation:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            cfg(shots=1)
        with pytest.raises(ValueError):
            cfg(mode="both")
        with pytest.raises(ValueError):
            cfg(basis="x")
        with pytest.raises(ValueError):
            cfg(spin_rel_std=0.5)
        with pytest.raises(ValueError):
            cfg(eta=1.2)
        with pytest.raises(ValueError):
            cfg(seed=-1)
        with pytest.raises(ValueError):
            cfg(seed=1 << 64)


class TestSampling:
    def test_zero_coupling_is_shot_noise(self):
        res = run_sequence(cfg(kappa_nominal=0.0, shots=20000))
        n = len(res)
        for col in (res.s1, res.s2):
            assert abs(np.var(col, ddof=1) - 0.5) <= 3 * se_var(0.5, n)
        c = np.cov(res.s1, res.s2, ddof=1)[0, 1]
        assert abs(c) <= 3 * se_cov(0.5, 0.5, 0.0, n)

    def test_qnd_variance_and_covariance(self):
        res = run_sequence(cfg())
        n = len(res)
        target_var = (1 + 0.62**2) / 2
        target_cov = 0.62**2 / 2
        assert abs(np.var(res.s1, ddof=1) - target_var) <= 3 * se_var(target_var, n)
        assert abs(np.var(res.s2, ddof=1) - target_var) <= 3 * se_var(target_var, n)
        c = np.cov(res.s1, res.s2, ddof=1)[0, 1]
        assert abs(c - target_cov) <= 3 * se_cov(target_var, target_var, target_cov, n)

    def test_reinitialized_decorrelates(self):
        res = run_sequence(cfg(mode="reinit"))
        n = len(res)
        target_var = (1 + 0.62**2) / 2
        c = np.cov(res.s1, res.s2, ddof=1)[0, 1]
        assert abs(c) <= 3 * se_cov(target_var, target_var, 0.0, n)
        assert not np.array_equal(res.jz1, res.jz2)

    def test_qnd_condition_shares_jz(self):
        res = run_sequence(cfg(shots=500))
        assert np.array_equal(res.jz1, res.jz2)
        for rec in res.records[:10]:
            assert rec.jz2 == rec.jz1

    def test_z_basis_untouched(self):
        res = run_sequence(cfg(basis="z", shots=20000))
        n = len(res)
        for col in (res.s1, res.s2):
            assert abs(np.var(col, ddof=1) - 0.5) <= 5 * se_var(0.5, n)
        c = np.cov(res.s1, res.s2, ddof=1)[0, 1]
        assert abs(c) <= 5 * se_cov(0.5, 0.5, 0.0, n)

    def test_loss_channel_variance(self):
        eta = 0.907
        res = run_sequence(cfg(eta=eta, shots=20000))
        n = len(res)
        target = eta**2 * (1 + 0.62**2) / 2 + (1 - eta**2) / 2
        assert target == pytest.approx(0.6581131378, abs=1e-10)
        assert abs(np.var(res.s1, ddof=1) - target) <= 3 * se_var(target, n)

    def test_full_loss_leaves_vacuum(self):
        res = run_sequence(cfg(eta=0.0, shots=20000))
        n = len(res)
        assert abs(np.var(res.s1, ddof=1) - 0.5) <= 3 * se_var(0.5, n)
        c = np.cov(res.s1, res.s2, ddof=1)[0, 1]
        assert abs(c) <= 3 * se_cov(0.5, 0.5, 0.0, n)

    def test_atom_fluctuation_scales_kappa(self):
        spread = 2.4 / 34
        res = run_sequence(cfg(atom_fluctuation=True, spin_rel_std=spread, shots=5000))
        ratios = (res.kappa_shot / 0.62) ** 2
        assert np.all(ratios >= 0.1 - 1e-12)
        assert np.std(ratios) == pytest.approx(spread, rel=0.1)

    def test_kappa_shot_floor_under_extreme_spread(self):
        res = run_sequence(cfg(atom_fluctuation=True, spin_rel_std=0.49, shots=50000))
        assert np.min((res.kappa_shot / 0.62) ** 2) >= 0.1 - 1e-12


class TestDeterminism:
    def test_rerun_is_bitwise_identical(self):
        a = run_sequence(cfg(shots=2))
        b = run_sequence(cfg(shots=2))
        assert len(a.records) == 2
        assert a.records == b.records

    @pytest.mark.parametrize("workers", [2, 4])
    def test_worker_count_does_not_matter(self, workers):
        base = run_sequence(cfg(shots=20000))
        other = run_sequence(cfg(shots=20000), workers=workers)
        for name in ("s1", "s2", "jz1", "jz2", "kappa_shot"):
            assert np.array_equal(getattr(base, name), getattr(other, name))

    @pytest.mark.parametrize("index", [0, 1, 1233, 2599])
    def test_sample_shot_matches_run(self, index):
        config = cfg(mode="reinit", eta=0.9, atom_fluctuation=True, spin_rel_std=0.07)
        res = run_sequence(config)
        rec = sample_shot(config, shot_stream(config.seed, index))
        assert rec == res.records[index]

    def test_shot_stream_window_size(self):
        # consecutive windows tile the full stream
        u_full = shot_stream(SEED, 0).random(3 * DRAWS_PER_SHOT)
        u_2 = shot_stream(SEED, 2).random(DRAWS_PER_SHOT)
        assert np.array_equal(u_full[2 * DRAWS_PER_SHOT :], u_2)

    def test_default_point_runs_fast(self):
        start = time.perf_counter()
        run_sequence(cfg())
        assert time.perf_counter() - start < 1.0


class TestSweep:
    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            run_kappa_sweep(cfg(), [])

    def test_zero_point_is_shot_noise(self):
        (res,) = run_kappa_sweep(cfg(), [0.0])
        n = len(res)
        for col in (res.s1, res.s2):
            assert abs(np.var(col, ddof=1) - 0.5) <= 3 * se_var(0.5, n)

    def test_trend_over_grid(self):
        grid = [0.0, 0.12, 0.25, 0.37, 0.5, 0.62]
        results = run_kappa_sweep(cfg(shots=5000), grid)
        sig1 = [np.var(r.s1, ddof=1) for r in results]
        plus = [np.var(r.s1 + r.s2, ddof=1) / 2 for r in results]
        minus = [np.var(r.s1 - r.s2, ddof=1) / 2 for r in results]
        n = 5000
        # endpoints separate cleanly; the difference combination stays flat
        gap = sig1[-1] - sig1[0]
        assert gap > 3 * math.sqrt(se_var(0.69, n) ** 2 + se_var(0.5, n) ** 2)
        assert plus[-1] - plus[0] > gap
        for k, m in zip(grid, minus):
            assert abs(m - 0.5) <= 3 * se_var(0.5, n)

    def test_per_point_seeds_differ_and_reproduce(self):
        first = run_kappa_sweep(cfg(shots=100), [0.3, 0.3])
        again = run_kappa_sweep(cfg(shots=100), [0.3, 0.3])
        assert not np.array_equal(first[0].s1, first[1].s1)
        assert np.array_equal(first[0].s1, again[0].s1)
        assert first[0].config.seed == sweep_seed(SEED, 0)


class TestEstimatorConsistency:
    """Large-sample variances converge to the exact-model values."""

    @pytest.mark.parametrize("kappa", [0.0, 0.3, 0.62, 1.0])
    @pytest.mark.parametrize("mode", ["qnd", "reinit"])
    def test_convergence_at_1e5(self, kappa, mode):
        res = run_sequence(cfg(mode=mode, kappa_nominal=kappa, shots=100_000))
        n = len(res)
        individual = (1 + kappa**2) / 2
        if mode == "qnd":
            targets = {
                "s1": individual,
                "s2": individual,
                "plus": (1 + 2 * kappa**2) / 2,
                "minus": 0.5,
            }
        else:
            targets = {k: individual for k in ("s1", "s2", "plus", "minus")}
        observed = {
            "s1": np.var(res.s1, ddof=1),
            "s2": np.var(res.s2, ddof=1),
            "plus": np.var((res.s1 + res.s2) / math.sqrt(2), ddof=1),
            "minus": np.var((res.s1 - res.s2) / math.sqrt(2), ddof=1),
        }
        for name, target in targets.items():
            assert abs(observed[name] - target) <= 5 * se_var(target, n), name

    def test_mode_contrast_power(self):
        qnd = run_sequence(cfg())
        reinit = run_sequence(cfg(mode="reinit"))
        n = len(qnd)
        m_qnd = np.var((qnd.s1 - qnd.s2) / math.sqrt(2), ddof=1)
        m_re = np.var((reinit.s1 - reinit.s2) / math.sqrt(2), ddof=1)
        se = math.sqrt(se_var(m_qnd, n) ** 2 + se_var(m_re, n) ** 2)
        assert (m_re - m_qnd) / se > 5.0

    def test_atom_fluctuation_inflation_below_one_percent(self):
        spread = 2.4 / 34
        res = run_sequence(
            cfg(atom_fluctuation=True, spin_rel_std=spread, shots=1_000_000)
        )
        fixed = (1 + 0.62**2) / 2
        assert abs(np.var(res.s1, ddof=1) - fixed) / fixed < 0.01


class TestSerialization:
    def test_csv_round_trip(self, tmp_path):
        res = run_sequence(cfg(shots=50))
        path = tmp_path / "run.csv"
        res.write_csv(path)
        text = path.read_text()
        assert text.startswith("shot,s1,s2,jz1,jz2,kappa_shot\n")
        records = read_records_csv(path)
        assert len(records) == 50
        for loaded, orig in zip(records, res.records):
            assert loaded.s1 == pytest.approx(orig.s1, rel=1e-8)
            assert loaded.kappa_shot == pytest.approx(orig.kappa_shot, rel=1e-8)

    def test_csv_rejects_foreign_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            read_records_csv(path)

    def test_json_envelope_carries_config(self, tmp_path):
        import json

        res = run_sequence(cfg(shots=10, eta=0.9))
        path = tmp_path / "run.json"
        res.write_json(path)
        payload = json.loads(path.read_text())
        assert payload["config"]["eta"] == 0.9
        assert payload["config"]["seed"] == SEED
        assert len(payload["columns"]["s1"]) == 10

    def test_result_validates_columns(self):
        with pytest.raises(ValueError):
            RunResult(cfg(shots=3), np.zeros(2), np.zeros(3), np.zeros(3),
                      np.zeros(3), np.zeros(3))

    def test_records_are_plain_values(self):
        res = run_sequence(cfg(shots=5))
        rec = res.records[0]
        assert isinstance(rec, ShotRecord)
        assert isinstance(rec.s1, float)
