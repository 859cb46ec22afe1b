import numpy as np
import pytest

from mqforest.bench import (ConfigError, ExperimentConfig, Table, derive_seed, load_dataset, make_workload,
                            ordered_map, parse_dataset_spec, run_clt_experiment, run_covariance_experiment,
                            run_delta_knn_experiment, run_hash_failure_experiment, run_kappa_experiment,
                            run_recall_experiment)
from mqforest.core import DataMatrix

SMALL = "clustered:n=3000,d=16,clusters=5"


def _cfg(**kw):
    base = dict(dataset=SMALL, num_queries=20, k=10, trees=(2, 4), n_s=100, v=2, seed=1)
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(k=0), dict(num_queries=-1), dict(trees=()), dict(trees=(0,)),
                                    dict(mode="fast"), dict(b_tol=0), dict(seed=-1)])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            _cfg(**kw)

    def test_k_bounded_by_remaining_points(self):
        cfg = _cfg(dataset="uniform:n=50,d=4", num_queries=45, k=10)
        with pytest.raises(ConfigError):
            make_workload(cfg)

    def test_dataset_specs(self, tmp_path):
        assert parse_dataset_spec("uniform")["d"] == 200
        spec = parse_dataset_spec("clustered:n=10,spread=0.5,intrinsic_dim=none")
        assert spec["n"] == 10 and spec["spread"] == 0.5 and spec["intrinsic_dim"] is None
        for bad in ("nope", "uniform:x=1", "uniform:n", "uniform:n=abc"):
            with pytest.raises(ConfigError):
                parse_dataset_spec(bad)
        from mqforest.data import save_vectors
        data = load_dataset("uniform:n=30,d=4", 0)
        save_vectors(data, tmp_path / "d.fvecs")
        assert len(load_dataset(str(tmp_path / "d.fvecs"), 0)) == 30

    def test_derived_seeds_differ(self):
        assert derive_seed(0, 1) != derive_seed(0, 2) != derive_seed(1, 1)
        assert derive_seed(5, 3) == derive_seed(5, 3)


class TestTable:
    def test_csv_format(self, tmp_path):
        t = Table(("a", "b"), [(1, 0.1), (np.int64(2), np.float64(1 / 3))])
        text = t.csv_text()
        assert text == "a,b\n1,0.1\n2,0.3333333333333333\n"
        path = t.write(tmp_path / "sub" / "t.csv")
        assert path.read_bytes() == text.encode()
        assert t.column("b")[0] == 0.1

    def test_ordered_map_respects_threads(self, monkeypatch):
        monkeypatch.setenv("MQF_THREADS", "4")
        assert ordered_map(lambda x: x * x, range(50)) == [x * x for x in range(50)]
        monkeypatch.setenv("MQF_THREADS", "0")
        with pytest.raises(ConfigError):
            ordered_map(lambda x: x, [1, 2])


class TestExperiments:
    def test_recall_single_tree_modes_identical(self):
        t = run_recall_experiment(_cfg(trees=(1,), v=1))
        assert t.header == ("tree_count", "mode", "mean_recall", "mean_distance_computations")
        (_, _, r1, d1), (_, _, r2, d2) = t.rows
        assert (r1, d1) == (r2, d2)

    def test_recall_rejects_v_above_t(self):
        with pytest.raises(ConfigError):
            run_recall_experiment(_cfg(trees=(2,), v=3))

    def test_recall_thread_count_does_not_change_output(self, monkeypatch):
        monkeypatch.setenv("MQF_THREADS", "1")
        a = run_recall_experiment(_cfg()).csv_text()
        monkeypatch.setenv("MQF_THREADS", "3")
        assert run_recall_experiment(_cfg()).csv_text() == a

    def test_hash_failure_degenerate_duplicates(self):
        pts = np.eye(6)[:3]
        data = DataMatrix(np.repeat(pts, 200, axis=0))
        cfg = _cfg(num_queries=5, k=100, num_functions=50)
        res = run_hash_failure_experiment(cfg, make_workload(cfg, data))
        assert np.all(res.recall_q == 1.0) and np.all(res.recall_c == 1.0)
        assert res.failures("q") == 0
        assert len(res.table().rows) == 2 * 5 * 50

    def test_kappa_exact_set_gives_zero(self):
        t = run_kappa_experiment(_cfg(m_list=(10, 40)))
        assert t.rows[0] == (10, 0.0)
        assert t.rows[1][1] > 0
        with pytest.raises(ConfigError):
            run_kappa_experiment(_cfg(m_list=(5,)))

    @pytest.mark.slow
    def test_kappa_grows_with_m_below_one(self):
        # desk-scale example on the coarse clustered preset, default 250 queries
        cfg = ExperimentConfig(dataset="clustered-coarse", num_queries=250, k=100, seed=0)
        t = run_kappa_experiment(cfg)
        vals = t.column("mean_kappa")
        assert t.column("m") == [100, 200, 500, 1000, 2000, 5000]
        assert vals[0] == 0.0
        assert all(a <= b for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1.0

    def test_delta_knn_first_tree_fills(self):
        from mqforest.bench import _FOREST
        from mqforest.forest import build_forest
        cfg = _cfg(trees=(5,), mode="rp")
        wl = make_workload(cfg)
        t = run_delta_knn_experiment(cfg, wl)
        assert [r[0] for r in t.rows] == [1, 2, 3, 4, 5]
        first = build_forest(wl.base, 1, cfg.n_s, seed=derive_seed(cfg.seed, _FOREST)).trees[0]
        expect = np.mean([min(cfg.k, first.route(q).size) for q in wl.queries])
        assert t.rows[0][2] == pytest.approx(expect)

    def test_covariance_and_clt_write_files(self, tmp_path):
        cfg = _cfg(num_planes=200, r=30, out_dir=str(tmp_path))
        cov = run_covariance_experiment(cfg)
        assert set(cov.mean_offdiag) == {"q", "c"}
        assert cov.counts["q"].sum() == 20 * 45
        rep = run_clt_experiment(cfg)
        assert rep.c_minus_mu.shape == (20,)
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == ["clt_samples.csv", "clt_summary.csv", "covariance_hist.csv", "covariance_summary.csv"]
        assert (tmp_path / "clt_summary.csv").read_text().startswith("queries,coordinate,ks_statistic")
