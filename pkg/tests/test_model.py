import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from clmmse.model import (Clustering, MjlsModel, ModeMatrices, ModelFormatError,
                          cluster_index, load_model, parse_clustering,
                          partition_label, save_model, validate)
from helpers import make_random_model


def test_validate_benchmark_ok(bench, bench_scaled, walk3):
    for m in (bench, bench_scaled, walk3):
        report = validate(m)
        assert report.ok and report.violations == ()


def test_validate_zero_h_not_positive_definite(walk3):
    bad_mode = ModeMatrices(A=[[1.0]], G=[[1.0, 0.0]], L=[[1.0]], H=[[0.0, 0.0]])
    m = MjlsModel(n=1, p_dim=1, q_dim=2, modes=(bad_mode,) + walk3.modes[1:],
                  transition=walk3.transition, initial_dist=walk3.initial_dist,
                  init_mean=walk3.init_mean, init_cov=walk3.init_cov)
    report = validate(m)
    assert not report.ok
    rules = {v.rule for v in report.violations}
    assert "hh-positive-definite" in rules
    assert any("not positive definite" in v.message for v in report.violations)
    assert [v.index for v in report.violations if v.rule == "hh-positive-definite"] == [1]


def test_validate_non_stochastic_row(walk3):
    P = np.array(walk3.transition)
    P[0] = [0.4, 0.4, 0.1]  # sums to 0.9
    m = MjlsModel(n=1, p_dim=1, q_dim=2, modes=walk3.modes, transition=P,
                  initial_dist=walk3.initial_dist, init_mean=walk3.init_mean,
                  init_cov=walk3.init_cov)
    report = validate(m)
    assert not report.ok
    assert any(v.rule == "transition-row-stochastic" and v.index == 1
               for v in report.violations)


def test_validate_gh_not_orthogonal(walk3):
    bad_mode = ModeMatrices(A=[[1.0]], G=[[1.0, 0.5]], L=[[1.0]], H=[[0.0, 1.0]])
    m = MjlsModel(n=1, p_dim=1, q_dim=2, modes=(bad_mode,) * 3,
                  transition=walk3.transition, initial_dist=walk3.initial_dist,
                  init_mean=walk3.init_mean, init_cov=walk3.init_cov)
    assert any(v.rule == "gh-orthogonal" for v in validate(m).violations)


def test_validate_is_pure(bench):
    assert validate(bench) == validate(bench)


def test_structural_dimension_mismatch_raises():
    with pytest.raises(ModelFormatError):
        MjlsModel(n=2, p_dim=1, q_dim=2,
                  modes=(ModeMatrices(A=[[1.0]], G=[[1.0, 0.0]], L=[[1.0]], H=[[0.0, 1.0]]),),
                  transition=[[1.0]], initial_dist=[1.0],
                  init_mean=[0.0, 0.0], init_cov=np.eye(2))


def test_psi_symmetrized_on_construction(walk3):
    m = MjlsModel(n=2, p_dim=1, q_dim=2,
                  modes=(ModeMatrices(A=np.eye(2), G=[[1.0, 0.0], [0.0, 0.0]],
                                      L=[[1.0, 0.0]], H=[[0.0, 1.0]]),),
                  transition=[[1.0]], initial_dist=[1.0], init_mean=[0.0, 0.0],
                  init_cov=[[1.0, 0.3], [0.1, 1.0]])
    assert np.array_equal(m.init_cov, m.init_cov.T)
    assert m.init_cov[0, 1] == pytest.approx(0.2)


class TestClustering:
    def test_cluster_index_two_blocks(self):
        cl = Clustering(((1, 2), (3,)), 3)
        assert cluster_index(cl, 2) == 1
        assert cluster_index(cl, 3) == 2

    def test_cluster_index_singletons(self):
        cl = Clustering(((1,), (2,), (3,)), 3)
        assert cluster_index(cl, 3) == 3

    def test_cluster_index_one_block(self):
        cl = Clustering(((1, 2, 3, 4),), 4)
        assert all(cluster_index(cl, i) == 1 for i in range(1, 5))

    def test_cluster_index_out_of_range(self):
        cl = Clustering(((1, 2), (3,)), 3)
        with pytest.raises(ValueError):
            cluster_index(cl, 4)

    @pytest.mark.parametrize("blocks,err", [
        (((1, 2), (2, 3)), "overlap"),
        (((1, 2),), "partition"),
        (((1, 2), ()), "empty"),
    ])
    def test_invalid_clusterings(self, blocks, err):
        with pytest.raises(ValueError, match=err):
            Clustering(blocks, 3)

    def test_partition_label_canonical(self):
        assert partition_label(Clustering(((4,), (1, 2, 3)), 4)) == "{1,2,3}|{4}"
        assert partition_label(Clustering(((1, 2, 3, 4),), 4)) == "{1,2,3,4}"
        assert partition_label(Clustering(((1,), (2,), (3,)), 3)) == "{1}|{2}|{3}"

    def test_parse_brace_grammar(self):
        cl = parse_clustering("{1,2,3}|{4}", 4)
        assert cl.clusters == ((1, 2, 3), (4,))

    def test_parse_json(self):
        cl = parse_clustering("[[1,2],[3,4]]", 4)
        assert cl.clusters == ((1, 2), (3, 4))

    @pytest.mark.parametrize("text", ["", "{1,2}", "{1,2}|{2,3}", "{1,a}|{2,3}", "[[1,2]]"])
    def test_parse_errors(self, text):
        with pytest.raises(ModelFormatError):
            parse_clustering(text, 3)

    @given(st.integers(1, 6), st.randoms(use_true_random=False))
    def test_cluster_index_is_left_inverse_of_membership(self, n, rnd):
        labels = [0] + [rnd.randint(0, 3) for _ in range(n - 1)]
        remap = {}
        for lab in labels:
            remap.setdefault(lab, len(remap))
        blocks = [[] for _ in range(len(remap))]
        for i, lab in enumerate(labels):
            blocks[remap[lab]].append(i + 1)
        cl = Clustering(tuple(tuple(b) for b in blocks), n)
        for mode in range(1, n + 1):
            assert mode in cl.clusters[cluster_index(cl, mode) - 1]


class TestSerialization:
    def test_benchmark_fixture_values(self, data_dir):
        m = load_model(data_dir / "four_mode.json")
        assert m.modes[0].A[0][1] == -0.405
        assert m.n == 2 and m.p_dim == 1 and m.q_dim == 2
        assert validate(m).ok

    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(7)
        for _ in range(5):
            m = make_random_model(rng)
            path = tmp_path / "m.json"
            save_model(m, path)
            assert load_model(path) == m

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("")
        with pytest.raises(ModelFormatError, match="empty"):
            load_model(path)

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"n": 1,\n  "oops"')
        with pytest.raises(ModelFormatError, match="line 2"):
            load_model(path)

    def test_missing_field(self, tmp_path, walk3):
        path = tmp_path / "missing.json"
        save_model(walk3, path)
        doc = json.loads(path.read_text())
        del doc["pi0"]
        path.write_text(json.dumps(doc))
        with pytest.raises(ModelFormatError, match="pi0"):
            load_model(path)

    def test_dimension_mismatch(self, tmp_path, walk3):
        path = tmp_path / "dims.json"
        save_model(walk3, path)
        doc = json.loads(path.read_text())
        doc["modes"][0]["A"] = [[1.0, 0.0], [0.0, 1.0]]
        path.write_text(json.dumps(doc))
        with pytest.raises(ModelFormatError, match="A"):
            load_model(path)
