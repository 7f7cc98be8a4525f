import math

import numpy as np
import pytest

from stamon.snapshot import (
    GraphSnapshot,
    SnapshotConfig,
    association_matrix,
    build_snapshot,
    load_snapshot_batch,
    node_features,
    normalize_adjacency,
    save_snapshot_batch,
    threshold_adjacency,
)
from stamon.timeseries import WindowSegment


def two_pass_pearson(x):
    """Direct per-pair implementation used as the independent oracle."""
    n, v = x.shape
    means = [sum(x[t, i] for t in range(n)) / n for i in range(v)]
    r = [[0.0] * v for _ in range(v)]
    for i in range(v):
        for j in range(v):
            cov = sxx = syy = 0.0
            for t in range(n):
                di = x[t, i] - means[i]
                dj = x[t, j] - means[j]
                cov += di * dj
                sxx += di * di
                syy += dj * dj
            if sxx == 0.0 or syy == 0.0:
                r[i][j] = 1.0 if i == j else 0.0
            else:
                r[i][j] = (cov / (n - 1)) / math.sqrt(sxx / (n - 1)) / math.sqrt(syy / (n - 1))
    return np.array(r)


def lag1_autocorr_oracle(column):
    n = len(column)
    mean = sum(column) / n
    num = sum((column[t] - mean) * (column[t + 1] - mean) for t in range(n - 1))
    den = sum((column[t] - mean) ** 2 for t in range(n))
    return num / den if den else 0.0


def make_window(samples, label=0, start=0):
    return WindowSegment(samples=np.asarray(samples, dtype=float), label=label, start_index=start)


def random_window(rng, num_vars=None, length=None):
    v = num_vars or int(rng.integers(2, 11))
    n = length or int(rng.integers(3, 51))
    return make_window(rng.standard_normal((n, v)))


class TestNodeFeatures:
    def test_alternating_column(self):
        column = [0.0, 1.0] * 10
        window = make_window(np.array(column).reshape(-1, 1))
        feats = node_features(window)
        assert feats[0, 0] == pytest.approx(0.5)
        # oracle agreement plus the coarse analytic bound
        assert feats[0, 2] == pytest.approx(lag1_autocorr_oracle(column), abs=1e-12)
        assert abs(feats[0, 2] - (-1.0)) < 0.2

    def test_constant_column_degenerate_rule(self):
        window = make_window(np.full((20, 1), 7.0))
        assert node_features(window)[0].tolist() == [7.0, 0.0, 0.0]

    def test_white_noise_long_window(self):
        rng = np.random.default_rng(42)
        window = make_window(rng.standard_normal((1000, 3)))
        feats = node_features(window)
        assert np.abs(feats[:, 0]).max() < 0.1
        assert np.abs(feats[:, 1] - 1.0).max() < 0.1

    def test_std_uses_small_sample_divisor(self):
        window = make_window(np.array([[1.0], [3.0]]))
        # divisor L-1: sqrt(((1-2)^2 + (3-2)^2) / 1) = sqrt(2)
        assert node_features(window)[0, 1] == pytest.approx(math.sqrt(2.0))

    def test_locality_per_column(self):
        rng = np.random.default_rng(1)
        base = rng.standard_normal((30, 4))
        changed = base.copy()
        changed[:, 2] = rng.standard_normal(30)
        f0 = node_features(make_window(base))
        f1 = node_features(make_window(changed))
        untouched = [0, 1, 3]
        assert np.array_equal(f0[untouched], f1[untouched])

    def test_short_window_rejected(self):
        with pytest.raises(ValueError, match="2 samples"):
            node_features(make_window(np.zeros((1, 3))))


class TestAssociationMatrix:
    def test_exact_affine_coupling(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(20)
        window = make_window(np.column_stack([x, 2.0 * x + 3.0]))
        r = association_matrix(window)
        assert r[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_negation(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(20)
        r = association_matrix(make_window(np.column_stack([x, -x])))
        assert r[0, 1] == pytest.approx(-1.0, abs=1e-12)

    def test_four_point_hand_value(self):
        window = make_window(np.array([[1.0, 1.0], [2.0, 3.0], [3.0, 2.0], [4.0, 4.0]]))
        r = association_matrix(window)
        assert r[0, 1] == pytest.approx(0.8, abs=1e-12)
        assert r[0, 1] == pytest.approx(two_pass_pearson(window.samples)[0, 1], abs=1e-12)

    def test_zero_variance_pairs(self):
        rng = np.random.default_rng(4)
        x = np.column_stack([np.full(15, 3.3), rng.standard_normal(15)])
        r = association_matrix(make_window(x))
        assert r[0, 1] == 0.0
        assert r[1, 0] == 0.0
        assert r[0, 0] == 1.0
        assert r[1, 1] == 1.0

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            window = random_window(rng)
            got = association_matrix(window)
            want = two_pass_pearson(window.samples)
            assert np.abs(got - want).max() < 1e-12

    def test_symmetry_and_bounds(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            r = association_matrix(random_window(rng))
            assert np.abs(r - r.T).max() == 0.0
            assert np.abs(r).max() <= 1.0 + 1e-12
            assert np.array_equal(np.diag(r), np.ones(r.shape[0]))

    def test_spearman_registered(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal(30)
        window = make_window(np.column_stack([x, np.exp(x)]))  # monotone, nonlinear
        r = association_matrix(window, measure="spearman")
        assert r[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_unknown_measure(self):
        with pytest.raises(ValueError, match="unknown association measure"):
            association_matrix(make_window(np.zeros((5, 2))), measure="tau")


class TestThresholdAdjacency:
    def test_edge_above_threshold(self):
        r = np.array([[1.0, 0.7], [0.7, 1.0]])
        assert threshold_adjacency(r, 0.6)[0, 1] == 1.0

    def test_negative_association_counts(self):
        r = np.array([[1.0, -0.65], [-0.65, 1.0]])
        assert threshold_adjacency(r, 0.6)[0, 1] == 1.0

    def test_all_below_gives_identity(self):
        r = np.full((3, 3), 0.5)
        np.fill_diagonal(r, 1.0)
        assert np.array_equal(threshold_adjacency(r, 0.6), np.eye(3))

    @pytest.mark.parametrize("bad", [0.0, -0.5, 1.01])
    def test_threshold_range(self, bad):
        with pytest.raises(ValueError, match="threshold"):
            threshold_adjacency(np.eye(2), bad)

    def test_weighted_mode_keeps_magnitudes(self):
        r = np.array([[1.0, -0.8, 0.3], [-0.8, 1.0, 0.61], [0.3, 0.61, 1.0]])
        a = threshold_adjacency(r, 0.6, weighted=True)
        assert a[0, 1] == pytest.approx(0.8)
        assert a[0, 2] == 0.0
        assert a[1, 2] == pytest.approx(0.61)
        assert np.array_equal(np.diag(a), np.ones(3))

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            r = association_matrix(random_window(rng))
            previous = None
            for t in (0.9, 0.7, 0.5, 0.3, 0.1):
                edges = threshold_adjacency(r, t)
                if previous is not None:
                    # lowering the threshold never removes an edge
                    assert np.all(edges >= previous)
                previous = edges


class TestNormalizeAdjacency:
    def test_two_node_clique(self):
        a = np.ones((2, 2))
        assert np.allclose(normalize_adjacency(a), np.full((2, 2), 0.5))

    def test_identity_fixed_point(self):
        assert np.array_equal(normalize_adjacency(np.eye(5)), np.eye(5))

    def test_spectral_bound_random_graphs(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            v = 8
            a = (rng.random((v, v)) < 0.4).astype(float)
            a = np.maximum(a, a.T)
            np.fill_diagonal(a, 1.0)
            normalized = normalize_adjacency(a)
            eigenvalues = np.linalg.eigvalsh(normalized)
            assert np.abs(eigenvalues).max() <= 1.0 + 1e-9

    def test_requires_self_loops(self):
        a = np.zeros((2, 2))
        with pytest.raises(ValueError, match="diagonal"):
            normalize_adjacency(a)


class TestBuildSnapshot:
    def test_random_window_invariants(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            window = random_window(rng)
            snap = build_snapshot(window, SnapshotConfig(threshold=float(rng.uniform(0.1, 1.0))))
            a = snap.adjacency_norm
            assert np.abs(a - a.T).max() < 1e-12
            assert a.min() >= 0.0
            assert np.diag(a).min() > 0.0
            assert np.abs(np.linalg.eigvalsh(a)).max() <= 1.0 + 1e-9
            assert np.isfinite(snap.features).all()

    def test_all_constant_window(self):
        window = make_window(np.tile([1.0, 2.0, 3.0], (20, 1)))
        snap = build_snapshot(window)
        assert np.array_equal(snap.adjacency_norm, np.eye(3))
        assert snap.features[:, 0].tolist() == [1.0, 2.0, 3.0]

    def test_scale_invariance_of_edges(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            window = random_window(rng)
            scaled = window.samples.copy()
            column = int(rng.integers(0, scaled.shape[1]))
            scaled[:, column] *= float(rng.uniform(0.5, 100.0))
            r0 = association_matrix(window)
            r1 = association_matrix(make_window(scaled))
            assert np.abs(r0 - r1).max() < 1e-9
            a0 = build_snapshot(window).adjacency_norm
            a1 = build_snapshot(make_window(scaled)).adjacency_norm
            assert np.array_equal(a0, a1)

    def test_coupled_pair_detected(self):
        # one exactly coupled pair among independent noise; the coupled edge
        # should be the only one in nearly every seeded trial
        rng = np.random.default_rng(12)
        hits = 0
        trials = 300
        for _ in range(trials):
            x = rng.standard_normal((50, 6))
            x[:, 1] = 2.0 * x[:, 0] + 3.0
            snap = build_snapshot(make_window(x), SnapshotConfig(threshold=0.6))
            off_diagonal = snap.adjacency_norm.copy()
            np.fill_diagonal(off_diagonal, 0.0)
            i, j = np.nonzero(np.triu(off_diagonal))
            if len(i) == 1 and (i[0], j[0]) == (0, 1):
                hits += 1
        assert hits / trials >= 0.99

    def test_label_and_start_copied(self):
        window = make_window(np.random.default_rng(13).standard_normal((10, 3)), label=2, start=40)
        snap = build_snapshot(window)
        assert snap.label == 2
        assert snap.start_index == 40


class TestSnapshotBatchIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(14)
        snaps = [build_snapshot(random_window(rng, num_vars=5, length=20), SnapshotConfig())
                 for _ in range(7)]
        path = tmp_path / "batch.snapshots"
        save_snapshot_batch(path, snaps, meta={"class_names": ["a", "b"]})
        loaded, meta = load_snapshot_batch(path)
        assert meta["count"] == 7
        assert meta["class_names"] == ["a", "b"]
        for original, back in zip(snaps, loaded):
            assert np.array_equal(original.features, back.features)
            assert np.array_equal(original.adjacency_norm, back.adjacency_norm)
            assert original.label == back.label
            assert original.start_index == back.start_index

    def test_write_is_deterministic(self, tmp_path):
        rng = np.random.default_rng(15)
        snaps = [build_snapshot(random_window(rng, num_vars=4, length=12)) for _ in range(3)]
        save_snapshot_batch(tmp_path / "one", snaps, meta={"seed": 0})
        save_snapshot_batch(tmp_path / "two", snaps, meta={"seed": 0})
        assert (tmp_path / "one").read_bytes() == (tmp_path / "two").read_bytes()

    def test_empty_batch_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="empty"):
            save_snapshot_batch(tmp_path / "x", [])

    def test_version_field_is_mandatory(self, tmp_path):
        rng = np.random.default_rng(16)
        path = tmp_path / "batch.snapshots"
        save_snapshot_batch(path, [build_snapshot(random_window(rng))])
        raw = path.read_bytes()
        header_end = raw.index(b"\n")
        header = raw[:header_end].replace(b'"version"', b'"ver_sion"')
        (tmp_path / "mangled").write_bytes(header + raw[header_end:])
        with pytest.raises(ValueError, match="version"):
            load_snapshot_batch(tmp_path / "mangled")

    def test_mixed_shapes_rejected(self, tmp_path):
        rng = np.random.default_rng(17)
        snaps = [build_snapshot(random_window(rng, num_vars=3, length=10)),
                 build_snapshot(random_window(rng, num_vars=4, length=10))]
        with pytest.raises(ValueError, match="shapes"):
            save_snapshot_batch(tmp_path / "x", snaps)
