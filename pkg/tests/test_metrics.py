"""NMI / ACC / pairwise-F1 against independent brute-force references."""

import numpy as np
import pytest

from oracles import brute_acc, brute_f1, brute_nmi
from umclust.errors import ShapeError
from umclust.metrics import acc, export_embeddings, nmi, pairwise_f1, score_scope


def test_nmi_basic():
    assert nmi([0, 1, 2], [0, 1, 2]) == 1.0
    assert nmi([2, 0, 1], [0, 1, 2]) == 1.0  # relabeling
    assert nmi([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(0.0, abs=1e-12)


def test_nmi_single_cluster_edges():
    assert nmi([0, 0, 0], [0, 0, 0]) == 1.0          # identical trivial partitions
    assert nmi([0, 0, 0], [0, 1, 2]) == pytest.approx(0.0, abs=1e-12)
    assert nmi([1, 1, 1], [5, 5, 5]) == 1.0           # same single-cluster partition


def test_acc_basic():
    assert acc([0, 1, 1], [0, 1, 1]) == 1.0
    assert acc([1, 0, 0], [0, 1, 1]) == 1.0
    assert acc([0, 0, 0, 1], [0, 0, 1, 1]) == pytest.approx(0.75)


def test_acc_rectangular_contingency():
    # more predicted clusters than classes and vice versa
    assert acc([0, 1, 2, 3], [0, 0, 1, 1]) == pytest.approx(0.5)
    assert acc([0, 0, 0, 0], [0, 0, 1, 1]) == pytest.approx(0.5)


def test_f1_basic():
    assert pairwise_f1([0, 0, 1], [1, 1, 0]) == 1.0
    assert pairwise_f1([0, 1, 2, 3], [0, 0, 1, 1]) == 0.0  # no predicted pairs
    assert pairwise_f1([0, 0, 1, 1], [0, 0, 0, 1]) == pytest.approx(0.4)


def test_length_mismatch_rejected():
    for fn in (nmi, acc, pairwise_f1):
        with pytest.raises(ShapeError):
            fn([0, 1], [0, 1, 1])


def test_metrics_match_oracles_on_random_labelings():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(2, 30))
        pred = rng.integers(0, int(rng.integers(1, 6)) + 1, size=n)
        truth = rng.integers(0, int(rng.integers(1, 6)) + 1, size=n)
        assert nmi(pred, truth) == pytest.approx(brute_nmi(pred, truth), abs=1e-10)
        assert acc(pred, truth) == pytest.approx(brute_acc(pred, truth), abs=1e-12)
        assert pairwise_f1(pred, truth) == pytest.approx(brute_f1(pred, truth), abs=1e-12)


def test_relabeling_invariance():
    rng = np.random.default_rng(1)
    for _ in range(20):
        n = int(rng.integers(4, 25))
        k = int(rng.integers(2, 5))
        pred = rng.integers(0, k, size=n)
        truth = rng.integers(0, 3, size=n)
        perm = rng.permutation(k)
        relabeled = perm[pred]
        assert nmi(pred, truth) == pytest.approx(nmi(relabeled, truth), abs=1e-12)
        assert acc(pred, truth) == pytest.approx(acc(relabeled, truth), abs=1e-12)
        assert pairwise_f1(pred, truth) == pytest.approx(pairwise_f1(relabeled, truth), abs=1e-12)


def test_acc_lower_bound():
    rng = np.random.default_rng(2)
    for _ in range(20):
        n = int(rng.integers(2, 30))
        pred = rng.integers(0, 4, size=n)
        truth = rng.integers(0, 4, size=n)
        k = max(int(pred.max()) + 1, int(truth.max()) + 1)
        assert acc(pred, truth) >= 1.0 / k - 1e-12


def test_score_scope_percent_rounding():
    s = score_scope("all-view", [0, 0, 1, 1], [0, 0, 1, 1])
    p = s.as_percent()
    assert p == {"scope": "all-view", "nmi": 100.0, "acc": 100.0, "f1": 100.0, "n_samples": 4}


def test_export_embeddings_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    n, d = 7, 4
    latents = rng.normal(size=(n, d))
    path = tmp_path / "emb.csv"
    export_embeddings(
        path,
        ids=np.arange(10, 10 + n),
        view_of_row=np.array([0, 0, 0, 1, 1, 2, 2]),
        true_labels=rng.integers(0, 3, n),
        pred_labels=rng.integers(0, 3, n),
        latents=latents,
    )
    rows = path.read_text().strip().split("\n")
    assert len(rows) == n
    parsed = np.array([[float(x) for x in row.split(",")] for row in rows])
    assert parsed.shape == (n, 4 + d)
    assert np.array_equal(parsed[:, 4:], latents)  # full-precision round trip
    assert np.array_equal(parsed[:, 0].astype(int), np.arange(10, 10 + n))
