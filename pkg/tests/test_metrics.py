import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from exagree.attribution import AttributionVector, Ranking, rank_of
from exagree.data import generate_synthetic, split
from exagree.metrics import (
    METRIC_FIELDS,
    agreement_suite,
    best_count,
    fairness_suite,
    format_report_table,
    full_report,
    pairwise_rank_agreement,
    prediction_gap,
    rank_correlation,
    topk_count,
)
from exagree.models import LinearModel


# --- brute-force oracles ----------------------------------------------------

def oracle_suite(exp: np.ndarray, gt: np.ndarray, k: float) -> dict:
    p = len(exp)
    K = topk_count(p, k)
    r_exp = rank_of(exp).ranks
    r_gt = rank_of(gt).ranks
    top_exp = {i for i in range(p) if r_exp[i] <= K}
    top_gt = {i for i in range(p) if r_gt[i] <= K}
    both = top_exp & top_gt
    fa = len(both) / K
    ra = sum(1 for i in both if r_exp[i] == r_gt[i]) / K
    sa = sum(1 for i in both
             if np.sign(exp[i]) == np.sign(gt[i])) / K
    sra = sum(1 for i in both
              if r_exp[i] == r_gt[i] and np.sign(exp[i]) == np.sign(gt[i])) / K
    return {"fa": fa, "ra": ra, "sa": sa, "sra": sra}


def oracle_pra(r1: np.ndarray, r2: np.ndarray) -> float:
    pairs = list(itertools.combinations(range(len(r1)), 2))
    agree = sum(1 for i, j in pairs
                if np.sign(r1[i] - r1[j]) == np.sign(r2[i] - r2[j]))
    return agree / len(pairs)


def test_topk_count_examples():
    assert topk_count(20, 0.25) == 5
    assert topk_count(13, 0.25) == 3
    assert topk_count(2, 0.25) == 1
    assert topk_count(5, 1.0) == 5
    with pytest.raises(ValueError):
        topk_count(5, 0.0)
    with pytest.raises(ValueError):
        topk_count(5, 1.5)


def test_agreement_identity():
    a = AttributionVector(values=np.array([3.0, -2.0, 1.0, -0.5]))
    suite = agreement_suite(a, a, 0.5)
    assert suite == {"fa": 1.0, "ra": 1.0, "sa": 1.0, "sra": 1.0}


def test_agreement_hand_example():
    # p=4, k=0.5: gt order (f1,f2,f3,f4) signs (+,-,+,-);
    # exp order (f2,f1,f3,f4) signs (+,+,+,+).
    gt = AttributionVector(values=np.array([4.0, -3.0, 2.0, -1.0]))
    exp = AttributionVector(values=np.array([3.0, 4.0, 2.0, 1.0]))
    suite = agreement_suite(exp, gt, 0.5)
    assert suite == {"fa": 1.0, "ra": 0.0, "sa": 0.5, "sra": 0.0}


def test_agreement_disjoint_topk():
    gt = AttributionVector(values=np.array([4.0, 3.0, 0.1, 0.2]))
    exp = AttributionVector(values=np.array([0.1, 0.2, 4.0, 3.0]))
    suite = agreement_suite(exp, gt, 0.5)
    assert suite == {"fa": 0.0, "ra": 0.0, "sa": 0.0, "sra": 0.0}


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 100_000), p=st.integers(2, 10),
       k=st.sampled_from([0.1, 0.25, 0.5, 0.75, 1.0]))
def test_agreement_matches_oracle(seed, p, k):
    rng = np.random.default_rng(seed)
    exp = rng.standard_normal(p)
    gt = rng.standard_normal(p)
    ours = agreement_suite(AttributionVector(values=exp),
                           AttributionVector(values=gt), k)
    oracle = oracle_suite(exp, gt, k)
    assert ours == oracle
    assert ours["sra"] <= min(ours["ra"], ours["sa"]) <= ours["fa"]


def test_pra_hand_case():
    r1 = Ranking(ranks=np.array([1, 2, 3]))
    r2 = Ranking(ranks=np.array([1, 3, 2]))
    assert pairwise_rank_agreement(r1, r2) == pytest.approx(2 / 3)
    assert pairwise_rank_agreement(r1, r1) == 1.0
    rev = Ranking(ranks=np.array([3, 2, 1]))
    assert pairwise_rank_agreement(r1, rev) == 0.0


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 100_000), p=st.integers(2, 10))
def test_pra_matches_bruteforce(seed, p):
    rng = np.random.default_rng(seed)
    r1 = rng.permutation(p) + 1
    r2 = rng.permutation(p) + 1
    ours = pairwise_rank_agreement(Ranking(ranks=r1), Ranking(ranks=r2))
    assert ours == pytest.approx(oracle_pra(r1, r2))


def test_rank_correlation_is_spearman():
    rng = np.random.default_rng(0)
    for _ in range(20):
        r1 = rng.permutation(7) + 1
        r2 = rng.permutation(7) + 1
        ours = rank_correlation(Ranking(ranks=r1), Ranking(ranks=r2))
        assert ours == pytest.approx(stats.spearmanr(r1, r2).statistic)


def test_scale_invariance():
    rng = np.random.default_rng(1)
    exp = rng.standard_normal(8)
    gt = rng.standard_normal(8)
    a = agreement_suite(AttributionVector(values=exp),
                        AttributionVector(values=gt), 0.25)
    b = agreement_suite(AttributionVector(values=37.5 * exp),
                        AttributionVector(values=gt), 0.25)
    assert a == b


@pytest.fixture(scope="module")
def linear_fixture():
    ds = generate_synthetic(1500, 2, np.array([3.0, 0.5]), 0.0, 5)
    sp = split(ds, 0.3, seed=1)
    model = LinearModel(weights=np.array([3.0, 0.0]), bias=0.0)
    return ds, sp, model


def test_prediction_gap_linear(linear_fixture):
    ds, sp, model = linear_fixture
    ranking = Ranking(ranks=np.array([1, 2]))
    pgi = prediction_gap(model, ds, sp, ranking, 0.5, "important", seed=0)
    pgu = prediction_gap(model, ds, sp, ranking, 0.5, "unimportant", seed=0)
    assert pgi > 0
    assert pgu == pytest.approx(0.0, abs=1e-12)  # w2 = 0: no effect at all


def test_prediction_gap_faithful_beats_inverted(linear_fixture):
    ds, sp, model = linear_fixture
    faithful = Ranking(ranks=np.array([1, 2]))
    inverted = Ranking(ranks=np.array([2, 1]))
    pgi_f = prediction_gap(model, ds, sp, faithful, 0.5, "important", seed=0)
    pgi_i = prediction_gap(model, ds, sp, inverted, 0.5, "important", seed=0)
    assert pgi_f >= pgi_i


def test_prediction_gap_deterministic(linear_fixture):
    ds, sp, model = linear_fixture
    ranking = Ranking(ranks=np.array([1, 2]))
    a = prediction_gap(model, ds, sp, ranking, 0.5, "important", seed=9)
    b = prediction_gap(model, ds, sp, ranking, 0.5, "important", seed=9)
    assert a == b


def test_best_count_rules(linear_fixture):
    ds, sp, model = linear_fixture
    gt = AttributionVector(values=np.array([3.0, 0.5]))
    good = full_report(model, ds, sp, gt, gt, 0.5, seed=0)
    bad = full_report(model, ds, sp,
                      AttributionVector(values=np.array([0.1, 3.0])),
                      gt, 0.5, seed=0)
    counts = best_count([good, bad])
    assert counts[0] >= 7  # dominates on everything except possibly a PG tie
    assert counts[0] + counts[1] >= 8
    twice = best_count([good, good])
    assert twice == [8, 8]  # ties count for both rows
    with pytest.raises(ValueError):
        best_count([good])


def test_format_report_table(linear_fixture):
    ds, sp, model = linear_fixture
    gt = AttributionVector(values=np.array([3.0, 0.5]), method="gt")
    rep = full_report(model, ds, sp, gt, gt, 0.5, seed=0)
    table = format_report_table([rep, rep], [8, 8])
    assert "Method" in table and "#Best" in table and "FA" in table


def _subgroup_dataset(identical: bool, seed: int = 0):
    rng = np.random.default_rng(seed)
    n = 600
    X = rng.standard_normal((n, 3))
    sub = (np.arange(n) % 2).astype(float)
    if identical:
        # Mirror rows so the two subgroups contain exactly the same data.
        X[1::2] = X[0::2]
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    logits = 2.5 * X[:, 0] + 1.0 * X[:, 1]
    if not identical:
        logits = logits + 3.0 * sub * X[:, 2]  # subgroup-dependent rule
    y = (rng.uniform(size=n) < 1 / (1 + np.exp(-logits))).astype(np.int64)
    from exagree.data import Dataset, FeatureMeta
    features = np.column_stack([X, sub])
    meta = [FeatureMeta(name=f"f{j}", kind="continuous") for j in range(3)]
    meta.append(FeatureMeta(name="group", kind="discrete"))
    return Dataset(name="sub", features=features, labels=y,
                   feature_meta=meta, subgroup_column=3)


def _by_group(a: AttributionVector) -> dict:
    return {"majority": a, "minority": a}


def test_fairness_nonzero_disparity():
    ds = _subgroup_dataset(identical=False)
    sp = split(ds, 0.3, seed=1)
    model = LinearModel(weights=np.array([2.5, 1.0, 1.5, 0.0]), bias=0.0)
    gt = AttributionVector(values=np.array([2.5, 1.0, 1.5, 1e-6]))
    report = fairness_suite(model, ds, sp, _by_group(gt), _by_group(gt),
                            0.5, seed=0)
    assert any(v > 0 for v in report.disparities.values())
    for m in ("fa", "ra", "sa", "sra", "pra"):
        assert 0.0 <= report.disparities[m] <= 1.0


def test_fairness_identical_subgroups_zero_disparity():
    ds = _subgroup_dataset(identical=True)
    # Validation rows chosen as even/odd twins so both subgroups contain
    # exactly the same feature rows in the same order.
    from exagree.data import TaskSplit
    valid = np.arange(0, 200)
    train = np.arange(200, ds.n)
    sp = TaskSplit(train_idx=train, valid_idx=valid, seed=0)
    model = LinearModel(weights=np.array([2.5, 1.0, 0.5, 0.0]), bias=0.0)
    gt = AttributionVector(values=np.array([2.5, 1.0, 0.5, 1e-6]))
    report = fairness_suite(model, ds, sp, _by_group(gt), _by_group(gt),
                            0.5, seed=0)
    for m in METRIC_FIELDS:
        assert report.disparities[m] == 0.0


def test_fairness_small_subgroup_error():
    ds = _subgroup_dataset(identical=False)
    sp = split(ds, 0.3, seed=1)
    idx = sp.valid_idx
    group = ds.features[idx, 3]
    keep = np.concatenate([idx[group == 0], idx[group == 1][:3]])
    from exagree.data import TaskSplit
    rest = np.setdiff1d(np.arange(ds.n), np.sort(keep))
    small = TaskSplit(train_idx=rest, valid_idx=np.sort(keep), seed=1)
    model = LinearModel(weights=np.array([2.5, 1.0, 0.5, 0.0]), bias=0.0)
    gt = AttributionVector(values=np.array([2.5, 1.0, 0.5, 1e-6]))
    with pytest.raises(ValueError, match="subgroup too small"):
        fairness_suite(model, ds, small, _by_group(gt), _by_group(gt),
                       0.5, seed=0)
