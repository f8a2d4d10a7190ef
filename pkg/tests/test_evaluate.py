import numpy as np
import pytest

from sarbench.core import MetricUndefinedError, ValidationError, make_rng
from sarbench.evaluate import (
    MetricsReport,
    ScoredSet,
    aggregate_runs,
    classification_metrics,
    f1_opt_threshold,
    pixel_metrics,
    pr_auc,
    roc_auc,
)
from sarbench.models import AnomalyMap


def pairwise_auc_oracle(scores, labels) -> float:
    """O(P*N) definition: fraction of (anomalous, normal) pairs won, ties
    counting one half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for a in pos:
        for b in neg:
            if a > b:
                wins += 1.0
            elif a == b:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def ap_sweep_oracle(scores, labels) -> float:
    """Direct threshold sweep: recompute precision/recall from scratch at
    every distinct score, descending."""
    scores = np.asarray(scores)
    labels = np.asarray(labels)
    p_total = labels.sum()
    ap = 0.0
    prev_recall = 0.0
    for t in sorted(set(scores.tolist()), reverse=True):
        pred = scores >= t
        tp = int((pred & (labels == 1)).sum())
        precision = tp / int(pred.sum())
        recall = tp / p_total
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap


def random_scored_set(rng, n_max=200, with_ties=True) -> ScoredSet:
    n = int(rng.integers(2, n_max + 1))
    labels = rng.integers(0, 2, size=n)
    if labels.sum() == 0:
        labels[0] = 1
    if labels.sum() == n:
        labels[0] = 0
    scores = rng.random(n)
    if with_ties and n > 4:
        scores = np.round(scores, 2)  # force tie groups
    return ScoredSet(scores, labels)


class TestRocAuc:
    def test_four_sample_example(self):
        s = ScoredSet([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
        assert roc_auc(s) == pytest.approx(0.75)

    def test_perfect_separation(self):
        s = ScoredSet([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])
        assert roc_auc(s) == 1.0

    def test_all_ties_give_half(self):
        s = ScoredSet([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1])
        assert roc_auc(s) == 0.5

    def test_single_class_undefined(self):
        with pytest.raises(MetricUndefinedError, match="both classes"):
            roc_auc(ScoredSet([0.1, 0.2], [1, 1]))

    def test_matches_pairwise_oracle_exactly(self):
        rng = make_rng(31)
        for _ in range(100):
            s = random_scored_set(rng)
            assert roc_auc(s) == pairwise_auc_oracle(s.scores, s.labels)

    def test_monotone_transform_invariance(self):
        rng = make_rng(32)
        for _ in range(20):
            s = random_scored_set(rng)
            base = roc_auc(s)
            assert roc_auc(ScoredSet(np.exp(s.scores), s.labels)) == base
            assert roc_auc(ScoredSet(3.0 * s.scores + 1.0, s.labels)) == base

    def test_complement_identity_without_ties(self):
        rng = make_rng(33)
        for _ in range(20):
            s = random_scored_set(rng, with_ties=False)
            assert roc_auc(s) + roc_auc(ScoredSet(-s.scores, s.labels)) == pytest.approx(1.0)


class TestPrAuc:
    def test_perfect_ranking(self):
        s = ScoredSet([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
        assert pr_auc(s) == 1.0

    def test_three_sample_example(self):
        s = ScoredSet([0.9, 0.8, 0.7], [1, 0, 1])
        assert pr_auc(s) == pytest.approx(0.5 + 0.5 * (2.0 / 3.0), abs=1e-12)

    def test_single_positive_sample(self):
        assert pr_auc(ScoredSet([0.4], [1])) == 1.0

    def test_no_positive_undefined(self):
        with pytest.raises(MetricUndefinedError, match="no positive"):
            pr_auc(ScoredSet([0.4, 0.2], [0, 0]))

    def test_matches_sweep_oracle(self):
        rng = make_rng(34)
        for _ in range(100):
            s = random_scored_set(rng)
            assert pr_auc(s) == pytest.approx(
                ap_sweep_oracle(s.scores, s.labels), abs=1e-12
            )

    def test_monotone_transform_invariance(self):
        rng = make_rng(35)
        for _ in range(20):
            s = random_scored_set(rng)
            base = pr_auc(s)
            assert pr_auc(ScoredSet(np.exp(s.scores), s.labels)) == pytest.approx(
                base, abs=1e-12
            )


class TestF1OptThreshold:
    def test_perfect_separation_threshold_at_smallest_positive(self):
        s = ScoredSet([0.1, 0.2, 0.6, 0.9], [0, 0, 1, 1])
        res = f1_opt_threshold(s)
        assert res.threshold == 0.6
        assert res.f1 == 1.0

    def test_two_candidate_sweep(self):
        s = ScoredSet([0.2, 0.9], [1, 0])
        res = f1_opt_threshold(s)
        assert res.threshold == 0.2
        assert res.f1 == pytest.approx(2.0 / 3.0)

    def test_all_positive_takes_min_score(self):
        s = ScoredSet([0.3, 0.7, 0.5], [1, 1, 1])
        res = f1_opt_threshold(s)
        assert res.threshold == 0.3
        assert res.f1 == 1.0

    def test_tie_breaks_toward_largest_threshold(self):
        # F1 = 2/3 both at t=4 (TP=1, pred=1) and t=1 (TP=2, pred=4)
        s = ScoredSet([4.0, 3.0, 2.0, 1.0], [1, 0, 0, 1])
        res = f1_opt_threshold(s)
        assert res.f1 == pytest.approx(2.0 / 3.0)
        assert res.threshold == 4.0

    def test_no_positive_undefined(self):
        with pytest.raises(MetricUndefinedError):
            f1_opt_threshold(ScoredSet([0.4], [0]))


class TestClassificationMetrics:
    def test_perfect_predictions(self):
        s = ScoredSet([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0])
        r = classification_metrics(s, 0.5)
        assert (r.accuracy, r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0, 1.0)

    def test_all_predicted_negative_degenerate_zeros(self):
        s = ScoredSet([0.1, 0.2, 0.3], [1, 1, 0])
        r = classification_metrics(s, 0.9)
        assert r.recall == 0.0 and r.precision == 0.0 and r.f1 == 0.0

    def test_table_regime_confusion_arithmetic(self):
        # TP=93, FP=1, FN=7, TN=99
        scores = np.concatenate(
            [np.full(93, 0.9), np.full(7, 0.1), np.full(1, 0.9), np.full(99, 0.1)]
        )
        labels = np.concatenate([np.ones(100), np.zeros(100)]).astype(int)
        r = classification_metrics(ScoredSet(scores, labels), 0.5)
        assert r.accuracy == pytest.approx(0.96)
        assert r.precision == pytest.approx(93 / 94, abs=1e-4)
        assert r.recall == pytest.approx(0.93)

    def test_confusion_counts_partition_the_set(self):
        rng = make_rng(36)
        for _ in range(20):
            s = random_scored_set(rng)
            t = float(np.median(s.scores))
            pred = s.scores >= t
            actual = s.labels == 1
            tp = (pred & actual).sum()
            fp = (pred & ~actual).sum()
            fn = (~pred & actual).sum()
            tn = (~pred & ~actual).sum()
            assert tp + fp + fn + tn == s.scores.size

    def test_f1_identity_with_precision_recall(self):
        rng = make_rng(37)
        for _ in range(20):
            s = random_scored_set(rng)
            r = classification_metrics(s, float(np.median(s.scores)))
            denom = r.precision + r.recall
            expected = 2 * r.precision * r.recall / denom if denom > 0 else 0.0
            assert r.f1 == pytest.approx(expected, abs=1e-12)


class TestPixelMetrics:
    @staticmethod
    def maps_and_truths(arrs, masks):
        return (
            [AnomalyMap(np.asarray(a, dtype=float)) for a in arrs],
            [np.asarray(m, dtype=bool) for m in masks],
        )

    def test_maps_equal_truths_are_perfect(self):
        truth = np.zeros((8, 8), dtype=bool)
        truth[2:4, 2:4] = True
        maps, truths = self.maps_and_truths([truth.astype(float)], [truth])
        pm = pixel_metrics(maps, truths)
        assert pm.pixel_auroc == 1.0
        assert pm.pixel_f1 == 1.0

    def test_constant_maps_give_half_auroc(self):
        truth = np.zeros((4, 4), dtype=bool)
        truth[0, 0] = True
        maps, truths = self.maps_and_truths([np.full((4, 4), 0.3)], [truth])
        assert pixel_metrics(maps, truths).pixel_auroc == 0.5

    def test_pooling_invariant_to_image_partition(self):
        rng = make_rng(38)
        big = rng.random((8, 8))
        truth = rng.random((8, 8)) < 0.2
        truth[0, 0] = True
        one = pixel_metrics(*self.maps_and_truths([big], [truth]))
        quads = [big[:4, :4], big[:4, 4:], big[4:, :4], big[4:, 4:]]
        tquads = [truth[:4, :4], truth[:4, 4:], truth[4:, :4], truth[4:, 4:]]
        four = pixel_metrics(*self.maps_and_truths(quads, tquads))
        assert one.pixel_auroc == pytest.approx(four.pixel_auroc, abs=1e-12)
        assert one.pixel_f1 == pytest.approx(four.pixel_f1, abs=1e-12)

    def test_matches_manual_concatenation(self):
        rng = make_rng(39)
        arrs = [rng.random((5, 5)) for _ in range(3)]
        masks = [rng.random((5, 5)) < 0.3 for _ in range(3)]
        masks[0][1, 1] = True
        maps, truths = self.maps_and_truths(arrs, masks)
        pm = pixel_metrics(maps, truths)
        pooled = ScoredSet(
            np.concatenate([a.ravel() for a in arrs]),
            np.concatenate([m.ravel() for m in masks]).astype(int),
        )
        assert pm.pixel_auroc == roc_auc(pooled)

    def test_no_anomalous_pixels_undefined(self):
        maps, truths = self.maps_and_truths(
            [np.zeros((4, 4))], [np.zeros((4, 4), dtype=bool)]
        )
        with pytest.raises(MetricUndefinedError, match="no anomalous pixels"):
            pixel_metrics(maps, truths)

    def test_dimension_mismatch_rejected(self):
        maps = [AnomalyMap(np.zeros((4, 4)))]
        with pytest.raises(ValidationError, match="truth shape"):
            pixel_metrics(maps, [np.zeros((3, 3), dtype=bool)])


class TestAggregateRuns:
    @staticmethod
    def report(acc, **kw):
        base = dict(accuracy=acc, precision=0.5, recall=0.5, f1=0.5, threshold=0.1)
        base.update(kw)
        return MetricsReport(**base)

    def test_symmetric_three_point(self):
        agg = aggregate_runs([self.report(a) for a in (0.96, 0.97, 0.98)])
        assert agg.mean["accuracy"] == pytest.approx(0.97)
        assert agg.std["accuracy"] == pytest.approx(0.01)

    def test_single_run_zero_std(self):
        agg = aggregate_runs([self.report(0.9)])
        assert agg.std["accuracy"] == 0.0
        assert agg.runs == 1

    def test_identical_runs_exactly_zero_std(self):
        agg = aggregate_runs([self.report(0.913)] * 5)
        assert agg.std["accuracy"] == 0.0

    def test_optional_metrics_aggregated_when_present_everywhere(self):
        runs = [self.report(0.9, pixel_auroc=0.8), self.report(0.9, pixel_auroc=0.9)]
        agg = aggregate_runs(runs)
        assert agg.mean["pixel_auroc"] == pytest.approx(0.85)
        runs_mixed = [self.report(0.9, pixel_auroc=0.8), self.report(0.9)]
        assert "pixel_auroc" not in aggregate_runs(runs_mixed).mean

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            aggregate_runs([])


class TestScoredSetValidation:
    def test_length_mismatch(self):
        with pytest.raises(ValidationError, match="differ in length"):
            ScoredSet([0.1, 0.2], [1])

    def test_bad_labels(self):
        with pytest.raises(ValidationError, match="labels"):
            ScoredSet([0.1, 0.2], [1, 2])

    def test_non_finite_scores(self):
        with pytest.raises(ValidationError, match="non-finite"):
            ScoredSet([0.1, np.inf], [1, 0])
