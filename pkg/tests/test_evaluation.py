import numpy as np
import pytest

from mpstance_agreement import DisagreementLevel
from mpstance_corpus import CLASS_ORDER, StanceLabel
from mpstance_evaluation import ConfusionMatrix, EvaluationError, average_confidence, confusion, evaluate, metrics
from mpstance_model import prediction_from_probs

P, N, A, X = StanceLabel.PRO, StanceLabel.NEUTRAL, StanceLabel.AGAINST, StanceLabel.NOT_ABOUT


def predicted(doc_id, label, confidence=0.7):
    rest = (1.0 - confidence) / 3
    return prediction_from_probs(doc_id, [confidence if c is label else rest for c in CLASS_ORDER])


def oracle_metrics(gold_labels, predicted_labels):
    """Définitions directes, par classe puis moyenne macro."""
    pairs = list(zip(gold_labels, predicted_labels))
    precisions, recalls, f1s = [], [], []
    for label in CLASS_ORDER:
        tp = sum(1 for g, p in pairs if g is label and p is label)
        predicted_count = sum(1 for _, p in pairs if p is label)
        gold_count = sum(1 for g, _ in pairs if g is label)
        precision = tp / predicted_count if predicted_count else 0.0
        recall = tp / gold_count if gold_count else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        precisions.append(precision)
        recalls.append(recall)
        f1s.append(f1)
    accuracy = sum(1 for g, p in pairs if g is p) / len(pairs)
    return accuracy * 100, np.mean(precisions) * 100, np.mean(recalls) * 100, np.mean(f1s) * 100


def test_metrics_match_oracle_on_random_sets():
    rng = np.random.Generator(np.random.PCG64(31))
    for _ in range(500):
        n_docs = int(rng.integers(1, 60))
        gold_labels = [CLASS_ORDER[int(i)] for i in rng.integers(0, 4, size=n_docs)]
        predicted_labels = [CLASS_ORDER[int(i)] for i in rng.integers(0, 4, size=n_docs)]
        preds = [predicted(f'd{i}', label) for i, label in enumerate(predicted_labels)]
        gold = {f'd{i}': label for i, label in enumerate(gold_labels)}

        core = metrics(confusion(preds, gold))
        accuracy, precision, recall, f1 = oracle_metrics(gold_labels, predicted_labels)
        assert core.accuracy == pytest.approx(accuracy, abs=1e-9)
        assert core.precision == pytest.approx(precision, abs=1e-9)
        assert core.recall == pytest.approx(recall, abs=1e-9)
        assert core.f1 == pytest.approx(f1, abs=1e-9)


def test_all_neutral_predictions():
    preds = [predicted(f'd{i}', N) for i in range(6)]
    gold = {f'd{i}': N for i in range(6)}
    result = evaluate(preds, gold)
    assert result.accuracy == 100.0
    assert result.f1 == 25.0
    assert result.per_class['neutral'].f1 == 100.0
    assert result.per_class['pro'].precision == 0.0


def test_two_class_case():
    gold = {'d1': P, 'd2': P, 'd3': A, 'd4': A}
    preds = [predicted('d1', P), predicted('d2', A), predicted('d3', A), predicted('d4', A)]
    cm = confusion(preds, gold)
    assert cm.counts[0].tolist() == [1, 0, 1, 0]
    assert cm.counts[2].tolist() == [0, 0, 2, 0]
    assert cm.total == 4

    core = metrics(cm)
    assert core.accuracy == pytest.approx(75.0)
    assert core.precision == pytest.approx((100 + 200 / 3) / 4)
    assert core.recall == pytest.approx(37.5)
    assert core.f1 == pytest.approx((200 / 3 + 80) / 4)


def test_missing_gold_raises():
    with pytest.raises(EvaluationError, match='d9'):
        confusion([predicted('d9', P)], {'d1': P})


def test_empty_predictions_rejected():
    with pytest.raises(EvaluationError):
        evaluate([], {'d1': P})


def test_average_confidence_matches_oracle():
    rng = np.random.Generator(np.random.PCG64(12))
    for _ in range(100):
        n_docs = int(rng.integers(1, 40))
        probs = rng.dirichlet(np.ones(4), size=n_docs)
        preds = [prediction_from_probs(f'd{i}', row) for i, row in enumerate(probs)]
        expected = sum(float(row.max()) for row in probs) / n_docs
        assert abs(average_confidence(preds) - expected) < 1e-12


def test_breakdowns_by_level_and_query():
    gold = {'d1': P, 'd2': N, 'd3': A, 'd4': X}
    preds = [predicted('d1', P, 0.9), predicted('d2', N, 0.8), predicted('d3', P, 0.4), predicted('d4', X, 0.6)]
    levels = {
        'd1': DisagreementLevel.UNANIMOUS, 'd2': DisagreementLevel.UNANIMOUS,
        'd3': DisagreementLevel.MAJORITY, 'd4': DisagreementLevel.SPLIT,
    }
    queries = {'d1': 'q1', 'd2': 'q2', 'd3': 'q1', 'd4': 'q2'}
    result = evaluate(preds, gold, levels=levels, queries=queries)

    assert list(result.per_level) == ['Unanimous', 'Majority', 'Split']
    assert result.per_level['Unanimous'].n_docs == 2
    assert result.per_level['Unanimous'].avg_confidence == pytest.approx(0.85)
    assert result.per_level['Majority'].accuracy == 0.0
    assert result.per_query['q1'].accuracy == 50.0
    assert result.per_query['q2'].avg_confidence == pytest.approx(0.7)
    assert result.n_docs == 4

    payload = result.to_dict()
    assert payload['confusion']['class_order'] == ['pro', 'neutral', 'against', 'not-about']
    assert set(payload['per_level']) == {'Unanimous', 'Majority', 'Split'}


def test_breakdowns_skipped_without_mappings():
    result = evaluate([predicted('d1', P)], {'d1': P})
    assert result.per_level == {} and result.per_query == {}


def test_metrics_from_counts_only():
    cm = ConfusionMatrix(counts=np.array([[2, 1, 0, 0], [0, 0, 0, 0], [1, 0, 3, 0], [0, 0, 0, 0]]))
    core = metrics(cm)
    assert core.accuracy == pytest.approx(500 / 7)
    assert core.precision == pytest.approx((2 / 3 + 0 + 1 + 0) / 4 * 100)
    assert core.recall == pytest.approx((2 / 3 + 0 + 3 / 4 + 0) / 4 * 100)
    assert core.f1 == pytest.approx((2 / 3 + 6 / 7) / 4 * 100)
    assert [m.support for m in core.per_class.values()] == [3, 0, 4, 0]
    assert core.per_class['neutral'].precision == 0.0
    assert core.per_class['not-about'].f1 == 0.0


def test_empty_confusion_rejected():
    with pytest.raises(EvaluationError):
        metrics(ConfusionMatrix(counts=np.zeros((4, 4), dtype=np.int64)))
    with pytest.raises(EvaluationError):
        confusion([], {'d1': P})
