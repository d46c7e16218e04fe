#!/usr/bin/env python3
"""
MPSTANCE - Évaluation
Matrice de confusion, métriques macro, confiance moyenne et ventilations
par niveau de désaccord et par requête
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
from sklearn.metrics import accuracy_score, confusion_matrix, precision_recall_fscore_support

from mpstance_agreement import DisagreementLevel
from mpstance_corpus import CLASS_ORDER, StanceLabel
from mpstance_model import CLASS_INDEX, Prediction

logger = logging.getLogger(__name__)

CLASS_LABELS = list(range(len(CLASS_ORDER)))


class EvaluationError(ValueError):
    """Entrée d'évaluation invalide."""


@dataclass(frozen=True)
class ConfusionMatrix:
    """Lignes = label de référence, colonnes = label prédit, ordre CLASS_ORDER."""

    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_dict(self) -> Dict:
        return {
            'class_order': [label.value for label in CLASS_ORDER],
            'counts': self.counts.tolist(),
        }


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int

    def to_dict(self) -> Dict:
        return {'precision': self.precision, 'recall': self.recall, 'f1': self.f1, 'support': self.support}


@dataclass
class CoreMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    per_class: Dict[str, ClassMetrics]


@dataclass
class GroupSummary:
    n_docs: int
    accuracy: float
    avg_confidence: float

    def to_dict(self) -> Dict:
        return {'n_docs': self.n_docs, 'accuracy': self.accuracy, 'avg_confidence': self.avg_confidence}


@dataclass
class EvalResult:
    accuracy: float
    precision: float
    recall: float
    f1: float
    avg_confidence: float
    n_docs: int
    per_class: Dict[str, ClassMetrics] = field(default_factory=dict)
    per_level: Dict[str, GroupSummary] = field(default_factory=dict)
    per_query: Dict[str, GroupSummary] = field(default_factory=dict)
    confusion: Optional[ConfusionMatrix] = None

    def to_dict(self) -> Dict:
        return {
            'accuracy': self.accuracy,
            'precision': self.precision,
            'recall': self.recall,
            'f1': self.f1,
            'avg_confidence': self.avg_confidence,
            'n_docs': self.n_docs,
            'per_class': {label: metrics.to_dict() for label, metrics in self.per_class.items()},
            'per_level': {level: summary.to_dict() for level, summary in self.per_level.items()},
            'per_query': {query: summary.to_dict() for query, summary in self.per_query.items()},
            'confusion': self.confusion.to_dict() if self.confusion is not None else None,
        }


def confusion(preds: Sequence[Prediction], gold: Mapping[str, StanceLabel]) -> ConfusionMatrix:
    if not preds:
        raise EvaluationError("aucune prédiction à évaluer")
    missing = [prediction.doc_id for prediction in preds if prediction.doc_id not in gold]
    if missing:
        raise EvaluationError(f"aucun label de référence pour le document {missing[0]}")
    y_true = [CLASS_INDEX[gold[prediction.doc_id]] for prediction in preds]
    y_pred = [CLASS_INDEX[prediction.label] for prediction in preds]
    counts = confusion_matrix(y_true, y_pred, labels=CLASS_LABELS)
    return ConfusionMatrix(counts=counts.astype(np.int64))


def _label_vectors(cm: ConfusionMatrix):
    """Reconstitue (référence, prédiction) à partir des effectifs de la matrice."""
    gold_index, pred_index = np.indices(cm.counts.shape)
    repeats = cm.counts.ravel()
    return np.repeat(gold_index.ravel(), repeats), np.repeat(pred_index.ravel(), repeats)


def metrics(cm: ConfusionMatrix) -> CoreMetrics:
    """Exactitude et précision / rappel / F1 macro sur les 4 classes, en points de pourcentage.

    Une classe jamais prédite ou jamais présente compte pour 0 (zero_division=0)."""
    if cm.total <= 0:
        raise EvaluationError("matrice de confusion vide")
    y_true, y_pred = _label_vectors(cm)

    precision, recall, f1, support = precision_recall_fscore_support(
        y_true, y_pred, labels=CLASS_LABELS, average=None, zero_division=0
    )
    per_class = {
        label.value: ClassMetrics(
            precision=float(precision[index]) * 100, recall=float(recall[index]) * 100,
            f1=float(f1[index]) * 100, support=int(support[index]),
        )
        for index, label in enumerate(CLASS_ORDER)
    }
    macro_precision, macro_recall, macro_f1, _ = precision_recall_fscore_support(
        y_true, y_pred, labels=CLASS_LABELS, average='macro', zero_division=0
    )
    return CoreMetrics(
        accuracy=float(accuracy_score(y_true, y_pred)) * 100,
        precision=float(macro_precision) * 100,
        recall=float(macro_recall) * 100,
        f1=float(macro_f1) * 100,
        per_class=per_class,
    )


def average_confidence(preds: Sequence[Prediction]) -> float:
    if not preds:
        raise EvaluationError("aucune prédiction")
    return float(np.mean([prediction.confidence for prediction in preds]))


def _group_summary(preds: List[Prediction], gold: Mapping[str, StanceLabel]) -> GroupSummary:
    correct = sum(1 for p in preds if gold[p.doc_id] is p.label)
    return GroupSummary(
        n_docs=len(preds),
        accuracy=correct / len(preds) * 100,
        avg_confidence=average_confidence(preds),
    )


def evaluate(preds: Sequence[Prediction], gold: Mapping[str, StanceLabel],
             levels: Optional[Mapping[str, DisagreementLevel]] = None,
             queries: Optional[Mapping[str, str]] = None) -> EvalResult:
    """EvalResult complet; les ventilations sont calculées si les correspondances sont fournies."""
    cm = confusion(preds, gold)
    core = metrics(cm)

    per_level = {}
    if levels is not None:
        for level in DisagreementLevel:
            group = [p for p in preds if levels.get(p.doc_id) is level]
            if group:
                per_level[level.value] = _group_summary(group, gold)

    per_query = {}
    if queries is not None:
        for query_id in sorted({queries[p.doc_id] for p in preds if p.doc_id in queries}):
            group = [p for p in preds if queries.get(p.doc_id) == query_id]
            per_query[query_id] = _group_summary(group, gold)

    result = EvalResult(
        accuracy=core.accuracy,
        precision=core.precision,
        recall=core.recall,
        f1=core.f1,
        avg_confidence=average_confidence(preds),
        n_docs=cm.total,
        per_class=core.per_class,
        per_level=per_level,
        per_query=per_query,
        confusion=cm,
    )
    logger.info(
        f"📊 Acc {result.accuracy:.2f} | P {result.precision:.2f} | R {result.recall:.2f} | "
        f"F1 {result.f1:.2f} | Conf {result.avg_confidence:.2f} ({result.n_docs} documents)"
    )
    return result
