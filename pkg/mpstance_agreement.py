#!/usr/bin/env python3
"""
MPSTANCE - Accord inter-annotateurs
Kappa de Fleiss, accord par paires et niveau de désaccord par document
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Sequence

import numpy as np
import pandas as pd

from mpstance_corpus import CLASS_ORDER, Corpus, StanceLabel

logger = logging.getLogger(__name__)

AGREEMENT_DEFINITION = (
    "pairwise_agreement = moyenne sur les items de la fraction de paires d'annotateurs "
    "en accord (P̄ de Fleiss, sans correction du hasard)"
)


class AgreementError(ValueError):
    """Entrée incohérente pour le calcul d'accord."""


class DisagreementLevel(str, Enum):
    UNANIMOUS = 'Unanimous'
    MAJORITY = 'Majority'
    SPLIT = 'Split'


@dataclass
class AgreementReport:
    fleiss_kappa: float
    pairwise_agreement: float
    per_label_counts: Dict[str, int]
    n_items: int
    n_raters: int
    disagreement_histogram: Dict[str, int] = field(default_factory=dict)
    excluded_items: int = 0
    agreement_definition: str = AGREEMENT_DEFINITION

    def to_dict(self) -> Dict:
        return {
            'fleiss_kappa': self.fleiss_kappa,
            'pairwise_agreement': self.pairwise_agreement,
            'per_label_counts': dict(self.per_label_counts),
            'n_items': self.n_items,
            'n_raters': self.n_raters,
            'disagreement_histogram': dict(self.disagreement_histogram),
            'excluded_items': self.excluded_items,
            'agreement_definition': self.agreement_definition,
        }

    def to_table(self) -> str:
        """Tableau lisible du rapport d'accord."""
        rows = [
            ('Fleiss kappa', f"{self.fleiss_kappa:.4f}"),
            ('Pairwise agreement', f"{self.pairwise_agreement:.4f}"),
            ('Items', str(self.n_items)),
            ('Raters per item', str(self.n_raters)),
        ]
        rows += [(f"label {label}", str(count)) for label, count in self.per_label_counts.items()]
        rows += [(f"level {level}", str(count)) for level, count in self.disagreement_histogram.items()]
        if self.excluded_items:
            rows.append(('Excluded items', str(self.excluded_items)))
        width = max(len(name) for name, _ in rows)
        return '\n'.join(f"{name:<{width}}  {value}" for name, value in rows)


def _validate(items, n_raters: int) -> np.ndarray:
    data = np.asarray(items)
    if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
        raise AgreementError("une matrice items × catégories non vide est attendue")
    if not np.issubdtype(data.dtype, np.integer):
        if not np.all(np.equal(np.mod(data, 1), 0)):
            raise AgreementError("les comptes doivent être entiers")
        data = data.astype(np.int64)
    if n_raters < 2:
        raise AgreementError(f"au moins 2 annotateurs requis (reçu {n_raters})")
    if (data < 0).any():
        raise AgreementError("les comptes doivent être positifs ou nuls")
    row_sums = data.sum(axis=1)
    bad = np.flatnonzero(row_sums != n_raters)
    if bad.size:
        raise AgreementError(
            f"l'item {int(bad[0])} totalise {int(row_sums[bad[0]])} annotations au lieu de {n_raters}"
        )
    return data


def _subject_agreements(data: np.ndarray, n_raters: int) -> np.ndarray:
    """P(i) = Σ_j n(i,j)(n(i,j) - 1) / n(n - 1)."""
    return (data * (data - 1)).sum(axis=1) / float(n_raters * (n_raters - 1))


def pairwise_agreement(items, n_raters: int) -> float:
    """Accord moyen par paires, sans correction du hasard."""
    data = _validate(items, n_raters)
    return float(np.mean(_subject_agreements(data, n_raters)))


def fleiss_kappa(items, n_raters: int) -> float:
    """Kappa de Fleiss.

                  P̄ - P̄(e)
    Fleiss's κ = ----------
                  1 - P̄(e)

    Par convention κ = 1.0 lorsque toutes les annotations tombent dans une
    seule catégorie (P̄(e) = 1)."""
    data = _validate(items, n_raters)
    observed = float(np.mean(_subject_agreements(data, n_raters)))
    proportions = data.sum(axis=0) / float(data.sum())
    expected = float(np.dot(proportions, proportions))
    if np.isclose(expected, 1.0, rtol=0.0, atol=1e-12):
        return 1.0
    return (observed - expected) / (1.0 - expected)


def disagreement_level(annotations: Sequence[StanceLabel]) -> DisagreementLevel:
    if not annotations:
        raise AgreementError("liste d'annotations vide")
    counts = Counter(annotations)
    if len(counts) == 1:
        return DisagreementLevel.UNANIMOUS
    if max(counts.values()) == 1:
        return DisagreementLevel.SPLIT
    return DisagreementLevel.MAJORITY


def label_count_matrix(annotation_lists: Sequence[Sequence[StanceLabel]],
                       categories: Sequence[StanceLabel] = CLASS_ORDER) -> np.ndarray:
    """Matrice items × catégories des comptes d'annotations."""
    index = {label: position for position, label in enumerate(categories)}
    matrix = np.zeros((len(annotation_lists), len(categories)), dtype=np.int64)
    for row, labels in enumerate(annotation_lists):
        for label in labels:
            if label not in index:
                raise AgreementError(f"label hors catégories: {label.value}")
            matrix[row, index[label]] += 1
    return matrix


def agreement_report(corpus: Corpus) -> AgreementReport:
    """Statistiques d'accord d'un corpus (documents au nombre d'annotations modal)."""
    if len(corpus) == 0:
        raise AgreementError("corpus vide")

    categories = list(CLASS_ORDER)
    if any(StanceLabel.LINK_NOT_WORKING in document.labels for document in corpus):
        categories.append(StanceLabel.LINK_NOT_WORKING)

    sizes = Counter(len(document.annotations) for document in corpus)
    n_raters = max(sorted(sizes), key=lambda size: sizes[size])
    kept = [document for document in corpus if len(document.annotations) == n_raters]
    excluded = len(corpus) - len(kept)
    if excluded:
        logger.warning(f"⚠️ {excluded} documents exclus des statistiques (nombre d'annotations ≠ {n_raters})")

    per_label = Counter(label for document in corpus for label in document.labels)
    histogram = Counter(disagreement_level(document.labels) for document in corpus)

    if n_raters < 2:
        logger.warning("⚠️ Une seule annotation par document: kappa indéfini")
        kappa, agreement = float('nan'), float('nan')
    else:
        matrix = label_count_matrix([document.labels for document in kept], categories)
        kappa = fleiss_kappa(matrix, n_raters)
        agreement = pairwise_agreement(matrix, n_raters)

    report = AgreementReport(
        fleiss_kappa=kappa,
        pairwise_agreement=agreement,
        per_label_counts={label.value: per_label.get(label, 0) for label in categories},
        n_items=len(kept),
        n_raters=n_raters,
        disagreement_histogram={level.value: histogram.get(level, 0) for level in DisagreementLevel},
        excluded_items=excluded,
    )
    logger.info(f"📊 Fleiss kappa = {kappa:.4f}, accord par paires = {agreement:.4f} ({len(kept)} items)")
    return report


def label_distributions(corpus: Corpus, tie_policy=None) -> pd.DataFrame:
    """Distributions des labels: par annotation (originale) et par document (majoritaire)."""
    from mpstance_perspectives import Tie, TiePolicy, majority_label

    policy = tie_policy or TiePolicy.discard()
    original = Counter(label.value for document in corpus for label in document.labels)
    majority: Counter = Counter()
    for document in corpus:
        retained = [label for label in document.labels if label.is_retained]
        verdict = majority_label(retained, policy) if retained else Tie.TIE
        majority[verdict.value] += 1

    labels = [label.value for label in StanceLabel] + [Tie.TIE.value]
    df = pd.DataFrame({
        'label': labels,
        'original': [original.get(label, 0) for label in labels],
        'majority': [majority.get(label, 0) for label in labels],
    })
    return df[(df['original'] > 0) | (df['majority'] > 0)].reset_index(drop=True)
