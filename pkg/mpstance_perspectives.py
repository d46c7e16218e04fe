#!/usr/bin/env python3
"""
MPSTANCE - Construction des jeux d'entraînement
Baseline (vote majoritaire) et multi-perspective (une instance par annotation)
"""

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from mpstance_corpus import CLASS_ORDER, Corpus, StanceLabel

logger = logging.getLogger(__name__)


class PerspectiveError(ValueError):
    """Entrée invalide pour la construction des jeux de données."""


class MajorityTieError(PerspectiveError):
    """Égalité de vote sous la politique Error."""

    def __init__(self, doc_id: Optional[str], tied: Sequence[StanceLabel]):
        self.doc_id = doc_id
        self.tied = tuple(tied)
        labels = ', '.join(label.value for label in tied)
        where = f"document {doc_id}" if doc_id else "annotations"
        super().__init__(f"égalité de vote pour {where}: {labels}")


class Tie(str, Enum):
    """Marqueur d'égalité renvoyé par majority_label sous la politique Discard."""

    TIE = 'tie'


class TieRule(str, Enum):
    DISCARD = 'discard'
    PRECEDENCE = 'precedence'
    ERROR = 'error'


@dataclass(frozen=True)
class TiePolicy:
    rule: TieRule = TieRule.DISCARD
    precedence: Tuple[StanceLabel, ...] = CLASS_ORDER

    def __post_init__(self):
        if self.rule is TieRule.PRECEDENCE and sorted(self.precedence) != sorted(CLASS_ORDER):
            raise PerspectiveError(
                "l'ordre de précédence doit contenir exactement les quatre labels retenus"
            )

    @classmethod
    def discard(cls) -> 'TiePolicy':
        return cls(TieRule.DISCARD)

    @classmethod
    def fixed_precedence(cls, ordering: Sequence[StanceLabel]) -> 'TiePolicy':
        return cls(TieRule.PRECEDENCE, tuple(ordering))

    @classmethod
    def error(cls) -> 'TiePolicy':
        return cls(TieRule.ERROR)

    def to_dict(self) -> Dict:
        payload = {'rule': self.rule.value}
        if self.rule is TieRule.PRECEDENCE:
            payload['precedence'] = [label.value for label in self.precedence]
        return payload


class OriginKind(str, Enum):
    MAJORITY_VOTE = 'majority-vote'
    ANNOTATION = 'annotation'


@dataclass(frozen=True)
class Origin:
    kind: OriginKind
    index: Optional[int] = None

    @classmethod
    def majority_vote(cls) -> 'Origin':
        return cls(OriginKind.MAJORITY_VOTE)

    @classmethod
    def annotation(cls, index: int) -> 'Origin':
        return cls(OriginKind.ANNOTATION, index)

    def __str__(self) -> str:
        if self.kind is OriginKind.MAJORITY_VOTE:
            return self.kind.value
        # index 1-based à l'écriture
        return f"{self.kind.value}:{self.index + 1}"


@dataclass(frozen=True)
class TrainInstance:
    doc_id: str
    query_text: str
    content: str
    label: StanceLabel
    origin: Origin

    def __post_init__(self):
        if not self.label.is_retained:
            raise PerspectiveError(f"label {self.label.value} interdit dans une instance ({self.doc_id})")

    def to_dict(self) -> Dict:
        return {
            'doc_id': self.doc_id,
            'query_text': self.query_text,
            'content': self.content,
            'label': self.label.value,
            'origin': str(self.origin),
        }


@dataclass
class TieReport:
    discarded: List[str] = field(default_factory=list)
    coerced: List[Tuple[str, StanceLabel]] = field(default_factory=list)

    @property
    def n_ties(self) -> int:
        return len(self.discarded) + len(self.coerced)

    def to_dict(self) -> Dict:
        return {
            'discarded': list(self.discarded),
            'coerced': [{'doc_id': doc_id, 'label': label.value} for doc_id, label in self.coerced],
        }


def majority_label(annotations: Sequence[StanceLabel], policy: TiePolicy = TiePolicy(),
                   doc_id: Optional[str] = None) -> Union[StanceLabel, Tie]:
    """Label de compte maximal; la politique tranche les égalités."""
    if not annotations:
        raise PerspectiveError("liste d'annotations vide")
    if StanceLabel.LINK_NOT_WORKING in annotations:
        raise PerspectiveError(f"label link-not-working présent ({doc_id or 'annotations'}): prétraiter le corpus")

    counts = Counter(annotations)
    top = max(counts.values())
    tied = [label for label in CLASS_ORDER if counts.get(label, 0) == top]
    if len(tied) == 1:
        return tied[0]

    if policy.rule is TieRule.DISCARD:
        return Tie.TIE
    if policy.rule is TieRule.PRECEDENCE:
        return next(label for label in policy.precedence if label in tied)
    raise MajorityTieError(doc_id, tied)


def build_baseline_dataset(corpus: Corpus, policy: TiePolicy = TiePolicy()) -> Tuple[List[TrainInstance], TieReport]:
    """Une instance par document, étiquetée par le vote majoritaire."""
    instances = []
    report = TieReport()
    for document in corpus:
        verdict = majority_label(document.labels, policy, doc_id=document.doc_id)
        if verdict is Tie.TIE:
            report.discarded.append(document.doc_id)
            continue
        if policy.rule is TieRule.PRECEDENCE and _is_tie(document.labels):
            report.coerced.append((document.doc_id, verdict))
        instances.append(TrainInstance(
            doc_id=document.doc_id,
            query_text=document.query_text,
            content=document.content,
            label=verdict,
            origin=Origin.majority_vote(),
        ))

    if report.discarded:
        logger.warning(f"⚠️ {len(report.discarded)} documents écartés pour égalité de vote")
    if report.coerced:
        logger.info(f"⚖️ {len(report.coerced)} égalités tranchées par précédence")
    logger.info(f"✅ Jeu baseline: {len(instances)} instances")
    return instances, report


def _is_tie(labels: Sequence[StanceLabel]) -> bool:
    counts = sorted(Counter(labels).values(), reverse=True)
    return len(counts) > 1 and counts[0] == counts[1]


def disaggregate(corpus: Corpus, distinct_only: bool = False) -> List[TrainInstance]:
    """Une instance par annotation (ou par label distinct si distinct_only)."""
    instances = []
    skipped = 0
    for document in corpus:
        seen = set()
        for index, annotation in enumerate(document.annotations):
            if not annotation.label.is_retained:
                skipped += 1
                continue
            if distinct_only:
                if annotation.label in seen:
                    continue
                seen.add(annotation.label)
            instances.append(TrainInstance(
                doc_id=document.doc_id,
                query_text=document.query_text,
                content=document.content,
                label=annotation.label,
                origin=Origin.annotation(index),
            ))

    if skipped:
        logger.warning(f"⚠️ {skipped} annotations link-not-working ignorées (corpus non prétraité ?)")
    mode = 'labels distincts' if distinct_only else 'toutes les annotations'
    logger.info(f"✅ Jeu multi-perspective ({mode}): {len(instances)} instances")
    return instances


def gold_labels(corpus: Corpus, policy: TiePolicy = TiePolicy()) -> Tuple[Dict[str, StanceLabel], TieReport]:
    """Labels majoritaires de référence pour l'évaluation."""
    instances, report = build_baseline_dataset(corpus, policy)
    return {instance.doc_id: instance.label for instance in instances}, report


def save_instances(instances: Sequence[TrainInstance], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for instance in instances:
            f.write(json.dumps(instance.to_dict(), ensure_ascii=False) + '\n')
    logger.info(f"💾 {len(instances)} instances écrites dans {path}")
    return path
