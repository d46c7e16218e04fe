#!/usr/bin/env python3
"""
MPSTANCE - Corpus
Modèle de données, ingestion, prétraitement et découpage des corpus de stance annotés
"""

import csv
import hashlib
import json
import logging
import math
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

# Configuration
DEFAULT_MAX_TOKENS = 8000
DEFAULT_SPLIT_FRACTIONS = (0.70, 0.15, 0.15)
DEFAULT_SEED = 42
FRACTION_TOLERANCE = 1e-9
CSV_COLUMNS = ['doc_id', 'query_id', 'query_text', 'url', 'content', 'label_1', 'label_2', 'label_3']
SUPPORTED_FORMATS = ('jsonl', 'csv')


class CorpusError(ValueError):
    """Erreur de lecture ou de cohérence d'un corpus."""

    def __init__(self, message: str, line: Optional[int] = None, field_name: Optional[str] = None):
        self.line = line
        self.field = field_name
        location = []
        if line is not None:
            location.append(f"ligne {line}")
        if field_name is not None:
            location.append(f"champ '{field_name}'")
        prefix = f"[{', '.join(location)}] " if location else ""
        super().__init__(f"{prefix}{message}")


class SplitError(ValueError):
    """Paramètres de découpage invalides."""


class StanceLabel(str, Enum):
    """Les cinq labels de stance produits par les annotateurs."""

    PRO = 'pro'
    NEUTRAL = 'neutral'
    AGAINST = 'against'
    NOT_ABOUT = 'not-about'
    LINK_NOT_WORKING = 'link-not-working'

    @classmethod
    def parse(cls, text: str) -> 'StanceLabel':
        """Lit un label sans tenir compte de la casse."""
        normalized = str(text).strip().lower()
        for label in cls:
            if label.value == normalized:
                return label
        raise ValueError(f"label inconnu: '{text}'")

    @property
    def is_retained(self) -> bool:
        return self is not StanceLabel.LINK_NOT_WORKING


# Ordre fixe des classes de classification (sert aussi de départage des argmax)
CLASS_ORDER: Tuple[StanceLabel, ...] = (
    StanceLabel.PRO,
    StanceLabel.NEUTRAL,
    StanceLabel.AGAINST,
    StanceLabel.NOT_ABOUT,
)


@dataclass(frozen=True)
class Annotation:
    label: StanceLabel
    annotator_id: Optional[str] = None


@dataclass(frozen=True)
class Document:
    """Un couple requête/contenu avec son ensemble d'annotations."""

    doc_id: str
    query_id: str
    query_text: str
    content: str
    annotations: Tuple[Annotation, ...]
    url: Optional[str] = None

    def __post_init__(self):
        if not self.annotations:
            raise CorpusError(f"document {self.doc_id} sans annotation", field_name='annotations')

    @property
    def labels(self) -> List[StanceLabel]:
        return [annotation.label for annotation in self.annotations]


@dataclass(frozen=True)
class Corpus:
    documents: Tuple[Document, ...]
    provenance: str = ''

    def __post_init__(self):
        seen = set()
        for document in self.documents:
            if document.doc_id in seen:
                raise CorpusError(f"doc_id dupliqué: {document.doc_id}", field_name='doc_id')
            seen.add(document.doc_id)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def by_id(self) -> Dict[str, Document]:
        return {document.doc_id: document for document in self.documents}


class LinkPolicy(str, Enum):
    """Règle de suppression des documents marqués link-not-working."""

    ANY_ANNOTATION = 'any-annotation'
    MAJORITY_ONLY = 'majority-only'


@dataclass(frozen=True)
class PreprocessConfig:
    max_tokens: int = DEFAULT_MAX_TOKENS
    drop_link_not_working: LinkPolicy = LinkPolicy.ANY_ANNOTATION
    dedupe: bool = True

    def __post_init__(self):
        if self.max_tokens <= 0:
            raise ValueError(f"max_tokens doit être > 0 (reçu {self.max_tokens})")


@dataclass
class PreprocessReport:
    input_size: int = 0
    link_not_working_removed: int = 0
    empty_removed: int = 0
    too_long_removed: int = 0
    duplicates_removed: int = 0
    link_annotations_stripped: int = 0
    final_size: int = 0

    @property
    def is_empty(self) -> bool:
        return self.final_size == 0

    def to_dict(self) -> Dict[str, Union[int, bool]]:
        return {
            'input_size': self.input_size,
            'link_not_working_removed': self.link_not_working_removed,
            'empty_removed': self.empty_removed,
            'too_long_removed': self.too_long_removed,
            'duplicates_removed': self.duplicates_removed,
            'link_annotations_stripped': self.link_annotations_stripped,
            'final_size': self.final_size,
            'is_empty': self.is_empty,
        }


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = DEFAULT_SPLIT_FRACTIONS[0]
    val_frac: float = DEFAULT_SPLIT_FRACTIONS[1]
    test_frac: float = DEFAULT_SPLIT_FRACTIONS[2]
    seed: int = DEFAULT_SEED
    stratify_by_majority: bool = True

    def __post_init__(self):
        fractions = self.fractions
        for name, value in zip(('train_frac', 'val_frac', 'test_frac'), fractions):
            if not 0.0 < value < 1.0:
                raise SplitError(f"{name} doit être dans ]0, 1[ (reçu {value})")
        if abs(sum(fractions) - 1.0) > FRACTION_TOLERANCE:
            raise SplitError(f"les fractions doivent sommer à 1.0 (somme = {sum(fractions)!r})")

    @property
    def fractions(self) -> Tuple[float, float, float]:
        return (self.train_frac, self.val_frac, self.test_frac)


# === Tokens ===

def token_count(text: str) -> int:
    """Nombre de suites maximales de caractères non blancs."""
    return len(text.split())


# === Lecture / écriture ===

def _parse_label(raw, line: int, field_name: str) -> StanceLabel:
    if raw is None:
        raise CorpusError("label manquant", line=line, field_name=field_name)
    try:
        return StanceLabel.parse(raw)
    except ValueError as e:
        raise CorpusError(str(e), line=line, field_name=field_name) from None


def _require_text(record: Dict, key: str, line: int, allow_none: bool = False) -> Optional[str]:
    if key not in record:
        raise CorpusError("champ obligatoire absent", line=line, field_name=key)
    value = record[key]
    if value is None and allow_none:
        return None
    if not isinstance(value, str):
        raise CorpusError(f"chaîne attendue, reçu {type(value).__name__}", line=line, field_name=key)
    return value


def _document_from_record(record: Dict, line: int) -> Document:
    if not isinstance(record, dict):
        raise CorpusError("objet JSON attendu", line=line)

    raw_annotations = record.get('annotations')
    if not isinstance(raw_annotations, list) or not raw_annotations:
        raise CorpusError("liste d'annotations non vide attendue", line=line, field_name='annotations')

    annotations = []
    for index, raw in enumerate(raw_annotations):
        field_name = f"annotations[{index}]"
        if not isinstance(raw, dict):
            raise CorpusError("objet annotation attendu", line=line, field_name=field_name)
        annotator_id = raw.get('annotator_id')
        if annotator_id is not None and not isinstance(annotator_id, str):
            raise CorpusError("annotator_id doit être une chaîne ou null", line=line, field_name=f"{field_name}.annotator_id")
        label = _parse_label(raw.get('label'), line, f"{field_name}.label")
        annotations.append(Annotation(label=label, annotator_id=annotator_id))

    return Document(
        doc_id=_require_text(record, 'doc_id', line),
        query_id=_require_text(record, 'query_id', line),
        query_text=_require_text(record, 'query_text', line),
        content=_require_text(record, 'content', line),
        annotations=tuple(annotations),
        url=record.get('url') if record.get('url') is None else _require_text(record, 'url', line),
    )


def _check_unique(documents: List[Document], lines: List[int]):
    seen: Dict[str, int] = {}
    for document, line in zip(documents, lines):
        if document.doc_id in seen:
            raise CorpusError(
                f"doc_id dupliqué '{document.doc_id}' (déjà vu ligne {seen[document.doc_id]})",
                line=line, field_name='doc_id',
            )
        seen[document.doc_id] = line


def _load_jsonl(path: Path) -> List[Tuple[Document, int]]:
    loaded = []
    with open(path, 'r', encoding='utf-8') as f:
        for line_number, raw_line in enumerate(f, 1):
            if not raw_line.strip():
                continue
            try:
                record = json.loads(raw_line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"JSON invalide: {e.msg}", line=line_number) from None
            loaded.append((_document_from_record(record, line_number), line_number))
    return loaded


def _read_csv(path: Path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False)
    except pd.errors.EmptyDataError:
        raise CorpusError("fichier CSV vide", line=1) from None
    except pd.errors.ParserError as e:
        match = re.search(r'line (\d+)', str(e))
        raise CorpusError(f"CSV invalide: {e}", line=int(match.group(1)) if match else None) from None


def _load_csv(path: Path) -> List[Tuple[Document, int]]:
    df = _read_csv(path)
    missing = [column for column in CSV_COLUMNS if column not in df.columns]
    if missing:
        raise CorpusError(f"colonnes manquantes: {', '.join(missing)}", line=1, field_name=missing[0])

    loaded = []
    # ligne 1 = en-tête; un champ entre guillemets peut couvrir plusieurs lignes
    line = 2
    for raw in df.to_dict('records'):
        # lignes vides ou incomplètes: champs manquants à NaN
        record = {key: value if isinstance(value, str) else '' for key, value in raw.items()}
        start, line = line, line + 1 + sum(str(value).count('\n') for value in record.values())
        if not any(record.values()):
            continue
        annotations = tuple(
            Annotation(label=_parse_label(record[column], start, column))
            for column in ('label_1', 'label_2', 'label_3')
        )
        url = record['url'] or None
        loaded.append((Document(
            doc_id=record['doc_id'],
            query_id=record['query_id'],
            query_text=record['query_text'],
            content=record['content'],
            annotations=annotations,
            url=url,
        ), start))
    return loaded


def load_corpus(path: Union[str, Path], format: str = 'jsonl') -> Corpus:
    """Charge un corpus JSON-lines ou CSV."""
    path = Path(path)
    if format not in SUPPORTED_FORMATS:
        raise CorpusError(f"format non supporté: {format}")
    if not path.exists():
        raise CorpusError(f"fichier introuvable: {path}")

    loaded = _load_jsonl(path) if format == 'jsonl' else _load_csv(path)
    documents = [document for document, _ in loaded]
    _check_unique(documents, [line for _, line in loaded])

    logger.info(f"✅ {len(documents)} documents chargés depuis {path} ({format})")
    return Corpus(documents=tuple(documents), provenance=f"{format}:{path.name}")


def document_to_record(document: Document) -> Dict:
    return {
        'doc_id': document.doc_id,
        'query_id': document.query_id,
        'query_text': document.query_text,
        'url': document.url,
        'content': document.content,
        'annotations': [
            {'annotator_id': annotation.annotator_id, 'label': annotation.label.value}
            for annotation in document.annotations
        ],
    }


def save_corpus(corpus: Corpus, path: Union[str, Path], format: str = 'jsonl') -> Path:
    """Écrit un corpus au format JSON-lines ou CSV (labels en minuscules)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    if format == 'jsonl':
        with open(path, 'w', encoding='utf-8') as f:
            for document in corpus:
                f.write(json.dumps(document_to_record(document), ensure_ascii=False) + '\n')
    elif format == 'csv':
        rows = []
        for document in corpus:
            if len(document.annotations) != 3:
                raise CorpusError(
                    f"le format CSV exige exactement 3 annotations ({document.doc_id} en a {len(document.annotations)})",
                    field_name='annotations',
                )
            row = {
                'doc_id': document.doc_id,
                'query_id': document.query_id,
                'query_text': document.query_text,
                'url': document.url or '',
                'content': document.content,
            }
            for index, annotation in enumerate(document.annotations, 1):
                row[f'label_{index}'] = annotation.label.value
            rows.append(row)
        pd.DataFrame(rows, columns=CSV_COLUMNS).to_csv(path, index=False, quoting=csv.QUOTE_NONNUMERIC)
    else:
        raise CorpusError(f"format non supporté: {format}")

    logger.info(f"💾 {len(corpus)} documents écrits dans {path}")
    return path


def corpus_fingerprint(corpus: Corpus) -> str:
    """Empreinte SHA-256 de la sérialisation JSON-lines canonique."""
    digest = hashlib.sha256()
    for document in corpus:
        digest.update(json.dumps(document_to_record(document), ensure_ascii=False, sort_keys=True).encode('utf-8'))
        digest.update(b'\n')
    return digest.hexdigest()


# === Prétraitement ===

def _link_not_working_verdict(document: Document, policy: LinkPolicy) -> Tuple[bool, Tuple[Annotation, ...]]:
    """Retourne (à supprimer, annotations conservées)."""
    flagged = sum(1 for label in document.labels if label is StanceLabel.LINK_NOT_WORKING)
    if flagged == 0:
        return False, document.annotations
    if policy is LinkPolicy.ANY_ANNOTATION:
        return True, document.annotations
    if flagged * 2 > len(document.annotations):
        return True, document.annotations
    kept = tuple(a for a in document.annotations if a.label is not StanceLabel.LINK_NOT_WORKING)
    return False, kept


def preprocess(corpus: Corpus, config: PreprocessConfig = PreprocessConfig()) -> Tuple[Corpus, PreprocessReport]:
    """Supprime les documents trop longs, dupliqués ou au lien mort."""
    report = PreprocessReport(input_size=len(corpus))
    kept: List[Document] = []
    seen_contents = set()

    for document in corpus:
        drop, annotations = _link_not_working_verdict(document, config.drop_link_not_working)
        if drop:
            report.link_not_working_removed += 1
            continue
        if len(annotations) != len(document.annotations):
            report.link_annotations_stripped += len(document.annotations) - len(annotations)
            document = Document(
                doc_id=document.doc_id,
                query_id=document.query_id,
                query_text=document.query_text,
                content=document.content,
                annotations=annotations,
                url=document.url,
            )

        stripped = document.content.strip()
        if not stripped:
            report.empty_removed += 1
            continue
        if token_count(document.content) > config.max_tokens:
            report.too_long_removed += 1
            continue
        if config.dedupe:
            if stripped in seen_contents:
                report.duplicates_removed += 1
                continue
            seen_contents.add(stripped)
        kept.append(document)

    report.final_size = len(kept)
    if report.is_empty:
        logger.warning("⚠️ Corpus vide après prétraitement")
    logger.info(
        f"📊 Prétraitement: {report.input_size} → {report.final_size} documents "
        f"(lien mort: {report.link_not_working_removed}, trop longs: {report.too_long_removed}, "
        f"doublons: {report.duplicates_removed}, vides: {report.empty_removed})"
    )
    return Corpus(documents=tuple(kept), provenance=corpus.provenance), report


# === Découpage train / val / test ===

def largest_remainder(total: int, fractions: Sequence[float]) -> List[int]:
    """Répartit `total` selon `fractions` par la méthode du plus fort reste."""
    quotas = [total * fraction for fraction in fractions]
    sizes = [int(math.floor(quota + FRACTION_TOLERANCE)) for quota in quotas]
    remainders = [round(quota - size, 9) for quota, size in zip(quotas, sizes)]
    leftover = total - sum(sizes)
    # à reste égal, la première part l'emporte
    order = sorted(range(len(fractions)), key=lambda i: (-remainders[i], i))
    for i in order[:max(leftover, 0)]:
        sizes[i] += 1
    return sizes


def _stratum_allocation(strata_sizes: List[int], fractions: Sequence[float], targets: List[int]) -> List[List[int]]:
    """Allocation par strate, chaque strate à ±1 de sa part proportionnelle,
    les totaux par part égaux aux `targets`."""
    n_parts = len(fractions)
    floors = []
    extras = []
    remainders = []
    for size in strata_sizes:
        quotas = [size * fraction for fraction in fractions]
        row = [int(math.floor(q + FRACTION_TOLERANCE)) for q in quotas]
        floors.append(row)
        extras.append(size - sum(row))
        remainders.append([round(q - f, 9) for q, f in zip(quotas, row)])

    allocation = [list(row) for row in floors]
    needs = [targets[p] - sum(row[p] for row in floors) for p in range(n_parts)]

    # remplissage glouton (Ryser): strates les plus chargées d'abord, parts les plus demandeuses
    for s in sorted(range(len(strata_sizes)), key=lambda i: (-extras[i], i)):
        for _ in range(extras[s]):
            candidates = [p for p in range(n_parts) if needs[p] > 0 and allocation[s][p] == floors[s][p]]
            if not candidates:
                candidates = [p for p in range(n_parts) if needs[p] > 0]
            part = max(candidates, key=lambda p: (needs[p], remainders[s][p], -p))
            allocation[s][part] += 1
            needs[part] -= 1
    return allocation


def split(corpus: Corpus, spec: SplitSpec = SplitSpec()) -> Tuple[Corpus, Corpus, Corpus]:
    """Découpe déterministe en train / validation / test, stratifiée par label majoritaire."""
    if len(corpus) == 0:
        raise SplitError("impossible de découper un corpus vide")

    # PCG64: algorithme fixé et documenté, indépendant de la plateforme
    rng = np.random.Generator(np.random.PCG64(spec.seed))

    strata: Dict[str, List[int]] = {}
    if spec.stratify_by_majority:
        from mpstance_perspectives import TiePolicy, Tie, majority_label
        policy = TiePolicy.discard()
        for position, document in enumerate(corpus.documents):
            retained = [label for label in document.labels if label.is_retained]
            verdict = majority_label(retained, policy) if retained else Tie.TIE
            key = verdict.value if isinstance(verdict, StanceLabel) else '__tie__'
            strata.setdefault(key, []).append(position)
    else:
        strata['__all__'] = list(range(len(corpus)))

    ordered_keys = sorted(strata)
    targets = largest_remainder(len(corpus), spec.fractions)
    allocation = _stratum_allocation([len(strata[k]) for k in ordered_keys], spec.fractions, targets)

    parts: List[List[int]] = [[], [], []]
    for key, counts in zip(ordered_keys, allocation):
        members = strata[key]
        shuffled = [members[i] for i in rng.permutation(len(members))]
        start = 0
        for part, count in enumerate(counts):
            parts[part].extend(shuffled[start:start + count])
            start += count

    pieces = tuple(
        Corpus(
            documents=tuple(corpus.documents[i] for i in sorted(positions)),
            provenance=f"{corpus.provenance}#{name}",
        )
        for name, positions in zip(('train', 'val', 'test'), parts)
    )
    logger.info(f"✅ Découpage seed={spec.seed}: train={len(pieces[0])}, val={len(pieces[1])}, test={len(pieces[2])}")
    return pieces