#!/usr/bin/env python3
"""
MPSTANCE - Orchestrateur d'expérience
Grille Baseline / Multi-perspective × chunking oui / non sur un test set unique
à labels majoritaires
"""

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from threading import Lock
from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum
from typing import Dict, List, Optional, Tuple

from mpstance_agreement import DisagreementLevel, disagreement_level
from mpstance_chunker import ChunkingConfig
from mpstance_corpus import Corpus, SplitSpec, corpus_fingerprint, split
from mpstance_evaluation import EvalResult, EvaluationError, evaluate
from mpstance_model import (
    FeatureSpace, LinearModel, Prediction, TrainConfig, fit_feature_space, predict_corpus, train,
)
from mpstance_perspectives import TiePolicy, build_baseline_dataset, disaggregate, gold_labels

logger = logging.getLogger(__name__)

# Configuration
NATIVE_MODEL_NAME = 'TF-IDF LogReg'
TABLE_COLUMNS = ('Approach', 'Model', 'Chunking', 'Acc.', 'Prec.', 'Rec.', 'F1', 'Avg. Conf.')


class Approach(str, Enum):
    BASELINE = 'Baseline'
    MULTI_PERSPECTIVE = 'Multi-Perspective'


def _fingerprint(payload) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, ensure_ascii=False).encode('utf-8')).hexdigest()


@dataclass
class ExperimentCell:
    approach: Approach
    chunking: bool
    result: EvalResult
    predictions: List[Prediction]
    test_fingerprint: str
    model_name: str = NATIVE_MODEL_NAME
    n_train_instances: int = 0
    n_val_instances: int = 0
    final_val_loss: Optional[float] = None

    @property
    def key(self) -> Tuple[str, str]:
        return self.approach.value, 'yes' if self.chunking else 'no'

    def to_dict(self) -> Dict:
        return {
            'approach': self.approach.value,
            'model': self.model_name,
            'chunking': 'yes' if self.chunking else 'no',
            'n_train_instances': self.n_train_instances,
            'n_val_instances': self.n_val_instances,
            'final_val_loss': self.final_val_loss,
            'test_fingerprint': self.test_fingerprint,
            'result': self.result.to_dict(),
        }


@dataclass
class ExperimentReport:
    cells: Dict[Tuple[str, str], ExperimentCell]
    fingerprints: Dict[str, str]
    split_sizes: Dict[str, int]
    test_ties: Dict = field(default_factory=dict)
    run_config: Dict = field(default_factory=dict)

    def ordered_cells(self) -> List[ExperimentCell]:
        order = [(approach.value, chunking) for approach in Approach for chunking in ('no', 'yes')]
        return [self.cells[key] for key in order if key in self.cells]

    def to_dict(self) -> Dict:
        return {
            'run_config': self.run_config,
            'fingerprints': dict(sorted(self.fingerprints.items())),
            'split_sizes': self.split_sizes,
            'test_ties': self.test_ties,
            'cells': [cell.to_dict() for cell in self.ordered_cells()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + '\n'

    def render_table(self) -> str:
        """Tableau texte aligné: Approach | Model | Chunking | Acc. | Prec. | Rec. | F1 | Avg. Conf."""
        return render_results_table([
            (cell.approach.value, cell.model_name, 'yes' if cell.chunking else 'no', cell.result)
            for cell in self.ordered_cells()
        ])


def render_results_table(rows: List[Tuple[str, str, str, EvalResult]]) -> str:
    body = [
        [approach, model, chunking,
         f"{result.accuracy:.2f}", f"{result.precision:.2f}", f"{result.recall:.2f}",
         f"{result.f1:.2f}", f"{result.avg_confidence:.2f}"]
        for approach, model, chunking, result in rows
    ]
    widths = [max(len(row[i]) for row in [list(TABLE_COLUMNS)] + body) for i in range(len(TABLE_COLUMNS))]

    def line(cells):
        return ' | '.join(
            cell.ljust(width) if i < 3 else cell.rjust(width) for i, (cell, width) in enumerate(zip(cells, widths))
        ).rstrip()

    separator = '-+-'.join('-' * width for width in widths)
    return '\n'.join([line(TABLE_COLUMNS), separator] + [line(row) for row in body]) + '\n'


class StanceExperimentRunner:
    """Orchestrateur de la grille d'expérience."""

    def __init__(self, split_spec: SplitSpec = SplitSpec(), tie_policy: TiePolicy = TiePolicy(),
                 chunking: ChunkingConfig = ChunkingConfig(), train_config: TrainConfig = TrainConfig(),
                 distinct_only: bool = False, workers: int = 1):
        self.split_spec = split_spec
        self.tie_policy = tie_policy
        self.chunking = chunking
        self.train_config = train_config
        self.distinct_only = distinct_only
        self.workers = max(1, workers)
        self.stats = {
            'cells_completed': 0,
            'cells_failed': 0,
            'start_time': None,
            'errors': [],
        }
        self._stats_lock = Lock()

        logger.info("🚀 Initialisation de l'expérience multi-perspective")

    def chunking_settings(self) -> Dict[bool, ChunkingConfig]:
        return {
            False: replace(self.chunking, enabled=False),
            True: replace(self.chunking, enabled=True),
        }

    def process_cell(self, approach: Approach, chunking: ChunkingConfig, space: FeatureSpace,
                     train_sets: Dict[Approach, list], val_sets: Dict[Approach, list],
                     test: Corpus, gold: Dict, levels: Dict, queries: Dict,
                     test_fingerprint: str) -> ExperimentCell:
        """Entraîne et évalue une cellule de la grille."""
        label = f"{approach.value} / chunking {'yes' if chunking.enabled else 'no'}"
        logger.info(f"🎯 [{label}] Entraînement...")
        model: LinearModel = train(
            train_sets[approach], space, self.train_config, chunking=chunking, validation=val_sets[approach]
        )
        predictions = predict_corpus(model, space, [d for d in test if d.doc_id in gold], chunking)
        result = evaluate(predictions, gold, levels=levels, queries=queries)
        logger.info(f"✅ [{label}] F1 {result.f1:.2f}, confiance {result.avg_confidence:.2f}")
        return ExperimentCell(
            approach=approach,
            chunking=chunking.enabled,
            result=result,
            predictions=predictions,
            test_fingerprint=test_fingerprint,
            n_train_instances=len(train_sets[approach]),
            n_val_instances=len(val_sets[approach]),
            final_val_loss=model.history[-1].val_loss if model.history else None,
        )

    def run(self, corpus: Corpus, run_config: Optional[Dict] = None) -> ExperimentReport:
        self.stats['start_time'] = datetime.now()

        logger.info("=" * 80)
        logger.info("🚀 EXPÉRIENCE - Baseline vs Multi-perspective × chunking")
        logger.info("=" * 80)

        train_corpus, val_corpus, test_corpus = split(corpus, self.split_spec)

        # un seul espace de features, appris sur les contenus distincts du train
        space = fit_feature_space(list(dict.fromkeys(document.content for document in train_corpus)))

        baseline_train, _ = build_baseline_dataset(train_corpus, self.tie_policy)
        baseline_val, _ = build_baseline_dataset(val_corpus, self.tie_policy)
        train_sets = {
            Approach.BASELINE: baseline_train,
            Approach.MULTI_PERSPECTIVE: disaggregate(train_corpus, self.distinct_only),
        }
        val_sets = {
            Approach.BASELINE: baseline_val,
            Approach.MULTI_PERSPECTIVE: disaggregate(val_corpus, self.distinct_only),
        }

        # test toujours à labels majoritaires
        gold, tie_report = gold_labels(test_corpus, self.tie_policy)
        if tie_report.n_ties:
            logger.warning(f"⚠️ Test set: {len(tie_report.discarded)} documents écartés, "
                           f"{len(tie_report.coerced)} départagés")
        if not gold:
            raise EvaluationError("aucun document de test évaluable après vote majoritaire")
        levels = {document.doc_id: disagreement_level(document.labels) for document in test_corpus}
        queries = {document.doc_id: document.query_id for document in test_corpus}
        test_fingerprint = _fingerprint({
            'corpus': corpus_fingerprint(test_corpus),
            'gold': {doc_id: label.value for doc_id, label in sorted(gold.items())},
        })

        jobs = [(approach, setting) for approach in Approach for setting in self.chunking_settings().values()]
        cells: Dict[Tuple[str, str], ExperimentCell] = {}

        def submit(job):
            approach, setting = job
            return self.process_cell(approach, setting, space, train_sets, val_sets,
                                     test_corpus, gold, levels, queries, test_fingerprint)

        if self.workers == 1:
            for job in jobs:
                cell = self._guarded(submit, job)
                cells[cell.key] = cell
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                futures = {executor.submit(self._guarded, submit, job): job for job in jobs}
                for future in as_completed(futures):
                    cell = future.result()
                    cells[cell.key] = cell

        fingerprints = {cell.test_fingerprint for cell in cells.values()}
        if len(fingerprints) != 1:
            raise EvaluationError("les cellules doivent partager le même test set")

        report = ExperimentReport(
            cells=cells,
            fingerprints={
                'corpus': corpus_fingerprint(corpus),
                'test_set': test_fingerprint,
                'config': _fingerprint(run_config or {}),
            },
            split_sizes={'train': len(train_corpus), 'val': len(val_corpus), 'test': len(test_corpus),
                         'test_evaluated': len(gold)},
            test_ties=tie_report.to_dict(),
            run_config=run_config or {},
        )
        self.print_final_summary(report)
        return report

    def _guarded(self, submit, job) -> ExperimentCell:
        try:
            cell = submit(job)
            with self._stats_lock:
                self.stats['cells_completed'] += 1
            return cell
        except Exception as e:
            approach, setting = job
            with self._stats_lock:
                self.stats['cells_failed'] += 1
                self.stats['errors'].append(f"{approach.value}/{setting.enabled}: {e}")
            logger.error(f"❌ Échec cellule {approach.value} (chunking={setting.enabled}): {e}")
            raise

    def print_final_summary(self, report: ExperimentReport):
        duration = (datetime.now() - self.stats['start_time']).total_seconds()

        logger.info("=" * 80)
        logger.info("📊 EXPÉRIENCE - RÉSUMÉ FINAL")
        logger.info("=" * 80)
        logger.info(f"⏱️ Durée totale: {duration:.1f} secondes")
        logger.info(f"✅ Cellules réussies: {self.stats['cells_completed']}")
        logger.info(f"📂 Découpage: {report.split_sizes}")
        for line in report.render_table().splitlines():
            logger.info(line)

        for cell in report.ordered_cells():
            breakdown = ', '.join(
                f"{level} {summary.avg_confidence:.2f} (n={summary.n_docs})"
                for level, summary in cell.result.per_level.items()
            )
            logger.info(f"   • {cell.approach.value} / {'yes' if cell.chunking else 'no'}: confiance par niveau: {breakdown}")


def run_experiment(corpus: Corpus, split_spec: SplitSpec = SplitSpec(), tie_policy: TiePolicy = TiePolicy(),
                   chunking: ChunkingConfig = ChunkingConfig(), train_config: TrainConfig = TrainConfig(),
                   distinct_only: bool = False, run_config: Optional[Dict] = None,
                   workers: int = 1) -> ExperimentReport:
    """Exécute la grille complète sur un corpus prétraité."""
    runner = StanceExperimentRunner(split_spec, tie_policy, chunking, train_config, distinct_only, workers)
    return runner.run(corpus, run_config)


def level_confidence(report: ExperimentReport, level: DisagreementLevel) -> Dict[Tuple[str, str], float]:
    """Confiance moyenne des documents de test d'un niveau de désaccord, par cellule."""
    return {
        key: cell.result.per_level[level.value].avg_confidence
        for key, cell in report.cells.items() if level.value in cell.result.per_level
    }
