import json

import pytest

from mpstance_agreement import DisagreementLevel
from mpstance_chunker import ChunkingConfig
from mpstance_corpus import Corpus, SplitSpec
from mpstance_evaluation import EvaluationError
from mpstance_experiment import TABLE_COLUMNS, Approach, StanceExperimentRunner, level_confidence, run_experiment
from mpstance_model import TrainConfig, TrainMode
from mpstance_perspectives import TiePolicy
from synthetic import make_corpus

FAST = TrainConfig(epochs=3, learning_rate=0.5)
SMALL_CHUNKS = ChunkingConfig(max_tokens=20, overlap_sentences=1)


def test_report_is_deterministic(synthetic_corpus):
    first = run_experiment(synthetic_corpus, chunking=SMALL_CHUNKS, train_config=FAST, run_config={'seed': 42})
    second = run_experiment(synthetic_corpus, chunking=SMALL_CHUNKS, train_config=FAST, run_config={'seed': 42})
    assert first.to_json() == second.to_json()
    payload = json.loads(first.to_json())
    assert [(c['approach'], c['chunking']) for c in payload['cells']] == [
        ('Baseline', 'no'), ('Baseline', 'yes'), ('Multi-Perspective', 'no'), ('Multi-Perspective', 'yes'),
    ]


def test_parallel_cells_match_serial(synthetic_corpus):
    serial = run_experiment(synthetic_corpus, chunking=SMALL_CHUNKS, train_config=FAST)
    parallel = run_experiment(synthetic_corpus, chunking=SMALL_CHUNKS, train_config=FAST, workers=2)
    assert parallel.to_json() == serial.to_json()


def test_parallel_runner_counts_every_cell(synthetic_corpus):
    runner = StanceExperimentRunner(SplitSpec(), TiePolicy(), SMALL_CHUNKS, FAST, workers=4)
    runner.run(synthetic_corpus)
    assert runner.stats['cells_completed'] == 4
    assert runner.stats['cells_failed'] == 0


def test_cells_share_one_test_set(synthetic_corpus):
    report = run_experiment(synthetic_corpus, train_config=FAST)
    assert len(report.cells) == 4
    assert {cell.test_fingerprint for cell in report.cells.values()} == {report.fingerprints['test_set']}
    assert {cell.result.n_docs for cell in report.cells.values()} == {report.split_sizes['test_evaluated']}
    assert report.split_sizes['train'] + report.split_sizes['val'] + report.split_sizes['test'] == len(synthetic_corpus)
    assert report.split_sizes['test_evaluated'] == report.split_sizes['test'] - len(report.test_ties['discarded'])


def test_multi_perspective_trains_on_every_annotation(synthetic_corpus):
    report = run_experiment(synthetic_corpus, train_config=FAST)
    baseline = report.cells[(Approach.BASELINE.value, 'no')]
    multi = report.cells[(Approach.MULTI_PERSPECTIVE.value, 'no')]
    assert multi.n_train_instances == 3 * report.split_sizes['train']
    assert baseline.n_train_instances <= report.split_sizes['train']


@pytest.mark.parametrize('chunking', ['no', 'yes'])
def test_unanimous_corpus_approaches_coincide(unanimous_corpus, chunking):
    config = TrainConfig(epochs=5, learning_rate=1.0, mode=TrainMode.FULL_BATCH)
    report = run_experiment(unanimous_corpus, chunking=SMALL_CHUNKS, train_config=config)
    baseline = report.cells[(Approach.BASELINE.value, chunking)]
    multi = report.cells[(Approach.MULTI_PERSPECTIVE.value, chunking)]
    assert [p.to_dict() for p in multi.predictions] == [p.to_dict() for p in baseline.predictions]
    assert multi.result.to_dict() == baseline.result.to_dict()
    assert multi.final_val_loss == baseline.final_val_loss


def test_smoke_planted_signal():
    corpus = make_corpus(600, seed=1)
    report = run_experiment(
        corpus,
        split_spec=SplitSpec(seed=42),
        chunking=SMALL_CHUNKS,
        train_config=TrainConfig(epochs=10, learning_rate=1.0),
    )
    unanimous = level_confidence(report, DisagreementLevel.UNANIMOUS)
    majority = level_confidence(report, DisagreementLevel.MAJORITY)
    for key, cell in report.cells.items():
        assert cell.result.f1 >= 80.0, key
        assert unanimous[key] >= majority[key], key


def test_render_table_layout(synthetic_corpus):
    report = run_experiment(synthetic_corpus, train_config=FAST)
    lines = report.render_table().splitlines()
    assert len(lines) == 6
    assert [cell.strip() for cell in lines[0].split(' | ')] == list(TABLE_COLUMNS)
    assert set(lines[1]) <= {'-', '+'}
    for row in lines[2:]:
        cells = [cell.strip() for cell in row.split(' | ')]
        assert len(cells) == 8
        assert cells[2] in {'yes', 'no'}
        assert all(len(value.split('.')[1]) == 2 for value in cells[3:])


def test_empty_test_set_rejected(document_factory):
    corpus = Corpus(tuple(document_factory(f'd{i}', ['pro', 'neutral', 'against'], content=f'Text {i}.')
                          for i in range(10)))
    with pytest.raises(EvaluationError):
        run_experiment(corpus, train_config=FAST)
