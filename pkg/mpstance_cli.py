#!/usr/bin/env python3
"""
MPSTANCE - Interface en ligne de commande
Chaîne complète: ingestion, statistiques, découpage, jeux d'entraînement,
chunking, entraînement, prédiction, évaluation et expérience
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from mpstance_agreement import agreement_report, disagreement_level, label_distributions
from mpstance_chunker import chunk_documents, save_chunks
from mpstance_config import RunConfig, provenance, resolve_run_config, write_manifest
from mpstance_corpus import SUPPORTED_FORMATS, CorpusError, load_corpus, preprocess, save_corpus, split
from mpstance_evaluation import evaluate
from mpstance_experiment import run_experiment
from mpstance_graphics_generator import MpstanceGraphicsGenerator
from mpstance_model import (
    fit_feature_space, import_external_predictions, load_model, predict_corpus, save_model,
    save_predictions, train, write_predictions,
)
from mpstance_perspectives import build_baseline_dataset, disaggregate, gold_labels, save_instances
from mpstance_report_assembler import MpstanceReportAssembler

logger = logging.getLogger(__name__)

SUBCOMMANDS = ('ingest', 'stats', 'split', 'build', 'chunk', 'train', 'predict', 'eval', 'experiment')
APPROACHES = ('baseline', 'multi-perspective')

EXIT_OK = 0
EXIT_DATA_ERROR = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Option requise manquante."""


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--input', type=str, help='Corpus ou fichier d\'entrée')
    common.add_argument('--output', type=str, help='Fichier ou répertoire de sortie')
    common.add_argument('--config', type=str, help='Configuration déclarative (.toml ou .json)')
    common.add_argument('--format', choices=SUPPORTED_FORMATS, help='Format du corpus')
    common.add_argument('--seed', type=int, help='Graine du découpage et de l\'entraînement')
    common.add_argument('--max-tokens', type=int, dest='max_tokens',
                        help='Longueur maximale (prétraitement pour ingest, chunks ailleurs)')
    common.add_argument('--overlap-sentences', type=int, dest='overlap_sentences',
                        help='Phrases de recouvrement entre chunks')
    common.add_argument('--no-chunking', action='store_true', dest='no_chunking',
                        help='Tronquer au lieu de découper')
    common.add_argument('--tie-policy', choices=('discard', 'precedence', 'error'), dest='tie_policy',
                        help='Traitement des égalités de vote')
    common.add_argument('--distinct-only', action='store_true', dest='distinct_only',
                        help='Une instance par label distinct et par document')
    common.add_argument('--epochs', type=int, help='Nombre d\'epochs')
    common.add_argument('--batch-size', type=int, dest='batch_size', help='Taille de mini-batch')
    common.add_argument('--full-batch', action='store_true', dest='full_batch',
                        help='Descente de gradient full-batch')
    common.add_argument('--external-preds', type=str, dest='external_preds',
                        help='Prédictions externes JSON-lines {doc_id, probs}')
    common.add_argument('--model', type=str, help='Modèle entraîné (predict)')
    common.add_argument('--eval', type=str, dest='eval_corpus', help='Corpus de référence pour l\'évaluation')
    common.add_argument('--approach', choices=APPROACHES, default='baseline',
                        help='Jeu d\'entraînement (build, train)')
    common.add_argument('--html', action='store_true', help='Rendu HTML du rapport (experiment)')
    common.add_argument('--verbose', action='store_true', help='Logs DEBUG')

    parser = argparse.ArgumentParser(
        prog='mpstance', description='MPSTANCE - Classification de position multi-perspective'
    )
    subparsers = parser.add_subparsers(dest='command', required=True)
    descriptions = {
        'ingest': 'Charger et prétraiter un corpus',
        'stats': 'Accord inter-annotateurs et distributions de labels',
        'split': 'Découpage train / validation / test',
        'build': 'Construire un jeu d\'entraînement baseline ou multi-perspective',
        'chunk': 'Découper les documents en chunks',
        'train': 'Entraîner le classifieur natif',
        'predict': 'Prédire avec le modèle natif ou importer des prédictions externes',
        'eval': 'Évaluer des prédictions contre des labels majoritaires',
        'experiment': 'Grille complète Baseline / Multi-Perspective × chunking',
    }
    for name in SUBCOMMANDS:
        subparsers.add_parser(name, parents=[common], help=descriptions[name], description=descriptions[name])
    return parser


def _write_json(payload: Dict, path: Optional[str]):
    text = json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + '\n'
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding='utf-8')
        logger.info(f"💾 Résultat écrit dans {path}")
    else:
        sys.stdout.write(text)


def _require(value: Optional[str], flag: str, command: str) -> str:
    if not value:
        raise UsageError(f"{command}: {flag} est requis")
    return value


def _load(config: RunConfig, command: str):
    path = _require(config.input, '--input', command)
    return path, load_corpus(path, config.format)


def _instances(corpus, config: RunConfig, approach: str):
    if approach == 'baseline':
        instances, _ = build_baseline_dataset(corpus, config.tie_policy)
        return instances
    return disaggregate(corpus, config.distinct_only)


# === Sous-commandes ===

def cmd_ingest(config: RunConfig, args) -> int:
    path, corpus = _load(config, 'ingest')
    cleaned, report = preprocess(corpus, config.preprocess)
    for key, value in report.to_dict().items():
        logger.info(f"   • {key}: {value}")
    if config.output:
        save_corpus(cleaned, config.output, config.format)
        write_manifest(config.output, config, [path], summary=report.to_dict())
    else:
        _write_json(report.to_dict(), None)
    return EXIT_OK


def cmd_stats(config: RunConfig, args) -> int:
    path, corpus = _load(config, 'stats')
    agreement = agreement_report(corpus)
    distributions = label_distributions(corpus, config.tie_policy)
    for line in agreement.to_table().splitlines():
        logger.info(line)

    payload = {
        'agreement': agreement.to_dict(),
        'label_distributions': json.loads(distributions.to_json(orient='records')),
        'provenance': provenance(config, [path]),
    }
    _write_json(payload, config.output)
    if config.output:
        charts_dir = Path(config.output).parent / 'mpstance_charts'
        MpstanceGraphicsGenerator(str(charts_dir)).create_label_distribution_chart(distributions, Path(path).stem)
    return EXIT_OK


def cmd_split(config: RunConfig, args) -> int:
    path, corpus = _load(config, 'split')
    output_dir = Path(_require(config.output, '--output', 'split'))
    output_dir.mkdir(parents=True, exist_ok=True)
    for name, piece in zip(('train', 'val', 'test'), split(corpus, config.split)):
        target = output_dir / f"{name}.{config.format}"
        save_corpus(piece, target, config.format)
        write_manifest(target, config, [path], summary={'split': name, 'size': len(piece)})
    return EXIT_OK


def cmd_build(config: RunConfig, args) -> int:
    path, corpus = _load(config, 'build')
    output = _require(config.output, '--output', 'build')
    instances = _instances(corpus, config, args.approach)
    save_instances(instances, output)
    write_manifest(output, config, [path], summary={'approach': args.approach, 'instances': len(instances)})
    return EXIT_OK


def cmd_chunk(config: RunConfig, args) -> int:
    path, corpus = _load(config, 'chunk')
    output = _require(config.output, '--output', 'chunk')
    records = chunk_documents(corpus, config.chunking)
    save_chunks(records, output)
    write_manifest(output, config, [path], summary={'chunks': len(records)})
    return EXIT_OK


def cmd_train(config: RunConfig, args) -> int:
    path, corpus = _load(config, 'train')
    output = _require(config.output, '--output', 'train')
    instances = _instances(corpus, config, args.approach)
    space = fit_feature_space(list(dict.fromkeys(document.content for document in corpus)))

    inputs = [path]
    validation = None
    if args.eval_corpus:
        validation = _instances(load_corpus(args.eval_corpus, config.format), config, args.approach)
        inputs.append(args.eval_corpus)

    model = train(instances, space, config.train, chunking=config.chunking, validation=validation)
    extra = provenance(config, inputs)
    extra['approach'] = args.approach
    save_model(model, space, output, extra=extra)
    return EXIT_OK


def _evaluate_against(predictions, gold_path: str, config: RunConfig):
    gold_corpus = load_corpus(gold_path, config.format)
    gold, ties = gold_labels(gold_corpus, config.tie_policy)
    discarded = set(ties.discarded)
    evaluated = [p for p in predictions if p.doc_id not in discarded]
    if len(evaluated) < len(predictions):
        logger.warning(f"⚠️ {len(predictions) - len(evaluated)} prédictions ignorées (égalité de vote dans la référence)")
    levels = {d.doc_id: disagreement_level(d.labels) for d in gold_corpus if all(l.is_retained for l in d.labels)}
    queries = {d.doc_id: d.query_id for d in gold_corpus}
    return evaluate(evaluated, gold, levels=levels, queries=queries)


def cmd_predict(config: RunConfig, args) -> int:
    inputs: List[str] = []
    if args.external_preds:
        predictions = import_external_predictions(args.external_preds)
        inputs.append(args.external_preds)
    else:
        model_path = _require(args.model, '--model', 'predict')
        path, corpus = _load(config, 'predict')
        model, space = load_model(model_path)
        predictions = predict_corpus(model, space, corpus, config.chunking)
        inputs += [model_path, path]

    if config.output:
        save_predictions(predictions, config.output)
        write_manifest(config.output, config, inputs, summary={'predictions': len(predictions)})
    elif not args.eval_corpus:
        # sans --output ni --eval, les prédictions partent sur stdout
        write_predictions(predictions, sys.stdout)

    if args.eval_corpus:
        result = _evaluate_against(predictions, args.eval_corpus, config)
        payload = {'result': result.to_dict(), 'provenance': provenance(config, inputs + [args.eval_corpus])}
        _write_json(payload, None)
    return EXIT_OK


def cmd_eval(config: RunConfig, args) -> int:
    predictions_path = args.external_preds or _require(config.input, '--input', 'eval')
    gold_path = _require(args.eval_corpus, '--eval', 'eval')
    predictions = import_external_predictions(predictions_path)
    result = _evaluate_against(predictions, gold_path, config)
    payload = {'result': result.to_dict(), 'provenance': provenance(config, [predictions_path, gold_path])}
    _write_json(payload, config.output)
    return EXIT_OK


def cmd_experiment(config: RunConfig, args) -> int:
    path, corpus = _load(config, 'experiment')
    cleaned, preprocess_report = preprocess(corpus, config.preprocess)
    if preprocess_report.is_empty:
        raise CorpusError("corpus vide après prétraitement")

    report = run_experiment(
        cleaned, config.split, config.tie_policy, config.chunking, config.train,
        distinct_only=config.distinct_only, run_config=provenance(config, [path]), workers=config.workers,
    )
    if not config.output:
        sys.stdout.write(report.to_json())
        return EXIT_OK

    output = Path(config.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(report.to_json(), encoding='utf-8')
    output.with_suffix('.txt').write_text(report.render_table(), encoding='utf-8')
    logger.info(f"💾 Rapport JSON écrit dans {output}")

    graphics = MpstanceGraphicsGenerator(str(output.parent / 'mpstance_charts'))
    charts = graphics.create_experiment_dashboard(report, label_distributions(cleaned, config.tie_policy))
    assembler = MpstanceReportAssembler()
    content = assembler.assemble_report(
        report, agreement_report(cleaned), graphics.generate_chart_markdown_integration(charts)
    )
    assembler.save_report(content, output.with_suffix('.md'), html=args.html)
    return EXIT_OK


COMMANDS = {
    'ingest': cmd_ingest,
    'stats': cmd_stats,
    'split': cmd_split,
    'build': cmd_build,
    'chunk': cmd_chunk,
    'train': cmd_train,
    'predict': cmd_predict,
    'eval': cmd_eval,
    'experiment': cmd_experiment,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Point d'entrée principal; renvoie le code de sortie."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
    )
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    overrides = {key: getattr(args, key) for key in (
        'input', 'output', 'format', 'seed', 'max_tokens', 'overlap_sentences', 'no_chunking',
        'tie_policy', 'distinct_only', 'epochs', 'batch_size', 'full_batch',
    )}
    try:
        config = resolve_run_config(args.command, args.config, overrides)
        return COMMANDS[args.command](config, args)
    except UsageError as e:
        logger.error(f"❌ {e}")
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        logger.info("⏹️ Interrompu par l'utilisateur")
        return EXIT_DATA_ERROR
    except (ValueError, OSError) as e:
        logger.error(f"❌ {e}")
        return EXIT_DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
