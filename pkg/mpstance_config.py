#!/usr/bin/env python3
"""
MPSTANCE - Configuration d'exécution
Fichier déclaratif unique (TOML ou JSON), surchargé par les options de ligne de commande
"""

import hashlib
import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

from mpstance_chunker import ChunkingConfig
from mpstance_corpus import CLASS_ORDER, LinkPolicy, PreprocessConfig, SplitSpec, StanceLabel
from mpstance_model import TrainConfig, TrainMode
from mpstance_perspectives import TiePolicy, TieRule

logger = logging.getLogger(__name__)

# Configuration
SECTIONS = ('paths', 'preprocess', 'split', 'perspectives', 'chunking', 'train', 'experiment')
MANIFEST_SUFFIX = '.manifest.json'

# subcommande -> max_tokens surchargé par --max-tokens
PREPROCESS_SUBCOMMANDS = {'ingest'}


class ConfigError(ValueError):
    """Fichier de configuration ou surcharge invalide."""


@dataclass(frozen=True)
class RunConfig:
    input: Optional[str] = None
    output: Optional[str] = None
    format: str = 'jsonl'
    preprocess: PreprocessConfig = PreprocessConfig()
    split: SplitSpec = SplitSpec()
    tie_policy: TiePolicy = TiePolicy()
    distinct_only: bool = False
    chunking: ChunkingConfig = ChunkingConfig()
    train: TrainConfig = TrainConfig()
    workers: int = 1

    def to_dict(self) -> Dict:
        """Configuration résolue, sans les chemins (couverts par l'empreinte des entrées)."""
        return {
            'format': self.format,
            'preprocess': {
                'max_tokens': self.preprocess.max_tokens,
                'drop_link_not_working': self.preprocess.drop_link_not_working.value,
                'dedupe': self.preprocess.dedupe,
            },
            'split': {
                'train_frac': self.split.train_frac,
                'val_frac': self.split.val_frac,
                'test_frac': self.split.test_frac,
                'seed': self.split.seed,
                'stratify_by_majority': self.split.stratify_by_majority,
            },
            'perspectives': {
                'tie_policy': self.tie_policy.to_dict(),
                'distinct_only': self.distinct_only,
            },
            'chunking': self.chunking.to_dict(),
            'train': self.train.to_dict(),
            'experiment': {'workers': self.workers},
        }

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode('utf-8')).hexdigest()


def _section(payload: Dict, name: str) -> Dict:
    value = payload.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"la section [{name}] doit être une table")
    return value


def _build(section: Dict, name: str, factory, converters: Dict[str, Any]):
    unknown = set(section) - set(converters)
    if unknown:
        raise ConfigError(f"clés inconnues dans [{name}]: {', '.join(sorted(unknown))}")
    try:
        return factory(**{key: converters[key](value) for key, value in section.items()})
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as e:
        raise ConfigError(f"[{name}] {e}") from None


def _tie_policy(section: Dict) -> TiePolicy:
    rule = section.get('tie_policy', TieRule.DISCARD.value)
    try:
        rule = TieRule(rule)
        precedence = tuple(StanceLabel.parse(label) for label in section.get('precedence', [l.value for l in CLASS_ORDER]))
        return TiePolicy(rule, precedence)
    except ValueError as e:
        raise ConfigError(f"[perspectives] {e}") from None


def _as_bool(value) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"booléen attendu (reçu {value!r})")
    return value


def config_from_dict(payload: Dict) -> RunConfig:
    unknown = set(payload) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"sections inconnues: {', '.join(sorted(unknown))}")

    paths = _section(payload, 'paths')
    unknown = set(paths) - {'input', 'output', 'format'}
    if unknown:
        raise ConfigError(f"clés inconnues dans [paths]: {', '.join(sorted(unknown))}")

    perspectives = _section(payload, 'perspectives')
    unknown = set(perspectives) - {'tie_policy', 'precedence', 'distinct_only'}
    if unknown:
        raise ConfigError(f"clés inconnues dans [perspectives]: {', '.join(sorted(unknown))}")

    experiment = _section(payload, 'experiment')
    workers = int(experiment.get('workers', 1))
    if workers < 1:
        raise ConfigError(f"[experiment] workers doit être ≥ 1 (reçu {workers})")

    return RunConfig(
        input=paths.get('input'),
        output=paths.get('output'),
        format=paths.get('format', 'jsonl'),
        preprocess=_build(_section(payload, 'preprocess'), 'preprocess', PreprocessConfig, {
            'max_tokens': int, 'drop_link_not_working': LinkPolicy, 'dedupe': _as_bool,
        }),
        split=_build(_section(payload, 'split'), 'split', SplitSpec, {
            'train_frac': float, 'val_frac': float, 'test_frac': float, 'seed': int,
            'stratify_by_majority': _as_bool,
        }),
        tie_policy=_tie_policy(perspectives),
        distinct_only=_as_bool(perspectives.get('distinct_only', False)),
        chunking=_build(_section(payload, 'chunking'), 'chunking', ChunkingConfig, {
            'max_tokens': int, 'overlap_sentences': int, 'enabled': _as_bool,
        }),
        train=_build(_section(payload, 'train'), 'train', TrainConfig, {
            'epochs': int, 'batch_size': int, 'learning_rate': float, 'l2': float, 'seed': int,
            'mode': TrainMode,
        }),
        workers=workers,
    )


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """Charge un fichier .toml ou .json."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"fichier de configuration introuvable: {path}")
    try:
        if path.suffix == '.toml':
            with open(path, 'rb') as f:
                payload = tomllib.load(f)
        elif path.suffix == '.json':
            with open(path, 'r', encoding='utf-8') as f:
                payload = json.load(f)
        else:
            raise ConfigError(f"extension de configuration non supportée: {path.suffix} (.toml ou .json)")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: TOML invalide: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: JSON invalide ligne {e.lineno}: {e.msg}") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: objet de configuration attendu")

    config = config_from_dict(payload)
    logger.info(f"✅ Configuration chargée depuis {path}")
    return config


def apply_overrides(config: RunConfig, subcommand: str, overrides: Dict[str, Any]) -> RunConfig:
    """Applique les options de ligne de commande; None signifie « non fourni »."""
    def given(key):
        return overrides.get(key) is not None

    try:
        if given('input'):
            config = replace(config, input=overrides['input'])
        if given('output'):
            config = replace(config, output=overrides['output'])
        if given('format'):
            config = replace(config, format=overrides['format'])
        if given('seed'):
            seed = int(overrides['seed'])
            config = replace(config, split=replace(config.split, seed=seed), train=replace(config.train, seed=seed))
        if given('max_tokens'):
            if subcommand in PREPROCESS_SUBCOMMANDS:
                config = replace(config, preprocess=replace(config.preprocess, max_tokens=overrides['max_tokens']))
            else:
                config = replace(config, chunking=replace(config.chunking, max_tokens=overrides['max_tokens']))
        if given('overlap_sentences'):
            config = replace(config, chunking=replace(config.chunking, overlap_sentences=overrides['overlap_sentences']))
        if overrides.get('no_chunking'):
            config = replace(config, chunking=replace(config.chunking, enabled=False))
        if given('tie_policy'):
            config = replace(config, tie_policy=TiePolicy(TieRule(overrides['tie_policy']), config.tie_policy.precedence))
        if overrides.get('distinct_only'):
            config = replace(config, distinct_only=True)
        if given('epochs'):
            config = replace(config, train=replace(config.train, epochs=overrides['epochs']))
        if given('batch_size'):
            config = replace(config, train=replace(config.train, batch_size=overrides['batch_size']))
        if overrides.get('full_batch'):
            config = replace(config, train=replace(config.train, mode=TrainMode.FULL_BATCH))
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"option invalide: {e}") from None
    return config


def resolve_run_config(subcommand: str, config_path: Optional[str] = None,
                       overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    config = load_run_config(config_path) if config_path else RunConfig()
    return apply_overrides(config, subcommand, overrides or {})


def inputs_hash(paths: Iterable[Union[str, Path]]) -> str:
    """SHA-256 du contenu des fichiers d'entrée, dans l'ordre donné."""
    digest = hashlib.sha256()
    for path in paths:
        with open(path, 'rb') as f:
            for block in iter(lambda: f.read(1 << 20), b''):
                digest.update(block)
        digest.update(b'\0')
    return digest.hexdigest()


def provenance(config: RunConfig, inputs: Iterable[Union[str, Path]]) -> Dict:
    """Bloc embarqué dans chaque artefact: configuration résolue + empreinte des entrées."""
    return {
        'run_config': config.to_dict(),
        'config_sha256': config.fingerprint(),
        'inputs_sha256': inputs_hash(inputs),
    }


def manifest_path(output: Union[str, Path]) -> Path:
    output = Path(output)
    return output.with_name(output.name + MANIFEST_SUFFIX)


def write_manifest(output: Union[str, Path], config: RunConfig, inputs: Iterable[Union[str, Path]],
                   summary: Optional[Dict] = None) -> Path:
    """Fichier compagnon <output>.manifest.json des sorties JSON-lines."""
    payload = provenance(config, inputs)
    if summary:
        payload['summary'] = summary
    path = manifest_path(output)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + '\n')
    logger.info(f"💾 Manifeste écrit dans {path}")
    return path
