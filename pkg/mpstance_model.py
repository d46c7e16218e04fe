#!/usr/bin/env python3
"""
MPSTANCE - Classifieur de stance
TF-IDF + régression logistique multinomiale entraînée par descente de gradient,
inférence par chunk, agrégation pondérée par la longueur des chunks et import de
prédictions externes (BERT, RoBERTa...)
"""

import json
import logging
import string
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
from scipy import sparse
from sklearn.feature_extraction.text import TfidfVectorizer

from mpstance_chunker import Chunk, ChunkingConfig, chunk_document
from mpstance_corpus import CLASS_ORDER, StanceLabel

logger = logging.getLogger(__name__)

# Configuration
FORMAT_VERSION = 1
DEFAULT_EPOCHS = 4
DEFAULT_BATCH_SIZE = 32
DEFAULT_LEARNING_RATE = 0.1
DEFAULT_L2 = 1e-4
DEFAULT_SEED = 42
SIMPLEX_TOLERANCE = 1e-6
GRADIENT_BLOCK_ROWS = 256
N_CLASSES = len(CLASS_ORDER)
CLASS_INDEX = {label: index for index, label in enumerate(CLASS_ORDER)}


class ModelError(ValueError):
    """Erreur d'entraînement, d'inférence ou de sérialisation du modèle."""


class ExternalPredictionError(ModelError):
    """Fichier de prédictions externes invalide."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"[ligne {line}] {message}" if line is not None else message)


# === Espace de features TF-IDF ===

def extract_terms(text: str) -> List[str]:
    """Termes en minuscules, ponctuation retirée en bordure."""
    terms = []
    for token in text.lower().split():
        term = token.strip(string.punctuation)
        if term:
            terms.append(term)
    return terms


def _vectorizer(vocabulary: Optional[Dict[str, int]] = None) -> TfidfVectorizer:
    # idf lissé = ln((1+N)/(1+df)) + 1, tf brut, norme L2
    return TfidfVectorizer(
        tokenizer=extract_terms, lowercase=False, token_pattern=None,
        smooth_idf=True, sublinear_tf=False, norm='l2', vocabulary=vocabulary,
    )


class FeatureSpace:
    """Vocabulaire (ordre lexicographique) et idf portés par un TfidfVectorizer ajusté."""

    def __init__(self, vectorizer: TfidfVectorizer):
        self.vectorizer = vectorizer

    @classmethod
    def from_terms(cls, terms: Sequence[str], idf) -> 'FeatureSpace':
        idf = np.asarray(idf, dtype=np.float64)
        if len(terms) != len(idf):
            raise ModelError(f"{len(terms)} termes pour {len(idf)} valeurs d'idf")
        vectorizer = _vectorizer({term: i for i, term in enumerate(terms)})
        vectorizer.idf_ = idf
        return cls(vectorizer)

    @property
    def vocabulary(self) -> Dict[str, int]:
        return {term: int(index) for term, index in self.vectorizer.vocabulary_.items()}

    @property
    def idf(self) -> np.ndarray:
        return np.asarray(self.vectorizer.idf_, dtype=np.float64)

    @property
    def size(self) -> int:
        return len(self.vectorizer.vocabulary_)

    def transform(self, texts: Sequence[str]) -> sparse.csr_matrix:
        """Matrice creuse CSR, une ligne tf·idf normalisée L2 par texte."""
        return sparse.csr_matrix(self.vectorizer.transform(list(texts)), dtype=np.float64)

    def to_dict(self) -> Dict:
        return {'terms': [str(term) for term in self.vectorizer.get_feature_names_out()],
                'idf': self.idf.tolist()}

    @classmethod
    def from_dict(cls, payload: Dict) -> 'FeatureSpace':
        return cls.from_terms(payload['terms'], payload['idf'])


def fit_feature_space(texts: Sequence[str]) -> FeatureSpace:
    """Ajuste le vocabulaire et l'idf sur les textes d'entraînement."""
    if not texts:
        raise ModelError("aucun texte d'entraînement")
    vectorizer = _vectorizer()
    try:
        vectorizer.fit(list(texts))
    except ValueError as e:
        # vocabulaire vide
        raise ModelError(f"les textes d'entraînement ne contiennent aucun terme ({e})") from None
    space = FeatureSpace(vectorizer)
    logger.info(f"✅ Espace de features: {space.size} termes sur {len(texts)} textes")
    return space


def vectorize(text: str, space: FeatureSpace) -> np.ndarray:
    """Vecteur tf·idf normalisé L2; un texte hors vocabulaire donne le vecteur nul."""
    return space.transform([text]).toarray()[0]


# === Modèle linéaire ===

class TrainMode(str, Enum):
    MINI_BATCH = 'mini-batch'
    FULL_BATCH = 'full-batch'


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    learning_rate: float = DEFAULT_LEARNING_RATE
    l2: float = DEFAULT_L2
    seed: int = DEFAULT_SEED
    mode: TrainMode = TrainMode.MINI_BATCH

    def __post_init__(self):
        if self.epochs < 1:
            raise ModelError(f"epochs doit être ≥ 1 (reçu {self.epochs})")
        if self.batch_size < 1:
            raise ModelError(f"batch_size doit être ≥ 1 (reçu {self.batch_size})")
        if not self.learning_rate > 0:
            raise ModelError(f"learning_rate doit être > 0 (reçu {self.learning_rate})")
        if self.l2 < 0:
            raise ModelError(f"l2 doit être ≥ 0 (reçu {self.l2})")

    def to_dict(self) -> Dict:
        return {
            'epochs': self.epochs,
            'batch_size': self.batch_size,
            'learning_rate': self.learning_rate,
            'l2': self.l2,
            'seed': self.seed,
            'mode': self.mode.value,
        }

    @classmethod
    def from_dict(cls, payload: Dict) -> 'TrainConfig':
        return cls(
            epochs=int(payload['epochs']),
            batch_size=int(payload['batch_size']),
            learning_rate=float(payload['learning_rate']),
            l2=float(payload['l2']),
            seed=int(payload['seed']),
            mode=TrainMode(payload['mode']),
        )


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: Optional[float] = None


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: np.ndarray
    train_config: TrainConfig
    class_order: Tuple[StanceLabel, ...] = CLASS_ORDER
    history: Tuple[EpochRecord, ...] = ()

    def logits(self, matrix) -> np.ndarray:
        return np.asarray(matrix @ self.weights.T) + self.bias


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def loss_and_gradient(weights: np.ndarray, bias: np.ndarray, features,
                      targets: np.ndarray, sample_weight: np.ndarray,
                      l2: float) -> Tuple[float, np.ndarray, np.ndarray]:
    """Entropie croisée pondérée (poids de somme 1) + pénalité l2/2·‖W‖².

    features: matrice dense ou creuse (CSR), targets: indices de classe.
    Retourne (perte, dL/dW, dL/db)."""
    logits = np.asarray(features @ weights.T) + bias
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(len(targets))
    data_loss = float(-np.dot(sample_weight, shifted[rows, targets] - log_norm))

    residual = np.exp(shifted - log_norm[:, None])
    residual[rows, targets] -= 1.0
    residual *= sample_weight[:, None]

    grad_w = np.asarray((features.T @ residual).T) + l2 * weights
    grad_b = residual.sum(axis=0)
    return data_loss + 0.5 * l2 * float(np.sum(weights * weights)), grad_w, grad_b


class _ExampleSet:
    """Exemples vectorisés (CSR) avec leurs cibles et poids normalisés."""

    def __init__(self, texts: List[str], targets: List[int], space: FeatureSpace, collapse: bool):
        if collapse:
            # exemples identiques fusionnés, ordre de première apparition
            counts: Dict[Tuple[str, int], int] = {}
            for key in zip(texts, targets):
                counts[key] = counts.get(key, 0) + 1
            keys = list(counts)
            total = len(texts)
            self.texts = [text for text, _ in keys]
            self.targets = np.array([target for _, target in keys], dtype=np.int64)
            self.weights = np.array([counts[key] / total for key in keys], dtype=np.float64)
        else:
            self.texts = list(texts)
            self.targets = np.array(targets, dtype=np.int64)
            self.weights = np.full(len(texts), 1.0 / len(texts)) if texts else np.zeros(0)
        self.features = space.transform(self.texts)

    def __len__(self) -> int:
        return len(self.texts)

    def loss_and_gradient(self, weights: np.ndarray, bias: np.ndarray, l2: float,
                          rows: Optional[np.ndarray] = None):
        """Gradient accumulé par blocs de lignes (ordre de sommation fixe)."""
        if rows is None:
            rows = np.arange(len(self))
            sample_weight = self.weights
        else:
            sample_weight = np.full(len(rows), 1.0 / len(rows))

        loss = 0.5 * l2 * float(np.sum(weights * weights))
        grad_w = l2 * weights
        grad_b = np.zeros_like(bias)
        for start in range(0, len(rows), GRADIENT_BLOCK_ROWS):
            block = rows[start:start + GRADIENT_BLOCK_ROWS]
            block_loss, block_w, block_b = loss_and_gradient(
                weights, bias, self.features[block], self.targets[block], sample_weight[start:start + GRADIENT_BLOCK_ROWS], 0.0
            )
            loss += block_loss
            grad_w = grad_w + block_w
            grad_b = grad_b + block_b
        return loss, grad_w, grad_b


def _training_examples(instances, chunking: Optional[ChunkingConfig]) -> Tuple[List[str], List[int]]:
    texts, targets = [], []
    skipped = 0
    for instance in instances:
        if chunking is None:
            pieces = [instance.content] if instance.content.strip() else []
        else:
            pieces = [chunk.text for chunk in chunk_document(instance.content, chunking)]
        if not pieces:
            skipped += 1
            continue
        # chaque chunk hérite du label de son instance
        for text in pieces:
            texts.append(text)
            targets.append(CLASS_INDEX[instance.label])
    if skipped:
        logger.warning(f"⚠️ {skipped} instances sans contenu ignorées")
    return texts, targets


def train(instances, space: FeatureSpace, config: TrainConfig = TrainConfig(),
          chunking: Optional[ChunkingConfig] = None, validation=None) -> LinearModel:
    """Descente de gradient (mini-batch mélangé ou full-batch) sur softmax(Wx + b).

    Le gradient d'un batch est la MOYENNE sur ses exemples. En full-batch les
    exemples identiques sont fusionnés avec un poids count/total, de sorte que
    k copies du jeu donnent exactement les mêmes paramètres qu'une seule."""
    if not instances:
        raise ModelError("aucune instance d'entraînement")

    texts, targets = _training_examples(instances, chunking)
    if not texts:
        raise ModelError("aucun exemple exploitable après découpage")

    full_batch = config.mode is TrainMode.FULL_BATCH
    examples = _ExampleSet(texts, targets, space, collapse=full_batch)
    validation_set = None
    if validation:
        val_texts, val_targets = _training_examples(validation, chunking)
        if val_texts:
            validation_set = _ExampleSet(val_texts, val_targets, space, collapse=True)

    rng = np.random.Generator(np.random.PCG64(config.seed))
    weights = np.zeros((N_CLASSES, space.size), dtype=np.float64)
    bias = np.zeros(N_CLASSES, dtype=np.float64)
    history = []

    logger.info(
        f"🚀 Entraînement {config.mode.value}: {len(texts)} exemples, {config.epochs} epochs, "
        f"batch {config.batch_size}, lr {config.learning_rate}"
    )
    for epoch in range(1, config.epochs + 1):
        if full_batch:
            epoch_loss, grad_w, grad_b = examples.loss_and_gradient(weights, bias, config.l2)
            weights = weights - config.learning_rate * grad_w
            bias = bias - config.learning_rate * grad_b
        else:
            order = rng.permutation(len(examples))
            weighted_loss = 0.0
            for start in range(0, len(order), config.batch_size):
                batch = order[start:start + config.batch_size]
                batch_loss, grad_w, grad_b = examples.loss_and_gradient(weights, bias, config.l2, rows=batch)
                weights = weights - config.learning_rate * grad_w
                bias = bias - config.learning_rate * grad_b
                weighted_loss += batch_loss * len(batch)
            epoch_loss = weighted_loss / len(order)

        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
            raise ModelError(f"paramètres non finis à l'epoch {epoch} (learning_rate trop élevé ?)")

        val_loss = None
        if validation_set is not None:
            val_loss, _, _ = validation_set.loss_and_gradient(weights, bias, 0.0)
        history.append(EpochRecord(epoch=epoch, train_loss=epoch_loss, val_loss=val_loss))
        logger.debug(f"epoch {epoch}: loss {epoch_loss:.6f}" + (f", val {val_loss:.6f}" if val_loss is not None else ''))

    logger.info(f"✅ Entraînement terminé (loss finale {history[-1].train_loss:.4f})")
    return LinearModel(weights=weights, bias=bias, train_config=config, history=tuple(history))


# === Sérialisation ===

def model_to_dict(model: LinearModel, space: FeatureSpace) -> Dict:
    return {
        'format_version': FORMAT_VERSION,
        'class_order': [label.value for label in model.class_order],
        'feature_space': space.to_dict(),
        'weights': model.weights.tolist(),
        'bias': model.bias.tolist(),
        'train_config': model.train_config.to_dict(),
        'history': [
            {'epoch': record.epoch, 'train_loss': record.train_loss, 'val_loss': record.val_loss}
            for record in model.history
        ],
    }


def model_to_bytes(model: LinearModel, space: FeatureSpace) -> bytes:
    return json.dumps(model_to_dict(model, space), sort_keys=True, ensure_ascii=False).encode('utf-8')


def save_model(model: LinearModel, space: FeatureSpace, path: Union[str, Path], extra: Optional[Dict] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = model_to_dict(model, space)
    if extra:
        payload.update(extra)
    path.write_text(json.dumps(payload, sort_keys=True, ensure_ascii=False), encoding='utf-8')
    logger.info(f"💾 Modèle sauvegardé: {path}")
    return path


def load_model(path: Union[str, Path]) -> Tuple[LinearModel, FeatureSpace]:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise ModelError(f"modèle illisible {path}: {e.msg}") from None

    version = payload.get('format_version')
    if version != FORMAT_VERSION:
        raise ModelError(f"version de format {version!r} incompatible (attendu {FORMAT_VERSION})")
    class_order = tuple(StanceLabel(value) for value in payload['class_order'])
    if class_order != CLASS_ORDER:
        raise ModelError(f"ordre de classes inattendu: {[c.value for c in class_order]}")

    space = FeatureSpace.from_dict(payload['feature_space'])
    model = LinearModel(
        weights=np.asarray(payload['weights'], dtype=np.float64).reshape(N_CLASSES, space.size),
        bias=np.asarray(payload['bias'], dtype=np.float64),
        train_config=TrainConfig.from_dict(payload['train_config']),
        class_order=class_order,
        history=tuple(EpochRecord(**record) for record in payload.get('history', [])),
    )
    logger.info(f"✅ Modèle chargé: {path} ({space.size} termes)")
    return model, space


# === Inférence ===

class ChunkProbs(NamedTuple):
    chunk_index: int
    token_len: int
    probs: np.ndarray


@dataclass(frozen=True)
class Prediction:
    doc_id: str
    probs: Tuple[float, ...]
    label: StanceLabel
    confidence: float
    per_chunk: Optional[Tuple[ChunkProbs, ...]] = None

    def to_dict(self) -> Dict:
        payload = {
            'doc_id': self.doc_id,
            'probs': list(self.probs),
            'label': self.label.value,
            'confidence': self.confidence,
        }
        if self.per_chunk is not None:
            payload['per_chunk'] = [
                {'chunk_index': c.chunk_index, 'token_len': c.token_len, 'probs': [float(p) for p in c.probs]}
                for c in self.per_chunk
            ]
        return payload


def prediction_from_probs(doc_id: str, probs, per_chunk=None) -> Prediction:
    """Label = argmax (départage par CLASS_ORDER, le premier l'emporte)."""
    vector = np.asarray(probs, dtype=np.float64)
    index = int(np.argmax(vector))
    return Prediction(
        doc_id=doc_id,
        probs=tuple(float(p) for p in vector),
        label=CLASS_ORDER[index],
        confidence=float(vector[index]),
        per_chunk=tuple(per_chunk) if per_chunk is not None else None,
    )


def predict_chunks(model: LinearModel, space: FeatureSpace, chunks: Sequence[Chunk]) -> List[ChunkProbs]:
    if not chunks:
        raise ModelError("liste de chunks vide")
    features = space.transform([chunk.text for chunk in chunks])
    probs = softmax(model.logits(features))
    return [ChunkProbs(chunk.chunk_index, chunk.token_len, row) for chunk, row in zip(chunks, probs)]


def aggregate_chunk_predictions(per_chunk: Sequence[Tuple[int, Sequence[float]]]) -> np.ndarray:
    """Moyenne des distributions pondérée par la longueur des chunks."""
    if not per_chunk:
        raise ModelError("aucune prédiction de chunk à agréger")
    lengths = np.array([float(length) for length, _ in per_chunk])
    if np.any(lengths <= 0):
        raise ModelError("les longueurs de chunk doivent être > 0")
    vectors = np.array([np.asarray(probs, dtype=np.float64) for _, probs in per_chunk])
    if all(np.array_equal(vectors[0], row) for row in vectors[1:]):
        return vectors[0].copy()
    return lengths @ vectors / lengths.sum()


def predict_document(model: LinearModel, space: FeatureSpace, content: str,
                     chunking: ChunkingConfig = ChunkingConfig(), doc_id: str = '') -> Prediction:
    if not content.strip():
        raise ModelError(f"contenu vide ({doc_id or 'document'})")
    chunks = chunk_document(content, chunking)
    per_chunk = predict_chunks(model, space, chunks)
    probs = aggregate_chunk_predictions([(c.token_len, c.probs) for c in per_chunk])
    return prediction_from_probs(doc_id, probs, per_chunk if chunking.enabled else None)


def predict_corpus(model: LinearModel, space: FeatureSpace, documents, chunking: ChunkingConfig) -> List[Prediction]:
    return [predict_document(model, space, document.content, chunking, document.doc_id) for document in documents]


# === Prédictions externes ===

def import_external_predictions(path: Union[str, Path]) -> List[Prediction]:
    """Lit un JSON-lines {doc_id, probs:[4]}; les vecteurs hors simplexe (±1e-6)
    sont renormalisés avec un avertissement."""
    path = Path(path)
    predictions = []
    seen = set()
    with open(path, 'r', encoding='utf-8') as f:
        for line_number, raw_line in enumerate(f, 1):
            if not raw_line.strip():
                continue
            try:
                record = json.loads(raw_line)
            except json.JSONDecodeError as e:
                raise ExternalPredictionError(f"JSON invalide: {e.msg}", line_number) from None
            if not isinstance(record, dict):
                raise ExternalPredictionError("objet JSON attendu", line_number)

            doc_id = record.get('doc_id')
            if not isinstance(doc_id, str) or not doc_id:
                raise ExternalPredictionError("doc_id manquant ou invalide", line_number)
            if doc_id in seen:
                raise ExternalPredictionError(f"doc_id dupliqué: {doc_id}", line_number)
            seen.add(doc_id)

            probs = record.get('probs')
            if (not isinstance(probs, list) or len(probs) != N_CLASSES
                    or not all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in probs)):
                raise ExternalPredictionError(f"probs doit être une liste de {N_CLASSES} nombres", line_number)
            vector = np.asarray(probs, dtype=np.float64)
            if not np.all(np.isfinite(vector)) or np.any(vector < 0):
                raise ExternalPredictionError("probabilités négatives ou non finies", line_number)
            total = float(vector.sum())
            if total <= 0:
                raise ExternalPredictionError("probabilités de somme nulle", line_number)
            if abs(total - 1.0) > SIMPLEX_TOLERANCE:
                logger.warning(f"⚠️ [ligne {line_number}] probs de {doc_id} somment à {total:.6f}: renormalisation")
                vector = vector / total
            predictions.append(prediction_from_probs(doc_id, vector))

    logger.info(f"✅ {len(predictions)} prédictions externes importées depuis {path}")
    return predictions


def write_predictions(predictions: Sequence[Prediction], stream: TextIO):
    """Une ligne JSON par prédiction."""
    for prediction in predictions:
        stream.write(json.dumps(prediction.to_dict(), ensure_ascii=False) + '\n')


def save_predictions(predictions: Sequence[Prediction], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        write_predictions(predictions, f)
    logger.info(f"💾 {len(predictions)} prédictions écrites dans {path}")
    return path
