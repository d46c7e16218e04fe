#!/usr/bin/env python3
"""
MPSTANCE - Chunker
Découpage des documents longs en segments de phrases complètes, bornés en tokens,
avec recouvrement optionnel en phrases
"""

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Tuple, Union

from mpstance_corpus import Document, token_count

logger = logging.getLogger(__name__)

# Configuration
DEFAULT_CHUNK_TOKENS = 512
DEFAULT_OVERLAP_SENTENCES = 1

# Abréviations qui ne terminent jamais une phrase (comparaison en minuscules)
ABBREVIATIONS = frozenset({
    'mr.', 'mrs.', 'ms.', 'dr.', 'prof.', 'sr.', 'jr.', 'mt.',
    'gen.', 'gov.', 'sen.', 'rep.', 'rev.', 'col.', 'lt.', 'sgt.', 'capt.',
    'e.g.', 'i.e.', 'etc.', 'vs.', 'cf.', 'al.', 'approx.', 'fig.',
    'inc.', 'ltd.', 'corp.', 'jan.', 'feb.', 'apr.', 'jun.',
    'jul.', 'aug.', 'sep.', 'sept.', 'oct.', 'nov.', 'dec.',
    'u.s.', 'u.k.', 'u.n.', 'e.u.', 'a.m.', 'p.m.',
})

# Homographes de mots courants ("no.", "co."): abréviation seulement avec majuscule
CAPITALIZED_ABBREVIATIONS = frozenset({'No.', 'Co.', 'St.', 'Mar.'})

TERMINATOR_PATTERN = re.compile(r'[.!?]+')
LEADING_PUNCTUATION = '"\'([{'


class ChunkingError(ValueError):
    """Configuration de découpage invalide."""


@dataclass(frozen=True)
class Sentence:
    text: str
    index: int


@dataclass(frozen=True)
class Chunk:
    text: str
    token_len: int
    sentence_span: Tuple[int, int]
    chunk_index: int
    is_fragment: bool = False

    def to_dict(self, doc_id: str = '') -> dict:
        return {
            'doc_id': doc_id,
            'chunk_index': self.chunk_index,
            'token_len': self.token_len,
            'sentence_span': list(self.sentence_span),
            'is_fragment': self.is_fragment,
            'text': self.text,
        }


@dataclass(frozen=True)
class ChunkingConfig:
    max_tokens: int = DEFAULT_CHUNK_TOKENS
    overlap_sentences: int = DEFAULT_OVERLAP_SENTENCES
    enabled: bool = True

    def __post_init__(self):
        if self.max_tokens <= 0:
            raise ChunkingError(f"max_tokens doit être > 0 (reçu {self.max_tokens})")
        if self.overlap_sentences < 0:
            raise ChunkingError(f"overlap_sentences doit être ≥ 0 (reçu {self.overlap_sentences})")

    def to_dict(self) -> dict:
        return {
            'max_tokens': self.max_tokens,
            'overlap_sentences': self.overlap_sentences,
            'enabled': self.enabled,
        }


def _is_abbreviation(text: str, end: int) -> bool:
    start = end
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    word = text[start:end].lstrip(LEADING_PUNCTUATION)
    return word in CAPITALIZED_ABBREVIATIONS or word.lower() in ABBREVIATIONS


def segment_sentences(text: str) -> List[Sentence]:
    """Segmentation par règles.

    Coupure après `.`, `!` ou `?` suivis d'espaces puis d'une majuscule, d'un
    chiffre, ou de la fin du texte. Les abréviations connues ne coupent pas."""
    sentences: List[Sentence] = []
    start = 0
    for match in TERMINATOR_PATTERN.finditer(text):
        end = match.end()
        rest = text[end:]
        following = rest.lstrip()
        if following:
            if len(following) == len(rest):
                continue  # pas d'espace après le terminateur
            if not (following[0].isupper() or following[0].isdigit()):
                continue
        if _is_abbreviation(text, end):
            continue
        piece = text[start:end].strip()
        if piece:
            sentences.append(Sentence(text=piece, index=len(sentences)))
        start = end

    tail = text[start:].strip()
    if tail:
        sentences.append(Sentence(text=tail, index=len(sentences)))
    return sentences


def _hard_split(sentence: Sentence, max_tokens: int) -> List[List[str]]:
    tokens = sentence.text.split()
    return [tokens[i:i + max_tokens] for i in range(0, len(tokens), max_tokens)]


def _truncate(text: str, sentences: List[Sentence], max_tokens: int) -> List[Chunk]:
    tokens = text.split()
    if not tokens:
        return []
    kept = tokens[:max_tokens]
    # dernière phrase touchée par la troncature
    last, running = 0, 0
    for sentence in sentences:
        last = sentence.index
        running += token_count(sentence.text)
        if running >= len(kept):
            break
    return [Chunk(text=' '.join(kept), token_len=len(kept), sentence_span=(0, last), chunk_index=0)]


def chunk_document(text: str, config: ChunkingConfig = ChunkingConfig()) -> List[Chunk]:
    """Empaquetage glouton des phrases en chunks d'au plus max_tokens tokens.

    Chaque nouveau chunk reprend les `overlap_sentences` dernières phrases du
    précédent; le recouvrement se réduit si ces phrases et la suivante ne
    tiennent pas ensemble dans la limite, et reste strictement inférieur au
    nombre de phrases du chunk précédent. Une phrase trop longue est coupée aux
    frontières de tokens en fragments marqués is_fragment. Sans chunking, le
    document est tronqué à ses max_tokens premiers tokens."""
    sentences = segment_sentences(text)
    if not config.enabled:
        return _truncate(text, sentences, config.max_tokens)

    lengths = [token_count(sentence.text) for sentence in sentences]
    chunks: List[Chunk] = []
    current: List[int] = []

    def emit(indices: List[int]):
        chunks.append(Chunk(
            text=' '.join(sentences[i].text for i in indices),
            token_len=sum(lengths[i] for i in indices),
            sentence_span=(indices[0], indices[-1]),
            chunk_index=len(chunks),
        ))

    for sentence in sentences:
        i = sentence.index
        if lengths[i] > config.max_tokens:
            if current:
                emit(current)
            for fragment in _hard_split(sentence, config.max_tokens):
                chunks.append(Chunk(
                    text=' '.join(fragment),
                    token_len=len(fragment),
                    sentence_span=(i, i),
                    chunk_index=len(chunks),
                    is_fragment=True,
                ))
            current = []
            continue

        if sum(lengths[j] for j in current) + lengths[i] <= config.max_tokens:
            current.append(i)
            continue

        emit(current)
        keep = min(config.overlap_sentences, len(current) - 1)
        carry = current[len(current) - keep:] if keep > 0 else []
        while carry and sum(lengths[j] for j in carry) + lengths[i] > config.max_tokens:
            carry = carry[1:]
        current = carry + [i]

    if current:
        emit(current)
    return chunks


def chunk_documents(documents: Iterable[Document], config: ChunkingConfig) -> List[dict]:
    """Enregistrements {doc_id, chunk_index, token_len, text} pour inspection."""
    records = []
    fragments = 0
    for document in documents:
        for chunk in chunk_document(document.content, config):
            fragments += chunk.is_fragment
            records.append(chunk.to_dict(document.doc_id))
    if fragments:
        logger.warning(f"⚠️ {fragments} fragments issus de phrases plus longues que {config.max_tokens} tokens")
    logger.info(f"✅ {len(records)} chunks produits")
    return records


def save_chunks(records: List[dict], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for record in records:
            f.write(json.dumps(record, ensure_ascii=False) + '\n')
    logger.info(f"💾 Chunks écrits dans {path}")
    return path
