"""Fixtures pytest partagées: modules à plat sur sys.path, corpus synthétiques."""

import os
import sys

import pytest

ROOT = os.path.dirname(os.path.abspath(__file__))
for path in (ROOT, os.path.join(ROOT, 'tests')):
    if path not in sys.path:
        sys.path.insert(0, path)

from mpstance_corpus import Annotation, Corpus, Document, StanceLabel  # noqa: E402
from synthetic import make_corpus  # noqa: E402


def make_document(doc_id, labels, content=None, query_id='q1', url=None):
    return Document(
        doc_id=doc_id,
        query_id=query_id,
        query_text=f"query {query_id}",
        content=content if content is not None else f"Content of {doc_id}.",
        annotations=tuple(Annotation(StanceLabel.parse(label), f"a{i}") for i, label in enumerate(labels, 1)),
        url=url,
    )


@pytest.fixture
def document_factory():
    return make_document


@pytest.fixture
def small_corpus():
    return Corpus(documents=(
        make_document('d1', ['pro', 'pro', 'against']),
        make_document('d2', ['neutral', 'neutral', 'neutral']),
        make_document('d3', ['pro', 'neutral', 'against']),
    ))


@pytest.fixture
def unanimous_corpus():
    return make_corpus(90, seed=3, level_weights={'Unanimous': 1.0})


@pytest.fixture
def synthetic_corpus():
    return make_corpus(120, seed=11)
