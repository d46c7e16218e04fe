import json

import numpy as np
import pytest

from mpstance_chunker import (
    ChunkingConfig, ChunkingError, chunk_document, chunk_documents, save_chunks, segment_sentences,
)

WORDS = ['alpha', 'bravo', 'charlie', 'delta', 'echo', 'foxtrot', 'golf', 'hotel', 'india', 'juliet']


def long_sentence(n_tokens, head='Word'):
    return ' '.join([head] + ['x'] * (n_tokens - 2) + ['end.'])


def random_document(rng, max_sentence_tokens):
    sentences = []
    for _ in range(int(rng.integers(1, 15))):
        length = int(rng.integers(1, max_sentence_tokens + 1))
        words = [WORDS[int(i)] for i in rng.integers(0, len(WORDS), size=length)]
        words[0] = words[0].capitalize()
        words[-1] += '.'
        sentences.append(' '.join(words))
    return ' '.join(sentences), len(sentences)


# === Segmentation ===

@pytest.mark.parametrize('text, expected', [
    ('A b. C d.', ['A b.', 'C d.']),
    ('Dr. Smith left. He returned.', ['Dr. Smith left.', 'He returned.']),
    ('no terminator here', ['no terminator here']),
    ('Really? Yes! Done.', ['Really?', 'Yes!', 'Done.']),
    ('It costs 3.5 dollars. ok then.', ['It costs 3.5 dollars. ok then.']),
    ('See e.g. Paris. Then 2 more.', ['See e.g. Paris.', 'Then 2 more.']),
    ('I said no. He left.', ['I said no.', 'He left.']),
    ('Call No. 5 today. Then go.', ['Call No. 5 today.', 'Then go.']),
    ('Shares of Acme Co. Rose. It helped.', ['Shares of Acme Co. Rose.', 'It helped.']),
    ('They met at the co. Later on.', ['They met at the co.', 'Later on.']),
])
def test_segment_sentences(text, expected):
    sentences = segment_sentences(text)
    assert [s.text for s in sentences] == expected
    assert [s.index for s in sentences] == list(range(len(expected)))


def test_segment_empty_text():
    assert segment_sentences('   ') == []


# === Chunking ===

def test_three_long_sentences_without_overlap():
    text = ' '.join(long_sentence(200) for _ in range(3))
    chunks = chunk_document(text, ChunkingConfig(max_tokens=400, overlap_sentences=0))
    assert [c.token_len for c in chunks] == [400, 200]
    assert [c.sentence_span for c in chunks] == [(0, 1), (2, 2)]


def test_three_long_sentences_with_overlap():
    text = ' '.join(long_sentence(200) for _ in range(3))
    chunks = chunk_document(text, ChunkingConfig(max_tokens=400, overlap_sentences=1))
    assert [c.token_len for c in chunks] == [400, 400]
    assert [c.sentence_span for c in chunks] == [(0, 1), (1, 2)]
    assert [c.chunk_index for c in chunks] == [0, 1]


def test_short_document_single_chunk():
    text = ' '.join(long_sentence(100) for _ in range(3))
    chunks = chunk_document(text, ChunkingConfig(max_tokens=512))
    assert len(chunks) == 1
    assert chunks[0].token_len == 300
    assert chunks[0].text == text


def test_oversized_sentence_is_hard_split():
    text = 'Short one. ' + long_sentence(300) + ' Tail here.'
    chunks = chunk_document(text, ChunkingConfig(max_tokens=128, overlap_sentences=1))
    fragments = [c for c in chunks if c.is_fragment]
    assert [c.token_len for c in fragments] == [128, 128, 44]
    assert all(c.sentence_span == (1, 1) for c in fragments)
    assert chunks[0].text == 'Short one.' and not chunks[0].is_fragment
    assert chunks[-1].text == 'Tail here.'


def test_chunking_disabled_truncates():
    text = 'One two three. Four five six seven. Eight nine ten.'
    chunks = chunk_document(text, ChunkingConfig(max_tokens=4, enabled=False))
    assert len(chunks) == 1
    assert chunks[0].text == 'One two three. Four'
    assert chunks[0].token_len == 4
    assert chunks[0].sentence_span == (0, 1)
    assert chunk_document('', ChunkingConfig(enabled=False)) == []


def test_chunking_disabled_short_document_untouched():
    text = 'Alpha beta. Gamma delta.'
    chunks = chunk_document(text, ChunkingConfig(max_tokens=512, enabled=False))
    assert [c.text for c in chunks] == [text]


def test_random_documents_properties():
    rng = np.random.Generator(np.random.PCG64(99))
    checked_overlap = 0
    for _ in range(1000):
        max_tokens = int(rng.integers(8, 60))
        overlap = int(rng.integers(0, 3))
        text, n_sentences = random_document(rng, int(rng.integers(2, 40)))
        sentences = segment_sentences(text)
        assert len(sentences) == n_sentences

        chunks = chunk_document(text, ChunkingConfig(max_tokens=max_tokens, overlap_sentences=overlap))
        assert all(c.token_len <= max_tokens for c in chunks)
        assert [c.chunk_index for c in chunks] == list(range(len(chunks)))

        covered = set()
        for c in chunks:
            covered.update(range(c.sentence_span[0], c.sentence_span[1] + 1))
        assert covered == set(range(n_sentences))

        lengths = [len(s.text.split()) for s in sentences]
        if max(lengths) <= max_tokens // (overlap + 2):
            checked_overlap += 1
            for previous, current in zip(chunks, chunks[1:]):
                assert current.sentence_span[0] == previous.sentence_span[1] - overlap + 1

        if overlap == 0:
            assert ' '.join(c.text for c in chunks) == text
    assert checked_overlap > 50


def test_config_validation():
    with pytest.raises(ChunkingError):
        ChunkingConfig(max_tokens=0)
    with pytest.raises(ChunkingError):
        ChunkingConfig(overlap_sentences=-1)
    assert ChunkingConfig().to_dict() == {'max_tokens': 512, 'overlap_sentences': 1, 'enabled': True}


def test_chunk_documents_and_save(tmp_path, document_factory, caplog):
    documents = [
        document_factory('d1', ['pro'] * 3, content='Alpha beta. Gamma delta.'),
        document_factory('d2', ['against'] * 3, content=long_sentence(12)),
    ]
    records = chunk_documents(documents, ChunkingConfig(max_tokens=3, overlap_sentences=0))
    assert [r['doc_id'] for r in records] == ['d1', 'd1', 'd2', 'd2', 'd2', 'd2']
    assert sum(r['is_fragment'] for r in records) == 4
    assert 'fragments' in caplog.text

    path = save_chunks(records, tmp_path / 'chunks.jsonl')
    lines = path.read_text(encoding='utf-8').splitlines()
    assert json.loads(lines[0]) == {
        'doc_id': 'd1', 'chunk_index': 0, 'token_len': 2, 'sentence_span': [0, 0],
        'is_fragment': False, 'text': 'Alpha beta.',
    }
