"""Générateur de corpus synthétiques à signal planté.

Chaque label a un mot-clé; un document porte le mot-clé de son label dans
chaque phrase. Les documents Majority mêlent quelques phrases du label
minoritaire, les documents Split trois labels."""

import numpy as np

from mpstance_corpus import CLASS_ORDER, Annotation, Corpus, Document, StanceLabel

KEYWORDS = {
    'pro': 'endorse',
    'neutral': 'describe',
    'against': 'oppose',
    'not-about': 'unrelated',
}
FILLER = [
    'policy', 'city', 'council', 'report', 'people', 'plan', 'budget', 'school', 'energy', 'water',
    'market', 'health', 'road', 'project', 'law', 'vote', 'team', 'local', 'public', 'service',
    'debate', 'office', 'group', 'study', 'survey', 'north', 'south', 'river', 'park', 'museum',
]
LEVELS = ('Unanimous', 'Majority', 'Split')


def sentence(rng, keyword: str, n_filler: int = 5) -> str:
    words = [FILLER[i] for i in rng.integers(0, len(FILLER), size=n_filler)]
    position = int(rng.integers(0, n_filler + 1))
    words.insert(position, keyword)
    text = ' '.join(words)
    return text[0].upper() + text[1:] + '.'


def make_content(rng, keywords, n_sentences: int) -> str:
    return ' '.join(sentence(rng, keywords[i % len(keywords)]) for i in range(n_sentences))


def make_corpus(n_docs: int, seed: int = 0, level_weights=None, n_queries: int = 4,
                n_sentences=(4, 9)) -> Corpus:
    """Corpus équilibré en labels majoritaires; level_weights règle la part de chaque niveau."""
    rng = np.random.Generator(np.random.PCG64(seed))
    weights = level_weights or {'Unanimous': 0.65, 'Majority': 0.25, 'Split': 0.10}
    levels = [level for level in LEVELS if weights.get(level, 0) > 0]
    probabilities = np.array([weights[level] for level in levels], dtype=float)
    probabilities /= probabilities.sum()
    labels = [label.value for label in CLASS_ORDER]

    documents = []
    for i in range(n_docs):
        gold = labels[i % len(labels)]
        level = levels[int(rng.choice(len(levels), p=probabilities))]
        others = [label for label in labels if label != gold]
        length = int(rng.integers(n_sentences[0], n_sentences[1] + 1))

        if level == 'Unanimous':
            annotation_labels = [gold, gold, gold]
            content = make_content(rng, [KEYWORDS[gold]], length)
        elif level == 'Majority':
            minority = others[int(rng.integers(0, len(others)))]
            annotation_labels = [gold, gold, minority]
            rng.shuffle(annotation_labels)
            content = make_content(rng, [KEYWORDS[gold], KEYWORDS[gold], KEYWORDS[minority]], length)
        else:
            picked = [gold] + [others[j] for j in rng.permutation(len(others))[:2]]
            annotation_labels = list(picked)
            content = make_content(rng, [KEYWORDS[label] for label in picked], length)

        query = f"q{i % n_queries + 1}"
        documents.append(Document(
            doc_id=f"doc{i:04d}",
            query_id=query,
            query_text=f"Should the {query} proposal go ahead?",
            content=content,
            annotations=tuple(Annotation(label=StanceLabel(label), annotator_id=f"ann{j + 1}")
                              for j, label in enumerate(annotation_labels)),
            url=f"https://example.org/{i}",
        ))
    return Corpus(documents=tuple(documents), provenance=f"synthetic:{seed}")
