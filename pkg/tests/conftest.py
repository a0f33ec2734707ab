import random

import pytest

from mfkit.corpus import FOUNDATIONS, Dataset, Document, FoundationLabel, Prediction


def make_documents(counts, language="en", text_of=None):
    """Deterministic documents: counts maps FoundationLabel -> n."""
    docs = []
    i = 0
    for label, n in counts.items():
        for _ in range(n):
            text = text_of(i, label) if text_of else f"document {i} about {label.value}"
            docs.append(
                Document(id=f"d{i:05d}", text=text, gold=label, language=language)
            )
            i += 1
    return docs


def make_dataset(counts, name="toy", language="en", shuffle_seed=None):
    docs = make_documents(counts, language=language)
    if shuffle_seed is not None:
        rng = random.Random(shuffle_seed)
        rng.shuffle(docs)
    return Dataset(name=name, documents=tuple(docs))


def random_prediction(doc_id, rng, approach="synthetic"):
    """A random multi-label prediction: foundations, none, or unknown."""
    roll = rng.random()
    if roll < 0.1:
        labels = frozenset({FoundationLabel.NONE})
    elif roll < 0.15:
        labels = frozenset({FoundationLabel.UNKNOWN})
    else:
        k = rng.randint(1, 3)
        labels = frozenset(rng.sample(FOUNDATIONS, k))
    return Prediction(doc_id=doc_id, labels=labels, approach=approach)


@pytest.fixture
def small_dataset():
    return make_dataset(
        {
            FoundationLabel.CARE: 4,
            FoundationLabel.FAIRNESS: 3,
            FoundationLabel.LOYALTY: 3,
            FoundationLabel.AUTHORITY: 2,
            FoundationLabel.SANCTITY: 2,
        }
    )
