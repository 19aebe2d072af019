import numpy as np
import pytest

from nlskit.corpus import synthesize_corpus
from nlskit.embedding_io import synthesize_embeddings


def silhouette(points: np.ndarray, labels: np.ndarray) -> float:
    """Brute-force mean silhouette coefficient."""
    n = len(points)
    d = np.sqrt(
        np.maximum(
            np.sum(points**2, axis=1)[:, None]
            + np.sum(points**2, axis=1)[None, :]
            - 2 * points @ points.T,
            0.0,
        )
    )
    scores = []
    for i in range(n):
        same = labels == labels[i]
        same[i] = False
        if not same.any():
            continue
        a = d[i, same].mean()
        b = min(
            d[i, labels == other].mean()
            for other in set(labels.tolist())
            if other != labels[i]
        )
        scores.append((b - a) / max(a, b))
    return float(np.mean(scores))


@pytest.fixture(scope="session")
def small_corpus():
    """Calibrated synthetic corpus at the smallest allowed size."""
    return synthesize_corpus(seed=7, sessions_per_level=(2, 2, 2))


@pytest.fixture(scope="session")
def embedded_corpus(small_corpus, tmp_path_factory):
    """Small corpus with well-separated synthetic embeddings on disk."""
    out = tmp_path_factory.mktemp("emb_sep4")
    return synthesize_embeddings(
        small_corpus, out, seed=1, dim=8, layers=2, separation=4.0, fps=10
    )


@pytest.fixture(scope="session")
def embedded_corpus_flat(small_corpus, tmp_path_factory):
    """Small corpus with uninformative (separation 0) embeddings."""
    out = tmp_path_factory.mktemp("emb_sep0")
    return synthesize_embeddings(
        small_corpus, out, seed=1, dim=8, layers=2, separation=0.0, fps=10
    )
