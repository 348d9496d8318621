"""Independent reference computations used by the tests.

Nothing here imports kuipercal; each function is a direct, slow transcription
of a definition.
"""

import math

import numpy as np


def brute_force_kuiper(scores, responses, weights):
    """Largest |weighted interval total of (R - S)| over all index intervals, O(n^2)."""
    d = (np.asarray(responses, float) - np.asarray(scores, float)) * np.asarray(weights, float)
    total = math.fsum(weights)
    best = 0.0
    n = len(d)
    for p in range(n):
        acc = 0.0
        for q in range(p, n):
            acc += d[q]
            best = max(best, abs(acc))
    return best / total


def synthetic_direct(q):
    """Synthetic population built literally from its definition, blocks as Python lists."""
    scores, responses = [], []
    for block in range(1, q + 1):
        for pos in range(1, q + 2):
            j = (block - 1) * (q + 1) + pos
            scores.append((2 * j + q) / (2 * (q + 1) ** 2))
            responses.append(1.0 if pos <= block else 0.0)
    return scores, responses


def sigma_direct(scores, weights):
    num = math.fsum(s * (1 - s) * w * w for s, w in zip(scores, weights))
    return math.sqrt(num) / math.fsum(weights)
