"""Combining per-fold probability fields into one labeling."""

from __future__ import annotations

import numpy as np

STRATEGIES = ("max_probability", "democracy")


def _stack(fields):
    fields = [np.asarray(f) for f in fields]
    if not fields:
        raise ValueError("empty model list")
    shape = fields[0].shape
    for i, f in enumerate(fields):
        if f.shape != shape:
            raise ValueError(f"field {i} has shape {f.shape}, expected {shape}")
    return np.stack(fields)  # (M, N, 2)


def combine_max_probability(fields):
    """Per face, the model with the highest top-class probability assigns
    the label; ties go to the lower model index. Returns (labels, combined
    field carrying the winning model's row)."""
    stack = _stack(fields)
    top = stack.max(axis=2)  # (M, N)
    winner = top.argmax(axis=0)  # lower index wins ties
    n = stack.shape[1]
    combined = stack[winner, np.arange(n)]
    return combined.argmax(axis=1), combined


def combine_democracy(fields):
    """Majority vote over per-model argmax labels; ties broken by the
    larger summed probability of the tied classes."""
    stack = _stack(fields)
    votes = stack.argmax(axis=2)  # (M, N)
    ones = votes.sum(axis=0)
    m = stack.shape[0]
    labels = np.where(ones * 2 > m, 1, 0)
    tied = ones * 2 == m
    if np.any(tied):
        sums = stack.sum(axis=0)  # (N, 2)
        labels[tied] = (sums[tied, 1] > sums[tied, 0]).astype(int)
    return labels.astype(np.int64)


def combine(fields, strategy):
    if strategy == "max_probability":
        return combine_max_probability(fields)[0]
    if strategy == "democracy":
        return combine_democracy(fields)
    raise ValueError(f"unknown ensemble strategy {strategy!r}")
