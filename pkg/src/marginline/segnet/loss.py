"""Training objective: generalized Dice loss plus cross-entropy, equally
weighted. Zero exactly when the probabilities are one-hot correct."""

from __future__ import annotations

import numpy as np

_EPS = 1e-12


def _one_hot(labels, n_classes=2):
    labels = np.asarray(labels, dtype=np.int64)
    g = np.zeros((len(labels), n_classes))
    g[np.arange(len(labels)), labels] = 1.0
    return g


def _dice_terms(probs, g):
    """(weights, numerator, denominator) of the generalized soft Dice.
    Classes absent from the ground truth carry zero weight."""
    vol = g.sum(axis=0)
    w = np.where(vol > 0, 1.0 / np.maximum(vol, 1.0) ** 2, 0.0)
    num = (w * (probs * g).sum(axis=0)).sum()
    den = (w * (probs + g).sum(axis=0)).sum()
    return w, num, den


def generalized_dice_loss(probs, labels):
    g = _one_hot(labels, probs.shape[1])
    _, num, den = _dice_terms(probs, g)
    return 1.0 - 2.0 * num / max(den, _EPS)


def cross_entropy(probs, labels):
    labels = np.asarray(labels, dtype=np.int64)
    p = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(p, _EPS))))


def loss_value(probs, labels):
    """Scalar loss >= 0; 0 iff probabilities are one-hot correct."""
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    if probs.shape[0] != labels.shape[0]:
        raise ValueError(
            f"{probs.shape[0]} probability rows for {labels.shape[0]} labels"
        )
    return generalized_dice_loss(probs, labels) + cross_entropy(probs, labels)


def loss_grad_logits(probs, labels):
    """d(loss)/d(logits) for softmax probabilities, exact."""
    n, k = probs.shape
    labels = np.asarray(labels, dtype=np.int64)
    g = _one_hot(labels, k)
    w, num, den = _dice_terms(probs, g)
    den = max(den, _EPS)
    # generalized Dice: d/dp = -2 (w*g*den - num*w) / den^2
    dprobs = -2.0 * (w[None, :] * g * den - num * w[None, :]) / den**2
    # cross-entropy: -mean log p_true
    dprobs -= g / (np.maximum(probs, _EPS) * n)
    # through the softmax
    inner = (dprobs * probs).sum(axis=1, keepdims=True)
    return probs * (dprobs - inner)
