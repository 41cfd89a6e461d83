"""Softmax cross-entropy with a numerically stable log-sum-exp path."""

from __future__ import annotations

import numpy as np


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, one_hot):
    """Mean loss over the batch plus probabilities and the logit gradient.

    Returns (loss, probs, dlogits) where dlogits already carries the 1/B
    mean-reduction factor.
    """
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    one_hot = np.atleast_2d(np.asarray(one_hot, dtype=np.float64))
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_probs = z - log_norm
    probs = np.exp(log_probs)
    b = logits.shape[0]
    loss = -(one_hot * log_probs).sum() / b
    dlogits = (probs - one_hot) / b
    return loss, probs, dlogits
