"""Stacked generalization: fit base learners on fold 1, train a small dense
meta-network on their fold-2 class probabilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import Dense, ModelSpec, TrainConfig, train


class EnsembleError(Exception):
    pass


class FoldDegenerate(EnsembleError):
    pass


class ShapeMismatch(EnsembleError):
    pass


@dataclass(frozen=True)
class StackConfig:
    fold2_fraction: float = 0.25
    meta_hidden: tuple = (16, 16)
    meta_epochs: int = 50
    meta_batch_size: int = 16
    seed: int = 0
    max_redraws: int = 10


@dataclass
class StackedModel:
    bases: list          # frozen, fitted base learners with predict_proba
    meta: object         # TrainedModel over concatenated base probabilities
    fold1_idx: np.ndarray
    fold2_idx: np.ndarray
    config: StackConfig

    @property
    def meta_input_width(self):
        return 2 * len(self.bases)


def split_folds(n: int, fold2_fraction: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """|fold2| = round(fold2_fraction * n)."""
    perm = rng.permutation(n)
    n2 = int(round(fold2_fraction * n))
    return perm[n2:], perm[:n2]


def _meta_spec(hidden):
    # four dense layers: two relu hidden, one relu bottleneck, linear head
    layers = [Dense(h, activation="relu") for h in (*hidden, 8)]
    layers.append(Dense(2))
    return ModelSpec(layers=layers, feature_tap=-2, name="meta")


def stack_fit(X, y, base_learners, config: StackConfig = StackConfig(),
              tags=None) -> StackedModel:
    """Fit base learners on fold 1 only, then the meta-net on their fold-2
    probabilities.

    Each base learner exposes fit(X, y, tags=None) and predict_proba(X).
    Folds are redrawn (deterministically) while either fold is single-class,
    up to config.max_redraws.
    """
    X = np.asarray(X)
    y = np.asarray(y, dtype=int)
    n = len(y)
    rng = np.random.default_rng(config.seed)
    for _ in range(config.max_redraws):
        fold1, fold2 = split_folds(n, config.fold2_fraction, rng)
        if len(np.unique(y[fold1])) >= 2 and len(np.unique(y[fold2])) >= 2:
            break
    else:
        raise FoldDegenerate("could not draw two folds containing both classes")

    fold1_tags = [tags[i] for i in fold1] if tags is not None else None
    for base in base_learners:
        base.fit(X[fold1], y[fold1], tags=fold1_tags)

    meta_X = np.hstack([base.predict_proba(X[fold2]) for base in base_learners])
    meta_cfg = TrainConfig(
        batch_size=config.meta_batch_size,
        max_epochs=config.meta_epochs,
        patience=config.meta_epochs,  # fixed 50-epoch budget, no early stop
        seed=config.seed,
    )
    fold2_tags = frozenset(tags[i] for i in fold2) if tags is not None else frozenset()
    meta = train(_meta_spec(config.meta_hidden), meta_X, y[fold2], meta_cfg,
                 tags=fold2_tags)
    return StackedModel(bases=list(base_learners), meta=meta,
                        fold1_idx=fold1, fold2_idx=fold2, config=config)


def stack_predict(model: StackedModel, X):
    """(predicted classes, meta probabilities) for a batch of inputs."""
    meta_X = np.hstack([base.predict_proba(X) for base in model.bases])
    if meta_X.shape[1] != model.meta_input_width:
        raise ShapeMismatch(
            f"expected meta width {model.meta_input_width}, got {meta_X.shape[1]}")
    probs = model.meta.predict_proba(meta_X)
    return probs.argmax(axis=1), probs
