"""Scikit-learn style estimator facade over the gait recognition pipeline.

``GaitRecognizer`` exposes fit/transform/predict/score with get_params and
set_params inherited from ``BaseEstimator``, so the recognizer composes with
sklearn model selection and pipelines.  Fitting trains the fusion network on
the given sequences and enrolls them as the identification gallery;
``predict`` assigns each query sequence the label of its nearest enrolled
embedding.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .training import (
    BRANCHES,
    TrainConfig,
    embed_sequence,
    model_from_checkpoint,
    train,
)
from .validation import check_labels, check_pose_sequences


class GaitRecognizer(BaseEstimator, ClassifierMixin, TransformerMixin):
    """Identify walking subjects from skeleton keypoint sequences.

    Parameters mirror the training configuration; see ``TrainConfig`` for
    semantics.  ``branches`` selects the active feature branches and
    ``window`` is either "auto" (temporal stride from detected gait cycles)
    or a fixed frame count.
    """

    def __init__(self, epochs=150, batch_size=64, learning_rate=1e-4,
                 lr_decay=0.01, dropout_rate=0.35, seed=0, window="auto",
                 branches=BRANCHES, stem_channels=16,
                 stage_blocks=((2, 16, 1), (2, 32, 2)), reduction_ratio=4,
                 metric="euclidean", augment=False):
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.dropout_rate = dropout_rate
        self.seed = seed
        self.window = window
        self.branches = branches
        self.stem_channels = stem_channels
        self.stage_blocks = stage_blocks
        self.reduction_ratio = reduction_ratio
        self.metric = metric
        self.augment = augment

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            lr_decay=self.lr_decay,
            dropout_rate=self.dropout_rate,
            epochs=self.epochs,
            seed=self.seed,
            window_policy=self.window,
            augment=self.augment,
            stem_channels=self.stem_channels,
            stage_blocks=tuple(tuple(s) for s in self.stage_blocks),
            reduction_ratio=self.reduction_ratio,
            metric=self.metric,
        )

    def fit(self, X, y=None):
        """Train the fusion network on sequences and enroll them as the gallery.

        ``y`` defaults to each sequence's subject id.
        """
        sequences = check_pose_sequences(X)
        labels = check_labels(sequences, y)
        self.checkpoint_ = train(sequences, self._train_config(),
                                 branch_mask=frozenset(self.branches))
        self._model = model_from_checkpoint(self.checkpoint_)
        self.gallery_embeddings_ = np.stack(
            [embed_sequence(self._model, seq) for seq in sequences]
        )
        self.gallery_labels_ = np.array(labels)
        self.classes_ = np.unique(self.gallery_labels_)
        return self

    def transform(self, X) -> np.ndarray:
        """Embed sequences into the global feature space, one row per sequence."""
        check_is_fitted(self, "checkpoint_")
        sequences = check_pose_sequences(X)
        return np.stack([embed_sequence(self._model, seq) for seq in sequences])

    def predict(self, X) -> np.ndarray:
        """Label each sequence with its nearest enrolled embedding's label."""
        check_is_fitted(self, "checkpoint_")
        embeddings = self.transform(X)
        if self.metric == "cosine":
            g = self.gallery_embeddings_
            g = g / np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-12)
            p = embeddings / np.maximum(
                np.linalg.norm(embeddings, axis=1, keepdims=True), 1e-12
            )
            nearest = np.argmax(p @ g.T, axis=1)
        else:
            d2 = ((embeddings[:, None, :] - self.gallery_embeddings_[None, :, :]) ** 2).sum(axis=2)
            nearest = np.argmin(d2, axis=1)
        return self.gallery_labels_[nearest]

    def score(self, X, y=None) -> float:
        """Rank-1 accuracy of predictions against y (default: true subject ids)."""
        sequences = check_pose_sequences(X)
        labels = np.array(check_labels(sequences, y))
        return float(np.mean(self.predict(sequences) == labels))
