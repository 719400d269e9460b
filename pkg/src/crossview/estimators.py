"""Scikit-learn style estimators wrapping the functional core.

Each estimator stores its hyperparameters verbatim, learns fitted state into
trailing-underscore attributes and transforms lists of domain objects, so
the label machinery composes with sklearn pipelines, cloning and parameter
search. X is always a sequence: of probability maps, instance sets, images
or per-image tuples, depending on the estimator.
"""
from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .catalog import ClassCatalog
from .fusion import FusionConfig, fuse_panoptic
from .interstyle import IsrConfig, match_histograms, unify_instances, unify_semantic
from .intertask import ItrConfig, regularize_instances, regularize_semantic
from .selection import (
    SelectionPolicy,
    compute_class_balanced_weights,
    compute_instance_weights,
    select_instances,
    select_semantic,
)


def _check_fitted(estimator, attr: str):
    if getattr(estimator, attr, None) is None:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit first"
        )


class ClassBalancedSelector(TransformerMixin, BaseEstimator):
    """Fits per-category confidence thresholds on a calibration set of
    probability maps and selects pseudo labels from new maps."""

    def __init__(self, catalog: ClassCatalog, target_fraction=0.5, min_threshold=0.05):
        self.catalog = catalog
        self.target_fraction = target_fraction
        self.min_threshold = min_threshold

    def _policy(self) -> SelectionPolicy:
        return SelectionPolicy(self.target_fraction, self.min_threshold)

    def fit(self, X, y=None):
        self.weights_ = compute_class_balanced_weights(
            list(X), self._policy(), self.catalog
        )
        return self

    def transform(self, X):
        _check_fitted(self, "weights_")
        return [select_semantic(p, self.weights_, self.catalog.void_id) for p in X]


class InstanceSelector(TransformerMixin, BaseEstimator):
    """Class-balanced confidence thresholds for instance sets."""

    def __init__(self, catalog: ClassCatalog, target_fraction=0.5, min_threshold=0.05):
        self.catalog = catalog
        self.target_fraction = target_fraction
        self.min_threshold = min_threshold

    def fit(self, X, y=None):
        self.weights_ = compute_instance_weights(
            list(X), SelectionPolicy(self.target_fraction, self.min_threshold), self.catalog
        )
        return self

    def transform(self, X):
        _check_fitted(self, "weights_")
        return [select_instances(s, self.weights_, self.catalog) for s in X]


class HistogramMatcher(TransformerMixin, BaseEstimator):
    """Remaps image values so each channel's CDF matches a reference image.

    With ``reference=None`` the first image passed to fit becomes the
    reference."""

    def __init__(self, reference=None):
        self.reference = reference

    def fit(self, X, y=None):
        if self.reference is not None:
            self.reference_ = self.reference
        else:
            X = list(X)
            if not X:
                raise ValueError("fit needs a reference image or a nonempty X")
            self.reference_ = X[0]
        return self

    def transform(self, X):
        _check_fitted(self, "reference_")
        return [match_histograms(img, self.reference_) for img in X]


class InterTaskRegularizer(TransformerMixin, BaseEstimator):
    """Mutual entropy-gated filtering between the two task branches.

    fit consumes (SemanticProbMap, InstanceSet) pairs to calibrate both sets
    of thresholds; transform maps each pair to a regularized
    (SemanticLabelMap, InstanceSet) pair.
    """

    def __init__(
        self,
        catalog: ClassCatalog,
        target_fraction=0.5,
        min_threshold=0.05,
        consistency_threshold=0.5,
        region_aggregation="mean",
    ):
        self.catalog = catalog
        self.target_fraction = target_fraction
        self.min_threshold = min_threshold
        self.consistency_threshold = consistency_threshold
        self.region_aggregation = region_aggregation

    def fit(self, X, y=None):
        X = list(X)
        policy = SelectionPolicy(self.target_fraction, self.min_threshold)
        self.semantic_weights_ = compute_class_balanced_weights(
            [p for p, _ in X], policy, self.catalog
        )
        self.instance_weights_ = compute_instance_weights(
            [s for _, s in X], policy, self.catalog
        )
        return self

    def transform(self, X):
        _check_fitted(self, "semantic_weights_")
        cfg = ItrConfig(self.consistency_threshold, self.region_aggregation)
        out = []
        for probs, instances in X:
            sem_pl = select_semantic(probs, self.semantic_weights_, self.catalog.void_id)
            inst_pl = select_instances(instances, self.instance_weights_, self.catalog)
            out.append(
                (
                    regularize_semantic(probs, sem_pl, inst_pl, cfg),
                    regularize_instances(instances, probs, sem_pl, inst_pl, cfg),
                )
            )
        return out


class InterStyleUnifier(TransformerMixin, BaseEstimator):
    """Entropy-gated unification of two stylized views of the same scene.

    fit consumes ((probs, instances), (probs_styled, instances_styled))
    per-image pairs and calibrates thresholds on the first view; transform
    returns unified (SemanticLabelMap, InstanceSet) pairs.
    """

    def __init__(
        self,
        catalog: ClassCatalog,
        target_fraction=0.5,
        min_threshold=0.05,
        instance_merge_iou=0.5,
    ):
        self.catalog = catalog
        self.target_fraction = target_fraction
        self.min_threshold = min_threshold
        self.instance_merge_iou = instance_merge_iou

    def fit(self, X, y=None):
        X = list(X)
        policy = SelectionPolicy(self.target_fraction, self.min_threshold)
        self.semantic_weights_ = compute_class_balanced_weights(
            [view1[0] for view1, _ in X], policy, self.catalog
        )
        self.instance_weights_ = compute_instance_weights(
            [view1[1] for view1, _ in X], policy, self.catalog
        )
        return self

    def transform(self, X):
        _check_fitted(self, "semantic_weights_")
        cfg = IsrConfig(self.instance_merge_iou)
        out = []
        for (probs1, inst1), (probs2, inst2) in X:
            out.append(
                (
                    unify_semantic(
                        probs1, probs2, self.semantic_weights_, self.catalog.void_id
                    ),
                    unify_instances(inst1, inst2, self.instance_weights_, cfg, self.catalog),
                )
            )
        return out


class PanopticFuser(TransformerMixin, BaseEstimator):
    """Stateless transformer fusing (InstanceSet, SemanticLabelMap) pairs
    into panoptic maps."""

    def __init__(
        self,
        catalog: ClassCatalog,
        instance_score_min=0.5,
        overlap_keep_fraction=0.5,
        stuff_min_area=2048,
    ):
        self.catalog = catalog
        self.instance_score_min = instance_score_min
        self.overlap_keep_fraction = overlap_keep_fraction
        self.stuff_min_area = stuff_min_area

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        cfg = FusionConfig(
            self.instance_score_min, self.overlap_keep_fraction, self.stuff_min_area
        )
        return [
            fuse_panoptic(instances, labels, cfg, self.catalog)
            for instances, labels in X
        ]
