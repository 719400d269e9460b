"""Normalized Shannon entropy primitives and argmax labeling.

Entropies are normalized by ln(support size) (ln 2 for score-only instances)
so semantic and instance confidences can be gated against each other. The
channel sum runs in a fixed order in float64 before the final float32 cast,
keeping results reproducible across runs and thread counts.
"""
from __future__ import annotations

import math

import numpy as np

from .instances import Instance, InstanceSet
from .maps import EntropyMap, SemanticLabelMap, SemanticProbMap
from .rle import rle_decode


def argmax_label(probs: SemanticProbMap, void_id: int) -> SemanticLabelMap:
    """Per-pixel argmax category; ties break to the lowest category id."""
    labels = probs.probs.argmax(axis=0).astype(np.uint16)
    return SemanticLabelMap(labels, void_id)


def semantic_entropy_map(probs: SemanticProbMap) -> EntropyMap:
    """Per pixel -sum_c p_c ln p_c / ln C, with 0 ln 0 := 0."""
    p = probs.probs.astype(np.float64)
    acc = np.zeros(p.shape[1:], dtype=np.float64)
    for c in range(p.shape[0]):
        plane = p[c]
        acc -= np.where(plane > 0.0, plane * np.log(np.where(plane > 0.0, plane, 1.0)), 0.0)
    acc /= math.log(p.shape[0])
    return EntropyMap(np.clip(acc, 0.0, 1.0).astype(np.float32))


def instance_entropy(inst: Instance) -> float:
    """Normalized entropy of the class distribution when present, else the
    Bernoulli entropy of (score, 1 - score) normalized by ln 2."""
    if inst.class_dist is not None:
        acc = 0.0
        for v in inst.class_dist:
            if v > 0.0:
                acc -= v * math.log(v)
        h = acc / math.log(len(inst.class_dist))
    else:
        s = inst.score
        acc = 0.0
        if s > 0.0:
            acc -= s * math.log(s)
        if s < 1.0:
            acc -= (1.0 - s) * math.log(1.0 - s)
        h = acc / math.log(2.0)
    return min(max(h, 0.0), 1.0)


def instance_entropy_map(instances: InstanceSet) -> EntropyMap:
    """Pixel-aligned instance certainty: per pixel the minimum entropy over
    covering instances, 1.0 where no instance covers the pixel."""
    values = np.ones((instances.height, instances.width), dtype=np.float32)
    for inst in instances:
        h = np.float32(instance_entropy(inst))
        covered = rle_decode(inst.mask)
        np.minimum(values, np.where(covered, h, np.float32(1.0)), out=values)
    return EntropyMap(values)
