"""Run-length encoded binary masks and mask IoU.

Runs are row-major and alternate zero-run / one-run starting with a zero-run
(possibly of length 0), so ``runs`` always describes the mask unambiguously
and sums to ``height * width``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class RleMask:
    height: int
    width: int
    runs: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "runs", tuple(int(r) for r in self.runs))
        if self.height <= 0 or self.width <= 0:
            raise ValidationError("mask dimensions must be positive")
        if any(r < 0 for r in self.runs):
            raise ValidationError("run lengths must be non-negative")
        if sum(self.runs) != self.height * self.width:
            raise ValidationError(
                f"runs sum to {sum(self.runs)}, expected {self.height * self.width}"
            )

    @property
    def area(self) -> int:
        """Number of foreground pixels (sum of one-runs)."""
        return sum(self.runs[1::2])

    def decode(self) -> np.ndarray:
        return rle_decode(self)


def rle_encode(bits: np.ndarray) -> RleMask:
    """Encode a dense binary map; all-zeros encodes to the single run [H*W]."""
    bits = np.asarray(bits)
    if bits.ndim != 2:
        raise ValidationError("expected a 2-d binary map")
    flat = (bits != 0).ravel()
    n = flat.size
    if n == 0:
        raise ValidationError("mask dimensions must be positive")
    # change points between runs of equal value
    edges = np.flatnonzero(np.diff(flat))
    bounds = np.concatenate(([0], edges + 1, [n]))
    lengths = np.diff(bounds)
    runs = lengths.tolist()
    if flat[0]:
        runs = [0] + runs
    return RleMask(int(bits.shape[0]), int(bits.shape[1]), tuple(runs))


def rle_decode(mask: RleMask) -> np.ndarray:
    values = np.zeros(len(mask.runs), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, np.asarray(mask.runs, dtype=np.int64))
    return flat.reshape(mask.height, mask.width)


def mask_iou(a: RleMask, b: RleMask) -> float:
    """Intersection over union of two same-sized masks; 0.0 when both empty."""
    if (a.height, a.width) != (b.height, b.width):
        raise ValidationError(
            f"mask dimensions differ: {(a.height, a.width)} vs {(b.height, b.width)}"
        )
    da = rle_decode(a)
    db = rle_decode(b)
    inter = int(np.count_nonzero(da & db))
    union = int(np.count_nonzero(da | db))
    if union == 0:
        return 0.0
    return inter / union
