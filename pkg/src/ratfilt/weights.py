"""Piecewise-constant even weight functions and their parameter space.

A weight vector with ``s`` intervals right of zero packs ``2s-3`` reals:
breakpoints ``v_1 < ... < v_{s-1}`` followed by the weights of the intervals
``[v_1, v_2), ..., [v_{s-2}, v_{s-1})``.  The weight on ``[0, v_1)`` is fixed
to 1 and the weight on ``[v_{s-1}, inf)`` is fixed to 0.

Membership keeps the first breakpoint inside ``[gap, 1]`` and the second at
or above 1, with strictly increasing breakpoints and nonnegative weights.
The published parameter-space definition states strict ``gap < v_1`` and
``v_2 > 1/gap``, but its own reference vectors and coordinate-search
intervals sit on or below those bounds, so the envelope implemented here is
the one all of them satisfy.
"""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np

from .filters import FilterFormatError, dump_document


class WeightError(Exception):
    """Base class for weight-vector errors."""


class OrderingViolationError(WeightError):
    """Breakpoint chain is not strictly increasing / violates the gap bounds."""


class UnsupportedWeightCountError(WeightError):
    """No construction rule is configured for this interval count."""


@dataclasses.dataclass(frozen=True, eq=False)
class WeightVector:
    """Element of the weight-function search space."""

    s: int
    v: np.ndarray
    gap: float

    def __post_init__(self):
        if self.s < 2:
            raise ValueError(f"s must be >= 2, got {self.s}")
        if not 0.0 < self.gap < 1.0:
            raise ValueError(f"gap must lie in (0, 1), got {self.gap}")
        v = np.asarray(self.v, dtype=float)
        if v.shape != (2 * self.s - 3,):
            raise ValueError(f"expected {2 * self.s - 3} parameters, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("weight parameters must be finite")
        object.__setattr__(self, "v", v)
        self._check_membership()

    def _check_membership(self):
        b = self.breakpoints
        if np.any(np.diff(b) <= 0.0):
            raise OrderingViolationError(f"breakpoints must increase strictly: {b}")
        if not self.gap <= b[0] <= 1.0:
            raise OrderingViolationError(
                f"first breakpoint {b[0]} outside [gap, 1] = [{self.gap}, 1]"
            )
        if self.s >= 3 and b[1] < 1.0:
            raise OrderingViolationError(f"second breakpoint {b[1]} must be >= 1")
        if np.any(self.levels < 0.0):
            raise OrderingViolationError(f"weights must be nonnegative: {self.levels}")

    @property
    def breakpoints(self) -> np.ndarray:
        return self.v[: self.s - 1]

    @property
    def levels(self) -> np.ndarray:
        return self.v[self.s - 1:]

    def intervals(self):
        """All finite-weight segments as (lo, hi, weight) triples.

        The trailing ``[v_{s-1}, inf)`` segment carries weight 0 and is
        omitted.
        """
        b = self.breakpoints
        lo = np.concatenate([[0.0], b[:-1]])
        wt = np.concatenate([[1.0], self.levels])
        return list(zip(lo.tolist(), b.tolist(), wt.tolist()))

    def equal_params(self, other: "WeightVector") -> bool:
        return self.s == other.s and self.gap == other.gap and bool(np.array_equal(self.v, other.v))


def weight_at(w: WeightVector, x: float) -> float:
    """Weight of the interval containing ``|x|`` (right-continuous)."""
    ax = abs(x)
    idx = int(np.searchsorted(w.breakpoints, ax, side="right"))
    if idx == 0:
        return 1.0
    if idx >= w.s - 1:
        return 0.0
    return float(w.levels[idx - 1])


def repair_into_vs(raw, s: int, gap: float) -> WeightVector:
    """Map a raw parameter vector back into the search space.

    Only negative components are repaired (by absolute value); a breakpoint
    chain that remains out of order afterwards raises OrderingViolationError.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (2 * s - 3,):
        raise ValueError(f"expected {2 * s - 3} parameters, got {raw.shape}")
    return WeightVector(s=s, v=np.abs(raw), gap=gap)


_BASE_LEVELS = (0.01, 10.0, 20.0)


def initial_weight_vector(s: int, gap: float) -> WeightVector:
    """Default starting weight vector for the rate minimization.

    For s = 5 this is (sqrt(gap), sqrt(1/gap), 1.4, 5, 0.01, 10, 20).  Larger
    s extends the breakpoints geometrically up to 5*(s-4) and pads the level
    pattern with 20; s < 5 has no configured rule.
    """
    if not 0.0 < gap < 1.0:
        raise ValueError(f"gap must lie in (0, 1), got {gap}")
    if s < 5:
        raise UnsupportedWeightCountError(f"no initial vector rule for s = {s}")
    v1 = math.sqrt(gap)
    v2 = math.sqrt(1.0 / gap)
    if s == 5:
        v = np.array([v1, v2, 1.4, 5.0, *_BASE_LEVELS])
    else:
        outer = np.geomspace(1.0 / gap, 5.0 * (s - 4), num=s - 2)[1:]
        levels = list(_BASE_LEVELS) + [20.0] * (s - 5)
        v = np.array([v1, v2, *outer, *levels])
    return WeightVector(s=s, v=v, gap=gap)


def save_weights(w: WeightVector, path) -> None:
    doc = {
        "format_version": 1,
        "s": int(w.s),
        "G": float(w.gap),
        "v": [float(x) for x in w.v],
    }
    with open(path, "w") as fh:
        fh.write(dump_document(doc))


def load_weights(path) -> WeightVector:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FilterFormatError(f"cannot read weight file {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format_version") != 1:
        raise FilterFormatError("unsupported or missing format_version")
    for key in ("s", "G", "v"):
        if key not in doc:
            raise FilterFormatError(f"weight file is missing field {key!r}")
    return WeightVector(s=int(doc["s"]), v=np.asarray(doc["v"], dtype=float), gap=float(doc["G"]))
