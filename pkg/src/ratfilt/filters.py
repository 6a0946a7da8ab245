"""Rational spectral filter algebra.

A filter is an even, real-valued rational function built from ``m`` complex
poles in the open first quadrant.  Each quadrant pole ``z`` with coefficient
``beta`` contributes four simple poles (``z``, ``conj(z)``, ``-z``,
``-conj(z)``) whose coefficients (``beta``, ``conj(beta)``, ``-beta``,
``-conj(beta)``) force the function to be real and even on the real axis:

    r(x) = sum_i  beta_i/(x - z_i) + conj(beta_i)/(x - conj(z_i))
                - beta_i/(x + z_i) - conj(beta_i)/(x + conj(z_i))

This module holds the representation, pointwise evaluation, the gap scaling
transform, the worst-case convergence rate, and the filter file format.
"""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np

GOLDEN_XTOL = 1e-12
GRID_SAMPLES = 4096


class FilterError(Exception):
    """Base class for filter-algebra errors."""


class DegenerateFilterError(FilterError):
    """The filter magnitude vanishes inside the search interval."""


class AlreadyScaledError(FilterError):
    """The gap scaling transform was applied twice."""


class FilterFormatError(FilterError):
    """A filter file does not follow the documented schema."""


@dataclasses.dataclass(frozen=True, eq=False)
class RationalFilter:
    """Quadrant representation of an even real rational filter.

    ``beta`` and ``z`` hold the first-quadrant coefficients and poles; the
    remaining ``3m`` poles of the full expansion are implicit.  ``gap`` is
    design metadata, ``scaled`` records whether the gap scaling transform has
    been applied.
    """

    beta: np.ndarray
    z: np.ndarray
    gap: float
    scaled: bool = False

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=complex))
        z = np.atleast_1d(np.asarray(self.z, dtype=complex))
        if beta.shape != z.shape or beta.ndim != 1 or beta.size == 0:
            raise ValueError("beta and z must be 1-d arrays of equal positive length")
        if not (np.all(np.isfinite(beta)) and np.all(np.isfinite(z))):
            raise ValueError("filter parameters must be finite")
        if not 0.0 < self.gap < 1.0:
            raise ValueError(f"gap must lie in (0, 1), got {self.gap}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "z", z)

    @property
    def m(self) -> int:
        return self.beta.size

    def expansion(self) -> tuple[np.ndarray, np.ndarray]:
        """Coefficients and poles of the full 4m-pole expansion."""
        beta, z = self.beta, self.z
        coeffs = np.concatenate([beta, beta.conj(), -beta, -beta.conj()])
        poles = np.concatenate([z, z.conj(), -z, -z.conj()])
        return coeffs, poles

    def validate(self) -> None:
        """Enforce the quadrant and distinct-pole invariants."""
        if not (np.all(self.z.real > 0.0) and np.all(self.z.imag > 0.0)):
            raise ValueError("poles must lie in the open first quadrant")
        _, poles = self.expansion()
        diff = np.abs(poles[:, None] - poles[None, :])
        np.fill_diagonal(diff, np.inf)
        if diff.min() == 0.0:
            raise ValueError("expanded poles must be pairwise distinct")

    def __call__(self, x):
        return eval_filter(self, x)

    def equal_params(self, other: "RationalFilter") -> bool:
        return (
            self.m == other.m
            and bool(np.array_equal(self.beta, other.beta))
            and bool(np.array_equal(self.z, other.z))
            and self.gap == other.gap
            and self.scaled == other.scaled
        )


@dataclasses.dataclass(frozen=True)
class WcrReport:
    """Extrema of ``|r|`` and the resulting worst-case convergence rate.

    ``num_max`` is the supremum of ``|r|`` beyond the gap (``|x| >= 1/gap``),
    ``den_min`` the minimum over the inner interval.  ``num_argmax`` may be
    ``math.inf`` when the supremum is attained in the tail limit.
    """

    wcr: float
    num_max: float
    num_argmax: float
    den_min: float
    den_argmin: float
    inner_interval: tuple[float, float]


def eval_expansion(coeffs: np.ndarray, poles: np.ndarray, x):
    """Evaluate ``sum_k coeffs_k / (x - poles_k)`` for real ``x``.

    ``x`` may be a scalar or an ndarray; infinities map to 0 (the filter
    decays like 1/x^2).  The imaginary residue is asserted small and dropped.
    """
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xv = np.atleast_1d(xa)
    finite = np.isfinite(xv)
    out = np.zeros(xv.shape, dtype=float)
    if finite.any():
        xf = xv[finite]
        terms = coeffs / (xf[:, None] - poles)
        total = terms.sum(axis=1)
        bound = 1e-12 * (1.0 + np.abs(total.real))
        if np.any(np.abs(total.imag) > bound):
            worst = np.max(np.abs(total.imag) / bound)
            raise FloatingPointError(
                f"imaginary residue exceeds realness tolerance (by {worst:.3g}x)"
            )
        out[finite] = total.real
    return float(out[0]) if scalar else out


def eval_filter(f: RationalFilter, x):
    """Evaluate the filter at real ``x`` (scalar or array)."""
    coeffs, poles = f.expansion()
    return eval_expansion(coeffs, poles, x)


def scale_filter(f: RationalFilter, gap: float) -> RationalFilter:
    """Apply the linear scaling u(x) = sqrt(gap)*x, i.e. r'(x) = r(u(x)).

    The scaled filter's parameters are the originals multiplied by
    sqrt(1/gap).  Scaling converts a design whose denominator interval is
    ``[-sqrt(gap), sqrt(gap)]`` into one covering the whole ``[-1, 1]``.
    """
    if f.scaled:
        raise AlreadyScaledError("filter is already scaled")
    if not 0.0 < gap <= 1.0:
        raise ValueError(f"gap must lie in (0, 1], got {gap}")
    s = gap ** -0.5
    return dataclasses.replace(f, beta=f.beta * s, z=f.z * s, scaled=True)


def _golden_batch(fn_vec, a: np.ndarray, b: np.ndarray, sign: float,
                  xtol: float = GOLDEN_XTOL, max_iter: int = 200):
    """Golden-section refinement run in lockstep over candidate brackets.

    Minimizes ``sign * fn`` on each [a_i, b_i]; one vectorized evaluation
    serves every bracket per step.  Returns (x_best, y_best) per bracket
    with y in the original (unsigned) scale.
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    invphi2 = invphi * invphi
    a = a.astype(float).copy()
    b = b.astype(float).copy()
    h = b - a
    c = a + invphi2 * h
    d = a + invphi * h
    yc = sign * fn_vec(c)
    yd = sign * fn_vec(d)
    for _ in range(max_iter):
        if np.all(h <= xtol):
            break
        left = yc < yd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        h = b - a
        c = a + invphi2 * h
        d = a + invphi * h
        yc = sign * fn_vec(c)
        yd = sign * fn_vec(d)
    take_c = yc < yd
    x_best = np.where(take_c, c, d)
    y_best = np.where(take_c, yc, yd)
    return x_best, sign * y_best


def _chebyshev_grid(lo: float, hi: float, n: int) -> np.ndarray:
    """Chebyshev-Lobatto points on [lo, hi] (endpoints included), ascending."""
    theta = np.linspace(0.0, math.pi, n)
    return lo + 0.5 * (hi - lo) * (1.0 - np.cos(theta))


def _search_extremum(fn_vec, lo, hi, mode, n=GRID_SAMPLES, max_candidates=24):
    """Locate the extremum of a scalar function on [lo, hi].

    Dense Chebyshev sampling followed by golden-section refinement around
    every local extremum candidate (plus the endpoint brackets).  ``mode``
    is "min" or "max".
    """
    xs = _chebyshev_grid(lo, hi, n)
    ys = fn_vec(xs)
    sign = 1.0 if mode == "min" else -1.0
    s = sign * ys
    interior = np.where((s[1:-1] <= s[:-2]) & (s[1:-1] <= s[2:]))[0] + 1
    if interior.size > max_candidates:
        interior = interior[np.argsort(s[interior], kind="stable")[:max_candidates]]
    best_idx = int(np.argmin(s))
    best_x = float(xs[best_idx])
    best_y = float(ys[best_idx])
    lo_edges = np.concatenate([xs[interior - 1], [xs[0], xs[-2]]])
    hi_edges = np.concatenate([xs[interior + 1], [xs[1], xs[-1]]])
    x_ref, y_ref = _golden_batch(fn_vec, lo_edges, hi_edges, sign)
    k = int(np.argmin(sign * y_ref))
    if sign * y_ref[k] < sign * best_y:
        best_x, best_y = float(x_ref[k]), float(y_ref[k])
    return best_x, best_y


def wcr_from_function(fn, gap: float, inner: str = "gap") -> WcrReport:
    """Worst-case convergence rate of an arbitrary even function.

    ``fn`` must accept scalar or ndarray real arguments (including inf).  The
    numerator extremum is the supremum of ``|fn|`` over ``[1/gap, inf)``
    (evenness makes the negative side redundant), searched in 1/x
    coordinates; the denominator is the minimum of ``|fn|`` over ``[0, gap]``
    (``inner="gap"``) or ``[0, 1]`` (``inner="full"``).
    """
    if not 0.0 < gap < 1.0:
        raise ValueError(f"gap must lie in (0, 1), got {gap}")
    if inner not in ("gap", "full"):
        raise ValueError("inner must be 'gap' or 'full'")
    b_inner = gap if inner == "gap" else 1.0

    def abs_vec(x):
        return np.abs(fn(x))

    den_argmin, den_min = _search_extremum(abs_vec, 0.0, b_inner, "min")
    if den_min < 1e-300:
        raise DegenerateFilterError(
            f"filter magnitude {den_min:.3g} vanishes at x = {den_argmin:.6g}"
        )

    # Tail |x| >= 1/gap via the substitution x = 1/t, t in (0, gap]; t = 0 is
    # the point at infinity where the filter evaluates to 0.
    def tail_vec(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            x = np.where(t == 0.0, np.inf, 1.0 / t)
        return np.abs(fn(x))

    t_best, num_max = _search_extremum(tail_vec, 0.0, gap, "max")
    num_argmax = math.inf if t_best == 0.0 else 1.0 / t_best
    return WcrReport(
        wcr=num_max / den_min,
        num_max=num_max,
        num_argmax=num_argmax,
        den_min=den_min,
        den_argmin=den_argmin,
        inner_interval=(-b_inner, b_inner),
    )


def compute_wcr(f: RationalFilter, gap: float, inner: str = "gap") -> WcrReport:
    """Worst-case convergence rate of a rational filter at the given gap."""
    coeffs, poles = f.expansion()
    return wcr_from_function(lambda x: eval_expansion(coeffs, poles, x), gap, inner)


# ---------------------------------------------------------------------------
# Filter file format
# ---------------------------------------------------------------------------

def _fmt_number(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    return f"{float(x):.17g}"


def _dump_json(obj, indent=0) -> str:
    """Deterministic JSON emitter serializing floats with 17 significant digits."""
    pad = "  " * indent
    if isinstance(obj, dict):
        items = [
            f'{pad}  {json.dumps(k)}: {_dump_json(v, indent + 1).lstrip()}'
            for k, v in obj.items()
        ]
        return pad + "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        flat = all(isinstance(v, (int, float, bool)) for v in obj)
        if flat:
            return pad + "[" + ", ".join(_fmt_number(v) for v in obj) + "]"
        items = [_dump_json(v, indent + 1) for v in obj]
        return pad + "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, str):
        return pad + json.dumps(obj)
    if obj is None:
        return pad + "null"
    return pad + _fmt_number(obj)


def dump_document(doc: dict) -> str:
    return _dump_json(doc) + "\n"


def filter_document(f: RationalFilter, wcr: float | None = None, config: dict | None = None) -> dict:
    doc = {
        "format_version": 1,
        "m": int(f.m),
        "gap": float(f.gap),
        "scaled": bool(f.scaled),
        "beta": [[float(b.real), float(b.imag)] for b in f.beta],
        "z": [[float(p.real), float(p.imag)] for p in f.z],
    }
    if wcr is not None:
        doc["wcr"] = float(wcr)
    if config is not None:
        doc["config"] = config
    return doc


def save_filter(f: RationalFilter, path, wcr: float | None = None, config: dict | None = None) -> None:
    with open(path, "w") as fh:
        fh.write(dump_document(filter_document(f, wcr=wcr, config=config)))


def _pairs_to_complex(pairs, name: str) -> np.ndarray:
    try:
        arr = np.asarray(pairs, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FilterFormatError(f"field {name!r} must be a list of [re, im] pairs") from exc
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise FilterFormatError(f"field {name!r} must be a list of [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


def load_filter(path) -> RationalFilter:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FilterFormatError(f"cannot read filter file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise FilterFormatError("filter file must hold a JSON object")
    if doc.get("format_version") != 1:
        raise FilterFormatError("unsupported or missing format_version")
    for key in ("m", "gap", "scaled", "beta", "z"):
        if key not in doc:
            raise FilterFormatError(f"filter file is missing field {key!r}")
    beta = _pairs_to_complex(doc["beta"], "beta")
    z = _pairs_to_complex(doc["z"], "z")
    if len(beta) != doc["m"] or len(z) != doc["m"]:
        raise FilterFormatError("m does not match the length of beta/z")
    try:
        f = RationalFilter(beta=beta, z=z, gap=float(doc["gap"]), scaled=bool(doc["scaled"]))
    except ValueError as exc:
        raise FilterFormatError(str(exc)) from exc
    return f
