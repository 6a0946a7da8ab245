"""Weighted least-squares distance between a rational filter and the ideal filter.

The objective is the exact integral

    f(beta, z) = integral  omega(x) * (ind(x) - r(x))^2  dx

over the real line, where ``ind`` is the indicator of (-1, 1) and ``omega``
a piecewise-constant even weight function.  Everything is integrated in
closed form through partial-fraction antiderivatives of the 4m-pole
expansion, so the gradient is exact as well; quadrature appears only in the
test suite as an independent oracle.

Real parameter layout ("packed" vector of length 4m):

    x = ( Re(beta) | Re(z) | Im(beta) | Im(z) )

so that indices 3m..4m-1 are exactly the pole imaginary parts, which is what
the box projection constrains.  Partials with respect to a complex parameter
are folded from holomorphic partials with respect to the expansion
coefficients and poles.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .filters import RationalFilter
from .weights import WeightVector

_COINCIDENT_TOL = 1e-10
_MIN_IMAG = 1e-12


class LengthMismatchError(ValueError):
    """Packed parameter vector has the wrong length."""


def pack(f: RationalFilter) -> np.ndarray:
    """Flatten a filter into the 4m-real optimizer layout."""
    return np.concatenate([f.beta.real, f.z.real, f.beta.imag, f.z.imag])


def unpack(x, m: int, gap: float, scaled: bool = False) -> RationalFilter:
    """Inverse of :func:`pack`.

    Does not enforce the quadrant invariant: the optimizer may wander across
    axes; use :func:`restore_quadrant` on converged iterates.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (4 * m,):
        raise LengthMismatchError(f"expected {4 * m} entries, got {x.shape}")
    beta = x[0:m] + 1j * x[2 * m:3 * m]
    z = x[m:2 * m] + 1j * x[3 * m:4 * m]
    return RationalFilter(beta=beta, z=z, gap=gap, scaled=scaled)


def restore_quadrant(f: RationalFilter) -> RationalFilter:
    """Reflect every pole into the closed first quadrant.

    The 4m-pole expansion is invariant under negating a pole pair or
    conjugating it, provided the coefficient follows (negation resp.
    conjugation), so the returned filter is the same function.
    """
    beta = f.beta.copy()
    z = f.z.copy()
    neg = z.real < 0.0
    beta[neg] = -beta[neg]
    z[neg] = -z[neg]
    flip = z.imag < 0.0
    beta[flip] = beta[flip].conj()
    z[flip] = z[flip].conj()
    return dataclasses.replace(f, beta=beta, z=z)


@dataclasses.dataclass(frozen=True)
class Segments:
    """Nonzero-weight integration segments of an even weight function.

    ``qc`` clips each segment at the indicator boundary 1; ``length`` is the
    measure of the overlap with [0, 1) (the constant part of the integrand).
    """

    p: np.ndarray
    q: np.ndarray
    wt: np.ndarray
    qc: np.ndarray
    length: np.ndarray
    has_cross: np.ndarray

    @classmethod
    def from_weights(cls, w: WeightVector) -> "Segments":
        triples = [(p, q, wt) for p, q, wt in w.intervals() if wt != 0.0]
        return cls.from_triples(triples)

    @classmethod
    def from_triples(cls, triples) -> "Segments":
        if not triples:
            z = np.empty(0)
            return cls(p=z, q=z, wt=z, qc=z, length=z, has_cross=z.astype(bool))
        p, q, wt = (np.asarray(v, dtype=float) for v in zip(*triples))
        qc = np.minimum(q, 1.0)
        has_cross = p < 1.0
        length = np.where(has_cross, qc - p, 0.0)
        return cls(p=p, q=q, wt=wt, qc=qc, length=length, has_cross=has_cross)


def _expansion_arrays(x: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    beta = x[0:m] + 1j * x[2 * m:3 * m]
    z = x[m:2 * m] + 1j * x[3 * m:4 * m]
    c = np.concatenate([beta, beta.conj(), -beta, -beta.conj()])
    a = np.concatenate([z, z.conj(), -z, -z.conj()])
    return c, a


_eye_cache: dict[int, np.ndarray] = {}


def _bool_eye(n: int) -> np.ndarray:
    eye = _eye_cache.get(n)
    if eye is None:
        eye = np.eye(n, dtype=bool)
        _eye_cache[n] = eye
    return eye


def _closed_form(c, a, seg: Segments, need_grad):
    """Closed-form objective pieces, vectorized over all weight segments.

    The integral of 1/(x - a) over [p, q] is the principal logarithm of the
    endpoint ratio: the path Im(x - a) = -Im(a) != 0 never crosses the
    branch cut and both endpoints share the sign of their imaginary part.
    Returns (value, Fc, Fa) with holomorphic partials w.r.t. the expansion
    coefficients and poles.
    """
    p = seg.p[:, None]
    q = seg.q[:, None]
    qc = seg.qc[:, None]
    wt = seg.wt
    pa = 1.0 / (p - a)
    qa = 1.0 / (q - a)
    L = np.log((q - a) * pa)
    pkk = pa - qa

    n = a.size
    eye = _bool_eye(n)
    D = a[:, None] - a[None, :]
    Dsafe = np.where(eye, 1.0, D)
    P = (L[:, :, None] - L[:, None, :]) / Dsafe
    P[:, eye] = pkk

    close = (np.abs(D) < _COINCIDENT_TOL) & ~eye
    ki = li = mid = None
    if close.any():
        # Confluent antiderivative around the midpoint with a second-order
        # correction; avoids catastrophic cancellation in 1/(a_k - a_l).
        ki, li = np.nonzero(close)
        mid = 0.5 * (a[ki] + a[li])
        e2 = (0.5 * D[ki, li]) ** 2
        pm = 1.0 / (p - mid)
        qm = 1.0 / (q - mid)
        P[:, ki, li] = (pm - qm) + (e2 / 3.0) * (pm**3 - qm**3)

    Pc = P @ c
    B = Pc @ c

    Lc = np.log((qc - a) * pa)
    Lc[~seg.has_cross] = 0.0
    cross = Lc @ c

    value = float(wt @ seg.length) - 2.0 * (wt @ cross) + wt @ B
    if not need_grad:
        return value, None, None

    Fc = -2.0 * (wt @ Lc) + 2.0 * (wt @ Pc)

    qkk = pa * pa - qa * qa
    G1 = (pkk[:, :, None] - P) / Dsafe
    G1[:, eye] = 0.0
    if close.any():
        pm2 = (1.0 / (p - mid)) ** 2
        qm2 = (1.0 / (q - mid)) ** 2
        G1[:, ki, li] = 0.5 * (pm2 - qm2)

    pkk_c = pa - 1.0 / (qc - a)
    pkk_c[~seg.has_cross] = 0.0
    Fa = (-2.0 * c * (wt @ pkk_c)
          + 2.0 * c * (wt @ (G1 @ c))
          + c * c * (wt @ qkk))
    return value, Fc, Fa


def _fold_to_real(Fc: np.ndarray, Fa: np.ndarray, m: int) -> np.ndarray:
    """Fold holomorphic expansion partials into real-layout partials."""
    s0, s1, s2, s3 = (slice(0, m), slice(m, 2 * m), slice(2 * m, 3 * m), slice(3 * m, 4 * m))
    d_re_beta = Fc[s0] + Fc[s1] - Fc[s2] - Fc[s3]
    d_im_beta = 1j * (Fc[s0] - Fc[s1] - Fc[s2] + Fc[s3])
    d_re_z = Fa[s0] + Fa[s1] - Fa[s2] - Fa[s3]
    d_im_z = 1j * (Fa[s0] - Fa[s1] - Fa[s2] + Fa[s3])
    return np.concatenate([d_re_beta.real, d_re_z.real, d_im_beta.real, d_im_z.real])


def value_from_params(x: np.ndarray, m: int, seg: Segments) -> float:
    """Objective at a packed parameter vector; +inf at invalid points.

    Points with a pole on (or numerically touching) the real axis make the
    integral meaningless; they are reported as +inf so line searches back
    off instead of crashing.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        return math.inf
    c, a = _expansion_arrays(x, m)
    if np.min(np.abs(a.imag)) < _MIN_IMAG:
        return math.inf
    total, _, _ = _closed_form(c, a, seg, need_grad=False)
    total = complex(total) * 2.0
    if abs(total.imag) > 1e-8 * (1.0 + abs(total.real)):
        return math.inf
    return float(total.real)


def value_and_grad_from_params(x: np.ndarray, m: int, seg: Segments) -> tuple[float, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        return math.inf, np.zeros(4 * m)
    c, a = _expansion_arrays(x, m)
    if np.min(np.abs(a.imag)) < _MIN_IMAG:
        return math.inf, np.zeros(4 * m)
    total, Fc, Fa = _closed_form(c, a, seg, need_grad=True)
    total = complex(total) * 2.0
    if abs(total.imag) > 1e-8 * (1.0 + abs(total.real)):
        return math.inf, np.zeros(4 * m)
    return float(total.real), _fold_to_real(2.0 * Fc, 2.0 * Fa, m)


def objective(f: RationalFilter, w: WeightVector) -> float:
    """Closed-form weighted squared deviation from the ideal filter."""
    seg = Segments.from_weights(w)
    val = value_from_params(pack(f), f.m, seg)
    if math.isinf(val):
        raise ValueError("objective undefined: a pole touches the real axis")
    return val


def gradient(f: RationalFilter, w: WeightVector) -> np.ndarray:
    """Exact gradient of :func:`objective` in the packed real layout."""
    seg = Segments.from_weights(w)
    val, g = value_and_grad_from_params(pack(f), f.m, seg)
    if math.isinf(val):
        raise ValueError("gradient undefined: a pole touches the real axis")
    return g
