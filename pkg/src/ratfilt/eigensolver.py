"""Desk-scale validation eigensolver.

Subspace iteration with rational-filter spectral projection on small dense
Hermitian problems: the search interval is mapped onto [-1, 1], the filter
is applied through shifted linear solves (one LU per quadrant pole and its
negation, each factorization reused for the conjugate shift and across
iterations), followed by orthonormalization and Rayleigh-Ritz extraction.
Also: convergence-rate measurement, resolvent condition numbers, and a
deterministic generator of benchmark search intervals over a synthetic
spectrum.
"""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np
import scipy.linalg as sla

from .filters import FilterFormatError, RationalFilter, dump_document, eval_filter


class HarnessError(Exception):
    pass


class SingularShiftError(HarnessError):
    """A shifted solve hit an exactly singular matrix (pole on an eigenvalue)."""


class SpectrumTooSmallError(HarnessError):
    """Benchmark generation needs at least 20 eigenvalues."""


@dataclasses.dataclass(frozen=True, eq=False)
class EigenProblem:
    """Dense Hermitian (or diagonal) eigenproblem with a search interval."""

    interval: tuple[float, float]
    matrix: np.ndarray | None = None
    diagonal: np.ndarray | None = None
    true_eigs: np.ndarray | None = None

    def __post_init__(self):
        a, b = self.interval
        if not a < b:
            raise ValueError(f"interval must satisfy a < b, got [{a}, {b}]")
        if (self.matrix is None) == (self.diagonal is None):
            raise ValueError("exactly one of matrix/diagonal must be given")
        if self.matrix is not None:
            A = np.asarray(self.matrix)
            if A.ndim != 2 or A.shape[0] != A.shape[1]:
                raise ValueError("matrix must be square")
            scale = np.linalg.norm(A)
            if scale > 0 and np.linalg.norm(A - A.conj().T) > 1e-13 * scale:
                raise ValueError("matrix must be Hermitian to 1e-13 relative")
            object.__setattr__(self, "matrix", A)
        else:
            d = np.asarray(self.diagonal, dtype=float)
            if d.ndim != 1:
                raise ValueError("diagonal must be 1-d")
            object.__setattr__(self, "diagonal", d)
            if self.true_eigs is None:
                object.__setattr__(self, "true_eigs", np.sort(d))
        if self.true_eigs is not None:
            object.__setattr__(self, "true_eigs", np.sort(np.asarray(self.true_eigs, dtype=float)))

    @property
    def n(self) -> int:
        return self.matrix.shape[0] if self.matrix is not None else self.diagonal.size

    def map_to_unit(self, lam):
        """Affine image of eigenvalue coordinates with interval -> [-1, 1]."""
        a, b = self.interval
        return (2.0 * np.asarray(lam) - (a + b)) / (b - a)

    def mapped_eigs(self) -> np.ndarray:
        if self.true_eigs is None:
            raise ValueError("problem has no known spectrum")
        return self.map_to_unit(self.true_eigs)

    def eigencount(self) -> int:
        a, b = self.interval
        lam = self.true_eigs
        if lam is None:
            raise ValueError("problem has no known spectrum")
        return int(np.count_nonzero((lam >= a) & (lam <= b)))

    def norm2(self) -> float:
        if self.true_eigs is not None:
            return float(np.max(np.abs(self.true_eigs)))
        return float(np.max(np.abs(np.linalg.eigvalsh(self.matrix))))


@dataclasses.dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual_history: tuple[float, ...]
    converged_count: int
    observed_rate: float
    predicted_rate: float
    M0: int
    converged: bool


class FilterApplicator:
    """Cached application of r(A_mapped) to a block of vectors.

    Dense problems factorize the 2m shifted matrices once (LU); the
    conjugate shifts reuse each factorization through conjugate-transpose
    solves.  Diagonal problems reduce to entrywise multiplication by the
    filter values on the mapped spectrum.
    """

    def __init__(self, filt: RationalFilter, problem: EigenProblem):
        self.filt = filt
        self.problem = problem
        a, b = problem.interval
        if problem.diagonal is not None:
            lam_hat = problem.map_to_unit(problem.diagonal)
            self._diag_values = eval_filter(filt, lam_hat)
            self._lus = None
        else:
            A_hat = (2.0 * problem.matrix - (a + b) * np.eye(problem.n)) / (b - a)
            self._diag_values = None
            self._lus = []
            for shift in np.concatenate([filt.z, -filt.z]):
                lu, piv = sla.lu_factor(A_hat - shift * np.eye(problem.n))
                if np.min(np.abs(np.diag(lu))) == 0.0:
                    raise SingularShiftError(f"shift {shift} hits an eigenvalue")
                self._lus.append((lu, piv))

    def apply(self, Y: np.ndarray) -> np.ndarray:
        if self._diag_values is not None:
            return self._diag_values[:, None] * Y
        m = self.filt.m
        Yc = np.asarray(Y, dtype=complex)
        out = np.zeros_like(Yc)
        for i in range(m):
            beta = self.filt.beta[i]
            lu_pos = self._lus[i]
            lu_neg = self._lus[m + i]
            # (A - conj(z))^{-1} = ((A - z)^{-1})^H for Hermitian A: reuse the
            # factorization with a conjugate-transpose solve (trans=2).
            out += beta * sla.lu_solve(lu_pos, Yc)
            out += np.conj(beta) * sla.lu_solve(lu_pos, Yc, trans=2)
            out -= beta * sla.lu_solve(lu_neg, Yc)
            out -= np.conj(beta) * sla.lu_solve(lu_neg, Yc, trans=2)
        return out


def apply_filter(filt: RationalFilter, problem: EigenProblem, Y: np.ndarray) -> np.ndarray:
    """One-shot spectral projection of the block Y (factorizes, applies)."""
    return FilterApplicator(filt, problem).apply(Y)


def _observed_rate(history: np.ndarray, norm: float) -> float:
    """Geometric mean of residual ratios over the linear phase.

    The first (pre-asymptotic) step is excluded, as are trailing residuals
    at the double-precision floor where ratios measure roundoff, not the
    filter.
    """
    floor = 100.0 * np.finfo(float).eps * norm
    usable = [r for r in history[1:] if r > 0.0]
    while len(usable) >= 2 and usable[-1] <= floor and usable[-2] <= floor:
        usable.pop()
    if len(usable) >= 2:
        ratios = np.asarray(usable[1:]) / np.asarray(usable[:-1])
        return float(np.exp(np.mean(np.log(ratios))))
    if len(history) >= 2 and history[0] > 0.0 and history[1] > 0.0:
        return float(history[1] / history[0])
    return math.nan


def subspace_iteration(filt: RationalFilter, problem: EigenProblem, C: float = 1.1,
                       tol: float = 1e-12, max_iters: int = 30, seed: int = 0,
                       M: int | None = None) -> SolveReport:
    """Filtered subspace iteration with Rayleigh-Ritz extraction.

    The subspace holds ceil(C * M) vectors for M interval eigenvalues;
    convergence requires every Ritz pair with Ritz value strictly inside the
    interval to reach a residual below tol * |A|.  The initial block is
    random from the seeded generator.
    """
    if C < 1.0:
        raise ValueError("C must be >= 1")
    if M is None:
        M = problem.eigencount()
    if M <= 0:
        raise ValueError("interval contains no eigenvalues")
    M0 = math.ceil(C * M)
    if M0 > problem.n:
        raise ValueError(f"subspace size {M0} exceeds problem size {problem.n}")
    a, b = problem.interval
    norm = problem.norm2()
    rng = np.random.default_rng(seed)

    applicator = FilterApplicator(filt, problem)
    if problem.diagonal is not None:
        A_mul = lambda V: problem.diagonal[:, None] * V
    else:
        A_mul = lambda V: problem.matrix @ V

    Q = rng.standard_normal((problem.n, M0)) + 1j * rng.standard_normal((problem.n, M0))
    history: list[float] = []
    converged = False
    converged_count = 0
    iterations = 0
    for iterations in range(1, max_iters + 1):
        Y = applicator.apply(Q)
        Q, _ = np.linalg.qr(Y)
        H = Q.conj().T @ A_mul(Q)
        H = 0.5 * (H + H.conj().T)
        theta, W = np.linalg.eigh(H)
        V = Q @ W
        R = A_mul(V) - V * theta
        rnorms = np.linalg.norm(R, axis=0)
        inside = (theta > a) & (theta < b)
        max_res = float(np.max(rnorms[inside])) if inside.any() else 0.0
        history.append(max_res)
        converged_count = int(np.count_nonzero(inside & (rnorms <= tol * norm)))
        if inside.any() and max_res <= tol * norm:
            converged = True
            break

    predicted = math.nan
    if problem.true_eigs is not None:
        predicted = predicted_rate(filt, problem, M0)
    return SolveReport(
        iterations=iterations,
        residual_history=tuple(history),
        converged_count=converged_count,
        observed_rate=_observed_rate(np.asarray(history), norm),
        predicted_rate=predicted,
        M0=M0,
        converged=converged,
    )


def predicted_rate(filt: RationalFilter, problem: EigenProblem, M0: int) -> float:
    """Spectrum-aware convergence rate |r(lam_out)| / |r(lam_in)|.

    lam_in minimizes |r| over the mapped interval eigenvalues; lam_out
    maximizes |r| over eigenvalues outside the 0-centered interval holding
    the M0 smallest-magnitude mapped eigenvalues.  Rate 0 when the subspace
    covers the whole spectrum.
    """
    lam_hat = problem.mapped_eigs()
    vals = np.abs(eval_filter(filt, lam_hat))
    inside = np.abs(lam_hat) <= 1.0
    if not inside.any():
        raise ValueError("no eigenvalues inside the mapped interval")
    r_in = float(np.min(vals[inside]))
    if M0 >= lam_hat.size:
        return 0.0
    order = np.argsort(np.abs(lam_hat), kind="stable")
    outside = order[M0:]
    r_out = float(np.max(vals[outside]))
    return r_out / r_in


def condition_report(filt: RationalFilter, problem: EigenProblem) -> np.ndarray:
    """Per-quadrant-pole condition number of the shifted resolvents.

    For Hermitian A this is max |lam_hat - z_i| / min |lam_hat - z_i| over
    the mapped spectrum.
    """
    lam_hat = problem.mapped_eigs()
    dist = np.abs(lam_hat[:, None] - filt.z[None, :])
    return dist.max(axis=0) / dist.min(axis=0)


def generate_slices(spectrum: np.ndarray, count: int, seed: int = 0) -> list[EigenProblem]:
    """Deterministic benchmark intervals over a sorted synthetic spectrum.

    Each slice selects 5-15% of the eigenvalues; interval boundaries fall at
    fractions {0.1, 0.5, 0.9} of the local gap next to the selected block,
    varying how strongly eigenvalues cluster at the boundary.  Every slice
    becomes a diagonal EigenProblem over the full spectrum.
    """
    spectrum = np.asarray(spectrum, dtype=float)
    n = spectrum.size
    if n < 20:
        raise SpectrumTooSmallError(f"need at least 20 eigenvalues, got {n}")
    if count < 1:
        raise ValueError("count must be >= 1")
    if np.any(np.diff(spectrum) < 0):
        raise ValueError("spectrum must be sorted")
    rng = np.random.default_rng(seed)
    fractions = np.array([0.1, 0.5, 0.9])
    gaps = np.diff(spectrum)
    med_gap = float(np.median(gaps))
    k_lo = max(1, math.ceil(0.05 * n))
    k_hi = max(k_lo, math.floor(0.15 * n))
    problems = []
    for _ in range(count):
        k = int(rng.integers(k_lo, k_hi + 1))
        start = int(rng.integers(0, n - k + 1))
        f_left, f_right = rng.choice(fractions, size=2)
        if start == 0:
            a = spectrum[0] - (1.0 - f_left) * med_gap
        else:
            a = spectrum[start - 1] + f_left * (spectrum[start] - spectrum[start - 1])
        stop = start + k - 1
        if stop == n - 1:
            b = spectrum[-1] + f_right * med_gap
        else:
            b = spectrum[stop] + f_right * (spectrum[stop + 1] - spectrum[stop])
        problems.append(EigenProblem(interval=(float(a), float(b)), diagonal=spectrum))
    return problems


def flop_estimate(n: int, m: int, M0: int, iterations: int) -> float:
    """Rough dense-solver FLOP model of one filtered subspace run.

    Counts complex LU factorizations of the 2m shifted matrices (done once),
    the 4m triangular solves per iteration, the QR of the iterate block and
    the Rayleigh-Ritz dense solve.  A deliberate approximation: it prices
    diagonal shortcuts as if solved densely so filter comparisons stay on a
    common scale.
    """
    lu = 2 * m * (8.0 / 3.0) * n**3
    per_iter = 4 * m * 8.0 * n**2 * M0 + 2.0 * n * M0**2 + (16.0 / 3.0) * M0**3 + 8.0 * n**2 * M0
    return lu + iterations * per_iter


# ---------------------------------------------------------------------------
# Problem file format
# ---------------------------------------------------------------------------

def save_problem(problem: EigenProblem, path) -> None:
    doc = {"format_version": 1, "n": problem.n,
           "interval": [float(problem.interval[0]), float(problem.interval[1])]}
    if problem.diagonal is not None:
        doc["diagonal"] = [float(x) for x in problem.diagonal]
    else:
        A = problem.matrix.astype(complex)
        doc["matrix"] = [[float(v.real), float(v.imag)] for v in A.ravel()]
    if problem.true_eigs is not None and problem.diagonal is None:
        doc["true_eigs"] = [float(x) for x in problem.true_eigs]
    with open(path, "w") as fh:
        fh.write(dump_document(doc))


def load_problem(path) -> EigenProblem:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FilterFormatError(f"cannot read problem file {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format_version") != 1:
        raise FilterFormatError("unsupported or missing format_version")
    for key in ("n", "interval"):
        if key not in doc:
            raise FilterFormatError(f"problem file is missing field {key!r}")
    n = int(doc["n"])
    interval = tuple(float(x) for x in doc["interval"])
    true_eigs = np.asarray(doc["true_eigs"], dtype=float) if "true_eigs" in doc else None
    if "diagonal" in doc:
        diag = np.asarray(doc["diagonal"], dtype=float)
        if diag.size != n:
            raise FilterFormatError("diagonal length does not match n")
        return EigenProblem(interval=interval, diagonal=diag, true_eigs=true_eigs)
    if "matrix" not in doc:
        raise FilterFormatError("problem file needs either 'matrix' or 'diagonal'")
    flat = np.asarray(doc["matrix"], dtype=float)
    if flat.shape != (n * n, 2):
        raise FilterFormatError("matrix must hold n*n [re, im] pairs (row-major)")
    A = (flat[:, 0] + 1j * flat[:, 1]).reshape(n, n)
    return EigenProblem(interval=interval, matrix=A, true_eigs=true_eigs)
