"""General-purpose minimizers used by the filter design pipeline.

Four methods: full-matrix BFGS with a strong-Wolfe line search, a
limited-memory box-constrained BFGS with gradient projection, the
Nelder-Mead simplex, and a self-adaptive 1-d differential evolution for the
coordinate-descent subproblems.  All stochastic pieces are reproducible from
a single seed.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

_WOLFE_C1 = 1e-4
_WOLFE_C2 = 0.9
_MAX_BRACKETS = 50
_CURVATURE_REJECT = 1e-10


@dataclasses.dataclass(frozen=True)
class BoxSpec:
    """Lower bound on the magnitude of selected components.

    For a packed filter vector the constrained indices are the pole
    imaginary parts (the last m entries), keeping every pole at distance at
    least ``lb`` from the real axis.
    """

    lb: float
    constrained_indices: tuple[int, ...]

    def __post_init__(self):
        if not self.lb > 0.0:
            raise ValueError("lb must be positive")
        object.__setattr__(self, "constrained_indices", tuple(self.constrained_indices))

    @classmethod
    def for_poles(cls, m: int, lb: float) -> "BoxSpec":
        return cls(lb=lb, constrained_indices=tuple(range(3 * m, 4 * m)))


@dataclasses.dataclass
class OptimReport:
    """Outcome bookkeeping shared by all minimizers."""

    status: str
    iterations: int
    f_evals: int
    g_evals: int
    f: float
    g_norm: float
    h_resets: int = 0
    f_history: list | None = None
    x_history: list | None = None
    best_history: list | None = None

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def project_box(y: np.ndarray, box: BoxSpec) -> np.ndarray:
    """Clamp constrained components with magnitude below the bound to it.

    Components keep their sign (sign(0) counts as +1); everything else is
    untouched.  Idempotent, and the identity on feasible points.
    """
    out = np.array(y, dtype=float, copy=True)
    idx = np.fromiter(box.constrained_indices, dtype=int)
    vals = out[idx]
    low = np.abs(vals) < box.lb
    if low.any():
        signs = np.where(vals[low] >= 0.0, 1.0, -1.0)
        out[idx[low]] = signs * box.lb
    return out


def _zoom(phi, dphi, a_lo, a_hi, f_lo, g_lo, f_hi, f0, df0, max_iter=60):
    """Wolfe zoom phase with safeguarded quadratic interpolation.

    Near the evaluation-noise floor the sufficient-decrease margin can be
    unobservable; a probe with any strict decrease that meets the curvature
    condition is then accepted (the curvature bound alone keeps y's > 0).
    """
    for _ in range(max_iter):
        span = a_hi - a_lo
        if abs(span) < 1e-16:
            break
        denom = 2.0 * (f_hi - f_lo - g_lo * span)
        a_j = a_lo - g_lo * span * span / denom if (math.isfinite(denom) and denom != 0.0) else math.nan
        lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
        margin = 1e-3 * abs(span)
        if not math.isfinite(a_j) or a_j <= lo + margin or a_j >= hi - margin:
            a_j = a_lo + 0.5 * span
        f_j = phi(a_j)
        if not math.isfinite(f_j) or f_j > f0 + _WOLFE_C1 * a_j * df0 or f_j >= f_lo:
            if math.isfinite(f_j) and f_j < f0:
                g_j = dphi(a_j)
                if abs(g_j) <= -_WOLFE_C2 * df0:
                    return a_j, f_j, True
            a_hi, f_hi = a_j, f_j
            continue
        g_j = dphi(a_j)
        if abs(g_j) <= -_WOLFE_C2 * df0:
            return a_j, f_j, True
        if g_j * (a_hi - a_lo) >= 0.0:
            a_hi, f_hi = a_lo, f_lo
        a_lo, f_lo, g_lo = a_j, f_j, g_j
    ok = a_lo > 0.0 and math.isfinite(f_lo) and f_lo < f0
    return a_lo, f_lo, ok


def _wolfe_search(f, g, x, p, f0, grad0, state):
    """Strong-Wolfe line search along p; returns (alpha, f_new, g_new, ok)."""
    df0 = float(grad0 @ p)
    g_cache: dict[float, np.ndarray] = {}

    def phi(alpha):
        state["f_evals"] += 1
        return float(f(x + alpha * p))

    def dphi(alpha):
        state["g_evals"] += 1
        gv = np.asarray(g(x + alpha * p), dtype=float)
        g_cache[alpha] = gv
        return float(gv @ p)

    def finish(a, fv, ok):
        g_new = g_cache.get(a)
        if g_new is None:
            state["g_evals"] += 1
            g_new = np.asarray(g(x + a * p), dtype=float)
        return a, fv, g_new, ok

    alpha_prev, f_prev, d_prev = 0.0, f0, df0
    alpha = 1.0
    for i in range(_MAX_BRACKETS):
        f_i = phi(alpha)
        if not math.isfinite(f_i) or f_i > f0 + _WOLFE_C1 * alpha * df0 or (i > 0 and f_i >= f_prev):
            if math.isfinite(f_i) and f_i < f0:
                d_probe = dphi(alpha)
                if abs(d_probe) <= -_WOLFE_C2 * df0:
                    return alpha, f_i, g_cache[alpha], True
            a, fv, ok = _zoom(phi, dphi, alpha_prev, alpha, f_prev, d_prev, f_i, f0, df0)
            return finish(a, fv, ok)
        d_i = dphi(alpha)
        if abs(d_i) <= -_WOLFE_C2 * df0:
            return alpha, f_i, g_cache[alpha], True
        if d_i >= 0.0:
            a, fv, ok = _zoom(phi, dphi, alpha, alpha_prev, f_i, d_i, f_prev, f0, df0)
            return finish(a, fv, ok)
        alpha_prev, f_prev, d_prev = alpha, f_i, d_i
        alpha *= 2.0
    return finish(alpha_prev, f_prev, alpha_prev > 0.0 and f_prev < f0)


def bfgs_minimize(f, g, x0, tol: float = 1e-8, max_iter: int = 500,
                  record_history: bool = False):
    """Full-matrix BFGS with a strong-Wolfe line search.

    Terminates when the gradient infinity norm drops below
    ``tol * max(1, |f|)``.  The inverse-Hessian approximation starts at the
    identity and stays symmetric positive definite (verified by Cholesky on
    every accepted update); a failed line search returns the best iterate
    with a flag instead of raising.  Deep inside the basin, two consecutive
    relative decreases below 1e-13 stop the run early ("f_floor"): below
    that scale the objective evaluation is roundoff-dominated and further
    line searches only burn evaluations.
    """
    x = np.array(x0, dtype=float, copy=True)
    n = x.size
    H = np.eye(n)
    state = {"f_evals": 1, "g_evals": 1}
    fk = float(f(x))
    gk = np.asarray(g(x), dtype=float)
    f_hist = [fk] if record_history else None
    x_hist = [x.copy()] if record_history else None
    h_resets = 0
    floor_hits = 0
    status = "max_iter"
    k = 0
    for k in range(max_iter):
        gnorm = float(np.max(np.abs(gk)))
        if gnorm <= tol * max(1.0, abs(fk)):
            status = "converged"
            break
        if floor_hits >= 2:
            status = "f_floor"
            break
        p = -(H @ gk)
        if float(p @ gk) >= 0.0:
            H = np.eye(n)
            h_resets += 1
            p = -gk
        alpha, f_new, g_new, ok = _wolfe_search(f, g, x, p, fk, gk, state)
        if not ok or not math.isfinite(f_new) or f_new > fk:
            status = "line_search_failure"
            break
        in_basin = gnorm <= 1e-4 * max(1.0, abs(fk))
        if in_basin and fk - f_new <= 1e-13 * max(1.0, abs(f_new)):
            floor_hits += 1
        else:
            floor_hits = 0
        s = alpha * p
        y = g_new - gk
        x = x + s
        fk, gk = f_new, g_new
        if record_history:
            f_hist.append(fk)
            x_hist.append(x.copy())
        ys = float(y @ s)
        if ys > _CURVATURE_REJECT * float(np.linalg.norm(s) * np.linalg.norm(y)):
            rho = 1.0 / ys
            Hy = H @ y
            sHy = np.outer(s, Hy)
            H = H - rho * (sHy + sHy.T) + rho * (rho * float(y @ Hy) + 1.0) * np.outer(s, s)
            H = 0.5 * (H + H.T)
            try:
                np.linalg.cholesky(H)
            except np.linalg.LinAlgError:
                H = np.eye(n)
                h_resets += 1
    else:
        k = max_iter
    gnorm = float(np.max(np.abs(gk)))
    if status == "max_iter" and gnorm <= tol * max(1.0, abs(fk)):
        status = "converged"
    report = OptimReport(status=status, iterations=k, f_evals=state["f_evals"],
                         g_evals=state["g_evals"], f=fk, g_norm=gnorm,
                         h_resets=h_resets, f_history=f_hist, x_history=x_hist)
    return x, report


def _two_loop(gk, pairs):
    """L-BFGS two-loop recursion with standard gamma scaling."""
    q = gk.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        gamma = float(s @ y) / float(y @ y)
        q *= gamma
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return q


def lbfgsb_minimize(f, g, x0, box: BoxSpec, tol: float = 1e-8, max_iter: int = 1000,
                    memory: int = 10, record_history: bool = False,
                    max_f_evals: int | None = None):
    """Limited-memory BFGS with gradient projection onto the box.

    Components sitting at their bound are treated as equality constraints
    while the gradient holds them there: their entries are removed from the
    direction computation and re-released once the pull points back into
    the feasible side.  Trial points are projected, so every accepted
    iterate is feasible.  Curvature pairs are stored only when
    ``y's > 1e-10 * |s| * |y|``.
    """
    x = project_box(np.asarray(x0, dtype=float), box)
    idx = np.fromiter(box.constrained_indices, dtype=int)
    fk = float(f(x))
    gk = np.asarray(g(x), dtype=float)
    f_evals, g_evals = 1, 1
    pairs: list = []
    f_hist = [fk] if record_history else None
    x_hist = [x.copy()] if record_history else None
    status = "max_iter"
    floor_hits = 0
    k = 0
    for k in range(max_iter):
        pg = x - project_box(x - gk, box)
        pgnorm = float(np.max(np.abs(pg)))
        if pgnorm <= tol * max(1.0, abs(fk)):
            status = "converged"
            break
        if floor_hits >= 2:
            status = "f_floor"
            break
        if max_f_evals is not None and f_evals >= max_f_evals:
            status = "max_evals"
            break
        active = np.abs(np.abs(x[idx]) - box.lb) <= 1e-14 * max(1.0, box.lb)
        pull_out = np.sign(-gk[idx]) == np.where(x[idx] >= 0.0, 1.0, -1.0)
        fixed = active & ~pull_out
        g_free = gk.copy()
        g_free[idx[fixed]] = 0.0
        d = -_two_loop(g_free, pairs)
        d[idx[fixed]] = 0.0
        if float(d @ gk) >= 0.0:
            d = -g_free
            pairs.clear()
        alpha = 1.0
        accepted = False
        f_try = math.inf
        for _ in range(60):
            if max_f_evals is not None and f_evals >= max_f_evals:
                break
            x_try = project_box(x + alpha * d, box)
            step = x_try - x
            f_try = f(x_try)
            f_evals += 1
            if math.isfinite(f_try) and f_try <= fk + _WOLFE_C1 * float(gk @ step):
                accepted = True
                break
            if math.isfinite(f_try):
                dphi0 = float(gk @ d)
                denom = 2.0 * (f_try - fk - alpha * dphi0)
                a_new = -dphi0 * alpha * alpha / denom if denom > 0.0 else 0.5 * alpha
                alpha = min(max(a_new, 0.1 * alpha), 0.5 * alpha)
            else:
                alpha *= 0.5
        if not accepted:
            if max_f_evals is not None and f_evals >= max_f_evals:
                status = "max_evals"
            else:
                status = "line_search_failure"
            break
        g_new = np.asarray(g(x_try), dtype=float)
        g_evals += 1
        s = x_try - x
        y = g_new - gk
        in_basin = pgnorm <= 1e-4 * max(1.0, abs(fk))
        if in_basin and fk - f_try <= 1e-13 * max(1.0, abs(f_try)):
            floor_hits += 1
        else:
            floor_hits = 0
        x, fk, gk = x_try, float(f_try), g_new
        if record_history:
            f_hist.append(fk)
            x_hist.append(x.copy())
        ys = float(y @ s)
        if ys > _CURVATURE_REJECT * float(np.linalg.norm(s) * np.linalg.norm(y)):
            pairs.append((s, y, 1.0 / ys))
            if len(pairs) > memory:
                pairs.pop(0)
    else:
        k = max_iter
    pg = x - project_box(x - gk, box)
    gnorm = float(np.max(np.abs(pg)))
    if status == "max_iter" and gnorm <= tol * max(1.0, abs(fk)):
        status = "converged"
    report = OptimReport(status=status, iterations=k, f_evals=f_evals, g_evals=g_evals,
                         f=fk, g_norm=gnorm, f_history=f_hist, x_history=x_hist)
    return x, report


def nelder_mead(f, x0, ftol: float = 1e-10, max_evals: int | None = None,
                record_history: bool = False, initial_step: float = 0.05):
    """Nelder-Mead simplex (reflection 1, expansion 2, contractions 0.5, shrink 0.5).

    The initial simplex perturbs each coordinate by
    ``max(initial_step * |x0_i|, 1e-4)`` (default 5%); iteration stops when
    the relative f-spread of the simplex falls below ``ftol`` or the
    evaluation budget runs out.  Always returns the best vertex, whose value
    never increases between iterations.  Restart callers escape stagnation
    by re-invoking from the current iterate with an adjusted step.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    if max_evals is None:
        max_evals = 200 * max(n, 1)
    verts = [x0.copy()]
    for i in range(n):
        xp = x0.copy()
        xp[i] += max(initial_step * abs(x0[i]), 1e-4)
        verts.append(xp)
    fvals = []
    evals = 0
    for v in verts:
        fvals.append(float(f(v)))
        evals += 1
    verts = np.asarray(verts)
    fvals = np.asarray(fvals)
    best_hist = [float(np.min(fvals))] if record_history else None
    iterations = 0
    status = "max_evals"
    while evals < max_evals:
        order = np.argsort(fvals, kind="stable")
        verts, fvals = verts[order], fvals[order]
        spread = fvals[-1] - fvals[0]
        if not math.isinf(spread) and spread <= ftol * max(1.0, abs(fvals[0])):
            status = "ftol"
            break
        if math.isinf(fvals[0]):
            status = "ftol"  # nothing finite to compare; zero effective spread
            break
        iterations += 1
        centroid = verts[:-1].mean(axis=0)
        xr = centroid + (centroid - verts[-1])
        fr = float(f(xr))
        evals += 1
        if fvals[0] <= fr < fvals[-2]:
            verts[-1], fvals[-1] = xr, fr
        elif fr < fvals[0]:
            xe = centroid + 2.0 * (centroid - verts[-1])
            fe = float(f(xe))
            evals += 1
            if fe < fr:
                verts[-1], fvals[-1] = xe, fe
            else:
                verts[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = centroid + 0.5 * (xr - centroid)
            else:
                xc = centroid - 0.5 * (centroid - verts[-1])
            fc = float(f(xc))
            evals += 1
            if fc < min(fr, fvals[-1]):
                verts[-1], fvals[-1] = xc, fc
            else:
                for i in range(1, n + 1):
                    verts[i] = verts[0] + 0.5 * (verts[i] - verts[0])
                    fvals[i] = float(f(verts[i]))
                    evals += 1
        if record_history:
            best_hist.append(float(np.min(fvals)))
    order = np.argsort(fvals, kind="stable")
    verts, fvals = verts[order], fvals[order]
    report = OptimReport(status=status, iterations=iterations, f_evals=evals, g_evals=0,
                         f=float(fvals[0]), g_norm=math.nan, best_history=best_hist)
    return verts[0], report


def de_minimize_1d(f, lo: float, hi: float, max_evals: int = 300, seed=0):
    """Self-adaptive differential evolution on a scalar variable.

    rand/1/bin with jDE-style per-individual adaptation of F in [0.4, 1.0]
    and CR in [0.1, 1.0], population 15, boundary reflection, deterministic
    under the seed.  Returns (x_best, f_best).
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    rng = np.random.default_rng(seed)
    npop = 15
    X = lo + (hi - lo) * rng.random(npop)
    F = np.full(npop, 0.5)
    CR = np.full(npop, 0.9)
    fx = np.array([float(f(x)) for x in X])
    evals = npop
    while evals < max_evals:
        for i in range(npop):
            if evals >= max_evals:
                break
            F_t = 0.4 + 0.6 * rng.random() if rng.random() < 0.1 else F[i]
            CR_t = 0.1 + 0.9 * rng.random() if rng.random() < 0.1 else CR[i]
            choices = rng.permutation(npop)
            picks = [j for j in choices if j != i][:3]
            r1, r2, r3 = picks
            trial = X[r1] + F_t * (X[r2] - X[r3])
            if trial < lo:
                trial = lo + (lo - trial)
            if trial > hi:
                trial = hi - (trial - hi)
            trial = min(max(trial, lo), hi)
            f_t = float(f(trial))
            evals += 1
            if f_t <= fx[i]:
                X[i], fx[i], F[i], CR[i] = trial, f_t, F_t, CR_t
    best = int(np.argmin(fx))
    return float(X[best]), float(fx[best])
