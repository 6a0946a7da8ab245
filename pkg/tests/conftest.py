import numpy as np
import pytest
from scipy.integrate import quad

from ratfilt.filters import RationalFilter, eval_filter
from ratfilt.weights import WeightVector, weight_at
from ratfilt.baselines import gauss_legendre_filter

GAMMA_V = np.array([0.95, 1.05, 1.4, 5.0, 0.01, 10.0, 20.0])


@pytest.fixture(scope="session")
def gamma_weights():
    return WeightVector(s=5, v=GAMMA_V.copy(), gap=0.95)


@pytest.fixture(scope="session")
def gl4():
    return gauss_legendre_filter(4, gap=0.95)


def random_filter(rng, m, gap=0.95, im_lo=0.1, im_hi=1.2):
    """Well-separated random filter for oracle sweeps."""
    beta = rng.normal(0.0, 0.5, m) + 1j * rng.normal(0.0, 0.5, m)
    z = rng.uniform(0.2, 1.6, m) + 1j * rng.uniform(im_lo, im_hi, m)
    z = z + np.arange(m) * (0.11 + 0.13j)  # keep poles apart
    return RationalFilter(beta=beta, z=z, gap=gap)


def random_weights(rng, gap=0.95, s=5):
    v1 = rng.uniform(gap, 0.999)
    v2 = rng.uniform(1.001, 1.0 / gap + 0.3)
    extra = np.sort(rng.uniform(v2 + 0.1, 8.0, s - 3))
    levels = rng.uniform(0.005, 25.0, s - 2)
    return WeightVector(s=s, v=np.concatenate([[v1, v2], extra, levels]), gap=gap)


def objective_by_quadrature(f, w, epsabs=1e-13, epsrel=1e-12):
    """Adaptive-quadrature oracle for the weighted least-squares objective.

    Integrates the even integrand over each weight segment (split at the
    indicator boundary) and doubles; independent of the closed form.
    """

    def integrand(x):
        ind = 1.0 if abs(x) < 1.0 else 0.0
        return weight_at(w, x) * (ind - eval_filter(f, x)) ** 2

    total = 0.0
    for p, q, wt in w.intervals():
        if wt == 0.0:
            continue
        pieces = [(p, min(q, 1.0)), (min(q, 1.0), q)] if p < 1.0 < q else [(p, q)]
        for lo, hi in pieces:
            if hi > lo:
                val, _ = quad(integrand, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=400)
                total += val
    return 2.0 * total


def gradient_by_finite_differences(x0, value_fn, step=1e-6):
    """Central finite differences with per-component adaptive step."""
    x0 = np.asarray(x0, dtype=float)
    grad = np.zeros_like(x0)
    for i in range(x0.size):
        h = step * max(1.0, abs(x0[i]))
        xp = x0.copy()
        xp[i] += h
        xm = x0.copy()
        xm[i] -= h
        grad[i] = (value_fn(xp) - value_fn(xm)) / (2.0 * h)
    return grad


def gap_respecting_problem(rng, n=200, n_inside=20, dense=True):
    """Hermitian problem whose mapped spectrum avoids the 0.95 gap annulus."""
    inside = rng.uniform(-0.9, 0.9, n_inside)
    outside = np.sign(rng.standard_normal(n - n_inside)) * rng.uniform(1.06, 4.0, n - n_inside)
    lam = np.sort(np.concatenate([inside, outside]))
    from ratfilt.eigensolver import EigenProblem
    if not dense:
        return EigenProblem(interval=(-1.0, 1.0), diagonal=lam)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    A = (Q * lam) @ Q.conj().T
    A = 0.5 * (A + A.conj().T)
    return EigenProblem(interval=(-1.0, 1.0), matrix=A, true_eigs=lam)
