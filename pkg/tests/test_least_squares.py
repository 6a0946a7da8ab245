import math

import numpy as np
import pytest

from ratfilt.filters import RationalFilter, eval_filter
from ratfilt.least_squares import (
    LengthMismatchError,
    Segments,
    gradient,
    objective,
    pack,
    restore_quadrant,
    unpack,
    value_and_grad_from_params,
    value_from_params,
)
from ratfilt.weights import WeightVector
from conftest import (
    gradient_by_finite_differences,
    objective_by_quadrature,
    random_filter,
    random_weights,
)


class TestPacking:
    def test_layout(self):
        f = RationalFilter(beta=np.array([1 + 2j]), z=np.array([3 + 4j]), gap=0.9)
        assert np.array_equal(pack(f), [1.0, 3.0, 2.0, 4.0])

    def test_roundtrip_bit_exact(self):
        f = random_filter(np.random.default_rng(0), 3)
        g = unpack(pack(f), 3, f.gap)
        assert g.equal_params(f)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            unpack(np.zeros(5), 2, 0.9)

    def test_unpack_does_not_enforce_quadrant(self):
        f = unpack(np.array([1.0, -0.5, 0.0, -0.7]), 1, 0.9)
        assert f.z[0] == -0.5 - 0.7j


class TestQuadrantRestoration:
    def test_filter_function_unchanged(self):
        rng = np.random.default_rng(1)
        xs = np.linspace(-3, 3, 101)
        signs = [(1, 1), (-1, 1), (1, -1), (-1, -1)]
        base = random_filter(rng, 4)
        for sr, si in signs:
            # reflect poles out of the quadrant with the matching
            # coefficient transform, so the function itself is unchanged
            z = base.z.real * sr + 1j * base.z.imag * si
            beta = base.beta.copy()
            if sr < 0:
                beta = -beta
            if si < 0:
                beta = beta.conj()
            f = RationalFilter(beta=beta, z=z, gap=base.gap)
            restored = restore_quadrant(f)
            assert np.all(restored.z.real > 0) and np.all(restored.z.imag > 0)
            ref = eval_filter(f, xs)
            out = eval_filter(restored, xs)
            assert np.all(np.abs(out - ref) <= 1e-13 * (1.0 + np.abs(ref)))


class TestObjective:
    def test_zero_filter_closed_value(self, gamma_weights):
        f = RationalFilter(beta=np.zeros(2, dtype=complex),
                           z=np.array([0.5 + 0.5j, 1.0 + 1.0j]), gap=0.95)
        assert objective(f, gamma_weights) == pytest.approx(1.901, rel=1e-14)

    def test_nonnegative(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            f = random_filter(rng, int(rng.integers(1, 5)))
            w = random_weights(rng)
            assert objective(f, w) >= 0.0

    def test_against_quadrature_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(12):
            f = random_filter(rng, int(rng.integers(1, 5)))
            w = random_weights(rng)
            closed = objective(f, w)
            oracle = objective_by_quadrature(f, w)
            assert closed == pytest.approx(oracle, rel=1e-8)

    def test_single_segment_weights(self):
        # All weights zero except the fixed unit weight on [0, v1).
        rng = np.random.default_rng(4)
        f = random_filter(rng, 2)
        w = WeightVector(s=5, v=np.array([0.96, 1.1, 2.0, 4.0, 0.0, 0.0, 0.0]), gap=0.95)
        assert objective(f, w) == pytest.approx(objective_by_quadrature(f, w), rel=1e-9)

    def test_near_coincident_poles(self, gamma_weights):
        beta = np.array([0.3 + 0.2j, 0.1 - 0.4j])
        z = np.array([0.8 + 0.6j, 0.8 + 0.6j + 5e-11])
        f = RationalFilter(beta=beta, z=z, gap=0.95)
        closed = objective(f, gamma_weights)
        oracle = objective_by_quadrature(f, gamma_weights)
        assert closed == pytest.approx(oracle, rel=1e-8)

    def test_pole_on_axis_is_invalid_point(self, gamma_weights):
        seg = Segments.from_weights(gamma_weights)
        x = np.array([1.0, 0.5, 0.0, 0.0])  # Im z = 0
        assert value_from_params(x, 1, seg) == math.inf


class TestGradient:
    def test_matches_finite_differences(self, gamma_weights):
        rng = np.random.default_rng(5)
        seg = Segments.from_weights(gamma_weights)
        for _ in range(10):
            m = int(rng.integers(1, 5))
            f = random_filter(rng, m)
            x0 = pack(f)
            _, g = value_and_grad_from_params(x0, m, seg)
            fd = gradient_by_finite_differences(x0, lambda x: value_from_params(x, m, seg))
            scale = np.maximum(np.abs(fd), 1e-6 * np.max(np.abs(fd)))
            assert np.all(np.abs(g - fd) <= 1e-6 * scale)

    def test_layout_of_pole_imaginary_part(self, gamma_weights):
        # Component 3m..4m-1 must be the derivative in the pole imaginary
        # parts; checked for m=1 where index 3 is Im(z_1).
        seg = Segments.from_weights(gamma_weights)
        f = random_filter(np.random.default_rng(6), 1)
        x0 = pack(f)
        _, g = value_and_grad_from_params(x0, 1, seg)
        h = 1e-6 * max(1.0, abs(x0[3]))
        xp = x0.copy()
        xp[3] += h
        xm = x0.copy()
        xm[3] -= h
        fd = (value_from_params(xp, 1, seg) - value_from_params(xm, 1, seg)) / (2 * h)
        assert g[3] == pytest.approx(fd, rel=1e-6)

    def test_public_wrapper(self, gamma_weights):
        f = random_filter(np.random.default_rng(7), 2)
        g = gradient(f, gamma_weights)
        assert g.shape == (8,)


class TestInvariances:
    def test_weight_scaling_scales_value_and_gradient(self):
        # Scaling the entire weight function (fixed leading 1 included)
        # multiplies the objective and its gradient exactly by the factor.
        rng = np.random.default_rng(8)
        f = random_filter(rng, 2)
        x0 = pack(f)
        triples = [(0.0, 0.95, 1.0), (0.95, 1.05, 0.01), (1.05, 2.0, 10.0)]
        seg1 = Segments.from_triples(triples)
        c = 3.7
        seg_c = Segments.from_triples([(p, q, c * wt) for p, q, wt in triples])
        v1, g1 = value_and_grad_from_params(x0, 2, seg1)
        vc, gc = value_and_grad_from_params(x0, 2, seg_c)
        assert vc == pytest.approx(c * v1, rel=1e-14)
        assert np.allclose(gc, c * g1, rtol=1e-12, atol=1e-15)

    def test_pair_permutation_invariance(self, gamma_weights):
        f = random_filter(np.random.default_rng(9), 3)
        perm = [2, 0, 1]
        g = RationalFilter(beta=f.beta[perm], z=f.z[perm], gap=f.gap)
        assert objective(g, gamma_weights) == pytest.approx(objective(f, gamma_weights), rel=1e-14)

    def test_reflection_invariance(self, gamma_weights):
        f = random_filter(np.random.default_rng(10), 2)
        beta = f.beta.copy()
        z = f.z.copy()
        beta[0] = beta[0].conj()
        z[0] = z[0].conj()
        g = RationalFilter(beta=beta, z=z, gap=f.gap)
        assert objective(g, gamma_weights) == pytest.approx(objective(f, gamma_weights), rel=1e-13)
