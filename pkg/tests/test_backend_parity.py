"""Cross-checks of the compiled kernels against the pure-NumPy reference."""

import numpy as np
import pytest

from lyapmotion import _kernels
from lyapmotion._kernels import pyfallback

import oracles

pytestmark = pytest.mark.skipif(
    _kernels.BACKEND != "compiled",
    reason="compiled kernel extension not available",
)

from lyapmotion._kernels import _core  # noqa: E402


def _pairs_2d(rng, n):
    for _ in range(n):
        off = rng.uniform(-2.5, 2.5, size=2)
        va = np.ascontiguousarray(oracles.random_convex_polygon(rng))
        vb = np.ascontiguousarray(oracles.random_convex_polygon(rng, center=off))
        yield va, vb


def _pairs_3d(rng, n):
    for _ in range(n):
        off = rng.uniform(-2.2, 2.2, size=3)
        va = np.ascontiguousarray(oracles.random_convex_polytope(rng))
        vb = np.ascontiguousarray(oracles.random_convex_polytope(rng, center=off))
        yield va, vb


def test_support_index_matches():
    rng = np.random.default_rng(3)
    for va, _ in _pairs_2d(rng, 50):
        d = rng.normal(size=2)
        assert _core.support_index(va, d) == pyfallback.support_index(va, d)


@pytest.mark.parametrize("dim", [2, 3])
def test_signed_distance_matches(dim):
    rng = np.random.default_rng(41 + dim)
    gen = _pairs_2d(rng, 120) if dim == 2 else _pairs_3d(rng, 60)
    for va, vb in gen:
        s_c, sd_c, pa_c, pb_c, n_c = _core.signed_distance(va, vb)
        s_p, sd_p, pa_p, pb_p, n_p = pyfallback.signed_distance(va, vb)
        assert s_c == s_p == 0
        assert sd_c == pytest.approx(sd_p, abs=1e-9)
        # witnesses must agree when the minimizing feature pair is unique
        assert np.allclose(pa_c, pa_p, atol=1e-6)
        assert np.allclose(pb_c, pb_p, atol=1e-6)
        assert np.allclose(n_c, n_p, atol=1e-6)


def test_spec_examples_match_on_both_backends():
    sq = lambda cx, cy: np.ascontiguousarray(
        np.array([[cx - .5, cy - .5], [cx + .5, cy - .5], [cx + .5, cy + .5], [cx - .5, cy + .5]]))
    for impl in (_core, pyfallback):
        assert impl.signed_distance(sq(0, 0), sq(3, 0))[1] == pytest.approx(2.0, abs=1e-9)
        assert impl.signed_distance(sq(0, 0), sq(0.5, 0))[1] == pytest.approx(-0.5, abs=1e-9)
        assert impl.signed_distance(sq(0, 0), sq(1, 0))[1] == 0.0
