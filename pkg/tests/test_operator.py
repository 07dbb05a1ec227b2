import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from equatorflow import catalog
from equatorflow.errors import ConfigError
from equatorflow.operator import (
    NCOMP,
    Grid,
    assemble,
    dump_triplets,
    gamma_conjugate,
    load_triplets,
    periodize,
    seam_blend,
)


def test_grid_basics():
    g = Grid(11.0, 601)
    assert g.h == pytest.approx(22.0 / 601)
    assert g.nodes[0] == -11.0
    assert g.size == 3 * 601
    # m odd, L = 11: y = 0 is not a node
    assert np.min(np.abs(g.nodes)) > 0.4 * g.h


@pytest.mark.parametrize("m, L", [(600, 11.0), (1, 11.0), (101, 0.0), (101.0, 11.0)])
def test_grid_rejects_bad_sizes(m, L):
    with pytest.raises(ConfigError):
        Grid(L, m)


def test_seam_blend_is_c1(linear):
    blend = seam_blend(linear, 11.0, 1.0)
    assert blend(10.0) == pytest.approx(10.0)
    assert blend(12.0) == pytest.approx(-10.0)
    eps = 1e-6
    assert (blend(10.0 + eps) - blend(10.0)) / eps == pytest.approx(1.0, abs=1e-4)
    assert (blend(12.0) - blend(12.0 - eps)) / eps == pytest.approx(1.0, abs=1e-4)


def test_periodize_matches_profile_inside(linear):
    g = Grid(11.0, 201)
    f = periodize(linear, g, 1.0)
    inside = np.abs(g.nodes) < 10.0
    assert np.allclose(f[inside], g.nodes[inside])
    # the seam cubic overshoots only slightly beyond the tail values
    assert np.max(np.abs(f)) < 10.0 * 1.02


def test_periodize_rejects_jump_on_node():
    segs = catalog.sign()
    g = Grid(10.0, 101)  # h = 0.198..., node at y=0 since (L/h) integer? check both cases
    nodes = g.nodes
    if np.min(np.abs(nodes)) < 1e-12:
        with pytest.raises(ConfigError, match="coincides"):
            periodize(segs, g)
    else:
        periodize(segs, g)


def test_periodize_rejects_short_profile():
    with pytest.raises(ConfigError, match="does not cover"):
        periodize(catalog.linear(extent=8.0), Grid(11.0, 101))


def test_hermitian_zero_diagonal(linear, small_grid):
    op = assemble(linear, small_grid, 1.3)
    assert op.is_hermitian()
    assert np.all(op.matrix.diagonal() == 0)
    assert op.size == NCOMP * small_grid.m


def test_block_structure(linear):
    g = Grid(11.0, 11)
    op = assemble(linear, g, 0.7)
    H = op.dense()
    f = periodize(linear, g)
    for i in range(g.m):
        e, u, v = 3 * i, 3 * i + 1, 3 * i + 2
        assert H[e, u] == 0.7 and H[u, e] == 0.7
        assert H[u, v] == pytest.approx(1j * f[i])
        assert H[v, u] == pytest.approx(-1j * f[i])
    # D_y = -i d/dy with the centered difference, periodic wrap
    c = 1.0 / (2 * g.h)
    assert H[0, 3 + 2] == pytest.approx(-1j * c)
    assert H[0, 3 * (g.m - 1) + 2] == pytest.approx(1j * c)


def test_real_symmetric_form(linear, small_grid):
    op = assemble(linear, small_grid, -2.0)
    A = op.real_symmetric().toarray()
    assert np.allclose(A, A.T)
    ev_c = np.linalg.eigvalsh(op.dense())
    ev_r = np.linalg.eigvalsh(A)
    assert np.allclose(ev_c, ev_r, atol=1e-12)


def test_bandwidth_interleaved(linear, small_grid):
    op = assemble(linear, small_grid, 1.0)
    assert op.bandwidth() == 5


def test_forward_scheme_breaks_hermiticity(linear, small_grid):
    op = assemble(linear, small_grid, 1.0, scheme="forward")
    assert not op.is_hermitian()
    with pytest.raises(ConfigError):
        assemble(linear, small_grid, 1.0, scheme="upwind")


def test_gamma_conjugate_equals_minus_xi():
    g = Grid(11.0, 51)
    f = catalog.three_jumps()
    for xi in (0.3, 2.0, 7.5):
        a = gamma_conjugate(assemble(f, g, xi)).matrix
        b = assemble(f, g, -xi).matrix
        assert abs(a - b).max() == 0.0


def test_triplet_round_trip(linear):
    op = assemble(linear, Grid(11.0, 15), 0.25)
    buf = io.StringIO()
    dump_triplets(op, buf)
    buf.seek(0)
    M = load_triplets(buf)
    assert abs(M - op.matrix).max() == 0.0


@settings(max_examples=25, deadline=None)
@given(xi=st.floats(-8, 8), slope=st.floats(0.3, 3.0))
def test_spectrum_gamma_symmetric(xi, slope):
    g = Grid(11.0, 41)
    f = catalog.linear(slope)
    a = np.linalg.eigvalsh(assemble(f, g, xi).dense())
    b = np.linalg.eigvalsh(assemble(f, g, -xi).dense())
    assert np.max(np.abs(a + b[::-1])) < 1e-10 * max(1.0, np.max(np.abs(a)))
