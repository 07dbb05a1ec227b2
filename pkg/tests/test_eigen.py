import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from equatorflow import catalog
from equatorflow.eigen import (
    banded_form,
    choose_method,
    dense_negative_count,
    eig_full,
    eig_window,
    eigenvalues,
    folded_order,
    inertia_count,
    localize_degenerate,
    negative_count,
    residual,
    solve,
)
from equatorflow.errors import EigenSolverError
from equatorflow.operator import Grid, assemble
from equatorflow.oracles import plane_wave_spectrum


def test_folded_order_is_permutation():
    for m in (3, 5, 101):
        o = folded_order(m)
        assert sorted(o) == list(range(m))
        # ring neighbours end up at most two positions apart
        pos = np.empty(m, int)
        pos[o] = np.arange(m)
        gaps = np.abs(pos - pos[(np.arange(m) + 1) % m])
        assert gaps.max() <= 2


def test_banded_form_reconstructs_matrix(linear):
    op = assemble(linear, Grid(11.0, 31), 0.9)
    ab, perm = banded_form(op)
    b, n = ab.shape[0] - 1, ab.shape[1]
    assert b == 8
    B = np.zeros((n, n))
    for d in range(b + 1):
        i = np.arange(n - d)
        B[i + d, i] = ab[d, : n - d]
        B[i, i + d] = ab[d, : n - d]
    A = op.real_symmetric().toarray()[np.ix_(perm, perm)]
    assert np.array_equal(A, B)


@pytest.mark.parametrize("name", ["linear", "sign", "three_jumps"])
def test_negative_count_matches_dense(name):
    op = assemble(catalog.CATALOG[name](), Grid(11.0, 131), -1.7)
    ab, _ = banded_form(op)
    w = np.linalg.eigvalsh(op.real_symmetric().toarray())
    for sigma in (-30.0, -2.2, 0.013, 0.5, 4.0):
        assert negative_count(ab, sigma) == np.sum(w < sigma)
        assert dense_negative_count(op, sigma) == np.sum(w < sigma)
        assert inertia_count(op, sigma) == np.sum(w < sigma)


def test_constant_profile_closed_form():
    g = Grid(11.0, 61)
    f = catalog.constant(2.0)
    for xi in (0.0, 1.0):
        ev = eigenvalues(assemble(f, g, xi), "dense")
        ref = plane_wave_spectrum(2.0, xi, g)
        assert np.max(np.abs(ev - ref) / np.maximum(1, np.abs(ref))) < 1e-12


@pytest.mark.parametrize("xi", [-4.0, -0.05, 0.0, 0.3, 6.0])
def test_banded_window_equals_dense(xi):
    op = assemble(catalog.linear_with_jump(), Grid(11.0, 201), xi)
    a = solve(op, (0.05, 6.0), method="banded")
    b = solve(op, (0.05, 6.0), method="dense")
    assert len(a) == len(b)
    assert np.max(np.abs(a.values - b.values)) < 1e-10
    assert np.all(a.residuals <= 1e-9 * (1 + np.abs(a.values)))


def test_window_edges_inclusive():
    # E = -xi = 0.05 sits exactly on the lower edge; both routes must keep it
    op = assemble(catalog.linear_with_jump(), Grid(11.0, 201), -0.05)
    for method in ("dense", "banded"):
        sp = solve(op, (0.05, 6.0), method=method)
        assert np.min(np.abs(sp.values - 0.05)) < 1e-12


def test_eigenvectors_orthonormal(linear):
    op = assemble(linear, Grid(11.0, 151), 1.0)
    sp = solve(op, (0.05, 8.0), method="banded")
    G = sp.vectors.conj().T @ sp.vectors
    assert np.max(np.abs(G - np.eye(len(sp)))) < 1e-9


def test_degenerate_pair_is_localised(linear):
    # interior Kelvin mode and its copy at the periodic seam are degenerate
    op = assemble(linear, Grid(11.0, 201), 1.0)
    sp = solve(op, (0.99, 1.01))
    assert len(sp) == 2
    y = op.grid.nodes
    mass = np.abs(sp.vectors.reshape(op.grid.m, 3, -1)) ** 2
    inner = mass[np.abs(y) < 0.9 * op.grid.L].sum(axis=(0, 1))
    assert sorted(np.round(inner, 6)) == [0.0, 1.0]


def test_localize_noop_without_grid():
    phi = np.eye(3)
    assert localize_degenerate(np.array([1.0, 1.0, 1.0]), phi, None) is phi


def test_phase_convention(linear):
    sp = solve(assemble(linear, Grid(11.0, 101), 2.0), (0.05, 5.0))
    for k in range(len(sp)):
        phi = sp.vectors[:, k] * np.tile([1, 1, -1j], 101)  # back to the real form
        mag = np.abs(phi)
        first = np.argmax(mag >= 0.5 * mag.max())
        assert phi[first].real > 0


def test_public_wrappers(linear):
    op = assemble(linear, Grid(11.0, 51), 0.4)
    full = eig_full(op)
    assert len(full) == op.size
    win = eig_window(op, 0.1, 2.0)
    assert all(0.1 <= p.E <= 2.0 for p in win)
    assert all(residual(op, p) < 1e-9 for p in win)
    assert abs(sum(p.E for p in full)) < 1e-9


def test_forward_scheme_refused(linear):
    op = assemble(linear, Grid(11.0, 51), 0.4, scheme="forward")
    with pytest.raises(EigenSolverError):
        solve(op)


def test_choose_method(linear):
    assert choose_method(assemble(linear, Grid(11.0, 51), 0.0), "auto") == "dense"
    assert choose_method(assemble(linear, Grid(11.0, 101), 0.0), "auto") == "banded"
    with pytest.raises(ValueError):
        choose_method(assemble(linear, Grid(11.0, 51), 0.0), "lanczos")
    with pytest.raises(ValueError):
        solve(assemble(linear, Grid(11.0, 51), 0.0), (1.0, 0.5))


def test_frozen_low_modes():
    # derived once from the dense solver (independent of the banded route)
    op = assemble(catalog.linear(), Grid(11.0, 201), 1.0)
    sp = solve(op, (0.05, 2.5), method="banded")
    kept = sp.values[np.abs(sp.values - 1.0) > 1e-9]
    ref = eigenvalues(op, "dense")
    ref = ref[(ref >= 0.05) & (ref <= 2.5) & (np.abs(ref - 1.0) > 1e-9)]
    assert np.allclose(kept, ref, atol=1e-11)


@settings(max_examples=15, deadline=None)
@given(xi=st.floats(-8, 8), lo=st.floats(0.05, 3.0), width=st.floats(0.1, 4.0))
def test_window_count_property(xi, lo, width):
    op = assemble(catalog.sign(), Grid(11.0, 101), xi)
    w = eigenvalues(op, "dense")
    sp = solve(op, (lo, lo + width), method="banded")
    assert len(sp) == np.sum((w >= lo - 1e-12) & (w <= lo + width + 1e-12)) or np.min(
        np.abs(np.concatenate([w - lo, w - lo - width]))
    ) < 1e-9
