import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from equatorflow import catalog
from equatorflow.eigen import EigenPair, solve
from equatorflow.errors import EliminationError, QuadratureError
from equatorflow.operator import Grid, assemble
from equatorflow.oracles import (
    SF_BEC,
    aligned_l2_error,
    bulk_bands,
    bulk_symbol,
    jump_dispersion,
    kelvin_branch,
    plane_wave_spectrum,
    predicted_flow,
    sturm_residual,
    yanai_crossing,
)


@pytest.mark.parametrize("slope, expected", [(1.0, -1 / np.sqrt(2)), (2.0, -1.0), (4.0, -np.sqrt(2))])
def test_yanai_crossing_linear(slope, expected):
    # Gaussian moments: xi0 = -sqrt(a/2)
    assert yanai_crossing(catalog.linear(slope)) == pytest.approx(expected, abs=1e-10)


def test_yanai_crossing_with_jump_profile():
    # frozen from an independent trapezoid evaluation on a fine grid
    f = catalog.sign()
    y = np.linspace(-30, 30, 600001)
    F = f.antiderivative(np.linspace(-30, 30, 2001))
    Fi = np.interp(y, np.linspace(-30, 30, 2001), F)
    w = np.exp(-2 * (Fi - Fi.min()))
    ref = -np.sqrt(np.trapezoid(f(y) ** 2 * w, y) / np.trapezoid(w, y))
    assert yanai_crossing(f) == pytest.approx(ref, abs=1e-5)


def test_yanai_quadrature_failure_is_reported():
    with pytest.raises(QuadratureError):
        yanai_crossing(catalog.linear(), quad_tol=1e-300)


@pytest.mark.parametrize(
    "fp, fm, xi, E",
    [(1.0, -1.0, -8.0, 1.0), (1.0, -1.0, -1.0, 1.0), (2.0, 0.0, -1.0, 1 / np.sqrt(2))],
)
def test_jump_dispersion_values(fp, fm, xi, E):
    pred = jump_dispersion(fp, fm, xi)
    assert pred.E == pytest.approx(E, abs=1e-12)
    assert abs(pred.identity_residual()) < 1e-12
    assert abs(pred.quartic_residual()) < 1e-12


def test_jump_dispersion_inadmissible_side():
    assert jump_dispersion(1.0, -1.0, 8.0) is None
    # right sign, but the root grows on the f = 1 side
    assert jump_dispersion(-2.0, 1.0, 0.5) is None
    assert jump_dispersion(-2.0, 1.0, 1.0) is not None
    with pytest.raises(ValueError):
        jump_dispersion(1.0, 1.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(fp=st.floats(-4, 4), fm=st.floats(-4, 4), xi=st.floats(-8, 8))
def test_jump_dispersion_identity(fp, fm, xi):
    assume(abs(fp - fm) > 1e-3 and abs(xi) > 1e-3)
    pred = jump_dispersion(fp, fm, xi)
    if pred is None:
        fo, fe = (fp - fm) / 2, (fp + fm) / 2
        assert -fo * xi <= 0 or abs(fe * fo) >= fe**2 + xi**2 - 1e-12
        return
    assert pred.E**2 < xi**2 + min(fp**2, fm**2) + 1e-12
    # near the band edge a decay rate is a cancelled square root
    assume(min(pred.kappa_plus, pred.kappa_minus) > 0.2)
    assert abs(pred.identity_residual()) < 1e-9 * (1 + abs(xi) + abs(fp) + abs(fm))
    # unit norm of the continuum profile
    y = np.linspace(-40, 40, 400001)
    comps = pred.eigvec(y)
    n2 = np.trapezoid(np.sum(np.abs(comps) ** 2, axis=0), y)
    assert n2 == pytest.approx(1.0, rel=1e-3)


def test_jump_mode_solves_continuum_equations():
    pred = jump_dispersion(1.0, -1.0, -3.0, y0=0.0)
    y = np.linspace(-6, 6, 120001)
    eta, u, v = pred.eigvec(y)
    f = np.sign(y)
    d = lambda w: -1j * np.gradient(w, y)
    r1 = pred.xi * u + d(v) - pred.E * eta
    r2 = pred.xi * eta + 1j * f * v - pred.E * u
    away = np.abs(y) > 0.01
    assert np.max(np.abs(r1[away])) < 1e-3
    assert np.max(np.abs(r2[away])) < 1e-10


def test_kelvin_is_discrete_eigenvector_up_to_truncation(linear):
    g = Grid(11.0, 601)
    E, psi = kelvin_branch(linear, 2.0, g)
    op = assemble(linear, g, 2.0)
    assert E == 2.0
    assert np.linalg.norm(op.matrix @ psi - E * psi) < 1e-3
    assert np.allclose(psi[2::3], 0)
    assert kelvin_branch(linear, 1.5) == (1.5, None)


def test_bulk_symbol_bands():
    for f, xi, z in [(0.0, 0.0, 0.0), (1.0, 2.0, -3.0), (-2.0, 0.5, 0.1)]:
        H = bulk_symbol(f, xi, z)
        assert np.allclose(H, H.conj().T)
        assert np.allclose(np.linalg.eigvalsh(H), bulk_bands(f, xi, z))


def test_plane_wave_matches_constant_profile():
    g = Grid(11.0, 41)
    ev = np.linalg.eigvalsh(assemble(catalog.constant(2.0), g, 1.0).dense())
    assert np.allclose(ev, plane_wave_spectrum(2.0, 1.0, g), atol=1e-12)


def test_predicted_flow():
    assert predicted_flow(catalog.linear(), 0.5) == (SF_BEC, 2)
    assert predicted_flow(catalog.sign(), 0.5) == (2, 1)
    assert predicted_flow(catalog.sign(), 1.5) == (2, 2)
    f = catalog.three_jumps()
    assert [predicted_flow(f, a)[1] for a in (0.3, 0.6, 0.85, 1.5)] == [1, 2, 1, 2]
    assert predicted_flow(catalog.two_negative_jumps(), 0.5) == (2, 4)


def test_aligned_error_phase_free():
    rng = np.random.default_rng(0)
    a = rng.standard_normal(30) + 1j * rng.standard_normal(30)
    assert aligned_l2_error(np.exp(0.7j) * a, a) < 1e-14
    assert aligned_l2_error(a, -a) < 1e-14


def test_sturm_residual_linear_profile(linear):
    g = Grid(11.0, 601)
    op = assemble(linear, g, 1.0)
    sp = solve(op, (1.5, 3.0))
    pair = sp.pairs()[0]
    r = sturm_residual(linear, 1.0, pair, g)
    assert r.ode_residual < 5 * g.h**2
    assert r.jump_residuals == []
    assert r.eta_u_mismatch < 1e-12


def test_sturm_residual_refuses_singular_elimination(linear):
    g = Grid(11.0, 101)
    _, psi = kelvin_branch(linear, 1.0, g)
    with pytest.raises(EliminationError):
        sturm_residual(linear, 1.0, EigenPair(1.0, psi, 0.0), g)
