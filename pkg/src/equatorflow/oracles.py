"""Closed-form and quadrature predictions used to validate computed spectra."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .eigen import EigenPair
from .errors import EliminationError, QuadratureError
from .operator import NCOMP, Grid, periodize
from .profile import CoriolisProfile, count_JL_JR

SF_BEC = 2
QUAD_TOL = 1e-10


# --- Kelvin --------------------------------------------------------------

def kelvin_branch(profile: CoriolisProfile, xi: float, grid: Grid | None = None):
    """Exact Kelvin branch: ``E = xi`` with eigenvector ``(e^-F, e^-F, 0)``.

    Returns ``(E, psi)`` where ``psi`` is sampled on ``grid`` (interleaved,
    unit norm) or ``None`` when no grid is given.
    """
    if grid is None:
        return float(xi), None
    F = profile.antiderivative(grid.nodes)
    g = np.exp(-(F - F.min()))
    psi = np.zeros(grid.size, dtype=complex)
    psi[0::NCOMP] = g
    psi[1::NCOMP] = g
    return float(xi), psi / np.linalg.norm(psi)


# --- jump modes ----------------------------------------------------------

@dataclass
class JumpModePrediction:
    """Interface mode bound to a single jump of f."""

    xi: float
    E: float
    f_plus: float
    f_minus: float
    y0: float = 0.0
    kappa_plus: float = field(init=False)
    kappa_minus: float = field(init=False)

    def __post_init__(self):
        d = self.xi**2 - self.E**2
        self.kappa_plus = float(np.sqrt(self.f_plus**2 + d))
        self.kappa_minus = float(np.sqrt(self.f_minus**2 + d))

    @property
    def f_o(self):
        return 0.5 * (self.f_plus - self.f_minus)

    @property
    def f_e(self):
        return 0.5 * (self.f_plus + self.f_minus)

    def identity_residual(self) -> float:
        """``kappa_+ + kappa_- + (xi/E)(f_+ - f_-)``; zero for a true mode."""
        return self.kappa_plus + self.kappa_minus + self.xi / self.E * (self.f_plus - self.f_minus)

    def quartic_residual(self) -> float:
        nu = self.E / self.xi
        q = self.f_e**2 + self.xi**2
        return q * (nu**2 - 1.0) * (nu**2 - self.f_o**2 / q)

    def _coefficients(self):
        # (eta, u, v) amplitudes on each side, scaled by E^2 - xi^2 so that the
        # E = |xi| crossing (where v vanishes) stays finite
        E, xi = self.E, self.xi
        kp, km, fp, fm = self.kappa_plus, self.kappa_minus, self.f_plus, self.f_minus
        den = E**2 - xi**2
        right = np.array([1j * (E * kp + xi * fp), 1j * (xi * kp + E * fp), den])
        left = np.array([1j * (xi * fm - E * km), 1j * (E * fm - xi * km), den])
        if den < 0:
            left, right = -left, -right
        return left, right

    def norm_constant(self) -> float:
        """Scale giving unit L2 norm on the real line (``v(y0) >= 0``)."""
        left, right = self._coefficients()
        n2 = np.sum(np.abs(right) ** 2) / (2 * self.kappa_plus) + np.sum(np.abs(left) ** 2) / (2 * self.kappa_minus)
        return float(1.0 / np.sqrt(n2))

    def eigvec(self, y) -> np.ndarray:
        """Components ``(eta, u, v)`` at ``y`` as a ``(3, len(y))`` array, unit L2 norm."""
        y = np.asarray(y, dtype=float)
        left, right = self._coefficients()
        s = y - self.y0
        side = s > 0
        env = np.where(side, np.exp(-self.kappa_plus * np.where(side, s, 0)),
                       np.exp(self.kappa_minus * np.where(side, 0, s)))
        amp = np.where(side[None, :], right[:, None], left[:, None])
        return amp * env * self.norm_constant()

    def sample(self, grid: Grid) -> np.ndarray:
        """Interleaved grid vector normalised in the discrete l2 sense."""
        comps = self.eigvec(grid.nodes)
        psi = comps.T.ravel()
        return psi / np.linalg.norm(psi)


def jump_dispersion(f_plus: float, f_minus: float, xi: float, y0: float = 0.0) -> JumpModePrediction | None:
    """Interface mode of a single jump, or ``None`` when no decaying solution exists.

    Needs ``-f_o xi > 0`` and, for jumps through zero, ``|f_e f_o| < f_e^2 + xi^2``.
    """
    f_o = 0.5 * (f_plus - f_minus)
    f_e = 0.5 * (f_plus + f_minus)
    if f_o == 0:
        raise ValueError("f_plus == f_minus: there is no jump")
    if not -f_o * xi > 0:
        return None
    E = -xi * f_o / np.sqrt(f_e**2 + xi**2)
    # the quartic root must also decay on both sides: kappa_pm = -f_o xi/E -+ f_e E/xi
    if abs(f_e * E / xi) >= -f_o * xi / E:
        return None
    return JumpModePrediction(xi=float(xi), E=float(E), f_plus=float(f_plus), f_minus=float(f_minus), y0=float(y0))


def aligned_l2_error(psi_num: np.ndarray, psi_ref: np.ndarray) -> float:
    """``min_theta ||psi_num - e^{i theta} psi_ref||`` for unit vectors."""
    a = psi_num / np.linalg.norm(psi_num)
    b = psi_ref / np.linalg.norm(psi_ref)
    z = np.vdot(b, a)
    phase = z / abs(z) if abs(z) > 0 else 1.0
    return float(np.linalg.norm(a - phase * b))


# --- Yanai ---------------------------------------------------------------

def _quad(fun, a, b, points, quad_tol):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(fun, a, b, points=points or None, limit=400, epsabs=quad_tol, epsrel=0)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature did not converge on [{a}, {b}]: {exc}") from exc
    if err > quad_tol:
        raise QuadratureError(f"quadrature error estimate {err:.3e} exceeds {quad_tol:.1e}", estimate=err)
    return val


def yanai_crossing(profile: CoriolisProfile, quad_tol: float = QUAD_TOL) -> float:
    """``xi0 = -||f e^-F|| / ||e^-F||`` over the represented range."""
    a, b = -profile.extent, profile.extent
    F0 = min(profile.antiderivative(np.linspace(a, b, 4001)))
    w = lambda y: np.exp(-2.0 * (profile.antiderivative(y) - F0))
    pts = sorted({float(s.y_from) for s in profile.segments[1:]})
    num = _quad(lambda y: profile.evaluate(y) ** 2 * w(y), a, b, pts, quad_tol)
    den = _quad(w, a, b, pts, quad_tol)
    # F0 shift only rescales both integrals; tails must be negligible at +-extent
    if w(a) > quad_tol or w(b) > quad_tol:
        raise QuadratureError("e^{-F} is not negligible at the end of the represented range", estimate=max(w(a), w(b)))
    return float(-np.sqrt(num / den))


# --- bulk ----------------------------------------------------------------

def bulk_symbol(f: float, xi: float, zeta: float) -> np.ndarray:
    """3x3 symbol of the constant-f operator at wavevector ``(xi, zeta)``."""
    return np.array([[0, xi, zeta], [xi, 0, 1j * f], [zeta, -1j * f, 0]], dtype=complex)


def bulk_bands(f: float, xi: float, zeta: float) -> tuple[float, float, float]:
    """``(-w, 0, w)`` with ``w = sqrt(xi^2 + zeta^2 + f^2)``."""
    w = float(np.sqrt(xi * xi + zeta * zeta + f * f))
    return (-w, 0.0, w)


def plane_wave_spectrum(f: float, xi: float, grid: Grid) -> np.ndarray:
    """Sorted spectrum of the discretised constant-f operator."""
    z = np.sin(grid.wavenumbers() * grid.h) / grid.h
    w = np.sqrt(z * z + xi * xi + f * f)
    return np.sort(np.concatenate([-w, np.zeros(grid.m), w]))


# --- flow predictions ----------------------------------------------------

def predicted_flow(profile: CoriolisProfile, alpha: float) -> tuple[int, int]:
    """``(sf_bec, sf_thm)`` at level ``alpha > 0``."""
    JL, JR = count_JL_JR(profile, alpha)
    return SF_BEC, SF_BEC - JL + JR


# --- Sturm residual ------------------------------------------------------

@dataclass
class SturmResidual:
    ode_residual: float
    jump_residuals: list[float]
    eta_u_mismatch: float
    wavenumber: float


def _central_diff(w, h):
    return (np.roll(w, -1) - np.roll(w, 1)) / (2 * h)


def _plateau_trace(vs, t, kappa2, h):
    """Value and d/dt at ``t = 0`` of the smoothed plateau solution sampled at ``t``."""
    if kappa2 > 0:
        k = np.sqrt(kappa2)
        basis = np.column_stack([np.cosh(k * t), np.sinh(k * t)])
        c = np.cosh(0.5 * k * h) ** 2
    elif kappa2 < 0:
        k = np.sqrt(-kappa2)
        basis = np.column_stack([np.cos(k * t), np.sin(k * t)])
        c = np.cos(0.5 * k * h) ** 2
    else:
        k, c = 1.0, 1.0
        basis = np.column_stack([np.ones_like(t), t])
    (a, b), *_ = np.linalg.lstsq(basis, vs, rcond=None)
    return a / c, k * b / c


def sturm_residual(
    profile: CoriolisProfile,
    xi: float,
    pair: EigenPair,
    grid: Grid,
    seam_width: float = 1.0,
    elimination_tol: float = 1e-6,
) -> SturmResidual:
    """Residuals of the scalar second-order equation satisfied by ``v``.

    The centered scheme admits a grid-scale partner ``(-1)^i w`` of every
    smooth solution ``w``, and discrete eigenvectors near a jump carry an
    O(h) amount of it.  ``v`` is first smoothed with the 1-2-1 stencil,
    which suppresses the partner to second order, and the residual then uses
    the wide second difference ``(v[i+2] - 2 v[i] + v[i-2]) / (4 h^2)``
    together with the exact ``f`` and ``f'``, on nodes away from segment
    boundaries and the seam.
    ``ode_residual = ||r|| / ((||v''|| + ||q v||) K^2)``: the residual relative
    to the two terms it balances, divided by the square of the characteristic
    wavenumber ``K = max(1, sqrt(||v''|| / ||v||))`` so that second-order
    truncation reads as ``O(h^2)`` for oscillatory modes too.

    At each jump the relation ``-[v'] + (xi/E)[f] v = 0`` is evaluated from
    one-sided data.  f is constant on the plateaus next to a jump, so there
    ``v = A exp(kappa t) + B exp(-kappa t)`` with ``kappa^2 = f^2 + xi^2 - E^2``,
    and the 1-2-1 smoothing multiplies both exponentials by the same factor
    ``cosh^2(kappa h / 2)``.  A least-squares fit of ``A, B`` on up to eight
    smoothed nodes per side gives ``v(y_j +- 0)`` and ``v'(y_j +- 0)`` without
    stencil bias; the two value traces are averaged.  Scaled by ``max|v| K``.

    ``eta_u_mismatch`` compares the first two components with their
    reconstruction from ``v`` through the discrete elimination formula.
    """
    E = float(pair.E)
    if abs(E) < elimination_tol or abs(abs(E) - abs(xi)) < elimination_tol:
        raise EliminationError(f"cannot eliminate (eta, u): E={E} too close to 0 or |xi|={abs(xi)}")
    h, y = grid.h, grid.nodes
    psi = np.asarray(pair.psi)
    eta, u, v = psi[0::NCOMP], psi[1::NCOMP], psi[2::NCOMP]
    f = periodize(profile, grid, seam_width)

    den = E * E - xi * xi
    Dv = -1j * _central_diff(v, h)
    eta_r = (E * Dv + 1j * xi * f * v) / den
    u_r = (xi * Dv + 1j * E * f * v) / den
    mismatch = float(np.sqrt(np.sum(np.abs(eta - eta_r) ** 2 + np.abs(u - u_r) ** 2)) / np.linalg.norm(psi))

    mask = np.abs(y) < grid.L - seam_width - 3 * h
    for yb in [seg.y_from for seg in profile.segments[1:]]:
        # jumps and kinks: f' is undefined there
        mask &= np.abs(y - yb) > 4.5 * h
    fp = np.zeros_like(y)
    fp[mask] = profile.derivative(y[mask])
    # the partner enters the f' term with the opposite sign; 1-2-1 smoothing
    # removes it to second order and moves the smooth part by O(h^2) only
    vs = 0.25 * np.roll(v, 1) + 0.5 * v + 0.25 * np.roll(v, -1)
    lap = (np.roll(vs, -2) - 2 * vs + np.roll(vs, 2)) / (4 * h * h)
    vn = np.linalg.norm(vs[mask])
    if vn == 0:
        return SturmResidual(0.0, [0.0] * len(profile.jumps), mismatch, 1.0)
    K = max(1.0, np.sqrt(np.linalg.norm(lap[mask]) / vn))
    pot = (f * f + xi / E * fp - den) * vs
    r = -lap + pot
    rel = np.linalg.norm(r[mask]) / (np.linalg.norm(lap[mask]) + np.linalg.norm(pot[mask]))
    ode = float(rel / K**2)

    vmax = float(np.max(np.abs(v)))
    jumps = []
    eta = profile.plateau_halfwidth
    for j in profile.jumps:
        sides = []
        for fs, sign in ((j.f_minus, -1.0), (j.f_plus, 1.0)):
            t = sign * (y - j.y)
            # the smoothing stencil of every node used stays on this side of the jump
            sel = (t > 1.5 * h) & (t < min(2 * eta - 1.5 * h, 1.5 * h + 8 * h))
            sides.append(_plateau_trace(vs[sel], t[sel], fs * fs + xi * xi - E * E, h))
        (vL, dL), (vR, dR) = sides
        # d/dt on the left side is -d/dy
        res = -(dR + dL) + xi / E * (j.f_plus - j.f_minus) * 0.5 * (vL + vR)
        jumps.append(float(abs(res) / (vmax * K)))
    return SturmResidual(ode, jumps, mismatch, float(K))
