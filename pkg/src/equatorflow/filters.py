"""Rejection of periodisation artefacts and grid-scale spurious modes.

Two predicates act on each unit eigenvector:

* the wall filter keeps a mode only if more than half of its squared norm
  sits on ``|y| < 0.9 L`` (modes bound to the artificial interface at the
  periodic seam fail this);
* the Fourier filter rejects a mode when at least 9/10 of its spectral mass
  lies in the fifth of the discrete wavenumbers with the largest ``|k|``.

The centered difference has an exact doubling symmetry (multiplying by
``(-1)^i`` flips the sign of ``D_h``), so every sharply localised mode of the
profile ``-f`` reappears as a checkerboard mode.  Such copies keep about a
quarter of their mass outside the top fifth and pass the 9/10 rule.  The
optional doubling guard (on by default) also rejects a mode whose mass above
half the Nyquist wavenumber exceeds ``doubling_threshold``; physical modes at
desk resolution carry only a few percent there.

Where a physical branch meets such a copy the two hybridise, sometimes over
a long stretch of xi with a gap of a few thousandths.  Two interior modes
closer than ``hybrid_gap`` whose high-k masses add up to at least
``hybrid_total`` are treated as one hybrid pair: the smoother member is kept
when its own high-k mass is at most ``hybrid_max`` (the guard does not apply
to it) and the other is rejected.  Each rougher partner pays for one rescue.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigen import EigenPair, Spectrum
from .operator import NCOMP, Grid

NONE, WALL, FOURIER = "none", "wall", "fourier"


@dataclass(frozen=True)
class FilterParams:
    interior_ratio: float = 0.9
    wall_threshold: float = 0.5
    band_fraction: float = 0.2
    fourier_threshold: float = 0.9
    doubling_guard: bool = True
    doubling_threshold: float = 0.25
    hybrid_gap: float = 0.05
    hybrid_total: float = 0.75
    hybrid_max: float = 0.6


@dataclass(frozen=True)
class FilterDiagnostics:
    interior_fraction: float
    lowfreq_fraction: float
    kept: bool
    reject_reason: str


def _as_matrix(psi):
    psi = np.asarray(psi)
    return psi.reshape(psi.shape[0], -1)


def interior_mask(grid: Grid, interior_ratio: float = 0.9) -> np.ndarray:
    return np.abs(grid.nodes) < interior_ratio * grid.L


def band_mask(grid: Grid, band_fraction: float = 0.2) -> np.ndarray:
    """Boolean mask (FFT order) of the ``band_fraction`` of wavenumbers with largest ``|k|``.

    The count is rounded to an even number so the band is symmetric under
    ``k -> -k`` (``m`` is odd, so every nonzero ``|k|`` occurs twice).
    """
    m = grid.m
    nband = 2 * int(round(band_fraction * m / 2))
    j = np.abs(np.fft.fftfreq(m) * m).round().astype(int)
    order = np.argsort(-j, kind="stable")
    mask = np.zeros(m, dtype=bool)
    mask[order[:nband]] = True
    return mask


def _k_mass(psi, grid: Grid):
    """Per-wavenumber squared DFT magnitude summed over components, normalised per column."""
    comps = _as_matrix(psi).reshape(grid.m, NCOMP, -1)
    per_k = (np.abs(np.fft.fft(comps, axis=0)) ** 2).sum(axis=1)
    total = per_k.sum(axis=0)
    total[total == 0] = 1.0
    return per_k / total


def upper_half_fractions(psi, grid: Grid) -> np.ndarray:
    """Spectral mass at ``|k| > k_Nyquist / 2``."""
    return _k_mass(psi, grid)[np.abs(np.fft.fftfreq(grid.m)) > 0.25].sum(axis=0)


def interior_fractions(psi, grid: Grid, interior_ratio: float = 0.9) -> np.ndarray:
    P = _as_matrix(psi)
    w = np.abs(P) ** 2
    node_mass = w.reshape(grid.m, NCOMP, -1).sum(axis=1)
    total = node_mass.sum(axis=0)
    total[total == 0] = 1.0
    return node_mass[interior_mask(grid, interior_ratio)].sum(axis=0) / total


def lowfreq_fractions(psi, grid: Grid, band_fraction: float = 0.2) -> np.ndarray:
    """Spectral mass outside the rejection band, over the concatenated components."""
    return _k_mass(psi, grid)[~band_mask(grid, band_fraction)].sum(axis=0)


def wall_filter(pair: EigenPair, grid: Grid, params: FilterParams = FilterParams()) -> tuple[bool, float]:
    frac = float(interior_fractions(pair.psi, grid, params.interior_ratio)[0])
    return frac > params.wall_threshold, frac


def _fourier_keep(low, upper, params):
    keep = (1.0 - low) < params.fourier_threshold
    if params.doubling_guard:
        keep = keep & ~(upper > params.doubling_threshold)
    return keep


def fourier_filter(pair: EigenPair, grid: Grid, params: FilterParams = FilterParams()) -> tuple[bool, float]:
    low = lowfreq_fractions(pair.psi, grid, params.band_fraction)
    upper = upper_half_fractions(pair.psi, grid) if params.doubling_guard else np.zeros(1)
    return bool(_fourier_keep(low, upper, params)[0]), float(low[0])


def _hybrid_rescue(E, interior, low, upper, params):
    """Smoother member of each near-degenerate physical/checkerboard hybrid pair.

    Pairs are formed one to one, smoothest candidates first, so a cluster of
    ``2n`` even mixtures (a physical and a checkerboard pair meeting) keeps ``n``.
    """
    rescue = np.zeros(E.size, dtype=bool)
    used = ~interior.copy()
    passes_band = (1.0 - low) < params.fourier_threshold
    cand = interior & passes_band & (upper > params.doubling_threshold) & (upper <= params.hybrid_max)
    for a in sorted(np.flatnonzero(cand), key=lambda k: (upper[k], k)):
        if used[a]:
            continue
        ok = ~used & (np.abs(E - E[a]) < params.hybrid_gap) & (upper + upper[a] >= params.hybrid_total)
        ok &= upper >= upper[a]
        ok[a] = False
        if not ok.any():
            continue
        b = min(np.flatnonzero(ok), key=lambda k: (abs(E[k] - E[a]), k))
        rescue[a] = used[a] = used[b] = True
    return rescue


def diagnose(spectrum: Spectrum, grid: Grid, params: FilterParams = FilterParams()) -> list[FilterDiagnostics]:
    """Diagnostics for every pair of a spectrum (vectorised)."""
    if len(spectrum) == 0:
        return []
    inner = interior_fractions(spectrum.vectors, grid, params.interior_ratio)
    mass = _k_mass(spectrum.vectors, grid)
    low = mass[~band_mask(grid, params.band_fraction)].sum(axis=0)
    upper = mass[np.abs(np.fft.fftfreq(grid.m)) > 0.25].sum(axis=0)
    fkeep = _fourier_keep(low, upper, params)
    if params.doubling_guard:
        fkeep |= _hybrid_rescue(spectrum.values, inner > params.wall_threshold, low, upper, params)
    out = []
    for a, b, fk in zip(inner, low, fkeep):
        if not a > params.wall_threshold:
            reason = WALL
        elif not fk:
            reason = FOURIER
        else:
            reason = NONE
        out.append(FilterDiagnostics(float(a), float(b), reason == NONE, reason))
    return out


def filter_spectrum(spectrum: Spectrum, grid: Grid, params: FilterParams = FilterParams()):
    """Return ``(kept_spectrum, diagnostics)``; diagnostics cover all input pairs."""
    diags = diagnose(spectrum, grid, params)
    mask = np.array([d.kept for d in diags], dtype=bool)
    return spectrum.subset(mask), diags


def apply_filters(pairs, grid: Grid, params: FilterParams = FilterParams()):
    """Wall then Fourier filter on a list of pairs -> ``(kept, diagnostics)``."""
    pairs = list(pairs)
    if not pairs:
        return [], []
    spec = Spectrum(
        np.array([p.E for p in pairs]),
        np.column_stack([p.psi for p in pairs]),
        np.array([p.residual for p in pairs]),
    )
    diags = diagnose(spec, grid, params)
    return [p for p, d in zip(pairs, diags) if d.kept], diags
