"""Certified eigenpairs of assembled fiber operators.

The centered-difference operator is unitarily equivalent to a real
symmetric matrix (``operator.FiberedOperator.real_symmetric``); all solvers
work on that form.  Two routes are available:

``dense``
    LAPACK ``syevr`` on the dense real matrix.
``banded``
    The periodic ring is renumbered ``0, m-1, 1, m-2, ...`` which makes the
    matrix banded (half-bandwidth 8).  All eigenvalues come from LAPACK
    ``sbev`` (cheaper than bisection for windows holding ~100 values) and are
    cut to the window; eigenvectors from shifted inverse iteration with block
    iteration and Rayleigh-Ritz on near-degenerate clusters.  The window
    count is cross-checked against the Sylvester inertia of ``H - sigma`` at
    both window ends (banded ``LDL^T``, JIT-compiled when numba is present).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import EigenSolverError, InertiaMismatchError
from .operator import NCOMP, FiberedOperator

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
CLUSTER_RTOL = 1e-3  # vector accuracy ~ eps ||H|| / gap: smaller gaps go through block iteration
DEGENERATE_RTOL = 1e-10
ORTHO_TOL = 1e-10
EDGE_SLACK = 1e-11
_INVIT_STEPS = 2
_INVIT_MAX_STEPS = 40


@dataclass
class EigenPair:
    E: float
    psi: np.ndarray
    residual: float


@dataclass
class Spectrum:
    """Eigenpairs of one fiber as arrays (columns of ``vectors`` are the psi)."""

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray

    def __len__(self):
        return self.values.size

    def pairs(self) -> list[EigenPair]:
        return [EigenPair(float(E), self.vectors[:, k], float(r)) for k, (E, r) in enumerate(zip(self.values, self.residuals))]

    def subset(self, mask) -> "Spectrum":
        return Spectrum(self.values[mask], self.vectors[:, mask], self.residuals[mask])


# --- banded storage ------------------------------------------------------

def folded_order(m: int) -> np.ndarray:
    """Node order 0, m-1, 1, m-2, ... turning ring neighbours into band neighbours."""
    order = np.empty(m, dtype=int)
    half = (m + 1) // 2
    order[0::2] = np.arange(half)
    order[1::2] = m - 1 - np.arange(m - half)
    return order


def folded_permutation(m: int) -> np.ndarray:
    """Index map ``new -> old`` for the interleaved unknowns in folded node order."""
    nodes = folded_order(m)
    return (NCOMP * nodes[:, None] + np.arange(NCOMP)[None, :]).ravel()


def banded_form(op: FiberedOperator):
    """Lower band storage ``ab[d, j] = B[j + d, j]`` of the folded real matrix.

    Returns ``(ab, perm)`` with ``B = A[perm][:, perm]``.
    """
    A = op.real_symmetric().tocoo()
    n = A.shape[0]
    perm = folded_permutation(n // NCOMP)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(n)
    r, c = inv[A.row], inv[A.col]
    low = r >= c
    d = r[low] - c[low]
    bw = int(d.max()) if d.size else 0
    ab = np.zeros((bw + 1, n))
    np.add.at(ab, (d, c[low]), A.data[low])
    return ab, perm


def _ldl_count(ab, sigma, tiny):
    """Negative pivots of an unpivoted banded ``LDL^T`` of ``B - sigma``; -1 if a pivot is tiny."""
    b = ab.shape[0] - 1
    n = ab.shape[1]
    # work[j, d] holds the current Schur complement entry (k + j + d, k + j)
    s = b + 1
    work = np.zeros((s, s))
    for j in range(min(s, n)):
        for d in range(min(s, n - j)):
            work[j, d] = ab[d, j]
        work[j, 0] -= sigma
    count = 0
    for k in range(n):
        piv = work[0, 0]
        if abs(piv) < tiny:
            return -1
        if piv < 0:
            count += 1
        for j in range(1, s):
            lj = work[0, j] / piv
            for d in range(s - j):
                work[j, d] -= lj * work[0, j + d]
        for j in range(1, s):
            for d in range(s):
                work[j - 1, d] = work[j, d]
        r = k + s
        for d in range(s):
            work[s - 1, d] = 0.0
        if r < n:
            for d in range(min(s, n - r)):
                work[s - 1, d] = ab[d, r]
            work[s - 1, 0] -= sigma
    return count


try:  # optional JIT; the pure-Python kernel is identical but ~100x slower
    from numba import njit

    _ldl_count = njit(cache=True)(_ldl_count)
except ImportError:  # pragma: no cover
    pass


def negative_count(ab: np.ndarray, sigma: float) -> int | None:
    """Number of eigenvalues of the banded matrix below ``sigma``.

    Uses an unpivoted LDL^T factorisation of ``B - sigma`` (Sylvester's law
    of inertia).  Returns ``None`` when a pivot is too small to trust.
    """
    scale = max(1.0, float(np.max(np.abs(ab))))
    c = _ldl_count(np.ascontiguousarray(ab, dtype=float), float(sigma), 1e-13 * scale)
    return None if c < 0 else int(c)


def dense_negative_count(op: FiberedOperator, sigma: float) -> int:
    """Inertia through Bunch-Kaufman ``LDL^T`` of the dense real matrix."""
    A = op.real_symmetric().toarray()
    A[np.diag_indices_from(A)] -= sigma
    _, D, _ = sla.ldl(A)
    return int(np.sum(np.linalg.eigvalsh(D) < 0))


def inertia_count(op: FiberedOperator, sigma: float) -> int:
    ab, _ = banded_form(op)
    cnt = negative_count(ab, sigma)
    if cnt is None:
        cnt = dense_negative_count(op, sigma)
    return cnt


# --- solvers -------------------------------------------------------------

def _clusters(values, rtol=CLUSTER_RTOL):
    """Split sorted values into groups of mutually close eigenvalues."""
    groups = []
    start = 0
    for k in range(1, values.size + 1):
        if k == values.size or values[k] - values[k - 1] > rtol * max(1.0, abs(values[k])):
            groups.append(np.arange(start, k))
            start = k
    return groups


def _invit_steps(values, grp, sigma, spectrum, delta):
    """Steps needed to damp other eigendirections by ~1e-16 (start vectors are random).

    Each step multiplies them by ``max_in |E - sigma| / min_out |E - sigma|``;
    ``spectrum`` (all eigenvalues) supplies the nearest outside neighbours.
    """
    spread = float(np.max(np.abs(values[grp] - sigma))) + delta
    lo, hi = values[grp[0]], values[grp[-1]]
    k_lo = np.searchsorted(spectrum, lo, side="left") - 1
    k_hi = np.searchsorted(spectrum, hi, side="right")
    gaps = []
    if k_lo >= 0:
        gaps.append(sigma - spectrum[k_lo])
    if k_hi < spectrum.size:
        gaps.append(spectrum[k_hi] - sigma)
    if not gaps:
        return _INVIT_STEPS
    ratio = spread / min(gaps)
    if ratio >= 0.5:
        return _INVIT_MAX_STEPS
    return int(min(_INVIT_MAX_STEPS, max(_INVIT_STEPS, np.ceil(-16.0 / np.log10(ratio)))))


def _inverse_iteration(ab_low, values, rng, spectrum=None):
    b = ab_low.shape[0] - 1
    n = ab_low.shape[1]
    # LAPACK gbtrf layout: b extra rows for fill-in, then the 2b+1 diagonals
    full = np.zeros((3 * b + 1, n))
    full[2 * b:] = ab_low
    for d in range(1, b + 1):
        full[2 * b - d, d:] = ab_low[d, : n - d]
    scale = max(1.0, float(np.max(np.abs(ab_low))))
    delta = 64 * np.finfo(float).eps * scale
    spectrum = values if spectrum is None else spectrum
    vecs = np.empty((n, values.size))
    for grp in _clusters(values):
        sigma = float(np.mean(values[grp])) + delta
        shifted = full.copy()
        shifted[2 * b] -= sigma
        lu, piv, info = lapack.dgbtrf(shifted, b, b)
        if info > 0:
            shifted[2 * b] -= delta
            lu, piv, info = lapack.dgbtrf(shifted, b, b)
        if info != 0:
            raise EigenSolverError(f"band factorisation failed near E={sigma:.12g} (info={info})")
        X = rng.standard_normal((n, grp.size))
        for _ in range(_invit_steps(values, grp, sigma, spectrum, delta)):
            X, info = lapack.dgbtrs(lu, b, b, X, piv)
            if grp.size == 1:
                X /= np.linalg.norm(X)
            else:
                X, _ = np.linalg.qr(X)
        if grp.size > 1:
            BX = _band_matvec(ab_low, X)
            w, R = np.linalg.eigh(X.T @ BX)
            X = X @ R
        vecs[:, grp] = X
    return vecs


def _band_matvec(ab_low, X):
    b = ab_low.shape[0] - 1
    n = ab_low.shape[1]
    X2 = X.reshape(n, -1)
    Y = ab_low[0][:, None] * X2
    for d in range(1, b + 1):
        a = ab_low[d, : n - d][:, None]
        Y[d:] += a * X2[: n - d]
        Y[: n - d] += a * X2[d:]
    return Y.reshape(X.shape)


def _cluster_basis(X, grid, weight):
    """Orthogonal ``R`` such that ``X R`` separates spurious from physical
    modes first and then diagonalises the position weight in each group."""
    m = grid.m
    comps = X.reshape(m, NCOMP, -1)
    high = np.abs(np.fft.fftfreq(m)) > 0.25
    Z = np.fft.fft(comps, axis=0)[high].reshape(-1, X.shape[1])
    seam = np.repeat(np.abs(grid.nodes) >= 0.9 * grid.L, NCOMP)
    M = (Z.conj().T @ Z).real / m + X[seam].T @ X[seam]
    mu, R = np.linalg.eigh(0.5 * (M + M.T))
    out = np.empty_like(R)
    col = 0
    for grp in (mu < 0.5, mu >= 0.5):
        if not grp.any():
            continue
        B = X @ R[:, grp]
        _, S = np.linalg.eigh(B.T @ (weight[:, None] * B))
        out[:, col:col + S.shape[1]] = R[:, grp] @ S
        col += S.shape[1]
    return out


def localize_degenerate(values, phi, grid, rtol=DEGENERATE_RTOL):
    """Choose a definite basis inside exactly degenerate clusters.

    Any orthonormal basis of such a cluster is valid.  We first split off
    grid-scale (checkerboard) and seam-bound combinations, which the
    doubling symmetry of the centered difference can make degenerate with
    physical modes, and then diagonalise ``W = y`` on ``|y| < 0.9 L``
    (``2L`` near the seam) so that modes bound at different places come out
    separated.  Works on the real form.
    """
    if grid is None or values.size < 2:
        return phi
    y = grid.nodes
    wnode = np.where(np.abs(y) < 0.9 * grid.L, y, 2.0 * grid.L)
    weight = np.repeat(wnode, NCOMP)
    out = phi.copy()
    for grp in _clusters(values, rtol):
        if grp.size < 2:
            continue
        X = phi[:, grp]
        out[:, grp] = X @ _cluster_basis(X, grid, weight)
    return out


def _canonical(phi: np.ndarray) -> np.ndarray:
    """Unit columns with the first significant component positive."""
    phi = phi / np.linalg.norm(phi, axis=0)
    mag = np.abs(phi)
    first = np.argmax(mag >= 0.5 * mag.max(axis=0), axis=0)
    signs = np.sign(phi[first, np.arange(phi.shape[1])])
    signs[signs == 0] = 1.0
    return phi * signs


def _to_complex(phi: np.ndarray) -> np.ndarray:
    phase = np.tile(np.array([1.0, 1.0, 1j]), phi.shape[0] // NCOMP)
    return phase[:, None] * phi


def _solve_dense(op, lo, hi):
    A = op.real_symmetric().toarray()
    try:
        if lo is None:
            w, V = sla.eigh(A, driver="evr")
        else:
            w, V = sla.eigh(A, subset_by_value=(lo, hi), driver="evr")
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"dense eigensolver failed for xi={op.xi}: {exc}") from exc
    return w, V


def _count(op, ab, sigma):
    c = negative_count(ab, sigma)
    return dense_negative_count(op, sigma) if c is None else c


def _verify_count(op, ab, lo, hi, found):
    """Compare ``found`` with Sylvester inertia; eigenvalues sitting on a window
    edge (within rounding) may legitimately be counted either way."""
    n_exact = _count(op, ab, hi) - _count(op, ab, lo)
    if n_exact == found:
        return
    scale = max(1.0, float(np.max(np.abs(ab))))
    d = 1e-9 * scale
    inner = _count(op, ab, hi - d) - _count(op, ab, lo + d)
    outer = _count(op, ab, hi + d) - _count(op, ab, lo - d)
    if not inner <= found <= outer:
        raise InertiaMismatchError(
            f"xi={op.xi}: {found} eigenvalues found in ({lo}, {hi}] but inertia counts give {n_exact} "
            f"(between {inner} and {outer} allowing for edge rounding)"
        )


def _solve_banded(op, lo, hi, verify, seed=0):
    ab, perm = banded_form(op)
    n = ab.shape[1]
    try:
        # the full QL sweep is cheaper than bisection for windows of ~100 values
        w = sla.eig_banded(ab, lower=True, eigvals_only=True)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"banded eigensolver failed for xi={op.xi}: {exc}") from exc
    w_all = np.sort(w)
    w = w_all if lo is None else w_all[(w_all > lo) & (w_all <= hi)]
    if verify and lo is not None:
        _verify_count(op, ab, lo, hi, w.size)
    rng = np.random.default_rng(seed)
    Vb = _inverse_iteration(ab, w, rng, w_all)
    gram = Vb.T @ Vb
    if w.size and np.max(np.abs(gram - np.eye(w.size))) > ORTHO_TOL:
        log.debug("xi=%s: inverse iteration lost orthogonality, falling back to dense", op.xi)
        return _solve_dense(op, lo, hi)
    V = np.empty_like(Vb)
    V[perm] = Vb
    return w, V


def _certify(op, w, phi, tol):
    phi = localize_degenerate(w, phi, op.grid)
    psi = _to_complex(_canonical(phi)) if w.size else phi.astype(complex)
    R = op.matrix @ psi - psi * w
    res = np.linalg.norm(R, axis=0)
    bad = res > tol * (1.0 + np.abs(w))
    if np.any(bad):
        k = int(np.argmax(res / (1.0 + np.abs(w))))
        raise EigenSolverError(
            f"xi={op.xi}: eigenpair E={w[k]:.12g} has residual {res[k]:.3e} above tolerance",
            iterations=_INVIT_STEPS,
        )
    return Spectrum(np.asarray(w, dtype=float), psi, res)


def choose_method(op: FiberedOperator, method: str) -> str:
    if method == "auto":
        return "banded" if op.grid is not None and op.grid.m >= 101 else "dense"
    if method not in ("dense", "banded"):
        raise ValueError(f"unknown eigen method {method!r}")
    if method == "banded" and op.grid is None:
        return "dense"
    return method


def solve(op: FiberedOperator, window=None, tol=DEFAULT_TOL, method="auto", verify=True) -> Spectrum:
    """Eigenpairs of ``op`` (all, or those with ``E`` in ``window = (lo, hi)``)."""
    if op.scheme != "centered":
        raise EigenSolverError("only Hermitian (centered-scheme) operators can be diagonalised")
    lo, hi = (None, None) if window is None else (float(window[0]), float(window[1]))
    if lo is not None:
        if not lo < hi:
            raise ValueError(f"empty window [{lo}, {hi}]")
        # closed window; values within rounding of an edge (e.g. E = |xi| exactly) count as inside
        lo, hi = lo - EDGE_SLACK, hi + EDGE_SLACK
    method = choose_method(op, method)
    if method == "dense":
        w, V = _solve_dense(op, lo, hi)
    else:
        w, V = _solve_banded(op, lo, hi, verify)
    return _certify(op, w, V, tol)


def eig_full(op: FiberedOperator, tol: float = DEFAULT_TOL, method: str = "dense") -> list[EigenPair]:
    """All eigenpairs, eigenvalues ascending."""
    return solve(op, None, tol, method).pairs()


def eig_window(op: FiberedOperator, E_lo: float, E_hi: float, tol: float = DEFAULT_TOL, method: str = "auto") -> list[EigenPair]:
    """Eigenpairs with ``E_lo <= E <= E_hi``; the count is verified by inertia on the banded route."""
    return solve(op, (E_lo, E_hi), tol, method).pairs()


def eigenvalues(op: FiberedOperator, method: str = "auto") -> np.ndarray:
    """All eigenvalues without vectors (ascending)."""
    method = choose_method(op, method)
    if method == "banded":
        ab, _ = banded_form(op)
        return np.sort(sla.eig_banded(ab, lower=True, eigvals_only=True))
    return sla.eigvalsh(op.real_symmetric().toarray())


def residual(op: FiberedOperator, pair: EigenPair) -> float:
    """``||(H - E) psi||_2`` by an explicit matrix-vector product."""
    psi = np.asarray(pair.psi)
    return float(np.linalg.norm(op.matrix @ psi - pair.E * psi))
