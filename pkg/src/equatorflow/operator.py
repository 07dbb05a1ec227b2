"""Finite-difference discretisation of the fibered shallow-water operator.

For an along-edge wavenumber ``xi`` the fiber operator acts on
``psi = (eta, u, v)`` as::

    [ 0      xi     D_y  ]
    [ xi     0      i f  ]
    [ D_y   -i f    0    ]

with ``D_y = -i d/dy``.  The y-axis is truncated to ``[-L, L)``, made
periodic, and ``d/dy`` is replaced by the centered difference.  Unknowns are
stored component-interleaved, ``(eta_i, u_i, v_i)`` for node ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TextIO

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError
from .profile import CoriolisProfile

NCOMP = 3


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid ``y_i = -L + i h`` with ``h = 2L/m``."""

    L: float
    m: int

    def __post_init__(self):
        if not isinstance(self.m, (int, np.integer)) or self.m < 3 or self.m % 2 == 0:
            raise ConfigError(f"grid size m must be an odd integer >= 3, got {self.m!r}")
        if not self.L > 0:
            raise ConfigError(f"grid half-width L must be positive, got {self.L!r}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.m

    @property
    def nodes(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.m)

    @property
    def size(self) -> int:
        return NCOMP * self.m

    def wavenumbers(self) -> np.ndarray:
        """Discrete wavenumbers k_j = 2 pi j / (2L) in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.m, d=self.h)


def _hermite(t, p0, p1, m0, m1, length):
    t2, t3 = t * t, t * t * t
    return (
        (2 * t3 - 3 * t2 + 1) * p0
        + (t3 - 2 * t2 + t) * length * m0
        + (-2 * t3 + 3 * t2) * p1
        + (t3 - t2) * length * m1
    )


def seam_blend(profile: CoriolisProfile, L: float, seam_width: float):
    """Return the C^1 cubic joining f(L - w) to f(-L + w) across the wrap point.

    The returned callable takes the unwrapped coordinate ``s`` in
    ``[L - w, L + w]`` (``s = y + 2L`` for ``y < 0``).
    """
    w = seam_width
    p0 = float(profile.evaluate(L - w))
    p1 = float(profile.evaluate(-L + w))
    m0 = float(profile.derivative(L - w, side="left"))
    m1 = float(profile.derivative(-L + w, side="right"))
    length = 2.0 * w

    def blend(s):
        t = (np.asarray(s, dtype=float) - (L - w)) / length
        return _hermite(t, p0, p1, m0, m1, length)

    return blend


def periodize(profile: CoriolisProfile, grid: Grid, seam_width: float = 1.0) -> np.ndarray:
    """Sample f at the grid nodes with a C^1 blend over the periodic seam."""
    L, w = grid.L, seam_width
    if not 0 < w < L:
        raise ConfigError(f"seam width must lie in (0, L), got {w}")
    if profile.extent < L:
        raise ConfigError(f"profile range [-{profile.extent}, {profile.extent}] does not cover [-{L}, {L}]")
    y = grid.nodes
    for j in profile.jumps:
        if abs(j.y) >= L - w:
            raise ConfigError(f"jump at y={j.y} lies inside the seam buffer |y| >= {L - w}")
        if np.min(np.abs(y - j.y)) < 1e-9 * grid.h:
            raise ConfigError(f"jump at y={j.y} coincides with a grid node (m={grid.m}, L={L})")
    f = np.asarray(profile.evaluate(y), dtype=float)
    s = np.where(y >= 0, y, y + 2 * L)
    seam = (s > L - w) & (s < L + w)
    f[seam] = seam_blend(profile, L, w)(s[seam])
    return f


@dataclass
class FiberedOperator:
    """Assembled ``3m x 3m`` Hermitian matrix of one fiber (sparse CSR)."""

    xi: float
    matrix: sp.csr_matrix
    grid: Grid | None = None
    f_samples: np.ndarray | None = field(default=None, repr=False)
    scheme: str = "centered"

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def is_hermitian(self) -> bool:
        """Exact (bit-level) Hermiticity."""
        diff = self.matrix - self.matrix.conj().T
        return diff.nnz == 0 or np.max(np.abs(diff.data)) == 0.0

    def real_symmetric(self) -> sp.csr_matrix:
        """Real symmetric matrix ``U^H H U`` with ``U = diag(1, 1, i)`` per node.

        Eigenvectors map back as ``psi = U phi`` (the v-component gains a
        factor ``i``).
        """
        coo = self.matrix.tocoo()
        phase = np.tile(np.array([1.0, 1.0, 1j]), self.size // NCOMP)
        data = np.conj(phase[coo.row]) * coo.data * phase[coo.col]
        if np.any(data.imag != 0.0):
            raise ValueError("operator has no real symmetric form (not assembled by the centered scheme?)")
        return sp.csr_matrix((data.real, (coo.row, coo.col)), shape=coo.shape)

    def bandwidth(self) -> int:
        """Max ``|row - col|`` ignoring the periodic corner couplings."""
        coo = self.matrix.tocoo()
        off = np.abs(coo.row - coo.col)
        if self.grid is not None:
            off = off[off < self.size // 2]
        return int(off.max()) if off.size else 0


def assemble(
    profile: CoriolisProfile | None,
    grid: Grid,
    xi: float,
    seam_width: float = 1.0,
    scheme: str = "centered",
    f_samples: np.ndarray | None = None,
) -> FiberedOperator:
    """Assemble the fiber operator at wavenumber ``xi``.

    ``f_samples`` may be passed to skip :func:`periodize` (e.g. when many
    fibers share the same profile).  ``scheme='forward'`` is a test hook that
    uses a one-sided difference in both coupling blocks and therefore breaks
    Hermiticity.
    """
    if f_samples is None:
        f_samples = periodize(profile, grid, seam_width)
    f = np.asarray(f_samples, dtype=float)
    m, h = grid.m, grid.h
    i = np.arange(m)
    eta, u, v = NCOMP * i, NCOMP * i + 1, NCOMP * i + 2
    nxt = NCOMP * ((i + 1) % m)
    prv = NCOMP * ((i - 1) % m)
    xi = float(xi)

    if scheme == "centered":
        c = 1.0 / (2.0 * h)
        # upper-triangular-ish generator; H = T + T^H keeps Hermiticity exact
        rows = np.concatenate([eta, u, eta, eta])
        cols = np.concatenate([u, v, nxt + 2, prv + 2])
        vals = np.concatenate(
            [
                np.full(m, xi, dtype=complex),
                1j * f,
                np.full(m, -1j * c),
                np.full(m, 1j * c),
            ]
        )
        T = sp.csr_matrix((vals, (rows, cols)), shape=(NCOMP * m, NCOMP * m))
        H = (T + T.conj().T).tocsr()
    elif scheme == "forward":
        c = 1.0 / h
        rows = np.concatenate([eta, u, u, v, eta, eta, v, v])
        cols = np.concatenate([u, eta, v, u, nxt + 2, v, nxt, eta])
        vals = np.concatenate(
            [
                np.full(m, xi, dtype=complex),
                np.full(m, xi, dtype=complex),
                1j * f,
                -1j * f,
                np.full(m, -1j * c),
                np.full(m, 1j * c),
                np.full(m, -1j * c),
                np.full(m, 1j * c),
            ]
        )
        H = sp.csr_matrix((vals, (rows, cols)), shape=(NCOMP * m, NCOMP * m))
    else:
        raise ConfigError(f"unknown difference scheme {scheme!r}")
    H.sum_duplicates()
    return FiberedOperator(xi=xi, matrix=H, grid=grid, f_samples=f, scheme=scheme)


def gamma_matrix(size: int) -> sp.dia_matrix:
    return sp.diags(np.tile(np.array([1.0, 1.0, -1.0]), size // NCOMP))


def gamma_conjugate(op: FiberedOperator) -> FiberedOperator:
    """``-Gamma H(xi) Gamma`` with ``Gamma = diag(1, 1, -1)``.

    For this operator family the result is exactly ``H(-xi)``; its spectrum
    is the negated spectrum of ``H(xi)``.
    """
    G = gamma_matrix(op.size)
    M = (-(G @ op.matrix @ G)).tocsr()
    return FiberedOperator(xi=-op.xi, matrix=M, grid=op.grid, f_samples=op.f_samples, scheme=op.scheme)


def dump_triplets(op: FiberedOperator, out: TextIO) -> None:
    """Write the matrix as ``row col re im`` lines (0-based, one nonzero per line)."""
    coo = op.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    out.write(f"# equatorflow sparse triplets: rows={coo.shape[0]} cols={coo.shape[1]} nnz={coo.nnz} xi={float(op.xi)!r}\n")
    for k in order:
        z = coo.data[k]
        out.write(f"{coo.row[k]} {coo.col[k]} {float(z.real)!r} {float(z.imag)!r}\n")


def load_triplets(src: TextIO) -> sp.csr_matrix:
    header = src.readline()
    fields = dict(tok.split("=") for tok in header.split() if "=" in tok)
    n, mcols = int(fields["rows"]), int(fields["cols"])
    data = np.loadtxt(src, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix((n, mcols), dtype=complex)
    return sp.csr_matrix(
        (data[:, 2] + 1j * data[:, 3], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(n, mcols)
    )
