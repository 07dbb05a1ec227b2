"""Full pipeline over a xi grid: assemble, solve, filter, track, count flow.

Fibers are independent and may be solved in a process pool; results are
consumed in xi order.  Only the previous fiber's kept eigenvectors are held
in memory: tracking needs nothing but the overlap matrix between adjacent
fibers, which is computed on arrival and stored with the fiber record.
"""

from __future__ import annotations

import hashlib
import logging
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .branches import Branch, FlowReport, Tracker, classify_all, spectral_flow
from .config import SweepConfig
from .eigen import Spectrum, eigenvalues, solve
from .errors import AmbiguousMatchError, EquatorFlowError, FiberError
from .filters import FilterDiagnostics, filter_spectrum
from .operator import Grid, assemble, gamma_conjugate, periodize
from .oracles import plane_wave_spectrum

log = logging.getLogger(__name__)

REASON_CODES = {"none": 0, "wall": 1, "fourier": 2}
REASON_NAMES = {v: k for k, v in REASON_CODES.items()}


@dataclass
class FiberRecord:
    """Everything kept about one fiber (eigenvectors are not retained)."""

    index: int
    xi: float
    E: np.ndarray
    residual: np.ndarray
    interior_fraction: np.ndarray
    lowfreq_fraction: np.ndarray
    kept: np.ndarray
    reject_reason: np.ndarray  # codes, see REASON_CODES
    overlap: np.ndarray | None = None  # |<prev kept, this kept>|

    @property
    def kept_E(self) -> np.ndarray:
        return self.E[self.kept]

    def diagnostics(self) -> list[FilterDiagnostics]:
        return [
            FilterDiagnostics(float(a), float(b), bool(k), REASON_NAMES[int(r)])
            for a, b, k, r in zip(self.interior_fraction, self.lowfreq_fraction, self.kept, self.reject_reason)
        ]

    def save(self, path: Path) -> None:
        arrays = {
            "index": np.array(self.index), "xi": np.array(self.xi), "E": self.E, "residual": self.residual,
            "interior_fraction": self.interior_fraction, "lowfreq_fraction": self.lowfreq_fraction,
            "kept": self.kept, "reject_reason": self.reject_reason,
        }
        if self.overlap is not None:
            arrays["overlap"] = self.overlap
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, **arrays)
        tmp.replace(path)

    @classmethod
    def load(cls, path: Path) -> "FiberRecord":
        with np.load(path) as z:
            return cls(
                int(z["index"]), float(z["xi"]), z["E"], z["residual"], z["interior_fraction"],
                z["lowfreq_fraction"], z["kept"], z["reject_reason"], z["overlap"] if "overlap" in z else None,
            )


@dataclass
class SweepResult:
    config: SweepConfig
    fibers: list[FiberRecord]
    branches: list[Branch]
    reports: list[FlowReport]
    provenance: dict
    warnings: list[str] = field(default_factory=list)

    def result_hash(self) -> str:
        """Digest of all numbers produced (timing and paths excluded)."""
        h = hashlib.sha256()
        h.update(self.config.digest().encode())
        for f in self.fibers:
            for arr in (f.E, f.residual, f.interior_fraction, f.lowfreq_fraction, f.kept, f.reject_reason):
                h.update(np.ascontiguousarray(arr).tobytes())
        for b in self.branches:
            h.update(b.xi.tobytes())
            h.update(b.E.tobytes())
            h.update(f"{b.left}{b.right}".encode())
        for r in self.reports:
            h.update(f"{r.alpha}|{r.sf_measured}|{r.sf_thm}|{r.reliable}".encode())
        return h.hexdigest()

    @property
    def all_decided(self) -> bool:
        return all(r.decided for r in self.reports)

    def report(self, alpha: float) -> FlowReport:
        for r in self.reports:
            if abs(r.alpha - alpha) < 1e-12:
                return r
        raise KeyError(alpha)


# --- per-fiber work ----------------------------------------------------------

def solve_fiber(cfg: SweepConfig, index: int, xi: float, f_samples=None):
    """Solve one fiber; returns ``(FiberRecord without overlap, kept eigenvectors)``."""
    grid = Grid(cfg.L, cfg.m)
    try:
        op = assemble(cfg.profile, grid, xi, seam_width=cfg.seam_width, scheme=cfg.scheme, f_samples=f_samples)
        window = None if cfg.full_solve else cfg.E_window
        spec = solve(op, window, tol=cfg.eig_tol, method=cfg.method)
    except EquatorFlowError as exc:
        raise FiberError(str(exc), index, xi) from exc
    if cfg.full_solve:
        lo, hi = cfg.E_window
        spec = spec.subset((spec.values >= lo) & (spec.values <= hi))
    kept, diags = filter_spectrum(spec, grid, cfg.filter)
    rec = FiberRecord(
        index=index,
        xi=float(xi),
        E=spec.values,
        residual=spec.residuals,
        interior_fraction=np.array([d.interior_fraction for d in diags]),
        lowfreq_fraction=np.array([d.lowfreq_fraction for d in diags]),
        kept=np.array([d.kept for d in diags], dtype=bool),
        reject_reason=np.array([REASON_CODES[d.reject_reason] for d in diags], dtype=np.int8),
    )
    return rec, kept.vectors


def fiber_spectrum(cfg: SweepConfig, xi: float, kept_only: bool = True) -> Spectrum:
    """Recompute one fiber with eigenvectors (e.g. for oracle comparisons)."""
    grid = Grid(cfg.L, cfg.m)
    op = assemble(cfg.profile, grid, xi, seam_width=cfg.seam_width, scheme=cfg.scheme)
    spec = solve(op, cfg.E_window, tol=cfg.eig_tol, method=cfg.method)
    if kept_only:
        spec, _ = filter_spectrum(spec, grid, cfg.filter)
    return spec


def _worker(args):
    cfg, index, xi, f_samples = args
    return solve_fiber(cfg, index, xi, f_samples)


# --- orchestration -----------------------------------------------------------

def _checkpoint_path(cfg: SweepConfig, index: int) -> Path | None:
    if not cfg.checkpoint_dir:
        return None
    d = Path(cfg.checkpoint_dir) / cfg.digest()
    d.mkdir(parents=True, exist_ok=True)
    return d / f"fiber_{index:05d}.npz"


def run(cfg: SweepConfig, progress=None) -> SweepResult:
    """Execute the sweep described by ``cfg`` (no files written; see ``export``)."""
    t0 = time.perf_counter()
    grid = Grid(cfg.L, cfg.m)
    f_samples = periodize(cfg.profile, grid, cfg.seam_width)
    xis = cfg.xi_grid
    n = xis.size

    records: list[FiberRecord | None] = [None] * n
    todo = []
    for k in range(n):
        p = _checkpoint_path(cfg, k)
        if p is not None and p.exists():
            records[k] = FiberRecord.load(p)
        else:
            todo.append(k)
    if todo:
        log.info("solving %d of %d fibers (%d from checkpoint)", len(todo), n, n - len(todo))

    tracker = Tracker(cfg.tracking)
    prev_vectors = None
    prev_index = None

    def results():
        args = [(cfg, k, float(xis[k]), f_samples) for k in todo]
        if cfg.workers > 1 and len(args) > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                yield from pool.map(_worker, args, chunksize=1)
        else:
            for a in args:
                yield _worker(a)

    it = iter(results())
    for k in range(n):
        vectors = None
        if records[k] is None:
            rec, vectors = next(it)
            if k > 0 and prev_index != k - 1:
                # previous fiber came from a checkpoint: rebuild its vectors for the overlap
                _, prev_vectors = solve_fiber(cfg, k - 1, float(xis[k - 1]), f_samples)
            if k > 0:
                rec.overlap = np.abs(prev_vectors.conj().T @ vectors)
            p = _checkpoint_path(cfg, k)
            if p is not None:
                rec.save(p)
            records[k] = rec
            prev_vectors, prev_index = vectors, k
        rec = records[k]
        try:
            tracker.push(rec.xi, rec.kept_E, overlap=rec.overlap)
        except AmbiguousMatchError as exc:
            raise FiberError(str(exc), k, rec.xi) from exc
        if progress is not None:
            progress(k + 1, n)

    branches = classify_all(tracker.finish(), (cfg.xi_min, cfg.xi_max), cfg.tracking)
    reports = [spectral_flow(branches, a, cfg.profile, cfg.tracking) for a in cfg.alphas]
    warnings = []
    undecided = [b for b in branches if not (b.left.decided and b.right.decided)]
    if undecided:
        warnings.append(f"{len(undecided)} of {len(branches)} branches have an undecided limit")
    for r in reports:
        warnings.extend(f"alpha={r.alpha:g}: {w}" for w in r.warnings)
    elapsed = time.perf_counter() - t0
    prov = {
        "config_hash": cfg.digest(),
        "code_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "workers": cfg.workers,
        "fibers": n,
        "fibers_from_checkpoint": n - len(todo),
        "timing_total_s": round(elapsed, 3),
        "timing_per_fiber_s": round(elapsed / max(1, len(todo)), 4),
    }
    return SweepResult(cfg, records, branches, reports, prov, warnings)


# --- self test ------------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    magnitude: float
    detail: str = ""


@dataclass
class SelfTestReport:
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def format(self) -> str:
        lines = []
        for c in self.checks:
            flag = "PASS" if c.passed else "FAIL"
            lines.append(f"[{flag}] {c.name}: {c.magnitude:.3e} {c.detail}".rstrip())
        lines.append("selftest " + ("passed" if self.passed else "FAILED"))
        return "\n".join(lines)


def self_test(cfg: SweepConfig, gamma_tol: float = 1e-10, seed: int = 0) -> SelfTestReport:
    """Structural checks over the configured grid (cheap; no tracking)."""
    grid = Grid(cfg.L, cfg.m)
    f_samples = periodize(cfg.profile, grid, cfg.seam_width)
    xis = cfg.xi_grid
    checks: list[Check] = []

    # Hermiticity and zero diagonal on every fiber
    herm_bad, trace_max = [], 0.0
    for xi in xis:
        op = assemble(None, grid, xi, scheme=cfg.scheme, f_samples=f_samples)
        if not op.is_hermitian():
            herm_bad.append(float(xi))
        trace_max = max(trace_max, float(np.max(np.abs(op.matrix.diagonal()))))
    checks.append(Check(
        "hermiticity", not herm_bad, float(len(herm_bad)),
        f"non-Hermitian at xi={herm_bad[0]:+.4f} (and {len(herm_bad) - 1} more)" if herm_bad else "all fibers exact",
    ))
    checks.append(Check("zero diagonal", trace_max == 0.0, trace_max, "max |H_ii| over all fibers"))

    rng = np.random.default_rng(seed)
    nsamp = min(cfg.selftest_samples, xis.size)
    sample = np.sort(rng.choice(xis.size, size=nsamp, replace=False))
    if herm_bad:
        checks.append(Check("gamma symmetry", False, float("inf"), "skipped: operator not Hermitian"))
        return SelfTestReport(checks)

    # Gamma symmetry: matrix identity on every fiber, spectra on sampled ones
    mat_bad = 0
    for xi in xis[xis > 0]:
        g = gamma_conjugate(assemble(None, grid, xi, f_samples=f_samples))
        other = assemble(None, grid, -xi, f_samples=f_samples)
        diff = g.matrix - other.matrix
        if diff.nnz and np.max(np.abs(diff.data)) > 0:
            mat_bad += 1
    asym, worst = 0.0, None
    for k in sample:
        xi = float(xis[k])
        a = eigenvalues(assemble(None, grid, xi, f_samples=f_samples), cfg.method)
        b = eigenvalues(assemble(None, grid, -xi, f_samples=f_samples), cfg.method)
        d = float(np.max(np.abs(np.sort(a) + np.sort(b)[::-1])))
        if d >= asym:
            asym, worst = d, xi
    checks.append(Check("gamma matrix identity", mat_bad == 0, float(mat_bad), "fibers where -G H(xi) G != H(-xi)"))
    checks.append(Check("gamma spectral symmetry", asym <= gamma_tol, asym,
                        f"max |E_k(xi) + E_(n-k)(-xi)| on {nsamp} fibers (worst xi={worst:+.4f})"))

    # window/full consistency and trace identity on sampled fibers
    wf_bad, tr_max = [], 0.0
    lo, hi = cfg.E_window
    for k in sample:
        xi = float(xis[k])
        op = assemble(None, grid, xi, f_samples=f_samples)
        full = solve(op, None, tol=cfg.eig_tol, method="dense")
        win = solve(op, (lo, hi), tol=cfg.eig_tol, method=cfg.method)
        ref = full.values[(full.values >= lo) & (full.values <= hi)]
        if ref.size != len(win) or (ref.size and np.max(np.abs(ref - win.values)) > 1e-10 * (1 + hi)):
            wf_bad.append(xi)
        tr_max = max(tr_max, abs(float(np.sum(full.values))))
    checks.append(Check("window/full consistency", not wf_bad, float(len(wf_bad)),
                        f"on {nsamp} fibers" + (f"; mismatch at xi={wf_bad}" if wf_bad else "")))
    checks.append(Check("trace identity", tr_max <= 1e-8 * grid.size, tr_max, "max |sum E| on sampled fibers"))

    # constant profile: plane-wave closed form
    if np.ptp(f_samples) == 0.0:
        err = 0.0
        for k in sample:
            xi = float(xis[k])
            ev = eigenvalues(assemble(None, grid, xi, f_samples=f_samples), "dense")
            ref = plane_wave_spectrum(float(f_samples[0]), xi, grid)
            err = max(err, float(np.max(np.abs(ev - ref) / np.maximum(1.0, np.abs(ref)))))
        checks.append(Check("plane-wave closed form", err <= 1e-10, err, "max relative error"))
    return SelfTestReport(checks)
