"""Branch tracking across the xi grid and spectral-flow bookkeeping.

Only eigenvalues above the ``E = 0`` exclusion band are tracked.  The
negative half of the spectrum is the mirror image under
``(xi, E) -> (-xi, -E)``; :func:`reflect_branches` produces it when needed.

Flow per branch is ``(sgn(E_right - a) - sgn(E_left - a)) / 2`` with the end
values ``+inf`` (diverges_plus), ``-inf`` (diverges_minus), ``v``
(tends_to), ``0`` (reaches_zero) and the last computed value (undecided).
At the ends of the xi grid a branch that decays like ``|xi|^-q`` with
``q > decay_exponent_min`` over the last few fibers, with ``q`` not
shrinking towards the edge, is classified as ``tends_to(0)``: it runs into
the flat band at ``E = 0``.  A shrinking exponent is the signature of
``c + b/xi^2`` with ``c > 0`` and is left to the flatness test.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import AmbiguousMatchError
from .oracles import predicted_flow
from .profile import CoriolisProfile

log = logging.getLogger(__name__)

DIVERGES_PLUS = "diverges_plus"
DIVERGES_MINUS = "diverges_minus"
TENDS_TO = "tends_to"
REACHES_ZERO = "reaches_zero"
UNDECIDED = "undecided"


@dataclass(frozen=True)
class TrackParams:
    delta_xi: float = 0.05
    overlap_min: float = 0.5
    match_tol: float = 0.05
    ambiguity_margin: float = 0.1
    degenerate_tol: float = 1e-4  # closer candidates are interchangeable for the flow
    eps_ess: float = 0.05
    E_hi: float = 10.0
    slope_window: int = 5
    slope_div_min: float = 0.5
    slope_flat_max: float = 0.05
    E_div_min: float = 2.0
    decay_exponent_min: float = 0.25
    decay_trend_tol: float = 0.01
    level_margin: float = 0.02
    stitch_gap: int = 2


@dataclass(frozen=True)
class Limit:
    kind: str
    value: float | None = None
    xi: float | None = None

    @property
    def decided(self) -> bool:
        return self.kind != UNDECIDED

    def end_value(self) -> float:
        if self.kind == DIVERGES_PLUS:
            return np.inf
        if self.kind == DIVERGES_MINUS:
            return -np.inf
        if self.kind == REACHES_ZERO:
            return 0.0
        return float(self.value)

    def describe(self) -> str:
        if self.kind == TENDS_TO:
            return f"tends_to({self.value:.6g})"
        if self.kind == REACHES_ZERO:
            return f"reaches_zero_at({self.xi:+.4f})"
        if self.kind == UNDECIDED:
            return f"undecided(E={self.value:.6g} at xi={self.xi:+.4f})"
        return self.kind

    def reflected(self) -> "Limit":
        kind = {DIVERGES_PLUS: DIVERGES_MINUS, DIVERGES_MINUS: DIVERGES_PLUS}.get(self.kind, self.kind)
        value = None if self.value is None else -self.value
        xi = None if self.xi is None else -self.xi
        return Limit(kind, value, xi)


@dataclass
class Branch:
    id: int
    xi: np.ndarray
    E: np.ndarray
    index: np.ndarray
    min_overlap: float = 1.0
    left: Limit | None = None
    right: Limit | None = None

    def __len__(self):
        return self.xi.size

    def limits(self):
        return self.left, self.right


@dataclass(frozen=True)
class Crossing:
    branch_id: int
    xi: float
    direction: int


@dataclass
class FlowReport:
    alpha: float
    sf_measured: int | None
    sf_bec: int
    sf_thm: int | None
    crossings: list[Crossing] = field(default_factory=list)
    boundary_correction: int = 0
    reliable: bool = True
    warnings: list[str] = field(default_factory=list)
    contributions: dict[int, int] = field(default_factory=dict)

    @property
    def decided(self) -> bool:
        return self.reliable and self.sf_measured is not None

    @property
    def matches_thm(self) -> bool | None:
        if not self.decided or self.sf_thm is None:
            return None
        return self.sf_measured == self.sf_thm

    @property
    def matches_bec(self) -> bool | None:
        return None if not self.decided else self.sf_measured == self.sf_bec


# --- tracking ------------------------------------------------------------

@dataclass
class _Open:
    xi: list
    E: list
    index: list
    min_overlap: float = 1.0


class Tracker:
    """Streaming greedy matcher; feed fibers in increasing xi with :meth:`push`."""

    def __init__(self, params: TrackParams = TrackParams()):
        self.params = params
        self._open: dict[int, _Open] = {}
        self._slot: dict[int, int] = {}  # prev-fiber index -> open branch key
        self._closed: list[_Open] = []
        self._prev_vectors = None
        self._prev_E = None
        self._prev_xi = None
        self._fiber = -1
        self._next_key = 0

    def push(self, xi: float, E, vectors=None, overlap=None) -> None:
        """Add the kept eigenvalues ``E`` of the next fiber.

        ``overlap[a, j] = |<psi_prev_a, psi_j>|`` may be given directly;
        otherwise it is computed from ``vectors`` (columns = unit psi).
        """
        p = self.params
        E = np.asarray(E, dtype=float)
        self._fiber += 1
        if self._prev_xi is not None and not xi > self._prev_xi:
            raise ValueError("fibers must be pushed in strictly increasing xi")
        if overlap is None and vectors is not None and self._prev_vectors is not None:
            overlap = np.abs(self._prev_vectors.conj().T @ vectors)
        new_slot: dict[int, int] = {}
        if self._prev_E is not None and self._slot:
            if overlap is None:
                raise ValueError("tracking needs eigenvector overlaps between adjacent fibers")
            dxi = xi - self._prev_xi
            pairs = []
            for a, key in self._slot.items():
                br = self._open[key]
                if len(br.E) > 1:
                    slope = (br.E[-1] - br.E[-2]) / (br.xi[-1] - br.xi[-2])
                    gate = p.match_tol
                else:
                    # no history: |dE/dxi| = |2 Re(conj(eta) u)| <= 1 bounds the step
                    slope, gate = 0.0, p.match_tol + dxi
                pred = br.E[-1] + slope * dxi
                cand = [j for j in np.flatnonzero(np.abs(E - pred) <= gate) if overlap[a, j] >= p.overlap_min]
                if len(cand) > 1:
                    cand.sort(key=lambda j: -overlap[a, j])
                    j1, j2 = cand[0], cand[1]
                    if overlap[a, j1] - overlap[a, j2] < p.ambiguity_margin and abs(E[j1] - E[j2]) > p.degenerate_tol:
                        raise AmbiguousMatchError(
                            f"fiber {self._fiber} (xi={xi:+.4f}): branch at E={br.E[-1]:.6f} matches "
                            f"E={E[j1]:.6f} (overlap {overlap[a, j1]:.3f}) and E={E[j2]:.6f} "
                            f"(overlap {overlap[a, j2]:.3f})",
                            fiber_index=self._fiber,
                            xi=xi,
                        )
                pairs.extend((overlap[a, j], a, j) for j in cand)
            pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
            used_a, used_j = set(), set()
            for ov, a, j in pairs:
                if a in used_a or j in used_j:
                    continue
                used_a.add(a)
                used_j.add(j)
                key = self._slot[a]
                br = self._open[key]
                br.xi.append(xi)
                br.E.append(float(E[j]))
                br.index.append(int(j))
                br.min_overlap = min(br.min_overlap, float(ov))
                new_slot[int(j)] = key
            for a, key in self._slot.items():
                if a not in used_a:
                    self._closed.append(self._open.pop(key))
        else:
            for key in list(self._open):
                self._closed.append(self._open.pop(key))
        for j in range(E.size):
            if j not in new_slot:
                key = self._next_key
                self._next_key += 1
                self._open[key] = _Open([xi], [float(E[j])], [j])
                new_slot[j] = key
        self._slot = new_slot
        self._prev_E = E
        self._prev_xi = xi
        self._prev_vectors = vectors

    def finish(self) -> list[Branch]:
        raw = self._closed + list(self._open.values())
        self._open.clear()
        raw = _stitch(raw, self.params)
        raw.sort(key=lambda b: (b.xi[0], b.E[0]))
        return [
            Branch(k, np.array(b.xi), np.array(b.E), np.array(b.index, dtype=int), b.min_overlap)
            for k, b in enumerate(raw)
        ]


def _stitch(raw: list[_Open], p: TrackParams) -> list[_Open]:
    """Join a branch end to a branch start a few fibers later when unambiguous.

    Covers fibers where a mode was filtered out or an overlap dipped; the
    join is made only if exactly one start matches the extrapolated value.
    """
    if not raw:
        return raw
    xi_max = max(b.xi[-1] for b in raw)
    changed = True
    while changed:
        changed = False
        starts = {}
        for k, b in enumerate(raw):
            starts.setdefault(round(b.xi[0] / p.delta_xi), []).append(k)
        for k, b in enumerate(raw):
            if b.xi[-1] >= xi_max - 0.5 * p.delta_xi:
                continue
            if b.E[-1] <= p.eps_ess + p.delta_xi or b.E[-1] >= p.E_hi - p.delta_xi:
                continue
            slope = (b.E[-1] - b.E[-2]) / (b.xi[-1] - b.xi[-2]) if len(b.E) > 1 else 0.0
            cand = []
            for gap in range(1, p.stitch_gap + 2):
                x = b.xi[-1] + gap * p.delta_xi
                for k2 in starts.get(round(x / p.delta_xi), []):
                    if k2 == k:
                        continue
                    pred = b.E[-1] + slope * (raw[k2].xi[0] - b.xi[-1])
                    gate = p.match_tol + (0.0 if len(b.E) > 1 else raw[k2].xi[0] - b.xi[-1])
                    if abs(raw[k2].E[0] - pred) <= gate:
                        cand.append(k2)
                if cand:
                    break
            if len(cand) == 1:
                other = raw[cand[0]]
                b.xi += other.xi
                b.E += other.E
                b.index += other.index
                b.min_overlap = min(b.min_overlap, other.min_overlap)
                raw.pop(cand[0])
                changed = True
                break
    return raw


def track(fibers, params: TrackParams = TrackParams()) -> list[Branch]:
    """Track branches through ``fibers``: iterable of ``(xi, E, vectors)`` or
    ``(xi, E, vectors, overlap)`` tuples in increasing xi."""
    tr = Tracker(params)
    for item in fibers:
        xi, E, vectors = item[0], item[1], item[2]
        overlap = item[3] if len(item) > 3 else None
        tr.push(xi, E, vectors=vectors, overlap=overlap)
    return tr.finish()


# --- limits --------------------------------------------------------------

def _end_limit(xi, E, side, at_edge, p: TrackParams) -> Limit:
    if side == "right":
        xs, es, out = xi, E, 1.0
    else:
        xs, es, out = xi[::-1], E[::-1], -1.0
    x_end, e_end = float(xs[-1]), float(es[-1])
    n = p.slope_window
    if at_edge:
        if xs.size < n + 1:
            return Limit(UNDECIDED, e_end, x_end)
        slopes = np.diff(es[-n - 1:]) / np.diff(xs[-n - 1:]) * out
        if np.all(slopes > p.slope_div_min) and e_end > p.E_div_min:
            return Limit(DIVERGES_PLUS, None, x_end)
        # power-law decay E ~ |xi|^-q towards the flat band at E = 0
        ax, ae = np.abs(xs[-n - 1:]), np.abs(es[-n - 1:])
        if np.all(ax > 0) and np.all(ae > 0):
            q = -np.diff(np.log(ae)) / np.diff(np.log(ax))
            # q shrinking outwards means a nonzero limit approached like |xi|^-2
            if np.all(q > p.decay_exponent_min) and q[-1] >= q[0] * (1.0 - p.decay_trend_tol):
                return Limit(TENDS_TO, 0.0, x_end)
        if np.all(np.abs(slopes) < p.slope_flat_max):
            return Limit(TENDS_TO, e_end, x_end)
        return Limit(UNDECIDED, e_end, x_end)
    slope = abs(es[-1] - es[-2]) / abs(xs[-1] - xs[-2]) if xs.size > 1 else 0.0
    margin = max(p.delta_xi, 2.0 * slope * p.delta_xi)
    if e_end <= p.eps_ess + margin:
        return Limit(REACHES_ZERO, None, x_end)
    if e_end >= p.E_hi - margin:
        # leaves the computed window through its top
        return Limit(DIVERGES_PLUS, None, x_end)
    return Limit(UNDECIDED, e_end, x_end)


def classify_limits(branch: Branch, xi_range: tuple[float, float], params: TrackParams = TrackParams()):
    """Classify both ends of ``branch``; ``xi_range`` is the sweep's ``(xi_min, xi_max)``."""
    tol = 0.5 * params.delta_xi
    left = _end_limit(branch.xi, branch.E, "left", branch.xi[0] <= xi_range[0] + tol, params)
    right = _end_limit(branch.xi, branch.E, "right", branch.xi[-1] >= xi_range[1] - tol, params)
    return left, right


def classify_all(branches, xi_range, params: TrackParams = TrackParams()):
    for b in branches:
        b.left, b.right = classify_limits(b, xi_range, params)
    return branches


def reflect_branches(branches) -> list[Branch]:
    """Mirror images under ``(xi, E) -> (-xi, -E)`` (limits swapped and reflected)."""
    out = []
    for b in branches:
        r = Branch(b.id, -b.xi[::-1], -b.E[::-1], b.index[::-1].copy(), b.min_overlap)
        if b.left is not None:
            r.right = b.left.reflected()
        if b.right is not None:
            r.left = b.right.reflected()
        out.append(r)
    return out


# --- flow ----------------------------------------------------------------

def _sgn(x):
    return 1 if x > 0 else (-1 if x < 0 else 0)


def branch_flow(branch: Branch, alpha: float) -> int:
    lv = branch.left.end_value()
    rv = branch.right.end_value()
    return (_sgn(rv - alpha) - _sgn(lv - alpha)) // 2


def level_crossings(branch: Branch, alpha: float) -> list[Crossing]:
    d = branch.E - alpha
    out = []
    # a sample exactly on the level counts as above it
    up = d >= 0
    for k in np.flatnonzero(up[:-1] != up[1:]):
        t = d[k] / (d[k] - d[k + 1])
        x = branch.xi[k] + t * (branch.xi[k + 1] - branch.xi[k])
        out.append(Crossing(branch.id, float(x), 1 if d[k + 1] > d[k] else -1))
    return out


def spectral_flow(
    branches,
    alpha: float,
    profile: CoriolisProfile | None = None,
    params: TrackParams = TrackParams(),
) -> FlowReport:
    """Signed count of branches crossing the level ``alpha``."""
    if not abs(alpha) > params.eps_ess:
        raise ValueError(f"level {alpha} lies inside the E=0 exclusion band (|E| <= {params.eps_ess})")
    sf_bec, sf_thm = 2, None
    if profile is not None:
        sf_bec, sf_thm = predicted_flow(profile, abs(alpha))
    warnings = []
    reliable = True
    total = 0
    crossings = []
    contrib = {}
    for b in branches:
        if b.left is None or b.right is None:
            raise ValueError(f"branch {b.id} has unclassified limits")
        c = branch_flow(b, alpha)
        for lim in (b.left, b.right):
            v = lim.end_value()
            if np.isfinite(v) and lim.kind != REACHES_ZERO and abs(v - alpha) < params.level_margin:
                reliable = False
                warnings.append(f"branch {b.id}: end value {v:.6g} within level_margin of alpha={alpha}")
        undecided = [lim for lim in (b.left, b.right) if not lim.decided]
        if undecided and c != 0:
            reliable = False
            warnings.append(
                f"branch {b.id} contributes {c:+d} but has undecided limit(s): "
                + ", ".join(lim.describe() for lim in undecided)
            )
        elif undecided:
            log.debug("branch %d: undecided limit ignored (no contribution at alpha=%g)", b.id, alpha)
        if c:
            contrib[b.id] = c
        total += c
        crossings.extend(level_crossings(b, alpha))
    crossings.sort(key=lambda c: (c.xi, c.branch_id))
    corr = total - sum(c.direction for c in crossings)
    for w in warnings:
        log.warning("alpha=%g: %s", alpha, w)
    return FlowReport(
        alpha=float(alpha),
        sf_measured=total if reliable else None,
        sf_bec=sf_bec,
        sf_thm=sf_thm,
        crossings=crossings,
        boundary_correction=corr,
        reliable=reliable,
        warnings=warnings,
        contributions=contrib,
    )


# --- diagnostics ---------------------------------------------------------

def find_kelvin(branches, tol: float = 0.02) -> Branch | None:
    """Branch that follows ``E = xi`` most closely (median deviation below ``tol``)."""
    best, best_dev = None, tol
    for b in branches:
        sel = b.xi > 0
        if sel.sum() < 3:
            continue
        dev = float(np.median(np.abs(b.E[sel] - b.xi[sel])))
        if dev < best_dev:
            best, best_dev = b, dev
    return best


def line_crossings(branch: Branch, slope: float = -1.0) -> list[tuple[float, float]]:
    """Points where ``branch`` crosses ``E = slope * xi``: ``(xi0, dE/dxi)``."""
    d = branch.E - slope * branch.xi
    out = []
    up = d >= 0
    for k in np.flatnonzero(up[:-1] != up[1:]):
        t = d[k] / (d[k] - d[k + 1])
        x = branch.xi[k] + t * (branch.xi[k + 1] - branch.xi[k])
        out.append((float(x), float((branch.E[k + 1] - branch.E[k]) / (branch.xi[k + 1] - branch.xi[k]))))
    return out
