"""YAML configuration for profiles and sweeps.

Errors raised while reading a file carry ``line N, field a.b[2].c`` so the
offending entry can be found directly.  See ``configs/`` for examples and
README for the full schema.
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import catalog
from .branches import TrackParams
from .errors import ConfigError, ProfileError
from .filters import FilterParams
from .profile import LEVEL_TOL, CoriolisProfile, half_jump_sets, make_segment

PRESETS = {
    "desk": {"grid": {"m": 601}},
    "paper": {"grid": {"m": 5001}},
}


# --- YAML with line numbers ----------------------------------------------

class Located:
    """Parsed YAML tree plus a map ``path -> line`` (1-based)."""

    def __init__(self, data, lines: dict[str, int], source: str = "<config>"):
        self.data = data
        self.lines = lines
        self.source = source

    def where(self, path: str) -> str:
        probe = path
        while probe:
            if probe in self.lines:
                return f"{self.source}: line {self.lines[probe]}, field {path}"
            probe = probe.rsplit(".", 1)[0] if "." in probe else (probe.rsplit("[", 1)[0] if "[" in probe else "")
        return f"{self.source}: field {path}"


def _walk(node, path, lines):
    lines[path or "<root>"] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for knode, vnode in node.value:
            key = knode.value
            sub = f"{path}.{key}" if path else key
            lines[sub] = knode.start_mark.line + 1
            out[key] = _walk(vnode, sub, lines)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_walk(v, f"{path}[{k}]", lines) for k, v in enumerate(node.value)]
    return yaml.safe_load(yaml.serialize(node))


def load_yaml(text: str, source: str = "<config>") -> Located:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f"{source}: line {mark.line + 1}" if mark else source
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}", loc) from exc
    lines: dict[str, int] = {}
    data = {} if node is None else _walk(node, "", lines)
    return Located(data, lines, source)


def load_file(path) -> Located:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from exc
    return load_yaml(text, str(path))


# --- typed field access ---------------------------------------------------

def _get(tree: Located, mapping: dict, path: str, key: str, kind, default=None, required=False):
    full = f"{path}.{key}" if path else key
    if not isinstance(mapping, dict):
        raise ConfigError("expected a mapping", tree.where(path))
    if key not in mapping or mapping[key] is None:
        if required:
            raise ConfigError(f"missing required field '{key}'", tree.where(path))
        return default
    val = mapping[key]
    try:
        if kind is float:
            if isinstance(val, bool):
                raise TypeError
            out = float(val)
            if not np.isfinite(out):
                raise ValueError
            return out
        if kind is int:
            if isinstance(val, bool) or float(val) != int(val):
                raise TypeError
            return int(val)
        if kind is bool:
            if not isinstance(val, bool):
                raise TypeError
            return val
        if kind is str:
            if not isinstance(val, str):
                raise TypeError
            return val
        if kind is list:
            if not isinstance(val, list):
                raise TypeError
            return val
        if kind is dict:
            if not isinstance(val, dict):
                raise TypeError
            return val
    except (TypeError, ValueError):
        raise ConfigError(f"expected {kind.__name__}, got {val!r}", tree.where(full)) from None
    return val


def _check_keys(tree: Located, mapping: dict, path: str, allowed):
    for k in mapping:
        if k not in allowed:
            full = f"{path}.{k}" if path else k
            raise ConfigError(f"unknown field '{k}' (allowed: {', '.join(sorted(allowed))})", tree.where(full))


# --- profile --------------------------------------------------------------

PROFILE_KEYS = {"catalog", "args", "segments", "plateau_halfwidth", "tail_slope", "extent", "tail_floor", "name", "file"}


def profile_from_tree(tree: Located, mapping: dict, path: str = "profile", base_dir: Path | None = None) -> CoriolisProfile:
    _check_keys(tree, mapping, path, PROFILE_KEYS)
    if "file" in mapping:
        fpath = Path(_get(tree, mapping, path, "file", str))
        if base_dir is not None and not fpath.is_absolute():
            fpath = base_dir / fpath
        sub = load_file(fpath)
        root = sub.data.get("profile", sub.data) if isinstance(sub.data, dict) else sub.data
        return profile_from_tree(sub, root, "profile" if "profile" in sub.data else "", fpath.parent)
    if "catalog" in mapping:
        name = _get(tree, mapping, path, "catalog", str)
        if name not in catalog.CATALOG:
            raise ConfigError(
                f"unknown catalog profile {name!r} (known: {', '.join(sorted(catalog.CATALOG))})",
                tree.where(f"{path}.catalog"),
            )
        args = _get(tree, mapping, path, "args", dict, default={})
        try:
            return catalog.CATALOG[name](**args)
        except (TypeError, ProfileError, ValueError) as exc:
            raise ConfigError(str(exc), tree.where(f"{path}.args")) from exc
    segs_raw = _get(tree, mapping, path, "segments", list, required=True)
    segments = []
    for k, s in enumerate(segs_raw):
        sp = f"{path}.segments[{k}]"
        if not isinstance(s, dict):
            raise ConfigError("segment must be a mapping", tree.where(sp))
        _check_keys(tree, s, sp, {"kind", "y_from", "y_to", "params"})
        kind = _get(tree, s, sp, "kind", str, required=True)
        y0 = _get(tree, s, sp, "y_from", float, required=True)
        y1 = _get(tree, s, sp, "y_to", float, required=True)
        params = _get(tree, s, sp, "params", dict, default={})
        try:
            segments.append(make_segment(kind, y0, y1, **params))
        except (ProfileError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc), tree.where(sp)) from exc
    kw = {}
    for key in ("plateau_halfwidth", "tail_slope", "extent", "tail_floor"):
        v = _get(tree, mapping, path, key, float)
        if v is not None:
            kw[key] = v
    try:
        return CoriolisProfile(segments, name=_get(tree, mapping, path, "name", str), **kw)
    except ProfileError as exc:
        raise ConfigError(str(exc), tree.where(path)) from exc


def load_profile(path) -> CoriolisProfile:
    tree = load_file(path)
    root = tree.data.get("profile", tree.data)
    return profile_from_tree(tree, root, "profile" if "profile" in tree.data else "", Path(path).parent)


# --- sweep ------------------------------------------------------------------

@dataclass
class SweepConfig:
    profile: CoriolisProfile
    L: float = 11.0
    m: int = 601
    seam_width: float = 1.0
    scheme: str = "centered"
    xi_min: float = -8.0
    xi_max: float = 8.0
    delta_xi: float = 0.05
    E_window: tuple[float, float] = (0.05, 10.0)
    full_solve: bool = False
    method: str = "auto"
    eig_tol: float = 1e-9
    filter: FilterParams = field(default_factory=FilterParams)
    tracking: TrackParams = field(default_factory=TrackParams)
    alphas: list[float] = field(default_factory=lambda: [0.5])
    out_dir: str = "equatorflow-out"
    svg: bool = True
    svg_rejected: bool = False
    workers: int = 1
    checkpoint_dir: str | None = None
    preset: str = "desk"
    selftest_samples: int = 3
    source: dict = field(default_factory=dict, repr=False)

    @property
    def xi_grid(self) -> np.ndarray:
        n = int(round((self.xi_max - self.xi_min) / self.delta_xi))
        return np.round(self.xi_min + self.delta_xi * np.arange(n + 1), 12)

    def digest(self) -> str:
        """Stable hash of everything that affects the numbers (not paths or workers)."""
        d = self.as_dict()
        for k in ("out_dir", "workers", "checkpoint_dir", "svg", "svg_rejected"):
            d.pop(k, None)
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def as_dict(self) -> dict:
        d = {}
        for f in dataclasses.fields(self):
            if f.name in ("source",):
                continue
            v = getattr(self, f.name)
            if f.name == "profile":
                v = v.to_config()
            elif dataclasses.is_dataclass(v):
                v = dataclasses.asdict(v)
            elif isinstance(v, tuple):
                v = list(v)
            d[f.name] = v
        return d


SWEEP_KEYS = {"profile", "preset", "grid", "sweep", "filter", "tracking", "alpha", "output", "workers", "checkpoint", "selftest"}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _dataclass_from(tree, mapping, path, cls, overrides=None):
    mapping = mapping or {}
    kinds = {f.name: f.type for f in dataclasses.fields(cls)}
    _check_keys(tree, mapping, path, set(kinds))
    kw = {}
    for name, typ in kinds.items():
        kind = {"float": float, "int": int, "bool": bool}.get(str(typ), float)
        v = _get(tree, mapping, path, name, kind)
        if v is not None:
            kw[name] = v
    kw.update(overrides or {})
    return cls(**kw)


def sweep_from_tree(tree: Located, base_dir: Path | None = None, preset: str | None = None,
                    alphas=None, out_dir=None) -> SweepConfig:
    data = tree.data
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", tree.where(""))
    _check_keys(tree, data, "", SWEEP_KEYS)
    if "profile" not in data:
        raise ConfigError("missing required section 'profile'", tree.where(""))
    profile = profile_from_tree(tree, data["profile"], "profile", base_dir)

    file_preset = _get(tree, data, "", "preset", str, default="desk")
    chosen = preset or file_preset
    if chosen not in PRESETS:
        where = tree.where("preset") if preset is None else "--preset"
        raise ConfigError(f"unknown preset {chosen!r} (known: {', '.join(PRESETS)})", where)
    grid_raw = _get(tree, data, "", "grid", dict, default={})
    # the preset supplies defaults; a preset forced on the command line wins over the file
    grid = _merge(PRESETS[chosen]["grid"], grid_raw)
    if preset is not None:
        grid = _merge(grid, PRESETS[preset]["grid"])
    preset = chosen
    _check_keys(tree, grid, "grid", {"L", "m", "seam_width", "scheme"})
    L = _get(tree, grid, "grid", "L", float, default=11.0)
    m = _get(tree, grid, "grid", "m", int, default=601)
    seam = _get(tree, grid, "grid", "seam_width", float, default=1.0)
    scheme = _get(tree, grid, "grid", "scheme", str, default="centered")
    if m < 3 or m % 2 == 0:
        raise ConfigError(f"m must be an odd integer >= 3, got {m}", tree.where("grid.m"))
    if L <= 0:
        raise ConfigError("L must be positive", tree.where("grid.L"))
    if not 0 < seam < L:
        raise ConfigError("seam_width must lie in (0, L)", tree.where("grid.seam_width"))
    if scheme not in ("centered", "forward"):
        raise ConfigError("scheme must be 'centered' or 'forward'", tree.where("grid.scheme"))

    sw = _get(tree, data, "", "sweep", dict, default={})
    _check_keys(tree, sw, "sweep", {"xi_min", "xi_max", "delta_xi", "E_window", "full_solve", "method", "eig_tol"})
    xi_min = _get(tree, sw, "sweep", "xi_min", float, default=-8.0)
    xi_max = _get(tree, sw, "sweep", "xi_max", float, default=8.0)
    dxi = _get(tree, sw, "sweep", "delta_xi", float, default=0.05)
    if not dxi > 0:
        raise ConfigError("delta_xi must be positive", tree.where("sweep.delta_xi"))
    if abs(xi_min + xi_max) > 1e-12 or not xi_max > 0:
        raise ConfigError("xi grid must be symmetric about 0 (xi_min = -xi_max < 0)", tree.where("sweep.xi_min"))
    n = (xi_max - xi_min) / dxi
    if abs(n - round(n)) > 1e-9 * max(1.0, n) or round(n) % 2:
        raise ConfigError("(xi_max - xi_min) / delta_xi must be an even integer", tree.where("sweep.delta_xi"))
    win = _get(tree, sw, "sweep", "E_window", list, default=[0.05, 10.0])
    if len(win) != 2 or not all(isinstance(x, (int, float)) for x in win) or not 0 < win[0] < win[1]:
        raise ConfigError("E_window must be [E_lo, E_hi] with 0 < E_lo < E_hi", tree.where("sweep.E_window"))
    full = _get(tree, sw, "sweep", "full_solve", bool, default=False)
    method = _get(tree, sw, "sweep", "method", str, default="auto")
    if method not in ("auto", "dense", "banded"):
        raise ConfigError("method must be auto, dense or banded", tree.where("sweep.method"))
    eig_tol = _get(tree, sw, "sweep", "eig_tol", float, default=1e-9)

    fparams = _dataclass_from(tree, data.get("filter"), "filter", FilterParams)
    tr = data.get("tracking") or {}
    if "eps_ess" in tr or "E_hi" in tr or "delta_xi" in tr:
        bad = next(k for k in ("eps_ess", "E_hi", "delta_xi") if k in tr)
        raise ConfigError("set the E window and delta_xi in the 'sweep' section", tree.where(f"tracking.{bad}"))
    tparams = _dataclass_from(
        tree, tr, "tracking", TrackParams,
        overrides={"delta_xi": dxi, "eps_ess": float(win[0]), "E_hi": float(win[1])},
    )

    if alphas is None:
        raw = data.get("alpha", [0.5])
        raw = raw if isinstance(raw, list) else [raw]
        alphas = []
        for k, a in enumerate(raw):
            if isinstance(a, bool) or not isinstance(a, (int, float)):
                raise ConfigError(f"alpha must be a number, got {a!r}", tree.where(f"alpha[{k}]"))
            alphas.append(float(a))
    alphas = [float(a) for a in alphas]
    left, right = half_jump_sets(profile)
    for k, a in enumerate(alphas):
        where = tree.where(f"alpha[{k}]") if "alpha" in data else "--alpha"
        if not abs(a) > win[0]:
            raise ConfigError(f"alpha={a} lies in the E=0 exclusion band", where)
        for v in left + right:
            if abs(abs(a) - v) < max(tparams.level_margin, LEVEL_TOL):
                raise ConfigError(f"alpha={a} is within level_margin of the half-jump value {v}", where)

    outp = _get(tree, data, "", "output", dict, default={})
    _check_keys(tree, outp, "output", {"dir", "svg", "svg_rejected"})
    st = _get(tree, data, "", "selftest", dict, default={})
    _check_keys(tree, st, "selftest", {"samples"})
    workers = _get(tree, data, "", "workers", int, default=1)
    if workers < 1:
        raise ConfigError("workers must be >= 1", tree.where("workers"))
    ckpt = data.get("checkpoint")
    if ckpt is not None and not isinstance(ckpt, str):
        raise ConfigError("checkpoint must be a directory path", tree.where("checkpoint"))
    out = out_dir or _get(tree, outp, "output", "dir", str, default="equatorflow-out")
    if base_dir is not None:
        if not Path(out).is_absolute() and out_dir is None:
            out = str(base_dir / out)
        if ckpt is not None and not Path(ckpt).is_absolute():
            ckpt = str(base_dir / ckpt)
    return SweepConfig(
        profile=profile, L=L, m=m, seam_width=seam, scheme=scheme,
        xi_min=xi_min, xi_max=xi_max, delta_xi=dxi, E_window=(float(win[0]), float(win[1])),
        full_solve=full, method=method, eig_tol=eig_tol,
        filter=fparams, tracking=tparams, alphas=alphas,
        out_dir=out, svg=_get(tree, outp, "output", "svg", bool, default=True),
        svg_rejected=_get(tree, outp, "output", "svg_rejected", bool, default=False),
        workers=workers, checkpoint_dir=ckpt, preset=preset,
        selftest_samples=_get(tree, st, "selftest", "samples", int, default=3),
        source=tree.data,
    )


def load_sweep_config(path, preset: str | None = None, alphas=None, out_dir=None) -> SweepConfig:
    tree = load_file(path)
    return sweep_from_tree(tree, Path(path).parent, preset=preset, alphas=alphas, out_dir=out_dir)


def sweep_config(profile: CoriolisProfile | str, **overrides: Any) -> SweepConfig:
    """Programmatic construction with validation (``profile`` may be a catalog name)."""
    data: dict[str, Any] = {}
    if isinstance(profile, str):
        data["profile"] = {"catalog": profile}
    else:
        data["profile"] = profile.to_config()
    for section in ("grid", "sweep", "filter", "tracking", "output", "selftest"):
        if section in overrides:
            data[section] = overrides.pop(section)
    for key in ("alpha", "workers", "checkpoint", "preset"):
        if key in overrides:
            data[key] = overrides.pop(key)
    if overrides:
        raise TypeError(f"unknown overrides: {sorted(overrides)}")
    text = yaml.safe_dump(data, sort_keys=False)
    return sweep_from_tree(load_yaml(text, "<programmatic>"))
