"""Files written by a sweep: ``fibers.csv``, ``branches.csv``, ``flow_report.txt``
and optionally ``spectrum.svg``.

All numeric output is deterministic for a given configuration.  Wall-clock
timing goes to ``provenance.json`` so the other files can be compared
byte for byte between runs.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .branches import find_kelvin
from .sweep import REASON_NAMES, SweepResult

FIBER_COLUMNS = ("xi", "index", "E", "residual", "interior_fraction", "lowfreq_fraction", "kept", "reject_reason")
BRANCH_COLUMNS = ("branch_id", "xi", "E", "fiber_index", "kelvin")


def _num(x: float) -> str:
    return repr(float(x))


def write_fibers(result: SweepResult, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIBER_COLUMNS)
        for f in result.fibers:
            for k in range(f.E.size):
                w.writerow((
                    _num(f.xi), k, _num(f.E[k]), f"{f.residual[k]:.3e}",
                    f"{f.interior_fraction[k]:.6f}", f"{f.lowfreq_fraction[k]:.6f}",
                    int(bool(f.kept[k])), REASON_NAMES[int(f.reject_reason[k])],
                ))


def write_branches(result: SweepResult, path: Path) -> None:
    kelvin = find_kelvin(result.branches)
    kid = None if kelvin is None else kelvin.id
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BRANCH_COLUMNS)
        for b in result.branches:
            flag = int(b.id == kid)
            for x, e, i in zip(b.xi, b.E, b.index):
                w.writerow((b.id, _num(x), _num(e), int(i), flag))


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# --- flow report -----------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return "undecided"
    if isinstance(v, bool):
        return "yes" if v else "no"
    return str(v)


def format_flow_report(result: SweepResult) -> str:
    cfg = result.config
    lines = [
        "# equatorflow spectral flow report",
        f"profile = {cfg.profile.name or 'custom'}",
        f"grid = L={cfg.L:g} m={cfg.m} scheme={cfg.scheme}",
        f"xi_range = [{cfg.xi_min:g}, {cfg.xi_max:g}] step {cfg.delta_xi:g}",
        f"E_window = [{cfg.E_window[0]:g}, {cfg.E_window[1]:g}]",
        f"config_hash = {result.provenance.get('config_hash', cfg.digest())}",
        f"result_hash = {result.result_hash()}",
        f"code_version = {result.provenance.get('code_version', '')}",
        f"branches = {len(result.branches)}",
        "",
    ]
    kelvin = find_kelvin(result.branches)
    if kelvin is not None:
        sel = kelvin.xi > 0
        dev = float(np.max(np.abs(kelvin.E[sel] - kelvin.xi[sel]))) if sel.any() else float("nan")
        lines.append(f"kelvin_branch = {kelvin.id} max|E-xi| = {dev:.3e}")
        lines.append("")
    for r in result.reports:
        lines.append(f"[alpha = {r.alpha:g}]")
        lines.append(f"sf_measured = {_fmt(r.sf_measured)}")
        lines.append(f"sf_thm = {_fmt(r.sf_thm)}")
        lines.append(f"sf_bec = {r.sf_bec}")
        lines.append(f"reliable = {_fmt(r.reliable)}")
        lines.append(f"matches_thm = {_fmt(r.matches_thm)}")
        lines.append(f"boundary_correction = {r.boundary_correction}")
        lines.append("contributions = " + " ".join(f"{k}:{v:+d}" for k, v in sorted(r.contributions.items())))
        lines.append("crossings = " + " ".join(f"{c.branch_id}@{c.xi:+.4f}{'+' if c.direction > 0 else '-'}"
                                               for c in r.crossings))
        for w in r.warnings:
            lines.append(f"warning = {w}")
        lines.append("")
    if result.reports:
        contributing = set().union(*[r.contributions for r in result.reports])
    else:
        contributing = set()
    lines.append("[branches]")
    for b in result.branches:
        mark = "*" if b.id in contributing else " "
        lines.append(
            f"{mark}{b.id:5d} n={len(b):4d} xi=[{b.xi[0]:+.3f},{b.xi[-1]:+.3f}] "
            f"left={b.left.describe()} right={b.right.describe()}"
        )
    lines.append("")
    if result.warnings:
        lines.append("[warnings]")
        lines.extend(result.warnings)
        lines.append("")
    return "\n".join(lines)


def parse_flow_report(text: str) -> dict[float, dict[str, str]]:
    """Per-alpha ``key -> value`` blocks of a flow report (warnings collected in a list)."""
    out: dict[float, dict] = {}
    cur = None
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("[alpha ="):
            cur = {"warnings": []}
            out[float(line[len("[alpha ="):-1])] = cur
        elif line.startswith("["):
            cur = None
        elif cur is not None and " = " in line:
            key, val = line.split(" = ", 1)
            if key == "warning":
                cur["warnings"].append(val)
            else:
                cur[key] = val
    return out


# --- figure -------------------------------------------------------------------------

def write_svg(result: SweepResult, path: Path, rejected: bool = False) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "equatorflow", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4.5))
        if rejected:
            xs = np.concatenate([np.full((~f.kept).sum(), f.xi) for f in result.fibers])
            es = np.concatenate([f.E[~f.kept] for f in result.fibers])
            ax.scatter(xs, es, s=1, c="0.75", lw=0, label="rejected", rasterized=True)
        xs = np.concatenate([np.full(f.kept.sum(), f.xi) for f in result.fibers])
        es = np.concatenate([f.kept_E for f in result.fibers])
        ax.scatter(xs, es, s=1, c="k", lw=0, label="kept", rasterized=True)
        for r in result.reports:
            ax.axhline(r.alpha, color="tab:red", lw=0.5, ls="--")
        ax.set_xlabel(r"$\xi$")
        ax.set_ylabel("$E$")
        ax.set_xlim(result.config.xi_min, result.config.xi_max)
        ax.set_ylim(*result.config.E_window)
        if rejected:
            ax.legend(loc="upper left", markerscale=6, frameon=False)
        fig.tight_layout()
        fig.savefig(path, format="svg", dpi=200, metadata={"Date": None})
        plt.close(fig)


def export(result: SweepResult, out_dir: Path | str) -> dict[str, Path]:
    """Write every output file of ``result`` into ``out_dir``; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "fibers": out / "fibers.csv",
        "branches": out / "branches.csv",
        "flow_report": out / "flow_report.txt",
        "provenance": out / "provenance.json",
    }
    write_fibers(result, paths["fibers"])
    write_branches(result, paths["branches"])
    paths["flow_report"].write_text(format_flow_report(result))
    paths["provenance"].write_text(json.dumps(result.provenance, indent=2, sort_keys=True) + "\n")
    if result.config.svg:
        paths["svg"] = out / "spectrum.svg"
        write_svg(result, paths["svg"], rejected=result.config.svg_rejected)
    return paths
