import json

import numpy as np
import pytest

from equatorflow.export import (
    BRANCH_COLUMNS,
    FIBER_COLUMNS,
    export,
    format_flow_report,
    parse_flow_report,
    read_csv,
)


@pytest.fixture(scope="module")
def written(small_result, tmp_path_factory):
    out = tmp_path_factory.mktemp("out")
    return out, export(small_result, out)


def test_files_present(written):
    out, paths = written
    assert set(paths) == {"fibers", "branches", "flow_report", "provenance", "svg"}
    for p in paths.values():
        assert p.exists() and p.stat().st_size > 0
        assert p.parent == out


def test_fibers_csv_round_trip(small_result, written):
    rows = read_csv(written[1]["fibers"])
    assert tuple(rows[0]) == FIBER_COLUMNS
    assert len(rows) == sum(f.E.size for f in small_result.fibers)
    f = small_result.fibers[42]
    mine = [r for r in rows if float(r["xi"]) == f.xi]
    assert np.array_equal([float(r["E"]) for r in mine], f.E)
    assert [int(r["kept"]) for r in mine] == f.kept.astype(int).tolist()
    assert {r["reject_reason"] for r in rows} <= {"none", "wall", "fourier"}


def test_branches_csv_round_trip(small_result, written):
    rows = read_csv(written[1]["branches"])
    assert tuple(rows[0]) == BRANCH_COLUMNS
    by_id = {}
    for r in rows:
        by_id.setdefault(int(r["branch_id"]), []).append(r)
    assert len(by_id) == len(small_result.branches)
    b = small_result.branches[5]
    assert np.array_equal([float(r["E"]) for r in by_id[b.id]], b.E)
    kelvin = {int(r["branch_id"]) for r in rows if r["kelvin"] == "1"}
    assert len(kelvin) == 1
    (k,) = kelvin
    e = np.array([float(r["E"]) for r in by_id[k]])
    x = np.array([float(r["xi"]) for r in by_id[k]])
    assert np.max(np.abs(e - x)[x > 0.2]) < 0.05


def test_flow_report_parse(small_result, written):
    text = written[1]["flow_report"].read_text()
    parsed = parse_flow_report(text)
    assert sorted(parsed) == [0.5, 1.5]
    for a, block in parsed.items():
        r = small_result.report(a)
        assert block["sf_measured"] == str(r.sf_measured)
        assert block["sf_thm"] == str(r.sf_thm)
        assert block["sf_bec"] == "2"
        assert block["reliable"] == "yes"
    assert f"result_hash = {small_result.result_hash()}" in text
    assert "kelvin_branch" in text and "[branches]" in text


def test_report_is_byte_stable(small_result, written):
    assert written[1]["flow_report"].read_text() == format_flow_report(small_result)
    assert "timing" not in written[1]["flow_report"].read_text()
    prov = json.loads(written[1]["provenance"].read_text())
    assert prov["fibers"] == 101 and "timing_total_s" in prov


def test_svg_deterministic(small_result, tmp_path):
    a = export(small_result, tmp_path / "a")["svg"].read_bytes()
    b = export(small_result, tmp_path / "b")["svg"].read_bytes()
    assert a == b and a.startswith(b"<?xml")


def test_undecided_rendered():
    text = "[alpha = 0.5]\nsf_measured = undecided\nwarning = branch 3 contributes\nwarning = other\n\n[branches]\n"
    parsed = parse_flow_report(text)
    assert parsed[0.5]["sf_measured"] == "undecided"
    assert parsed[0.5]["warnings"] == ["branch 3 contributes", "other"]
