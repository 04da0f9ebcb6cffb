"""Secondary-component tests: figure rendering from simulator CSVs."""

import csv
import json
import sys
from pathlib import Path

import pytest

PLOTS_DIR = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(PLOTS_DIR))

from render import FigureSpec, SpecError, curve_intersections, load_series, main, render  # noqa: E402

PRESETS = PLOTS_DIR / "presets"
GOLDEN = PRESETS / "golden"


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("preset,kind,n_series", [
    ("fig1", "bw_vs_snr", 4),
    ("fig3", "pf_vs_snr", 4),
    ("fig4", "bw_vs_C", 4),
])
def test_presets_render_with_all_series(tmp_path, preset, kind, n_series):
    spec = FigureSpec.load(PRESETS / f"{preset}.json")
    assert spec.kind == kind
    out = render(spec, tmp_path / f"{preset}.svg")
    assert out.exists() and out.stat().st_size > 0
    text = out.read_text()
    assert text.lstrip().startswith("<?xml")
    series = load_series(spec)
    assert len(series) == n_series
    # every legend label makes it into the SVG
    for s in series:
        assert s.label.replace(" ", "") in text.replace(" ", "") or s.label in text


@pytest.mark.parametrize("preset,csvname,xcol,ycol", [
    ("fig1", "fig1_tradeoff.csv", "snr_db", "required_bw_hz"),
    ("fig3", "fig3_results.csv", "snr_db", "pf"),
    ("fig4", "fig4_tradeoff.csv", "C", "required_bw_hz"),
])
def test_round_trip_values_equal_csv(preset, csvname, xcol, ycol):
    """What the renderer would draw is exactly what the CSV stores."""
    from render import _matches

    spec = FigureSpec.load(PRESETS / f"{preset}.json")
    path = GOLDEN / csvname
    rows = read_csv(path)
    for entry, series in zip(spec.series, load_series(spec)):
        want = sorted(
            (float(row[xcol]), float(row[ycol]))
            for row in rows
            if _matches(row, entry["where"], path)
        )
        got = sorted(zip(series.x, series.y))
        assert got == want, entry["label"]


def test_render_pdf(tmp_path):
    spec = FigureSpec.load(PRESETS / "fig1.json")
    out = render(spec, tmp_path / "fig1.pdf")
    assert out.read_bytes().startswith(b"%PDF")


def test_deterministic_svg(tmp_path):
    spec = FigureSpec.load(PRESETS / "fig3.json")
    a = render(spec, tmp_path / "a.svg").read_bytes()
    b = render(spec, tmp_path / "b.svg").read_bytes()
    assert a == b


def test_empty_csv_rejected(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("protocol,snr_db,pf\n")
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({
        "kind": "pf_vs_snr",
        "series": [{"label": "x", "csv": "empty.csv", "where": {}}],
    }))
    with pytest.raises(SpecError):
        render(FigureSpec.load(spec_path), tmp_path / "out.svg")
    assert not (tmp_path / "out.svg").exists()


def test_schema_mismatch_names_column(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("protocol,frequency,pf\nic_ic,1,0.5\n")
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({
        "kind": "pf_vs_snr",
        "series": [{"label": "x", "csv": "bad.csv", "where": {}}],
    }))
    with pytest.raises(SpecError, match="snr_db"):
        render(FigureSpec.load(spec_path), tmp_path / "out.svg")


def test_log_axis_rejects_nonpositive(tmp_path):
    zeroes = tmp_path / "zeroes.csv"
    zeroes.write_text("protocol,snr_db,pf\nic_ic,0,0.1\nic_ic,5,0\n")
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({
        "kind": "pf_vs_snr",
        "series": [{"label": "x", "csv": "zeroes.csv", "where": {}}],
    }))
    with pytest.raises(SpecError, match="non-positive"):
        render(FigureSpec.load(spec_path), tmp_path / "out.svg")


def test_unmatched_series_rejected(tmp_path):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({
        "kind": "pf_vs_snr",
        "series": [{"label": "x", "csv": str(GOLDEN / "fig3_results.csv"),
                    "where": {"protocol": "no_such_protocol"}}],
    }))
    with pytest.raises(SpecError, match="matched no rows"):
        render(FigureSpec.load(spec_path), tmp_path / "out.svg")


def test_unknown_kind_rejected(tmp_path):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({"kind": "pie", "series": [{"csv": "x"}]}))
    with pytest.raises(SpecError, match="kind"):
        FigureSpec.load(spec_path)


def test_curve_intersections():
    from render import Series

    a = Series("a", [0.0, 10.0], [1.0, 1e-4])
    b = Series("b", [0.0, 10.0], [1e-4, 1.0])
    pts = curve_intersections(a, b)
    assert len(pts) == 1
    x, y = pts[0]
    assert x == pytest.approx(5.0)
    assert y == pytest.approx(1e-2)


def test_preference_region_overlay(tmp_path):
    crossing = tmp_path / "crossing.csv"
    crossing.write_text(
        "protocol,snr_db,pf\n"
        "a,0,0.9\na,5,0.01\na,10,0.0001\n"
        "b,0,0.1\nb,5,0.05\nb,10,0.02\n"
    )
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({
        "kind": "pf_vs_snr",
        "preference_regions": True,
        "series": [
            {"label": "a", "csv": "crossing.csv", "where": {"protocol": "a"}},
            {"label": "b", "csv": "crossing.csv", "where": {"protocol": "b"}},
        ],
    }))
    out = render(FigureSpec.load(spec_path), tmp_path / "out.svg")
    assert "preference" in out.read_text()


def test_layout_scatter(tmp_path):
    layout = tmp_path / "layout.csv"
    layout.write_text(
        "kind,cell,index,x_m,y_m\n"
        "controller,0,0,5,5\n"
        "actuator,0,0,2,3\nactuator,0,1,8,9\n"
    )
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({
        "kind": "layout_scatter",
        "series": [
            {"label": "controllers", "csv": "layout.csv", "where": {"kind": "controller"}},
            {"label": "actuators", "csv": "layout.csv", "where": {"kind": "actuator"}},
        ],
    }))
    out = render(FigureSpec.load(spec_path), tmp_path / "out.svg")
    assert out.exists()


def test_cli_entrypoint(tmp_path, capsys):
    rc = main(["--spec", str(PRESETS / "fig1.json"),
               "--out", str(tmp_path / "f.svg")])
    assert rc == 0
    rc = main(["--spec", str(PRESETS / "fig1.json"),
               "--out", str(tmp_path / "f.png")])
    assert rc == 2
    assert "svg or .pdf" in capsys.readouterr().err
