"""Renderer unit tests on synthetic CSVs."""

import json
from pathlib import Path

import pytest

from stopfig import FigureError, FigureSpec, ZoomBox, load_spec, render


def write_csv(path: Path, header: str, rows: list[str]) -> Path:
    path.write_text("\n".join([header, *rows]) + "\n")
    return path


@pytest.fixture()
def slice_csv(tmp_path):
    rows = [f"{x},{x * x},{x * x - 1},1e-6" for x in (-1.0, -0.5, 0.0, 0.5, 1.0)]
    return write_csv(tmp_path / "s.csv", "x,V,g,err_est", rows)


@pytest.fixture()
def boundary_csv(tmp_path):
    rows = [f"{t},{0.5 * t},{0.5 * t - 0.2 * t}" for t in (1.0, 2.0, 3.0)]
    return write_csv(tmp_path / "b.csv", "t,b,tilted", rows)


def test_slice_overlay_renders(tmp_path, slice_csv):
    spec = FigureSpec(kind="slice_overlay", input=slice_csv, x_range=(-1.0, 1.0))
    out = tmp_path / "fig.png"
    result = render(spec, out)
    assert out.exists()
    assert out.read_bytes()[:4] == b"\x89PNG"
    assert result.x_lim == (-1.0, 1.0)
    assert result.n_points == 5


def test_boundary_and_tilted_kinds(tmp_path, boundary_csv):
    for kind in ("boundary", "tilted_boundary"):
        out = tmp_path / f"{kind}.png"
        result = render(FigureSpec(kind=kind, input=boundary_csv), out)
        assert out.exists()
        assert result.n_points == 3


def test_zoom_box_draws(tmp_path, boundary_csv):
    spec = FigureSpec(
        kind="tilted_boundary",
        input=boundary_csv,
        zoom_box=ZoomBox(x_range=(1.5, 2.5), y_range=(0.4, 0.8)),
    )
    out = tmp_path / "zoom.png"
    render(spec, out)
    assert out.exists()


def test_missing_column_no_file(tmp_path, boundary_csv):
    out = tmp_path / "no.png"
    with pytest.raises(FigureError, match="lacks column"):
        render(FigureSpec(kind="slice_overlay", input=boundary_csv), out)
    assert not out.exists()


def test_empty_csv_no_file(tmp_path):
    empty = write_csv(tmp_path / "e.csv", "x,V,g,err_est", [])
    out = tmp_path / "no.png"
    with pytest.raises(FigureError, match="no data rows"):
        render(FigureSpec(kind="slice_overlay", input=empty), out)
    assert not out.exists()


def test_unreadable_csv(tmp_path):
    with pytest.raises(FigureError, match="cannot read CSV"):
        render(
            FigureSpec(kind="boundary", input=tmp_path / "missing.csv"),
            tmp_path / "no.png",
        )


def test_unknown_kind_rejected(tmp_path, slice_csv):
    with pytest.raises(FigureError, match="unknown figure kind"):
        FigureSpec(kind="pie", input=slice_csv)


def test_nonfinite_range_rejected(tmp_path, slice_csv):
    with pytest.raises(FigureError, match="finite"):
        FigureSpec(kind="slice_overlay", input=slice_csv, x_range=(0.0, float("inf")))


def test_load_spec_resolves_input_against_cwd(tmp_path, monkeypatch, slice_csv):
    doc = {
        "kind": "slice_overlay",
        "input": slice_csv.name,
        "x_range": [-1, 1],
        "zoom_box": {"x_range": [0, 0.5], "y_range": [0, 0.5]},
    }
    spec_file = tmp_path / "spec.json"
    spec_file.write_text(json.dumps(doc))
    monkeypatch.chdir(tmp_path)
    spec = load_spec(spec_file)
    assert spec.input == Path(slice_csv.name)
    assert spec.zoom_box.x_range == (0.0, 0.5)
    out = tmp_path / "ok.png"
    render(spec, out)
    assert out.exists()


def test_load_spec_rejects_malformed(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(FigureError, match="not valid JSON"):
        load_spec(bad)
    nokind = tmp_path / "nokind.json"
    nokind.write_text('{"input": "a.csv"}')
    with pytest.raises(FigureError, match="kind"):
        load_spec(nokind)
