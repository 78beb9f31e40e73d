"""Render stopbound CSV artifacts into figures.

All mathematics lives upstream; this module never recomputes values or
boundaries. Rendering is a pure function of the CSV contents and the figure
spec: the only numeric work here is axis scaling.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from matplotlib.patches import Rectangle

KINDS = ("slice_overlay", "boundary", "tilted_boundary")

REQUIRED_COLUMNS = {
    "slice_overlay": ("x", "V", "g"),
    "boundary": ("t", "b"),
    "tilted_boundary": ("t", "tilted"),
}


class FigureError(Exception):
    """Unusable figure spec or CSV input."""


@dataclass(frozen=True)
class ZoomBox:
    x_range: tuple[float, float]
    y_range: tuple[float, float]


@dataclass(frozen=True)
class FigureSpec:
    """Declarative description of one figure.

    kind selects the drawing: slice_overlay plots V (blue) and the gain
    (orange) over x; boundary plots b over t; tilted_boundary plots the
    tilted column over t with an optional zoom-box rectangle marking the
    domain of a companion close-up figure.
    """

    kind: str
    input: Path
    x_range: tuple[float, float] | None = None
    y_range: tuple[float, float] | None = None
    zoom_box: ZoomBox | None = None
    title: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FigureError(f"unknown figure kind {self.kind!r}; expected {KINDS}")
        for rng in (self.x_range, self.y_range):
            if rng is not None and not all(map(_finite, rng)):
                raise FigureError(f"axis range {rng} must be finite")


@dataclass(frozen=True)
class RenderResult:
    out: Path
    x_lim: tuple[float, float]
    y_lim: tuple[float, float]
    n_points: int


def _finite(v) -> bool:
    try:
        return v == v and abs(float(v)) != float("inf")
    except (TypeError, ValueError):
        return False


def _pair(raw, name) -> tuple[float, float]:
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise FigureError(f"{name} must be a two-element [lo, hi] list")
    return float(raw[0]), float(raw[1])


def load_spec(path: str | Path) -> FigureSpec:
    """Parse a FigureSpec JSON document.

    A relative input path resolves against the current working directory,
    so one spec file can describe CSVs regenerated in any output directory.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise FigureError(f"cannot read spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FigureError(f"spec {path} is not valid JSON: {exc}") from exc
    if "kind" not in doc or "input" not in doc:
        raise FigureError(f"spec {path} needs at least 'kind' and 'input'")
    zoom = None
    if doc.get("zoom_box") is not None:
        zb = doc["zoom_box"]
        zoom = ZoomBox(
            x_range=_pair(zb.get("x_range"), "zoom_box.x_range"),
            y_range=_pair(zb.get("y_range"), "zoom_box.y_range"),
        )
    return FigureSpec(
        kind=doc["kind"],
        input=Path(doc["input"]),
        x_range=None if doc.get("x_range") is None else _pair(doc["x_range"], "x_range"),
        y_range=None if doc.get("y_range") is None else _pair(doc["y_range"], "y_range"),
        zoom_box=zoom,
        title=doc.get("title"),
    )


def read_columns(path: Path, names: tuple[str, ...]) -> dict[str, list[float]]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [n for n in names if n not in header]
            if missing:
                raise FigureError(
                    f"{path} lacks column(s) {missing}; header is {header}"
                )
            cols: dict[str, list[float]] = {n: [] for n in names}
            for row in reader:
                for n in names:
                    cols[n].append(float(row[n]))
    except OSError as exc:
        raise FigureError(f"cannot read CSV {path}: {exc}") from exc
    if not cols[names[0]]:
        raise FigureError(f"{path} has a header but no data rows")
    return cols


def render(spec: FigureSpec, out: str | Path) -> RenderResult:
    """Draw the figure described by spec; returns the axis limits used.

    Raises FigureError (and writes nothing) when the CSV is unreadable,
    empty, or lacks the columns the figure kind requires.
    """
    cols = read_columns(spec.input, REQUIRED_COLUMNS[spec.kind])
    out = Path(out)

    fig, ax = plt.subplots(figsize=(7.2, 4.5), dpi=130)
    try:
        if spec.kind == "slice_overlay":
            ax.plot(cols["x"], cols["V"], color="C0", lw=1.4, label="value")
            ax.plot(cols["x"], cols["g"], color="C1", lw=1.1, label="gain")
            ax.set_xlabel("x")
            ax.legend(frameon=False)
            n = len(cols["x"])
        elif spec.kind == "boundary":
            ax.plot(cols["t"], cols["b"], color="C0", lw=1.4)
            ax.set_xlabel("t")
            ax.set_ylabel("b(t)")
            n = len(cols["t"])
        else:
            ax.plot(cols["t"], cols["tilted"], color="C0", lw=1.4)
            ax.set_xlabel("t")
            ax.set_ylabel("tilted boundary")
            n = len(cols["t"])

        if spec.x_range is not None:
            ax.set_xlim(*spec.x_range)
        if spec.y_range is not None:
            ax.set_ylim(*spec.y_range)
        if spec.zoom_box is not None:
            (x0, x1), (y0, y1) = spec.zoom_box.x_range, spec.zoom_box.y_range
            ax.add_patch(
                Rectangle(
                    (x0, y0), x1 - x0, y1 - y0,
                    fill=False, edgecolor="C3", lw=1.0,
                )
            )
        if spec.title:
            ax.set_title(spec.title)
        ax.grid(alpha=0.25)
        x_lim, y_lim = ax.get_xlim(), ax.get_ylim()
        fig.tight_layout()
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out)
    finally:
        plt.close(fig)
    return RenderResult(out=out, x_lim=x_lim, y_lim=y_lim, n_points=n)
