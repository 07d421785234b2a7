"""Three-panel training-curve SVG (return, delivered parts, collisions).

Hand-written SVG with fixed number formatting, so identical CSV inputs give a
byte-identical file.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .metrics import read_metrics

PANELS = (("mean_return", "Episode return"), ("deliveries", "Delivered parts"), ("collisions", "Collisions"))
COLORS = {"ab-mappo": "#1f4fd6", "mappo": "#d62728"}
LABELS = {"ab-mappo": "AB-MAPPO", "mappo": "MAPPO"}
_FALLBACK = ("#2ca02c", "#9467bd", "#8c564b", "#7f7f7f")

PANEL_W, PANEL_H = 320, 240
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 56, 16, 32, 40


class PlotError(RuntimeError):
    pass


def discover_runs(metrics_dir: str | Path) -> dict[str, list[Path]]:
    """Map variant -> metrics.csv paths for every run directory below ``metrics_dir``.

    A run directory holds ``metrics.csv`` and ``run.json`` (for the variant tag).
    """
    root = Path(metrics_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"metrics directory not found: {root}")
    runs: dict[str, list[Path]] = {}
    for csv_path in sorted(root.rglob("metrics.csv")):
        meta = csv_path.parent / "run.json"
        if not meta.exists():
            continue
        variant = json.loads(meta.read_text(encoding="utf-8"))["variant"]
        runs.setdefault(variant, []).append(csv_path)
    if not runs:
        raise PlotError(f"no run directories (metrics.csv + run.json) under {root}")
    return runs


def seed_average(paths: list[Path]) -> dict[str, np.ndarray]:
    """Mean over seeds on the steps every run reached; nan entries are skipped."""
    tables = [read_metrics(p) for p in paths]
    n = min(len(t) for t in tables)
    out = {"step": np.array([tables[0][i]["step"] for i in range(n)], dtype=np.float64)}
    for key, _ in PANELS:
        stack = np.array([[t[i][key] for i in range(n)] for t in tables], dtype=np.float64).reshape(len(tables), n)
        with np.errstate(invalid="ignore"):
            finite = np.isfinite(stack)
            total = np.where(finite, stack, 0.0).sum(axis=0)
            count = finite.sum(axis=0)
            out[key] = np.where(count > 0, total / np.maximum(count, 1), np.nan)
    return out


def _fmt(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def _tick_label(v: float) -> str:
    if v != 0 and (abs(v) >= 1e4 or abs(v) < 1e-2):
        return f"{v:.1e}"
    return _fmt(v)


def _range(values: list[np.ndarray]) -> tuple[float, float]:
    finite = np.concatenate([v[np.isfinite(v)] for v in values]) if values else np.array([])
    if finite.size == 0:
        return 0.0, 1.0
    lo, hi = float(finite.min()), float(finite.max())
    if math.isclose(lo, hi):
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def render_svg(curves: dict[str, dict[str, np.ndarray]], title: str | None = None) -> str:
    variants = sorted(curves, key=lambda v: (v not in COLORS, v))
    colors = {}
    for k, v in enumerate(variants):
        colors[v] = COLORS.get(v, _FALLBACK[k % len(_FALLBACK)])
    width = PANEL_W * len(PANELS)
    height = PANEL_H + (24 if title else 0) + 28
    top = 24 if title else 0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{width / 2:.2f}" y="16" text-anchor="middle" font-size="14">{title}</text>')

    all_steps = [curves[v]["step"] for v in variants]
    x_lo = min(float(s.min()) for s in all_steps if s.size) if any(s.size for s in all_steps) else 0.0
    x_hi = max(float(s.max()) for s in all_steps if s.size) if any(s.size for s in all_steps) else 1.0
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0

    for p, (key, label) in enumerate(PANELS):
        ox, oy = p * PANEL_W, top
        x0, x1 = ox + MARGIN_L, ox + PANEL_W - MARGIN_R
        y0, y1 = oy + PANEL_H - MARGIN_B, oy + MARGIN_T
        y_lo, y_hi = _range([curves[v][key] for v in variants])

        def sx(x, x0=x0, x1=x1):
            return x0 + (x - x_lo) / (x_hi - x_lo) * (x1 - x0)

        def sy(y, y0=y0, y1=y1, y_lo=y_lo, y_hi=y_hi):
            return y0 + (y - y_lo) / (y_hi - y_lo) * (y1 - y0)

        parts.append(f'<g id="panel-{key}">')
        parts.append(f'<text x="{(x0 + x1) / 2:.2f}" y="{oy + 18}" text-anchor="middle" font-size="13">{label}</text>')
        parts.append(
            f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" fill="none" stroke="#333" stroke-width="1"/>'
        )
        for frac in (0.0, 0.5, 1.0):
            yv = y_lo + frac * (y_hi - y_lo)
            parts.append(f'<text x="{x0 - 4}" y="{sy(yv) + 4:.2f}" text-anchor="end">{_tick_label(yv)}</text>')
            xv = x_lo + frac * (x_hi - x_lo)
            parts.append(f'<text x="{sx(xv):.2f}" y="{y0 + 14}" text-anchor="middle">{_tick_label(xv)}</text>')
        parts.append(f'<text x="{(x0 + x1) / 2:.2f}" y="{y0 + 30}" text-anchor="middle">env steps</text>')
        for v in variants:
            xs, ys = curves[v]["step"], curves[v][key]
            # break the polyline at nan gaps
            seg: list[str] = []
            segments = []
            for x, y in zip(xs, ys):
                if np.isfinite(y):
                    seg.append(f"{_fmt(sx(x))},{_fmt(sy(y))}")
                elif seg:
                    segments.append(seg)
                    seg = []
            if seg:
                segments.append(seg)
            for s in segments:
                parts.append(
                    f'<polyline data-variant="{v}" points="{" ".join(s)}" fill="none" '
                    f'stroke="{colors[v]}" stroke-width="1.5"/>'
                )
        parts.append("</g>")

    ly = top + PANEL_H + 10
    for k, v in enumerate(variants):
        lx = 20 + k * 140
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{colors[v]}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 30}" y="{ly + 4}">{LABELS.get(v, v)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def plot_metrics(metrics_dir: str | Path, out_path: str | Path, title: str | None = None) -> Path:
    runs = discover_runs(metrics_dir)
    curves = {variant: seed_average(paths) for variant, paths in runs.items()}
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(render_svg(curves, title), encoding="utf-8", newline="\n")
    return out
