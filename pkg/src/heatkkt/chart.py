"""Minimal static SVG line chart of iteration counts from a results CSV."""
from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path

from heatkkt.experiments import read_csv

WIDTH, HEIGHT = 640, 420
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 170, 30, 60
DASH = {1e-2: None, 1e-3: "8,5", 1e-4: "2,4"}
EXTRA_DASHES = ("12,4,2,4", "4,2", "16,6")
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _dash_for(omega: float, order: list[float]) -> str | None:
    for key, dash in DASH.items():
        if math.isclose(omega, key, rel_tol=1e-9):
            return dash
    extras = [o for o in order if not any(math.isclose(o, k, rel_tol=1e-9) for k in DASH)]
    return EXTRA_DASHES[extras.index(omega) % len(EXTRA_DASHES)]


def _marker(precond: str, x: float, y: float, color: str) -> str:
    if precond == "two-level":
        pts = f"{_fmt(x)},{_fmt(y - 5)} {_fmt(x - 5)},{_fmt(y + 4)} {_fmt(x + 5)},{_fmt(y + 4)}"
        return f'<polygon points="{pts}" fill="{color}"/>'
    if precond == "one-level":
        return f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="4" fill="{color}"/>'
    return f'<rect x="{_fmt(x - 4)}" y="{_fmt(y - 4)}" width="8" height="8" fill="{color}"/>'


def _log_ticks(lo: float, hi: float) -> list[float]:
    return [10.0**k for k in range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1)]


def render_svg(rows: list[dict], title: str = "") -> str:
    """Iterations against nt, or against 1/omega when every row shares one nt.

    Series are keyed by (precond, omega) in the first case and by precond in
    the second. Non-converged points are left out.
    """
    nts = {r["nt"] for r in rows}
    omega_axis = len(nts) == 1 and len({r["omega"] for r in rows}) > 1
    series: dict[tuple, list[tuple[float, int]]] = defaultdict(list)
    for r in rows:
        if not r["converged"]:
            continue
        if omega_axis:
            series[(r["precond"], None)].append((1.0 / r["omega"], r["iters"]))
        else:
            series[(r["precond"], r["omega"])].append((float(r["nt"]), r["iters"]))
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    x_lo, x_hi = (min(xs), max(xs)) if xs else (100.0, 1000.0)
    if x_lo == x_hi:
        x_lo, x_hi = x_lo / 2, x_hi * 2
    y_hi = max(ys) if ys else 10
    y_hi = max(10, int(math.ceil(y_hi * 1.1 / 10.0)) * 10)

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    lx_lo, lx_hi = math.log10(x_lo), math.log10(x_hi)

    def px(x: float) -> float:
        return MARGIN_LEFT + (math.log10(x) - lx_lo) / (lx_hi - lx_lo) * plot_w

    def py(y: float) -> float:
        return MARGIN_TOP + plot_h - y / y_hi * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH // 2}" y="18" text-anchor="middle" font-size="14">{title}</text>')
    x0, y0 = MARGIN_LEFT, MARGIN_TOP + plot_h
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x0 + plot_w}" y2="{y0}" stroke="black"/>')
    out.append(f'<line x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{y0}" stroke="black"/>')
    for t in _log_ticks(x_lo, x_hi):
        if x_lo <= t <= x_hi:
            x = px(t)
            out.append(f'<line x1="{_fmt(x)}" y1="{y0}" x2="{_fmt(x)}" y2="{y0 + 5}" stroke="black"/>')
            out.append(f'<text x="{_fmt(x)}" y="{y0 + 18}" text-anchor="middle" font-size="11">{t:g}</text>')
    if not omega_axis:
        for t in sorted(set(xs)):
            x = px(t)
            out.append(f'<line x1="{_fmt(x)}" y1="{y0}" x2="{_fmt(x)}" y2="{y0 + 3}" stroke="gray"/>')
    for k in range(6):
        v = y_hi * k / 5
        y = py(v)
        out.append(f'<line x1="{x0 - 5}" y1="{_fmt(y)}" x2="{x0}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{x0 - 8}" y="{_fmt(y + 4)}" text-anchor="end" font-size="11">{_fmt(v)}</text>')
    xlabel = "1/omega" if omega_axis else "time steps"
    out.append(f'<text x="{x0 + plot_w // 2}" y="{HEIGHT - 15}" text-anchor="middle" font-size="12">{xlabel}</text>')
    out.append(
        f'<text x="18" y="{MARGIN_TOP + plot_h // 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 18 {MARGIN_TOP + plot_h // 2})">iterations</text>'
    )

    omegas = sorted({k[1] for k in series if k[1] is not None}, reverse=True)
    preconds = sorted({k[0] for k in series})
    legend_y = MARGIN_TOP + 10
    for i, key in enumerate(sorted(series, key=lambda k: (k[0], -(k[1] or 0.0)))):
        precond, omega = key
        pts = sorted(series[key])
        color = COLORS[preconds.index(precond) % len(COLORS)]
        dash = None if omega is None else _dash_for(omega, omegas)
        coords = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in pts)
        style = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"{style}/>')
        for x, y in pts:
            out.append(_marker(precond, px(x), py(y), color))
        label = precond if omega is None else f"{precond}, omega={omega:g}"
        ly = legend_y + 18 * i
        lx = WIDTH - MARGIN_RIGHT + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}" stroke-width="1.5"{style}/>')
        out.append(_marker(precond, lx + 12, ly, color))
        out.append(f'<text x="{lx + 30}" y="{ly + 4}" font-size="10">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def chart_from_csv(csv_path: str | Path, output_path: str | Path, title: str = "") -> None:
    Path(output_path).write_text(render_svg(read_csv(csv_path), title))
