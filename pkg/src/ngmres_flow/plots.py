"""Convergence plots: dependency-free SVG emission plus matplotlib PNGs.

The SVG path writes pure text (no renderer) so plot output stays
deterministic and greppable; the PNG path is a convenience rendering of the
same curves for reports.
"""
from __future__ import annotations

import math
from pathlib import Path

from .experiments import RunLog, _atomic_write

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 30, 45


def _series(log: RunLog):
    pts = [
        (r.k, r.g_vprime)
        for r in log.records
        if math.isfinite(r.g_vprime) and r.g_vprime > 0
    ]
    return pts


def _theta_series(log: RunLog):
    thetas = [(r.k, r.theta) for r in log.records if math.isfinite(r.theta)]
    ratios = []
    for prev, cur in zip(log.records, log.records[1:]):
        if (
            math.isfinite(prev.g_vprime)
            and math.isfinite(cur.g_vprime)
            and prev.g_vprime > 0
        ):
            ratios.append((prev.k, cur.g_vprime / prev.g_vprime))
    return thetas, ratios


class _Panel:
    """Semilog-y panel mapping (k, value) to SVG user coordinates."""

    def __init__(self, y_offset, kmax, decade_lo, decade_hi):
        self.y_offset = y_offset
        self.kmax = max(kmax, 1)
        self.lo = decade_lo
        self.hi = decade_hi

    def x(self, k):
        frac = k / self.kmax
        return MARGIN_L + frac * (WIDTH - MARGIN_L - MARGIN_R)

    def y(self, val):
        frac = (math.log10(val) - self.lo) / max(self.hi - self.lo, 1e-12)
        return self.y_offset + MARGIN_T + (1.0 - frac) * (HEIGHT - MARGIN_T - MARGIN_B)

    def axes_svg(self, title):
        parts = [
            f'<text x="{WIDTH / 2:.1f}" y="{self.y_offset + 18}" '
            f'text-anchor="middle" font-size="13">{title}</text>'
        ]
        x0, x1 = MARGIN_L, WIDTH - MARGIN_R
        y0 = self.y_offset + MARGIN_T
        y1 = self.y_offset + HEIGHT - MARGIN_B
        parts.append(
            f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" '
            'fill="none" stroke="#444" stroke-width="1"/>'
        )
        for d in range(self.lo, self.hi + 1):
            yy = self.y(10.0 ** d)
            parts.append(
                f'<line x1="{x0}" y1="{yy:.1f}" x2="{x1}" y2="{yy:.1f}" '
                'stroke="#ddd" stroke-width="0.5" class="ytick"/>'
            )
            parts.append(
                f'<text x="{x0 - 6}" y="{yy + 4:.1f}" text-anchor="end" '
                f'font-size="11" class="ytick-label">1e{d}</text>'
            )
        step = max(1, self.kmax // 10)
        for k in range(0, self.kmax + 1, step):
            xx = self.x(k)
            parts.append(
                f'<text x="{xx:.1f}" y="{y1 + 16}" text-anchor="middle" '
                f'font-size="11">{k}</text>'
            )
        parts.append(
            f'<text x="{WIDTH / 2:.1f}" y="{y1 + 34}" text-anchor="middle" '
            'font-size="12">iteration k</text>'
        )
        return parts


def emit_plot(logs, path, theta_overlay: bool = False, labels=None) -> str:
    """Write a semilog convergence chart as a standalone SVG file.

    One polyline per log of the dual-norm residual versus iteration; with
    theta_overlay a second panel compares theta against the observed
    residual ratio for the first log.
    """
    logs = list(logs)
    if not logs:
        raise ValueError("emit_plot requires at least one run log")
    if labels is None:
        labels = [log.config.label() for log in logs]
    all_pts = [p for log in logs for p in _series(log)]
    if not all_pts:
        raise ValueError("no positive finite residuals to plot")
    vals = [v for _, v in all_pts]
    kmax = max(k for k, _ in all_pts)
    lo = math.floor(math.log10(min(vals)))
    hi = math.ceil(math.log10(max(vals)))
    if hi == lo:
        hi += 1

    n_panels = 2 if theta_overlay else 1
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT * n_panels}" viewBox="0 0 {WIDTH} {HEIGHT * n_panels}" '
        'font-family="sans-serif">'
    ]
    panel = _Panel(0, kmax, lo, hi)
    parts += panel.axes_svg("residual (dual norm) vs iteration")
    for idx, (log, label) in enumerate(zip(logs, labels)):
        color = PALETTE[idx % len(PALETTE)]
        pts = _series(log)
        coords = " ".join(f"{panel.x(k):.2f},{panel.y(v):.2f}" for k, v in pts)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            'stroke-width="1.5"/>'
        )
        ly = MARGIN_T + 16 + 14 * idx
        parts.append(
            f'<line x1="{WIDTH - 180}" y1="{ly - 4}" x2="{WIDTH - 160}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{WIDTH - 155}" y="{ly}" font-size="11">{label}</text>'
        )

    if theta_overlay:
        thetas, ratios = _theta_series(logs[0])
        series_vals = [v for _, v in thetas + ratios if v > 0]
        tlo = math.floor(math.log10(min(series_vals))) if series_vals else -2
        thi = math.ceil(math.log10(max(series_vals))) if series_vals else 0
        if thi == tlo:
            thi += 1
        panel2 = _Panel(HEIGHT, kmax, tlo, thi)
        parts += panel2.axes_svg("optimization gain vs observed ratio")
        for name, series, color in (
            ("theta", thetas, "#1f77b4"),
            ("observed ratio", ratios, "#d62728"),
        ):
            pts = [(k, v) for k, v in series if v > 0]
            if not pts:
                continue
            coords = " ".join(f"{panel2.x(k):.2f},{panel2.y(v):.2f}" for k, v in pts)
            parts.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" '
                'stroke-width="1.5" stroke-dasharray="none"/>'
            )
        parts.append(
            f'<text x="{WIDTH - 155}" y="{HEIGHT + MARGIN_T + 16}" '
            'font-size="11" fill="#1f77b4">theta</text>'
        )
        parts.append(
            f'<text x="{WIDTH - 155}" y="{HEIGHT + MARGIN_T + 30}" '
            'font-size="11" fill="#d62728">observed ratio</text>'
        )

    parts.append("</svg>")
    text = "\n".join(parts) + "\n"
    _atomic_write(path, text)
    return text


def render_png(logs, path, labels=None):
    """Matplotlib rendering of the same convergence curves."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    logs = list(logs)
    if labels is None:
        labels = [log.config.label() for log in logs]
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for log, label in zip(logs, labels):
        pts = _series(log)
        if not pts:
            continue
        ax.semilogy([k for k, _ in pts], [v for _, v in pts], label=label)
    ax.set_xlabel("iteration k")
    ax.set_ylabel("residual (dual norm)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=130)
    plt.close(fig)
