"""CSV and SVG writers for sweep records. Output bytes depend only on the records."""
from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

from .errors import ConfigError
from .evaluation import SweepRecord, check_joinable

BASE_HEADER = ["policy", "labeling_mode", "threshold", "accuracy", "mean_macs", "relative_macs", "num_scenes"]

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"]


def _ordered(records: Sequence[SweepRecord]) -> list[SweepRecord]:
    if not records:
        raise ConfigError("no records to write")
    check_joinable(records)
    widths = {len(r.exit_shares) for r in records}
    if len(widths) > 1:
        raise ConfigError("records disagree on the number of exits")
    return sorted(records, key=lambda r: (r.policy, r.labeling_mode, r.threshold))


def csv_text(records: Sequence[SweepRecord]) -> str:
    records = _ordered(records)
    n = len(records[0].exit_shares)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BASE_HEADER + [f"exit_share_{i}" for i in range(n)])
    for r in records:
        writer.writerow(
            [r.policy, r.labeling_mode, repr(r.threshold), repr(r.accuracy), repr(r.mean_macs),
             repr(r.relative_macs), r.num_scenes]
            + [repr(s) for s in r.exit_shares]
        )
    return buf.getvalue()


def write_csv(records: Sequence[SweepRecord], path) -> None:
    Path(path).write_text(csv_text(records))


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def svg_text(records: Sequence[SweepRecord], title: str = "accuracy vs. relative MACs") -> str:
    records = _ordered(records)
    width, height = 640, 440
    left, right, top, bottom = 70, 190, 40, 60
    pw, ph = width - left - right, height - top - bottom

    xs = [r.relative_macs for r in records]
    ys = [r.accuracy for r in records]
    x0, x1 = 0.0, max(1.0, max(xs)) * 1.05
    y0, y1 = max(0.0, min(ys) - 0.05), min(1.0, max(ys) + 0.05)
    if y1 - y0 < 0.1:
        y0 = max(0.0, y1 - 0.1)
        y1 = y0 + 0.1

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + ph - (v - y0) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left + pw / 2:.2f}" y="22" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in _ticks(x0, x1):
        out.append(f'<line x1="{px(v):.2f}" y1="{top + ph}" x2="{px(v):.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(
            f'<text x="{px(v):.2f}" y="{top + ph + 18}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="11">{v:.2f}</text>'
        )
    for v in _ticks(y0, y1):
        out.append(f'<line x1="{left - 5}" y1="{py(v):.2f}" x2="{left}" y2="{py(v):.2f}" stroke="black"/>')
        out.append(
            f'<text x="{left - 8}" y="{py(v) + 4:.2f}" text-anchor="end" font-family="sans-serif" '
            f'font-size="11">{v:.3f}</text>'
        )
    out.append(
        f'<text x="{left + pw / 2:.2f}" y="{height - 15}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12">mean MACs relative to single-exit model</text>'
    )
    out.append(
        f'<text x="18" y="{top + ph / 2:.2f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 18 {top + ph / 2:.2f})">accuracy</text>'
    )

    series: dict[str, list[SweepRecord]] = {}
    for r in records:
        series.setdefault(f"{r.policy} ({r.labeling_mode})", []).append(r)
    for i, (name, items) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<g fill="{color}" stroke="none">')
        for r in items:
            out.append(f'<circle cx="{px(r.relative_macs):.2f}" cy="{py(r.accuracy):.2f}" r="3.5"/>')
        out.append("</g>")
        ly = top + 10 + 18 * i
        out.append(f'<circle cx="{left + pw + 15}" cy="{ly}" r="4" fill="{color}"/>')
        out.append(
            f'<text x="{left + pw + 25}" y="{ly + 4}" font-family="sans-serif" font-size="10">{escape(name)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg_scatter(records: Sequence[SweepRecord], path, title: str = "accuracy vs. relative MACs") -> None:
    Path(path).write_text(svg_text(records, title))
