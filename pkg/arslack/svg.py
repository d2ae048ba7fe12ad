"""Static line charts as SVG polylines."""
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from arslack.errors import InvalidArgument

WIDTH = 640
HEIGHT = 360
MARGIN = 40
COLORS = ("#000000", "#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _extent(values: np.ndarray) -> tuple[float, float]:
    low, high = float(np.min(values)), float(np.max(values))

    if high == low:
        return low - 1.0, high + 1.0

    return low, high


def line_chart(lines: dict[str, tuple[Sequence[float], Sequence[float]]], title: str = "") -> str:
    """Render named ``(x, y)`` lines into one SVG document.

    Non-finite points are dropped. Lines are drawn in insertion order with a
    legend in the upper left corner.
    """
    cleaned = {}

    for name, (x, y) in lines.items():
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)

        if x.shape != y.shape:
            raise InvalidArgument(f"Line `{name}` has {x.size} x values but {y.size} y values.")

        keep = np.isfinite(x) & np.isfinite(y)
        cleaned[name] = x[keep], y[keep]

    points = [(x, y) for x, y in cleaned.values() if x.size]

    if not points:
        raise InvalidArgument("Nothing to plot.")

    x_low, x_high = _extent(np.concatenate([x for x, _ in points]))
    y_low, y_high = _extent(np.concatenate([y for _, y in points]))

    def to_px(x, y):
        px = MARGIN + (x - x_low) / (x_high - x_low) * (WIDTH - 2 * MARGIN)
        py = HEIGHT - MARGIN - (y - y_low) / (y_high - y_low) * (HEIGHT - 2 * MARGIN)
        return px, py

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" height="{HEIGHT - 2 * MARGIN}" '
        f'fill="none" stroke="#888888"/>',
        f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 15}" font-size="10">{x_low:.4g}</text>',
        f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - MARGIN + 15}" text-anchor="end" font-size="10">{x_high:.4g}</text>',
        f'<text x="{MARGIN - 4}" y="{HEIGHT - MARGIN}" text-anchor="end" font-size="10">{y_low:.4g}</text>',
        f'<text x="{MARGIN - 4}" y="{MARGIN + 8}" text-anchor="end" font-size="10">{y_high:.4g}</text>',
    ]

    for i, (name, (x, y)) in enumerate(cleaned.items()):
        color = COLORS[i % len(COLORS)]
        px, py = to_px(x, y)
        coords = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        parts.append(f'<text x="{MARGIN + 8}" y="{MARGIN + 16 + 14 * i}" font-size="12" fill="{color}">'
                     f'{escape(name)}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
