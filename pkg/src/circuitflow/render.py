"""Minimal native SVG rendering for distribution snapshots.

Presentation only: bar charts for 1-D tables, shaded grids for 2-D tables.
No external plotting dependency and no timestamps, so outputs are
byte-stable for identical inputs.
"""

import numpy as np

from .circuit import CircuitConfig
from .data import DiscreteDistribution


def _svg_header(width, height, title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<title>{title}</title>',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="16" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{title}</text>',
    ]


def render_bars(dist: DiscreteDistribution, path, title: str,
                width: int = 640, height: int = 320):
    """One bar per state, heights scaled to the maximum mass."""
    mass = dist.mass
    top = float(mass.max()) or 1.0
    margin, base = 24, height - 24
    plot_h = base - 32
    bar_w = (width - 2 * margin) / mass.size
    parts = _svg_header(width, height, title)
    parts.append(f'<line x1="{margin}" y1="{base}" x2="{width - margin}" y2="{base}" '
                 'stroke="black" stroke-width="1"/>')
    for i, m in enumerate(mass):
        h = plot_h * float(m) / top
        x = margin + i * bar_w
        parts.append(f'<rect x="{x:.2f}" y="{base - h:.2f}" width="{bar_w * 0.9:.2f}" '
                     f'height="{h:.2f}" fill="steelblue"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))


def render_grid(dist: DiscreteDistribution, cfg: CircuitConfig, path, title: str,
                cell: int = 9):
    """Shaded S x S grid; darker cells carry more mass."""
    S = cfg.S
    grid = dist.mass.reshape(S, S)  # flat = c0 + S*c1 -> grid[c1, c0]
    top = float(grid.max()) or 1.0
    margin = 24
    width = S * cell + 2 * margin
    height = S * cell + 2 * margin + 8
    parts = _svg_header(width, height, title)
    for c1 in range(S):
        for c0 in range(S):
            m = grid[c1, c0]
            if m == 0.0:
                continue
            shade = int(255 * (1.0 - float(m) / top) ** 2)
            x = margin + c0 * cell
            y = height - margin - (c1 + 1) * cell
            parts.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                         f'fill="rgb({shade},{shade},255)"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))


def render_distribution(dist: DiscreteDistribution, cfg: CircuitConfig, path, title: str):
    if cfg.D == 2:
        render_grid(dist, cfg, path, title)
    else:
        render_bars(dist, path, title)
