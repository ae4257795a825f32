"""Static SVG line charts for Ps curves; a pure function of the row data.

Hand-rolled rather than a plotting library so the same CSV always renders to
byte-identical SVG (the determinism criterion covers chart output too).
"""

from __future__ import annotations

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 62, 20, 42, 48
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#17becf")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _series_label(key: tuple, series_keys: tuple) -> str:
    return " ".join(f"{name}={value:g}" if isinstance(value, float)
                    else f"{name}={value}"
                    for name, value in zip(series_keys, key))


def render_chart(rows: list[dict], x_key: str = "eta",
                 series_keys: tuple = ("algo", "n", "k", "C1", "C2"),
                 y_key: str = "ps", title: str = "") -> str:
    """Line chart with Wilson-interval whiskers; one series per distinct
    combination of `series_keys` values."""
    if not rows:
        raise ValueError("no rows to chart")
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        key = tuple(row[k] for k in series_keys)
        groups.setdefault(key, []).append(row)

    xs = sorted({float(r[x_key]) for r in rows})
    x_min, x_max = xs[0], xs[-1]
    if x_max == x_min:
        x_min, x_max = x_min - 0.5, x_max + 0.5
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x: float) -> float:
        return MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w

    def sy(y: float) -> float:
        y = min(1.0, max(0.0, y))
        return MARGIN_T + (1.0 - y) * plot_h

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
           f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    if title:
        out.append(f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="15">{title}</text>')

    # gridlines and y ticks at 0, 0.25, ..., 1
    for i in range(5):
        y = i * 0.25
        py = _fmt(sy(y))
        out.append(f'<line x1="{MARGIN_L}" y1="{py}" x2="{WIDTH - MARGIN_R}" '
                   f'y2="{py}" stroke="#dddddd" stroke-width="1"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{py}" text-anchor="end" '
                   f'dominant-baseline="middle" font-family="sans-serif" '
                   f'font-size="11">{y:g}</text>')
    ticks = xs if len(xs) <= 12 else xs[:: max(1, len(xs) // 10)]
    for x in ticks:
        px = _fmt(sx(x))
        ybase = HEIGHT - MARGIN_B
        out.append(f'<line x1="{px}" y1="{ybase}" x2="{px}" y2="{ybase + 5}" '
                   f'stroke="#333333" stroke-width="1"/>')
        out.append(f'<text x="{px}" y="{ybase + 18}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{x:g}</text>')
    out.append(f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" '
               f'height="{plot_h}" fill="none" stroke="#333333"/>')
    out.append(f'<text x="{WIDTH // 2}" y="{HEIGHT - 10}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12">{x_key}</text>')
    out.append(f'<text x="16" y="{HEIGHT // 2}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12" '
               f'transform="rotate(-90 16 {HEIGHT // 2})">{y_key}</text>')

    for idx, key in enumerate(sorted(groups, key=str)):
        color = PALETTE[idx % len(PALETTE)]
        pts = sorted(groups[key], key=lambda r: float(r[x_key]))
        coords = " ".join(f"{_fmt(sx(float(r[x_key])))},{_fmt(sy(float(r[y_key])))}"
                          for r in pts)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                   f'stroke-width="1.8"/>')
        for r in pts:
            px = _fmt(sx(float(r[x_key])))
            out.append(f'<circle cx="{px}" cy="{_fmt(sy(float(r[y_key])))}" '
                       f'r="2.6" fill="{color}"/>')
            if "ps_lo" in r and "ps_hi" in r:
                y_lo, y_hi = _fmt(sy(float(r["ps_lo"]))), _fmt(sy(float(r["ps_hi"])))
                out.append(f'<line x1="{px}" y1="{y_lo}" x2="{px}" y2="{y_hi}" '
                           f'stroke="{color}" stroke-width="1"/>')
                fx = float(px)
                out.append(f'<line x1="{_fmt(fx - 3)}" y1="{y_lo}" '
                           f'x2="{_fmt(fx + 3)}" y2="{y_lo}" stroke="{color}"/>')
                out.append(f'<line x1="{_fmt(fx - 3)}" y1="{y_hi}" '
                           f'x2="{_fmt(fx + 3)}" y2="{y_hi}" stroke="{color}"/>')
        label = _series_label(key, series_keys)
        ly = MARGIN_T + 14 + 15 * idx
        out.append(f'<line x1="{WIDTH - MARGIN_R - 150}" y1="{ly - 4}" '
                   f'x2="{WIDTH - MARGIN_R - 132}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{WIDTH - MARGIN_R - 127}" y="{ly}" '
                   f'font-family="sans-serif" font-size="10">{label}</text>')

    out.append("</svg>")
    return "\n".join(out) + "\n"
