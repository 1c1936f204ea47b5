"""Hand-rolled SVG chart rendering.

Charts are emitted as standalone vector graphics with the source data
embedded in a leading XML comment, so a figure can be audited with a text
editor. Rendering is pure string assembly with fixed number formatting:
identical inputs give byte-identical files.
"""

from __future__ import annotations

from fairsched import DataError

CLUSTER_COLORS = {
    "Purple": "#7e57c2",
    "Blue": "#1e88e5",
    "Orange": "#fb8c00",
    "Green": "#43a047",
    "Yellow": "#fbc02d",
    "Brown": "#6d4c41",
}
_FALLBACK_COLORS = ("#546e7a", "#d81b60", "#00897b", "#5e35b1", "#c0ca33", "#8d6e63", "#3949ab")

_FONT = "font-family=\"Helvetica, Arial, sans-serif\""


def _num(x: float) -> str:
    return format(float(x), ".2f")


def _val(x: float) -> str:
    return format(float(x), ".6g")


def _esc(text: str) -> str:
    return (
        str(text)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _comment(lines: list[str]) -> str:
    body = "\n".join(line.replace("--", "- -") for line in lines)
    return f"<!--\n{body}\n-->\n"


def _document(width: int, height: int, data_lines: list[str], body: str) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        + _comment(data_lines)
        + f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>\n'
        + body
        + "</svg>\n"
    )


def _text(x: float, y: float, content: str, size: int = 12, anchor: str = "middle",
          color: str = "#222222", extra: str = "") -> str:
    return (
        f'<text x="{_num(x)}" y="{_num(y)}" {_FONT} font-size="{size}" '
        f'text-anchor="{anchor}" fill="{color}"{extra}>{_esc(content)}</text>\n'
    )


def _line(x1, y1, x2, y2, color="#444444", width=1.0, dash: str | None = None) -> str:
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    return (
        f'<line x1="{_num(x1)}" y1="{_num(y1)}" x2="{_num(x2)}" y2="{_num(y2)}" '
        f'stroke="{color}" stroke-width="{_num(width)}"{dash_attr}/>\n'
    )


def _color_for(label: str, index: int) -> str:
    return CLUSTER_COLORS.get(label, _FALLBACK_COLORS[index % len(_FALLBACK_COLORS)])


def _nice_span(lo: float, hi: float) -> tuple[float, float]:
    if lo == hi:
        pad = 1.0 if lo == 0 else abs(lo) * 0.2
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.12
    return lo - pad, hi + pad


def render_group_bars(
    rows: list[tuple[str, float, float, int]],
    title: str,
    y_label: str = "delta days from schedule mean",
) -> str:
    """Bar chart of per-group deltas with standard-error whiskers.

    rows: (group, delta, se, count), drawn in the given order.
    """
    if not rows:
        raise DataError("no rows to draw")
    width, height = 640, 400
    left, right, top, bottom = 70, 20, 50, 60
    plot_w, plot_h = width - left - right, height - top - bottom

    lo = min(min(d - s for _, d, s, _ in rows), 0.0)
    hi = max(max(d + s for _, d, s, _ in rows), 0.0)
    lo, hi = _nice_span(lo, hi)
    scale = plot_h / (hi - lo)

    def ypix(v: float) -> float:
        return top + (hi - v) * scale

    slot = plot_w / len(rows)
    bar_w = slot * 0.6

    body = _text(width / 2, 24, title, size=15)
    body += _text(16, top + plot_h / 2, y_label, size=11, extra=f' transform="rotate(-90 16 {_num(top + plot_h / 2)})"')
    body += _line(left, ypix(0.0), left + plot_w, ypix(0.0), color="#888888")
    for tick in (lo, 0.0, hi):
        body += _text(left - 8, ypix(tick) + 4, _val(round(tick, 2)), size=10, anchor="end", color="#555555")

    for index, (group, delta, se, count) in enumerate(rows):
        x = left + slot * index + (slot - bar_w) / 2
        y0, y1 = ypix(max(delta, 0.0)), ypix(min(delta, 0.0))
        color = _color_for(group, index)
        body += (
            f'<rect x="{_num(x)}" y="{_num(y0)}" width="{_num(bar_w)}" '
            f'height="{_num(max(y1 - y0, 0.5))}" fill="{color}" fill-opacity="0.85"/>\n'
        )
        cx = x + bar_w / 2
        if se > 0:
            body += _line(cx, ypix(delta - se), cx, ypix(delta + se), color="#222222", width=1.2)
            body += _line(cx - 5, ypix(delta - se), cx + 5, ypix(delta - se), color="#222222", width=1.2)
            body += _line(cx - 5, ypix(delta + se), cx + 5, ypix(delta + se), color="#222222", width=1.2)
        body += _text(cx, height - bottom + 16, group, size=11)
        body += _text(cx, height - bottom + 32, f"n={count}", size=9, color="#777777")

    data = ["data: group bars", "group,delta_days,se,count"] + [
        f"{g},{_val(d)},{_val(s)},{c}" for g, d, s, c in rows
    ]
    return _document(width, height, data, body)


def render_tradeoff(
    points: list[tuple[str, float, float, float, float]],
    frontier_names: list[str],
    title: str,
    x_label: str = "unfairness d (days)",
    y_label: str = "mean detection time of violations (days)",
) -> str:
    """Scatter of (d, mu) policy points with error bars; the frontier
    members are joined by a dashed polyline.

    points: (name, x, y, x_se, y_se).
    """
    if not points:
        raise DataError("no points to draw")
    width, height = 680, 460
    left, right, top, bottom = 80, 30, 50, 70
    plot_w, plot_h = width - left - right, height - top - bottom

    xlo, xhi = _nice_span(min(p[1] - p[3] for p in points), max(p[1] + p[3] for p in points))
    ylo, yhi = _nice_span(min(p[2] - p[4] for p in points), max(p[2] + p[4] for p in points))

    def xpix(v: float) -> float:
        return left + (v - xlo) / (xhi - xlo) * plot_w

    def ypix(v: float) -> float:
        return top + (yhi - v) / (yhi - ylo) * plot_h

    body = _text(width / 2, 24, title, size=15)
    body += _line(left, top + plot_h, left + plot_w, top + plot_h, color="#888888")
    body += _line(left, top, left, top + plot_h, color="#888888")
    body += _text(left + plot_w / 2, height - 20, x_label, size=12)
    body += _text(20, top + plot_h / 2, y_label, size=12, extra=f' transform="rotate(-90 20 {_num(top + plot_h / 2)})"')
    for tick in (xlo, (xlo + xhi) / 2, xhi):
        body += _text(xpix(tick), top + plot_h + 16, _val(round(tick, 2)), size=10, color="#555555")
    for tick in (ylo, (ylo + yhi) / 2, yhi):
        body += _text(left - 8, ypix(tick) + 4, _val(round(tick, 2)), size=10, anchor="end", color="#555555")

    frontier = [p for p in points if p[0] in set(frontier_names)]
    frontier.sort(key=lambda p: (p[1], p[2]))
    if len(frontier) >= 2:
        path = " ".join(f"{_num(xpix(p[1]))},{_num(ypix(p[2]))}" for p in frontier)
        body += (
            f'<polyline points="{path}" fill="none" stroke="#1565c0" '
            f'stroke-width="1.5" stroke-dasharray="6,4"/>\n'
        )

    for index, (name, x, y, x_se, y_se) in enumerate(points):
        color = _color_for(name, index)
        px, py = xpix(x), ypix(y)
        if x_se > 0:
            body += _line(xpix(x - x_se), py, xpix(x + x_se), py, color=color, width=1.0)
        if y_se > 0:
            body += _line(px, ypix(y - y_se), px, ypix(y + y_se), color=color, width=1.0)
        body += f'<circle cx="{_num(px)}" cy="{_num(py)}" r="4" fill="{color}"/>\n'
        body += _text(px + 7, py - 7, name, size=10, anchor="start", color="#333333")

    data = ["data: tradeoff", "policy,d,mu,d_se,mu_se,frontier"] + [
        f"{n},{_val(x)},{_val(y)},{_val(xs)},{_val(ys)},{1 if n in set(frontier_names) else 0}"
        for n, x, y, xs, ys in points
    ]
    return _document(width, height, data, body)


def _heat_color(value: float) -> str:
    # diverging blue (negative) to red (positive) through white
    v = max(-1.0, min(1.0, value))
    base = int(round(255 * (1.0 - abs(v))))
    if v >= 0:
        r, g, b = 255, base, base
    else:
        r, g, b = base, base, 255
    return f"#{r:02x}{g:02x}{b:02x}"


def render_paired_heatmap(
    order: tuple[str, ...],
    values: dict[tuple[str, str], float],
    counts: dict[tuple[str, str], int],
    title: str,
) -> str:
    """Matrix of later-vs-earlier disagreement asymmetry per cluster pair.

    Rows are the earlier cluster, columns the later one, both in ``order``;
    cells with no pairs are drawn gray.
    """
    if not order:
        raise DataError("no clusters to draw")
    cell = 64
    left, top = 130, 90
    width = left + cell * len(order) + 40
    height = top + cell * len(order) + 50

    body = _text(width / 2, 24, title, size=15)
    body += _text(left + cell * len(order) / 2, 50, "later inspection cluster", size=12)
    body += _text(
        24, top + cell * len(order) / 2, "earlier inspection cluster", size=12,
        extra=f' transform="rotate(-90 24 {_num(top + cell * len(order) / 2)})"',
    )
    for j, later in enumerate(order):
        body += _text(left + cell * j + cell / 2, top - 10, later, size=11)
    for i, earlier in enumerate(order):
        body += _text(left - 10, top + cell * i + cell / 2 + 4, earlier, size=11, anchor="end")
        for j, later in enumerate(order):
            key = (earlier, later)
            x, y = left + cell * j, top + cell * i
            count = counts.get(key, 0)
            if count == 0 or key not in values:
                fill = "#eeeeee"
                label = "&#183;"
            else:
                fill = _heat_color(values[key])
                label = _esc(format(values[key], "+.2f"))
            body += (
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{fill}" stroke="#ffffff" stroke-width="2"/>\n'
            )
            body += (
                f'<text x="{x + cell / 2}" y="{y + cell / 2 + 1}" {_FONT} font-size="12" '
                f'text-anchor="middle" fill="#111111">{label}</text>\n'
            )
            body += _text(x + cell / 2, y + cell / 2 + 16, f"n={count}", size=9, color="#555555")

    data = ["data: paired heatmap", "earlier,later,value,count"]
    for earlier in order:
        for later in order:
            key = (earlier, later)
            value = values.get(key)
            data.append(
                f"{earlier},{later},{'' if value is None else _val(value)},{counts.get(key, 0)}"
            )
    return _document(width, height, data, body)


def render_scatter_coords(
    points: list[tuple[float, float, str]],
    title: str,
) -> str:
    """Geographic scatter: one dot per inspection at (longitude, latitude),
    colored by cluster; points: (latitude, longitude, cluster)."""
    if not points:
        raise DataError("no points to draw")
    width, height = 560, 600
    left, right, top, bottom = 60, 20, 50, 40
    plot_w, plot_h = width - left - right, height - top - bottom

    lats = [p[0] for p in points]
    lons = [p[1] for p in points]
    lat_lo, lat_hi = _nice_span(min(lats), max(lats))
    lon_lo, lon_hi = _nice_span(min(lons), max(lons))

    def xpix(lon: float) -> float:
        return left + (lon - lon_lo) / (lon_hi - lon_lo) * plot_w

    def ypix(lat: float) -> float:
        return top + (lat_hi - lat) / (lat_hi - lat_lo) * plot_h

    body = _text(width / 2, 24, title, size=15)
    clusters = sorted({p[2] for p in points})
    for index, cluster in enumerate(clusters):
        color = _color_for(cluster, index)
        body += f'<circle cx="{left + 8 + 92 * index}" cy="38" r="4" fill="{color}"/>\n'
        body += _text(left + 16 + 92 * index, 42, cluster, size=10, anchor="start")
    for lat, lon, cluster in points:
        color = _color_for(cluster, clusters.index(cluster))
        body += (
            f'<circle cx="{_num(xpix(lon))}" cy="{_num(ypix(lat))}" r="2.2" '
            f'fill="{color}" fill-opacity="0.65"/>\n'
        )

    data = ["data: scatter coords", "latitude,longitude,cluster"] + [
        f"{_val(lat)},{_val(lon)},{cluster}" for lat, lon, cluster in points
    ]
    return _document(width, height, data, body)
