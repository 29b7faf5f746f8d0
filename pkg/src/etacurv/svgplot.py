"""Minimal SVG heatmap writer for grid node data.

Hand-rolled on purpose: the only consumer is the command layer, which
wants a static picture of u or of the cone margin next to the solution
file.  Axis-aligned h-by-h cells, a vertical colorbar, nothing more.
"""

import numpy as np

# viridis anchors at t = 0, 0.1, ..., 1.0 (sRGB in [0, 1])
_STOPS = (
    (0.267004, 0.004874, 0.329415),
    (0.282623, 0.140926, 0.457517),
    (0.253935, 0.265254, 0.529983),
    (0.206756, 0.371758, 0.553117),
    (0.163625, 0.471133, 0.558148),
    (0.127568, 0.566949, 0.550556),
    (0.134692, 0.658636, 0.517649),
    (0.266941, 0.748751, 0.440573),
    (0.477504, 0.821444, 0.318195),
    (0.741388, 0.873449, 0.149561),
    (0.993248, 0.906157, 0.143936),
)


def color(t):
    """Hex color for t in [0, 1], linearly interpolated between stops."""
    t = min(max(float(t), 0.0), 1.0)
    pos = t * (len(_STOPS) - 1)
    k = min(int(pos), len(_STOPS) - 2)
    frac = pos - k
    rgb = [(1.0 - frac) * a + frac * b for a, b in zip(_STOPS[k], _STOPS[k + 1])]
    return "#%02x%02x%02x" % tuple(int(round(255 * c)) for c in rgb)


def heatmap(points, values, h, title=""):
    """SVG text: one h-by-h cell per (x, y) node, colored by value.

    points: (m, 2) node coordinates; values: (m,).  Returns the SVG
    document as a string; deterministic for identical inputs.
    """
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError("heatmap needs (m, 2) points")
    if len(points) != len(values) or len(points) == 0:
        raise ValueError("points and values must match and be non-empty")
    h = float(h)

    xlo = points[:, 0].min() - h
    xhi = points[:, 0].max() + h
    ylo = points[:, 1].min() - h
    yhi = points[:, 1].max() + h
    vmin = float(values.min())
    vmax = float(values.max())
    span = vmax - vmin
    if span == 0.0:
        span = 1.0

    plot_px = 480.0
    ml, mt, mb, bar_w, bar_gap, mr = 56.0, 34.0, 40.0, 18.0, 16.0, 74.0
    scale = plot_px / max(xhi - xlo, yhi - ylo)
    pw = (xhi - xlo) * scale
    ph = (yhi - ylo) * scale
    width = ml + pw + bar_gap + bar_w + mr
    height = mt + ph + mb

    def px(x):
        return ml + (x - xlo) * scale

    def py(y):
        # SVG y grows downward
        return mt + (yhi - y) * scale

    cell = h * scale
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1f}" '
        f'height="{height:.1f}" viewBox="0 0 {width:.1f} {height:.1f}">',
        f'<rect width="{width:.1f}" height="{height:.1f}" fill="white"/>',
        f'<text x="{ml + pw / 2:.1f}" y="20" font-family="monospace" '
        f'font-size="13" text-anchor="middle">{title}</text>',
    ]
    for q in range(len(points)):
        t = (values[q] - vmin) / span
        out.append(
            f'<rect x="{px(points[q, 0]) - cell / 2:.2f}" '
            f'y="{py(points[q, 1]) - cell / 2:.2f}" '
            f'width="{cell:.2f}" height="{cell:.2f}" fill="{color(t)}"/>')
    out.append(
        f'<rect x="{ml:.1f}" y="{mt:.1f}" width="{pw:.1f}" height="{ph:.1f}" '
        f'fill="none" stroke="black" stroke-width="1"/>')
    for lab, x_px, anchor in ((xlo + h, px(xlo + h), "start"),
                              (xhi - h, px(xhi - h), "end")):
        out.append(
            f'<text x="{x_px:.1f}" y="{mt + ph + 16:.1f}" font-family="monospace" '
            f'font-size="11" text-anchor="{anchor}">{lab:.4g}</text>')
    for lab, y_px in ((ylo + h, py(ylo + h)), (yhi - h, py(yhi - h))):
        out.append(
            f'<text x="{ml - 6:.1f}" y="{y_px + 4:.1f}" font-family="monospace" '
            f'font-size="11" text-anchor="end">{lab:.4g}</text>')

    bar_x = ml + pw + bar_gap
    steps = 64
    seg = ph / steps
    for k in range(steps):
        # k = 0 paints the top of the bar = the maximum of the range
        t = 1.0 - k / (steps - 1)
        out.append(
            f'<rect x="{bar_x:.1f}" y="{mt + k * seg:.2f}" width="{bar_w:.1f}" '
            f'height="{seg + 0.5:.2f}" fill="{color(t)}"/>')
    out.append(
        f'<rect x="{bar_x:.1f}" y="{mt:.1f}" width="{bar_w:.1f}" height="{ph:.1f}" '
        f'fill="none" stroke="black" stroke-width="1"/>')
    out.append(
        f'<text x="{bar_x + bar_w + 4:.1f}" y="{mt + 4:.1f}" font-family="monospace" '
        f'font-size="11">{vmax:.6g}</text>')
    out.append(
        f'<text x="{bar_x + bar_w + 4:.1f}" y="{mt + ph:.1f}" font-family="monospace" '
        f'font-size="11">{vmin:.6g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_heatmap(path, points, values, h, title=""):
    text = heatmap(points, values, h, title=title)
    with open(path, "w") as fh:
        fh.write(text)
    return text
