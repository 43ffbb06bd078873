"""Deterministic CSV / Markdown / SVG artifact writers.

All floats are formatted through one repr so byte-identical reruns stay
byte-identical; no timestamps or environment details enter the files.
The SVG log-log plots are generated markup with no plotting dependency.
"""

from __future__ import annotations

import json
import os

import numpy as np

__all__ = [
    "fmt",
    "write_csv",
    "write_markdown_table",
    "write_ratio_csv",
    "write_eigen_csv",
    "write_field_csv",
    "write_loglog_svg",
]


def fmt(x):
    """Stable float formatting for artifacts."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def write_csv(path, header, rows, meta=None):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        if meta is not None:
            fh.write("# " + json.dumps(meta, sort_keys=True, default=fmt) + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_markdown_table(path, title, header, rows, preamble="", meta=None):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(f"# {title}\n\n")
        if preamble:
            fh.write(preamble.rstrip() + "\n\n")
        if meta:
            for k in sorted(meta):
                fh.write(f"- {k}: {fmt(meta[k])}\n")
            fh.write("\n")
        fh.write("| " + " | ".join(header) + " |\n")
        fh.write("|" + "|".join("---" for _ in header) + "|\n")
        for row in rows:
            fh.write("| " + " | ".join(fmt(v) for v in row) + " |\n")


def write_ratio_csv(path, fit, meta=None):
    base = dict(meta or {})
    base.update({
        "alpha_hat": fit.alpha_hat,
        "c_hat": fit.c_hat,
        "r_squared": fit.r_squared,
        "model": fit.model,
        "window_lo": fit.window[0],
        "window_hi": fit.window[1],
    })
    write_csv(path, ["annulus_mid", "max_ratio"], fit.table, meta=base)


def write_eigen_csv(path, eigen, meta=None):
    base = dict(meta or {})
    base.update({
        "n": eigen.n,
        "lambda1": eigen.lambda1,
        "mu1": eigen.mu1,
        "regime": eigen.regime,
        "nu_hat": eigen.nu_hat,
    })
    rows = list(zip(eigen.profile.theta, eigen.phi))
    write_csv(path, ["theta", "phi1"], rows, meta=base)


def write_field_csv(path, fld, meta=None):
    base = dict(meta or {})
    base.update({
        "n": fld.n,
        "operator": fld.operator_label,
        "reduction": fld.domain.reduction,
        "truncation": fld.truncation,
        "bracket_width": fld.bracket_width,
    })
    rows = []
    r = fld.radii()
    theta = fld.theta
    for j in range(fld.u.shape[0]):
        for k in range(fld.u.shape[1]):
            rows.append((r[j, k], theta[j, k], fld.u[j, k], fld.d[j, k]))
    write_csv(path, ["r", "theta", "u", "d"], rows, meta=base)


def write_loglog_svg(path, series, title="", xlabel="r", ylabel="max ratio",
                     width=640, height=480, fitted=None):
    """Minimal hand-emitted log-log scatter + optional fitted line.

    series: list of (label, xs, ys); fitted: (alpha, c) power law drawn
    across the x-range.
    """
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    pts_all = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys)
               if x > 0 and y > 0]
    if not pts_all:
        raise ValueError("nothing to plot")
    lx = [np.log10(p[0]) for p in pts_all]
    ly = [np.log10(p[1]) for p in pts_all]
    x0, x1 = min(lx), max(lx)
    y0, y1 = min(ly), max(ly)
    if x1 - x0 < 1e-9:
        x1 = x0 + 1.0
    if y1 - y0 < 1e-9:
        y1 = y0 + 1.0
    pad = 0.06
    x0, x1 = x0 - pad * (x1 - x0), x1 + pad * (x1 - x0)
    y0, y1 = y0 - pad * (y1 - y0), y1 + pad * (y1 - y0)
    ml, mr, mt, mb = 70, 20, 40, 50

    def sx(v):
        return ml + (np.log10(v) - x0) / (x1 - x0) * (width - ml - mr)

    def sy(v):
        return height - mb - (np.log10(v) - y0) / (y1 - y0) * (height - mt - mb)

    colors = ["#1f6fb2", "#b2451f", "#3a9e3a", "#7a3ab2", "#b29a1f"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width/2:.1f}" y="24" text-anchor="middle" '
        f'font-family="monospace" font-size="14">{title}</text>',
    ]
    # decade grid
    for dec in range(int(np.floor(x0)), int(np.ceil(x1)) + 1):
        if x0 <= dec <= x1:
            px = sx(10.0**dec)
            parts.append(f'<line x1="{px:.1f}" y1="{mt}" x2="{px:.1f}" '
                         f'y2="{height-mb}" stroke="#dddddd"/>')
            parts.append(f'<text x="{px:.1f}" y="{height-mb+16}" text-anchor="middle" '
                         f'font-family="monospace" font-size="11">1e{dec}</text>')
    for dec in range(int(np.floor(y0)), int(np.ceil(y1)) + 1):
        if y0 <= dec <= y1:
            py = sy(10.0**dec)
            parts.append(f'<line x1="{ml}" y1="{py:.1f}" x2="{width-mr}" '
                         f'y2="{py:.1f}" stroke="#dddddd"/>')
            parts.append(f'<text x="{ml-6}" y="{py+4:.1f}" text-anchor="end" '
                         f'font-family="monospace" font-size="11">1e{dec}</text>')
    parts.append(f'<rect x="{ml}" y="{mt}" width="{width-ml-mr}" '
                 f'height="{height-mt-mb}" fill="none" stroke="#333333"/>')
    parts.append(f'<text x="{width/2:.1f}" y="{height-10}" text-anchor="middle" '
                 f'font-family="monospace" font-size="12">{xlabel}</text>')
    parts.append(f'<text x="16" y="{height/2:.1f}" text-anchor="middle" '
                 f'font-family="monospace" font-size="12" '
                 f'transform="rotate(-90 16 {height/2:.1f})">{ylabel}</text>')

    if fitted is not None:
        alpha, c = fitted
        xs = np.logspace(x0 + 0.02, x1 - 0.02, 32)
        path_d = " ".join(
            ("M" if i == 0 else "L") + f"{sx(x):.1f},{sy(c * x**alpha):.1f}"
            for i, x in enumerate(xs)
        )
        parts.append(f'<path d="{path_d}" fill="none" stroke="#888888" '
                     f'stroke-dasharray="5,4"/>')
        parts.append(f'<text x="{width-mr-8}" y="{mt+16}" text-anchor="end" '
                     f'font-family="monospace" font-size="11">slope {alpha:.3f}</text>')

    for i, (label, xs, ys) in enumerate(series):
        col = colors[i % len(colors)]
        for x, y in zip(xs, ys):
            if x > 0 and y > 0:
                parts.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3.5" '
                             f'fill="{col}"/>')
        parts.append(f'<text x="{ml+10}" y="{mt+16+14*i}" font-family="monospace" '
                     f'font-size="11" fill="{col}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
