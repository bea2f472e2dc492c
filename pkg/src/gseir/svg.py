"""Minimal dependency-free SVG charts (scatter + polylines on linear axes)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=72, right=24, top=40, bottom=56)
DASH = {"solid": None, "dashed": "8 5", "dotted": "2 4"}


@dataclass(frozen=True)
class Layer:
    x: Sequence[float]
    y: Sequence[float]
    style: str = "solid"  # solid | dashed | dotted | circles
    color: str = "black"
    label: str = ""


def nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return [0.0]
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 10))
        v += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _label(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-2:
        return f"{v:.3g}"
    return f"{v:g}"


def chart(
    layers: Sequence[Layer],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    vline: float | None = None,
    xtick_labels: dict[float, str] | None = None,
) -> str:
    """Render layers to an SVG document string (deterministic output)."""
    xs = [v for layer in layers for v in layer.x]
    ys = [v for layer in layers for v in layer.y if math.isfinite(v)]
    if vline is not None:
        xs.append(vline)
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y0, y1 = (min(0.0, min(ys)), max(ys)) if ys else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y1 = y0 + 1
    y1 += 0.05 * (y1 - y0)
    left, top = MARGIN["left"], MARGIN["top"]
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<g class="axes" stroke="black" fill="none"><rect x="{left}" y="{top}" width="{pw}" height="{ph}"/></g>',
    ]
    out.append('<g class="yticks">')
    for t in nice_ticks(y0, y1):
        out.append(f'<line x1="{left - 4}" y1="{_fmt(py(t))}" x2="{left}" y2="{_fmt(py(t))}" stroke="black"/>')
        out.append(f'<text x="{left - 7}" y="{_fmt(py(t) + 4)}" text-anchor="end">{_label(t)}</text>')
    out.append("</g>")
    out.append('<g class="xticks">')
    xt = sorted(xtick_labels) if xtick_labels else nice_ticks(x0, x1)
    for t in xt:
        if not x0 <= t <= x1:
            continue
        text = xtick_labels[t] if xtick_labels else _label(t)
        out.append(f'<line x1="{_fmt(px(t))}" y1="{top + ph}" x2="{_fmt(px(t))}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px(t))}" y="{top + ph + 18}" text-anchor="middle">{escape(text)}</text>')
    out.append("</g>")
    out.append(f'<text x="{left + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    if vline is not None:
        out.append(
            f'<line class="boundary" x1="{_fmt(px(vline))}" y1="{top}" x2="{_fmt(px(vline))}" y2="{top + ph}" stroke="gray" stroke-width="1.5"/>'
        )
    for layer in layers:
        pts = [(px(a), py(b)) for a, b in zip(layer.x, layer.y) if math.isfinite(b)]
        label = escape(layer.label)
        if layer.style == "circles":
            out.append(f'<g class="points" data-label="{label}" fill="none" stroke="{layer.color}">')
            out.extend(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="3.5"/>' for a, b in pts)
            out.append("</g>")
        else:
            dash = DASH[layer.style]
            dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
            coords = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
            out.append(
                f'<polyline data-label="{label}" points="{coords}" fill="none" stroke="{layer.color}" stroke-width="2"{dash_attr}/>'
            )
    legend = [layer for layer in layers if layer.label]
    for k, layer in enumerate(legend):
        lx, ly = left + 10, top + 16 + 16 * k
        if layer.style == "circles":
            out.append(f'<circle cx="{lx + 10}" cy="{ly - 4}" r="3.5" fill="none" stroke="{layer.color}"/>')
        else:
            dash = DASH[layer.style]
            dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
            out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{layer.color}" stroke-width="2"{dash_attr}/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">{escape(layer.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def model_diagram() -> str:
    """Compartment boxes and labelled flows of the generalized SEIR model."""
    boxes = {"S": (60, 150), "E": (200, 150), "I": (340, 150), "Q": (480, 150), "R": (620, 70), "D": (620, 230), "P": (60, 290)}
    flows = [("S", "E", "β·S·I/N"), ("E", "I", "γ"), ("I", "Q", "δ"), ("Q", "R", "λ(t)"), ("Q", "D", "κ(t)"), ("S", "P", "α")]
    w, h = 60, 40
    out = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="720" height="360" viewBox="0 0 720 360" font-family="sans-serif" font-size="14">',
        '<defs><marker id="arrow" markerWidth="10" markerHeight="8" refX="9" refY="4" orient="auto"><path d="M0,0 L10,4 L0,8 z"/></marker></defs>',
        '<rect x="0" y="0" width="720" height="360" fill="white"/>',
    ]
    for name, (x, y) in boxes.items():
        out.append(f'<rect x="{x - w / 2:g}" y="{y - h / 2:g}" width="{w}" height="{h}" fill="none" stroke="black"/>')
        out.append(f'<text x="{x}" y="{y + 5}" text-anchor="middle">{name}</text>')
    for a, b, label in flows:
        (xa, ya), (xb, yb) = boxes[a], boxes[b]
        dx, dy = xb - xa, yb - ya
        dist = math.hypot(dx, dy)
        ux, uy = dx / dist, dy / dist
        # leave the box edge, not the centre
        ta = min((w / 2) / abs(ux) if ux else math.inf, (h / 2) / abs(uy) if uy else math.inf)
        sx, sy, ex, ey = xa + ux * ta, ya + uy * ta, xb - ux * ta, yb - uy * ta
        out.append(f'<line x1="{sx:.1f}" y1="{sy:.1f}" x2="{ex:.1f}" y2="{ey:.1f}" stroke="black" marker-end="url(#arrow)"/>')
        out.append(f'<text x="{(sx + ex) / 2 + 6:.1f}" y="{(sy + ey) / 2 - 6:.1f}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
