"""Serialization of run outputs: JSON, CSV and SVG frames.

JSON is written with sorted keys and no timestamps so identical runs give
byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import os

import numpy as np

TRAJECTORY_FILE = "trajectory.json"
CONTROL_FILE = "control.json"
DIAGNOSTICS_FILE = "diagnostics.csv"
SWEEP_FILE = "sweep.csv"
FRAMES_DIR = "frames"


def dumps(obj):
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=True) + "\n"


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def diagnostics_csv(traj):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "area", "min_wall_distance", "tube_error", "grad_norm"])
    for row in zip(traj.times, traj.area, traj.min_wall_distance, traj.tube_error,
                   traj.grad_norm):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# SVG -------------------------------------------------------------------------
def _path(points, scale, close=True):
    pts = np.asarray(points, dtype=float)
    cmds = [f"{'M' if k == 0 else 'L'}{x * scale:.3f},{-y * scale:.3f}"
            for k, (x, y) in enumerate(pts)]
    return " ".join(cmds) + (" Z" if close else "")


def svg_frame(domain, curve, target=None, t=None, size=400):
    """Domain outline, sigma arcs in red, curve in blue, target dashed."""
    allpts = np.vstack([c.points for c in domain.components])
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    span = float((hi - lo).max())
    scale = 0.9 * size / span
    cx, cy = 0.5 * (lo + hi)
    vb = f"{cx * scale - size / 2:.3f} {-cy * scale - size / 2:.3f} {size} {size}"
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="{vb}">']
    for comp in domain.components:
        out.append(f'<path d="{_path(comp.points, scale)}" fill="none" stroke="black" '
                   'stroke-width="1.5"/>')
    for arc in domain.sigma:
        comp = domain.components[arc.component]
        span_t = (arc.t1 - arc.t0) % 1.0 or 1.0
        s = arc.t0 + np.linspace(0.0, span_t, 129)
        out.append(f'<path d="{_path(comp.point_at(s), scale, close=False)}" fill="none" '
                   'stroke="red" stroke-width="4"/>')
    if target is not None:
        out.append(f'<path d="{_path(target, scale)}" fill="none" stroke="gray" '
                   'stroke-dasharray="4,3" stroke-width="1"/>')
    out.append(f'<path d="{_path(curve, scale)}" fill="none" stroke="blue" stroke-width="1.5"/>')
    if t is not None:
        out.append(f'<text x="{cx * scale - size / 2 + 8:.3f}" y="{-cy * scale - size / 2 + 20:.3f}" '
                   f'font-family="monospace" font-size="14">t={t:.4f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_frames(directory, traj, every=1):
    os.makedirs(directory, exist_ok=True)
    target = None if traj.gamma1 is None else traj.gamma1.points
    names = []
    for k in range(0, len(traj.times), every):
        name = f"frame_{k:05d}.svg"
        write_text(os.path.join(directory, name),
                   svg_frame(traj.domain, traj.curves[k], target, traj.times[k]))
        names.append(name)
    return names
