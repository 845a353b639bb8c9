"""Offline rendering of run artifacts to SVG frames."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Ellipse, Polygon

from .errors import InvalidParameterError


def _load_positions(path):
    frames = {}
    with open(path) as fh:
        for row in csv.DictReader(fh):
            frames.setdefault(int(row["step"]), []).append(
                (float(row["x"]), float(row["y"]))
            )
    return {k: np.asarray(v) for k, v in frames.items()}


def _load_plan_trace(path):
    if not path.exists():
        return []
    events = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                events.append(json.loads(line))
    return events


def _load_map(run_dir: Path):
    maps = sorted((run_dir / "maps").glob("step_*.txt")) if (
        run_dir / "maps"
    ).is_dir() else []
    if not maps:
        return None
    rows = [
        [int(v) for v in line.split()]
        for line in maps[-1].read_text().strip().splitlines()
    ]
    return np.asarray(rows, dtype=np.uint8).T  # back to (nx, ny)


def _sigma_ellipse(mean, cov, **kw):
    vals, vecs = np.linalg.eigh(np.asarray(cov))
    angle = float(np.degrees(np.arctan2(vecs[1, -1], vecs[0, -1])))
    w, h = 2.0 * np.sqrt(np.maximum(vals, 0.0))
    return Ellipse(mean, h, w, angle=angle, **kw)


def render_run(run_dir, every: int = 10, fmt: str = "svg"):
    """Write one frame per selected recorded step; returns the frame paths."""
    if every < 1:
        raise InvalidParameterError("every must be >= 1")
    run_dir = Path(run_dir)
    with open(run_dir / "summary.json") as fh:
        summary = json.load(fh)
    cfg = summary["config"]
    frames = _load_positions(run_dir / "positions.csv")
    trace = _load_plan_trace(run_dir / "plan_trace.jsonl")
    grid = _load_map(run_dir)

    out_dir = run_dir / "frames"
    out_dir.mkdir(exist_ok=True)
    written = []
    steps = sorted(frames)
    for n, step in enumerate(steps):
        if n % every and step != steps[-1]:
            continue
        fig, ax = plt.subplots(figsize=(7, 7 * cfg["ly"] / cfg["lx"]))
        ax.set_xlim(0, cfg["lx"])
        ax.set_ylim(0, cfg["ly"])
        ax.set_aspect("equal")
        if grid is not None:
            nx, ny = grid.shape
            ax.imshow(
                grid.T,
                origin="lower",
                extent=(0, cfg["lx"], 0, cfg["ly"]),
                cmap="Greys",
                vmin=0,
                vmax=3,
                interpolation="nearest",
            )
        for poly in cfg.get("true_obstacles", []):
            ax.add_patch(
                Polygon(np.asarray(poly), closed=True, fill=False,
                        edgecolor="k", linewidth=1.0)
            )
        pos = frames[step]
        ax.plot(pos[:, 0], pos[:, 1], ".", ms=3, color="tab:blue")
        current = None
        for event in trace:
            if event["step"] <= step:
                current = event
        if current is not None:
            for comp in current["goal"]:
                ax.add_patch(
                    _sigma_ellipse(
                        comp["mean"], comp["cov"], fill=False,
                        edgecolor="tab:red", linewidth=1.0, alpha=0.8,
                    )
                )
        ax.set_title(f"step {step}")
        path = out_dir / f"frame_{step:05d}.{fmt}"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written
