"""SVG figures for the CLI reports.

Figures are built on bare ``Figure`` objects with the SVG canvas, so no
pyplot state or interactive backend is involved.  A fixed hash salt and a
blank date make repeated renders byte-identical.
"""

import matplotlib
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from .curve import boundary_points
from .invariants import SUP_RATIO, ratio_series

STYLE = {
    "svg.hashsalt": "acsf",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.0,
    "axes.prop_cycle": matplotlib.cycler(color=["#08589e", "#d95f0e", "#4eb3d3", "#7a0177", "#41ab5d"]),
}


def _figure(width=4.0, height=4.0, **subplots):
    fig = Figure(figsize=(width, height))
    FigureCanvasSVG(fig)
    return fig, fig.subplots(**subplots)


def save_svg(fig, path):
    with matplotlib.rc_context(STYLE):
        fig.savefig(path, format="svg", metadata={"Date": None})


def _closed(points):
    return np.vstack([points, points[:1]])


def snapshot_frame(state, path, limits=None):
    """Outline of one flow snapshot."""
    with matplotlib.rc_context(STYLE):
        fig, ax = _figure()
        pts = _closed(boundary_points(state.curve))
        ax.plot(pts[:, 0], pts[:, 1])
        ax.set_aspect("equal")
        if limits is not None:
            ax.set_xlim(*limits[0])
            ax.set_ylim(*limits[1])
        ax.set_title(f"t = {state.t:.6f}")
        save_svg(fig, path)


def trajectory_overview(traj, path, max_outlines=12):
    """Nested outlines plus the area and affine isoperimetric ratio series."""
    with matplotlib.rc_context(STYLE):
        fig, (ax0, ax1, ax2) = _figure(10.0, 3.4, ncols=3)
        picks = np.unique(np.linspace(0, len(traj) - 1, min(max_outlines, len(traj))).astype(int))
        for k in picks:
            pts = _closed(boundary_points(traj.states[k].curve))
            ax0.plot(pts[:, 0], pts[:, 1], color="#08589e", alpha=0.35 + 0.65 * k / max(len(traj) - 1, 1))
        ax0.set_aspect("equal")
        ax0.set_title("snapshots")

        ax1.plot(traj.times, traj.areas(), marker=".")
        ax1.set_xlabel("t")
        ax1.set_ylabel("area")

        series = ratio_series(traj)
        ax2.plot(series.times, series.ratios, marker=".")
        ax2.axhline(SUP_RATIO, color="k", ls="--", lw=0.8, label=r"$2\pi^{2/3}$")
        ax2.set_xlabel("t")
        ax2.set_ylabel("affine isoperimetric ratio")
        ax2.legend(loc="lower right")
        fig.tight_layout()
        save_svg(fig, path)


def milestone_overlay(milestone, path):
    """Normalized milestone curve against the image of its John ellipse."""
    with matplotlib.rc_context(STYLE):
        fig, ax = _figure()
        pts = _closed(boundary_points(milestone.normalized))
        phi = np.linspace(0.0, 2.0 * np.pi, 361)
        r = milestone.disk_radius
        ax.plot(pts[:, 0], pts[:, 1], label="normalized curve")
        ax.plot(r * np.cos(phi), r * np.sin(phi), ls="--", label="John ellipse image")
        ax.plot(0.5 * r * np.cos(phi), 0.5 * r * np.sin(phi), ls=":", color="0.5", label="half ellipse")
        ax.set_aspect("equal")
        ax.set_title(f"k = {milestone.k}, eps = {milestone.eps:.3e}")
        ax.legend(loc="upper right")
        save_svg(fig, path)


def classify_decay(result, path):
    """ε_k and the isoperimetric gap against the milestone index."""
    with matplotlib.rc_context(STYLE):
        fig, ax = _figure(5.0, 3.6)
        k = [m.k for m in result.milestones]
        ax.semilogy(k, np.maximum(result.eps, 1e-300), marker="o", label="eps")
        ax.semilogy(k, np.maximum(result.gaps, 1e-300), marker="s", label="iso gap")
        ax.set_xlabel("milestone k")
        ax.legend()
        fig.tight_layout()
        save_svg(fig, path)


def arrival_map(field, residual, path):
    """Level lines of the arrival field next to the PDE residual magnitude."""
    with matplotlib.rc_context(STYLE):
        fig, (ax0, ax1) = _figure(8.0, 3.8, ncols=2)
        X, Y = field.grid.coords()
        u = np.where(field.resolved, field.u, np.nan)
        ax0.contour(X, Y, u, levels=12, linewidths=0.7)
        ax0.set_aspect("equal")
        ax0.set_title("arrival field level lines")
        with np.errstate(divide="ignore", invalid="ignore"):
            mag = np.log10(np.abs(residual.residual))
        d = field.grid.spacing
        extent = (X[0, 0] - d / 2, X[0, -1] + d / 2, Y[0, 0] - d / 2, Y[-1, 0] + d / 2)
        im = ax1.imshow(mag, origin="lower", extent=extent, cmap="viridis", interpolation="nearest")
        fig.colorbar(im, ax=ax1, label="log10 |residual|")
        ax1.set_aspect("equal")
        ax1.set_title("level-set equation residual")
        fig.tight_layout()
        save_svg(fig, path)
