"""Artifact writers: CSV/JSON outputs, SHA-256 manifests and SVG figures.

CSV files are the canonical outputs; figures are a convenience rendered next
to them.  SVG output is made byte-reproducible by pinning matplotlib's hash
salt and stripping the date metadata, so manifests of reruns match exactly.
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import __version__

__all__ = [
    "ReportWriter",
    "write_csv",
    "sha256_file",
    "rate_plot",
    "curve_plot",
    "heatmap_plot",
]

plt.rcParams["svg.hashsalt"] = "respdens"


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def write_csv(path, header, columns):
    """Write named columns (equal length) as a UTF-8 CSV with repr floats."""
    columns = [np.asarray(c) for c in columns]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(
                str(int(v)) if isinstance(v, (int, np.integer, np.bool_))
                else repr(float(v)) if isinstance(v, (float, np.floating))
                else str(v)
                for v in row) + "\n")


class ReportWriter:
    """Collects artifacts in an output directory and writes the manifest.

    Every file registered (or written through the helpers) is listed in
    manifest.json with its SHA-256 hash, next to the config snapshot.
    """

    def __init__(self, out_dir, config: dict):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.artifacts = []
        self._t0 = time.monotonic()

    def path(self, name) -> Path:
        return self.out_dir / name

    def register(self, path):
        path = Path(path)
        self.artifacts.append({
            "file": path.name,
            "sha256": sha256_file(path),
            "bytes": path.stat().st_size,
        })
        return path

    def csv(self, name, header, columns):
        path = self.path(name)
        write_csv(path, header, columns)
        return self.register(path)

    def json(self, name, payload):
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return self.register(path)

    def figure(self, name, fig):
        path = self.path(name)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        return self.register(path)

    def finish(self, extra=None):
        manifest = {
            "tool": "respdens",
            "version": __version__,
            "config": self.config,
            "artifacts": sorted(self.artifacts, key=lambda a: a["file"]),
            "elapsed_seconds": round(time.monotonic() - self._t0, 3),
        }
        if extra:
            manifest.update(extra)
        path = self.path("manifest.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------

def rate_plot(reports: dict, title="sup-norm error vs sample size"):
    """Log-log medians with interquartile bands, one line per estimator."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for label, rep in reports.items():
        ax.plot(rep.ns, rep.medians, marker="o",
                label=f"{label} (slope {rep.slope:.3f})")
        ax.fill_between(rep.ns, rep.q25, rep.q75, alpha=0.2)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("sup error")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    return fig


def curve_plot(grid, curves: dict, title, xlabel="y", ylabel="density"):
    """Overlay of named curves on a shared grid."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for label, values in curves.items():
        ax.plot(grid, values, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    return fig


def heatmap_plot(grid, matrix, title):
    """Covariance kernel surface on the grid x grid square."""
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    extent = [grid[0], grid[-1], grid[0], grid[-1]]
    im = ax.imshow(matrix, origin="lower", extent=extent, aspect="auto")
    fig.colorbar(im, ax=ax)
    ax.set_xlabel("t")
    ax.set_ylabel("s")
    ax.set_title(title)
    fig.tight_layout()
    return fig
