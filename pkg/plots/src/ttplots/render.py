"""Render paper-style figures from versioned ttflow result CSVs.

The input format is the ``ttflow-csv v1`` schema: a leading ``# ttflow-csv
v1`` comment, a header row, then one row per time step with columns
``t, err, r_1.., eps_1.., condM_1.., condN_1.., wall_s``. Rendering is
pure: a fixed style, no timestamps, and a fixed SVG hash salt, so the same
inputs produce byte-identical files.
"""

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

SCHEMA = "ttflow-csv v1"
KINDS = ("error", "rank", "conditioning", "summary")

plt.rcParams.update({
    "svg.hashsalt": "ttflow-plots",
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
})


@dataclass
class FigureSpec:
    kind: str
    inputs: list
    output: str
    labels: list = field(default_factory=list)
    fmt: str = "svg"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; choose from {KINDS}")
        if not self.labels:
            self.labels = [Path(p).stem for p in self.inputs]


def read_results_csv(path) -> dict:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing schema comment line")
    schema = lines[0].lstrip("# ").strip()
    if schema != SCHEMA:
        raise ValueError(f"{path}: schema {schema!r} is not {SCHEMA!r}")
    header = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:]]
    return {name: [row[i] if i < len(row) else "" for row in rows]
            for i, name in enumerate(header)}


def _column(data: dict, name: str, path) -> np.ndarray:
    if name not in data:
        raise ValueError(f"{path}: missing column {name!r}")
    return np.array([float(v) if v else np.nan for v in data[name]])


def _level_columns(data: dict, prefix: str):
    names = sorted((n for n in data if n.startswith(prefix)),
                   key=lambda n: int(n.split("_")[1]))
    return names


def _render_error(ax, datasets, labels, paths):
    for data, label, path in zip(datasets, labels, paths):
        t = _column(data, "t", path)
        err = _column(data, "err", path)
        mask = np.isfinite(err) & (err > 0)
        ax.semilogy(t[mask], err[mask], marker="o", ms=3, label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("relative error")
    ax.legend()


def _render_rank(ax, datasets, labels, paths):
    for data, label, path in zip(datasets, labels, paths):
        t = _column(data, "t", path)
        rank_names = _level_columns(data, "r_")
        if not rank_names:
            raise ValueError(f"{path}: missing column 'r_1'")
        total = 2 + sum(_column(data, n, path) for n in rank_names)
        ax.step(t, total, where="post", label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("rank vector 1-norm")
    ax.legend()


def _render_conditioning(ax, datasets, labels, paths):
    for data, label, path in zip(datasets, labels, paths):
        t = _column(data, "t", path)
        m_names = _level_columns(data, "condM_")
        n_names = _level_columns(data, "condN_")
        if not m_names or not n_names:
            raise ValueError(f"{path}: missing column 'condM_1'")
        for name in m_names + n_names:
            vals = _column(data, name, path)
            mask = np.isfinite(vals)
            ax.semilogy(t[mask], vals[mask], lw=0.9, label=f"{label}:{name}")
    ax.set_xlabel("t")
    ax.set_ylabel("interface condition number")
    ax.legend(fontsize=6, ncol=2)


def _render_summary(ax, datasets, labels, paths):
    final_err, runtimes = [], []
    for data, path in zip(datasets, paths):
        err = _column(data, "err", path)
        wall = _column(data, "wall_s", path)
        finite = err[np.isfinite(err)]
        final_err.append(finite[-1] if finite.size else np.nan)
        runtimes.append(wall[np.isfinite(wall)][-1])
    x = np.arange(len(labels))
    ax.bar(x - 0.2, final_err, width=0.4, label="final error")
    ax.set_yscale("log")
    ax.set_ylabel("final relative error")
    twin = ax.twinx()
    twin.bar(x + 0.2, runtimes, width=0.4, color="tab:orange", label="runtime [s]")
    twin.set_ylabel("runtime [s]")
    twin.grid(False)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=20, ha="right")
    handles, names = ax.get_legend_handles_labels()
    h2, n2 = twin.get_legend_handles_labels()
    ax.legend(handles + h2, names + n2, loc="upper left")


_RENDERERS = {
    "error": _render_error,
    "rank": _render_rank,
    "conditioning": _render_conditioning,
    "summary": _render_summary,
}


def render(spec: FigureSpec) -> Path:
    """Write the figure; same spec and inputs give byte-identical output."""
    datasets = [read_results_csv(p) for p in spec.inputs]
    fig, ax = plt.subplots()
    try:
        _RENDERERS[spec.kind](ax, datasets, spec.labels, spec.inputs)
        fig.tight_layout()
        out = Path(spec.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, format=spec.fmt, metadata=_clean_metadata(spec.fmt))
    finally:
        plt.close(fig)
    return Path(spec.output)


def _clean_metadata(fmt: str):
    if fmt == "svg":
        return {"Date": None}
    if fmt == "png":
        return {"Software": None}
    return None
