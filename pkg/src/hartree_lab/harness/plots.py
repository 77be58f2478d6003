"""PNG figures for report tables."""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams.update({
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.markersize": 4,
    "savefig.dpi": 120,
})


def plot_table(table, path: str):
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ix = table.columns.index(table.x)
    xs = [r[ix] for r in table.rows]
    for name in table.y:
        iy = table.columns.index(name)
        ys = [abs(r[iy]) if table.logy else r[iy] for r in table.rows]
        ax.plot(xs, ys, "o-", label=name)
    if table.logx:
        ax.set_xscale("log")
    if table.logy:
        ax.set_yscale("log")
    ax.set_xlabel(table.x)
    ax.set_title(table.name)
    if len(table.y) > 1:
        ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def plot_tables(tables, directory: str):
    for t in tables:
        if t.x is not None and t.rows:
            plot_table(t, os.path.join(directory, f"{t.name}.png"))
