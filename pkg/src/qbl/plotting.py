"""Figures for a trajectory CSV: a gnuplot script and a rendered PNG."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .io import CSV_COLUMNS, read_trajectory_csv

SITE_COLORS = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02")

PLOT_RC = {
    "font.size": 9,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "figure.dpi": 150,
    "savefig.bbox": "tight",
}


def _region_starts(times, regions):
    out = []
    for k in range(1, len(regions)):
        if regions[k] != regions[k - 1]:
            out.append(float(times[k]))
    return out


def gnuplot_script(csv_name: str = "trajectory.csv", image_name: str = "trajectory_gnuplot.png",
                   boundaries=()) -> str:
    col = {name: k + 1 for k, name in enumerate(CSV_COLUMNS)}
    pops = ", \\\n     ".join(
        f"'{csv_name}' using {col['time_ps']}:{col[f'pop{i}']} with lines title 'site {i}'"
        for i in range(1, 7)
    )
    arrows = "\n".join(
        f"set arrow from {t:.6g}, graph 0 to {t:.6g}, graph 1 nohead dashtype 2" for t in boundaries
    )
    return f"""# populations (top) and average energy (bottom) against time in ps
set datafile separator ','
set terminal pngcairo size 900,800
set output '{image_name}'
set key autotitle columnhead
set multiplot layout 2,1
{arrows}
set ylabel 'population'
set key outside right
plot {pops}
set xlabel 'time (ps)'
set ylabel 'energy (cm^{{-1}})'
unset key
plot '{csv_name}' using {col['time_ps']}:{col['energy_cm1']} with lines lw 2
unset multiplot
"""


def write_gnuplot_script(out_dir, csv_name: str = "trajectory.csv") -> Path:
    out_dir = Path(out_dir)
    cols = read_trajectory_csv(out_dir / csv_name)
    script = gnuplot_script(csv_name, boundaries=_region_starts(cols["time_ps"], cols["region"]))
    path = out_dir / "trajectory.gp"
    path.write_text(script)
    return path


def render_trajectory(csv_path, png_path) -> Path:
    """Two stacked panels sharing the time axis (picoseconds, log scale)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cols = read_trajectory_csv(csv_path)
    t = cols["time_ps"]
    # log axis cannot show t = 0; shift by half the first step
    t_plot = t.copy()
    if len(t) > 1 and t[0] <= 0:
        t_plot[0] = 0.5 * t[1]
    with plt.rc_context(PLOT_RC):
        fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(6.0, 5.5))
        for i, c in enumerate(SITE_COLORS, start=1):
            top.plot(t_plot, cols[f"pop{i}"], color=c, label=f"site {i}")
        top.set_ylabel("population")
        top.legend(ncol=3, frameon=False)
        bottom.plot(t_plot, cols["energy_cm1"], color="k", label=r"$\langle H\rangle$")
        bottom.plot(t_plot, cols["ergotropy_cm1"], color="0.5", ls="--", label="ergotropy")
        bottom.set_ylabel(r"energy (cm$^{-1}$)")
        bottom.set_xlabel("time (ps)")
        bottom.legend(frameon=False)
        if len(t) > 1 and np.all(t_plot > 0):
            bottom.set_xscale("log")
        for x in _region_starts(t_plot, cols["region"]):
            for ax in (top, bottom):
                ax.axvline(x, color="0.7", lw=0.8, ls=":")
        fig.savefig(png_path)
        plt.close(fig)
    return Path(png_path)
