"""Largest MSE against overall compression rate, coupled vs uncoupled.

Reads a sweep CSV written by

    scoamp run --config configs/desk.json --compare --out results/desk_sweep.csv

and draws one Monte-Carlo curve per (L, W) (tuned damping, trial mean)
together with the state-evolution prediction.  Nothing is recomputed: the
CSV carries everything the figure needs.

    python demos/waterfall_plot.py results/desk_sweep.csv results/waterfall.png
"""

import sys
from collections import defaultdict

import numpy as np

from scoamp.harness import read_csv


def curves(rows):
    """{(L, W): (overall_rate, mc_mean, se)} over the tuned-damping rows."""
    picked = defaultdict(dict)
    for r in rows:
        if r["best_zeta"] and r["statistic"] in ("largest_mse_mean", "se_largest_mse"):
            picked[(r["L"], r["W"], r["overall_rate"])][r["statistic"]] = r["value"]
    out = defaultdict(list)
    for (L, W, rate), stats in sorted(picked.items()):
        out[(L, W)].append((rate, stats["largest_mse_mean"], stats["se_largest_mse"]))
    return {k: np.array(v) for k, v in out.items()}


def main(csv_path, png_path=None):
    data = curves(read_csv(csv_path))
    for (L, W), arr in data.items():
        print(f"(L, W) = ({L}, {W})")
        print("  overall rate   MC largest MSE [dB]   SE [dB]")
        for rate, mc, se in arr:
            print(f"  {rate:12.4f}   {10 * np.log10(mc):19.2f}   {10 * np.log10(se):7.2f}")

    if png_path is None:
        return
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for (L, W), arr in data.items():
        label = "uncoupled" if W == 0 else f"coupled (L={L}, W={W})"
        line, = ax.plot(arr[:, 0], 10 * np.log10(arr[:, 1]), "o-", label=f"{label}, OAMP")
        ax.plot(arr[:, 0], 10 * np.log10(arr[:, 2]), "--", color=line.get_color(),
                label=f"{label}, SE")
    ax.set_xlabel("overall compression rate (1 + W/L) delta")
    ax.set_ylabel("largest MSE [dB]")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    print(f"wrote {png_path}")


if __name__ == "__main__":
    main(*sys.argv[1:3])
