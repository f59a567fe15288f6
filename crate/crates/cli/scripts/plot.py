"""Plot qpath CSV output. Not part of the test suite.

    qpath bdmc-curve --out bdmc.csv && python plot.py bdmc bdmc.csv
    qpath density-grid --out grid.csv && python plot.py grid grid.csv

Needs pandas and matplotlib.
"""
import sys

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd


def bdmc(df):
    g = df.groupby(["q", "T"])[["log_lower", "log_upper"]].mean().reset_index()
    fig, ax = plt.subplots()
    for q, sub in g.groupby("q"):
        line, = ax.plot(sub["T"], sub["log_lower"], marker="o", label=f"q={q}")
        ax.plot(sub["T"], sub["log_upper"], marker="s", ls="--", color=line.get_color())
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xscale("log")
    ax.set_xlabel("T")
    ax.set_ylabel("log Z estimate (lower solid, upper dashed)")
    ax.legend()
    return fig


def grid(df):
    qs = sorted(df["q"].unique())
    fig, axes = plt.subplots(1, len(qs), figsize=(3 * len(qs), 4), sharey=True)
    for ax, q in zip(np.atleast_1d(axes), qs):
        sub = df[df["q"] == q]
        for k, (beta, rows) in enumerate(sub.groupby("beta")):
            dens = np.exp(rows["log_density"])
            ax.plot(rows["z"], k + dens / dens.max() * 1.5, color=plt.cm.viridis(beta))
        ax.set_title(f"q={q}")
        ax.set_xlabel("z")
    return fig


if __name__ == "__main__":
    kind, path = sys.argv[1], sys.argv[2]
    fig = {"bdmc": bdmc, "grid": grid}[kind](pd.read_csv(path))
    fig.tight_layout()
    fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=120)
