#!/usr/bin/env python3
"""Plot R_P, E_K and E_G against r for every CSV in a results directory."""

import argparse
import csv
import pathlib

import matplotlib.pyplot as plt


def load(path):
    cols = {"r": [], "R_P": [], "E_K": [], "E_G": []}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            for key in cols:
                cols[key].append(float(row[key]) if row[key] else float("nan"))
    return cols


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("results", type=pathlib.Path)
    ap.add_argument("-o", "--output", type=pathlib.Path, help="image file; shows a window if omitted")
    args = ap.parse_args()

    files = sorted(p for p in args.results.glob("*.csv") if p.name != "scaling.csv")
    if not files:
        raise SystemExit(f"no convergence CSVs in {args.results}")
    fig, axes = plt.subplots(1, 3, figsize=(14, 4))
    for path in files:
        data = load(path)
        for ax, key in zip(axes, ("R_P", "E_K", "E_G")):
            ax.semilogy(data["r"], data[key], marker="o", ms=3, label=path.stem)
    for ax, key in zip(axes, ("R_P", "E_K", "E_G")):
        ax.set_xlabel("r")
        ax.set_title(key)
        ax.grid(True, which="both", alpha=0.3)
    axes[0].legend()
    fig.tight_layout()
    if args.output:
        fig.savefig(args.output, dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main()
