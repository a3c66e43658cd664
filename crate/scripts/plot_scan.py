#!/usr/bin/env python3
"""Plot a decay scan produced by `levyldp ldp-scan`.

Reads one or more scan.csv files (columns epsilon, p_hat, se, eps2_log_p,
minus_I) and draws the normalized log-probability against the variational
reference level, with delta-method error bars. The curves should approach
the dashed reference line as the noise scale shrinks.
"""

import argparse
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_scan(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["epsilon", "p_hat", "se", "eps2_log_p", "minus_I"]
        if reader.fieldnames != expected:
            sys.exit(f"{path}: expected header {','.join(expected)}, got {reader.fieldnames}")
        for row in reader:
            rows.append({k: float(v) for k, v in row.items()})
    if not rows:
        sys.exit(f"{path}: no data rows")
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("scans", nargs="+", help="scan.csv files to plot")
    ap.add_argument("-o", "--out", default="scan.png", help="output image path")
    args = ap.parse_args()

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for path in args.scans:
        rows = read_scan(path)
        eps = [r["epsilon"] for r in rows]
        log_p = [r["eps2_log_p"] for r in rows]
        # Delta method: the standard error of eps * ln(p_hat) is eps * se / p_hat.
        bars = [r["epsilon"] * r["se"] / r["p_hat"] if r["p_hat"] > 0 else 0.0 for r in rows]
        ax.errorbar(eps, log_p, yerr=bars, marker="o", capsize=3, label=path)
        ax.axhline(rows[0]["minus_I"], linestyle="--", linewidth=1.0, color="gray")

    ax.set_xscale("log")
    ax.set_xlabel("noise scale")
    ax.set_ylabel("normalized log probability")
    ax.legend(fontsize=8)
    ax.set_title("Rare-event decay vs variational rate")
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
