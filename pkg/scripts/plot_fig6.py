"""Plot fig6_scenario*.csv (k,max,avg) produced by `featmc reproduce`.

Needs matplotlib, which the package itself does not depend on.

    python3 scripts/plot_fig6.py results/fig6_scenario1.csv results/fig6_scenario2.csv -o fig6.png
"""

import argparse
from pathlib import Path

from featmc.casestudy import read_series_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv", nargs="+", type=Path)
    ap.add_argument("-o", "--output", type=Path, default=Path("fig6.png"))
    args = ap.parse_args()

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise SystemExit("plot_fig6.py needs matplotlib (pip install matplotlib)") from None

    fig, axes = plt.subplots(1, len(args.csv), figsize=(5 * len(args.csv), 3.5), squeeze=False)
    for ax, path in zip(axes[0], args.csv):
        rows = read_series_csv(path)
        ks = [int(r["k"]) for r in rows]
        ax.plot(ks, [float(r["max"]) for r in rows], label="max")
        ax.plot(ks, [float(r["avg"]) for r in rows], label="avg", linestyle="--")
        ax.set_title(path.stem)
        ax.set_xlabel("k (steps)")
        ax.set_ylabel("P[F<=k unsafe] from safe states")
        ax.set_ylim(0, 1)
        ax.legend()
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
