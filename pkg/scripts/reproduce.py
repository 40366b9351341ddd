"""Run the AUV case-study analysis for every bundled scenario.

Writes report.txt, table2.csv and fig6_scenario{1,2}.csv into the output
directory and prints the report. Published probabilities are used when
overrides/published.kv exists (or --published is given).

    python3 scripts/reproduce.py --out results
"""

import argparse
import time
from pathlib import Path

from featmc import casestudy
from featmc.checker import CheckOptions


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--published", type=Path, help="override file (default: overrides/published.kv if present)")
    ap.add_argument("--epsilon", type=float, default=1e-6)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    published = casestudy.load_published(args.published)
    options = CheckOptions(epsilon=args.epsilon, threads=args.threads)
    reports = []
    for sc in casestudy.bundled_scenarios():
        start = time.perf_counter()
        reports.append(casestudy.run_standard_analysis(sc, options, published))
        print(f"# {sc.label}: {time.perf_counter() - start:.1f}s")
    for path in casestudy.write_outputs(reports, args.out):
        print(f"# wrote {path}")
    print((args.out / "report.txt").read_text())


if __name__ == "__main__":
    main()
