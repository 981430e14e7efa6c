"""Election and quantized-SGD sweeps from the bundled configs.

The election sweep uses the certified 2020 top-two totals for
Washington, D.C. with 0.2% of ballots lost; the SGD sweep uses the
first quantized-gradient setting with batch size sqrt(n).

    python demos/experiment_sweeps.py [--write PREFIX]
"""

import argparse
import json
from pathlib import Path

from smoothdp.cli import run_sweep
from smoothdp.ingest import ExperimentConfig

CONFIGS = Path(__file__).parent / "configs"


def show(name, result):
    print(f"== {name}")
    print(f"{'eps':>6} {'n':>7} {'T':>7} {'kind':>9} {'delta':>12} {'status':>8}")
    for r in result.rows:
        print(f"{r['eps']:>6g} {r['n']:>7} {r['T']:>7} {r['kind']:>9} {r['delta']:>12.4g} {r['status']:>8}")
    for fit in result.metadata["fits"]:
        print(f"  eps={fit['eps']:g}: slope {fit['slope']:.4g} per record, R^2 {fit['r_squared']:.4f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--write", metavar="PREFIX", help="also write PREFIX_<config>.csv/.json")
    args = ap.parse_args()
    for path in sorted(CONFIGS.glob("*.json")):
        result = run_sweep(ExperimentConfig.load(path))
        show(path.stem, result)
        if args.write:
            Path(f"{args.write}_{path.stem}.csv").write_text(result.to_csv())
            Path(f"{args.write}_{path.stem}.json").write_text(json.dumps(result.to_json(), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
