"""Scheme comparison: key rate of MSPAC, MSP and SP against SNR at N = 32.

    python scripts/scheme_comparison.py [--config scripts/configs/scheme_comparison.json] [--out-dir results/scheme_comparison]

Builds the rate profiles, runs the Monte Carlo sweep through the CLI and
prints a rate table (one row per SNR, one column per scheme).
"""
import argparse
import csv
import sys
from collections import defaultdict
from pathlib import Path

from mspac.cli import main as cli

HERE = Path(__file__).resolve().parent


def rate_table(results_csv: Path) -> str:
    rows = list(csv.DictReader(results_csv.open()))
    schemes = list(dict.fromkeys(r["scheme"] for r in rows))
    table = defaultdict(dict)
    for r in rows:
        table[int(r["n_complex"]), float(r["snr_db"])][r["scheme"]] = r
    out = ["     N snr_db " + " ".join(f"{s:>24s}" for s in schemes)]
    for n, snr in sorted(table):
        cells = []
        for s in schemes:
            r = table[n, snr].get(s)
            cells.append(f"{float(r['rate_key']):7.4f} (BDR {float(r['bdr']):.1e})" if r else " " * 24)
        out.append(f"{n:6d} {snr:6g} " + " ".join(f"{c:>24s}" for c in cells))
    return "\n".join(out)


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(HERE / "configs" / "scheme_comparison.json"))
    ap.add_argument("--out-dir", default="results/scheme_comparison")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--trials", type=int, default=None, help="override the config's trial count")
    args = ap.parse_args(argv)
    config = args.config
    if args.trials is not None:
        import json
        raw = json.loads(Path(config).read_text())
        raw["trials"] = args.trials
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        config = str(Path(args.out_dir) / "config.json")
        Path(config).write_text(json.dumps(raw, indent=2))
    common = ["--config", config, "--out-dir", args.out_dir, "--threads", str(args.threads)]
    for cmd in ("construct", "simulate"):
        code = cli([cmd, *common])
        if code:
            return code
    print(rate_table(Path(args.out_dir) / "results.csv"))
    return 0


if __name__ == "__main__":
    sys.exit(run())
