"""Key rate against block length at 20 dB next to the finite-length bound and C_K.

    python scripts/rate_vs_blocklength.py [--config scripts/configs/rate_vs_blocklength.json] [--out-dir results/rate_vs_blocklength]

Runs construct, simulate and bound through the CLI and prints, per N, the
achieved MSPAC rate with its KDR interval, the bound for each epsilon and C_K.
"""
import argparse
import csv
import json
import sys
from pathlib import Path

from mspac.cli import main as cli

HERE = Path(__file__).resolve().parent


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(HERE / "configs" / "rate_vs_blocklength.json"))
    ap.add_argument("--out-dir", default="results/rate_vs_blocklength")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)
    common = ["--config", args.config, "--out-dir", args.out_dir, "--threads", str(args.threads)]
    for cmd in ("construct", "simulate", "bound"):
        code = cli([cmd, *common])
        if code:
            return code
    out = Path(args.out_dir)
    sims = {(r["scheme"], float(r["snr_db"]), int(r["n_complex"])): r
            for r in csv.DictReader((out / "results.csv").open())}
    bounds = list(csv.DictReader((out / "bound.csv").open()))
    eps_list = sorted({float(b["epsilon"]) for b in bounds}, reverse=True)
    header = ["scheme", "snr_db", "N", "R_K", "KDR", "KDR_hi"] + [f"bound@{e:g}" for e in eps_list] + ["C_K"]
    print(" ".join(f"{h:>12s}" for h in header))
    for (scheme, snr, n), r in sorted(sims.items()):
        bn = {float(b["epsilon"]): b for b in bounds
              if int(b["n_complex"]) == n and float(b["snr_db"]) == snr}
        vals = [scheme, snr, n, float(r["rate_key"]), float(r["kdr"]), float(r["kdr_hi"])]
        if bn:  # no bound for the noiseless source
            vals += [float(bn[e]["finite_bound"]) for e in eps_list]
            vals.append(float(next(iter(bn.values()))["key_capacity"]))
        print(" ".join(f"{v:>12s}" if isinstance(v, str) else f"{v:12d}" if isinstance(v, int)
                       else f"{v:12.4g}" for v in vals))
    meta = json.loads((out / "results.json").read_text())
    print(f"profiles: {', '.join(meta['profiles'])}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
