"""Empirical key-uniformity diagnostic for generated keys at one operating point.

    python scripts/key_uniformity.py --scheme MSPAC --n-complex 32 --snr-db 20 --keys 10000

Prints the maximum per-bit bias and pairwise bit correlation with their
5-sigma flags.  This is a sanity check on the keys, not a secrecy proof.
"""
import argparse
import sys

from mspac.construction import construct_profile
from mspac.metrics import key_uniformity_diag
from mspac.sim import ExperimentConfig, build_cell, run_trials, scheme_poly


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scheme", default="MSPAC", choices=["MSPAC", "MSP", "SP"])
    ap.add_argument("--n-complex", type=int, default=32)
    ap.add_argument("--snr-db", type=float, default=20.0)
    ap.add_argument("--keys", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    cfg = ExperimentConfig(n_complex=(args.n_complex,), snr_db=(args.snr_db,))
    n_stages = (2 * args.n_complex).bit_length() - 1
    prof = construct_profile(cfg.bler_target, cfg.beta, n_stages, scheme_poly(args.scheme, cfg))
    cell = build_cell(cfg, args.scheme, args.n_complex, args.snr_db, prof, "")
    *_, keys = run_trials(cell, args.seed, 0, args.keys, keep_keys=True)
    rep = key_uniformity_diag(keys)
    print(f"{args.scheme} N={args.n_complex} snr={args.snr_db:g} dB  K={cell.key_len}  keys={rep.n_keys}")
    print(f"max |p - 1/2| = {rep.max_bias:.4f}  flag={rep.bias_flag}")
    print(f"max |corr|    = {rep.max_correlation:.4f}  flag={rep.correlation_flag}")
    return int(rep.bias_flag or rep.correlation_flag)


if __name__ == "__main__":
    sys.exit(run())
