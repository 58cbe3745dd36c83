"""Command line entry point: ``mspac {construct,simulate,bound,enumerate}``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .construction import (EnumerationBudgetError, ProfileFormatError, brute_force_weights,
                           construct_profile, count_min_weight)
from .metrics import finite_bound, key_capacity
from .pac import ConvPoly
from .sim import (ConfigError, ExperimentConfig, ResultRow, build_cell, profile_name, read_profile,
                  result_columns, scheme_poly, simulate_cell, write_profile)
from .source import SourceParams

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET = 0, 2, 3


def _write_table(out_dir: Path, stem: str, columns: list[str], rows: list[dict], meta: dict) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    (out_dir / f"{stem}.csv").write_text(buf.getvalue())
    doc = {"tool_version": __version__, **meta, "rows": rows}
    (out_dir / f"{stem}.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _profile_dir(cfg: ExperimentConfig, out_dir: Path) -> Path:
    p = Path(cfg.profile_dir)
    return p if p.is_absolute() else out_dir / p


def _construct_job(args):
    cfg, n_complex, coeffs = args
    n_stages = (2 * n_complex).bit_length() - 1
    return construct_profile(cfg.bler_target, cfg.beta, n_stages, ConvPoly(coeffs),
                             literal_init=cfg.literal_init)


def cmd_construct(cfg: ExperimentConfig, out_dir: Path, threads: int) -> dict[str, str]:
    pdir = _profile_dir(cfg, out_dir)
    pdir.mkdir(parents=True, exist_ok=True)
    polys = sorted({scheme_poly(s, cfg).coeffs for s in cfg.schemes})
    jobs = [(cfg, n, c) for n in cfg.n_complex for c in polys]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            profiles = list(pool.map(_construct_job, jobs))
    else:
        profiles = [_construct_job(j) for j in jobs]
    hashes = {}
    for prof in profiles:
        name = profile_name(prof.block_len, prof.poly, prof.beta)
        hashes[name] = write_profile(pdir / name, prof)
    return hashes


def cmd_simulate(cfg: ExperimentConfig, out_dir: Path, threads: int) -> list[ResultRow]:
    pdir = _profile_dir(cfg, out_dir)
    rows = []
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for scheme in cfg.schemes:
            poly = scheme_poly(scheme, cfg)
            for n in cfg.n_complex:
                try:
                    profile, digest = read_profile(pdir / profile_name(2 * n, poly, cfg.beta))
                except ProfileFormatError as exc:
                    raise ConfigError(str(exc)) from exc
                for snr in cfg.snr_db:
                    cell = build_cell(cfg, scheme, n, snr, profile, digest)
                    res = simulate_cell(cell, cfg.trials, cfg.seed, threads, executor=pool)
                    rows.append(ResultRow.from_result(cell, res, cfg, cfg.seed))
    finally:
        if pool is not None:
            pool.shutdown()
    meta = {"command": "simulate", "config": cfg.to_dict(),
            "profiles": sorted({r.profile_hash for r in rows})}
    _write_table(out_dir, "results", result_columns(), [r.__dict__ for r in rows], meta)
    return rows


def cmd_bound(cfg: ExperimentConfig, out_dir: Path) -> list[dict]:
    rows = []
    for snr in cfg.snr_db:
        if math.isinf(snr):
            continue
        params = SourceParams.from_snr_db(snr, cfg.sigma_h2)
        c_k = key_capacity(params)
        for eps in cfg.bound_epsilons:
            for n in cfg.n_complex:
                rows.append({"snr_db": snr, "epsilon": eps, "n_complex": n, "key_capacity": c_k,
                             "finite_bound": finite_bound(n, eps, params)})
    cols = ["snr_db", "epsilon", "n_complex", "key_capacity", "finite_bound"]
    _write_table(out_dir, "bound", cols, rows, {"command": "bound", "config": cfg.to_dict()})
    return rows


def cmd_enumerate(keys: list[int], n_stages: int, poly: ConvPoly, brute: bool) -> dict:
    rep = count_min_weight(keys, poly, n_stages)
    out = {"keys": keys, "n_stages": n_stages, "poly": str(poly), "w_min": rep.w_min,
           "w_min_count": rep.w_min_count, "per_coset": {str(k): v for k, v in rep.per_coset.items()}}
    if brute:
        bf = brute_force_weights(keys, poly, n_stages)
        out["brute_force"] = {"w_min": bf.w_min, "w_min_count": bf.w_min_count}
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mspac", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("construct", "simulate", "bound"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out-dir", default="results")
        p.add_argument("--seed", type=int, default=None, help="override the config's master seed")
        p.add_argument("--threads", type=int, default=1)
    p = sub.add_parser("enumerate", help="minimum-weight enumeration of one key set")
    p.add_argument("--keys", required=True, help="comma-separated key indices")
    p.add_argument("--n-stages", type=int, required=True)
    p.add_argument("--poly", default="1011011", help="coefficients c_0..c_d as a bit string")
    p.add_argument("--brute", action="store_true", help="also run the exhaustive oracle")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "enumerate":
            keys = [int(k) for k in args.keys.split(",") if k]
            poly = ConvPoly(tuple(int(c) for c in args.poly))
            print(json.dumps(cmd_enumerate(keys, args.n_stages, poly, args.brute), indent=2))
            return EXIT_OK
        cfg = ExperimentConfig.load(args.config)
        if args.seed is not None:
            cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "construct":
            for name, digest in cmd_construct(cfg, out_dir, args.threads).items():
                print(f"{name} {digest}")
        elif args.command == "simulate":
            for row in cmd_simulate(cfg, out_dir, args.threads):
                print(f"{row.scheme:6s} N={row.n_complex:<4d} snr={row.snr_db:<5} R_K={row.rate_key:.4f} "
                      f"KDR={row.kdr:.3e} BDR={row.bdr:.3e}")
        else:
            for row in cmd_bound(cfg, out_dir):
                print(f"snr={row['snr_db']} eps={row['epsilon']:.0e} N={row['n_complex']:<5d} "
                      f"C_K={row['key_capacity']:.4f} bound={row['finite_bound']:.4f}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EnumerationBudgetError as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
