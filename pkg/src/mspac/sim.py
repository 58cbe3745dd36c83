"""Monte Carlo driver: configuration, per-cell setup and reproducible trial loops."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .channel import LevelChannel, level_channels
from .construction import RateProfile, format_profile, parse_profile, select_rates
from .decoder import multistage_decode
from .llr import PosteriorParams
from .metrics import SimResult
from .pac import DEFAULT_POLY, ConvPoly, LevelCode, encode_level
from .source import (QuantizerSpec, SourceParams, build_quantizer, noiseless_observations,
                     quantize_and_label, sample_observations)

SCHEMA_VERSION = 1
SCHEMES = ("MSPAC", "MSP", "SP")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """One JSON document describing a sweep; ``snr_db`` may contain "inf" (noiseless)."""

    n_complex: tuple[int, ...] = (32,)
    snr_db: tuple[float, ...] = (10.0, 15.0, 20.0)
    sigma_h2: float = 1.0
    q_levels: int = 8
    list_size: int = 64
    beta: int = 5
    bler_target: float = 1e-3
    reliability_kind: str = "BDR"
    epsilon: float = 1e-2
    bound_epsilons: tuple[float, ...] = (3e-2, 3e-3, 3e-4)
    poly: tuple[int, ...] = DEFAULT_POLY
    literal_init: bool = False
    trials: int = 1000
    seed: int = 0
    schemes: tuple[str, ...] = SCHEMES
    profile_dir: str = "profiles"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        for n in self.n_complex:
            if n < 1 or (2 * n) & (2 * n - 1):
                raise ConfigError(f"N = {n}: 2N must be a power of two")
        if not 1 <= self.q_levels <= 12:
            raise ConfigError("q_levels must lie in [1, 12]")
        if self.list_size < 1 or self.beta < 1:
            raise ConfigError("list_size and beta must be >= 1")
        if self.reliability_kind not in ("KDR", "BDR"):
            raise ConfigError(f"reliability kind must be KDR or BDR, got {self.reliability_kind!r}")
        if not 0 < self.epsilon < 1 or not 0 < self.bler_target < 1:
            raise ConfigError("epsilon and bler_target must lie in (0, 1)")
        if any(not 0 < e < 1 for e in self.bound_epsilons):
            raise ConfigError("bound epsilons must lie in (0, 1)")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise ConfigError(f"unknown schemes {bad}")
        try:
            ConvPoly(self.poly)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        rel = raw.pop("reliability", None)
        if rel is not None:
            if not isinstance(rel, dict) or set(rel) != {"kind", "epsilon"}:
                raise ConfigError("reliability must be {\"kind\": ..., \"epsilon\": ...}")
            raw["reliability_kind"], raw["epsilon"] = rel["kind"], rel["epsilon"]
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}")
        for key in ("n_complex", "snr_db", "bound_epsilons", "poly", "schemes"):
            if key in raw:
                if not isinstance(raw[key], list):
                    raise ConfigError(f"{key} must be a list")
                raw[key] = tuple(raw[key])
        if "snr_db" in raw:
            raw["snr_db"] = tuple(math.inf if str(s).lower() == "inf" else float(s) for s in raw["snr_db"])
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["snr_db"] = ["inf" if math.isinf(s) else s for s in self.snr_db]
        for key in ("n_complex", "bound_epsilons", "poly", "schemes"):
            out[key] = list(out[key])
        return out

    @property
    def conv(self) -> ConvPoly:
        return ConvPoly(self.poly)


def scheme_poly(scheme: str, cfg: ExperimentConfig) -> ConvPoly:
    return cfg.conv if scheme == "MSPAC" else ConvPoly.identity()


# -- profiles on disk -------------------------------------------------------

def profile_name(block_len: int, poly: ConvPoly, beta: int) -> str:
    return f"profile_{block_len}_c{poly}_b{beta}.txt"


def write_profile(path, profile: RateProfile) -> str:
    text = format_profile(profile, __version__)
    Path(path).write_text(text)
    return hashlib.sha256(text.encode()).hexdigest()


def read_profile(path) -> tuple[RateProfile, str]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"missing profile {path}; run `construct` first") from exc
    return parse_profile(data.decode()), hashlib.sha256(data).hexdigest()


# -- cells ------------------------------------------------------------------

@dataclass(frozen=True)
class Cell:
    """Everything a worker needs to run trials of one (scheme, N, SNR) point."""

    scheme: str
    n_complex: int
    snr_db: float
    cell_id: int
    codes: tuple[LevelCode, ...]
    poly: ConvPoly
    spec: QuantizerSpec
    pp: PosteriorParams
    params: SourceParams | None  # None for the noiseless source
    sigma_h2: float
    list_size: int
    chained: bool
    profile_hash: str
    channels: tuple[LevelChannel, ...] = field(default=(), repr=False)

    @property
    def key_len(self) -> int:
        return sum(c.n_key for c in self.codes)

    @property
    def rate_key(self) -> float:
        return self.key_len / self.n_complex


def cell_id(scheme: str, n_complex: int, snr_db: float) -> int:
    digest = hashlib.sha256(f"{scheme}|{n_complex}|{snr_db!r}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def source_for(snr_db: float, sigma_h2: float):
    """(SourceParams or None, quantizer marginal variance, posterior params)."""
    if math.isinf(snr_db):
        return None, sigma_h2 / 2.0, PosteriorParams.noiseless()
    params = SourceParams.from_snr_db(snr_db, sigma_h2)
    return params, params.marginal_variance, PosteriorParams.from_source(params)


def build_cell(cfg: ExperimentConfig, scheme: str, n_complex: int, snr_db: float,
               profile: RateProfile, profile_hash: str) -> Cell:
    block_len = 2 * n_complex
    if profile.block_len != block_len:
        raise ConfigError(f"profile block length {profile.block_len} != 2N = {block_len}")
    poly = scheme_poly(scheme, cfg)
    if profile.poly != poly:
        raise ConfigError(f"profile polynomial {profile.poly} does not match scheme {scheme} ({poly})")
    params, var, pp = source_for(snr_db, cfg.sigma_h2)
    spec = build_quantizer(cfg.q_levels, var)
    chained = scheme != "SP"
    if params is None:
        chans = tuple(LevelChannel(1.0, 0.0) for _ in range(cfg.q_levels))
    else:
        chans = tuple(level_channels(spec, pp, chained=chained))
    codes = tuple(select_rates(profile, chans, (cfg.reliability_kind, cfg.epsilon)))
    return Cell(scheme, n_complex, snr_db, cell_id(scheme, n_complex, snr_db), codes, poly, spec, pp,
                params, cfg.sigma_h2, cfg.list_size, chained, profile_hash, chans)


def trial_rng(seed: int, cid: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, cid, trial]))


def run_trial(cell: Cell, rng: np.random.Generator):
    """One key-generation round; returns (s, s_hat, n_impossible)."""
    if cell.params is None:
        obs = noiseless_observations(cell.sigma_h2, cell.n_complex, rng)
    else:
        obs = sample_observations(cell.params, cell.n_complex, rng)
    labels = quantize_and_label(obs.alice, cell.spec)
    f_all, keys = [], []
    for q, code in enumerate(cell.codes):
        _, f, s = encode_level(labels[:, q], cell.poly, code)
        f_all.append(f)
        keys.append(s)
    s = np.concatenate(keys).astype(np.uint8)
    s_hat, stages = multistage_decode(obs.bob, f_all, cell.codes, cell.poly, cell.spec, cell.pp,
                                      cell.list_size, chained=cell.chained)
    return s, s_hat, sum(st.impossible for st in stages)


def run_trials(cell: Cell, seed: int, start: int, stop: int, keep_keys: bool = False):
    """Partial sums over trials [start, stop): (block errors, bit errors, impossible, keys)."""
    block = bits = imp = 0
    kept = []
    for t in range(start, stop):
        s, s_hat, n_imp = run_trial(cell, trial_rng(seed, cell.cell_id, t))
        errs = int(np.count_nonzero(s != s_hat))
        block += errs > 0
        bits += errs
        imp += n_imp
        if keep_keys:
            kept.append(s)
    return block, bits, imp, (np.array(kept, dtype=np.uint8) if keep_keys else None)


def _chunks(trials: int, threads: int) -> list[tuple[int, int]]:
    size = max(1, math.ceil(trials / (4 * max(threads, 1))))
    return [(a, min(a + size, trials)) for a in range(0, trials, size)]


def _run_chunk(args):
    cell, seed, a, b = args
    return run_trials(cell, seed, a, b)[:3]


def simulate_cell(cell: Cell, trials: int, seed: int, threads: int = 1,
                  executor: ProcessPoolExecutor | None = None) -> SimResult:
    """Aggregate ``trials`` rounds; sums are order-free, so any partition gives the same result."""
    jobs = [(cell, seed, a, b) for a, b in _chunks(trials, threads)]
    if threads <= 1 and executor is None:
        parts = [_run_chunk(j) for j in jobs]
    elif executor is not None:
        parts = list(executor.map(_run_chunk, jobs))
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    block, bits, imp = (sum(p[i] for p in parts) for i in range(3))
    return SimResult(cell.rate_key, trials, cell.key_len, block, bits, imp)


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    n_complex: int
    snr_db: float
    rate_key: float
    key_len: int
    level_keys: str
    trials: int
    kdr: float
    kdr_lo: float
    kdr_hi: float
    bdr: float
    bdr_lo: float
    bdr_hi: float
    impossible: int
    target: str
    profile_hash: str
    seed: int
    tool_version: str

    @classmethod
    def from_result(cls, cell: Cell, res: SimResult, cfg: ExperimentConfig, seed: int) -> "ResultRow":
        klo, khi = res.kdr_ci
        blo, bhi = res.bdr_ci
        return cls(cell.scheme, cell.n_complex, cell.snr_db, res.rate_key, res.key_len,
                   "-".join(str(c.n_key) for c in cell.codes), res.trials, res.kdr, klo, khi,
                   res.bdr, blo, bhi, res.impossible, f"{cfg.reliability_kind}<={cfg.epsilon!r}",
                   cell.profile_hash, seed, __version__)


def result_columns() -> list[str]:
    return [f.name for f in dataclasses.fields(ResultRow)]
