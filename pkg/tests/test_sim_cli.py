import csv
import json
import math

import pytest

import mspac.construction as cons
from mspac.cli import EXIT_BUDGET, EXIT_CONFIG, EXIT_OK, main
from mspac.construction import brute_force_weights, parse_profile
from mspac.metrics import key_uniformity_diag
from mspac.pac import DEFAULT_CONV
from mspac.sim import (ConfigError, ExperimentConfig, build_cell, cell_id, profile_name, read_profile,
                       run_trials, simulate_cell)


def write_cfg(path, **kw):
    base = {"schema_version": 1, "n_complex": [4], "snr_db": [15], "q_levels": 3, "list_size": 8,
            "beta": 2, "bler_target": 1e-2, "reliability": {"kind": "BDR", "epsilon": 1e-2},
            "trials": 40, "seed": 5}
    base.update(kw)
    path.write_text(json.dumps(base))
    return str(path)


def run(args):
    return main([str(a) for a in args])


# -- configuration ----------------------------------------------------------

def test_config_defaults_and_roundtrip():
    cfg = ExperimentConfig()
    assert (cfg.q_levels, cfg.list_size, cfg.beta) == (8, 64, 5)
    back = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back == cfg
    inf_cfg = ExperimentConfig.from_dict({"snr_db": ["inf", 10]})
    assert math.isinf(inf_cfg.snr_db[0]) and inf_cfg.to_dict()["snr_db"][0] == "inf"


@pytest.mark.parametrize("bad", [
    {"n_complex": [3]}, {"trials": 0}, {"q_levels": 0}, {"schemes": ["PAC"]},
    {"reliability": {"kind": "SER", "epsilon": 1e-2}}, {"reliability": {"kind": "KDR"}},
    {"epsilon": 1.5}, {"poly": [0, 1]}, {"schema_version": 2}, {"colour": "red"}, {"n_complex": 4},
])
def test_config_rejects(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


def test_cli_config_errors(tmp_path):
    out = tmp_path / "out"
    assert run(["simulate", "--config", tmp_path / "missing.json", "--out-dir", out]) == EXIT_CONFIG
    (tmp_path / "broken.json").write_text("{not json")
    assert run(["bound", "--config", tmp_path / "broken.json", "--out-dir", out]) == EXIT_CONFIG
    cfg = write_cfg(tmp_path / "c.json", trials=-1)
    assert run(["construct", "--config", cfg, "--out-dir", out]) == EXIT_CONFIG
    # simulate before construct: missing profile
    cfg = write_cfg(tmp_path / "d.json")
    assert run(["simulate", "--config", cfg, "--out-dir", out]) == EXIT_CONFIG
    assert run(["simulate", "--config", cfg, "--out-dir", out, "--threads", 0]) == EXIT_CONFIG


def test_profile_mismatch_is_config_error(tmp_path):
    cfg = ExperimentConfig.from_dict({"n_complex": [4], "beta": 1, "q_levels": 2})
    prof = cons.construct_profile(1e-2, 1, 3, DEFAULT_CONV)
    with pytest.raises(ConfigError):
        build_cell(cfg, "MSP", 4, 10.0, prof, "h")
    with pytest.raises(ConfigError):
        build_cell(cfg, "MSPAC", 8, 10.0, prof, "h")


# -- construct / simulate ---------------------------------------------------

@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("small")
    cfg = write_cfg(root / "cfg.json", n_complex=[4, 8], snr_db=[10, 20])
    outs = []
    for name, threads in (("a", 1), ("b", 1), ("c", 8)):
        out = root / name
        assert run(["construct", "--config", cfg, "--out-dir", out, "--threads", threads]) == EXIT_OK
        assert run(["simulate", "--config", cfg, "--out-dir", out, "--threads", threads]) == EXIT_OK
        outs.append(out)
    return cfg, outs


def _files(out):
    return {p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}


def test_outputs_byte_identical(small_run):
    _, (a, b, c) = small_run
    fa = _files(a)
    assert {"results.csv", "results.json"} <= set(fa)
    assert fa == _files(b)
    assert fa == _files(c)


def test_result_table_contents(small_run):
    _, (a, _, _) = small_run
    rows = list(csv.DictReader((a / "results.csv").open()))
    assert len(rows) == 3 * 2 * 2
    cells = {(r["scheme"], r["n_complex"], r["snr_db"]) for r in rows}
    assert len(cells) == len(rows)
    doc = json.loads((a / "results.json").read_text())
    assert doc["tool_version"] and doc["config"]["seed"] == 5
    for r in rows:
        assert len(r["profile_hash"]) == 64 and r["tool_version"] == doc["tool_version"]
        assert float(r["kdr_lo"]) <= float(r["kdr"]) <= float(r["kdr_hi"])
        assert int(r["key_len"]) == sum(int(k) for k in r["level_keys"].split("-"))


def test_seed_override_changes_nothing_structural(small_run, tmp_path):
    cfg, (a, _, _) = small_run
    out = tmp_path / "o"
    assert run(["construct", "--config", cfg, "--out-dir", out]) == EXIT_OK
    assert run(["simulate", "--config", cfg, "--out-dir", out, "--seed", 6]) == EXIT_OK
    doc = json.loads((out / "results.json").read_text())
    assert all(r["seed"] == 6 for r in doc["rows"])


def test_zero_noise_gives_zero_kdr(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", n_complex=[8], snr_db=["inf"], q_levels=4, trials=30)
    out = tmp_path / "o"
    assert run(["construct", "--config", cfg, "--out-dir", out]) == EXIT_OK
    assert run(["simulate", "--config", cfg, "--out-dir", out]) == EXIT_OK
    rows = list(csv.DictReader((out / "results.csv").open()))
    assert len(rows) == 3
    for r in rows:
        assert float(r["kdr"]) == 0.0 and float(r["bdr"]) == 0.0 and int(r["key_len"]) > 0


def test_chunking_is_partition_free():
    cfg = ExperimentConfig.from_dict({"n_complex": [8], "q_levels": 3, "list_size": 4, "beta": 1})
    prof = cons.construct_profile(1e-2, 1, 4, DEFAULT_CONV)
    cell = build_cell(cfg, "MSPAC", 8, 8.0, prof, "h")
    whole = run_trials(cell, 3, 0, 60)
    parts = [run_trials(cell, 3, a, b) for a, b in ((0, 7), (7, 31), (31, 60))]
    assert whole[:3] == tuple(sum(p[i] for p in parts) for i in range(3))
    r1, r4 = simulate_cell(cell, 60, 3, threads=1), simulate_cell(cell, 60, 3, threads=4)
    assert r1 == r4
    assert cell_id("MSPAC", 8, 8.0) != cell_id("MSP", 8, 8.0)


# -- construct examples -----------------------------------------------------

@pytest.mark.parametrize("n_complex", [4, 32])
def test_construct_writes_permutation(tmp_path, n_complex):
    cfg = write_cfg(tmp_path / "c.json", n_complex=[n_complex], beta=5, schemes=["MSPAC"])
    assert run(["construct", "--config", cfg, "--out-dir", tmp_path]) == EXIT_OK
    path = tmp_path / "profiles" / profile_name(2 * n_complex, DEFAULT_CONV, 5)
    prof, digest = read_profile(path)
    assert sorted(prof.order) == list(range(2 * n_complex)) and len(digest) == 64


def test_construct_512(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", n_complex=[256], beta=5, bler_target=1e-3, schemes=["MSPAC"])
    assert run(["construct", "--config", cfg, "--out-dir", tmp_path]) == EXIT_OK
    prof, _ = read_profile(tmp_path / "profiles" / profile_name(512, DEFAULT_CONV, 5))
    assert sorted(prof.order) == list(range(512)) and prof.order[0] == 511
    for k in (1, 40, 300):
        rep = cons.count_min_weight(prof.order[:k], prof.poly, 9)
        assert (rep.w_min, rep.w_min_count) == tuple(prof.prefix_weights[k - 1])


def test_beta_changes_profile_at_64(tmp_path):
    texts = {}
    for beta in (1, 5):
        cfg = write_cfg(tmp_path / f"c{beta}.json", n_complex=[32], beta=beta, schemes=["MSPAC"])
        assert run(["construct", "--config", cfg, "--out-dir", tmp_path]) == EXIT_OK
        texts[beta] = (tmp_path / "profiles" / profile_name(64, DEFAULT_CONV, beta)).read_text()
    assert parse_profile(texts[1]).order != parse_profile(texts[5]).order


# -- bound / enumerate ------------------------------------------------------

def test_bound_command(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", n_complex=[4, 16, 64, 256], snr_db=[10, 20])
    assert run(["bound", "--config", cfg, "--out-dir", tmp_path]) == EXIT_OK
    rows = list(csv.DictReader((tmp_path / "bound.csv").open()))
    assert len(rows) == 2 * 3 * 4
    by = {}
    for r in rows:
        assert float(r["finite_bound"]) < float(r["key_capacity"])
        by.setdefault((r["snr_db"], r["epsilon"]), []).append(float(r["finite_bound"]))
    for vals in by.values():
        assert all(b > a for a, b in zip(vals, vals[1:]))
    for snr in ("10.0", "20.0"):
        eps = sorted({k[1] for k in by if k[0] == snr}, key=float)
        for a, b in zip(eps, eps[1:]):
            assert all(x < y for x, y in zip(by[(snr, a)], by[(snr, b)]))


def test_enumerate_command(capsys, monkeypatch):
    assert run(["enumerate", "--keys", "3,5,6,7,11", "--n-stages", 4, "--brute"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    bf = brute_force_weights([3, 5, 6, 7, 11], DEFAULT_CONV, 4)
    assert (doc["w_min"], doc["w_min_count"]) == (bf.w_min, bf.w_min_count)
    assert doc["brute_force"] == {"w_min": bf.w_min, "w_min_count": bf.w_min_count}
    assert run(["enumerate", "--keys", "1,2", "--n-stages", 3, "--poly", "0"]) == EXIT_CONFIG
    monkeypatch.setattr(cons, "MAX_CONSTRAINED", 0)
    assert run(["enumerate", "--keys", "0,1,2,3,5,9,14,15", "--n-stages", 4]) == EXIT_BUDGET


def test_mspac_keys_look_uniform():
    cfg = ExperimentConfig(n_complex=(32,), snr_db=(20.0,))
    prof = cons.construct_profile(cfg.bler_target, 5, 6, DEFAULT_CONV)
    cell = build_cell(cfg, "MSPAC", 32, 20.0, prof, "")
    *_, keys = run_trials(cell, 17, 0, 3000, keep_keys=True)
    rep = key_uniformity_diag(keys)
    assert keys.shape == (3000, cell.key_len)
    assert not rep.bias_flag and not rep.correlation_flag
