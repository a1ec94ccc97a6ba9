import json
from pathlib import Path

import numpy as np
import pytest

from svarmsh import cli
from svarmsh.config import (
    RunConfig,
    data_to_csv_text,
    default_truth,
    load_config,
    load_csv,
    parse_csv_text,
    parse_rows,
)
from svarmsh.errors import DataFormatError, InsufficientDataError
from svarmsh.gibbs import SamplerConfig
from svarmsh.inference import sddr_homoskedasticity, sddr_joint_identification
from svarmsh.model import ModelParameters
from svarmsh.store import load_store

SMALL = SamplerConfig(n_burn=100, n_draws=300, n_chains=2)


@pytest.fixture(scope="module")
def estimated(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    cli.cmd_simulate(default_truth(), 300, 7, root / "sim")
    cfg = RunConfig(data_path=root / "sim" / "data.csv", p=1, M=2, sampler=SMALL, out_dir=root / "est", seed=3)
    store, bundle = cli.cmd_estimate(cfg)
    return root, store, bundle


# --------------------------------------------------------------------------
# CSV ingestion


def test_six_variable_header_preserved(tmp_path):
    names = ["p", "gdp", "cp", "FF", "m", "uc"]
    rows = np.random.default_rng(0).normal(size=(60, 6))
    path = tmp_path / "d.csv"
    path.write_text(",".join(names) + "\n" + "\n".join(",".join(repr(float(v)) for v in r) for r in rows) + "\n")
    data = load_csv(path)
    assert data.N == 6 and data.names == tuple(names)
    assert np.array_equal(data.values, rows.T)


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("", "empty"),
        ("a,b\n", "no observations"),
        ("a,b\n1,2\n3\n", "fields, header has 2"),
        ("a,b\n1,x\n", "non-numeric"),
    ],
)
def test_distinct_parse_errors(text, fragment):
    with pytest.raises(DataFormatError) as info:
        parse_csv_text(text)
    assert fragment in str(info.value)


def test_nan_names_row_and_column():
    with pytest.raises(DataFormatError) as info:
        parse_csv_text("a,b\n1,2\n3,NaN\n")
    assert info.value.row == 3 and info.value.column == "b"  # file line, header is line 1


def test_too_few_rows_for_lag_order():
    text = "a,b\n" + "\n".join(f"{i},{i * 2}" for i in range(5)) + "\n"
    with pytest.raises(InsufficientDataError):
        parse_csv_text(text, p=2)  # needs N(p+1)+p = 8 rows


def test_csv_round_trip_is_lossless(tmp_path):
    data, _ = cli.cmd_simulate(default_truth(), 80, 1, tmp_path)
    back = load_csv(tmp_path / "data.csv")
    assert np.array_equal(back.values, data.values) and back.names == data.names
    assert data_to_csv_text(back) == (tmp_path / "data.csv").read_text()


# --------------------------------------------------------------------------
# Simulation


def test_simulate_rejects_short_sample(tmp_path):
    N = 6
    A = np.zeros((N, 1 + 4 * N))
    params = ModelParameters(np.eye(N), A, np.ones(N), np.full((1, N), 2.0), np.array([[0.9, 0.1], [0.1, 0.9]]),
                             1.0, 1.0, 1.0)
    with pytest.raises(InsufficientDataError):
        cli.cmd_simulate(params, 50, 0, tmp_path)


def test_simulate_is_seeded(tmp_path):
    cli.cmd_simulate(default_truth(), 100, 5, tmp_path / "a")
    cli.cmd_simulate(default_truth(), 100, 5, tmp_path / "b")
    for name in ("data.csv", "truth.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    truth = json.loads((tmp_path / "a" / "truth.json").read_text())
    assert set(truth["states"]) <= {1, 2} and len(truth["states"]) == 100


# --------------------------------------------------------------------------
# Configuration


def test_config_file_grammar(tmp_path):
    (tmp_path / "run.ini").write_text(
        "[data]\npath = d.csv\nlags = 2\nstates = 3\n"
        "[scheme]\npreset = money_interest_rate\nrestricted_rows = 4\n"
        "[prior]\nb_omega = 2.5\npersistence = 1, 1, 1, 1, 1, 1\n"
        "[sampler]\nn_draws = 100\nfixed_blocks = shrinkage, transition\n"
        "[output]\ndir = out\n[run]\nseed = 42\n"
    )
    cfg = load_config(tmp_path / "run.ini")
    assert cfg.data_path == tmp_path / "d.csv" and cfg.p == 2 and cfg.M == 3
    assert cfg.restricted_rows == (4,)
    assert cfg.prior.b_omega == 2.5 and cfg.prior.persistence == (1.0,) * 6
    assert cfg.sampler.fixed_blocks == {"shrinkage", "transition"}
    assert cfg.sampler_config().seed == 42
    assert cfg.scheme(6).zero_mask().sum() == 4


def test_config_rejects_unknown_keys(tmp_path):
    (tmp_path / "bad.ini").write_text("[sampler]\nn_drawz = 5\n")
    with pytest.raises(ValueError):
        load_config(tmp_path / "bad.ini")
    with pytest.raises(ValueError):
        RunConfig(p=0)


def test_parse_rows():
    assert parse_rows("all") is None and parse_rows("") is None
    assert parse_rows("4") == (4,) and parse_rows("1, 3") == (1, 3)


# --------------------------------------------------------------------------
# Estimation and reports


def test_estimate_writes_all_blocks(estimated):
    root, store, bundle = estimated
    text = (root / "est" / "reports" / "summary.csv").read_text()
    for token in ("A0:a21", "A0:a12", "mu[1]", "A1[2,2]", "lambda1[1]", "omega[2,2]", "P[1,1]", "gamma_alpha"):
        assert token in text
    assert (root / "est" / "reports" / "relative_variances.csv").exists()
    probs = (root / "est" / "reports" / "state_probs.csv").read_text().splitlines()
    assert len(probs) == 1 + 300
    assert load_store(root / "est").n_draws == store.n_draws


def test_single_state_summary_omits_relative_variances(tmp_path):
    cli.cmd_simulate(default_truth(), 150, 2, tmp_path / "sim")
    cfg = RunConfig(data_path=tmp_path / "sim" / "data.csv", M=1, sampler=SMALL, out_dir=tmp_path / "est")
    _, bundle = cli.cmd_estimate(cfg)
    assert "identification through heteroskedasticity unavailable" in bundle["text"]
    assert not (tmp_path / "est" / "reports" / "relative_variances.csv").exists()
    assert "omega" not in (tmp_path / "est" / "reports" / "summary.csv").read_text()


def test_estimate_rerun_is_byte_identical(estimated, tmp_path):
    root, _, _ = estimated
    cfg = RunConfig(data_path=root / "sim" / "data.csv", p=1, M=2, sampler=SMALL, out_dir=tmp_path / "again", seed=3)
    cli.cmd_estimate(cfg)
    for f in sorted((root / "est").rglob("*")):
        if f.is_file():
            rel = f.relative_to(root / "est")
            assert (tmp_path / "again" / rel).read_bytes() == f.read_bytes(), rel


# --------------------------------------------------------------------------
# Hypotheses and density ratios


def test_hypothesis_expansion():
    hs = cli.parse_hypotheses(["identification:all-pairs"], 3, 2)
    assert [h.equations for h in hs] == [(1, 2), (1, 3), (2, 3)]
    joint = cli.parse_hypotheses(["homoskedasticity:joint:all"], 3, 2)
    assert len(joint) == 1 and joint[0].label() == "H[{1,2,3}]"
    assert len(cli.parse_hypotheses(["homoskedasticity:each"], 3, 2)) == 3
    assert cli.parse_hypotheses(["pair:3:1,2"], 3, 3)[0].state == 3
    for bad in ("nonsense", "identification:1", "pair:2:1,1", "homoskedasticity:5"):
        with pytest.raises(ValueError):
            cli.parse_hypotheses([bad], 3, 2)


def test_sddr_command_is_thin_wrapper(estimated, tmp_path):
    _, store, _ = estimated
    results = cli.cmd_sddr(store, ["identification:1,2", "homoskedasticity:2"], tmp_path)
    direct = [sddr_joint_identification(store, 1, 2), sddr_homoskedasticity(store, 2)]
    for r, d in zip(results, direct):
        assert r.log_sddr == d.log_sddr and r.nse == d.nse
    saved = json.loads((tmp_path / "sddr.json").read_text())
    assert saved["results"][0]["log_sddr"] == direct[0].log_sddr


def test_mdd_single_scheme_and_mismatch(estimated, tmp_path):
    root, _, _ = estimated
    res = cli.cmd_mdd([("base", root / "est")], 1, 2000, tmp_path / "one")
    lines = (tmp_path / "one" / "mdd.csv").read_text().splitlines()
    assert len(res) == 1 and len(lines) == 2 and "*" in lines[1]
    cli.cmd_simulate(default_truth(), 300, 99, tmp_path / "sim2")
    cfg = RunConfig(data_path=tmp_path / "sim2" / "data.csv", sampler=SMALL, out_dir=tmp_path / "est2")
    cli.cmd_estimate(cfg)
    with pytest.raises(ValueError):
        cli.cmd_mdd([("a", root / "est"), ("b", tmp_path / "est2")], 1, 2000, tmp_path / "two")


# --------------------------------------------------------------------------
# Identification and comparison


def test_identify_proportional_lambda_file(tmp_path):
    path = tmp_path / "lam.csv"
    path.write_text("1,2,4\n3,6,12\n")
    assert cli.main(["identify", "--lambdas", str(path), "--out", str(tmp_path / "o")]) == 0
    d = json.loads((tmp_path / "o" / "identification.json").read_text())
    assert d["verdicts"] == ["not established"] * 3
    assert cli.main(["identify", "--lambdas", str(path), "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "o" / "identification.json").read_bytes() == (tmp_path / "p" / "identification.json").read_bytes()


def test_identify_distinct_store(estimated):
    _, store, _ = estimated
    d = cli.cmd_identify(store.lambdas().mean(axis=0), None, store=store)
    assert d["verdicts"] == ["unique", "unique"]
    assert d["sddr_cross_reference"][0]["hypothesis"]["label"] == "U[1,2]"


def test_identify_single_state(tmp_path):
    d = cli.cmd_identify(np.array([[1.0, 2.0]]), None)
    assert d["reason"]


def test_compare_reports_coverage(estimated):
    root, store, _ = estimated
    truth = json.loads((root / "sim" / "truth.json").read_text())
    header, rows, extra = cli.cmd_compare(store, truth)
    assert header[0] == "parameter" and len(rows) == 2 + 2 + 2 + 4 + 2 + 4
    assert 0 <= extra["coverage"] <= 1 and extra["state_accuracy"] > 0.8


def test_main_reports_errors(tmp_path, capsys):
    assert cli.main(["estimate", "--data", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "o")]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_verbs_end_to_end(tmp_path):
    sim, est = tmp_path / "sim", tmp_path / "est"
    assert cli.main(["simulate", "--seed", "4", "--periods", "200", "--out", str(sim)]) == 0
    assert cli.main(["estimate", "--data", str(sim / "data.csv"), "--seed", "4", "--chains", "1",
                     "--draws", "200", "--burn", "50", "--out", str(est)]) == 0
    assert cli.main(["sddr", "--store", str(est)]) == 0
    assert cli.main(["mdd", "--store", f"unrestricted={est}", "--importance", "1000"]) == 0
    assert cli.main(["compare", "--store", str(est), "--truth", str(sim / "truth.json")]) == 0
    assert (est / "reports" / "sddr.csv").exists() and (est / "reports" / "mdd.csv").exists()
