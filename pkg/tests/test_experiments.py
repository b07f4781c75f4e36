import csv
import io
import json
import math
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from restsens.cli import main
from restsens.experiments import (
    ConfigError,
    RealExpr,
    emit_report,
    parse_config,
    payload_bytes,
    run_experiment,
    serialize_config,
)
from restsens.suite import ENTRIES

F = Fraction
CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.ini"))
SHIFT = "[system]\nkind = shift\np = 1/2, 1/2\n"


def cfg(body, system=SHIFT, **kw):
    return parse_config(f"{system}\n[experiment]\n{body}", **kw)


def test_defaults_filled():
    c = cfg("kind = check-rps\nseed = 3\ndelta = 1/2\nrate = 1/log(2)\n")
    assert c.kind == "check-rps" and c.seed == 3
    assert c.params["pairs"] > 0 and c.params["pairing"] == "grid"
    assert c.params["delta"] == (F(1, 2),)
    assert c.system.p.probabilities == (F(1, 2), F(1, 2)) and not c.system.two_sided


def test_dyadic_grid_and_stage_grammar():
    c = cfg("kind = check-rs\nseed = 0\ndelta = 1/2\nrate = 2\neps_grid = dyadic:2..4\n")
    assert c.params["eps_grid"] == (F(1, 4), F(1, 8), F(1, 16))
    r = cfg("kind = witness\nseed = 0\ndelta = 1/100\nrate = 1\n",
            system="[system]\nkind = rank-one\nw0 = 1/3\nperiod = 2|0,1|1/3,2/3 ; 3|0,1,0\n")
    assert r.kind == "witness-rankone-failure"
    st1, st2 = r.system.spec.period
    assert st1.spacers == (0, 1) and st1.proportions == (F(1, 3), F(2, 3)) and st2.cuts == 3


@pytest.mark.parametrize("system,body,field", [
    (SHIFT, "kind = check-rps\ndelta = 1/2\nrate = 1\n", "seed"),
    (SHIFT, "kind = check-rps\nseed = -1\ndelta = 1/2\nrate = 1\n", "seed"),
    (SHIFT, f"kind = check-rps\nseed = {2**64}\ndelta = 1/2\nrate = 1\n", "seed"),
    (SHIFT, "kind = check-rps\nseed = 1\nrate = 1\n", "delta"),
    (SHIFT, "kind = check-rps\nseed = 1\ndelta = 1/2\nrate = 1\nbogus = 3\n", "bogus"),
    (SHIFT, "kind = frobnicate\nseed = 1\n", "kind"),
    (SHIFT, "kind = check-rs\nseed = 1\ndelta = 1/2\nrate = 1/log(1)\n", "rate"),
    (SHIFT, "kind = check-rs\nseed = 1\ndelta = 0\nrate = 1\n", "delta"),
    (SHIFT, "kind = witness\nseed = 1\ndelta = 1/2\nrate = 1\n", "two-sided"),
    (SHIFT, "kind = check-rps\nseed = 1\ndelta = 1/2, 1/4\nrate = 1, 2, 3\npairing = zip\n", "zip"),
    ("[system]\nkind = shift\np = 1/3, 1/3\n", "kind = rate\nseed = 1\n", "p"),
    ("[system]\nkind = rank-one\nw0 = 3/2\nperiod = 2|0,1\n", "kind = witness\nseed = 1\ndelta = 1/2\nrate = 1\n", "space_cap"),
    ("[system]\nkind = rank-one\nw0 = 1/2\nperiod = 1|0\n", "kind = witness\nseed = 1\ndelta = 1/2\nrate = 1\n", "stages"),
    ("[system]\nkind = rank-one\npreset = chacon\n", "kind = entropy\nseed = 1\nmethod = partition\n", "method"),
    (SHIFT + "[extra]\nx = 1\n", "kind = rate\nseed = 1\n", "extra"),
])
def test_config_rejections(system, body, field):
    with pytest.raises(ConfigError, match=field):
        cfg(body, system=system)


def test_space_cap_override():
    text = "kind = witness\nseed = 1\ndelta = 1/2\nrate = 1\n"
    c = cfg(text, system="[system]\nkind = rank-one\nw0 = 3/2\nperiod = 2|0,1\nspace_cap = none\n")
    assert c.system.space_cap is None
    assert parse_config(serialize_config(c)) == c


def test_config_without_experiment_section():
    with pytest.raises(ConfigError, match="experiment"):
        parse_config(SHIFT)


@pytest.mark.parametrize("text,value", [
    ("2", 2.0),
    ("1/log(2)", 1 / math.log(2)),
    ("-1/log(2/3) + 1e-6", -1 / math.log(2 / 3) + 1e-6),
    ("1/2/log(2) - 1/1000", 0.5 / math.log(2) - 0.001),
])
def test_real_expr(text, value):
    r = RealExpr.parse(text)
    assert r.value == pytest.approx(value, rel=1e-15)
    assert RealExpr.parse(str(r)) == r


@pytest.mark.parametrize("bad", ["", "log(2)", "1/log(-2)", "1 + ", "1/log(2) * 3"])
def test_real_expr_rejects(bad):
    with pytest.raises(ConfigError):
        RealExpr.parse(bad)


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_bundled_config_round_trip(path):
    c = parse_config(path.read_text())
    text = serialize_config(c)
    assert parse_config(text) == c
    assert serialize_config(parse_config(text)) == text


def test_suite_config_round_trip():
    for e in ENTRIES:
        for text in e.configs:
            c = parse_config(text)
            assert parse_config(serialize_config(c)) == c


@given(seed=st.integers(0, 2**64 - 1), k=st.integers(0, 12))
def test_round_trip_generated(seed, k):
    c = cfg(f"kind = check-rs\nseed = {seed}\ndelta = 1/2\nrate = {k}/log(2) + 1/7\n"
            f"eps_grid = dyadic:1..{k + 1}\n")
    assert parse_config(serialize_config(c)) == c


def test_rate_cases_grid_and_zip():
    c = cfg("kind = check-rps\nseed = 1\ndelta = 1/2, 1/4\nrate = 1, 2\n")
    assert len(c.rate_cases()) == 4
    z = cfg("kind = check-rps\nseed = 1\ndelta = 1/2, 1/4\nrate = 1, 2\npairing = zip\n")
    assert [(d, r.value) for d, r in z.rate_cases()] == [(F(1, 2), 1.0), (F(1, 4), 2.0)]


def test_witness_rows_cover_bound():
    c = cfg("kind = witness\nseed = 4\ndelta = 1/2\nrate = 5\n",
            system="[system]\nkind = shift\np = 1/2, 1/2\ntwo_sided = true\n")
    rep = run_experiment(c)
    case = rep.summary["cases"][0]
    assert rep.verdict == "PASS" and case["verified"]
    assert case["rows"] == case["bound"] + 1 == len(rep.rows)


def test_emit_json_and_csv():
    rep = run_experiment(cfg("kind = check-rps\nseed = 1\ndelta = 1/2\nrate = 1/log(2)\npairs = 50\n"))
    doc = json.loads(emit_report(rep, "json"))
    assert doc["verdict"] == "PASS" and "wall_time" in doc
    assert "wall_time" not in json.loads(payload_bytes(rep))
    rows = list(csv.DictReader(io.StringIO(emit_report(rep, "csv"))))
    assert len(rows) == len(rep.rows) == 50
    assert rows[0]["delta"] == "1/2" and rows[0]["formula_match"] == "true"
    with pytest.raises(ValueError):
        emit_report(rep, "xml")


def test_emit_csv_empty_report():
    rep = run_experiment(cfg("kind = entropy\nseed = 1\nmethod = analytic\n"))
    rep.rows.clear()
    assert emit_report(rep, "csv") == ""


def test_runs_are_deterministic():
    c = cfg("kind = entropy\nseed = 9\nmethod = brin-katok, partition, birkhoff-frequency\n"
            "delta = 1/2\nn = 100\nsamples = 30\n")
    assert payload_bytes(run_experiment(c)) == payload_bytes(run_experiment(c))
    assert payload_bytes(run_experiment(c)) != payload_bytes(run_experiment(c.with_seed(10)))


def test_runtime_error_becomes_error_verdict():
    c = cfg("kind = witness\nseed = 1\ndelta = 1/100\nrate = 1\n",
            system="[system]\nkind = rank-one\npreset = chacon\ndepth_cap = 3\n")
    rep = run_experiment(c)
    assert rep.verdict == "ERROR" and rep.failure["type"]


def write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_exit_codes(tmp_path, capsys):
    ok = write(tmp_path, SHIFT + "[experiment]\nkind = check-rps\nseed = 1\ndelta = 1/2\nrate = 1/log(2)\npairs = 20\n")
    assert main(["check-rps", "--config", ok]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "PASS"
    assert main(["check-rs", "--config", ok]) == 2
    assert main(["check-rps", "--config", str(tmp_path / "missing.ini")]) == 2
    bad = write(tmp_path, "[system]\nkind = shift\np = 1/3, 1/3\n[experiment]\nseed = 1\n", "bad.ini")
    assert main(["rate", "--config", bad]) == 2
    deep = write(tmp_path, "[system]\nkind = rank-one\npreset = chacon\ndepth_cap = 3\n"
                 "[experiment]\nseed = 1\ndelta = 1/100\nrate = 1\n", "deep.ini")
    assert main(["witness", "--config", deep]) == 3
    assert "could not run" in capsys.readouterr().err


def test_cli_kind_inferred_seed_override_and_out(tmp_path):
    path = write(tmp_path, "[system]\nkind = shift\np = 1/2, 1/2\ntwo_sided = true\n"
                 "[experiment]\nseed = 1\ndelta = 1/2\nrate = 1\n")
    out = tmp_path / "r.json"
    assert main(["witness", "--config", path, "--seed", "77", "--out", str(out)]) == 0
    echoed = parse_config(json.loads(out.read_text())["config"])
    assert echoed.seed == 77 and echoed.kind == "witness-rps-failure"
    assert main(["witness", "--config", path, "--format", "csv", "--out", str(out)]) == 0
    assert out.read_text().startswith("delta,rate,n,bound,")
    with pytest.raises(SystemExit):
        main(["witness", "--config", path, "--seed", "-4"])


def test_cli_suite_only(tmp_path, capsys):
    out = tmp_path / "suite.json"
    assert main(["paper-suite", "--only", "13", "--only", "8", "--out", str(out)]) == 0
    table = capsys.readouterr().out
    assert "2/2 passed" in table
    doc = json.loads(out.read_text())
    assert [d["id"] for d in doc] == [8, 13] and all(d["passed"] for d in doc)
    assert main(["paper-suite", "--only", "8", "--format", "csv"]) == 2
