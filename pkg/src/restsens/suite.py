"""The bundled reproduction suite: fixed configs plus a pass/fail rule for each."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

from .experiments import ExperimentReport, _jsonable, parse_config, run_experiment

ONE_SIDED = "[system]\nkind = shift\np = {p}\n"
TWO_SIDED = "[system]\nkind = shift\np = {p}\ntwo_sided = true\n"


def _cfg(system: str, **exp) -> str:
    body = "".join(f"{k} = {v}\n" for k, v in exp.items())
    return f"{system}\n[experiment]\n{body}"


Check = Callable[[list[ExperimentReport]], tuple[bool, str]]


@dataclass(frozen=True)
class SuiteEntry:
    id: int
    title: str
    configs: tuple[str, ...]
    check: Check
    budget_s: float | None = None


def _cases(r: ExperimentReport) -> list[dict]:
    return r.summary.get("cases", [])


def _check_rps_formula(reports):
    c = _cases(reports[0])[0]
    ok = c["pass_fraction"] == 1.0 and c["formula_matches"] == c["resolved"] and c["resolved"] > 0
    return ok, (f"pass fraction {c['pass_fraction']}, time = I in {c['formula_matches']}/{c['resolved']}"
                f" resolved pairs ({c['excluded']} excluded)")


def _check_rps(reports):
    c = _cases(reports[0])[0]
    return c["pass_fraction"] == 1.0 and c["resolved"] > 0, (
        f"pass fraction {c['pass_fraction']} over {c['resolved']} resolved pairs")


def _check_witnesses(reports):
    cases = [c for r in reports for c in _cases(r)]
    ok = all(c["verified"] for c in cases) and bool(cases)
    return ok, f"{sum(c['verified'] for c in cases)}/{len(cases)} witnesses verified"


def _check_points(reports):
    cases = _cases(reports[0])
    ok = all(c["passed"] for c in cases)
    return ok, "; ".join(f"{c['points_passed']}/{c['points']} points" for c in cases)


def _check_rate(reports):
    worst = max(r.summary["max_relative_error"] for r in reports)
    ok = all(r.verdict == "PASS" for r in reports)
    return ok, f"worst |1/a - h|/h = {worst:.4f}"


def _check_entropy_floor(reports):
    rps, part = reports
    est = part.rows[0]["value"]
    passing = [c for c in _cases(rps) if c["pass_fraction"] == 1.0]
    ok = bool(passing) and all(est >= 1 / c["rate_value"] - 0.02 for c in passing)
    return ok, (f"{len(passing)}/{len(_cases(rps))} rates pass; partition estimate {est:.4f}"
                f" vs largest 1/a {max((1 / c['rate_value'] for c in passing), default=math.nan):.4f}")


def _check_product(reports):
    cases = _cases(reports[0])
    ok = all(c["passed"] and c["product_le_left"] for c in cases)
    return ok, "; ".join(f"{c['points_passed']}/{c['points']} points, product <= left: "
                         f"{c['product_le_left']}" for c in cases)


def _check_rank_one_invariants(reports):
    chk = reports[0].summary.get("checks", {})
    heights = chk.get("heights", {}).get("heights")
    ok = (reports[0].verdict == "PASS" and heights == [1, 4, 13, 40, 121]
          and chk.get("invariance", {}).get("mismatches") == 0)
    return ok, f"heights {heights}, disjoint {chk.get('disjoint', {}).get('passed')}"


def _check_brin_katok(reports):
    uni, non = reports
    v = uni.rows[0]["value"]
    exact = abs(v - math.log(2)) <= 1e-12
    rel = max(r["relative_error"] for r in non.rows)
    return exact and non.verdict == "PASS", f"uniform {v!r}; (1/3,2/3) worst relative error {rel:.4f}"


def _check_oracle(reports):
    c = reports[0].summary["checks"]["separating_time"]
    return c["passed"], f"{c['cylinders']} cylinders, {c['mismatches']} mismatches"


def _check_ball_inclusion(reports):
    cs = [r.summary["checks"]["ball_inclusion"] for r in reports]
    ok = all(c["passed"] for c in cs)
    return ok, f"{sum(c['samples'] for c in cs)} samples, {sum(c['violations'] for c in cs)} violations"


UNIFORM, THIRDS = "1/2, 1/2", "1/3, 2/3"
CHACON = "[system]\nkind = rank-one\npreset = chacon\n"

ENTRIES: tuple[SuiteEntry, ...] = (
    SuiteEntry(1, "uniform one-sided shift is restricted pairwise sensitive",
               (_cfg(ONE_SIDED.format(p=UNIFORM), kind="check-rps", seed=1, delta="1/2",
                     rate="1/log(2)", pairs=10000),), _check_rps_formula, 10.0),
    SuiteEntry(2, "nonuniform one-sided shift, rate -1/log(2/3)",
               (_cfg(ONE_SIDED.format(p=THIRDS), kind="check-rps", seed=2, delta="1/2",
                     rate="-1/log(2/3) + 1e-6", pairs=10000),), _check_rps),
    SuiteEntry(3, "two-sided shift fails pairwise sensitivity (witness cylinders)",
               (_cfg(TWO_SIDED.format(p=UNIFORM), kind="witness-rps-failure", seed=3,
                     delta="1/2, 3/4, 9/10", rate="1, 5, 20"),), _check_witnesses, 60.0),
    SuiteEntry(4, "two-sided shift is restricted sensitive at delta 1/4",
               (_cfg(TWO_SIDED.format(p=UNIFORM), kind="check-rs", seed=4, delta="1/4",
                     rate="1/2/log(2)", points=100, eps_grid="dyadic:2..11"),), _check_points),
    SuiteEntry(5, "reciprocal of the minimal rate equals the entropy",
               tuple(_cfg(ONE_SIDED.format(p=p), kind="rate", seed=5, points=5, horizon=1000000)
                     for p in (UNIFORM, THIRDS, "1/4, 1/4, 1/2")), _check_rate, 60.0),
    SuiteEntry(6, "passing pairwise rates respect the partition entropy",
               (_cfg(ONE_SIDED.format(p=UNIFORM), kind="check-rps", seed=6, delta="1/2",
                     rate="1/2/log(2), 3/4/log(2), 1/log(2), 3/2/log(2), 2/log(2)", pairs=1000),
                _cfg(ONE_SIDED.format(p=UNIFORM), kind="entropy", seed=6, method="partition",
                     window=2, n=200, samples=200)), _check_entropy_floor),
    SuiteEntry(7, "rate 2/log(2) above 1/h gives restricted sensitivity",
               (_cfg(ONE_SIDED.format(p=UNIFORM), kind="check-rs", seed=7, delta="1/2",
                     rate="2/log(2)", points=100, eps_grid="dyadic:1..10"),), _check_points),
    SuiteEntry(8, "Chacon construction: heights, disjoint levels, invariance",
               (_cfg(CHACON, kind="bound-check", seed=8, stages=4, samples=100),),
               _check_rank_one_invariants, 5.0),
    SuiteEntry(9, "Chacon map is not restricted sensitive (nonsingular witness)",
               (_cfg(CHACON, kind="witness-rankone-failure", seed=9, delta="1/100, 1/20",
                     rate="1, 3", pairing="zip"),), _check_witnesses),
    SuiteEntry(10, "two-cut rank-one map, measure-preserving witness",
               (_cfg("[system]\nkind = rank-one\nw0 = 1/2\nperiod = 2|0,1\n",
                     kind="witness-rankone-failure", seed=10, delta="1/100", rate="1",
                     variant="measure-preserving"),), _check_witnesses),
    SuiteEntry(11, "restricted sensitivity passes to a product",
               (_cfg("[system]\nkind = product\n\n[system.left]\nkind = shift\np = 1/2, 1/2\n\n"
                     "[system.right]\nkind = shift\np = 1/2, 1/2\ntwo_sided = true\n",
                     kind="check-rs", seed=11, delta="1/2", rate="1/log(2) + 1e-6", points=50,
                     eps_grid="dyadic:1..10"),), _check_product),
    SuiteEntry(12, "Brin-Katok local entropy",
               (_cfg(ONE_SIDED.format(p=UNIFORM), kind="entropy", seed=12, method="brin-katok",
                     delta="1/2", n=10000, points=1),
                _cfg(ONE_SIDED.format(p=THIRDS), kind="entropy", seed=12, method="brin-katok",
                     delta="1/2", n=10000, points=5, tolerance="1/50")), _check_brin_katok),
    SuiteEntry(13, "separating time formula against brute force",
               (_cfg(ONE_SIDED.format(p=UNIFORM), kind="bound-check", seed=13, max_length=12,
                     classes="0, 1, 2, 3", samples=10),), _check_oracle),
    SuiteEntry(14, "ball inclusion measure inequality on shifts",
               (_cfg(ONE_SIDED.format(p=THIRDS), kind="bound-check", seed=14, max_length=1,
                     classes="0", samples=500),
                _cfg(TWO_SIDED.format(p=UNIFORM), kind="bound-check", seed=14, samples=500)),
               _check_ball_inclusion),
)


@dataclass
class SuiteResult:
    entry: SuiteEntry
    reports: list[ExperimentReport]
    passed: bool
    detail: str
    seconds: float

    @property
    def within_budget(self) -> bool:
        return self.entry.budget_s is None or self.seconds <= self.entry.budget_s


def run_entry(entry: SuiteEntry, seed: int | None = None) -> SuiteResult:
    reports = []
    for text in entry.configs:
        cfg = parse_config(text)
        reports.append(run_experiment(cfg if seed is None else cfg.with_seed(seed)))
    seconds = sum(r.wall_time for r in reports)
    if any(r.verdict == "ERROR" for r in reports):
        err = next(r.failure for r in reports if r.failure)
        return SuiteResult(entry, reports, False, f"error: {err['type']}: {err['message']}", seconds)
    passed, detail = entry.check(reports)
    return SuiteResult(entry, reports, passed, detail, seconds)


def run_suite(seed: int | None = None, only: set[int] | None = None) -> list[SuiteResult]:
    """Run the entries in order; ``seed`` replaces every config's own seed."""
    return [run_entry(e, seed) for e in ENTRIES if only is None or e.id in only]


def suite_payload(results: list[SuiteResult]) -> str:
    """Canonical JSON of every report payload (wall time excluded)."""
    doc = [{"id": r.entry.id, "title": r.entry.title, "passed": r.passed, "detail": r.detail,
            "reports": [rep.payload() for rep in r.reports]} for r in results]
    return json.dumps(_jsonable(doc), sort_keys=True, indent=1) + "\n"


def format_table(results: list[SuiteResult]) -> str:
    lines = [f"{'id':>3}  {'result':6}  {'time':>7}  title / detail"]
    for r in results:
        status = "PASS" if r.passed and r.within_budget else "FAIL"
        budget = "" if r.within_budget else f" (over {r.entry.budget_s:g}s budget)"
        lines.append(f"{r.entry.id:>3}  {status:6}  {r.seconds:6.2f}s  {r.entry.title}")
        lines.append(f"{'':>3}  {'':6}  {'':>7}  {r.detail}{budget}")
    n_ok = sum(r.passed and r.within_budget for r in results)
    lines.append(f"{n_ok}/{len(results)} passed")
    return "\n".join(lines) + "\n"
