"""Config-driven experiment harness with reproducible, auditable reports.

Configs are INI files with a ``[system]`` section (plus ``[system.left]`` and
``[system.right]`` for products) and an ``[experiment]`` section.  Every
rational is written as an exact string such as ``1/3`` or ``0.9``.  Rates may
also involve a logarithm: ``1/log(2)``, ``1/2/log(2)`` or
``-1/log(2/3) + 1e-6``.  See ``configs/`` for one file per experiment kind.
"""
from __future__ import annotations

import configparser
import csv
import io
import itertools
import json
import math
import re
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

import numpy as np

from . import entropy as ent
from .rank_one import (
    DomainError,
    RankOneSpec,
    RankOneSystem,
    RationalInterval,
    SpaceCapExceeded,
    Stage,
    build_columns,
    chacon,
    validate_spec,
)
from .sensitivity import (
    SensitivityVerdict,
    check_restricted_pairwise,
    check_restricted_sensitive,
    estimate_min_asymptotic_rate,
    witness_rank_one_failure,
    witness_two_sided_failure,
)
from .shifts import (
    BernoulliShift,
    ProbabilityVector,
    SymbolicPoint,
    disagreement_index,
    min_separating_time_exact,
    separation_class,
)
from .systems import (
    MetricSystem,
    ProductSystem,
    SensitivityParams,
    UndefinedAtDepth,
    child_seeds,
)

KINDS = (
    "check-rs",
    "check-rps",
    "witness-rps-failure",
    "witness-rankone-failure",
    "entropy",
    "rate",
    "bound-check",
)
ENTROPY_METHODS = ("analytic", "birkhoff-frequency", "brin-katok", "partition")


class ConfigError(ValueError):
    """A config that cannot be turned into an experiment; the message names the field."""


# -- values ----------------------------------------------------------------

_UNUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_NUM = rf"[-+]?{_UNUM}"
_RAT = rf"{_NUM}(?:/{_NUM})?"
_REAL = re.compile(
    rf"^\s*(?P<coef>{_RAT})\s*(?:/\s*log\(\s*(?P<arg>{_RAT})\s*\))?"
    rf"\s*(?:(?P<sign>[-+])\s*(?P<margin>{_UNUM}(?:/{_UNUM})?))?\s*$"
)


def parse_rational(text: str, key: str = "value") -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{key}: malformed rational {text!r}") from None


def format_rational(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class RealExpr:
    """``coef / log(arg) + margin`` with exact rational parts; ``arg`` may be absent."""

    coef: Fraction
    arg: Fraction | None = None
    margin: Fraction = Fraction(0)

    @classmethod
    def parse(cls, text: str, key: str = "rate") -> "RealExpr":
        m = _REAL.match(text)
        if not m:
            raise ConfigError(f"{key}: cannot read {text!r} as rational[/log(rational)][+-margin]")
        coef = parse_rational(m["coef"], key)
        arg = parse_rational(m["arg"], key) if m["arg"] else None
        if arg is not None and (arg <= 0 or arg == 1):
            raise ConfigError(f"{key}: log argument must be positive and not 1")
        margin = parse_rational(m["margin"], key) if m["margin"] else Fraction(0)
        if m["sign"] == "-":
            margin = -margin
        return cls(coef, arg, margin)

    @property
    def value(self) -> float:
        base = float(self.coef)
        if self.arg is not None:
            base /= math.log(self.arg.numerator) - math.log(self.arg.denominator)
        return base + float(self.margin)

    def __str__(self):
        s = format_rational(self.coef)
        if self.arg is not None:
            s += f"/log({format_rational(self.arg)})"
        if self.margin:
            s += f" {'+' if self.margin > 0 else '-'} {format_rational(abs(self.margin))}"
        return s


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _parse_int(text: str, key: str, lo: int = 0) -> int:
    try:
        v = int(text.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    if v < lo:
        raise ConfigError(f"{key}: must be >= {lo}, got {v}")
    return v


def _parse_bool(text: str, key: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1"):
        return True
    if t in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {text!r}")


def _parse_positive_list(text: str, key: str) -> tuple[Fraction, ...]:
    vals = tuple(parse_rational(t, key) for t in _split(text))
    if not vals:
        raise ConfigError(f"{key}: empty list")
    if any(v <= 0 for v in vals):
        raise ConfigError(f"{key}: values must be positive")
    return vals


def _parse_eps_grid(text: str, key: str) -> tuple[Fraction, ...]:
    t = text.strip()
    if t.startswith("dyadic:"):
        m = re.fullmatch(r"dyadic:\s*(\d+)\s*\.\.\s*(\d+)", t)
        if not m or int(m[1]) > int(m[2]):
            raise ConfigError(f"{key}: expected dyadic:a..b, got {text!r}")
        return tuple(Fraction(1, 2**k) for k in range(int(m[1]), int(m[2]) + 1))
    return _parse_positive_list(t, key)


def _parse_rates(text: str, key: str) -> tuple[RealExpr, ...]:
    vals = tuple(RealExpr.parse(t, key) for t in _split(text))
    if not vals:
        raise ConfigError(f"{key}: empty list")
    if any(not v.value > 0 for v in vals):
        raise ConfigError(f"{key}: rates must be positive")
    return vals


def _choice(options: tuple[str, ...]):
    def parse(text: str, key: str) -> str:
        t = text.strip()
        if t not in options:
            raise ConfigError(f"{key}: {t!r} is not one of {', '.join(options)}")
        return t
    return parse


def _int_list(text: str, key: str) -> tuple[int, ...]:
    return tuple(_parse_int(t, key) for t in _split(text))


def _method_list(text: str, key: str) -> tuple[str, ...]:
    check = _choice(ENTROPY_METHODS)
    return tuple(check(t, key) for t in _split(text))


# parser, serializer for every experiment key
_EXP_FIELDS: dict[str, tuple[Callable, Callable]] = {
    "delta": (_parse_positive_list, lambda v: ", ".join(map(format_rational, v))),
    "rate": (_parse_rates, lambda v: ", ".join(map(str, v))),
    "pairing": (_choice(("grid", "zip")), str),
    "eps_grid": (_parse_eps_grid, lambda v: ", ".join(map(format_rational, v))),
    "points": (lambda t, k: _parse_int(t, k, 1), str),
    "pairs": (lambda t, k: _parse_int(t, k, 1), str),
    "samples": (lambda t, k: _parse_int(t, k, 1), str),
    "horizon": (lambda t, k: _parse_int(t, k, 1), str),
    "c_grid": (_int_list, lambda v: ", ".join(map(str, v))),
    "method": (_method_list, lambda v: ", ".join(v)),
    "n": (lambda t, k: _parse_int(t, k, 0), str),
    "window": (lambda t, k: _parse_int(t, k, 1), str),
    "variant": (_choice(("nonsingular", "measure-preserving")), str),
    "max_stage": (lambda t, k: _parse_int(t, k, 1), str),
    "tolerance": (lambda t, k: parse_rational(t, k), format_rational),
    "stages": (lambda t, k: _parse_int(t, k, 1), str),
    "max_length": (lambda t, k: _parse_int(t, k, 1), str),
    "classes": (_int_list, lambda v: ", ".join(map(str, v))),
}

_DEFAULTS: dict[str, dict[str, str]] = {
    "check-rs": {"eps_grid": "dyadic:1..10", "points": "20", "samples": "200", "pairing": "grid"},
    "check-rps": {"pairs": "1000", "pairing": "grid"},
    "witness-rps-failure": {"pairing": "grid"},
    "witness-rankone-failure": {"pairing": "grid", "variant": "nonsingular"},
    "entropy": {"method": "analytic", "n": "1000", "samples": "1000", "window": "1",
                "points": "1", "tolerance": "1/50"},
    "rate": {"points": "5", "horizon": "1000000", "tolerance": "1/20"},
    "bound-check": {},
}
_REQUIRED = {
    "check-rs": ("delta", "rate"),
    "check-rps": ("delta", "rate"),
    "witness-rps-failure": ("delta", "rate"),
    "witness-rankone-failure": ("delta", "rate"),
}
_BOUND_CHECK_DEFAULTS = {
    "shift": {"max_length": "12", "classes": "0, 1, 2, 3", "samples": "1000"},
    "rank-one": {"stages": "4", "samples": "100"},
}

_SHIFT_KEYS = {"kind", "p", "two_sided", "horizon"}
_RANK_ONE_KEYS = {"kind", "preset", "w0", "prefix", "period", "depth_cap", "space_cap"}


# -- config types ----------------------------------------------------------


@dataclass(frozen=True)
class SystemDecl:
    kind: str  # shift | rank-one | product
    p: ProbabilityVector | None = None
    two_sided: bool = False
    horizon: int = 10**6
    spec: RankOneSpec | None = None
    depth_cap: int = 64
    space_cap: Fraction | None = Fraction(1)
    left: "SystemDecl | None" = None
    right: "SystemDecl | None" = None

    def build(self) -> MetricSystem:
        if self.kind == "shift":
            return BernoulliShift(self.p, two_sided=self.two_sided, horizon=self.horizon)
        if self.kind == "rank-one":
            return RankOneSystem(self.spec, depth_cap=self.depth_cap, space_cap=self.space_cap)
        return ProductSystem(self.left.build(), self.right.build())


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemDecl
    kind: str
    seed: int
    params: dict = field(default_factory=dict)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return ExperimentConfig(self.system, self.kind, seed, self.params)

    def rate_cases(self) -> list[tuple[Fraction, RealExpr]]:
        deltas, rates = self.params["delta"], self.params["rate"]
        if self.params.get("pairing") == "zip":
            if len(deltas) != len(rates):
                raise ConfigError("pairing = zip needs equally long delta and rate lists")
            return list(zip(deltas, rates))
        return list(itertools.product(deltas, rates))


def _parse_stage(text: str, key: str) -> Stage:
    parts = [t.strip() for t in text.split("|")]
    if len(parts) not in (2, 3):
        raise ConfigError(f"{key}: a stage is 'r|spacers[|proportions]', got {text!r}")
    r = _parse_int(parts[0], key, 0)
    spacers = _int_list(parts[1], key) if parts[1] else ()
    try:
        if len(parts) == 2:
            return Stage.uniform(r, spacers)
        return Stage(r, spacers, tuple(parse_rational(t, key) for t in _split(parts[2])))
    except ValueError as e:
        raise ConfigError(f"{key}: {e}") from None


def _format_stage(st: Stage) -> str:
    return f"{st.cuts}|{','.join(map(str, st.spacers))}|{','.join(map(format_rational, st.proportions))}"


def _parse_stages(text: str, key: str) -> tuple[Stage, ...]:
    return tuple(_parse_stage(t, key) for t in text.split(";") if t.strip())


def _check_keys(section: str, keys, allowed: set[str]):
    unknown = sorted(set(keys) - allowed)
    if unknown:
        raise ConfigError(f"[{section}]: unknown key {unknown[0]!r}")


def _parse_system(cp: configparser.ConfigParser, name: str) -> SystemDecl:
    if not cp.has_section(name):
        raise ConfigError(f"missing [{name}] section")
    sec = cp[name]
    kind = sec.get("kind", "").strip()
    if kind == "shift":
        _check_keys(name, sec.keys(), _SHIFT_KEYS)
        if "p" not in sec:
            raise ConfigError(f"[{name}] p: missing probability vector")
        try:
            pv = ProbabilityVector(tuple(parse_rational(t, f"[{name}] p") for t in _split(sec["p"])))
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(f"[{name}] p: {e}") from None
        return SystemDecl(
            "shift",
            p=pv,
            two_sided=_parse_bool(sec.get("two_sided", "false"), f"[{name}] two_sided"),
            horizon=_parse_int(sec.get("horizon", "1000000"), f"[{name}] horizon", 1),
        )
    if kind == "rank-one":
        _check_keys(name, sec.keys(), _RANK_ONE_KEYS)
        preset = sec.get("preset", "").strip()
        if preset not in ("", "chacon"):
            raise ConfigError(f"[{name}] preset: unknown preset {preset!r}")
        if preset:
            if "prefix" in sec or "period" in sec:
                raise ConfigError(f"[{name}] preset: cannot be combined with prefix/period")
            spec = chacon(parse_rational(sec["w0"], f"[{name}] w0")) if "w0" in sec else chacon()
        else:
            if "w0" not in sec:
                raise ConfigError(f"[{name}] w0: missing initial width")
            spec = RankOneSpec(
                parse_rational(sec["w0"], f"[{name}] w0"),
                _parse_stages(sec.get("prefix", ""), f"[{name}] prefix"),
                _parse_stages(sec.get("period", ""), f"[{name}] period"),
            )
        depth_cap = _parse_int(sec.get("depth_cap", "64"), f"[{name}] depth_cap", 1)
        cap_text = sec.get("space_cap", "1").strip()
        space_cap = None if cap_text == "none" else parse_rational(cap_text, f"[{name}] space_cap")
        try:
            report = validate_spec(spec, depth_cap, space_cap)
        except ValueError as e:
            raise ConfigError(f"[{name}] stages: {e}") from None
        if not report.within_cap:
            raise ConfigError(f"[{name}] space_cap: {report.problems[0]} (set space_cap = none to allow)")
        return SystemDecl("rank-one", spec=spec, depth_cap=depth_cap, space_cap=space_cap)
    if kind == "product":
        _check_keys(name, sec.keys(), {"kind"})
        return SystemDecl("product", left=_parse_system(cp, f"{name}.left"),
                          right=_parse_system(cp, f"{name}.right"))
    raise ConfigError(f"[{name}] kind: expected shift, rank-one or product, got {kind!r}")


def parse_config(text: str, default_kind: str | None = None) -> ExperimentConfig:
    """Parse and validate an INI experiment config, filling defaults.

    ``default_kind`` supplies the experiment kind when the file has none;
    ``"witness"`` picks the witness kind that matches the system.
    Raises :class:`ConfigError` naming the offending field.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"unreadable config: {e}") from None
    allowed_sections = {"system", "system.left", "system.right", "experiment"}
    extra = sorted(set(cp.sections()) - allowed_sections)
    if extra:
        raise ConfigError(f"unknown section [{extra[0]}]")
    system = _parse_system(cp, "system")
    if not cp.has_section("experiment"):
        raise ConfigError("missing [experiment] section")
    sec = dict(cp["experiment"])
    kind = sec.pop("kind", default_kind or "").strip()
    if kind == "witness":
        kind = "witness-rankone-failure" if system.kind == "rank-one" else "witness-rps-failure"
    if kind not in KINDS:
        raise ConfigError(f"[experiment] kind: expected one of {', '.join(KINDS)}, got {kind!r}")
    if "seed" not in sec:
        raise ConfigError("[experiment] seed: missing (every experiment needs an explicit seed)")
    seed = _parse_int(sec.pop("seed"), "[experiment] seed")
    if seed >= 2**64:
        raise ConfigError("[experiment] seed: must fit in 64 bits")
    _check_keys("experiment", sec.keys(), set(_EXP_FIELDS))
    raw = dict(_DEFAULTS[kind])
    if kind == "bound-check":
        if system.kind not in _BOUND_CHECK_DEFAULTS:
            raise ConfigError("[system] kind: bound-check needs a shift or rank-one system")
        raw.update(_BOUND_CHECK_DEFAULTS[system.kind])
    raw.update(sec)
    for key in _REQUIRED.get(kind, ()):
        if key not in raw:
            raise ConfigError(f"[experiment] {key}: required for {kind}")
    params = {k: _EXP_FIELDS[k][0](v, f"[experiment] {k}") for k, v in raw.items()}
    cfg = ExperimentConfig(system, kind, seed, params)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig):
    s, kind = cfg.system, cfg.kind
    if "delta" in cfg.params and "rate" in cfg.params:
        cfg.rate_cases()
    if kind == "witness-rps-failure" and not (s.kind == "shift" and s.two_sided):
        raise ConfigError("[system] kind: witness-rps-failure needs a two-sided shift")
    if kind == "witness-rankone-failure" and s.kind != "rank-one":
        raise ConfigError("[system] kind: witness-rankone-failure needs a rank-one system")
    if kind == "rate" and not (s.kind == "shift" and not s.two_sided):
        raise ConfigError("[system] kind: rate needs a one-sided shift")
    if kind == "entropy" and s.kind != "shift":
        bad = [m for m in cfg.params["method"] if m != "brin-katok"]
        if bad:
            raise ConfigError(f"[experiment] method: {bad[0]} needs a shift system")
    if kind == "entropy" and "brin-katok" in cfg.params["method"] and "delta" not in cfg.params:
        raise ConfigError("[experiment] delta: required for brin-katok")


def _system_lines(decl: SystemDecl, name: str) -> list[str]:
    out = [f"[{name}]", f"kind = {decl.kind}"]
    if decl.kind == "shift":
        out += [f"p = {', '.join(map(format_rational, decl.p.probabilities))}",
                f"two_sided = {str(decl.two_sided).lower()}", f"horizon = {decl.horizon}"]
    elif decl.kind == "rank-one":
        out += [f"w0 = {format_rational(decl.spec.w0)}",
                f"prefix = {'; '.join(map(_format_stage, decl.spec.prefix))}",
                f"period = {'; '.join(map(_format_stage, decl.spec.period))}",
                f"depth_cap = {decl.depth_cap}",
                f"space_cap = {'none' if decl.space_cap is None else format_rational(decl.space_cap)}"]
    out.append("")
    if decl.kind == "product":
        out += _system_lines(decl.left, f"{name}.left") + _system_lines(decl.right, f"{name}.right")
    return out


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical INI text; ``parse_config(serialize_config(c)) == c``."""
    lines = _system_lines(cfg.system, "system")
    lines += ["[experiment]", f"kind = {cfg.kind}", f"seed = {cfg.seed}"]
    for k in sorted(cfg.params):
        lines.append(f"{k} = {_EXP_FIELDS[k][1](cfg.params[k])}")
    return "\n".join(lines) + "\n"


# -- reports ---------------------------------------------------------------


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    verdict: str  # PASS | FAIL | INFO | ERROR
    summary: dict
    rows: list[dict]
    approximate: bool = False
    notes: list[str] = field(default_factory=list)
    failure: dict | None = None
    wall_time: float = 0.0

    def payload(self) -> dict:
        """Everything except the wall time; byte-stable for a given config."""
        return {
            "config": serialize_config(self.config),
            "kind": self.config.kind,
            "verdict": self.verdict,
            "approximate": self.approximate,
            "summary": self.summary,
            "rows": self.rows,
            "notes": self.notes,
            "failure": self.failure,
        }


def _jsonable(v: Any):
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return v
    if isinstance(v, Fraction):
        return format_rational(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return str(v)
        return float(f"{v:.12g}")
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, RealExpr):
        return str(v)
    return str(v)


def _csv_cell(v: Any) -> str:
    j = _jsonable(v)
    if isinstance(j, bool):
        return str(j).lower()
    if j is None:
        return ""
    if isinstance(j, (list, dict)):
        return json.dumps(j, sort_keys=True)
    return str(j)


def emit_report(report: ExperimentReport, fmt: str = "json", include_time: bool = True) -> str:
    """Serialize as canonical JSON or as CSV of the per-trial rows."""
    if fmt == "json":
        doc = report.payload()
        if include_time:
            doc["wall_time"] = report.wall_time
        return json.dumps(_jsonable(doc), sort_keys=True, indent=1) + "\n"
    if fmt == "csv":
        cols: list[str] = []
        for r in report.rows:
            cols.extend(k for k in r if k not in cols)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if cols:
            w.writerow(cols)
        for r in report.rows:
            w.writerow([_csv_cell(r.get(c)) for c in cols])
        return buf.getvalue()
    raise ValueError(f"unknown format {fmt!r}")


def payload_bytes(report: ExperimentReport) -> bytes:
    return emit_report(report, "json", include_time=False).encode()


# -- runners ---------------------------------------------------------------


def _verdict_rows(v: SensitivityVerdict, delta, rate: RealExpr, label_key: str) -> list[dict]:
    rows = []
    for k, t in enumerate(v.trials):
        rows.append({
            label_key: t.extra.get("index", k),
            "delta": delta,
            "rate": str(rate),
            "radius": t.radius,
            "ball_measure": t.ball_measure,
            "bound": t.bound,
            "time": t.time,
            "passed": t.passed,
            **{k2: v2 for k2, v2 in t.extra.items() if k2 != "index"},
        })
    return rows


def _run_check_rs(cfg: ExperimentConfig, system: MetricSystem) -> ExperimentReport:
    p = cfg.params
    points = [system.sample_point(s) for s in child_seeds(cfg.seed, p["points"])]
    rows, cases, approx, all_pass = [], [], False, True
    product = isinstance(system, ProductSystem)
    for delta, rate in cfg.rate_cases():
        params = SensitivityParams(delta, rate.value)
        passed_points, product_ok = 0, True
        for i, x in enumerate(points):
            v = check_restricted_sensitive(system, x, params, list(p["eps_grid"]),
                                           samples=p["samples"], seed=cfg.seed)
            approx |= v.approximate
            for t in v.trials:
                t.extra["index"] = i
                if product:
                    left = system.left.ball_measure(x[0], t.radius)
                    t.extra["left_ball_measure"] = left
                    t.extra["product_le_left"] = t.ball_measure <= left
                    product_ok &= t.extra["product_le_left"]
            passed_points += v.passed
            rows += _verdict_rows(v, delta, rate, "point")
        ok = passed_points == len(points) and product_ok
        all_pass &= ok
        case = {"delta": delta, "rate": str(rate), "rate_value": rate.value, "points": len(points),
                "points_passed": passed_points, "passed": ok}
        if product:
            case["product_le_left"] = product_ok
        cases.append(case)
    return ExperimentReport(cfg, "PASS" if all_pass else "FAIL", {"cases": cases}, rows, approx)


def _run_check_rps(cfg: ExperimentConfig, system: MetricSystem) -> ExperimentReport:
    p = cfg.params
    seeds = child_seeds(cfg.seed, 2 * p["pairs"])
    pairs = [(system.sample_point(seeds[2 * k]), system.sample_point(seeds[2 * k + 1]))
             for k in range(p["pairs"])]
    formula = isinstance(system, BernoulliShift) and not system.two_sided
    rows, cases, approx, all_pass = [], [], False, True
    for delta, rate in cfg.rate_cases():
        v = check_restricted_pairwise(system, SensitivityParams(delta, rate.value), 0, cfg.seed,
                                      pairs=iter(pairs))
        approx |= v.approximate
        matches = 0
        for t in v.trials:
            if formula:
                # one-sided shift: d(T^n s, T^n t) > delta  iff  I(s, t) - n <= c
                idx = disagreement_index(t.point, t.other, system.horizon)
                expect = max(0, idx - separation_class(delta))
                t.extra["disagreement_index"] = idx
                t.extra["formula_time"] = expect
                t.extra["formula_match"] = t.time == expect
                matches += t.time == expect
        rows += _verdict_rows(v, delta, rate, "pair")
        case = {"delta": delta, "rate": str(rate), "rate_value": rate.value,
                "pairs": len(pairs), "excluded": v.excluded, "resolved": len(v.trials),
                "pass_fraction": v.pass_fraction, "passed": v.passed}
        if formula:
            case["formula_matches"] = matches
        all_pass &= v.passed
        cases.append(case)
    return ExperimentReport(cfg, "PASS" if all_pass else "FAIL", {"cases": cases}, rows, approx)


def _run_witness_rps(cfg: ExperimentConfig, system: BernoulliShift) -> ExperimentReport:
    sigma = system.sample_point(cfg.seed)
    rows, cases, all_ok = [], [], True
    for delta, rate in cfg.rate_cases():
        w = witness_two_sided_failure(system, sigma, delta, rate.value)
        cases.append({
            "delta": delta, "rate": str(rate), "k1": w.k1, "k2": w.k2, "bound": w.bound,
            "ball_measure": w.ball_measure, "cylinder_lo": w.cylinder.lo,
            "cylinder": "".join(map(str, w.cylinder.symbols)), "rows": len(w.rows),
            "verified": w.verified,
        })
        all_ok &= w.verified
        for r in w.rows:
            rows.append({"delta": delta, "rate": str(rate), "n": r["n"], "bound": r["bound"],
                         "distance": r["max_distance"], "envelope": r["envelope"],
                         "below_delta": r["max_distance"] < delta})
    return ExperimentReport(cfg, "PASS" if all_ok else "FAIL", {"cases": cases}, rows)


def _run_witness_rank_one(cfg: ExperimentConfig, system: RankOneSystem) -> ExperimentReport:
    rows, cases, all_ok = [], [], True
    for delta, rate in cfg.rate_cases():
        w = witness_rank_one_failure(system, delta, rate.value, cfg.params["variant"],
                                     cfg.params.get("max_stage"))
        cases.append({
            "delta": delta, "rate": str(rate), "variant": w.variant, "stage": w.stage,
            "height": w.height, "point": w.point, "radius": w.radius, "bound": w.bound,
            "inequality": w.inequality, "max_diameter": w.max_diameter,
            "rows": len(w.rows), "verified": w.verified,
        })
        all_ok &= w.verified
        for r in w.rows:
            rows.append({"delta": delta, "rate": str(rate), "n": r["n"], "bound": r["bound"],
                         "distance": r["diameter"], "pieces": r["pieces"],
                         "below_delta": r["diameter"] < delta})
    return ExperimentReport(cfg, "PASS" if all_ok else "FAIL", {"cases": cases}, rows)


def _run_entropy(cfg: ExperimentConfig, system: MetricSystem) -> ExperimentReport:
    p = cfg.params
    tol = p["tolerance"]
    h = ent.bernoulli_entropy(system.pv) if isinstance(system, BernoulliShift) else None
    rows, verdict_ok = [], True
    notes = ["empirical estimators are guaranteed for almost every point; points are sampled from the measure"]
    seeds = child_seeds(cfg.seed, p["points"])
    for method in p["method"]:
        estimates: list[tuple[int | None, ent.EntropyEstimate]] = []
        if method == "analytic":
            estimates.append((None, ent.EntropyEstimate("analytic", h, {})))
        elif method == "partition":
            estimates.append((None, ent.partition_entropy(system, ent.SymbolPartition(p["window"]), p["n"],
                                                          p["samples"], cfg.seed)))
        else:
            for i, s in enumerate(seeds):
                x = system.sample_point(s)
                if method == "birkhoff-frequency":
                    est = ent.birkhoff_frequency_entropy(system, x, max(1, p["n"]))
                    estimates.append((i, est))
                else:
                    for d in p["delta"]:
                        est = ent.brin_katok_estimate(system, x, d, max(1, p["n"]), p["samples"], cfg.seed)
                        estimates.append((i, est))
        for i, est in estimates:
            rel = abs(est.value - h) / h if h else None
            within = rel is not None and rel <= tol
            if rel is not None and method != "analytic":
                verdict_ok &= within
            rows.append({"method": method, "point": i, "value": est.value,
                         "delta": est.params.get("delta"), "n": est.params.get("n"),
                         "half_width": est.half_width, "approximate": est.approximate,
                         "inconclusive": est.inconclusive, "entropy": h,
                         "relative_error": rel, "within_tolerance": within})
            notes.extend(est.notes)
    verdict = ("PASS" if verdict_ok else "FAIL") if h is not None else "INFO"
    summary = {"entropy": h, "tolerance": tol, "estimates": len(rows)}
    return ExperimentReport(cfg, verdict, summary, rows, any(r["approximate"] for r in rows), notes)


def _run_rate(cfg: ExperimentConfig, system: BernoulliShift) -> ExperimentReport:
    p = cfg.params
    h = ent.bernoulli_entropy(system.pv)
    rows, ok = [], True
    for i, s in enumerate(child_seeds(cfg.seed, p["points"])):
        r = estimate_min_asymptotic_rate(system, system.sample_point(s), p["horizon"], p.get("c_grid"))
        rel = abs(r.reciprocal - h) / h
        ok &= rel <= p["tolerance"]
        rows.append({"point": i, "rate_estimate": r.estimate, "reciprocal": r.reciprocal,
                     "entropy": h, "relative_error": rel, "within_tolerance": rel <= p["tolerance"],
                     "best_c": max(r.per_c, key=r.per_c.get)})
    summary = {"entropy": h, "horizon": p["horizon"], "tolerance": p["tolerance"],
               "max_relative_error": max(r["relative_error"] for r in rows)}
    return ExperimentReport(cfg, "PASS" if ok else "FAIL", summary, rows,
                            notes=["finite-horizon estimate at sampled points"])


def brute_force_separating_time(word: tuple[int, ...], delta, symbols: int = 2) -> int | None:
    """Least ``k`` such that some extension of the one-sided cylinder ``word`` leaves ``delta``.

    Exhaustive: ``x`` is the word padded with symbol 1, and every pattern of
    the free coordinates that matter at time ``k`` is tried, with the
    distance ``2**-I`` compared exactly against ``delta``.  Any finite
    pattern extends to a positive-measure cylinder.
    """
    d = Fraction(delta)
    if d >= 1:
        return None
    look = 0
    while Fraction(1, 2**look) > d:
        look += 1  # relative indices 0..look-1 can carry a distance above delta
    L = len(word)
    for k in range(L + look + 1):
        free = max(0, k + look - L)
        x = word + (1,) * free
        for tail in itertools.product(range(1, symbols + 1), repeat=free):
            y = word + tail
            dist = Fraction(0)
            for j in range(look):
                if x[k + j] != y[k + j]:
                    dist = Fraction(1, 2**j)
                    break
            if dist > d:
                return k
    return None


def _run_bound_check(cfg: ExperimentConfig, system: MetricSystem) -> ExperimentReport:
    if isinstance(system, BernoulliShift):
        return _bound_check_shift(cfg, system)
    return _bound_check_rank_one(cfg, system)


def _class_deltas(c: int) -> tuple[Fraction, Fraction]:
    # both ends of the class 2^-(c+1) <= delta < 2^-c
    return Fraction(1, 2 ** (c + 1)), Fraction(3, 2 ** (c + 2))


def _bound_check_shift(cfg: ExperimentConfig, system: BernoulliShift) -> ExperimentReport:
    p = cfg.params
    rows, checks = [], {}
    mismatches = cylinders = 0
    if not system.two_sided:
        for c in p["classes"]:
            for d in _class_deltas(c):
                for L in range(1, p["max_length"] + 1):
                    formula = min_separating_time_exact(L, d)
                    seen = set()
                    for word in itertools.product((1, 2), repeat=L):
                        cylinders += 1
                        bf = brute_force_separating_time(word, d)
                        seen.add(bf)
                        mismatches += bf != formula
                    rows.append({"check": "separating-time", "class": c, "delta": d, "length": L,
                                 "formula": formula, "brute_force": sorted(seen, key=str),
                                 "passed": seen == {formula}})
        checks["separating_time"] = {"cylinders": cylinders, "mismatches": mismatches,
                                     "passed": mismatches == 0}
    rng = np.random.default_rng(child_seeds(cfg.seed, 1)[0])
    violations = 0
    pt_seeds = child_seeds(cfg.seed + 1, p["samples"])
    for k in range(p["samples"]):
        r = Fraction(int(rng.integers(2, 1025)), 1024)
        eta = r * Fraction(int(rng.integers(1, 1024)), 1024)
        x = system.sample_point(pt_seeds[k])
        y = system.sample_in_ball(x, eta, pt_seeds[k] ^ 0x5A5A, 1)[0]
        dxy = system.distance(x, y)
        big, small = system.ball_measure(y, r), system.ball_measure(x, r - eta)
        ok = dxy < eta < r and big >= small
        violations += not ok
        rows.append({"check": "ball-inclusion", "sample": k, "r": r, "eta": eta, "distance": dxy,
                     "ball_y_r": big, "ball_x_r_minus_eta": small, "passed": ok})
    checks["ball_inclusion"] = {"samples": p["samples"], "violations": violations,
                                "passed": violations == 0}
    ok = all(v["passed"] for v in checks.values())
    return ExperimentReport(cfg, "PASS" if ok else "FAIL", {"checks": checks}, rows)


def _bound_check_rank_one(cfg: ExperimentConfig, system: RankOneSystem) -> ExperimentReport:
    p = cfg.params
    depth = min(p["stages"], system.depth_cap)
    rows, checks = [], {}
    columns = build_columns(system.spec, depth, system.space_cap)
    heights_ok = [c.height for c in columns] == system.heights[: depth + 1]
    levels_ok = all(system.level(n, i) == columns[n].levels[i]
                    for n in range(depth + 1) for i in range(columns[n].height))
    checks["heights"] = {"heights": system.heights[: depth + 1], "oracle": [c.height for c in columns],
                         "passed": heights_ok and levels_ok}
    disjoint = True
    for n in range(depth + 1):
        lv = sorted(columns[n].levels, key=lambda iv: iv.left)
        disjoint &= all(a.right <= b.left for a, b in zip(lv, lv[1:]))
    checks["disjoint"] = {"passed": disjoint}
    rng = np.random.default_rng(child_seeds(cfg.seed, 1)[0])
    mismatches = 0
    for k in range(p["samples"]):
        n = int(rng.integers(1, depth + 1))
        h = system.heights[n]
        size = int(rng.integers(1, h))
        idx = sorted(set(int(i) for i in rng.integers(1, h, size=size)))
        E = [system.level(n, i) for i in idx]
        pre = [iv for lv in E for iv in system.transform_interval(lv, -1)[0]]
        lam_e = sum(iv.length for iv in E)
        lam_pre = sum(iv.length for iv in pre)
        spre = sorted(pre, key=lambda iv: iv.left)
        ok = lam_e == lam_pre and all(a.right <= b.left for a, b in zip(spre, spre[1:]))
        mismatches += not ok
        rows.append({"check": "preimage-measure", "sample": k, "stage": n, "levels": len(idx),
                     "measure": lam_e, "preimage_measure": lam_pre, "passed": ok})
    label = "invariance" if system.spec.measure_preserving else "preimage_measure"
    checks[label] = {"samples": p["samples"], "mismatches": mismatches,
                     "passed": mismatches == 0 or not system.spec.measure_preserving}
    ok = all(v["passed"] for v in checks.values())
    return ExperimentReport(cfg, "PASS" if ok else "FAIL", {"checks": checks}, rows)


_RUNNERS = {
    "check-rs": _run_check_rs,
    "check-rps": _run_check_rps,
    "witness-rps-failure": _run_witness_rps,
    "witness-rankone-failure": _run_witness_rank_one,
    "entropy": _run_entropy,
    "rate": _run_rate,
    "bound-check": _run_bound_check,
}

#: errors that mean the experiment could not be carried out
RUNTIME_ERRORS = (UndefinedAtDepth, SpaceCapExceeded, DomainError, RuntimeError)


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Build the system, dispatch on the experiment kind and time the run.

    A mathematical FAIL is an ordinary report.  Runtime incapacity (depth
    exhaustion, an exhausted stage search) is captured in ``failure`` with
    verdict ``ERROR``.
    """
    t0 = time.perf_counter()
    try:
        system = cfg.system.build()
        report = _RUNNERS[cfg.kind](cfg, system)
    except RUNTIME_ERRORS as e:
        report = ExperimentReport(cfg, "ERROR", {}, [],
                                  failure={"type": type(e).__name__, "message": str(e)})
    report.wall_time = time.perf_counter() - t0
    return report
