"""
Batch command-line front end.

Usage::

    shiftflow <subcommand> [--config PATH] [--out PATH] [--format csv|json] [key=value ...]

Config grammar (one entry per line)::

    # comment                  full-line or trailing comments start with '#'
    key = value                whitespace around '=' is ignored
    t = 0, 0.25, 0.5           lists are comma separated
    t = 0:2:0.25               start:stop:step, stop included when hit
    cutoffs = 2^10, 2^12       integer tokens accept base^exponent

Command-line ``key=value`` pairs override file keys.  Every parameter is parsed
and validated before any computation starts; errors name the offending key.

Exit codes: 0 every check passed, 1 some check failed, 2 validation or usage
error, 3 I/O error.
"""
from __future__ import annotations

import argparse
from dataclasses import dataclass, field
import io
import json
import math
import sys
from typing import Any, Callable, Optional

import numpy as np

from . import dynamics_diagnostics as dd
from . import fock_oracle as fo
from .implementability import expected_slope, hs_divergence_fit
from .one_particle import (
    MomentumGrid,
    WaveFunction,
    Window,
    apply_shift_exact,
    apply_shift_fft,
    generator_column_error,
    is_integer_time,
    sinpi,
)
from .quasifree_states import QuasiFreeState, kms_residual

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class ConfigError(ValueError):
    """Invalid configuration; the message names the key."""


# -- config parsing ------------------------------------------------------------


def read_config(text: str) -> dict:
    """Parse the flat ``key = value`` format into a dict of raw strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def _int_token(tok: str) -> int:
    if "^" in tok:
        base, exp = tok.split("^", 1)
        return int(base) ** int(exp)
    return int(tok)


def _range(tok: str, conv):
    parts = tok.split(":")
    if len(parts) != 3:
        raise ValueError(f"range must be start:stop:step, got {tok!r}")
    start, stop, step = (conv(p) for p in parts)
    if step <= 0:
        raise ValueError("range step must be positive")
    if stop < start:
        raise ValueError("range stop is below start")
    n = int(math.floor((stop - start) / step + 1e-9))
    return [conv(start + k * step) if conv is int else float(start + k * step) for k in range(n + 1)]


def _list(conv):
    def parse(s: str):
        vals = []
        for tok in (p.strip() for p in s.split(",")):
            if not tok:
                continue
            vals.extend(_range(tok, conv) if ":" in tok else [conv(tok)])
        return vals

    return parse


def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _choice(*options):
    def parse(s: str):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s

    return parse


FLOATS = _list(_float)
INTS = _list(_int_token)


@dataclass(frozen=True)
class Param:
    parse: Callable
    default: str
    check: Optional[Callable[[Any], Optional[str]]] = None


def _nonempty(v):
    return None if len(v) else "must not be empty"


def _positive(v):
    vals = v if isinstance(v, list) else [v]
    return None if all(x > 0 for x in vals) else "must be positive"


def _nonneg(v):
    vals = v if isinstance(v, list) else [v]
    return None if all(x >= 0 for x in vals) else "must be nonnegative"


def _all(*checks):
    def run(v):
        for c in checks:
            msg = c(v)
            if msg:
                return msg
        return None

    return run


def _ascending(v):
    return None if all(b > a for a, b in zip(v, v[1:])) else "must be strictly ascending"


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict
    out: Optional[str] = None
    fmt: str = "csv"

    def echo(self) -> dict:
        return {k: self.params[k] for k in sorted(self.params)}


def build_config(experiment: str, raw: dict, out=None, fmt=None) -> ExperimentConfig:
    exp = EXPERIMENTS[experiment]
    unknown = sorted(set(raw) - set(exp.params))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key for '{experiment}' (known: {', '.join(sorted(exp.params))})")
    params = {}
    for key, p in exp.params.items():
        text = raw.get(key, p.default)
        try:
            value = p.parse(text)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{key}: cannot parse {text!r} ({exc})") from None
        if p.check:
            msg = p.check(value)
            if msg:
                raise ConfigError(f"{key}: {msg}")
        params[key] = value
    if exp.validate:
        exp.validate(params)
    return ExperimentConfig(experiment, params, out, fmt or exp.default_format)


# -- results -------------------------------------------------------------------


@dataclass
class Result:
    columns: tuple = ()
    rows: list = field(default_factory=list)
    checks: list = field(default_factory=list)

    def check(self, name, value, tolerance, passed, error=None):
        entry = {"name": name, "value": value, "tolerance": tolerance, "pass": bool(passed)}
        if error is not None:
            entry["error"] = error
        self.checks.append(entry)

    @property
    def ok(self) -> bool:
        return all(c["pass"] for c in self.checks)


def _num(x):
    if x is None:
        return None
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    return x if math.isfinite(x) else None


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def render(cfg: ExperimentConfig, res: Result) -> str:
    if cfg.fmt == "json":
        doc = {"experiment": cfg.experiment, "checks": [{k: _num(v) if k in ("value", "tolerance") else v for k, v in c.items()} for c in res.checks], "config_echo": cfg.echo()}
        if res.columns:
            doc["columns"] = list(res.columns)
            doc["rows"] = [[_num(x) for x in row] for row in res.rows]
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"
    buf = io.StringIO()
    if res.columns:
        header, rows = res.columns, res.rows
    else:
        header = ("name", "value", "tolerance", "pass")
        rows = [(c["name"], c["value"], c["tolerance"], c["pass"]) for c in res.checks]
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(x if isinstance(x, str) else _cell(x) for x in row) + "\n")
    return buf.getvalue()


# -- experiments ---------------------------------------------------------------


def _evolve_view(p) -> Window:
    # sites swept by the packet over the whole grid, widened by radius
    lo = p["site"] + min(math.floor(min(p["t"])), 0) - p["radius"]
    hi = p["site"] + max(math.ceil(max(p["t"])), 0) + p["radius"]
    return Window(lo, hi)


def _evolve_validate(p):
    view = _evolve_view(p)
    reach = max(p["site"] - view.lo, view.hi - p["site"])
    if p["method"] == "exact" and p["pad"] < reach:
        raise ConfigError(f"pad: must be at least {reach} to cover the reported sites")
    if p["method"] == "fft" and p["grid"] < 2 * reach + 1:
        raise ConfigError(f"grid: must be at least {2 * reach + 1} points to hold the reported sites")


def run_evolve(p) -> Result:
    f = WaveFunction.delta(p["site"])
    view = _evolve_view(p)
    res = Result(("t", "site", "re", "im", "abs2"))
    grid = MomentumGrid(p["grid"])
    for t in p["t"]:
        g = apply_shift_exact(f, t, p["pad"]) if p["method"] == "exact" else apply_shift_fft(f, t, grid)
        g = g.restrict(view)
        for l, a in zip(g.window.sites, g.amplitudes):
            res.rows.append((t, int(l), a.real, a.imag, abs(a) ** 2))
    return res


def _hs_validate(p):
    cut = p["cutoffs"]
    if len(cut) < 4 or cut[-1] < 8 * cut[0]:
        raise ConfigError("cutoffs: need at least 4 values spanning 3 octaves")
    for t in p["t"]:
        if is_integer_time(t) and -2 * cut[-1] <= t <= -2:
            raise ConfigError(f"t: {t:g} makes a denominator vanish; use t > -2 or non-integer t")


def run_hs_divergence(p) -> Result:
    res = Result(("t", "M", "I", "slope", "stderr"))
    for t in p["t"]:
        tt = t - math.floor(t) if p["canonical"] else t
        s = hs_divergence_fit(tt, p["cutoffs"])
        for M, I in zip(s.cutoffs, s.partial_sums):
            res.rows.append((t, M, I, s.fitted_slope, s.slope_stderr))
        target = expected_slope(tt)
        if target == 0.0:
            res.check(f"I_zero[t={t:g}]", max(s.partial_sums), 0.0, max(s.partial_sums) == 0.0)
        else:
            rel = abs(s.fitted_slope - target) / target
            res.check(f"slope_rel_error[t={t:g}]", rel, p["slope_tol"], rel <= p["slope_tol"])
            inc = float(np.min(s.increments))
            res.check(f"min_increment[t={t:g}]", inc, 0.0, inc > 0)
    return res


def run_aa_profile(p) -> Result:
    f, g = WaveFunction.delta(p["f_site"]), WaveFunction.delta(p["g_site"])
    prof = dd.aa_decay_profile(f, g, p["t"])
    res = Result(("t", "value"), [(t, v) for t, v in zip(prof.times, prof.values)])
    lag = p["g_site"] - p["f_site"]
    for T, sup in prof.envelope:
        if T + lag <= 0:
            continue
        bound = p["envelope_factor"] / (math.pi * (T + lag))
        res.check(f"envelope[T={T:g}]", sup, bound, sup <= bound)
    return res


def _tail_validate(p):
    if p["pad_factor"] <= 1:
        raise ConfigError("pad_factor: must exceed 1")


def run_tail_profile(p) -> Result:
    f = WaveFunction.delta(0)
    res = Result(("t", "R", "tail", "R_tail"))
    for t in p["t"]:
        target = 2 * sinpi(t) ** 2 / math.pi**2
        for R in p["radii"]:
            w = dd.tail_weight(f, t, R, pad=p["pad_factor"] * R)
            res.rows.append((t, R, w, R * w))
            if target == 0.0:
                res.check(f"tail_zero[t={t:g};R={R}]", w, 0.0, w == 0.0)
            else:
                rel = abs(R * w - target) / target
                res.check(f"R_tail_rel_error[t={t:g};R={R}]", rel, p["rel_tol"], rel <= p["rel_tol"])
    return res


def _random_pair(seed: int, width: int):
    rng = np.random.default_rng(seed)
    w = Window(0, width - 1)
    mk = lambda: WaveFunction(w, rng.normal(size=width) + 1j * rng.normal(size=width))
    return mk(), mk()


def run_kms_check(p) -> Result:
    pairs = [("delta", WaveFunction.delta(p["site"]), WaveFunction.delta(p["site"]))]
    if p["random_pair"]:
        pairs.append(("random", *_random_pair(p["seed"], p["random_width"])))
    res = Result()
    for beta in p["beta"]:
        state = QuasiFreeState(beta)
        for t in p["t"]:
            for label, f, g in pairs:
                r = kms_residual(state, f, g, t)
                res.check(f"kms[{label};beta={beta:g};t={t:g}]", r, p["tol"], r <= p["tol"])
    return res


def _generator_validate(p):
    if max(p["windows"]) > 4096:
        raise ConfigError("windows: dense exponentiation is limited to 4096 sites")


def run_generator_check(p) -> Result:
    res = Result(("W", "error"))
    errs = []
    for W in p["windows"]:
        err = generator_column_error(Window(-(W // 2), W - W // 2 - 1), p["t"], max_size=4096)
        errs.append(err)
        res.rows.append((W, err))
    worst = max((b - a for a, b in zip(errs, errs[1:])), default=0.0)
    res.check("max_error_increase", worst, 0.0, worst <= 0.0)
    return res


ORACLE_CHECKS = ("car", "pauli", "equivalence", "gibbs")


def _oracle_validate(p):
    bad = [s for s in p["suite"] if s not in ORACLE_CHECKS]
    if bad:
        raise ConfigError(f"suite: unknown check {bad[0]!r} (known: {', '.join(ORACLE_CHECKS)})")


def run_oracle_suite(p) -> Result:
    res = Result()
    cap = p["cap"]
    rng = np.random.default_rng(p["seed"])
    jobs = []
    for name in p["suite"]:
        if name == "car":
            jobs.append(("car_residual", p["car_tol"], lambda: fo.car_residual(p["sites"], cap)))
        elif name == "pauli":
            jobs.append(("pauli_residual", p["car_tol"], lambda: fo.pauli_residual(p["sites"], cap)))
        elif name == "equivalence":
            for n in p["equivalence_sites"]:
                jobs.append((f"equivalence[{n}]", p["equivalence_tol"], _equivalence_job(n, p["samples"], cap, rng)))
        else:
            for beta in p["gibbs_beta"]:
                jobs.append((f"gibbs_routes[beta={beta:g}]", p["gibbs_tol"], _gibbs_job(p["gibbs_sites"], beta, cap)))
    for name, tol, job in jobs:
        try:
            value = job()
        except fo.SiteCapError as exc:
            res.check(name, None, tol, False, error=str(exc))
            continue
        res.check(name, value, tol, value <= tol)
    return res


def _equivalence_job(n, samples, cap, rng):
    draws = [(rng.normal(size=n) + 1j * rng.normal(size=n), rng.uniform(-3, 3)) for _ in range(samples)] if n <= cap else []

    def job():
        w = fo.as_window(n, cap)
        return max(fo.quasifree_equivalence_check(w, WaveFunction(w, a), t, cap) for a, t in draws)

    return job


def _gibbs_job(n, beta, cap):
    def job():
        w = fo.as_window(n, cap)
        return float(np.max(np.abs(fo.gibbs_correlation_dense(w, beta, cap) - fo.gibbs_correlation_closed(w, beta, cap))))

    return job


@dataclass(frozen=True)
class Experiment:
    run: Callable[[dict], Result]
    params: dict
    validate: Optional[Callable[[dict], None]] = None
    default_format: str = "csv"


EXPERIMENTS = {
    "evolve": Experiment(
        run_evolve,
        {
            "t": Param(FLOATS, "0:2:0.25", _nonempty),
            "site": Param(int, "0"),
            "radius": Param(int, "20", _nonneg),
            "pad": Param(int, "2048", _nonneg),
            "method": Param(_choice("exact", "fft"), "exact"),
            "grid": Param(_int_token, "4096", _positive),
        },
        _evolve_validate,
    ),
    "hs-divergence": Experiment(
        run_hs_divergence,
        {
            "t": Param(FLOATS, "0.5", _nonempty),
            "cutoffs": Param(INTS, "2^10,2^11,2^12,2^13,2^14,2^15,2^16,2^17,2^18,2^19,2^20", _all(_nonempty, _positive, _ascending)),
            "slope_tol": Param(_float, "0.10", _positive),
            "canonical": Param(_bool, "false"),
        },
        _hs_validate,
    ),
    "aa-profile": Experiment(
        run_aa_profile,
        {
            "t": Param(FLOATS, "0.25:128:0.25", _all(_nonempty, _ascending)),
            "f_site": Param(int, "0"),
            "g_site": Param(int, "0"),
            "envelope_factor": Param(_float, "1.05", _positive),
        },
    ),
    "tail-profile": Experiment(
        run_tail_profile,
        {
            "t": Param(FLOATS, "0.5", _nonempty),
            "radii": Param(INTS, "100,1000,10000", _all(_nonempty, _positive)),
            "pad_factor": Param(int, "100", _positive),
            "rel_tol": Param(_float, "0.20", _positive),
        },
        _tail_validate,
    ),
    "kms-check": Experiment(
        run_kms_check,
        {
            "beta": Param(FLOATS, "0.5,1,2", _nonempty),
            "t": Param(FLOATS, "0,0.3,1.7", _nonempty),
            "site": Param(int, "0"),
            "random_pair": Param(_bool, "true"),
            "random_width": Param(int, "4", _positive),
            "seed": Param(int, "0", _nonneg),
            "tol": Param(_float, "1e-8", _positive),
        },
        default_format="json",
    ),
    "generator-check": Experiment(
        run_generator_check,
        {
            "t": Param(_float, "0.5"),
            "windows": Param(INTS, "64,128,256,512", _all(_nonempty, _positive, _ascending)),
        },
        _generator_validate,
    ),
    "oracle-suite": Experiment(
        run_oracle_suite,
        {
            "suite": Param(lambda s: [x.strip() for x in s.split(",") if x.strip()], ",".join(ORACLE_CHECKS), _nonempty),
            "cap": Param(int, str(fo.DEFAULT_SITE_CAP), _positive),
            "sites": Param(int, "10", _positive),
            "equivalence_sites": Param(INTS, "6,8", _all(_nonempty, _positive)),
            "samples": Param(int, "20", _positive),
            "gibbs_sites": Param(int, "6", _positive),
            "gibbs_beta": Param(FLOATS, "0.5,1", _nonempty),
            "seed": Param(int, "0", _nonneg),
            "car_tol": Param(_float, "1e-13", _positive),
            "equivalence_tol": Param(_float, "1e-9", _positive),
            "gibbs_tol": Param(_float, "1e-8", _positive),
        },
        _oracle_validate,
        default_format="json",
    ),
}


# -- entry point ---------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shiftflow", description="Numerical experiments for the continuous quasi-free shift flow.")
    ap.add_argument("experiment", choices=sorted(EXPERIMENTS))
    ap.add_argument("--config", metavar="PATH")
    ap.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    ap.add_argument("--format", choices=("csv", "json"))
    ap.add_argument("--method", choices=("exact", "fft"), help="evolve only; same as method=...")
    ap.add_argument("overrides", nargs="*", metavar="key=value")
    return ap


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_intermixed_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    raw = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            print(f"shiftflow: cannot read config {args.config}: {exc.strerror}", file=sys.stderr)
            return EXIT_IO
        try:
            raw.update(read_config(text))
        except ConfigError as exc:
            print(f"shiftflow: {args.config}: {exc}", file=sys.stderr)
            return EXIT_USAGE
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            print(f"shiftflow: override {item!r} is not key=value", file=sys.stderr)
            return EXIT_USAGE
        raw[key.strip()] = value.strip()
    if args.method:
        raw["method"] = args.method
    try:
        cfg = build_config(args.experiment, raw, args.out, args.format)
    except ConfigError as exc:
        print(f"shiftflow: {exc}", file=sys.stderr)
        return EXIT_USAGE

    result = EXPERIMENTS[cfg.experiment].run(cfg.params)
    text = render(cfg, result)
    if cfg.out:
        try:
            with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"shiftflow: cannot write {cfg.out}: {exc.strerror}", file=sys.stderr)
            return EXIT_IO
    else:
        sys.stdout.write(text)
    for c in result.checks:
        if not c["pass"]:
            print(f"shiftflow: check failed: {c['name']}" + (f" ({c['error']})" if "error" in c else ""), file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
