"""Command line entry point.

Settings come from an optional ``key = value`` config file; flags given on
the command line win.  Exit status: 0 ok, 2 configuration, 3 data,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, TechRulesError
from .report import RunConfig, run
from .rules import generate_rule_grid

# config-file key -> RunConfig field
KEYS = {
    "input": "input_path",
    "cutoff": "cutoff_date",
    "cost": "costs",
    "q": "q_values",
    "replications": "B",
    "warmup": "R",
    "seed": "seed",
    "risk-free": "r_f",
    "short-selling": "short_modes",
    "rules": "rule_selection",
    "out": "output_dir",
    "format": "formats",
    "curve-q": "curve_q",
    "order": "order_path",
    "jobs": "jobs",
    "excess-kurtosis": "excess_kurtosis",
}


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _short_modes(text: str) -> list[bool]:
    t = text.strip().lower()
    if t in ("both", "all"):
        return [False, True]
    if t in ("yes", "true", "1", "allowed"):
        return [True]
    if t in ("no", "false", "0", "disallowed"):
        return [False]
    raise ValueError(f"short-selling must be yes, no or both, not {text!r}")


def _rules(text: str):
    t = text.strip()
    if t.lower() == "all":
        return "all"
    # labels contain commas, so split on ';' or whitespace between labels
    parts, depth, cur = [], 0, ""
    for ch in t:
        depth += ch == "("
        depth -= ch == ")"
        if depth == 0 and ch in ";, \t":
            if cur.strip():
                parts.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        parts.append(cur.strip())
    return parts


def _bool(text: str) -> bool:
    return text.strip().lower() in ("1", "yes", "true", "on")


CONVERT = {
    "input_path": str,
    "cutoff_date": lambda s: dt.date.fromisoformat(s.strip()),
    "costs": _floats,
    "q_values": _floats,
    "B": int,
    "R": int,
    "seed": int,
    "r_f": float,
    "short_modes": _short_modes,
    "rule_selection": _rules,
    "output_dir": str,
    "formats": lambda s: [x.strip().lower() for x in s.split(",") if x.strip()],
    "curve_q": float,
    "order_path": str,
    "jobs": int,
    "excess_kurtosis": _bool,
}


def read_config_file(path: str | Path) -> dict[str, str]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    out = {}
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            key, _, value = line.partition(":")
        key = key.strip().lower().replace("_", "-")
        if key not in KEYS:
            raise ConfigError(f"{path}:{no}: unknown key {key!r}")
        out[key] = value.strip()
    return out


def build_config(settings: dict[str, str]) -> RunConfig:
    cfg = RunConfig()
    for key, raw in settings.items():
        name = KEYS[key]
        try:
            setattr(cfg, name, CONVERT[name](raw))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
    return cfg


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="techrules",
        description="t-tests and White's Reality Check for VMA/FMA/TRB trading rules on daily prices.",
    )
    p.add_argument("--config", help="key = value settings file; flags override it")
    p.add_argument("--input", help="CSV with header date,close")
    p.add_argument("--cutoff", help="drop prices dated before this ISO date")
    p.add_argument("--cost", help="comma-separated one-way cost rates (default 0,0.003,0.005,0.01)")
    p.add_argument("--q", help="comma-separated bootstrap smoothing parameters (default 0.01,0.1,0.5,1)")
    p.add_argument("--replications", help="bootstrap replications B (default 500)")
    p.add_argument("--warmup", help="first evaluation day R, 1-based (default 201)")
    p.add_argument("--seed", help="RNG seed")
    p.add_argument("--risk-free", help="daily risk-free rate for Sharpe ratios (default 0)")
    p.add_argument("--short-selling", help="yes, no or both (default both)")
    p.add_argument("--rules", help="'all' or labels such as 'VMA(1,20,0);TRB(50,0.01,10)'")
    p.add_argument("--out", help="output directory (default results)")
    p.add_argument("--format", help="csv, json or csv,json (default both)")
    p.add_argument("--curve-q", help="q used for the p-value-vs-m curves (default 0.1)")
    p.add_argument("--order", help="file listing rule labels in curve order")
    p.add_argument("--jobs", help="worker threads for bootstrap replications")
    p.add_argument("--excess-kurtosis", action="store_const", const="yes",
                   help="report excess rather than raw kurtosis")
    p.add_argument("--list-rules", action="store_true", help="print the rule grid and exit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    if args.list_rules:
        for rule in generate_rule_grid():
            print(rule.label)
        return 0
    try:
        settings = read_config_file(args.config) if args.config else {}
        for key in KEYS:
            value = getattr(args, key.replace("-", "_"))
            if value is not None:
                settings[key] = value
        report = run(build_config(settings))
    except TechRulesError as exc:
        err = {"stage": exc.stage, "error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(err), file=sys.stderr)
        return exc.exit_code
    best = min(report.wrc_table, key=lambda w: w.p_value)
    print(f"{len(report.rows)} rules, {len(report.wrc_table)} Reality Check cells; "
          f"smallest p-value {best.p_value:.3f} "
          f"(q={best.q:g}, cost={best.cost:g}, short={'yes' if best.short_allowed else 'no'})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
