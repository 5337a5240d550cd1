"""
End-to-end run: prices -> rule positions -> t-test rows and Reality Check
p-values for every (short-sale mode, cost, q) cell -> CSV/JSON tables.

Stored numbers are never scaled.  Display scaling happens only when rows
are written: mean returns x 1e4, standard deviations and Sharpe ratios
x 1e2, as in the published tables.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .conditional import ConditionalStats, evaluate_rule, stars
from .errors import ConfigError, TechRulesError
from .market_data import SummaryStats, compute_returns, read_price_csv, summary_stats, truncate_before
from .reality_check import (
    WrcConfig,
    bootstrap_index_matrix,
    bootstrap_means,
    curve_from_means,
    performance_matrix,
    wrc_from_means,
)
from .rules import RuleSpec, generate_rule_grid, parse_rule, positions_for

MU_SCALE = 1e4
SIGMA_SCALE = 1e2
SHARPE_SCALE = 1e2
DEFAULT_COSTS = (0.0, 0.003, 0.005, 0.01)
DEFAULT_Q = (0.01, 0.1, 0.5, 1.0)
FORMATS = ("csv", "json")


@dataclass
class RunConfig:
    input_path: str | None = None
    cutoff_date: dt.date | None = None
    rule_selection: str | list[str] = "all"
    r_f: float = 0.0
    costs: list[float] = field(default_factory=lambda: list(DEFAULT_COSTS))
    q_values: list[float] = field(default_factory=lambda: list(DEFAULT_Q))
    B: int = 500
    R: int = 201
    short_modes: list[bool] = field(default_factory=lambda: [False, True])
    seed: int = 20140101
    output_dir: str = "results"
    formats: list[str] = field(default_factory=lambda: list(FORMATS))
    curve_q: float = 0.1
    order_path: str | None = None
    jobs: int = 1
    excess_kurtosis: bool = False

    def validate(self) -> None:
        if not self.input_path:
            raise ConfigError("no input file given")
        if not self.costs:
            raise ConfigError("at least one cost rate is required")
        if not self.q_values:
            raise ConfigError("at least one q value is required")
        if not self.short_modes:
            raise ConfigError("at least one short-selling mode is required")
        if self.rule_selection != "all" and not self.rule_selection:
            raise ConfigError("empty rule selection")
        if not set(self.formats) <= set(FORMATS) or not self.formats:
            raise ConfigError(f"formats must be a non-empty subset of {FORMATS}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        # constructs and checks one cell's parameters early
        for q in self.q_values:
            for c in self.costs:
                WrcConfig(R=self.R, q=q, c=c, B=self.B, seed=self.seed)
        WrcConfig(R=self.R, q=self.curve_q, B=self.B, seed=self.seed)

    def rules(self) -> list[RuleSpec]:
        if self.rule_selection == "all":
            return generate_rule_grid()
        return [parse_rule(r) for r in self.rule_selection]

    def echo(self) -> dict:
        out = asdict(self)
        out["cutoff_date"] = self.cutoff_date.isoformat() if self.cutoff_date else None
        return out


@dataclass
class WrcCell:
    short_allowed: bool
    cost: float
    q: float
    p_value: float
    V_bar: float
    best_rule: str
    n: int


@dataclass
class RunReport:
    summary: SummaryStats
    rows: list[ConditionalStats]
    wrc_table: list[WrcCell]
    curves: dict[tuple[float, bool], list[tuple[int, float]]]
    provenance: dict


def _stage(name: str):
    """Tag TechRulesErrors escaping a block with the pipeline stage."""

    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if isinstance(exc, TechRulesError):
                exc.stage = name
            return False

    return _Ctx()


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = (dt.datetime.fromtimestamp(int(epoch), dt.timezone.utc) if epoch
            else dt.datetime.now(dt.timezone.utc))
    return when.replace(microsecond=0).isoformat()


def _read_order(path: str, rules: list[RuleSpec]) -> np.ndarray:
    labels = [r.label for r in rules]
    try:
        lines = Path(path).read_text(encoding="utf-8").split()
    except OSError as exc:
        raise ConfigError(f"cannot read rule ordering {path}: {exc.strerror}") from exc
    wanted = [parse_rule(x).label for x in lines]
    if sorted(wanted) != sorted(labels):
        raise ConfigError("rule ordering file must list every selected rule exactly once")
    return np.array([labels.index(w) for w in wanted])


def run(config: RunConfig, write: bool = True) -> RunReport:
    """Execute the full pipeline and (optionally) write every report file."""
    with _stage("config"):
        config.validate()
        rules = config.rules()
        order = _read_order(config.order_path, rules) if config.order_path else None

    with _stage("market_data"):
        prices = read_price_csv(config.input_path)
        if config.cutoff_date:
            prices = truncate_before(prices, config.cutoff_date)
        returns = compute_returns(prices)
        summary = summary_stats(returns, "log", config.excess_kurtosis)
        if config.R > len(prices):
            raise ConfigError(f"warmup day {config.R} is beyond the {len(prices)}-day series")

    with _stage("rule_engine"):
        positions = [positions_for(prices, r) for r in rules]

    with _stage("conditional_stats"):
        rows = [evaluate_rule(returns, p, config.r_f, config.R, rule)
                for rule, p in zip(rules, positions)]

    with _stage("reality_check"):
        labels = [r.label for r in rules]
        cells = [(short, c) for short in config.short_modes for c in config.costs]
        blocks = [performance_matrix(returns.relative_returns, positions,
                                     WrcConfig(R=config.R, c=c, B=config.B, short_allowed=short,
                                               seed=config.seed),
                                     labels, returns.dates)
                  for short, c in cells]
        F = np.vstack(blocks)
        K, n = len(rules), F.shape[1]
        f_bar = F.mean(axis=1)
        q_list = list(config.q_values)
        if config.curve_q not in q_list:
            q_list.append(config.curve_q)
        wrc_table, curves = [], {}
        for q in q_list:
            idx = bootstrap_index_matrix(n, q, config.B, config.seed)
            boot = bootstrap_means(F, idx, config.jobs)
            for i, (short, c) in enumerate(cells):
                part = slice(i * K, (i + 1) * K)
                cell_cfg = WrcConfig(R=config.R, q=q, c=c, B=config.B, short_allowed=short,
                                     seed=config.seed)
                if q in config.q_values:
                    res = wrc_from_means(f_bar[part], boot[:, part], cell_cfg, n)
                    wrc_table.append(WrcCell(short, c, q, res.p_value, res.V_bar,
                                             labels[res.best_rule], n))
                if q == config.curve_q:
                    curves[(c, short)] = curve_from_means(f_bar[part], boot[:, part], n, order)
        mode_rank = {m: i for i, m in enumerate(config.short_modes)}
        q_rank = {q: i for i, q in enumerate(config.q_values)}
        cost_rank = {c: i for i, c in enumerate(config.costs)}
        wrc_table.sort(key=lambda w: (mode_rank[w.short_allowed], cost_rank[w.cost], q_rank[w.q]))

    provenance = {
        "tool": "techrules",
        "version": __version__,
        "seed": config.seed,
        "timestamp": _timestamp(),
        "config": config.echo(),
        "data": {
            "first_date": str(prices.dates[0]),
            "last_date": str(prices.dates[-1]),
            "prices": len(prices),
            "evaluation_days": n,
        },
        "rng": "numpy PCG64, SeedSequence(seed).spawn(B): one substream per replication",
    }
    report = RunReport(summary, rows, wrc_table, curves, provenance)
    if write:
        with _stage("report"):
            emit_tables(report, config.output_dir, config.formats)
    return report


# --- serialization -------------------------------------------------------

def _num(x: float) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if math.isnan(x):
        return "NaN"
    return format(float(x), ".12g")


def _json_num(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _mode_name(short: bool) -> str:
    return "short" if short else "noshort"


def summary_rows(s: SummaryStats) -> list[dict]:
    kurt = "excess_kurtosis" if s.excess_kurtosis else "kurtosis"
    return [
        {"statistic": "mean", "value": s.mean},
        {"statistic": "std", "value": s.std},
        {"statistic": "skew", "value": s.skew},
        {"statistic": kurt, "value": s.kurtosis},
        {"statistic": "observations", "value": s.observations},
    ]


CONDITIONAL_COLUMNS = ("rule", "N_l", "N_s", "mu_l", "mu_l_sig", "mu_s", "mu_s_sig",
                       "delta_mu", "delta_mu_sig", "sigma_l", "sigma_s", "p_l", "p_s",
                       "s_l", "s_s", "t_l", "t_s", "t_ls")


def conditional_row(row: ConditionalStats) -> dict:
    """One table row with display scaling and significance stars applied."""
    return {
        "rule": row.rule.label if row.rule else "",
        "N_l": row.N_l,
        "N_s": row.N_s,
        "mu_l": row.mu_l * MU_SCALE,
        "mu_l_sig": stars(row.t_l),
        "mu_s": row.mu_s * MU_SCALE,
        "mu_s_sig": stars(row.t_s),
        "delta_mu": row.delta_mu * MU_SCALE,
        "delta_mu_sig": stars(row.t_ls),
        "sigma_l": row.sigma_l * SIGMA_SCALE,
        "sigma_s": row.sigma_s * SIGMA_SCALE,
        "p_l": row.p_l,
        "p_s": row.p_s,
        "s_l": row.s_l * SHARPE_SCALE,
        "s_s": row.s_s * SHARPE_SCALE,
        "t_l": row.t_l,
        "t_s": row.t_s,
        "t_ls": row.t_ls,
    }


def wrc_rows(cells: list[WrcCell], B: int, seed: int, alpha: float = 0.10) -> list[dict]:
    return [{
        "short_selling": "yes" if w.short_allowed else "no",
        "cost": w.cost,
        "q": w.q,
        "p_value": w.p_value,
        "significant_10pct": "yes" if w.p_value < alpha else "no",
        "V_bar": w.V_bar,
        "best_rule": w.best_rule,
        "n": w.n,
        "B": B,
        "seed": seed,
    } for w in cells]


def wrc_wide_rows(cells: list[WrcCell]) -> tuple[list[str], list[dict]]:
    """Wide layout: one row per (short-sale mode, cost), one column per q."""
    qs = list(dict.fromkeys(w.q for w in cells))
    columns = ["short_selling", "cost"] + [f"q={q:g}" for q in qs]
    rows: dict[tuple, dict] = {}
    for w in cells:
        row = rows.setdefault((w.short_allowed, w.cost),
                              {"short_selling": "yes" if w.short_allowed else "no", "cost": w.cost})
        row[f"q={w.q:g}"] = w.p_value
    return columns, list(rows.values())


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else _num(v) for v in (row[c] for c in columns)])
    return buf.getvalue()


def _json_text(payload) -> str:
    def clean(obj):
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [clean(v) for v in obj]
        if isinstance(obj, np.generic):
            obj = obj.item()
        return _json_num(obj)

    return json.dumps(clean(payload), indent=2, allow_nan=False) + "\n"


def emit_tables(report: RunReport, out_dir: str | os.PathLike, formats=FORMATS) -> list[Path]:
    """Write report tables; returns the paths written, in write order.

    All content is rendered in memory first, then written by one writer in
    a fixed order.
    """
    if not report.rows:
        raise ConfigError("report has no rule rows")
    formats = list(formats)
    B = report.provenance["config"]["B"]
    seed = report.provenance["seed"]
    files: dict[str, str] = {}

    summ = summary_rows(report.summary)
    cond = [conditional_row(r) for r in report.rows]
    wrc = wrc_rows(report.wrc_table, B, seed)
    wide_cols, wide = wrc_wide_rows(report.wrc_table)
    scale = {"mu": MU_SCALE, "delta_mu": MU_SCALE, "sigma": SIGMA_SCALE, "s": SHARPE_SCALE}
    if "csv" in formats:
        files["summary.csv"] = _csv_text(("statistic", "value"), summ)
        files["conditional_stats.csv"] = _csv_text(CONDITIONAL_COLUMNS, cond)
        files["wrc.csv"] = _csv_text(tuple(wrc[0]) if wrc else ("p_value",), wrc)
        files["wrc_table.csv"] = _csv_text(wide_cols, wide)
    if "json" in formats:
        files["summary.json"] = _json_text({"summary": summ})
        files["conditional_stats.json"] = _json_text({"scale": scale, "rows": cond})
        files["wrc.json"] = _json_text({
            "cells": wrc,
            "curves": [{"cost": c, "short_selling": "yes" if s else "no",
                        "points": [{"m": m, "p_value": p} for m, p in pts]}
                       for (c, s), pts in report.curves.items()],
        })
    for (c, short), pts in report.curves.items():
        files[f"wrc_curve_{c:g}_{_mode_name(short)}.csv"] = _csv_text(
            ("m", "p_value"), [{"m": m, "p_value": p} for m, p in pts])
    files["provenance.json"] = _json_text(report.provenance)

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, text in files.items():
            path = out / name
            path.write_bytes(text.encode("utf-8"))
            written.append(path)
    except OSError as exc:
        raise ConfigError(f"cannot write to {out}: {exc.strerror}") from exc
    return written


