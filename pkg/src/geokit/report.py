"""Markdown summaries of archived suite runs."""

from __future__ import annotations

import logging

import duckdb

from geokit.errors import GeokitError
from geokit.store import (
    latest_run,
    min_slack_cases,
    reported_products,
    rule_tallies,
    run_info,
)

logger = logging.getLogger(__name__)


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.6g}"


def generate_report(conn: duckdb.DuckDBPyConnection, run_id: int | None = None) -> str:
    """Markdown report for one archived run; the latest run by default."""
    if run_id is None:
        run_id = latest_run(conn)
    info = run_info(conn, run_id) if run_id is not None else None
    if info is None:
        raise GeokitError(f"no archived run {run_id!r}")

    sections = []
    sections.append(_header(info))
    sections.append(_tallies(conn, run_id))
    sections.append(_min_slack(conn, run_id))
    sections.append(_reported(conn, run_id))

    return "\n\n".join(sections)


def _header(info: dict) -> str:
    dims = ", ".join(str(n) for n in info["dims"] or [])
    return f"""# geokit suite report: run {info['id']}

**Suite**: {info['suite']}
**Seed**: {info['seed']}
**Resolution**: {info['resolution']}
**Dimensions**: {dims}
**Created**: {info['created_at']}"""


def _tallies(conn: duckdb.DuckDBPyConnection, run_id: int) -> str:
    rows = rule_tallies(conn, run_id)
    if not rows:
        return "## Tallies\n\nNo cases archived."

    lines = ["## Tallies\n"]
    lines.append("| Rule | Verified | Inconclusive | Violated | Reported | Errors | Inconclusive rate |")
    lines.append("|------|----------|--------------|----------|----------|--------|-------------------|")
    for r in rows:
        lines.append(
            f"| {r['rule_id']} | {r['verified']} | {r['inconclusive']} | {r['violated']} "
            f"| {r['reported']} | {r['errors']} | {r['inconclusive_rate']:.1%} |"
        )

    violated = sum(r["violated"] for r in rows)
    if violated:
        lines.append(f"\n**{violated} violated case(s).**")
    return "\n".join(lines)


def _min_slack(conn: duckdb.DuckDBPyConnection, run_id: int) -> str:
    cases = min_slack_cases(conn, run_id)
    if not cases:
        return "## Tightest Cases\n\nNo decided cases."

    lines = ["## Tightest Cases\n"]
    lines.append("| Rule | Part | Case | p | i | alpha | lhs | rhs | slack | verdict |")
    lines.append("|------|------|------|---|---|-------|-----|-----|-------|---------|")
    for c in cases:
        alpha = "" if c["alpha"] is None else c["alpha"]
        lines.append(
            f"| {c['rule_id']} | {c['part']} | {c['case_index']} | {_fmt(c['p'])} "
            f"| {_fmt(c['i'])} | {alpha} | {_fmt(c['lhs'])} | {_fmt(c['rhs'])} "
            f"| {c['slack']:.3g} | {c['verdict']} |"
        )
    return "\n".join(lines)


def _reported(conn: duckdb.DuckDBPyConnection, run_id: int) -> str:
    products = reported_products(conn, run_id)
    if not products:
        return "## Report-only Checks\n\nNone in this run."

    lines = ["## Report-only Checks\n"]
    lines.append("Logged without a verdict; the governing constant is not known.\n")
    lines.append("| Rule | Part | Case | p | value | reference | ratio |")
    lines.append("|------|------|------|---|-------|-----------|-------|")
    for c in products:
        lines.append(
            f"| {c['rule_id']} | {c['part']} | {c['case_index']} | {_fmt(c['p'])} "
            f"| {_fmt(c['lhs'])} | {_fmt(c['rhs'])} | {_fmt(c['ratio'])} |"
        )
    return "\n".join(lines)
