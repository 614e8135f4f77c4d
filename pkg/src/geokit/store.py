"""DuckDB archive of suite runs."""

from __future__ import annotations

import json
import logging
import os

import duckdb

from geokit import DB_PATH
from geokit.models import SuiteReport, VerdictReport

logger = logging.getLogger(__name__)


def get_connection(path: str | None = None) -> duckdb.DuckDBPyConnection:
    """Open (and initialise) the archive; ":memory:" gives a throwaway database."""
    path = path or DB_PATH
    if path != ":memory:":
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
    conn = duckdb.connect(path)
    create_tables(conn)
    return conn


def create_tables(conn: duckdb.DuckDBPyConnection) -> None:
    conn.execute("""
        CREATE SEQUENCE IF NOT EXISTS seq_suite_run START 1
    """)

    conn.execute("""
        CREATE TABLE IF NOT EXISTS suite_run (
            id INTEGER PRIMARY KEY,
            suite TEXT NOT NULL,
            seed BIGINT NOT NULL,
            resolution INTEGER NOT NULL,
            schema_version INTEGER NOT NULL,
            dims INTEGER[],
            tallies JSON,
            created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
        )
    """)

    conn.execute("""
        CREATE SEQUENCE IF NOT EXISTS seq_verdict START 1
    """)

    conn.execute("""
        CREATE TABLE IF NOT EXISTS verdict (
            id INTEGER PRIMARY KEY,
            run_id INTEGER NOT NULL,
            case_index INTEGER NOT NULL,
            rule_id TEXT NOT NULL,
            part TEXT,
            p DOUBLE,
            i DOUBLE,
            alpha INTEGER,
            relation TEXT,
            lhs DOUBLE,
            lhs_kind TEXT,
            rhs DOUBLE,
            rhs_kind TEXT,
            slack DOUBLE,
            tolerance DOUBLE,
            verdict TEXT,
            verifiability TEXT,
            error TEXT,
            details JSON
        )
    """)

    conn.execute("""
        CREATE INDEX IF NOT EXISTS idx_verdict_run
        ON verdict (run_id, rule_id)
    """)


def _insert_verdict(conn: duckdb.DuckDBPyConnection, run_id: int, r: VerdictReport) -> None:
    verdict_id = conn.execute("SELECT nextval('seq_verdict')").fetchone()[0]
    conn.execute(
        """INSERT INTO verdict (id, run_id, case_index, rule_id, part, p, i, alpha,
           relation, lhs, lhs_kind, rhs, rhs_kind, slack, tolerance, verdict,
           verifiability, error, details)
           VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)""",
        [verdict_id, run_id, r.case_index, r.rule_id, r.part,
         r.inputs.get("p"), r.inputs.get("i"), r.inputs.get("alpha"), r.relation,
         r.lhs.value if r.lhs else None, r.lhs.kind if r.lhs else None,
         r.rhs.value if r.rhs else None, r.rhs.kind if r.rhs else None,
         r.slack, r.tolerance, r.verdict, r.verifiability, r.error,
         json.dumps(r.details) if r.details else None],
    )


def insert_suite(conn: duckdb.DuckDBPyConnection, report: SuiteReport) -> int:
    """Archive a suite report with all of its cases; returns the run id."""
    run_id = conn.execute("SELECT nextval('seq_suite_run')").fetchone()[0]
    tallies = {rule_id: t.model_dump() for rule_id, t in report.tallies.items()}
    conn.execute(
        """INSERT INTO suite_run (id, suite, seed, resolution, schema_version, dims, tallies)
           VALUES (?, ?, ?, ?, ?, ?, ?)""",
        [run_id, report.suite, report.seed, report.resolution, report.schema_version,
         report.dims, json.dumps(tallies)],
    )
    for case in report.cases:
        _insert_verdict(conn, run_id, case)
    logger.info("Archived run %d (%d cases)", run_id, len(report.cases))
    return run_id


def latest_run(conn: duckdb.DuckDBPyConnection) -> int | None:
    row = conn.execute("SELECT MAX(id) FROM suite_run").fetchone()
    return row[0] if row else None


def run_info(conn: duckdb.DuckDBPyConnection, run_id: int) -> dict | None:
    row = conn.execute(
        "SELECT id, suite, seed, resolution, schema_version, dims, tallies, created_at "
        "FROM suite_run WHERE id = ?",
        [run_id],
    ).fetchone()
    if row is None:
        return None
    return {
        "id": row[0],
        "suite": row[1],
        "seed": row[2],
        "resolution": row[3],
        "schema": row[4],
        "dims": row[5],
        "tallies": json.loads(row[6]) if row[6] else {},
        "created_at": row[7],
    }


def rule_tallies(conn: duckdb.DuckDBPyConnection, run_id: int) -> list[dict]:
    """Per-rule verdict counts over the archived cases of one run."""
    rows = conn.execute("""
        SELECT
            rule_id,
            COUNT(*) FILTER (WHERE verdict = 'verified') AS verified,
            COUNT(*) FILTER (WHERE verdict = 'inconclusive') AS inconclusive,
            COUNT(*) FILTER (WHERE verdict = 'violated') AS violated,
            COUNT(*) FILTER (WHERE verdict IS NULL) AS reported,
            COUNT(*) FILTER (WHERE error IS NOT NULL) AS errors
        FROM verdict
        WHERE run_id = ?
        GROUP BY rule_id
        ORDER BY rule_id
    """, [run_id]).fetchall()

    return [
        {
            "rule_id": r[0],
            "verified": r[1],
            "inconclusive": r[2],
            "violated": r[3],
            "reported": r[4],
            "errors": r[5],
            "inconclusive_rate": r[2] / (r[1] + r[2] + r[3]) if r[1] + r[2] + r[3] else 0.0,
        }
        for r in rows
    ]


def min_slack_cases(conn: duckdb.DuckDBPyConnection, run_id: int, limit: int = 10) -> list[dict]:
    """Decided cases ordered by slack, tightest first."""
    rows = conn.execute("""
        SELECT case_index, rule_id, part, p, i, alpha, lhs, rhs, slack, tolerance, verdict
        FROM verdict
        WHERE run_id = ? AND verdict IS NOT NULL AND slack IS NOT NULL AND error IS NULL
        ORDER BY slack ASC, rule_id, case_index
        LIMIT ?
    """, [run_id, limit]).fetchall()

    return [
        {
            "case_index": r[0],
            "rule_id": r[1],
            "part": r[2],
            "p": r[3],
            "i": r[4],
            "alpha": r[5],
            "lhs": r[6],
            "rhs": r[7],
            "slack": r[8],
            "tolerance": r[9],
            "verdict": r[10],
        }
        for r in rows
    ]


def reported_products(conn: duckdb.DuckDBPyConnection, run_id: int) -> list[dict]:
    """Report-only cases: the logged lhs against its reference value."""
    rows = conn.execute("""
        SELECT case_index, rule_id, part, p, i, alpha, lhs, rhs
        FROM verdict
        WHERE run_id = ? AND verdict IS NULL AND error IS NULL
        ORDER BY rule_id, case_index
    """, [run_id]).fetchall()

    return [
        {
            "case_index": r[0],
            "rule_id": r[1],
            "part": r[2],
            "p": r[3],
            "i": r[4],
            "alpha": r[5],
            "lhs": r[6],
            "rhs": r[7],
            "ratio": r[6] / r[7] if r[6] is not None and r[7] else None,
        }
        for r in rows
    ]
