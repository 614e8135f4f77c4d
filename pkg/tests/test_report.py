"""Tests for the Markdown run report."""

import pytest

from geokit.errors import GeokitError
from geokit.models import FunctionalValue, RuleTally, SuiteReport, VerdictReport
from geokit.report import generate_report
from geokit.store import insert_suite


def _report(violated=False):
    lhs = FunctionalValue(value=2.0 if violated else 1.0, kind="quadrature", err=1e-12)
    rhs = FunctionalValue(value=1.5, kind="quadrature", err=1e-12)
    case = VerdictReport(
        rule_id="DUALH", part="mixed", case_index=0, inputs={"dim": 2},
        lhs=lhs, rhs=rhs, verdict="violated" if violated else "verified",
        slack=rhs.value - lhs.value,
    )
    tallies = {"DUALH": RuleTally(violated=1) if violated else RuleTally(verified=1)}
    return SuiteReport(suite="DUALH", seed=0, resolution=256, cases=[case], tallies=tallies)


class TestGenerateReport:
    def test_no_runs(self, db):
        with pytest.raises(GeokitError):
            generate_report(db)

    def test_sections(self, db):
        run_id = insert_suite(db, _report())
        text = generate_report(db)
        assert text.startswith(f"# geokit suite report: run {run_id}")
        assert "**Suite**: DUALH" in text
        assert "## Tallies" in text
        assert "| DUALH | 1 | 0 | 0 | 0 | 0 | 0.0% |" in text
        assert "## Tightest Cases" in text
        assert "None in this run." in text

    def test_violations_called_out(self, db):
        insert_suite(db, _report(violated=True))
        assert "**1 violated case(s).**" in generate_report(db)

    def test_explicit_run(self, db):
        first = insert_suite(db, _report())
        insert_suite(db, _report(violated=True))
        text = generate_report(db, first)
        assert "violated case" not in text

    def test_unknown_run(self, db):
        insert_suite(db, _report())
        with pytest.raises(GeokitError):
            generate_report(db, 42)
