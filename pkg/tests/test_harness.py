"""Tests for the rule catalogue, case checks and fuzzed suites."""

import pytest

from geokit.bodies import StarBody
from geokit.errors import ArityError, SkippedCaseError, UnknownRuleError
from geokit.harness.catalogue import CATALOGUE, expand_rule_ids, get_rule, rule_group
from geokit.harness.rules import CaseContext, CaseInputs, CaseKey, Evaluation, Part, Rule, check
from geokit.harness.suite import admissible_keys, fuzz_suite, min_slack_cases, run_case, tally
from geokit.harness.verdict import Bound
from geokit.models import VerdictReport

RULE_IDS = [
    "AFFINE", "ORDER", "ASREL", "PROP31", "THM41", "THM42", "PROP32", "AF1", "AF2",
    "ISO", "SANTALO", "COR51", "COR52", "CYCLIC", "MONO", "DUALH", "VPH", "PROP61",
    "ITHCYC", "ITHISO",
]


def _constant(lhs, rhs):
    def evaluate(inputs, cfg):
        return Evaluation(Bound.exact(lhs), Bound.exact(rhs), "lhs", "rhs")
    return evaluate


def _unit_stars(ctx, key):
    grid = ctx.grid()
    return CaseInputs(ctx.rule_id, key, (StarBody(grid, [1.0] * grid.size),) * 2,
                      ctx.case_index)


def _toy_rule(evaluate, generate=_unit_stars, verifiability="two-sided"):
    return Rule("TOY", "toy", (Part("only", "<=", verifiability, evaluate, uses_p=False),),
                generate)


def _context(index=0, resolution=64):
    return CaseContext("TOY", index, 0, 2, resolution)


class TestCatalogue:
    def test_rule_ids(self):
        assert list(CATALOGUE) == RULE_IDS

    def test_get_rule_is_case_insensitive(self):
        assert get_rule("dualh").id == "DUALH"

    def test_unknown_rule(self):
        with pytest.raises(UnknownRuleError):
            get_rule("NOPE")

    def test_groups(self):
        assert rule_group(get_rule("ORDER")) == "structural"
        assert rule_group(get_rule("DUALH")) == "two-sided"
        assert rule_group(get_rule("AFFINE")) == "two-sided"
        assert rule_group(get_rule("ISO")) == "one-sided"

    def test_expand(self):
        ids = expand_rule_ids(["DUALH", "dualh", "all"])
        assert ids[0] == "DUALH"
        assert sorted(ids) == sorted(RULE_IDS)
        assert expand_rule_ids(["structural"]) == ["ORDER"]

    def test_expand_unknown(self):
        with pytest.raises(UnknownRuleError):
            expand_rule_ids(["DUALH", "BOGUS"])

    def test_unknown_part(self):
        with pytest.raises(ArityError):
            get_rule("DUALH").part("nope")

    def test_every_rule_has_keys_in_the_plane(self):
        for rule in CATALOGUE.values():
            assert admissible_keys(rule, [2], report_only=True), rule.id


class TestKeys:
    def test_dualh_keys(self):
        keys = get_rule("DUALH").keys(2, [1.0], [-1.0, 0.0, 1.0, 2.0, 3.0])
        parts = [k.part for k in keys]
        assert parts.count("mixed") == 1
        assert parts.count("ith-inner") == 1
        assert parts.count("ith-outer") == 2
        assert parts.count("ith-edge") == 2

    def test_report_only_parts_are_opt_in(self):
        rule = get_rule("SANTALO")
        default = {k.part for k in rule.keys(2, [-3.0, 1.0], [])}
        opted = {k.part for k in rule.keys(2, [-3.0, 1.0], [], report_only=True)}
        assert "inverse" not in default
        assert "inverse" in opted

    def test_regime_filters(self):
        keys = get_rule("ASREL").keys(2, [1.0, -1.0, -3.0], [])
        assert {(k.part, k.p) for k in keys} >= {("positive", 1.0), ("negative", -1.0),
                                                  ("asp1", -3.0)}
        assert all(not (k.part == "negative" and k.p < -2 and k.alpha == 2) for k in keys)

    def test_extras(self):
        keys = get_rule("VPH").keys(3, [1.0], [])
        assert sorted(k.get("m") for k in keys) == [2.0, 3.0]

    def test_admissible_keys_defaults(self):
        pairs = admissible_keys(get_rule("PROP32"), [2, 3])
        assert {n for n, _ in pairs} == {2, 3}
        assert all(k.p != 0 for _, k in pairs)


class TestCaseContext:
    def test_equality_cases(self):
        assert [_context(k).equality_case for k in range(6)] == [
            False, False, False, False, True, False]

    def test_deterministic_rng(self):
        assert _context(3).rng().random() == _context(3).rng().random()
        assert _context(3).rng().random() != _context(4).rng().random()

    def test_case_search_seed(self):
        assert _context(1).case_search().seed != _context(2).case_search().seed

    def test_escalated(self):
        ctx = _context(resolution=128).escalated()
        assert ctx.resolution == 256
        assert ctx.grid().size == 256


class TestCheck:
    def test_arity(self):
        rule = _toy_rule(_constant(1.0, 2.0))
        inputs = _unit_stars(_context(), CaseKey("only"))
        inputs.bodies = inputs.bodies[:1]
        with pytest.raises(ArityError):
            check(rule, inputs)

    def test_report_fields(self):
        rule = _toy_rule(_constant(1.0, 2.0))
        report = check(rule, _unit_stars(_context(), CaseKey("only")))
        assert report.verdict == "verified"
        assert report.slack == 1.0
        assert report.inputs["dim"] == 2
        assert report.inputs["bodies"][0]["kind"] == "radial"

    def test_certified_failure_detail(self):
        rule = _toy_rule(_constant(2.0, 1.0), verifiability="one-sided")
        report = check(rule, _unit_stars(_context(), CaseKey("only")))
        assert report.verdict == "inconclusive"
        assert report.details["certified_failure"] == 1.0


class TestRunCase:
    def test_violation_is_escalated(self):
        rule = _toy_rule(_constant(2.0, 1.0))
        report = run_case(rule, _context(), CaseKey("only"))
        assert report.verdict == "violated"
        assert report.details["escalated"] == 1.0

    def test_skipped(self):
        def skip(ctx, key):
            raise SkippedCaseError("outside the class")
        assert run_case(_toy_rule(_constant(1.0, 2.0), skip), _context(), CaseKey("only")) is None

    def test_error_is_recorded(self):
        def broken(inputs, cfg):
            raise ValueError("boom")
        report = run_case(_toy_rule(broken), _context(), CaseKey("only"))
        assert report.verdict == "inconclusive"
        assert report.error == "ValueError: boom"


class TestTally:
    def test_counts(self):
        reports = [
            None,
            VerdictReport(rule_id="X", verdict="verified"),
            VerdictReport(rule_id="X", verdict="violated"),
            VerdictReport(rule_id="X", verdict=None, verifiability="report-only"),
            VerdictReport(rule_id="X", verdict="inconclusive", error="E: x"),
        ]
        t = tally(reports)
        assert (t.verified, t.violated, t.reported, t.inconclusive, t.skipped, t.errors) == (
            1, 1, 1, 1, 1, 1)
        assert t.inconclusive_rate == pytest.approx(1 / 3)

    def test_min_slack(self):
        reports = [
            VerdictReport(rule_id="X", case_index=k, verdict="verified", slack=s)
            for k, s in enumerate([0.5, 0.1, 0.3, 0.2])
        ]
        assert min_slack_cases(reports, keep=2) == [1, 3]


class TestFuzzSuite:
    def test_dualh(self):
        report = fuzz_suite(["DUALH"], count=12, seed=1, dims=(2, 3), resolution=128)
        t = report.tallies["DUALH"]
        assert t.verified == 12
        assert report.violated == 0
        assert len(report.min_slack["DUALH"]) == 3

    def test_prop32(self):
        report = fuzz_suite(["PROP32"], count=8, seed=2, resolution=128)
        assert report.tallies["PROP32"].verified == 8

    def test_deterministic(self):
        a = fuzz_suite(["DUALH"], count=5, seed=3, resolution=128)
        b = fuzz_suite(["DUALH"], count=5, seed=3, resolution=128)
        assert a.model_dump_json(by_alias=True) == b.model_dump_json(by_alias=True)
        c = fuzz_suite(["DUALH"], count=5, seed=4, resolution=128)
        assert [x.lhs.value for x in a.cases] != [x.lhs.value for x in c.cases]

    def test_serialized_schema_key(self):
        report = fuzz_suite(["DUALH"], count=2, resolution=128)
        assert '"schema": 1' in report.model_dump_json(by_alias=True, indent=2)
        assert report.suite == "DUALH"


def _clean(report, rule_id):
    t = report.tallies[rule_id]
    assert t.violated == 0, rule_id
    assert t.errors == 0, rule_id
    return t


class TestRuleSuites:
    """Small fuzzed runs of each rule family; none may fail or error."""

    @pytest.mark.parametrize("rule_id", ["PROP31", "VPH", "PROP61", "THM41"])
    def test_two_sided(self, rule_id):
        report = fuzz_suite([rule_id], count=10, seed=5, resolution=128)
        t = _clean(report, rule_id)
        assert t.verified > 0
        assert t.inconclusive == 0

    def test_affine(self):
        report = fuzz_suite(["AFFINE"], count=12, seed=5, p_values=[1.0, -1.0], resolution=128)
        t = _clean(report, "AFFINE")
        parts = {c.part for c in report.cases}
        assert parts == {"closed-form", "estimator"}
        assert t.verified == len(report.cases)
        for case in report.cases:
            if case.part == "estimator":
                assert case.tolerance >= 0.02 * max(case.lhs.value, case.rhs.value)

    def test_order(self, small_search):
        report = fuzz_suite(["ORDER"], count=6, seed=5, resolution=128, cfg=small_search)
        assert _clean(report, "ORDER").verified == 6

    @pytest.mark.parametrize("rule_id", ["ISO", "COR52", "AF2", "SANTALO", "THM42"])
    def test_one_sided(self, small_search, rule_id):
        report = fuzz_suite([rule_id], count=6, seed=5, resolution=128, cfg=small_search)
        t = _clean(report, rule_id)
        assert t.verified + t.inconclusive + t.skipped == 6
        assert all(c.verdict in ("verified", "inconclusive") for c in report.cases)


class TestEqualityCases:
    """Equality configurations land within ten error bars of zero slack."""

    EQUALITY_PARTS = {
        "DUALH": None,
        "VPH": None,
        "PROP32": None,
        "PROP31": {"closed-form"},
        "PROP61": {"closed-form"},
    }

    @pytest.mark.parametrize("rule_id", list(EQUALITY_PARTS))
    def test_slack_within_error(self, rule_id):
        report = fuzz_suite([rule_id], count=15, seed=9, resolution=128)
        parts = self.EQUALITY_PARTS[rule_id]
        if parts is None:
            selected = [c for c in report.cases if c.case_index % 5 == 4]
        else:
            selected = [c for c in report.cases if c.part in parts]
        assert selected
        for case in selected:
            assert case.verdict == "verified"
            assert abs(case.slack) <= 10 * case.tolerance, (case.part, case.case_index)


class TestInconclusiveRate:
    @pytest.mark.parametrize("rule_id", ["CYCLIC", "MONO"])
    def test_default_search(self, rule_id):
        report = fuzz_suite([rule_id], count=20, seed=1)
        t = _clean(report, rule_id)
        assert t.inconclusive_rate <= 0.2
