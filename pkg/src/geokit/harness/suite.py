"""Fuzzed suites: generate cases per rule, check them, aggregate tallies."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

from geokit import DEFAULT_RESOLUTION
from geokit.config import thread_count
from geokit.errors import DegenerateBodyError, SkippedCaseError
from geokit.harness.catalogue import expand_rule_ids, get_rule
from geokit.harness.rules import CaseContext, CaseKey, Rule, check
from geokit.models import (
    RuleTally,
    SearchConfig,
    SuiteReport,
    VerdictReport,
    default_i_values,
    default_p_values,
)

logger = logging.getLogger(__name__)

# Case indices kept per rule in SuiteReport.min_slack.
MIN_SLACK_CASES = 3


def admissible_keys(
    rule: Rule,
    dims: Sequence[int],
    p_values: Sequence[float] | None = None,
    i_values: Sequence[float] | None = None,
    report_only: bool = False,
) -> list[tuple[int, CaseKey]]:
    """(dim, key) pairs a suite cycles through, in catalogue order."""
    out = []
    for n in dims:
        ps = list(p_values) if p_values else default_p_values(n)
        is_ = list(i_values) if i_values else default_i_values(n)
        out.extend((n, key) for key in rule.keys(n, ps, is_, report_only=report_only))
    return out


def _error_report(rule: Rule, key: CaseKey, ctx: CaseContext, exc: Exception) -> VerdictReport:
    part = rule.part(key.part)
    return VerdictReport(
        rule_id=rule.id,
        part=key.part,
        case_index=ctx.case_index,
        inputs={"dim": ctx.dim, "p": key.p, "i": key.i, "alpha": key.alpha, **dict(key.extra)},
        relation=part.relation,
        verdict="inconclusive",
        verifiability=part.verifiability,
        error=f"{type(exc).__name__}: {exc}",
    )


def run_case(rule: Rule, ctx: CaseContext, key: CaseKey) -> VerdictReport | None:
    """One case; None when the generated inputs fall outside the rule's class.

    A two-sided violation is re-checked at doubled resolution and the
    escalated report is the one kept.
    """
    try:
        inputs = rule.generate(ctx, key)
    except (SkippedCaseError, DegenerateBodyError) as e:
        logger.debug("%s case %d skipped: %s", rule.id, ctx.case_index, e)
        return None
    except Exception as e:
        logger.error("%s case %d: input generation failed: %s", rule.id, ctx.case_index, e)
        return _error_report(rule, key, ctx, e)

    try:
        report = check(rule, inputs, ctx.case_search())
        if report.verdict == "violated" and report.verifiability == "two-sided":
            logger.info("%s/%s case %d violated at resolution %d; re-checking at %d",
                        rule.id, key.part, ctx.case_index, ctx.resolution, 2 * ctx.resolution)
            fine = ctx.escalated()
            report = check(rule, rule.generate(fine, key), fine.case_search())
            report.details["escalated"] = 1.0
    except SkippedCaseError as e:
        logger.debug("%s case %d skipped: %s", rule.id, ctx.case_index, e)
        return None
    except Exception as e:
        logger.error("%s/%s case %d failed: %s", rule.id, key.part, ctx.case_index, e)
        return _error_report(rule, key, ctx, e)
    if report.verdict == "violated":
        logger.warning("%s/%s case %d VIOLATED: slack %.3g beyond tolerance %.3g",
                       rule.id, key.part, ctx.case_index, report.slack, report.tolerance)
    return report


def tally(reports: Sequence[VerdictReport | None]) -> RuleTally:
    out = RuleTally()
    for report in reports:
        if report is None:
            out.skipped += 1
            continue
        if report.error is not None:
            out.errors += 1
        if report.verdict is None:
            out.reported += 1
        elif report.verdict == "verified":
            out.verified += 1
        elif report.verdict == "violated":
            out.violated += 1
        else:
            out.inconclusive += 1
    return out


def min_slack_cases(reports: Sequence[VerdictReport], keep: int = MIN_SLACK_CASES) -> list[int]:
    """Case indices with the smallest finite slack among decided cases."""
    decided = [r for r in reports if r.verdict is not None and r.error is None
               and r.slack is not None and math.isfinite(r.slack)]
    decided.sort(key=lambda r: (r.slack, r.case_index))
    return [r.case_index for r in decided[:keep]]


def fuzz_suite(
    rule_ids: Sequence[str],
    count: int = 20,
    seed: int = 0,
    dims: Sequence[int] = (2,),
    p_values: Sequence[float] | None = None,
    i_values: Sequence[float] | None = None,
    resolution: int = DEFAULT_RESOLUTION,
    cfg: SearchConfig | None = None,
    report_only: bool = False,
) -> SuiteReport:
    """Run `count` generated cases for every rule; deterministic per seed.

    Case k of a rule uses the k-th admissible (dim, key) pair cyclically and
    draws its bodies from a seed private to (seed, rule, k).
    """
    ids = expand_rule_ids(rule_ids)
    cfg = cfg or SearchConfig(seed=seed)
    jobs: list[tuple[Rule, CaseContext, CaseKey]] = []
    for rule_id in ids:
        rule = get_rule(rule_id)
        keys = admissible_keys(rule, dims, p_values, i_values, report_only)
        if not keys:
            logger.warning("%s: no admissible cases for dims %s", rule_id, list(dims))
            continue
        for k in range(count):
            n, key = keys[k % len(keys)]
            ctx = CaseContext(rule.id, k, seed, n, resolution, cfg)
            jobs.append((rule, ctx, key))

    logger.info("Running %d cases over %d rules", len(jobs), len(ids))
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        results = list(pool.map(lambda job: run_case(*job), jobs))

    by_rule: dict[str, list[VerdictReport | None]] = {rule_id: [] for rule_id in ids}
    for (rule, _, _), report in zip(jobs, results):
        by_rule[rule.id].append(report)

    cases = [r for r in results if r is not None]
    tallies = {rule_id: tally(reports) for rule_id, reports in by_rule.items()}
    min_slack = {rule_id: min_slack_cases([r for r in reports if r is not None])
                 for rule_id, reports in by_rule.items()}
    for rule_id, t in tallies.items():
        logger.info("%s: %d verified, %d inconclusive, %d violated, %d reported, %d skipped",
                    rule_id, t.verified, t.inconclusive, t.violated, t.reported, t.skipped)
    return SuiteReport(
        suite=",".join(rule_ids),
        seed=seed,
        resolution=resolution,
        dims=list(dims),
        cases=cases,
        tallies=tallies,
        min_slack=min_slack,
    )
