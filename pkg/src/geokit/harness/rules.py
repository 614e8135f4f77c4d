"""Rule and case types, and the single-case check."""

from __future__ import annotations

import itertools
import logging
import zlib
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from geokit.bodies import ConvexSupportBody, SmoothBody, StarBody
from geokit.errors import ArityError
from geokit.geominimal import witness_record
from geokit.harness.verdict import Bound, decide
from geokit.models import Relation, SearchConfig, VerdictReport, Verifiability
from geokit.sphere import SphereGrid, grid_for

logger = logging.getLogger(__name__)

Body = SmoothBody | ConvexSupportBody | StarBody

# Every fifth case feeds the equality configuration of its rule.
EQUALITY_EVERY = 5


@dataclass(frozen=True)
class CaseKey:
    """One admissible (p, i, alpha, extras) combination of a rule part."""

    part: str
    p: float | None = None
    i: float | None = None
    alpha: int | None = None
    extra: tuple[tuple[str, float], ...] = ()

    def get(self, name: str) -> float:
        return dict(self.extra)[name]


@dataclass(frozen=True)
class CaseContext:
    """Everything a generator needs to build one case deterministically."""

    rule_id: str
    case_index: int
    seed: int
    dim: int
    resolution: int
    search: SearchConfig = field(default_factory=SearchConfig)

    @property
    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(
            [self.seed, zlib.crc32(self.rule_id.encode()), self.case_index]
        )

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed_sequence)

    @property
    def equality_case(self) -> bool:
        return self.case_index % EQUALITY_EVERY == EQUALITY_EVERY - 1

    def grid(self) -> SphereGrid:
        return grid_for(self.dim, self.resolution, self.seed)

    def case_search(self) -> SearchConfig:
        """The configured search with a seed private to this case."""
        return self.search.model_copy(
            update={"seed": int(self.seed_sequence.generate_state(1)[0])}
        )

    def escalated(self) -> CaseContext:
        return replace(self, resolution=2 * self.resolution)


@dataclass
class CaseInputs:
    rule_id: str
    key: CaseKey
    bodies: tuple[Body, ...]
    case_index: int = 0
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def part(self) -> str:
        return self.key.part

    @property
    def p(self) -> float:
        return self.key.p

    @property
    def i(self) -> float:
        return self.key.i

    @property
    def alpha(self) -> int:
        return self.key.alpha

    @property
    def dim(self) -> int:
        return self.bodies[0].dim

    def record(self) -> dict[str, Any]:
        out: dict[str, Any] = {"dim": self.dim, "p": self.key.p, "i": self.key.i,
                               "alpha": self.key.alpha}
        out.update(dict(self.key.extra))
        out.update(self.extra)
        out["bodies"] = [witness_record(b) for b in self.bodies]
        return out


@dataclass(frozen=True)
class Evaluation:
    lhs: Bound
    rhs: Bound
    lhs_label: str
    rhs_label: str
    details: dict[str, float] = field(default_factory=dict)


Evaluator = Callable[[CaseInputs, SearchConfig], Evaluation]
KeyFilter = Callable[[CaseKey, int], bool]


def _always(key: CaseKey, n: int) -> bool:
    return True


@dataclass(frozen=True)
class Part:
    """One displayed inequality (or theorem item) of a rule."""

    name: str
    relation: Relation
    verifiability: Verifiability
    evaluate: Evaluator
    when: KeyFilter = _always
    alphas: tuple[int | None, ...] = (None,)
    uses_p: bool = True
    uses_i: bool = False
    extras: Callable[[int, Sequence[float], Sequence[float]], list[dict[str, float]]] | None = None
    rtol: float = 0.0

    def keys(self, n: int, p_values: Sequence[float], i_values: Sequence[float]) -> list[CaseKey]:
        ps = list(p_values) if self.uses_p else [None]
        is_ = list(i_values) if self.uses_i else [None]
        extras = self.extras(n, p_values, i_values) if self.extras else [{}]
        out = []
        for p, i, alpha, extra in itertools.product(ps, is_, self.alphas, extras):
            key = CaseKey(self.name, p, i, alpha, tuple(sorted(extra.items())))
            if self.when(key, n):
                out.append(key)
        return out


Generator = Callable[[CaseContext, CaseKey], CaseInputs]


@dataclass(frozen=True)
class Rule:
    id: str
    title: str
    parts: tuple[Part, ...]
    generate: Generator
    arity: Callable[[int], int] = lambda n: n
    dims: tuple[int, ...] | None = None

    def part(self, name: str) -> Part:
        for part in self.parts:
            if part.name == name:
                return part
        raise ArityError(f"rule {self.id} has no part {name!r}")

    @property
    def verifiabilities(self) -> set[str]:
        return {part.verifiability for part in self.parts}

    def keys(
        self,
        n: int,
        p_values: Sequence[float],
        i_values: Sequence[float],
        report_only: bool = False,
    ) -> list[CaseKey]:
        if self.dims is not None and n not in self.dims:
            return []
        return [key for part in self.parts
                if report_only or part.verifiability != "report-only"
                for key in part.keys(n, p_values, i_values)]


def check(rule: Rule, inputs: CaseInputs, cfg: SearchConfig | None = None) -> VerdictReport:
    """Evaluate one case of a rule and decide its verdict."""
    part = rule.part(inputs.part)
    expected = rule.arity(inputs.dim)
    if len(inputs.bodies) != expected:
        raise ArityError(f"{rule.id} takes {expected} bodies, got {len(inputs.bodies)}")
    ev = part.evaluate(inputs, cfg or SearchConfig())
    decision = decide(ev.lhs, ev.rhs, part.relation, part.verifiability, part.rtol)
    details = dict(ev.details)
    if decision.certified_failure:
        details["certified_failure"] = 1.0
        logger.warning("%s/%s case %d: sound bounds contradict the inequality (lhs %.6g, rhs %.6g)",
                       rule.id, part.name, inputs.case_index, ev.lhs.value, ev.rhs.value)
    if part.verifiability == "report-only":
        logger.warning("%s/%s case %d: reported %s=%.10g against %s=%.10g",
                       rule.id, part.name, inputs.case_index,
                       ev.lhs_label, ev.lhs.value, ev.rhs_label, ev.rhs.value)
    return VerdictReport(
        rule_id=rule.id,
        part=part.name,
        case_index=inputs.case_index,
        inputs=inputs.record(),
        relation=part.relation,
        lhs=ev.lhs.to_value(ev.lhs_label),
        rhs=ev.rhs.to_value(ev.rhs_label),
        verdict=decision.verdict,
        verifiability=part.verifiability,
        slack=decision.slack,
        tolerance=decision.tolerance,
        details=details,
    )
