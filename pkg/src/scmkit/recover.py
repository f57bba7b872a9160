"""Recoverability of probabilistic queries from incomplete data.

An m-graph is the causal graph over substantive variables plus one binary
missingness indicator per partially observed variable.  Three sound criteria
are implemented, tried in order; a refusal means no implemented criterion
applies, never that recovery is impossible.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Union

from .estimate import DataError, Dataset, Estimate
from .expr import Estimand, JointTable, ProbTerm, Sum, Val, eval_estimand, prod_of
from .graph import Admg, GraphError, d_separated, parse_graph

__all__ = [
    "MGraph",
    "Recoverable",
    "NotRecoverable",
    "RecoverabilityResult",
    "NotRecoverableError",
    "OBSERVED",
    "MISSING",
    "parse_mgraph",
    "recoverability",
    "recover_estimate",
]

OBSERVED = "obs"
MISSING = "miss"
_NA_PLACEHOLDER = "NA"  # load_table never yields this token; safe filler


class NotRecoverableError(ValueError):
    """Estimation was requested without an established recovery route."""


@dataclass(frozen=True)
class MGraph:
    """Combined graph over substantive variables and missingness indicators.

    ``partial`` lists the substantive variables that can be missing; each has
    an indicator node named ``R_<var>`` inside ``graph``.
    """

    graph: Admg
    partial: frozenset[str]

    def __post_init__(self):
        indicators = {self.indicator(v) for v in self.partial}
        for v in self.partial:
            if v not in self.graph.nodes:
                raise GraphError(f"partially observed variable {v} is not a node")
            if self.indicator(v) not in self.graph.nodes:
                raise GraphError(f"missing indicator node {self.indicator(v)}")
        for r in indicators:
            bad_children = self.graph.children(r) - indicators
            if bad_children:
                raise GraphError(
                    f"indicator {r} may not cause substantive variables: "
                    f"{sorted(bad_children)}"
                )

    @staticmethod
    def indicator(v: str) -> str:
        return f"R_{v}"

    @property
    def indicators(self) -> frozenset[str]:
        return frozenset(self.indicator(v) for v in self.partial)

    @property
    def substantive(self) -> frozenset[str]:
        return self.graph.nodes - self.indicators

    @property
    def fully_observed(self) -> frozenset[str]:
        return self.substantive - self.partial


def parse_mgraph(text: str) -> MGraph:
    """Graph file format plus ``missing Y`` lines declaring indicators."""
    partial: list[str] = []
    passthrough: list[str] = []
    for raw in text.splitlines():
        stripped = raw.split("#", 1)[0].strip()
        if stripped.startswith("missing ") or stripped == "missing":
            name = stripped[len("missing"):].strip()
            if not name:
                raise GraphError("missing declaration needs a variable name")
            partial.append(name)
            passthrough.append(f"var {MGraph.indicator(name)}")
        else:
            passthrough.append(raw)
    g = parse_graph("\n".join(passthrough))
    for v in partial:
        if v not in g.nodes:
            raise GraphError(f"missing declaration for undeclared variable {v}")
    return MGraph(g, frozenset(partial))


@dataclass(frozen=True)
class Recoverable:
    estimand: Estimand
    criterion: str


@dataclass(frozen=True)
class NotRecoverable:
    """No implemented criterion applies (not a proof of impossibility)."""

    reason: str


RecoverabilityResult = Union[Recoverable, NotRecoverable]


def _sym(v: str) -> Val:
    return Val(v, v.lower(), literal=False)


def _r_conds(mg: MGraph, vars_needing_r: set[str]) -> tuple[Val, ...]:
    return tuple(
        Val(mg.indicator(v), OBSERVED, literal=True) for v in sorted(vars_needing_r)
    )


def recoverability(mg: MGraph, target: frozenset[str] | set[str]) -> RecoverabilityResult:
    """Decide whether P(target) can be consistently recovered.

    Criteria, in order: (i) indicators jointly independent of all
    substantive variables; (ii) indicators independent of the partially
    observed variables given the fully observed ones; (iii) an ordered
    factorization whose factors each shield their conditioning prefix and own
    variable from the needed indicators.
    """
    target = frozenset(target)
    if not target:
        raise GraphError("target must be nonempty")
    if not target <= mg.substantive:
        raise GraphError(
            f"target outside the substantive variables: {sorted(target - mg.substantive)}"
        )
    g = mg.graph
    rs = mg.indicators
    if not rs:
        return Recoverable(
            ProbTerm(tuple(_sym(v) for v in sorted(target))), criterion="mcar"
        )

    # (i) missingness completely at random w.r.t. the model
    if d_separated(g, rs, mg.substantive, frozenset()):
        term = ProbTerm(
            tuple(_sym(v) for v in sorted(target)),
            _r_conds(mg, set(mg.partial)),
        )
        return Recoverable(term, criterion="mcar")

    # (ii) missingness at random given the fully observed variables
    full = mg.fully_observed
    if full and d_separated(g, rs, mg.partial, full):
        t_part = sorted(target & mg.partial)
        t_full = sorted(target & full)
        if not t_part:
            return Recoverable(
                ProbTerm(tuple(_sym(v) for v in t_full)), criterion="mar"
            )
        cond_term = ProbTerm(
            tuple(_sym(v) for v in t_part),
            tuple(_sym(v) for v in sorted(full)) + _r_conds(mg, set(mg.partial)),
        )
        weight = ProbTerm(tuple(_sym(v) for v in sorted(full)))
        body = prod_of([cond_term, weight])
        out: Estimand = body
        for v in sorted(full - target, reverse=True):
            out = Sum(v, v.lower(), out)
        return Recoverable(out, criterion="mar")

    # (iii) ordered factorization over the substantive variables
    subs = sorted(mg.substantive)
    if len(subs) <= 8:
        for perm in itertools.permutations(subs):
            factors = _ordered_factors(mg, perm)
            if factors is None:
                continue
            body = prod_of(factors)
            out = body
            for v in sorted(set(subs) - target, reverse=True):
                out = Sum(v, v.lower(), out)
            return Recoverable(out, criterion="ordered-factorization")

    return NotRecoverable("no implemented criterion applies")


def _ordered_factors(mg: MGraph, perm: tuple[str, ...]) -> list[Estimand] | None:
    g = mg.graph
    factors: list[Estimand] = []
    for i, v in enumerate(perm):
        prefix = perm[:i]
        needed = {u for u in prefix if u in mg.partial}
        if v in mg.partial:
            needed.add(v)
        if needed:
            r_nodes = {mg.indicator(u) for u in needed}
            if not d_separated(g, {v}, r_nodes, frozenset(prefix)):
                return None
        factors.append(
            ProbTerm(
                (_sym(v),),
                tuple(_sym(u) for u in sorted(prefix)) + _r_conds(mg, needed),
            )
        )
    return factors


# --- estimation -------------------------------------------------------------------


def _augmented_joint(mg: MGraph, d: Dataset) -> JointTable:
    """Empirical joint over substantive variables plus indicator columns.

    Missing cells become an explicit filler value paired with
    ``R_v = miss``; estimand terms only ever touch strata with
    ``R_v = obs``, where the filler has zero mass.
    """
    for v in sorted(mg.substantive):
        if v not in d.columns:
            raise DataError(f"dataset lacks column {v}")
    idx = {v: d.column_index(v) for v in mg.substantive}
    for v in sorted(mg.substantive - mg.partial):
        for row in d.rows:
            if row[idx[v]] is None:
                raise DataError(
                    f"column {v} has missing cells but the m-graph declares it "
                    "fully observed"
                )
    variables = tuple(sorted(mg.substantive)) + tuple(
        mg.indicator(v) for v in sorted(mg.partial)
    )
    counts: Counter[tuple[str, ...]] = Counter()
    for row in d.rows:
        key = []
        for v in sorted(mg.substantive):
            cell = row[idx[v]]
            key.append(_NA_PLACEHOLDER if cell is None else cell)
        for v in sorted(mg.partial):
            key.append(MISSING if row[idx[v]] is None else OBSERVED)
        counts[tuple(key)] += 1
    n = d.n
    domains: dict[str, tuple[str, ...]] = {}
    for v in sorted(mg.substantive):
        dom = set(d.domains[v])
        if v in mg.partial:
            dom.add(_NA_PLACEHOLDER)
        domains[v] = tuple(sorted(dom))
    for v in sorted(mg.partial):
        domains[mg.indicator(v)] = (MISSING, OBSERVED)
    mass = {key: c / n for key, c in counts.items()}
    return JointTable(variables, domains, mass)


def recover_estimate(
    mg: MGraph, d: Dataset, target: Mapping[str, str]
) -> Estimate:
    """Evaluate the recovery estimand for one target assignment.

    Only rows satisfying each term's indicator conditions contribute to that
    term, which is exactly what conditioning on ``R_v = obs`` does in the
    augmented empirical joint.
    """
    result = recoverability(mg, frozenset(target))
    if isinstance(result, NotRecoverable):
        raise NotRecoverableError(result.reason)
    table = _augmented_joint(mg, d)
    value = eval_estimand(result.estimand, table, dict(target))
    return Estimate(value=value, n=d.n)
