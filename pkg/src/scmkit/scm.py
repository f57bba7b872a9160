"""Discrete structural causal models with exact, enumerable semantics.

All stochasticity lives in exogenous variables; endogenous variables are
deterministic tables of their parents.  That choice is what makes every
counterfactual well defined: abduction enumerates full exogenous assignments,
action replaces mechanisms, prediction reads the modified model off.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .expr import JointTable
from .graph import Admg

__all__ = [
    "ExogenousVar",
    "EndogenousVar",
    "DiscreteScm",
    "CounterfactualQuery",
    "ScmError",
    "StateSpaceOverflow",
    "ZeroEvidence",
    "parse_scm",
    "serialize_scm",
    "observational_joint",
    "intervene",
    "counterfactual_query",
    "joint_counterfactual",
    "sample",
    "latent_projection",
]

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_VALUE_RE = re.compile(r"[A-Za-z0-9_.+-]+")

DEFAULT_STATE_CAP = 10_000_000


class ScmError(ValueError):
    """Malformed model, file, or request."""


class StateSpaceOverflow(ScmError):
    """Exact enumeration would exceed the configured state cap."""


class ZeroEvidence(ArithmeticError):
    """The conditioning evidence of a counterfactual has probability zero."""


@dataclass(frozen=True)
class ExogenousVar:
    domain: tuple[str, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if not self.domain:
            raise ScmError("exogenous domain must be nonempty")
        if len(set(self.domain)) != len(self.domain):
            raise ScmError("duplicate values in exogenous domain")
        if len(self.probs) != len(self.domain):
            raise ScmError("probability vector length does not match domain")
        if any(p < 0 for p in self.probs):
            raise ScmError("negative exogenous probability")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise ScmError(f"exogenous probabilities sum to {sum(self.probs)!r}, not 1")


@dataclass(frozen=True, eq=True)
class EndogenousVar:
    parents: tuple[str, ...]
    table: Mapping[tuple[str, ...], str]

    def __post_init__(self):
        if len(set(self.parents)) != len(self.parents):
            raise ScmError("duplicate parent")


class DiscreteScm:
    """Exogenous distributions plus deterministic structural tables.

    ``endo_domains`` may widen the inferred per-variable domains (the set of
    values a table can output); interventions use it so that a surgered model
    remembers the full domain of the variable it pinned.
    """

    def __init__(
        self,
        exogenous: Mapping[str, ExogenousVar],
        endogenous: Mapping[str, EndogenousVar],
        endo_domains: Mapping[str, tuple[str, ...]] | None = None,
    ):
        self.exogenous: dict[str, ExogenousVar] = dict(exogenous)
        self.endogenous: dict[str, EndogenousVar] = dict(endogenous)
        self._validate_names()
        self.order: tuple[str, ...] = self._topological()
        self.endo_domains: dict[str, tuple[str, ...]] = {}
        for v, spec in self.endogenous.items():
            inferred = tuple(sorted(set(spec.table.values())))
            if endo_domains and v in endo_domains:
                widened = tuple(endo_domains[v])
                if not set(inferred) <= set(widened):
                    raise ScmError(f"domain of {v} does not cover its table outputs")
                self.endo_domains[v] = widened
            else:
                self.endo_domains[v] = inferred
        self._validate_tables()

    # --- validation -------------------------------------------------------

    def _validate_names(self):
        for name in itertools.chain(self.exogenous, self.endogenous):
            if not _NAME_RE.fullmatch(name):
                raise ScmError(f"invalid variable name: {name!r}")
        overlap = set(self.exogenous) & set(self.endogenous)
        if overlap:
            raise ScmError(f"declared both exogenous and endogenous: {sorted(overlap)}")
        for v, spec in self.endogenous.items():
            for p in spec.parents:
                if p not in self.exogenous and p not in self.endogenous:
                    raise ScmError(f"unknown parent {p} of {v}")

    def _topological(self) -> tuple[str, ...]:
        state: dict[str, int] = {}
        order: list[str] = []

        def visit(v: str, trail: list[str]):
            if state.get(v) == 1:
                return
            if state.get(v) == 0:
                raise ScmError(
                    "cyclic structural dependencies: "
                    + " -> ".join(trail[trail.index(v):] + [v])
                )
            state[v] = 0
            trail.append(v)
            for p in sorted(self.endogenous[v].parents):
                if p in self.endogenous:
                    visit(p, trail)
            trail.pop()
            state[v] = 1
            order.append(v)

        for v in sorted(self.endogenous):
            visit(v, [])
        return tuple(order)

    def parent_domain(self, p: str) -> tuple[str, ...]:
        if p in self.exogenous:
            return self.exogenous[p].domain
        return self.endo_domains[p]

    def _validate_tables(self):
        for v in self.order:
            spec = self.endogenous[v]
            doms = [self.parent_domain(p) for p in spec.parents]
            expected = set(itertools.product(*doms)) if doms else {()}
            keys = set(spec.table.keys())
            if keys != expected:
                missing = sorted(expected - keys)[:3]
                extra = sorted(keys - expected)[:3]
                raise ScmError(
                    f"table of {v} is not total over its parent domains"
                    f" (missing {missing}, extra {extra})"
                )

    # --- enumeration ------------------------------------------------------

    def exo_names(self) -> tuple[str, ...]:
        return tuple(self.exogenous)

    def exo_state_count(self) -> int:
        count = 1
        for spec in self.exogenous.values():
            count *= len(spec.domain)
        return count

    def iter_exogenous(self):
        """Yield (assignment dict, weight) over all exogenous states."""
        names = self.exo_names()
        doms = [self.exogenous[u].domain for u in names]
        probs = [self.exogenous[u].probs for u in names]
        for combo in itertools.product(*(range(len(d)) for d in doms)):
            w = 1.0
            for p, i in zip(probs, combo):
                w *= p[i]
            if w == 0.0:
                continue
            yield {u: doms[k][i] for k, (u, i) in enumerate(zip(names, combo))}, w

    def solve(self, exo: Mapping[str, str], do: Mapping[str, str] | None = None) -> dict[str, str]:
        """Endogenous values for one exogenous state, under optional surgery."""
        values: dict[str, str] = dict(exo)
        for v in self.order:
            if do and v in do:
                values[v] = do[v]
                continue
            spec = self.endogenous[v]
            values[v] = spec.table[tuple(values[p] for p in spec.parents)]
        return values

    def __repr__(self) -> str:
        return (
            f"DiscreteScm(exogenous={sorted(self.exogenous)}, "
            f"endogenous={sorted(self.endogenous)})"
        )


@dataclass(frozen=True)
class CounterfactualQuery:
    """P(target holds in the world surgered by `antecedent` | evidence)."""

    target: tuple[tuple[str, str], ...]
    antecedent: tuple[tuple[str, str], ...] = ()
    evidence: tuple[tuple[str, str], ...] = ()


# --- operations ------------------------------------------------------------------


def _check_endo_assignment(m: DiscreteScm, pairs: Iterable[tuple[str, str]], what: str):
    for var, val in pairs:
        if var not in m.endogenous:
            raise ScmError(f"{what} variable {var} is not endogenous")
        if val not in m.endo_domains[var]:
            raise ScmError(f"{what} value {val!r} not in the domain of {var}")


def observational_joint(m: DiscreteScm, max_states: int = DEFAULT_STATE_CAP) -> JointTable:
    """Exact joint over the endogenous variables, by exogenous enumeration."""
    if m.exo_state_count() > max_states:
        raise StateSpaceOverflow(
            f"{m.exo_state_count()} exogenous states exceed the cap of {max_states}"
        )
    joint_size = 1
    for v in m.endogenous:
        joint_size *= len(m.endo_domains[v])
    if joint_size > max_states:
        raise StateSpaceOverflow(
            f"{joint_size} joint states exceed the cap of {max_states}"
        )
    variables = tuple(sorted(m.endogenous))
    mass: dict[tuple[str, ...], float] = {}
    for exo, w in m.iter_exogenous():
        values = m.solve(exo)
        key = tuple(values[v] for v in variables)
        mass[key] = mass.get(key, 0.0) + w
    domains = {v: m.endo_domains[v] for v in variables}
    return JointTable(variables, domains, mass)


def intervene(m: DiscreteScm, do: Mapping[str, str]) -> DiscreteScm:
    """Graph surgery: replace each pinned variable's mechanism by a constant."""
    _check_endo_assignment(m, do.items(), "intervention")
    endogenous = dict(m.endogenous)
    for var, val in do.items():
        endogenous[var] = EndogenousVar(parents=(), table={(): val})
    return DiscreteScm(m.exogenous, endogenous, endo_domains=m.endo_domains)


def joint_counterfactual(
    m: DiscreteScm,
    worlds: Sequence[tuple[Mapping[str, str], Mapping[str, str]]],
    evidence: Mapping[str, str] | None = None,
) -> float:
    """Probability that every (surgery, outcome) world holds, given evidence.

    Each entry of ``worlds`` is a pair ``(do, targets)``: in the model
    surgered by ``do``, all ``targets`` assignments must hold.  Evidence is
    checked in the unsurgered model.  This is the abduction-action-prediction
    computation, taken over full exogenous assignments.
    """
    evidence = dict(evidence or {})
    _check_endo_assignment(m, evidence.items(), "evidence")
    for do, targets in worlds:
        _check_endo_assignment(m, do.items(), "antecedent")
        _check_endo_assignment(m, targets.items(), "target")
    num = 0.0
    den = 0.0
    for exo, w in m.iter_exogenous():
        natural = m.solve(exo)
        if any(natural[v] != val for v, val in evidence.items()):
            continue
        den += w
        ok = True
        for do, targets in worlds:
            surgered = m.solve(exo, do=do) if do else natural
            if any(surgered[v] != val for v, val in targets.items()):
                ok = False
                break
        if ok:
            num += w
    if den == 0.0:
        raise ZeroEvidence(f"evidence has probability zero: {evidence}")
    return num / den


def counterfactual_query(m: DiscreteScm, q: CounterfactualQuery) -> float:
    """Three-step counterfactual probability for a single surgered world."""
    return joint_counterfactual(
        m, [(dict(q.antecedent), dict(q.target))], dict(q.evidence)
    )


def sample(m: DiscreteScm, n: int, seed: int) -> "Dataset":
    """Ancestral sampling; identical (model, n, seed) gives identical rows."""
    from .estimate import Dataset

    if n < 1:
        raise ScmError("sample size must be at least 1")
    rng = np.random.default_rng(seed)
    columns: dict[str, list[str]] = {}
    for u in m.exo_names():
        spec = m.exogenous[u]
        idx = rng.choice(len(spec.domain), size=n, p=np.asarray(spec.probs))
        dom = np.asarray(spec.domain, dtype=object)
        columns[u] = list(dom[idx])
    for v in m.order:
        spec = m.endogenous[v]
        if not spec.parents:
            const = spec.table[()]
            columns[v] = [const] * n
            continue
        parent_cols = [columns[p] for p in spec.parents]
        table = spec.table
        columns[v] = [table[key] for key in zip(*parent_cols)]
    out_cols = tuple(sorted(m.endogenous))
    rows = tuple(zip(*(columns[v] for v in out_cols)))
    return Dataset(out_cols, rows)


def latent_projection(m: DiscreteScm) -> Admg:
    """Project onto the endogenous variables.

    Endogenous parent relations become directed edges; every exogenous
    variable with two or more endogenous children contributes a bidirected
    edge between each pair of them.
    """
    nodes = set(m.endogenous)
    directed = {
        (p, v)
        for v, spec in m.endogenous.items()
        for p in spec.parents
        if p in m.endogenous
    }
    children: dict[str, list[str]] = {u: [] for u in m.exogenous}
    for v, spec in m.endogenous.items():
        for p in spec.parents:
            if p in m.exogenous:
                children[p].append(v)
    bidirected = set()
    for u, kids in children.items():
        for a, b in itertools.combinations(sorted(set(kids)), 2):
            bidirected.add((a, b))
    return Admg(nodes, directed, bidirected)


# --- file format -------------------------------------------------------------------


def parse_scm(text: str) -> DiscreteScm:
    """Parse the line-based model format.

    ``exo U {v1: p1, v2: p2}`` declares an exogenous variable and its
    distribution; ``endo X (P1,...,Pk) {(a1,...,ak) -> v, ...}`` declares an
    endogenous variable with ordered parents and a total table; ``#`` starts
    a comment.
    """
    exogenous: dict[str, ExogenousVar] = {}
    endogenous: dict[str, EndogenousVar] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("exo "):
                name, spec = _parse_exo_line(line[4:])
                if name in exogenous or name in endogenous:
                    raise ScmError(f"duplicate declaration of {name}")
                exogenous[name] = spec
            elif line.startswith("endo "):
                name, spec = _parse_endo_line(line[5:])
                if name in exogenous or name in endogenous:
                    raise ScmError(f"duplicate declaration of {name}")
                endogenous[name] = spec
            else:
                raise ScmError("expected 'exo' or 'endo'")
        except ScmError as exc:
            raise ScmError(f"line {lineno}: {exc}") from None
    return DiscreteScm(exogenous, endogenous)


def _parse_exo_line(rest: str) -> tuple[str, ExogenousVar]:
    m = re.fullmatch(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*\{(.*)\}\s*", rest)
    if not m:
        raise ScmError("malformed exogenous declaration")
    name, body = m.group(1), m.group(2)
    domain: list[str] = []
    probs: list[float] = []
    for part in _split_top(body):
        pm = re.fullmatch(r"\s*([A-Za-z0-9_.+-]+)\s*:\s*([0-9.eE+-]+)\s*", part)
        if not pm:
            raise ScmError(f"malformed probability entry: {part.strip()!r}")
        domain.append(pm.group(1))
        probs.append(float(pm.group(2)))
    return name, ExogenousVar(tuple(domain), tuple(probs))


def _parse_endo_line(rest: str) -> tuple[str, EndogenousVar]:
    m = re.fullmatch(
        r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*\(([^)]*)\)\s*\{(.*)\}\s*", rest
    )
    if not m:
        raise ScmError("malformed endogenous declaration")
    name, parents_txt, body = m.group(1), m.group(2), m.group(3)
    parents = tuple(p.strip() for p in parents_txt.split(",") if p.strip())
    table: dict[tuple[str, ...], str] = {}
    for part in _split_top(body):
        em = re.fullmatch(r"\s*\(([^)]*)\)\s*->\s*([A-Za-z0-9_.+-]+)\s*", part)
        if not em:
            raise ScmError(f"malformed table entry: {part.strip()!r}")
        key = tuple(t.strip() for t in em.group(1).split(",") if t.strip())
        if len(key) != len(parents):
            raise ScmError(f"table key {key} does not match parent count")
        if key in table:
            raise ScmError(f"duplicate table entry for {key}")
        table[key] = em.group(2)
    return name, EndogenousVar(parents, table)


def _split_top(body: str) -> list[str]:
    """Split on commas that are not inside parentheses."""
    parts: list[str] = []
    depth = 0
    current: list[str] = []
    for ch in body:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    tail = "".join(current)
    if tail.strip():
        parts.append(tail)
    return [p for p in parts if p.strip()]


def serialize_scm(m: DiscreteScm) -> str:
    lines: list[str] = []
    for u, spec in m.exogenous.items():
        entries = ", ".join(
            f"{v}: {p:.12g}" for v, p in zip(spec.domain, spec.probs)
        )
        lines.append(f"exo {u} {{{entries}}}")
    for v, spec in m.endogenous.items():
        entries = ", ".join(
            f"({','.join(key)}) -> {val}" for key, val in sorted(spec.table.items())
        )
        parents = ",".join(spec.parents)
        lines.append(f"endo {v} ({parents}) {{{entries}}}")
    return "\n".join(lines) + "\n"
