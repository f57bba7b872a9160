"""Identification of interventional queries from a causal graph.

Given an ADMG and a query, this module classifies the query's layer in the
causal hierarchy, searches for back-door adjustment sets, and runs the
complete c-component identification algorithm.  The result is either a
symbolic estimand over the observational distribution or a refusal carrying
the pair of nested confounded node sets (the "hedge") that blocks
identification.  A companion search constructs two explicit models that agree
observationally but disagree interventionally, certifying each refusal.
"""

from __future__ import annotations

import itertools
import re
import zlib
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

import numpy as np

from .expr import (
    Estimand,
    EstimandError,
    ProbTerm,
    Product,
    Quotient,
    Sum,
    Val,
    free_variables,
    prod_of,
)
from .graph import Admg, UnknownVariable, c_components, d_separated
from .scm import DiscreteScm, EndogenousVar, ExogenousVar, observational_joint

__all__ = [
    "QueryTerm",
    "CausalQuery",
    "QueryError",
    "Identified",
    "NonIdentifiable",
    "IdentifyResult",
    "WitnessPair",
    "parse_query",
    "query_layer",
    "backdoor_sets",
    "identify",
    "nonidentifiability_witness",
]

_VAR_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_VALUE_RE = re.compile(r"[A-Za-z0-9_.+-]+")
_SYM_RE = re.compile(r"[a-z][a-z0-9_]*")


class QueryError(ValueError):
    """Malformed causal query, or a query outside this operation's layer."""


@dataclass(frozen=True)
class QueryTerm:
    """One variable reference in a query.

    ``token`` is a value symbol (``literal=False``) or an explicit value.
    ``dos`` carries the counterfactual subscript, e.g. Y_{X=1}.
    """

    var: str
    token: str
    literal: bool = False
    dos: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class CausalQuery:
    outcome: tuple[QueryTerm, ...]
    do: tuple[QueryTerm, ...] = ()
    condition: tuple[QueryTerm, ...] = ()

    def __post_init__(self):
        if not self.outcome:
            raise QueryError("query outcome must be nonempty")
        for group, name in ((self.outcome, "outcome"), (self.do, "do"),
                            (self.condition, "condition")):
            seen = [t.var for t in group]
            if len(set(seen)) != len(seen):
                raise QueryError(f"variable repeated in the {name} part")
        outcome_vars = {t.var for t in self.outcome}
        do_vars = {t.var for t in self.do}
        cond_vars = {t.var for t in self.condition}
        counterfactual = any(t.dos for t in self.outcome)
        overlaps = [outcome_vars & do_vars]
        if not counterfactual:
            # in a counterfactual query the evidence describes the factual
            # world, so it may name outcome variables
            overlaps += [outcome_vars & cond_vars, do_vars & cond_vars]
        for shared in overlaps:
            if shared:
                raise QueryError(
                    f"outcome/do/condition variables must be disjoint: {sorted(shared)}"
                )
        for t in self.do + self.condition:
            if t.dos:
                raise QueryError("counterfactual subscripts belong on outcome terms")


def query_layer(q: CausalQuery) -> int:
    """Hierarchy layer: 1 association, 2 intervention, 3 counterfactual."""
    if any(t.dos for t in q.outcome):
        return 3
    if q.do:
        return 2
    return 1


# --- query text form ----------------------------------------------------------


def parse_query(text: str) -> CausalQuery:
    """Parse query text such as ``P(Y | do(X))`` or ``P(Y_{X=1}=1 | X=0, Y=0)``."""
    p = _QueryParser(text)
    return p.parse()


class _QueryParser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, msg: str) -> QueryError:
        return QueryError(f"column {self.pos + 1}: {msg}")

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def literal(self, s: str) -> bool:
        if self.text.startswith(s, self.pos):
            self.pos += len(s)
            return True
        return False

    def expect(self, s: str):
        if not self.literal(s):
            raise self.error(f"expected {s!r}")

    def match_re(self, rx: re.Pattern[str], what: str) -> str:
        m = rx.match(self.text, self.pos)
        if not m:
            raise self.error(f"expected {what}")
        self.pos = m.end()
        return m.group()

    def parse(self) -> CausalQuery:
        self.skip_ws()
        self.expect("P(")
        outcome = [self.qterm()]
        self.skip_ws()
        while self.literal(","):
            outcome.append(self.qterm())
            self.skip_ws()
        do: list[QueryTerm] = []
        condition: list[QueryTerm] = []
        if self.literal("|"):
            while True:
                self.skip_ws()
                if self.text.startswith("do(", self.pos):
                    self.pos += 3
                    do.append(self.qterm(allow_subscript=False))
                    self.skip_ws()
                    self.expect(")")
                else:
                    condition.append(self.qterm(allow_subscript=False))
                self.skip_ws()
                if not self.literal(","):
                    break
        self.expect(")")
        self.skip_ws()
        if self.pos != len(self.text):
            raise self.error("unexpected trailing text")
        try:
            return CausalQuery(tuple(outcome), tuple(do), tuple(condition))
        except QueryError as exc:
            raise self.error(str(exc)) from None

    def qterm(self, allow_subscript: bool = True) -> QueryTerm:
        self.skip_ws()
        name = self.match_re(_VAR_RE, "a variable name")
        dos: list[tuple[str, str]] = []
        if name.endswith("_") and self.text.startswith("{", self.pos):
            if not allow_subscript:
                raise self.error("subscripts are not allowed here")
            name = name[:-1]
            if not name:
                raise self.error("expected a variable name before subscript")
            self.pos += 1
            while True:
                self.skip_ws()
                sub_var = self.match_re(_VAR_RE, "a subscript variable")
                self.skip_ws()
                self.expect("=")
                self.skip_ws()
                sub_val = self.match_re(_VALUE_RE, "a subscript value")
                dos.append((sub_var, sub_val))
                self.skip_ws()
                if self.literal(","):
                    continue
                self.expect("}")
                break
        self.skip_ws()
        if self.literal("="):
            self.skip_ws()
            value = self.match_re(_VALUE_RE, "a value token")
            return QueryTerm(name, value, literal=True, dos=tuple(dos))
        if name == name.lower():
            return QueryTerm(name.upper(), name, literal=False, dos=tuple(dos))
        return QueryTerm(name, name.lower(), literal=False, dos=tuple(dos))


# --- back-door sets -------------------------------------------------------------


def backdoor_sets(
    g: Admg, x: str, y: str, max_size: int | None = None
) -> list[frozenset[str]]:
    """All minimal back-door admissible sets for the effect of x on y.

    A set qualifies when none of its members descends from x and it
    d-separates x from y once x's outgoing directed edges are removed.
    Results are ordered by size, then lexicographically.
    """
    if x == y:
        raise QueryError("x and y must differ")
    g._check(x)
    g._check(y)
    candidates = sorted(g.nodes - {x, y} - g.descendants([x]))
    if max_size is None:
        max_size = len(candidates)
    pruned = g.without_outgoing([x])
    found: list[frozenset[str]] = []
    for size in range(min(max_size, len(candidates)) + 1):
        for sub in itertools.combinations(candidates, size):
            z = frozenset(sub)
            if any(prev <= z for prev in found):
                continue
            if d_separated(pruned, {x}, {y}, z):
                found.append(z)
    return found


# --- identification ---------------------------------------------------------------


@dataclass(frozen=True)
class Identified:
    estimand: Estimand


@dataclass(frozen=True)
class NonIdentifiable:
    """Refusal with the offending hedge: two nested confounded node sets."""

    hedge_forest: frozenset[str]
    hedge_subforest: frozenset[str]

    def describe(self) -> str:
        f = "{" + ", ".join(sorted(self.hedge_forest)) + "}"
        fp = "{" + ", ".join(sorted(self.hedge_subforest)) + "}"
        return f"hedge: F={f} F'={fp}"


IdentifyResult = Union[Identified, NonIdentifiable]


class _Hedge(Exception):
    def __init__(self, forest: frozenset[str], subforest: frozenset[str]):
        self.forest = forest
        self.subforest = subforest


def _ph(var: str) -> Val:
    # internal placeholder: symbol token equal to the variable name itself
    return Val(var, var, literal=False)


def _pt(joint_vars: Iterable[str], given_vars: Iterable[str] = ()) -> ProbTerm:
    return ProbTerm(
        tuple(_ph(v) for v in sorted(joint_vars)),
        tuple(_ph(v) for v in sorted(given_vars)),
    )


def _sum_wrap(vars_to_bind: Iterable[str], body: Estimand) -> Estimand:
    out = body
    for v in sorted(vars_to_bind, reverse=True):
        out = Sum(v, v, out)
    return out


@dataclass(frozen=True)
class _Dist:
    """Distribution over ``order`` threaded through the recursion.

    When ``expr`` is a plain probability term covering exactly ``order``,
    marginals and conditionals stay plain terms; otherwise they are built
    from explicit sums and quotients.
    """

    order: tuple[str, ...]
    expr: Estimand

    def _plain(self) -> ProbTerm | None:
        if isinstance(self.expr, ProbTerm) and {
            v.var for v in self.expr.joint
        } == set(self.order):
            return self.expr
        return None

    def marginal(self, keep: frozenset[str]) -> "_Dist":
        new_order = tuple(v for v in self.order if v in keep)
        drop = [v for v in self.order if v not in keep]
        if not drop:
            return self
        plain = self._plain()
        if plain is not None:
            return _Dist(new_order, _pt(new_order, (v.var for v in plain.given)))
        return _Dist(new_order, _sum_wrap(drop, self.expr))

    def conditional(self, v: str, pred: tuple[str, ...]) -> Estimand:
        plain = self._plain()
        if plain is not None:
            given = tuple(pred) + tuple(g.var for g in plain.given)
            return _pt([v], given)
        num_drop = [u for u in self.order if u != v and u not in pred]
        den_drop = [u for u in self.order if u not in pred]
        num = _sum_wrap(num_drop, self.expr)
        if not pred:
            return num
        den = _sum_wrap(den_drop, self.expr)
        return Quotient(num, den)


def _id(y: frozenset[str], x: frozenset[str], P: _Dist, g: Admg) -> Estimand:
    v = g.nodes
    if not x:
        return P.marginal(y).expr
    anc = g.ancestors(y)
    if v != anc:
        return _id(y, x & anc, P.marginal(anc), g.induced(anc))
    w = (v - x) - g.without_incoming(x).ancestors(y)
    if w:
        return _id(y, x | w, P, g)
    comps = c_components(g.induced(v - x))
    if len(comps) > 1:
        factors = [_id(s, v - s, P, g) for s in comps]
        return _sum_wrap(v - y - x, prod_of(factors))
    s = comps[0]
    comps_g = c_components(g)
    if len(comps_g) == 1:
        raise _Hedge(forest=v, subforest=s)
    s_prime = next(c for c in comps_g if s <= c)
    pos = {u: i for i, u in enumerate(P.order)}
    if s == s_prime:
        ordered = sorted(s, key=pos.__getitem__)
        factors = [
            P.conditional(u, tuple(P.order[: pos[u]])) for u in ordered
        ]
        return _sum_wrap(s - y, prod_of(factors))
    ordered = sorted(s_prime, key=pos.__getitem__)
    factors = [P.conditional(u, tuple(P.order[: pos[u]])) for u in ordered]
    P2 = _Dist(tuple(ordered), prod_of(factors))
    return _id(y, x & s_prime, P2, g.induced(s_prime))


def _fresh(var: str, used: set[str]) -> str:
    base = var.lower()
    if not _SYM_RE.fullmatch(base):
        base = "v"
    if base not in used:
        used.add(base)
        return base
    k = 2
    while f"{base}{k}" in used:
        k += 1
    used.add(f"{base}{k}")
    return f"{base}{k}"


def _standardize(e: Estimand, free_vals: Mapping[str, Val], used: set[str]) -> Estimand:
    """Replace internal placeholder symbols with query symbols and fresh binders."""

    def walk(node: Estimand, env: dict[str, Val]) -> Estimand:
        if isinstance(node, ProbTerm):
            def conv(val: Val) -> Val:
                target = env.get(val.var)
                if target is None:
                    raise EstimandError(f"no symbol in scope for {val.var}")
                return target
            return ProbTerm(
                tuple(conv(v) for v in node.joint),
                tuple(conv(v) for v in node.given),
            )
        if isinstance(node, Sum):
            token = _fresh(node.var, used)
            env2 = dict(env)
            env2[node.var] = Val(node.var, token, literal=False)
            return Sum(node.var, token, walk(node.body, env2))
        if isinstance(node, Product):
            return Product(tuple(walk(f, env) for f in node.factors))
        if isinstance(node, Quotient):
            return Quotient(walk(node.num, env), walk(node.den, env))
        return node

    return walk(e, dict(free_vals))


def identify(g: Admg, q: CausalQuery) -> IdentifyResult:
    """Complete identification of a layer-1/2 query from the graph.

    Returns :class:`Identified` with an estimand over observational
    probabilities, or :class:`NonIdentifiable` with the hedge witness.
    Conditional interventional queries are identified jointly and divided,
    so a zero-probability conditioning event surfaces only at evaluation.
    """
    layer = query_layer(q)
    if layer == 3:
        raise QueryError(
            "counterfactual (layer-3) queries are outside identify's scope"
        )
    for t in q.outcome + q.do + q.condition:
        if t.var not in g.nodes:
            raise UnknownVariable(f"query variable {t.var} not in the graph")
    y = frozenset(t.var for t in q.outcome)
    xs = frozenset(t.var for t in q.do)
    zs = frozenset(t.var for t in q.condition)

    if not xs:
        internal: Estimand = ProbTerm(
            tuple(_ph(t.var) for t in sorted(q.outcome, key=lambda t: t.var)),
            tuple(_ph(t.var) for t in sorted(q.condition, key=lambda t: t.var)),
        )
    else:
        p0 = _Dist(g.topological_order(), _pt(g.nodes))
        try:
            num = _id(y | zs, xs, p0, g)
        except _Hedge as h:
            return NonIdentifiable(frozenset(h.forest), frozenset(h.subforest))
        if zs:
            internal = Quotient(num, _sum_wrap(y, num))
        else:
            internal = num

    # wrap any non-query free variable s as sum_{s} P(s) * (...): the body is
    # constant in s, so averaging it against the marginal of s is exact
    query_vars = y | xs | zs
    extra = sorted(free_variables(internal) - query_vars)
    for s_var in reversed(extra):
        internal = Sum(s_var, s_var, prod_of([_pt([s_var]), internal]))

    free_vals = {
        t.var: Val(t.var, t.token, t.literal) for t in q.outcome + q.do + q.condition
    }
    used = {t.token for t in q.outcome + q.do + q.condition}
    return Identified(_standardize(internal, free_vals, used))


# --- non-identifiability witness ----------------------------------------------------


@dataclass(frozen=True)
class WitnessPair:
    """Two models certifying a refusal: same observables, different effect."""

    model_a: DiscreteScm
    model_b: DiscreteScm
    observational_gap: float
    interventional_gap: float


def nonidentifiability_witness(
    g: Admg,
    x: str,
    y: str,
    min_gap: float = 1e-3,
    max_types: int = 70000,
) -> WitnessPair | None:
    """Search for two SCMs compatible with ``g`` (latent projection a subgraph
    of it) that share an observational joint but differ on P(y | do(x)).

    The search varies the response-type distribution of one bidirected edge
    at a time inside the null space of the observational-moment map; the
    returned pair is verified by exact enumeration before being reported.
    """
    g._check(x)
    g._check(y)
    for edge in sorted(g.bidirected):
        for attempt in range(6):
            pair = _witness_via_edge(g, x, y, edge, attempt, min_gap, max_types)
            if pair is not None:
                return pair
    return None


def _stable_seed(*parts: str) -> int:
    return zlib.crc32("|".join(parts).encode())


def _witness_via_edge(
    g: Admg,
    x: str,
    y: str,
    edge: tuple[str, str],
    attempt: int,
    min_gap: float,
    max_types: int,
) -> WitnessPair | None:
    a, b = edge
    rng = np.random.default_rng(
        _stable_seed("witness", ",".join(sorted(g.nodes)), x, y, a, b, str(attempt))
    )
    binary = ("0", "1")
    pa = {v: tuple(sorted(g.parents(v))) for v in g.nodes}

    # every other bidirected edge stays active as an independent fair coin,
    # so confounding paths through several edges remain expressible
    edge_exo: dict[tuple[str, str], str] = {}
    incident: dict[str, list[str]] = {v: [] for v in g.nodes}
    for other in sorted(g.bidirected):
        if other == tuple(sorted(edge)):
            continue
        u = f"U_{other[0]}_{other[1]}"
        edge_exo[other] = u
        incident[other[0]].append(u)
        incident[other[1]].append(u)

    # the varied edge's endpoints respond to their directed parents plus
    # their incident coins; a type fixes the response at every such input
    inputs = {v: pa[v] + tuple(sorted(incident[v])) for v in (a, b)}
    assign = {
        v: list(itertools.product(binary, repeat=len(inputs[v]))) for v in (a, b)
    }
    total_types = 2 ** len(assign[a]) * 2 ** len(assign[b])
    if total_types > max_types:
        return None
    types = {
        v: list(itertools.product(binary, repeat=len(assign[v]))) for v in (a, b)
    }

    exogenous: dict[str, ExogenousVar] = {
        u: ExogenousVar(binary, (0.5, 0.5)) for u in edge_exo.values()
    }
    fixed_tables: dict[str, dict[tuple[str, ...], str]] = {}
    fixed_parents: dict[str, tuple[str, ...]] = {}
    for v in sorted(g.nodes):
        if v in (a, b):
            continue
        parents = pa[v] + tuple(sorted(incident[v]))
        if not parents:
            u = f"U_{v}"
            exogenous[u] = ExogenousVar(binary, (0.5, 0.5))
            fixed_parents[v] = (u,)
            fixed_tables[v] = {("0",): "0", ("1",): "1"}
            continue
        fixed_parents[v] = parents
        table = {
            key: binary[rng.integers(0, 2)]
            for key in itertools.product(binary, repeat=len(parents))
        }
        if len(set(table.values())) == 1:
            # a constant mechanism would mute every channel through v
            last = sorted(table)[-1]
            table[last] = "1" if table[last] == "0" else "0"
        fixed_tables[v] = table

    order = g.topological_order()
    coin_names = sorted(exogenous)
    if total_types * 2 ** len(coin_names) > 600_000:
        return None
    obs_keys = list(itertools.product(binary, repeat=len(order)))
    obs_index = {key: i for i, key in enumerate(obs_keys)}
    assign_index = {v: {key: i for i, key in enumerate(assign[v])} for v in (a, b)}

    def solve(ta: tuple[str, ...], tb: tuple[str, ...], coins: dict[str, str],
              do: dict[str, str] | None = None) -> dict[str, str]:
        values: dict[str, str] = dict(coins)
        for v in order:
            if do and v in do:
                values[v] = do[v]
            elif v == a:
                key = tuple(values[p] for p in inputs[a])
                values[v] = ta[assign_index[a][key]]
            elif v == b:
                key = tuple(values[p] for p in inputs[b])
                values[v] = tb[assign_index[b][key]]
            else:
                values[v] = fixed_tables[v][
                    tuple(values[p] for p in fixed_parents[v])
                ]
        return values

    coin_states = [
        dict(zip(coin_names, combo))
        for combo in itertools.product(binary, repeat=len(coin_names))
    ]
    coin_w = 1.0 / len(coin_states)

    x_dom = binary
    m_obs = np.zeros((len(obs_keys), total_types))
    m_do = np.zeros((len(x_dom), total_types))
    t = 0
    for ta in types[a]:
        for tb in types[b]:
            for coins in coin_states:
                values = solve(ta, tb, coins)
                m_obs[obs_index[tuple(values[v] for v in order)], t] += coin_w
                for k, xv in enumerate(x_dom):
                    surgered = solve(ta, tb, coins, do={x: xv})
                    if surgered[y] == "1":
                        m_do[k, t] += coin_w
            t += 1

    a_mat = np.vstack([m_obs, np.ones((1, total_types))])
    # null space of the observational-moment map (plus normalization)
    _, sv, vt = np.linalg.svd(a_mat, full_matrices=True)
    rank = int(np.sum(sv > 1e-10))
    null = vt[rank:].T
    if null.shape[1] == 0:
        return None
    d = m_do @ null
    if np.max(np.abs(d)) < 1e-9:
        return None
    _, _, dvt = np.linalg.svd(d)
    w = null @ dvt[0]
    w /= np.max(np.abs(w))
    q0 = np.full(total_types, 1.0 / total_types)
    with np.errstate(divide="ignore"):
        t_max = np.min(np.where(np.abs(w) > 1e-12, q0 / np.abs(w), np.inf))
    step = 0.9 * t_max
    q_hi = q0 + step * w
    q_lo = q0 - step * w
    if np.max(np.abs(m_do @ (q_hi - q_lo))) < min_gap:
        return None

    def build(q: np.ndarray) -> DiscreteScm:
        q = np.clip(q, 0.0, None)
        q = q / q.sum()
        u_edge = f"U_{a}_{b}"
        exo = dict(exogenous)
        exo[u_edge] = ExogenousVar(
            tuple(f"t{i}" for i in range(total_types)), tuple(float(p) for p in q)
        )
        endogenous: dict[str, EndogenousVar] = {}
        pair_types = list(itertools.product(types[a], types[b]))
        for v in order:
            if v in (a, b):
                parents = inputs[v] + (u_edge,)
                table: dict[tuple[str, ...], str] = {}
                for key in itertools.product(binary, repeat=len(inputs[v])):
                    for i, (ta, tb) in enumerate(pair_types):
                        resp = ta if v == a else tb
                        table[key + (f"t{i}",)] = resp[assign_index[v][key]]
                endogenous[v] = EndogenousVar(parents, table)
            else:
                endogenous[v] = EndogenousVar(fixed_parents[v], fixed_tables[v])
        return DiscreteScm(exo, endogenous, endo_domains={v: binary for v in order})

    model_a = build(q_hi)
    model_b = build(q_lo)

    ja = observational_joint(model_a)
    jb = observational_joint(model_b)
    obs_gap = 0.0
    for key in set(ja.mass) | set(jb.mass):
        obs_gap = max(obs_gap, abs(ja.mass.get(key, 0.0) - jb.mass.get(key, 0.0)))
    if obs_gap > 1e-9:
        return None
    do_gap = 0.0
    from .scm import intervene

    for xv in x_dom:
        pa_do = observational_joint(intervene(model_a, {x: xv})).prob({y: "1"})
        pb_do = observational_joint(intervene(model_b, {x: xv})).prob({y: "1"})
        do_gap = max(do_gap, abs(pa_do - pb_do))
    if do_gap < min_gap:
        return None
    return WitnessPair(model_a, model_b, obs_gap, do_gap)
