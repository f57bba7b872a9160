"""Symbolic probability expressions and exact evaluation on joint tables.

The estimand language covers conditional-probability terms, products,
quotients and sums over a variable's domain:

    expr       := factor (('*' | '/') factor)*
    factor     := 'P(' terms ('|' terms)? ')'
                | 'sum_{' sym (',' sym)* '}' expr
                | '(' expr ')'
                | '1'
    terms      := assignment (',' assignment)*
    assignment := lowercase-symbol | VAR '=' VALUE

A lowercase symbol such as ``y`` names a value of the same-named uppercase
variable ``Y``.  The explicit form ``VAR=token`` covers everything else: the
token is a bound symbol when an enclosing ``sum_{...}`` binds it, otherwise a
literal domain value.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

__all__ = [
    "Val",
    "ProbTerm",
    "Sum",
    "Product",
    "Quotient",
    "One",
    "ONE",
    "Estimand",
    "JointTable",
    "EstimandError",
    "EstimandParseError",
    "ConditioningOnZero",
    "UnboundSymbol",
    "eval_estimand",
    "simplify",
    "render",
    "parse_estimand",
    "free_variables",
    "prod_of",
    "sum_over",
]


class EstimandError(ValueError):
    """Malformed estimand or evaluation request."""


class EstimandParseError(EstimandError):
    """Grammar violation, with the character position that triggered it."""

    def __init__(self, msg: str, pos: int):
        self.pos = pos
        super().__init__(f"column {pos + 1}: {msg}")


class ConditioningOnZero(ArithmeticError):
    """A conditioning event (or a quotient denominator) has probability zero.

    Signals that the estimand is inapplicable to the given distribution,
    e.g. an empty stratum in empirical data.
    """

    def __init__(self, context: str):
        self.context = context
        super().__init__(f"conditioning on a zero-probability event: {context}")


class UnboundSymbol(EstimandError):
    """A free symbol had no value in the supplied binding."""


_VAR_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_SYM_RE = re.compile(r"[a-z][a-z0-9_]*")
_VALUE_RE = re.compile(r"[A-Za-z0-9_.+-]+")


@dataclass(frozen=True)
class Val:
    """One variable-value reference inside a probability term.

    ``token`` is a literal domain value when ``literal`` is true, otherwise a
    symbol resolved through an enclosing sum binder or the caller's binding.
    """

    var: str
    token: str
    literal: bool = False

    def __post_init__(self):
        if not _VAR_RE.fullmatch(self.var):
            raise EstimandError(f"invalid variable name: {self.var!r}")
        if not self.token or not _VALUE_RE.fullmatch(self.token):
            raise EstimandError(f"invalid value token: {self.token!r}")

    def render(self) -> str:
        if (
            not self.literal
            and self.token == self.var.lower()
            and self.token.upper() == self.var
            and _SYM_RE.fullmatch(self.token)
        ):
            return self.token
        return f"{self.var}={self.token}"


def sym(var: str, token: str | None = None) -> Val:
    """Symbolic value reference; defaults to the lowercase of the variable."""
    return Val(var, token if token is not None else var.lower(), literal=False)


def lit(var: str, value: str) -> Val:
    """Literal value reference."""
    return Val(var, value, literal=True)


@dataclass(frozen=True)
class ProbTerm:
    joint: tuple[Val, ...]
    given: tuple[Val, ...] = ()

    def __post_init__(self):
        if not self.joint:
            raise EstimandError("probability term needs at least one joint entry")
        vars_seen = [v.var for v in self.joint + self.given]
        if len(set(vars_seen)) != len(vars_seen):
            raise EstimandError(
                "a variable may appear only once in a probability term"
            )

    def render(self) -> str:
        inner = ",".join(v.render() for v in self.joint)
        if self.given:
            inner += "|" + ",".join(v.render() for v in self.given)
        return f"P({inner})"


@dataclass(frozen=True)
class Sum:
    """Sum of ``body`` over the domain of ``var``; ``token`` is the bound symbol."""

    var: str
    token: str
    body: "Estimand"


@dataclass(frozen=True)
class Product:
    factors: tuple["Estimand", ...]

    def __post_init__(self):
        flat: list[Estimand] = []
        for f in self.factors:
            if isinstance(f, Product):
                flat.extend(f.factors)
            else:
                flat.append(f)
        object.__setattr__(self, "factors", tuple(flat))
        if len(self.factors) < 2:
            raise EstimandError("a product needs at least two factors")


@dataclass(frozen=True)
class Quotient:
    num: "Estimand"
    den: "Estimand"


@dataclass(frozen=True)
class One:
    pass


ONE = One()

Estimand = Union[ProbTerm, Sum, Product, Quotient, One]


def prod_of(factors: Iterable[Estimand]) -> Estimand:
    """Product of the factors, degenerating gracefully for 0 or 1 of them."""
    fs = [f for f in factors if not isinstance(f, One)]
    if not fs:
        return ONE
    if len(fs) == 1:
        return fs[0]
    return Product(tuple(fs))


def sum_over(binders: Iterable[tuple[str, str]], body: Estimand) -> Estimand:
    """Wrap ``body`` in sums; binders are (variable, symbol) outermost first."""
    out = body
    for var, token in reversed(list(binders)):
        out = Sum(var, token, out)
    return out


# --- joint tables ------------------------------------------------------------


@dataclass(frozen=True)
class JointTable:
    """Exact distribution over finite discrete variables.

    ``mass`` maps full assignments (tuples aligned with ``variables``) to
    probabilities; zero-mass assignments may be omitted.
    """

    variables: tuple[str, ...]
    domains: Mapping[str, tuple[str, ...]]
    mass: Mapping[tuple[str, ...], float]

    def __post_init__(self):
        if len(set(self.variables)) != len(self.variables):
            raise EstimandError("duplicate variable in joint table")
        for v in self.variables:
            dom = self.domains.get(v)
            if not dom:
                raise EstimandError(f"empty or missing domain for {v}")
            if len(set(dom)) != len(dom):
                raise EstimandError(f"duplicate values in domain of {v}")
        total = 0.0
        for key, p in self.mass.items():
            if len(key) != len(self.variables):
                raise EstimandError("assignment width does not match variables")
            if p < 0:
                raise EstimandError(f"negative mass {p} for {key}")
            for v, val in zip(self.variables, key):
                if val not in self.domains[v]:
                    raise EstimandError(f"{val!r} not in the domain of {v}")
            total += p
        if abs(total - 1.0) > 1e-12:
            raise EstimandError(f"total mass {total!r} is not 1")

    def index(self, var: str) -> int:
        try:
            return self.variables.index(var)
        except ValueError:
            raise UnboundSymbol(f"variable {var} not in the joint table") from None

    def prob(self, assignment: Mapping[str, str]) -> float:
        """Marginal probability of a partial assignment."""
        idx = [(self.index(v), val) for v, val in assignment.items()]
        return sum(
            p for key, p in self.mass.items() if all(key[i] == val for i, val in idx)
        )


# --- evaluation --------------------------------------------------------------


def eval_estimand(
    e: Estimand,
    table: JointTable,
    binding: Mapping[str, str] | None = None,
) -> float:
    """Evaluate an estimand exactly against a joint table.

    ``binding`` maps variable names to values for the estimand's free symbols.
    Raises :class:`ConditioningOnZero` when a conditioning event or quotient
    denominator has zero probability, and :class:`UnboundSymbol` when a free
    symbol has no binding.
    """
    binding = dict(binding or {})
    for var in binding:
        if var not in table.domains:
            raise UnboundSymbol(f"variable {var} not in the joint table")
    return _eval(e, table, binding, {})


def _resolve(val: Val, binding: Mapping[str, str], env: Mapping[str, str]) -> str:
    if val.literal:
        return val.token
    if val.token in env:
        return env[val.token]
    if val.var in binding:
        return binding[val.var]
    raise UnboundSymbol(f"no value bound for symbol {val.token!r} (variable {val.var})")


def _eval(
    e: Estimand,
    table: JointTable,
    binding: Mapping[str, str],
    env: dict[str, str],
) -> float:
    if isinstance(e, One):
        return 1.0
    if isinstance(e, ProbTerm):
        # values outside a column's observed domain simply carry zero mass;
        # a zero-mass conditioning event surfaces as ConditioningOnZero below
        want_joint = {
            table.index(val.var): _resolve(val, binding, env)
            for val in e.joint + e.given
        }
        want_given = {
            table.index(val.var): _resolve(val, binding, env) for val in e.given
        }
        p_all = 0.0
        p_given = 0.0
        for key, p in table.mass.items():
            if all(key[i] == v for i, v in want_given.items()):
                p_given += p
                if all(key[i] == v for i, v in want_joint.items()):
                    p_all += p
        if e.given:
            if p_given == 0.0:
                ctx = ",".join(
                    f"{v.var}={_resolve(v, binding, env)}" for v in e.given
                )
                raise ConditioningOnZero(ctx)
            return p_all / p_given
        return p_all
    if isinstance(e, Sum):
        if e.token in env:
            raise EstimandError(f"symbol {e.token!r} bound twice along one path")
        total = 0.0
        for value in table.domains[e.var]:
            env[e.token] = value
            total += _eval(e.body, table, binding, env)
        del env[e.token]
        return total
    if isinstance(e, Product):
        out = 1.0
        for f in e.factors:
            out *= _eval(f, table, binding, env)
        return out
    if isinstance(e, Quotient):
        den = _eval(e.den, table, binding, env)
        if den == 0.0:
            raise ConditioningOnZero("quotient denominator is zero")
        return _eval(e.num, table, binding, env) / den
    raise EstimandError(f"not an estimand node: {e!r}")


# --- free variables ------------------------------------------------------------


def free_variables(e: Estimand) -> frozenset[str]:
    """Variables referenced through free (unbound, non-literal) symbols."""
    out: set[str] = set()

    def walk(node: Estimand, bound: frozenset[str]) -> None:
        if isinstance(node, ProbTerm):
            for val in node.joint + node.given:
                if not val.literal and val.token not in bound:
                    out.add(val.var)
        elif isinstance(node, Sum):
            walk(node.body, bound | {node.token})
        elif isinstance(node, Product):
            for f in node.factors:
                walk(f, bound)
        elif isinstance(node, Quotient):
            walk(node.num, bound)
            walk(node.den, bound)

    walk(e, frozenset())
    return frozenset(out)


def _mentions(e: Estimand, token: str) -> bool:
    if isinstance(e, ProbTerm):
        return any(
            not v.literal and v.token == token for v in e.joint + e.given
        )
    if isinstance(e, Sum):
        return e.token == token or _mentions(e.body, token)
    if isinstance(e, Product):
        return any(_mentions(f, token) for f in e.factors)
    if isinstance(e, Quotient):
        return _mentions(e.num, token) or _mentions(e.den, token)
    return False


# --- simplification ------------------------------------------------------------


def simplify(e: Estimand) -> Estimand:
    """Conservative rewriting to a fixpoint.

    Rules: product flattening and unit elimination; chain-rule merging
    P(a|b,C) * P(b|C) -> P(a,b|C); collapse of a sum whose bound symbol occurs
    in exactly one joint position, sum_{z} P(...,z,...|C) -> P(...|C); and
    cancellation of syntactically identical quotient factors.  The result
    evaluates identically to the input on every joint table.
    """
    for _ in range(1000):
        e2 = _simplify_once(e)
        if e2 == e:
            return e
        e = e2
    return e


def _simplify_once(e: Estimand) -> Estimand:
    if isinstance(e, (One, ProbTerm)):
        return e
    if isinstance(e, Product):
        factors = [_simplify_once(f) for f in e.factors]
        factors = [f for f in factors if not isinstance(f, One)]
        merged = _merge_chain(factors)
        return prod_of(merged)
    if isinstance(e, Quotient):
        num = _simplify_once(e.num)
        den = _simplify_once(e.den)
        if num == den:
            return ONE
        if isinstance(den, One):
            return num
        out = _cancel(num, den)
        if isinstance(out, Quotient):
            extracted = _extract_conditional(out)
            if extracted is not None:
                return extracted
        return out
    if isinstance(e, Sum):
        body = _simplify_once(e.body)
        return _collapse_sum(Sum(e.var, e.token, body))
    raise EstimandError(f"not an estimand node: {e!r}")


def _merge_chain(factors: list[Estimand]) -> list[Estimand]:
    """Merge one P(a|b,C) * P(b|C) pair into P(a,b|C), if any."""
    for i, a in enumerate(factors):
        if not isinstance(a, ProbTerm):
            continue
        for j, b in enumerate(factors):
            if i == j or not isinstance(b, ProbTerm):
                continue
            if set(a.given) != set(b.joint) | set(b.given):
                continue
            joint_vars = {v.var for v in a.joint} | {v.var for v in b.joint}
            if len(joint_vars) != len(a.joint) + len(b.joint):
                continue
            merged = ProbTerm(
                joint=tuple(sorted(a.joint + b.joint, key=lambda v: v.var)),
                given=b.given,
            )
            lo, hi = min(i, j), max(i, j)
            return factors[:lo] + [merged] + factors[lo + 1 : hi] + factors[hi + 1 :]
    return factors


def _collapse_sum(e: Sum) -> Estimand:
    token = e.token
    body = e.body
    if isinstance(body, ProbTerm):
        candidates = [body]
        rest: list[Estimand] = []
    elif isinstance(body, Product):
        candidates = [f for f in body.factors if _mentions(f, token)]
        rest = [f for f in body.factors if not _mentions(f, token)]
    else:
        return e
    if len(candidates) != 1 or not isinstance(candidates[0], ProbTerm):
        return e
    term = candidates[0]
    in_joint = [v for v in term.joint if not v.literal and v.token == token]
    in_given = [v for v in term.given if not v.literal and v.token == token]
    if len(in_joint) != 1 or in_given:
        return e
    remaining = tuple(v for v in term.joint if v is not in_joint[0])
    reduced: Estimand = ProbTerm(remaining, term.given) if remaining else ONE
    return prod_of(rest + [reduced]) if rest else reduced


def _extract_conditional(q: Quotient) -> Estimand | None:
    """P(J|G) / P(K|G) with K a proper subset of J becomes P(J-K | K,G)."""
    num, den = q.num, q.den
    if not (isinstance(num, ProbTerm) and isinstance(den, ProbTerm)):
        return None
    if set(num.given) != set(den.given):
        return None
    if not set(den.joint) < set(num.joint):
        return None
    remaining = tuple(v for v in num.joint if v not in set(den.joint))
    given = tuple(sorted(den.joint + num.given, key=lambda v: v.var))
    return ProbTerm(remaining, given)


def _factor_list(e: Estimand) -> list[Estimand]:
    return list(e.factors) if isinstance(e, Product) else [e]


def _cancel(num: Estimand, den: Estimand) -> Estimand:
    nf = _factor_list(num)
    df = _factor_list(den)
    changed = False
    for d in list(df):
        if d in nf:
            nf.remove(d)
            df.remove(d)
            changed = True
    if not changed:
        return Quotient(num, den)
    if not df:
        return prod_of(nf)
    return Quotient(prod_of(nf), prod_of(df))


# --- rendering -----------------------------------------------------------------


def render(e: Estimand) -> str:
    """Canonical text for an estimand; ``parse_estimand`` inverts it."""
    return _render(e)


def _render(e: Estimand) -> str:
    if isinstance(e, One):
        return "1"
    if isinstance(e, ProbTerm):
        return e.render()
    if isinstance(e, Sum):
        return f"sum_{{{e.token}}} " + _render(e.body)
    if isinstance(e, Product):
        parts = []
        last = len(e.factors) - 1
        for i, f in enumerate(e.factors):
            needs_parens = (isinstance(f, Sum) and i < last) or (
                isinstance(f, Quotient) and i > 0
            )
            parts.append(f"({_render(f)})" if needs_parens else _render(f))
        return " * ".join(parts)
    if isinstance(e, Quotient):
        num = e.num
        num_txt = f"({_render(num)})" if isinstance(num, (Product, Sum)) else _render(num)
        den = e.den
        den_txt = (
            f"({_render(den)})"
            if isinstance(den, (Product, Quotient, Sum))
            else _render(den)
        )
        return f"{num_txt} / {den_txt}"
    raise EstimandError(f"not an estimand node: {e!r}")


# --- parsing -------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, msg: str) -> EstimandParseError:
        return EstimandParseError(msg, self.pos)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

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

    # grammar ------------------------------------------------------------

    def parse(self) -> Estimand:
        self.skip_ws()
        e = self.expr(frozenset())
        self.skip_ws()
        if self.pos != len(self.text):
            raise self.error("unexpected trailing text")
        return e

    def expr(self, bound: frozenset[str]) -> Estimand:
        out = self.factor(bound)
        while True:
            self.skip_ws()
            if self.literal("*"):
                self.skip_ws()
                rhs = self.factor(bound)
                out = Product((out, rhs))
            elif self.literal("/"):
                self.skip_ws()
                rhs = self.factor(bound)
                out = Quotient(out, rhs)
            else:
                return out

    def factor(self, bound: frozenset[str]) -> Estimand:
        self.skip_ws()
        if self.literal("sum_{"):
            binders: list[str] = []
            while True:
                self.skip_ws()
                tok = self.match_re(_SYM_RE, "a bound symbol")
                if tok in bound or tok in binders:
                    self.pos -= len(tok)
                    raise self.error(f"duplicate bound variable {tok!r}")
                binders.append(tok)
                self.skip_ws()
                if self.literal(","):
                    continue
                self.expect("}")
                break
            body = self.expr(bound | set(binders))
            out = body
            for tok in reversed(binders):
                out = Sum(_binder_var(out, tok), tok, out)
            return out
        if self.literal("P("):
            joint = self.terms(bound)
            given: tuple[Val, ...] = ()
            self.skip_ws()
            if self.literal("|"):
                given = self.terms(bound)
                self.skip_ws()
            self.expect(")")
            try:
                return ProbTerm(joint, given)
            except EstimandError as exc:
                raise self.error(str(exc)) from None
        if self.literal("("):
            inner = self.expr(bound)
            self.skip_ws()
            self.expect(")")
            return inner
        if self.peek() == "1" and not _VALUE_RE.match(self.text, self.pos + 1):
            self.pos += 1
            return ONE
        raise self.error("expected a probability term, sum, or parenthesis")

    def terms(self, bound: frozenset[str]) -> tuple[Val, ...]:
        out: list[Val] = []
        while True:
            self.skip_ws()
            out.append(self.assignment(bound))
            self.skip_ws()
            if not self.literal(","):
                return tuple(out)

    def assignment(self, bound: frozenset[str]) -> Val:
        start = self.pos
        name = self.match_re(_VAR_RE, "a variable or symbol")
        self.skip_ws()
        if self.literal("="):
            self.skip_ws()
            value = self.match_re(_VALUE_RE, "a value token")
            if value in bound:
                return Val(name, value, literal=False)
            return Val(name, value, literal=True)
        if not _SYM_RE.fullmatch(name):
            self.pos = start
            raise self.error(
                f"{name!r} needs an explicit '=value' (bare symbols are lowercase)"
            )
        return Val(name.upper(), name, literal=False)


def _binder_var(body: Estimand, token: str) -> str:
    """Variable a binder ranges over: first matching symbol occurrence wins."""

    def walk(node: Estimand) -> str | None:
        if isinstance(node, ProbTerm):
            for val in node.joint + node.given:
                if not val.literal and val.token == token:
                    return val.var
            return None
        if isinstance(node, Sum):
            if node.token == token:
                return None  # shadowed deeper; cannot happen after parse checks
            return walk(node.body)
        if isinstance(node, Product):
            for f in node.factors:
                got = walk(f)
                if got:
                    return got
            return None
        if isinstance(node, Quotient):
            return walk(node.num) or walk(node.den)
        return None

    return walk(body) or token.upper()


def parse_estimand(text: str) -> Estimand:
    """Parse estimand text; structural inverse of :func:`render`."""
    return _Parser(text).parse()
