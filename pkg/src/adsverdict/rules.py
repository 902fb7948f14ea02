"""Outcome scoring rules: a small declarative DSL and its evaluator.

A ruleset is a sequence of rules::

    # collisions are never acceptable when other traffic behaves reasonably
    rule no_crash prescriptive
      when meta(others_reasonable)
      assert never(collision(ego, lead) > 0)

    rule crash_severity risk
      severity S0 if eventually(collision(ego, lead) > 0)
      severity S3 if eventually(collision(ego, lead) > 0 and closing_speed(ego, lead) >= 22)

Prescriptive rules either hold or fail. Risk rules assign the highest
severity level whose condition holds. Channel references such as
``ttc(ego, lead)`` are pointwise: they may appear only inside
``always``/``never``/``eventually`` or reduced by ``min``/``max``/
``duration_where``. Temporal operators quantify over trace rows.

Operator precedence, loosest first: ``or``, ``and``, ``not``, comparisons,
``+ -``, ``* /``, unary minus. A bare numeric expression used as a
condition is true when nonzero, so ``when meta(others_reasonable)`` works.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .severity import RunOutcome, SeverityLevel
from .trace import STANDARD_ARITY, ChannelId, Trace


class RuleSyntaxError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.line, self.col = line, col
        super().__init__(f"{line}:{col}: {msg}" if line else msg)


class RuleEvaluationError(ValueError):
    """A rule references a channel, parameter or metadata field that is absent."""


# --------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Chan:
    name: str
    actors: Tuple[str, ...]


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Meta:
    name: str


@dataclass(frozen=True)
class Reduce:
    op: str  # "min" | "max"
    arg: "Node"


@dataclass(frozen=True)
class Duration:
    cond: "Node"


@dataclass(frozen=True)
class Arith:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class Compare:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Truthy:
    expr: "Node"


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" | "or"
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Not:
    operand: "Node"


@dataclass(frozen=True)
class Temporal:
    op: str  # "always" | "never" | "eventually"
    cond: "Node"


Node = Union[Num, Chan, Param, Meta, Reduce, Duration, Arith, Neg, Compare, Truthy,
             BoolOp, Not, Temporal]

_NUMERIC = (Num, Chan, Param, Meta, Reduce, Duration, Arith, Neg)
_BOOLEAN = (Compare, Truthy, BoolOp, Not, Temporal)


@dataclass(frozen=True)
class Rule:
    name: str
    kind: str  # "prescriptive" | "risk"
    when: Optional[Node] = None
    assertion: Optional[Node] = None
    clauses: Tuple[Tuple[SeverityLevel, Node], ...] = ()


@dataclass(frozen=True)
class RuleSet:
    rules: Tuple[Rule, ...]

    def __iter__(self) -> Iterator[Rule]:
        return iter(self.rules)

    def __len__(self):
        return len(self.rules)

    def references(self) -> Dict[str, set]:
        """Names referenced by the rules, keyed by ``param``/``meta``/``channel``."""
        refs = {"param": set(), "meta": set(), "channel": set()}
        for rule in self.rules:
            for node in _rule_nodes(rule):
                for sub in walk(node):
                    if isinstance(sub, Param):
                        refs["param"].add(sub.name)
                    elif isinstance(sub, Meta):
                        refs["meta"].add(sub.name)
                    elif isinstance(sub, Chan):
                        refs["channel"].add(ChannelId(sub.name, sub.actors))
        return refs


def _rule_nodes(rule: Rule):
    if rule.when is not None:
        yield rule.when
    if rule.assertion is not None:
        yield rule.assertion
    for _, cond in rule.clauses:
        yield cond


def walk(node: Node) -> Iterator[Node]:
    yield node
    if isinstance(node, (Arith, Compare, BoolOp)):
        yield from walk(node.left)
        yield from walk(node.right)
    elif isinstance(node, (Neg, Not)):
        yield from walk(node.operand)
    elif isinstance(node, Reduce):
        yield from walk(node.arg)
    elif isinstance(node, (Duration, Temporal)):
        yield from walk(node.cond)
    elif isinstance(node, Truthy):
        yield from walk(node.expr)


# --------------------------------------------------------------------------
# Lexer

KEYWORDS = {
    "rule", "prescriptive", "risk", "when", "assert", "severity", "if",
    "always", "never", "eventually", "and", "or", "not",
    "param", "meta", "min", "max", "duration_where",
}
FUNCTIONS = {"always", "never", "eventually", "param", "meta", "min", "max", "duration_where"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<str>"[^"\n]*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|==|!=|<|>|\+|-|\*|/|\(|\)|,)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num, str, ident, kw, op, eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> List[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise RuleSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        tok = m.group()
        col = pos - line_start + 1
        if kind == "ident" and tok in KEYWORDS:
            kind = "kw"
        if kind != "ws":
            tokens.append(Token(kind, tok, line, col))
        nl = tok.count("\n")
        if nl:
            line += nl
            line_start = pos + tok.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# --------------------------------------------------------------------------
# Parser

_LEVEL_RE = re.compile(r"^S[0-3]$")
_CMP_OPS = ("<", "<=", ">", ">=", "==", "!=")


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.tok
        return RuleSyntaxError(msg, tok.line, tok.col)

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        if not self.at(kind, text):
            want = repr(text) if text else kind
            got = repr(self.tok.text) if self.tok.kind != "eof" else "end of input"
            raise self.error(f"expected {want}, got {got}")
        return self.advance()

    # rules ---------------------------------------------------------------

    def ruleset(self) -> RuleSet:
        rules = []
        names = set()
        if self.at("eof"):
            raise self.error("ruleset contains no rules")
        while not self.at("eof"):
            start = self.tok
            rule = self.rule()
            if rule.name in names:
                raise self.error(f"duplicate rule name {rule.name!r}", start)
            names.add(rule.name)
            rules.append(rule)
        return RuleSet(tuple(rules))

    def rule(self) -> Rule:
        self.expect("kw", "rule")
        name = self.expect("ident").text
        if self.at("kw", "prescriptive"):
            self.advance()
            when = self.when_clause()
            self.expect("kw", "assert")
            body = self.condition(where=f"rule {name}")
            return Rule(name, "prescriptive", when=when, assertion=body)
        if self.at("kw", "risk"):
            self.advance()
            when = self.when_clause()
            clauses = []
            seen = set()
            if not self.at("kw", "severity"):
                raise self.error(f"risk rule {name!r} needs at least one severity clause")
            while self.at("kw", "severity"):
                self.advance()
                lt = self.tok
                if lt.kind != "ident" or not _LEVEL_RE.match(lt.text):
                    raise self.error("expected severity level S0..S3")
                self.advance()
                level = SeverityLevel[lt.text]
                if level in seen:
                    raise self.error(f"duplicate severity level {lt.text}", lt)
                seen.add(level)
                self.expect("kw", "if")
                clauses.append((level, self.condition(where=f"rule {name}")))
            return Rule(name, "risk", when=when, clauses=tuple(clauses))
        raise self.error("expected 'prescriptive' or 'risk'")

    def when_clause(self) -> Optional[Node]:
        if not self.at("kw", "when"):
            return None
        tok = self.advance()
        cond = self.condition(where="when clause")
        for sub in walk(cond):
            if isinstance(sub, (Chan, Reduce, Duration, Temporal)):
                raise self.error("when clause may only use param() and meta()", tok)
        return cond

    def condition(self, where: str) -> Node:
        start = self.tok
        node = self.expr()
        node = self._as_bool(node, start)
        _check_context(node, pointwise=False, tok=start)
        return node

    # expressions ---------------------------------------------------------

    def _as_bool(self, node: Node, tok: Token) -> Node:
        if isinstance(node, _BOOLEAN):
            return node
        return Truthy(node)

    def _as_num(self, node: Node, tok: Token) -> Node:
        if isinstance(node, _NUMERIC):
            return node
        raise self.error("expected a numeric expression, got a condition", tok)

    def expr(self) -> Node:
        return self.or_expr()

    def or_expr(self) -> Node:
        start = self.tok
        left = self.and_expr()
        while self.at("kw", "or"):
            self.advance()
            rt = self.tok
            right = self.and_expr()
            left = BoolOp("or", self._as_bool(left, start), self._as_bool(right, rt))
        return left

    def and_expr(self) -> Node:
        start = self.tok
        left = self.not_expr()
        while self.at("kw", "and"):
            self.advance()
            rt = self.tok
            right = self.not_expr()
            left = BoolOp("and", self._as_bool(left, start), self._as_bool(right, rt))
        return left

    def not_expr(self) -> Node:
        if self.at("kw", "not"):
            self.advance()
            tok = self.tok
            return Not(self._as_bool(self.not_expr(), tok))
        return self.comparison()

    def comparison(self) -> Node:
        start = self.tok
        left = self.additive()
        if self.tok.kind == "op" and self.tok.text in _CMP_OPS:
            op = self.advance().text
            rt = self.tok
            right = self.additive()
            if self.tok.kind == "op" and self.tok.text in _CMP_OPS:
                raise self.error("comparisons cannot be chained")
            return Compare(op, self._as_num(left, start), self._as_num(right, rt))
        return left

    def additive(self) -> Node:
        start = self.tok
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.advance().text
            rt = self.tok
            right = self.term()
            left = Arith(op, self._as_num(left, start), self._as_num(right, rt))
        return left

    def term(self) -> Node:
        start = self.tok
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self.advance().text
            rt = self.tok
            right = self.unary()
            left = Arith(op, self._as_num(left, start), self._as_num(right, rt))
        return left

    def unary(self) -> Node:
        if self.at("op", "-"):
            self.advance()
            tok = self.tok
            operand = self._as_num(self.unary(), tok)
            if isinstance(operand, Num):
                return Num(-operand.value)
            return Neg(operand)
        return self.primary()

    def primary(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if self.at("op", "("):
            self.advance()
            node = self.expr()
            self.expect("op", ")")
            return node
        if tok.kind == "kw" and tok.text in FUNCTIONS:
            return self.builtin()
        if tok.kind == "ident":
            self.advance()
            if not self.at("op", "("):
                raise self.error(f"bare identifier {tok.text!r}; expected a channel reference like {tok.text}(ego)", tok)
            return self.chanref(tok)
        if tok.kind == "eof":
            raise self.error("unexpected end of input")
        raise self.error(f"unexpected {tok.text!r}")

    def builtin(self) -> Node:
        tok = self.advance()
        fn = tok.text
        self.expect("op", "(")
        if fn in ("param", "meta"):
            nt = self.tok
            if nt.kind == "str":
                name = nt.text[1:-1]
            elif nt.kind in ("ident", "kw"):
                name = nt.text
            else:
                raise self.error(f"{fn}() takes a name")
            if not name:
                raise self.error(f"{fn}() name must be nonempty", nt)
            self.advance()
            self.expect("op", ")")
            return Param(name) if fn == "param" else Meta(name)
        inner_tok = self.tok
        inner = self.expr()
        self.expect("op", ")")
        if fn in ("min", "max"):
            return Reduce(fn, self._as_num(inner, inner_tok))
        if fn == "duration_where":
            return Duration(self._as_bool(inner, inner_tok))
        return Temporal(fn, self._as_bool(inner, inner_tok))

    def chanref(self, name_tok: Token) -> Node:
        self.expect("op", "(")
        actors = []
        while True:
            t = self.tok
            if t.kind == "ident" and self.toks[self.i + 1].kind == "op" and self.toks[self.i + 1].text in (",", ")"):
                actors.append(self.advance().text)
            else:
                raise self.error(f"unknown function name {name_tok.text!r}", name_tok)
            if self.at("op", ")"):
                self.advance()
                break
            self.expect("op", ",")
        name = name_tok.text
        want = STANDARD_ARITY.get(name)
        if want is not None and len(actors) != want:
            raise self.error(f"channel {name!r} takes {want} actor(s), got {len(actors)}", name_tok)
        if want is None and len(actors) > 2:
            raise self.error(f"unknown function name {name!r}", name_tok)
        if not re.match(r"^[a-z_][a-z0-9_]*$", name):
            raise self.error(f"unknown function name {name!r}", name_tok)
        return Chan(name, tuple(actors))


def _check_context(node: Node, pointwise: bool, tok: Token):
    """Channel refs only inside temporal operators or reductions; no nested temporal ops."""
    if isinstance(node, Chan):
        if not pointwise:
            raise RuleSyntaxError(
                f"channel {node.name}({', '.join(node.actors)}) must be inside "
                "always/never/eventually or wrapped in min/max/duration_where",
                tok.line, tok.col,
            )
        return
    if isinstance(node, Temporal):
        if pointwise:
            raise RuleSyntaxError(f"{node.op}() cannot be nested in a pointwise expression",
                                  tok.line, tok.col)
        _check_context(node.cond, True, tok)
        return
    if isinstance(node, Reduce):
        _check_context(node.arg, True, tok)
        return
    if isinstance(node, Duration):
        _check_context(node.cond, True, tok)
        return
    for child in _children(node):
        _check_context(child, pointwise, tok)


def _children(node: Node):
    if isinstance(node, (Arith, Compare, BoolOp)):
        return (node.left, node.right)
    if isinstance(node, (Neg, Not)):
        return (node.operand,)
    if isinstance(node, Truthy):
        return (node.expr,)
    if isinstance(node, Reduce):
        return (node.arg,)
    if isinstance(node, (Duration, Temporal)):
        return (node.cond,)
    return ()


def parse_ruleset(text: str) -> RuleSet:
    """Parse ruleset source. Errors are :class:`RuleSyntaxError` with line:column."""
    return _Parser(text).ruleset()


def parse_condition(text: str) -> Node:
    """Parse a single top-level condition (used by tests and tooling)."""
    p = _Parser(text)
    node = p.condition(where="condition")
    p.expect("eof")
    return node


def read_ruleset(path) -> RuleSet:
    with open(path, encoding="utf-8") as fh:
        return parse_ruleset(fh.read())


# --------------------------------------------------------------------------
# Printer

_PREC = {"or": 1, "and": 2, "not": 3, "cmp": 4, "+": 5, "-": 5, "*": 6, "/": 6, "neg": 7, "atom": 8}


def _prec(node: Node) -> int:
    if isinstance(node, BoolOp):
        return _PREC[node.op]
    if isinstance(node, Not):
        return _PREC["not"]
    if isinstance(node, Compare):
        return _PREC["cmp"]
    if isinstance(node, Arith):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    if isinstance(node, Num) and node.value < 0:
        return _PREC["neg"]
    if isinstance(node, Truthy):
        return _prec(node.expr)
    return _PREC["atom"]


def _fmt_num(x: float) -> str:
    if math.isinf(x) or math.isnan(x):
        raise ValueError("non-finite literal cannot be printed")
    return repr(float(x))


def format_expr(node: Node) -> str:
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Chan):
        return f"{node.name}({', '.join(node.actors)})"
    if isinstance(node, Param):
        return f'param("{node.name}")'
    if isinstance(node, Meta):
        return f'meta("{node.name}")'
    if isinstance(node, Reduce):
        return f"{node.op}({format_expr(node.arg)})"
    if isinstance(node, Duration):
        return f"duration_where({format_expr(node.cond)})"
    if isinstance(node, Temporal):
        return f"{node.op}({format_expr(node.cond)})"
    if isinstance(node, Truthy):
        return format_expr(node.expr)
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, _PREC["neg"], strict=False)
    if isinstance(node, Not):
        return "not " + _wrap(node.operand, _PREC["not"], strict=False)
    if isinstance(node, (Arith, BoolOp, Compare)):
        p = _prec(node)
        # comparisons are non-associative: parenthesize both sides at equal precedence
        left = _wrap(node.left, p, strict=isinstance(node, Compare))
        right = _wrap(node.right, p, strict=True)
        return f"{left} {node.op} {right}"
    raise TypeError(f"not an expression node: {node!r}")


def _wrap(node: Node, parent: int, strict: bool) -> str:
    s = format_expr(node)
    p = _prec(node)
    if p < parent or (strict and p == parent):
        return f"({s})"
    return s


def format_ruleset(rs: RuleSet) -> str:
    out = []
    for rule in rs:
        out.append(f"rule {rule.name} {rule.kind}")
        if rule.when is not None:
            out.append(f"  when {format_expr(rule.when)}")
        if rule.kind == "prescriptive":
            out.append(f"  assert {format_expr(rule.assertion)}")
        else:
            for level, cond in rule.clauses:
                out.append(f"  severity {level.name} if {format_expr(cond)}")
        out.append("")
    return "\n".join(out)


# --------------------------------------------------------------------------
# Evaluation

def metadata_of(fs) -> Dict[str, float]:
    """Numeric view of a functional scenario for ``meta()`` lookups."""
    md = {
        "others_reasonable": 1.0 if fs.others_reasonable else 0.0,
        "demand_prior": float(fs.demand_prior),
        "exposure_value": float(fs.exposure.value),
    }
    if fs.exposure.mean_duration_hours is not None:
        md["exposure_mean_duration_hours"] = float(fs.exposure.mean_duration_hours)
    return md


class _Env:
    def __init__(self, rule: Rule, trace: Trace, params: Mapping[str, float],
                 meta: Mapping[str, float]):
        self.rule = rule
        self.trace = trace
        self.params = params
        self.meta = meta
        self.n = len(trace)

    def fail(self, what: str):
        return RuleEvaluationError(f"rule {self.rule.name!r}: unresolved reference {what}")


def _eval(node: Node, env: _Env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Chan):
        cid = ChannelId(node.name, node.actors)
        try:
            return env.trace.channels[cid]
        except KeyError:
            raise env.fail(f"channel {cid}") from None
    if isinstance(node, Param):
        try:
            return float(env.params[node.name])
        except KeyError:
            raise env.fail(f'param("{node.name}")') from None
    if isinstance(node, Meta):
        try:
            return float(env.meta[node.name])
        except KeyError:
            raise env.fail(f'meta("{node.name}")') from None
    if isinstance(node, Arith):
        a, b = _eval(node.left, env), _eval(node.right, env)
        with np.errstate(divide="ignore", invalid="ignore"):
            if node.op == "+":
                return np.add(a, b)
            if node.op == "-":
                return np.subtract(a, b)
            if node.op == "*":
                return np.multiply(a, b)
            return np.true_divide(a, b)
    if isinstance(node, Neg):
        return np.negative(_eval(node.operand, env))
    if isinstance(node, Compare):
        a, b = _eval(node.left, env), _eval(node.right, env)
        with np.errstate(invalid="ignore"):
            return {
                "<": np.less, "<=": np.less_equal, ">": np.greater,
                ">=": np.greater_equal, "==": np.equal, "!=": np.not_equal,
            }[node.op](a, b)
    if isinstance(node, Truthy):
        return np.not_equal(_eval(node.expr, env), 0)
    if isinstance(node, BoolOp):
        a, b = _eval(node.left, env), _eval(node.right, env)
        return np.logical_and(a, b) if node.op == "and" else np.logical_or(a, b)
    if isinstance(node, Not):
        return np.logical_not(_eval(node.operand, env))
    if isinstance(node, Temporal):
        rows = np.broadcast_to(_eval(node.cond, env), (env.n,))
        if node.op == "always":
            return bool(np.all(rows))
        if node.op == "never":
            return not bool(np.any(rows))
        return bool(np.any(rows))
    if isinstance(node, Reduce):
        vals = np.broadcast_to(_eval(node.arg, env), (env.n,))
        if env.n == 0:
            return math.inf if node.op == "min" else -math.inf
        return float(np.min(vals) if node.op == "min" else np.max(vals))
    if isinstance(node, Duration):
        rows = np.broadcast_to(_eval(node.cond, env), (env.n,))
        return float(np.count_nonzero(rows)) * env.trace.dt_nominal
    raise TypeError(f"cannot evaluate {node!r}")


def eval_condition(node: Node, rule: Rule, trace: Trace, params: Mapping[str, float],
                   meta: Mapping[str, float]) -> bool:
    return bool(_eval(node, _Env(rule, trace, params, meta)))


def check_references(rs: RuleSet, tr: Trace, params: Mapping[str, float],
                     meta: Mapping[str, float]) -> None:
    """Raise :class:`RuleEvaluationError` for the first unresolvable reference."""
    for rule in rs:
        for node in _rule_nodes(rule):
            for sub in walk(node):
                if isinstance(sub, Chan) and ChannelId(sub.name, sub.actors) not in tr.channels:
                    ref = f"channel {sub.name}:{':'.join(sub.actors)}"
                elif isinstance(sub, Param) and sub.name not in params:
                    ref = f'param("{sub.name}")'
                elif isinstance(sub, Meta) and sub.name not in meta:
                    ref = f'meta("{sub.name}")'
                else:
                    continue
                raise RuleEvaluationError(f"rule {rule.name!r}: unresolved reference {ref}")


def evaluate_rules(rs: RuleSet, tr: Trace, cs, fs) -> RunOutcome:
    """Score one concrete run against a ruleset.

    Any violated applicable prescriptive rule yields a prescriptive failure
    listing all such rules. Otherwise the severity is the maximum over
    applicable risk rules of the highest level whose condition holds.
    """
    params = dict(cs.assignments)
    meta = metadata_of(fs)
    check_references(rs, tr, params, meta)
    violated = []
    severity = SeverityLevel.SNONE
    for rule in rs:
        env = _Env(rule, tr, params, meta)
        if rule.when is not None and not bool(_eval(rule.when, env)):
            continue
        if rule.kind == "prescriptive":
            if not bool(_eval(rule.assertion, env)):
                violated.append(rule.name)
        else:
            for level, cond in sorted(rule.clauses, key=lambda c: c[0], reverse=True):
                if level <= severity:
                    break
                if bool(_eval(cond, env)):
                    severity = level
                    break
    if violated:
        return RunOutcome.failure(violated)
    return RunOutcome.scored(severity)


# --------------------------------------------------------------------------
# Crash severity stub

DEFAULT_DELTA_V_THRESHOLDS = (1.0, 4.0, 11.0)


def severity_from_delta_v(delta_v_mps: float,
                          thresholds: Sequence[float] = DEFAULT_DELTA_V_THRESHOLDS) -> SeverityLevel:
    """Bin a collision delta-V (m/s) into S0..S3.

    ``thresholds`` are the ascending upper bounds of S0, S1 and S2. The
    defaults are placeholders for a real crash severity model.
    """
    if delta_v_mps < 0 or math.isnan(delta_v_mps):
        raise ValueError(f"delta-V must be nonnegative, got {delta_v_mps}")
    t0, t1, t2 = thresholds
    if not t0 < t1 < t2:
        raise ValueError("thresholds must be strictly increasing")
    if delta_v_mps < t0:
        return SeverityLevel.S0
    if delta_v_mps < t1:
        return SeverityLevel.S1
    if delta_v_mps < t2:
        return SeverityLevel.S2
    return SeverityLevel.S3


def crash_severity_rule(name: str, a: str, b: str,
                        thresholds: Sequence[float] = DEFAULT_DELTA_V_THRESHOLDS,
                        when: Optional[str] = None) -> str:
    """DSL source for a risk rule binning a collision by delta-V.

    Delta-V is taken as half the closing speed while in contact, i.e. an
    equal-mass plastic impact. The rule text mirrors
    :func:`severity_from_delta_v` so both give the same level.
    """
    t0, t1, t2 = thresholds
    hit = f"collision({a}, {b}) > 0"
    dv = f"closing_speed({a}, {b}) * 0.5"
    lines = [f"rule {name} risk"]
    if when:
        lines.append(f"  when {when}")
    lines.append(f"  severity S0 if eventually({hit})")
    lines.append(f"  severity S1 if eventually({hit} and {dv} >= {t0!r})")
    lines.append(f"  severity S2 if eventually({hit} and {dv} >= {t1!r})")
    lines.append(f"  severity S3 if eventually({hit} and {dv} >= {t2!r})")
    return "\n".join(lines) + "\n"
