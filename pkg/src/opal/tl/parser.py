"""Recursive-descent parser for the template language surface syntax.

ASCII operators: `:-` for the rule arrow, `!` for negation, `or` for
disjunction, `<<` for the precedence test, `=`/`!=` comparisons.  The
typeset equivalents (←, ¬, ∨, ≺, ≠) are accepted too.  `or` binds
tighter than the comma, so `a, b or c` reads as `a, (b or c)` — the way
the classification guards are written.  Statement dots are optional.
"""

from __future__ import annotations

import re
from typing import Optional

from .ast import (
    AnnQuery,
    Atom,
    Comparison,
    Disj,
    Expr,
    Instantiate,
    Neg,
    Program,
    Rule,
    Template,
    Term,
    const,
    var,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


_UNICODE_MAP = {
    "←": ":-",   # ←
    "¬": "!",    # ¬
    "∨": "or",   # ∨
    "≺": "<<",   # ≺
    "≠": "!=",   # ≠
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>%[^\n]*)
  | (?P<nl>\n)
  | (?P<arrow>:-)
  | (?P<neq>!=)
  | (?P<prec><<)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>\d+(?:\.\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[<>(){},.@!=])
    """,
    re.VERBOSE,
)


class Token:
    __slots__ = ("kind", "value", "line", "col")

    def __init__(self, kind, value, line, col):
        self.kind = kind
        self.value = value
        self.line = line
        self.col = col

    def __repr__(self):
        return f"Token({self.kind},{self.value!r})"


KEYWORDS = {"TEMPLATE", "INSTANTIATE", "using", "or"}


def tokenize(text: str) -> list[Token]:
    for u, ascii_form in _UNICODE_MAP.items():
        text = text.replace(u, f" {ascii_form} ")
    tokens: list[Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind == "nl":
            line += 1
            col = 1
            pos = m.end()
            continue
        if kind not in ("ws", "comment"):
            if kind == "id" and value in KEYWORDS:
                tokens.append(Token(value, value, line, col))
            elif kind in ("arrow", "neq", "prec"):
                tokens.append(Token(value, value, line, col))
            elif kind == "punct":
                tokens.append(Token(value, value, line, col))
            else:
                tokens.append(Token(kind, value, line, col))
        col += m.end() - pos
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


def _is_variable(name: str) -> bool:
    return name[0].isupper()


class Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    # -- token helpers ------------------------------------------------------

    def peek(self, k: int = 0) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def accept(self, kind: str) -> Optional[Token]:
        if self.peek().kind == kind:
            return self.next()
        return None

    def expect(self, kind: str, what: str = "") -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(
                f"expected {what or kind!r}, found {tok.value!r}", tok.line, tok.col
            )
        return self.next()

    def error(self, message: str):
        tok = self.peek()
        raise ParseError(message, tok.line, tok.col)

    # -- grammar ----------------------------------------------------------

    def parse_program(self) -> Program:
        program = Program()
        while self.peek().kind != "eof":
            if self.accept("."):
                continue
            tok = self.peek()
            if tok.kind == "TEMPLATE":
                tpl = self.parse_template()
                if tpl.name in program.templates:
                    self.error(f"duplicate template name {tpl.name!r}")
                program.templates[tpl.name] = tpl
            elif tok.kind == "INSTANTIATE":
                program.insts.append(self.parse_instantiate())
            else:
                program.rules.append(self.parse_rule())
        return program

    def parse_template(self) -> Template:
        start = self.expect("TEMPLATE")
        name = self.expect("id", "template name").value
        params = self.parse_param_list()
        self.expect("{")
        tpl = Template(name=name, params=params, pos=(start.line, start.col))
        while not self.accept("}"):
            if self.accept("."):
                continue
            if self.peek().kind == "INSTANTIATE":
                tpl.insts.append(self.parse_instantiate())
            elif self.peek().kind == "eof":
                self.error("unterminated template body")
            else:
                tpl.rules.append(self.parse_rule())
        return tpl

    def parse_param_list(self) -> tuple[str, ...]:
        self.expect("<")
        params = []
        while True:
            tok = self.expect("id", "template variable")
            if not _is_variable(tok.value):
                raise ParseError(
                    f"template variable must start uppercase: {tok.value!r}",
                    tok.line, tok.col,
                )
            params.append(tok.value)
            if not self.accept(","):
                break
        self.expect(">")
        return tuple(params)

    def parse_instantiate(self) -> Instantiate:
        start = self.expect("INSTANTIATE")
        self.accept("TEMPLATE")  # INSTANTIATE TEMPLATE name<...> is accepted
        name = self.expect("id", "template name").value
        params = self.parse_param_list()
        self.expect("using")
        self.expect("{")
        tuples = []
        while self.peek().kind == "<":
            self.next()
            values: list[Term] = []
            while True:
                values.append(self.parse_const_or_var())
                if not self.accept(","):
                    break
            self.expect(">")
            tuples.append(tuple(values))
            self.accept(",")
        self.expect("}")
        if not tuples:
            self.error("INSTANTIATE needs at least one value tuple")
        return Instantiate(name, params, tuple(tuples), pos=(start.line, start.col))

    def parse_const_or_var(self) -> Term:
        tok = self.peek()
        if tok.kind == "id":
            self.next()
            return var(tok.value) if _is_variable(tok.value) else const(tok.value)
        if tok.kind == "string":
            self.next()
            return const(_unquote(tok.value))
        if tok.kind == "number":
            self.next()
            return const(tok.value)
        self.error(f"expected constant or variable, found {tok.value!r}")

    def parse_rule(self) -> Rule:
        head = self.parse_head_atom()
        if self.peek().kind != ":-":
            # a fact
            self.accept(".")
            return Rule(head=head, body=(), pos=head.pos)
        self.next()
        body = self.parse_body()
        self.accept(".")
        return Rule(head=head, body=tuple(body), pos=head.pos)

    def parse_head_atom(self) -> Atom:
        tok = self.peek()
        atom = self.parse_expr()
        if not isinstance(atom, Atom):
            raise ParseError("rule head must be an atom", tok.line, tok.col)
        return atom

    def parse_body(self) -> list[Expr]:
        exprs = [self.parse_disj_level()]
        while self.accept(","):
            exprs.append(self.parse_disj_level())
        return exprs

    def parse_disj_level(self) -> Expr:
        left = self.parse_expr()
        if self.peek().kind == "or":
            pos = (self.peek().line, self.peek().col)
            self.next()
            right = self.parse_disj_level()
            right_body = (right,)
            return Disj((left,), right_body, pos=pos)
        return left

    def parse_expr(self) -> Expr:
        tok = self.peek()
        if tok.kind == "!":
            self.next()
            if self.accept("("):
                body = self.parse_body()
                self.expect(")")
                return Neg(tuple(body), pos=(tok.line, tok.col))
            inner = self.parse_expr()
            return Neg((inner,), pos=(tok.line, tok.col))
        if tok.kind == "(":
            self.next()
            body = self.parse_body()
            self.expect(")")
            if len(body) == 1:
                return body[0]
            # parenthesized conjunction: keep as a nested group via Disj-less
            return _Conj(tuple(body))
        return self.parse_simple()

    def parse_simple(self) -> Expr:
        tok = self.peek()
        if tok.kind == "string":
            # quoted text-test predicate: "l"(X); the quotes stay in the
            # predicate name so the engine can tell it from a relation
            self.next()
            label = _unquote(tok.value)
            self.expect("(")
            args = self.parse_args()
            self.expect(")")
            return Atom(pred=f'"{label}"', targs=(), args=tuple(args),
                        pos=(tok.line, tok.col))
        if tok.kind == "<":
            # predicate-variable atom <T>(args)
            self.next()
            pv = self.expect("id", "template variable").value
            self.expect(">")
            self.expect("(")
            args = self.parse_args()
            self.expect(")")
            return Atom(pred=None, targs=(), args=tuple(args), pred_var=pv,
                        pos=(tok.line, tok.col))
        if tok.kind in ("id", "number"):
            self.next()
            name = tok.value
            # comparison?  X != Y, X = Y, A1 << A
            nxt = self.peek()
            if nxt.kind in ("!=", "=", "<<"):
                op = self.next().kind
                right = self.parse_const_or_var()
                left = (
                    var(name) if tok.kind == "id" and _is_variable(name) else const(name)
                )
                return Comparison(op, left, right, pos=(tok.line, tok.col))
            if nxt.kind == "@":
                # annotation query X@A{mods}
                if tok.kind != "id" or not _is_variable(name):
                    raise ParseError("annotation query needs a variable", tok.line, tok.col)
                self.next()
                atype = self.parse_annotation_type()
                mods = self.parse_modifiers()
                return AnnQuery(name, atype, mods, pos=(tok.line, tok.col))
            targs: tuple[Term, ...] = ()
            if nxt.kind == "<":
                self.next()
                tlist: list[Term] = []
                while self.peek().kind != ">":
                    tlist.append(self.parse_const_or_var())
                    if not self.accept(","):
                        break
                self.expect(">")
                targs = tuple(tlist)
            if self.peek().kind == "(":
                self.next()
                args = self.parse_args()
                self.expect(")")
            elif targs:
                args = []
            else:
                # zero-argument proposition, e.g. `p :- ...`
                args = []
            if tok.kind != "id" or _is_variable(name):
                raise ParseError(
                    f"predicate name must be lowercase: {name!r}", tok.line, tok.col
                )
            return Atom(pred=name, targs=targs, args=tuple(args),
                        pos=(tok.line, tok.col))
        self.error(f"unexpected token {tok.value!r}")

    def parse_annotation_type(self) -> Term:
        tok = self.peek()
        if tok.kind == "id":
            self.next()
            return var(tok.value) if _is_variable(tok.value) else const(tok.value)
        if tok.kind == "string":
            self.next()
            return const(_unquote(tok.value))
        self.error("expected annotation type after '@'")

    def parse_modifiers(self) -> frozenset[str]:
        self.expect("{", "modifier set")
        mods = set()
        while self.peek().kind != "}":
            tok = self.expect("id", "modifier")
            if tok.value not in ("d", "p", "e", "m"):
                raise ParseError(f"unknown modifier {tok.value!r}", tok.line, tok.col)
            if tok.value in mods:
                raise ParseError(f"duplicate modifier {tok.value!r}", tok.line, tok.col)
            mods.add(tok.value)
            self.accept(",")
        self.expect("}")
        return frozenset(mods)

    def parse_args(self) -> list[Term]:
        args: list[Term] = []
        while self.peek().kind != ")":
            args.append(self.parse_const_or_var())
            if not self.accept(","):
                break
        return args


class _Conj:
    """Parenthesized conjunction; flattened back into the enclosing body."""

    def __init__(self, body: tuple[Expr, ...]):
        self.body = body


def _flatten(exprs) -> tuple[Expr, ...]:
    out: list[Expr] = []
    for e in exprs:
        if isinstance(e, _Conj):
            out.extend(_flatten(e.body))
        elif isinstance(e, Neg):
            out.append(Neg(_flatten(e.body), e.pos))
        elif isinstance(e, Disj):
            out.append(Disj(_flatten(e.left), _flatten(e.right), e.pos))
        else:
            out.append(e)
    return tuple(out)


def _unquote(s: str) -> str:
    return s[1:-1].replace('\\"', '"').replace("\\\\", "\\")


def parse_program(text: str) -> Program:
    program = Parser(text).parse_program()
    for rule in program.rules:
        rule.body = _flatten(rule.body)
    for tpl in program.templates.values():
        for rule in tpl.rules:
            rule.body = _flatten(rule.body)
    return program
