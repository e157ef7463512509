"""Term model, tokenizer, parser, and renderer for the Prolog subset used by
data files, background programs, and model files.

The grammar is deliberately small: unquoted lowercase atoms (interior hyphens
allowed, so identifiers like ``h2o-1`` are plain atoms), single-quoted atoms
with ``''`` escaping, signed integers and floats, uppercase/underscore
variables, and compounds ``f(t1,...,tn)``.  The only infix operators are
``:-`` and the comparison builtins; ``%`` starts a comment.  Rendering is
canonical: ``parse(render(parse(t)))`` is structurally identical to
``parse(t)``, and atoms are quoted exactly when they would not re-parse
unquoted.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator, Union

from .errors import ParseError

BUILTIN_PREDS = frozenset({"=", "\\=", "<", ">", "=<", ">="})

_UNQUOTED_ATOM_RE = re.compile(r"[a-z][A-Za-z0-9_]*(?:-[A-Za-z0-9_]+)*\Z")


@dataclass(frozen=True, slots=True)
class Atom:
    name: str


@dataclass(frozen=True, slots=True, eq=False)
class Number:
    """Numeric constant; integers and floats are distinct terms (1 != 1.0)."""

    value: int | float

    def __eq__(self, other):
        return (
            type(other) is Number
            and type(other.value) is type(self.value)
            and other.value == self.value
        )

    def __hash__(self):
        return hash((type(self.value).__name__, self.value))


@dataclass(frozen=True, slots=True)
class Variable:
    name: str


@dataclass(frozen=True, slots=True)
class Compound:
    functor: str
    args: "tuple[Term, ...]"


Term = Union[Atom, Number, Variable, Compound]


@dataclass(frozen=True, slots=True)
class Literal:
    """A predicate applied to terms; ``builtin`` only for the comparison set."""

    pred: str
    args: tuple[Term, ...]
    builtin: bool = False

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def key(self) -> tuple[str, int]:
        return (self.pred, len(self.args))


@dataclass(frozen=True, slots=True)
class Clause:
    head: Literal
    body: tuple[Literal, ...] = ()


def term_variables(term: Term, acc: list[str] | None = None) -> list[str]:
    """Variable names in ``term``, ordered by first occurrence."""
    if acc is None:
        acc = []
    if isinstance(term, Variable):
        if term.name not in acc:
            acc.append(term.name)
    elif isinstance(term, Compound):
        for a in term.args:
            term_variables(a, acc)
    return acc


def literal_variables(literals, acc: list[str] | None = None) -> list[str]:
    if acc is None:
        acc = []
    for lit in literals:
        for a in lit.args:
            term_variables(a, acc)
    return acc


def is_ground(term: Term) -> bool:
    if isinstance(term, Variable):
        return False
    if isinstance(term, Compound):
        return all(is_ground(a) for a in term.args)
    return True


def term_to_literal(term: Term, *, line=None, col=None) -> Literal:
    if isinstance(term, Atom):
        return Literal(term.name, ())
    if isinstance(term, Compound):
        return Literal(term.functor, term.args)
    raise ParseError("a literal must be an atom or a compound term", line, col)


# ---------------------------------------------------------------------------
# Tokenizer


@dataclass(slots=True)
class Token:
    kind: str  # atom var int float punct op eof
    text: str
    value: object
    line: int
    col: int


_TWO_CHAR_OPS = (":-", "=<", ">=", "\\=")
_ONE_CHAR_OPS = ("=", "<", ">")
_PUNCT = "(),.[]:+-!"


# Unquoted lexemes are ASCII-only (Unicode goes inside quotes), so the
# classifiers below must not use str.isdigit()/isalpha(), which accept
# characters like superscripts that int()/the grammar reject.
def _is_digit(ch: str) -> bool:
    return "0" <= ch <= "9"


def _is_ident(ch: str) -> bool:
    return "a" <= ch <= "z" or "A" <= ch <= "Z" or _is_digit(ch) or ch == "_"


def tokenize(text: str, line: int = 1, col: int = 1) -> list[Token]:
    """Tokenize ``text``; raises ParseError with position on bad input."""
    toks: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "%":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch == "'":
            j = i + 1
            buf = []
            while True:
                if j >= n or text[j] == "\n":
                    raise ParseError("unterminated quote", start_line, start_col)
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    j += 1
                    break
                buf.append(text[j])
                j += 1
            toks.append(Token("atom", text[i:j], "".join(buf), start_line, start_col))
            col += j - i
            i = j
            continue
        if _is_digit(ch) or (ch in "+-" and i + 1 < n and _is_digit(text[i + 1])):
            i2, num = _scan_number(text, i)
            toks.append(
                Token("float" if isinstance(num, float) else "int", text[i:i2], num, start_line, start_col)
            )
            col += i2 - i
            i = i2
            continue
        if "a" <= ch <= "z":
            i2 = _scan_name(text, i)
            toks.append(Token("atom", text[i:i2], text[i:i2], start_line, start_col))
            col += i2 - i
            i = i2
            continue
        if "A" <= ch <= "Z" or ch == "_":
            i2 = i + 1
            while i2 < n and _is_ident(text[i2]):
                i2 += 1
            toks.append(Token("var", text[i:i2], text[i:i2], start_line, start_col))
            col += i2 - i
            i = i2
            continue
        two = text[i : i + 2]
        if two in _TWO_CHAR_OPS:
            toks.append(Token("op", two, two, start_line, start_col))
            i += 2
            col += 2
            continue
        if ch in _ONE_CHAR_OPS:
            toks.append(Token("op", ch, ch, start_line, start_col))
            i += 1
            col += 1
            continue
        if ch in _PUNCT:
            toks.append(Token("punct", ch, ch, start_line, start_col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", start_line, start_col)
    toks.append(Token("eof", "", None, line, col))
    return toks


def _scan_name(text: str, i: int) -> int:
    n = len(text)
    j = i + 1
    while j < n:
        c = text[j]
        if _is_ident(c):
            j += 1
        elif c == "-" and j + 1 < n and _is_ident(text[j + 1]):
            j += 2
        else:
            break
    return j


def _scan_number(text: str, i: int):
    n = len(text)
    j = i
    if text[j] in "+-":
        j += 1
    while j < n and _is_digit(text[j]):
        j += 1
    is_float = False
    if j + 1 < n and text[j] == "." and _is_digit(text[j + 1]):
        is_float = True
        j += 1
        while j < n and _is_digit(text[j]):
            j += 1
    if j < n and text[j] in "eE":
        k = j + 1
        if k < n and text[k] in "+-":
            k += 1
        if k < n and _is_digit(text[k]):
            is_float = True
            j = k
            while j < n and _is_digit(text[j]):
                j += 1
    lexeme = text[i:j]
    return j, (float(lexeme) if is_float else int(lexeme))


# ---------------------------------------------------------------------------
# Parser


class TokenStream:
    def __init__(self, tokens: list[Token]):
        self._toks = tokens
        self._pos = 0

    def peek(self) -> Token:
        return self._toks[self._pos]

    def next(self) -> Token:
        tok = self._toks[self._pos]
        if tok.kind != "eof":
            self._pos += 1
        return tok

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text if text is not None else kind
            raise ParseError(f"expected {want!r}, found {tok.text or tok.kind!r}", tok.line, tok.col)
        return self.next()

    def at(self, kind: str, text: str | None = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (text is None or tok.text == text)


class TermParser:
    """Recursive-descent parser over a token stream.

    Every bare ``_`` token becomes a distinct fresh variable (``_1``, ``_2``,
    ...); named underscore variables such as ``_Foo`` are kept as written.
    """

    def __init__(self, stream: TokenStream):
        self.s = stream
        self._anon = 0

    def term(self) -> Term:
        tok = self.s.peek()
        if tok.kind == "var":
            self.s.next()
            if tok.text == "_":
                self._anon += 1
                return Variable(f"_{self._anon}")
            return Variable(tok.text)
        if tok.kind in ("int", "float"):
            self.s.next()
            return Number(tok.value)
        if tok.kind == "atom":
            self.s.next()
            if self.s.at("punct", "("):
                self.s.next()
                args = [self.term()]
                while self.s.at("punct", ","):
                    self.s.next()
                    args.append(self.term())
                self.s.expect("punct", ")")
                return Compound(tok.value, tuple(args))
            return Atom(tok.value)
        raise ParseError(f"expected a term, found {tok.text or tok.kind!r}", tok.line, tok.col)

    def literal(self, allow_cut: bool = False) -> Literal:
        tok = self.s.peek()
        if tok.kind == "punct" and tok.text == "!":
            if not allow_cut:
                raise ParseError("cut is not allowed here", tok.line, tok.col)
            self.s.next()
            return Literal("!", ())
        lhs = self.term()
        nxt = self.s.peek()
        if nxt.kind == "op" and nxt.text in BUILTIN_PREDS:
            self.s.next()
            rhs = self.term()
            return Literal(nxt.text, (lhs, rhs), builtin=True)
        return term_to_literal(lhs, line=tok.line, col=tok.col)


def parse_term(text: str, line: int = 1, col: int = 1) -> Term:
    """Parse a complete term; trailing input is an error."""
    stream = TokenStream(tokenize(text, line, col))
    if stream.at("eof"):
        raise ParseError("empty input", line, col)
    term = TermParser(stream).term()
    tok = stream.peek()
    if tok.kind != "eof":
        raise ParseError(f"unexpected trailing input {tok.text!r}", tok.line, tok.col)
    return term


def parse_program(text: str, line: int = 1, col: int = 1,
                  allow_cut: bool = False) -> tuple[Clause, ...]:
    """Parse a sequence of ``Head.`` facts and ``Head :- B1, ..., Bn.`` rules.

    ``allow_cut`` admits ``!`` as a body literal, which the model-file
    decision-list section uses as a trailing marker token.
    """
    stream = TokenStream(tokenize(text, line, col))
    parser = TermParser(stream)
    clauses: list[Clause] = []
    while not stream.at("eof"):
        tok = stream.peek()
        head = parser.literal(allow_cut=False)
        if head.builtin:
            raise ParseError(f"builtin {head.pred!r} cannot appear in head position", tok.line, tok.col)
        if head.pred == "!":
            raise ParseError("cut cannot appear in head position", tok.line, tok.col)
        body: list[Literal] = []
        if stream.at("op", ":-"):
            stream.next()
            body.append(parser.literal(allow_cut=allow_cut))
            while stream.at("punct", ","):
                stream.next()
                body.append(parser.literal(allow_cut=allow_cut))
        stream.expect("punct", ".")
        clauses.append(Clause(head, tuple(body)))
    return tuple(clauses)


# ---------------------------------------------------------------------------
# Renderer


def render_atom(name: str) -> str:
    if _UNQUOTED_ATOM_RE.match(name):
        return name
    return "'" + name.replace("'", "''") + "'"


def render_term(term: Term) -> str:
    if isinstance(term, Atom):
        return render_atom(term.name)
    if isinstance(term, Number):
        v = term.value
        if isinstance(v, float) and not math.isfinite(v):
            raise ValueError(f"cannot render non-finite float {v!r}")
        return repr(v)
    if isinstance(term, Variable):
        return term.name
    if isinstance(term, Compound):
        return render_atom(term.functor) + "(" + ",".join(render_term(a) for a in term.args) + ")"
    raise TypeError(f"not a term: {term!r}")


def render_literal(lit: Literal) -> str:
    if lit.builtin:
        return f"{render_term(lit.args[0])} {lit.pred} {render_term(lit.args[1])}"
    if lit.pred == "!" and not lit.args:
        return "!"
    if not lit.args:
        return render_atom(lit.pred)
    return render_atom(lit.pred) + "(" + ",".join(render_term(a) for a in lit.args) + ")"


def render_conjunction(literals) -> str:
    if not literals:
        return "true"
    return ", ".join(render_literal(l) for l in literals)


def render_clause(clause: Clause) -> str:
    if not clause.body:
        return render_literal(clause.head) + "."
    return render_literal(clause.head) + " :- " + render_conjunction(clause.body) + "."


def render_fact(lit: Literal) -> str:
    return render_literal(lit) + "."


def fact_to_term(lit: Literal) -> Term:
    return Atom(lit.pred) if not lit.args else Compound(lit.pred, lit.args)


def iter_clause_texts(fileobj) -> Iterator[tuple[str, int, int]]:
    """Stream ``(clause_text, line, col)`` triples from a file-like object.

    A clause ends at a ``.`` outside quotes/comments that is followed by
    whitespace, a comment, or end of input.  The terminating dot is not
    included in the yielded text.  This keeps file loading incremental: the
    whole file is never required in memory.
    """
    buf: list[str] = []
    line, col = 1, 1
    start_line, start_col = None, None
    in_quote = False
    in_comment = False
    while True:
        ch = fileobj.read(1)
        if ch == "":
            if any(not c.isspace() for c in buf):
                yield "".join(buf), start_line or line, start_col or col
            return
        if in_comment:
            if ch == "\n":
                in_comment = False
                buf.append(ch)
                line += 1
                col = 1
            else:
                col += 1
            continue
        if in_quote:
            buf.append(ch)
            if ch == "'" or ch == "\n":
                in_quote = False  # tokenizer reports an unterminated quote
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
            continue
        if ch == "%":
            in_comment = True
            col += 1
            continue
        if ch == ".":
            # Peek one character: a dot followed by layout (or EOF) terminates
            # the clause; a dot inside a number (e.g. 4.5) does not.
            nxt = fileobj.read(1)
            if nxt == "" or nxt.isspace() or nxt == "%":
                text = "".join(buf)
                if any(not c.isspace() for c in text):
                    yield text, start_line or line, start_col or col
                buf = []
                start_line = start_col = None
                in_comment = nxt == "%"
                if nxt == "\n":
                    line += 1
                    col = 1
                else:
                    col += 2
                continue
            if start_line is None:
                start_line, start_col = line, col
            buf.append(ch)
            buf.append(nxt)
            if nxt == "\n":
                line += 1
                col = 1
            else:
                col += 2
            continue
        if ch == "'":
            in_quote = True
        if start_line is None and not ch.isspace():
            start_line, start_col = line, col
        buf.append(ch)
        if ch == "\n":
            line += 1
            col = 1
        else:
            col += 1
