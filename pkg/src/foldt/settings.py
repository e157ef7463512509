"""Settings files: class declarations, refinement-operator bias, and learner
parameters.

A settings file is a sequence of directives:

    classes([pos,neg]).
    typed(card(rank,suit)).
    rmode(5: inside(+V,+-W)).
    rmode(1: (card(-R,-S1), card(R,-S2), S1 \\= S2)).
    lookahead(triangle(T), points(T,up)).
    discretize(atom(_,_,_,C), C).
    minleaf(2).  heuristic(gainratio).  algorithm(lds).  granularity(10).

Mode markers (``+`` input, ``-`` output, ``+-`` either) annotate a template
variable at its first occurrence only; later occurrences are written bare.
Multi-literal conjunction arguments must be parenthesized.  The reserved
template term ``threshold(K)`` expands, at refinement time, to one candidate
per cut point of the K-th ``discretize`` declaration (1-based).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import ParseError
from .terms import (
    BUILTIN_PREDS,
    Atom,
    Compound,
    Literal,
    Number,
    TermParser,
    TokenStream,
    Variable,
    literal_variables,
    render_atom,
    render_term,
    term_to_literal,
    tokenize,
)

HEURISTICS = ("gainratio", "gain", "weighted_entropy")
ALGORITHMS = ("classic", "lds")

THRESHOLD_FUNCTOR = "threshold"


@dataclass
class RMode:
    """One refinement template with its per-path occurrence cap."""

    count: int
    template: tuple[Literal, ...]
    modes: dict[str, str]  # formal variable -> '+', '-' or '+-'

    def formals(self) -> list[str]:
        return literal_variables(self.template)


@dataclass
class Lookahead:
    trigger: tuple[Literal, ...]
    extension: tuple[Literal, ...]


@dataclass
class DiscretizeRequest:
    query: tuple[Literal, ...]
    var: str


@dataclass
class LearnerParams:
    minleaf: int = 2
    heuristic: str = "gainratio"
    algorithm: str = "lds"
    granularity: int = 10
    gain_epsilon: float = 1e-9
    resolution_budget: int = 100_000
    max_depth: int | None = None
    max_thresholds: int = 8


@dataclass
class Settings:
    classes: tuple[str, ...]
    rmodes: tuple[RMode, ...] = ()
    lookaheads: tuple[Lookahead, ...] = ()
    types: dict[tuple[str, int], tuple[str, ...]] = field(default_factory=dict)
    discretize: tuple[DiscretizeRequest, ...] = ()
    params: LearnerParams = field(default_factory=LearnerParams)

    def class_index(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.classes)}


class _SettingsParser:
    def __init__(self, text: str):
        self.s = TokenStream(tokenize(text))
        self.tp = TermParser(self.s)
        self.classes: list[str] | None = None
        self.rmodes: list[RMode] = []
        self.lookaheads: list[Lookahead] = []
        self.types: dict[tuple[str, int], tuple[str, ...]] = {}
        self.discretize: list[DiscretizeRequest] = []
        self.params = LearnerParams()

    def run(self) -> Settings:
        while not self.s.at("eof"):
            tok = self.s.peek()
            if tok.kind != "atom":
                raise ParseError("expected a directive", tok.line, tok.col)
            self.s.next()
            self.s.expect("punct", "(")
            if tok.value in _DIRECTIVES:
                getattr(self, f"_d_{tok.value}")(tok)
            elif tok.value in _PARAM_TYPES:
                self._d_param(tok.value, tok)
            else:
                raise ParseError(f"unknown directive {tok.value!r}", tok.line, tok.col)
            self.s.expect("punct", ")")
            self.s.expect("punct", ".")
        return self._finish()

    # -- individual directives ------------------------------------------

    def _d_classes(self, tok):
        self.s.expect("punct", "[")
        labels: list[str] = []
        if self.s.at("punct", "]"):
            raise ParseError("class list empty", tok.line, tok.col)
        while True:
            t = self.s.peek()
            if t.kind != "atom":
                raise ParseError("class labels must be atoms", t.line, t.col)
            self.s.next()
            if t.value in labels:
                raise ParseError(f"duplicate class label {t.value!r}", t.line, t.col)
            labels.append(t.value)
            if self.s.at("punct", ","):
                self.s.next()
                continue
            break
        self.s.expect("punct", "]")
        if self.classes is not None:
            raise ParseError("classes declared twice", tok.line, tok.col)
        self.classes = labels

    def _d_rmode(self, tok):
        cnt = self.s.peek()
        if cnt.kind != "int" or cnt.value < 1:
            raise ParseError("rmode count must be a positive integer", cnt.line, cnt.col)
        self.s.next()
        self.s.expect("punct", ":")
        modes: dict[str, str] = {}
        template = self._conjunction(modes=modes)
        _check_builtin_safety(template, {v for v, m in modes.items() if m == "+"}, tok)
        self.rmodes.append(RMode(cnt.value, template, modes))

    def _d_lookahead(self, tok):
        trigger = self._conjunction(modes=None)
        self.s.expect("punct", ",")
        extension = self._conjunction(modes=None)
        _check_builtin_safety(extension, set(literal_variables(trigger)), tok)
        self.lookaheads.append(Lookahead(trigger, extension))

    def _d_typed(self, tok):
        t = self.tp.term()
        if not isinstance(t, Compound) or not all(isinstance(a, Atom) for a in t.args):
            raise ParseError("typed/1 expects pred(type1,...,typeN)", tok.line, tok.col)
        key = (t.functor, len(t.args))
        if key in self.types:
            raise ParseError(f"duplicate type declaration for {t.functor}/{len(t.args)}", tok.line, tok.col)
        self.types[key] = tuple(a.name for a in t.args)

    def _d_discretize(self, tok):
        query = self._conjunction(modes=None)
        self.s.expect("punct", ",")
        v = self.s.peek()
        if v.kind != "var":
            raise ParseError("discretize/2 expects a variable as second argument", v.line, v.col)
        self.s.next()
        if v.value not in literal_variables(query):
            raise ParseError(f"variable {v.value} does not occur in the discretize query", v.line, v.col)
        self.discretize.append(DiscretizeRequest(query, v.value))

    def _d_param(self, name, tok):
        t = self.s.next()
        kind = _PARAM_TYPES[name]
        if kind == "int":
            if t.kind != "int":
                raise ParseError(f"{name}/1 expects an integer", t.line, t.col)
            value = t.value
        elif kind == "number":
            if t.kind not in ("int", "float"):
                raise ParseError(f"{name}/1 expects a number", t.line, t.col)
            value = float(t.value)
        else:
            if t.kind != "atom":
                raise ParseError(f"{name}/1 expects an atom", t.line, t.col)
            value = t.value
        _apply_param(self.params, name, value, t)

    # -- template machinery ----------------------------------------------

    def _conjunction(self, modes: dict[str, str] | None) -> tuple[Literal, ...]:
        """One literal, or a parenthesized comma-list of literals."""
        if self.s.at("punct", "("):
            self.s.next()
            lits = [self._literal(modes)]
            while self.s.at("punct", ","):
                self.s.next()
                lits.append(self._literal(modes))
            self.s.expect("punct", ")")
            return tuple(lits)
        return (self._literal(modes),)

    def _literal(self, modes) -> Literal:
        tok = self.s.peek()
        lhs = self._term(modes)
        nxt = self.s.peek()
        if nxt.kind == "op" and nxt.text in BUILTIN_PREDS:
            self.s.next()
            rhs = self._term(modes)
            return Literal(nxt.text, (lhs, rhs), builtin=True)
        return term_to_literal(lhs, line=tok.line, col=tok.col)

    def _term(self, modes):
        tok = self.s.peek()
        if tok.kind == "punct" and tok.text in "+-":
            marker = tok.text
            self.s.next()
            if marker == "+" and self.s.at("punct", "-"):
                self.s.next()
                marker = "+-"
            v = self.s.peek()
            if v.kind != "var":
                raise ParseError("mode marker must precede a variable", v.line, v.col)
            self.s.next()
            if modes is None:
                raise ParseError("mode markers are not allowed in this template", v.line, v.col)
            if v.value in modes:
                raise ParseError(
                    f"variable {v.value} already carries a mode marker", v.line, v.col
                )
            modes[v.value] = marker
            return Variable(v.value)
        if tok.kind == "var":
            self.s.next()
            if tok.value == "_":
                self.tp._anon += 1
                name = f"_{self.tp._anon}"
                if modes is not None:
                    modes[name] = "-"  # each anonymous slot is a fresh output
                return Variable(name)
            if modes is not None and tok.value not in modes:
                raise ParseError(
                    f"variable {tok.value} needs a mode marker at its first occurrence",
                    tok.line,
                    tok.col,
                )
            return Variable(tok.value)
        if tok.kind in ("int", "float"):
            self.s.next()
            return Number(tok.value)
        if tok.kind == "atom":
            self.s.next()
            if self.s.at("punct", "("):
                self.s.next()
                args = [self._term(modes)]
                while self.s.at("punct", ","):
                    self.s.next()
                    args.append(self._term(modes))
                self.s.expect("punct", ")")
                return Compound(tok.value, tuple(args))
            return Atom(tok.value)
        raise ParseError(f"expected a term, found {tok.text or tok.kind!r}", tok.line, tok.col)

    # -- finalization ------------------------------------------------------

    def _finish(self) -> Settings:
        if not self.classes:
            raise ParseError("settings must declare classes([...])")
        st = Settings(
            classes=tuple(self.classes),
            rmodes=tuple(self.rmodes),
            lookaheads=tuple(self.lookaheads),
            types=self.types,
            discretize=tuple(self.discretize),
            params=self.params,
        )
        for rm in st.rmodes:
            for k in _threshold_indices(rm.template):
                if not 1 <= k <= len(st.discretize):
                    raise ParseError(
                        f"threshold({k}) does not match any discretize declaration"
                    )
        return st


_DIRECTIVES = frozenset({"classes", "rmode", "lookahead", "typed", "discretize"})

_PARAM_TYPES = {
    "minleaf": "int",
    "granularity": "int",
    "max_depth": "int",
    "resolution_budget": "int",
    "max_thresholds": "int",
    "gain_epsilon": "number",
    "heuristic": "atom",
    "algorithm": "atom",
}


def _apply_param(params: LearnerParams, name: str, value, tok):
    if name == "heuristic":
        value = value.replace("-", "_")
        if value not in HEURISTICS:
            raise ParseError(f"unknown heuristic {value!r}", tok.line, tok.col)
    elif name == "algorithm":
        if value not in ALGORITHMS:
            raise ParseError(f"unknown algorithm {value!r}", tok.line, tok.col)
    elif name == "gain_epsilon":
        if value <= 0:
            raise ParseError("gain_epsilon must be positive", tok.line, tok.col)
    elif name in ("minleaf", "granularity", "resolution_budget"):
        if value < 1:
            raise ParseError(f"{name} must be at least 1", tok.line, tok.col)
    elif name in ("max_depth", "max_thresholds"):
        if value < 0:
            raise ParseError(f"{name} must be nonnegative", tok.line, tok.col)
    setattr(params, name, value)


def _check_builtin_safety(literals, input_vars: set[str], tok):
    """Builtins must only see variables bound by earlier non-builtin literals
    or by the query (input mode)."""
    bound = set(input_vars)
    for lit in literals:
        if lit.builtin:
            for v in literal_variables([lit]):
                if v not in bound:
                    raise ParseError(
                        f"builtin {lit.pred!r} would see unbound variable {v}",
                        tok.line,
                        tok.col,
                    )
        else:
            bound.update(literal_variables([lit]))


def _threshold_indices(literals) -> list[int]:
    found: list[int] = []

    def walk(t):
        if isinstance(t, Compound):
            if t.functor == THRESHOLD_FUNCTOR and len(t.args) == 1:
                arg = t.args[0]
                if not (isinstance(arg, Number) and isinstance(arg.value, int)):
                    raise ParseError("threshold placeholder expects an integer index")
                found.append(arg.value)
            else:
                for a in t.args:
                    walk(a)

    for lit in literals:
        for a in lit.args:
            walk(a)
    return found


def parse_settings(text: str) -> Settings:
    return _SettingsParser(text).run()


# ---------------------------------------------------------------------------
# Canonical rendering (used for the bias snapshot embedded in model files)


def _render_template_term(t, modes: dict[str, str], seen: set[str]) -> str:
    if isinstance(t, Variable):
        if t.name in modes and t.name not in seen:
            seen.add(t.name)
            return modes[t.name] + t.name
        return t.name
    if isinstance(t, Compound):
        return (
            render_atom(t.functor)
            + "("
            + ",".join(_render_template_term(a, modes, seen) for a in t.args)
            + ")"
        )
    return render_term(t)


def _render_template_literal(lit: Literal, modes, seen) -> str:
    if lit.builtin:
        a = _render_template_term(lit.args[0], modes, seen)
        b = _render_template_term(lit.args[1], modes, seen)
        return f"{a} {lit.pred} {b}"
    if not lit.args:
        return render_atom(lit.pred)
    return (
        render_atom(lit.pred)
        + "("
        + ",".join(_render_template_term(a, modes, seen) for a in lit.args)
        + ")"
    )


def _render_conj(literals, modes=None, seen=None) -> str:
    modes = modes or {}
    seen = set() if seen is None else seen
    parts = [_render_template_literal(l, modes, seen) for l in literals]
    inner = ", ".join(parts)
    return f"({inner})" if len(parts) > 1 else inner


def render_settings(s: Settings) -> str:
    lines = ["classes([" + ",".join(render_atom(c) for c in s.classes) + "])."]
    for (pred, _arity), types in s.types.items():
        lines.append(f"typed({render_atom(pred)}({','.join(render_atom(t) for t in types)})).")
    for rm in s.rmodes:
        lines.append(f"rmode({rm.count}: {_render_conj(rm.template, rm.modes)}).")
    for la in s.lookaheads:
        lines.append(f"lookahead({_render_conj(la.trigger)}, {_render_conj(la.extension)}).")
    for dr in s.discretize:
        lines.append(f"discretize({_render_conj(dr.query)}, {dr.var}).")
    p = s.params
    lines.append(f"minleaf({p.minleaf}).")
    lines.append(f"heuristic({p.heuristic}).")
    lines.append(f"algorithm({p.algorithm}).")
    lines.append(f"granularity({p.granularity}).")
    lines.append(f"gain_epsilon({p.gain_epsilon!r}).")
    lines.append(f"resolution_budget({p.resolution_budget}).")
    if p.max_depth is not None:
        lines.append(f"max_depth({p.max_depth}).")
    lines.append(f"max_thresholds({p.max_thresholds}).")
    return "\n".join(lines) + "\n"


def settings_with(s: Settings, **param_overrides) -> Settings:
    """Copy of ``s`` with some learner parameters replaced."""
    return replace(s, params=replace(s.params, **param_overrides))
