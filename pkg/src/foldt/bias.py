"""The refinement operator and numeric discretization.

``refinements`` maps a node's associated query to the ordered list of
candidate extensions allowed by the rmode declarations: input-moded template
arguments range over the type-compatible variables already in the query,
output-moded arguments get fresh variables, and ``+-`` arguments take both
options.  Distinct formals always map to distinct variables (write the same
formal twice to force sharing).  Every candidate extends the query by the
instantiated template, so each one is theta-subsumed by its parent query.

Fresh variables are named ``A``, ``B``, ... starting from the context's
``name_base`` (the number of variable names consumed along the path from the
root).  Carrying the base in the node state keeps names deterministic, makes
the two induction engines produce byte-identical trees, and guarantees that a
name introduced by a node's conjunction can never reappear in that node's
right subtree.

Numeric thresholds come from ``discretize(Query, Var)`` declarations: the
query runs in every example, the collected values are labelled with their
example's class, and cut points are chosen by recursive entropy minimization
with the minimum-description-length stopping rule, capped at
``max_thresholds`` (highest-gain cuts kept first).  A template containing the
placeholder ``threshold(K)`` expands to one candidate per cut point of the
K-th declaration.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

from .engine import DEFAULT_BUDGET, Query, answer_all, register_predicates
from .errors import DataError
from .settings import THRESHOLD_FUNCTOR, DiscretizeRequest, Settings
from .terms import (
    Compound,
    Literal,
    Number,
    Term,
    Variable,
    literal_variables,
    render_literal,
)

_LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


def fresh_name(i: int) -> str:
    return _LETTERS[i % 26] + (str(i // 26) if i >= 26 else "")


@dataclass
class Thresholds:
    request: DiscretizeRequest
    cuts: tuple[float, ...]


@dataclass
class Bias:
    """Settings plus the computed cut lists, ready for refinement generation."""

    settings: Settings
    cuts: dict[int, tuple[float, ...]]  # 1-based discretize index -> cut points


@dataclass
class RefinementContext:
    query: Query
    usage: tuple[int, ...]  # per-rmode occurrence counts along the path
    name_base: int


@dataclass
class Candidate:
    query: Query  # the full refined query
    added: tuple[Literal, ...]  # conjunction appended to the associated query
    rmode_index: int


def root_context(settings: Settings) -> RefinementContext:
    return RefinementContext(Query(()), (0,) * len(settings.rmodes), 0)


def static_bias(settings: Settings) -> Bias:
    """Bias with no computed thresholds (templates without placeholders)."""
    return Bias(settings, {k: () for k in range(1, len(settings.discretize) + 1)})


def declared_predicate_keys(settings: Settings) -> set[tuple[str, int]]:
    """Predicate/arity pairs appearing in bias declarations; registering them
    keeps the engine's unknown-predicate warning quiet for examples that
    merely lack them."""
    keys: set[tuple[str, int]] = set()
    groups = [rm.template for rm in settings.rmodes]
    groups += [la.trigger for la in settings.lookaheads]
    groups += [la.extension for la in settings.lookaheads]
    groups += [dr.query for dr in settings.discretize]
    for literals in groups:
        keys.update(l.key for l in literals if not l.builtin)
    return keys


def prepare_bias(settings, data, background=None, budget: int = DEFAULT_BUDGET) -> Bias:
    register_predicates(declared_predicate_keys(settings))
    cuts = {}
    for k, request in enumerate(settings.discretize, 1):
        th = discretize(
            request,
            data,
            background,
            max_thresholds=settings.params.max_thresholds,
            budget=budget,
        )
        cuts[k] = th.cuts
    return Bias(settings, cuts)


def infer_var_types(query: Query, settings: Settings) -> dict[str, str | None]:
    """A variable's type is the declared type of the argument position where
    it first occurred; undeclared positions give the universal type (None)."""
    types: dict[str, str | None] = {}
    for lit in query.literals:
        decl = None if lit.builtin else settings.types.get(lit.key)
        for pos, arg in enumerate(lit.args):
            if isinstance(arg, Variable):
                if arg.name not in types:
                    types[arg.name] = decl[pos] if decl else None
            elif isinstance(arg, Compound):
                for v in literal_variables([Literal("", arg.args)]):
                    types.setdefault(v, None)
    return types


def _type_ok(var_type, formal_type) -> bool:
    return var_type is None or formal_type is None or var_type == formal_type


def _formal_specs(rmode, settings) -> list[tuple[str, str, str | None]]:
    """(name, mode, type) per formal, in first-occurrence order."""
    specs = []
    seen = set()
    for lit in rmode.template:
        decl = None if lit.builtin else settings.types.get(lit.key)
        for pos, arg in enumerate(lit.args):
            for name in _arg_variables(arg):
                if name not in seen:
                    seen.add(name)
                    ftype = decl[pos] if decl and isinstance(arg, Variable) else None
                    specs.append((name, rmode.modes[name], ftype))
    return specs


def _arg_variables(t: Term):
    if isinstance(t, Variable):
        yield t.name
    elif isinstance(t, Compound):
        for a in t.args:
            yield from _arg_variables(a)


_FRESH = object()


def _assignments(formals, qvars, vtypes):
    """Enumerate injective formal->actual assignments in deterministic order:
    existing variables in query order, then a fresh variable for +- modes."""
    out = []

    def go(i, used, acc):
        if i == len(formals):
            out.append(dict(acc))
            return
        name, mode, ftype = formals[i]
        if mode in ("+", "+-"):
            for v in qvars:
                if v in used or not _type_ok(vtypes.get(v), ftype):
                    continue
                acc.append((name, v))
                go(i + 1, used | {v}, acc)
                acc.pop()
        if mode in ("-", "+-"):
            acc.append((name, _FRESH))
            go(i + 1, used, acc)
            acc.pop()

    go(0, frozenset(), [])
    return out


def _instantiate(template, assignment, name_base):
    """Apply a formal->actual assignment, numbering fresh variables from
    ``name_base`` in formal order; returns (literals, fresh_count)."""
    names = {}
    fresh = 0
    for formal, actual in assignment.items():
        if actual is _FRESH:
            names[formal] = fresh_name(name_base + fresh)
            fresh += 1
        else:
            names[formal] = actual

    def walk(t: Term) -> Term:
        if isinstance(t, Variable):
            return Variable(names[t.name])
        if isinstance(t, Compound):
            return Compound(t.functor, tuple(walk(a) for a in t.args))
        return t

    lits = tuple(
        Literal(l.pred, tuple(walk(a) for a in l.args), l.builtin) for l in template
    )
    return lits, fresh


def _threshold_slots(literals):
    """Indices (by walk order) of threshold placeholders, as their K values."""
    ks = []

    def walk(t):
        if isinstance(t, Compound):
            if t.functor == THRESHOLD_FUNCTOR and len(t.args) == 1 and isinstance(t.args[0], Number):
                ks.append(t.args[0].value)
            else:
                for a in t.args:
                    walk(a)

    for lit in literals:
        for a in lit.args:
            walk(a)
    return ks


def _expand_thresholds(literals, bias: Bias):
    ks = _threshold_slots(literals)
    if not ks:
        return [literals]
    pools = [bias.cuts.get(k, ()) for k in ks]
    expanded = []
    for combo in itertools.product(*pools):
        it = iter(combo)

        def walk(t):
            if isinstance(t, Compound):
                if t.functor == THRESHOLD_FUNCTOR and len(t.args) == 1 and isinstance(t.args[0], Number):
                    return Number(next(it))
                return Compound(t.functor, tuple(walk(a) for a in t.args))
            return t

        expanded.append(
            tuple(Literal(l.pred, tuple(walk(a) for a in l.args), l.builtin) for l in literals)
        )
    return expanded


def _canonical_key(added, qvars_set):
    """Added conjunction with its new variables renamed N0, N1, ... by first
    occurrence; used to drop duplicates up to variable renaming."""
    names = {}

    def walk(t):
        if isinstance(t, Variable):
            if t.name in qvars_set:
                return t
            if t.name not in names:
                names[t.name] = Variable(f"N{len(names)}")
            return names[t.name]
        if isinstance(t, Compound):
            return Compound(t.functor, tuple(walk(a) for a in t.args))
        return t

    return tuple(
        render_literal(Literal(l.pred, tuple(walk(a) for a in l.args), l.builtin))
        for l in added
    )


def _match_args(pargs, targs, sigma):
    for p, t in zip(pargs, targs):
        if isinstance(p, Variable):
            bound = sigma.get(p.name)
            if bound is None:
                sigma = dict(sigma)
                sigma[p.name] = t
            elif bound != t:
                return None
        elif isinstance(p, Compound):
            if not (
                isinstance(t, Compound)
                and t.functor == p.functor
                and len(t.args) == len(p.args)
            ):
                return None
            sigma = _match_args(p.args, t.args, sigma)
            if sigma is None:
                return None
        elif p != t:
            return None
    return sigma


def _match_conj(patterns, targets):
    """All substitutions placing every pattern literal onto some target
    literal (one-way matching; deterministic order; duplicates removed)."""
    sigmas = []

    def go(i, sigma):
        if i == len(patterns):
            if sigma not in sigmas:
                sigmas.append(sigma)
            return
        lit = patterns[i]
        for t in targets:
            if t.pred != lit.pred or len(t.args) != len(lit.args) or t.builtin != lit.builtin:
                continue
            s2 = _match_args(lit.args, t.args, sigma)
            if s2 is not None:
                go(i + 1, s2)

    go(0, {})
    return sigmas


def apply_lookahead(candidate: Query, added, bias: Bias) -> list[Query]:
    """The candidate extended by each lookahead whose trigger matches the
    added conjunction (one level only; extensions never re-trigger).
    Extension-only variables get fresh names after the candidate's own."""
    return [
        Query(candidate.literals + ext)
        for ext in lookahead_extensions(added, bias, len(candidate.variables()), 0)
    ]


def lookahead_extensions(added, bias: Bias, name_base: int, fresh_used: int):
    """Extension conjunctions triggered by an added conjunction, one list per
    matching lookahead declaration/substitution (one level, no chaining)."""
    extensions = []
    for la in bias.settings.lookaheads:
        for sigma in _match_conj(la.trigger, added):
            names = dict(sigma)
            fresh = fresh_used

            def walk(t):
                nonlocal fresh
                if isinstance(t, Variable):
                    bound = names.get(t.name)
                    if bound is None:
                        bound = Variable(fresh_name(name_base + fresh))
                        fresh += 1
                        names[t.name] = bound
                    return bound
                if isinstance(t, Compound):
                    return Compound(t.functor, tuple(walk(a) for a in t.args))
                return t

            extensions.append(
                tuple(
                    Literal(l.pred, tuple(walk(a) for a in l.args), l.builtin)
                    for l in la.extension
                )
            )
    return extensions


def refinements(ctx: RefinementContext, bias: Bias) -> list[Candidate]:
    """All candidate queries derivable from the associated query, in
    deterministic order: rmode declaration order, then instantiation
    enumeration order, with lookahead extensions right after their trigger
    candidate.  Duplicates up to renaming of the new variables are removed."""
    settings = bias.settings
    out: list[Candidate] = []
    seen: set = set()
    qvars = ctx.query.variables()
    qvars_set = set(qvars)
    vtypes = infer_var_types(ctx.query, settings)

    def emit(added, ri):
        key = _canonical_key(added, qvars_set)
        if key in seen:
            return False
        seen.add(key)
        out.append(Candidate(Query(ctx.query.literals + added), added, ri))
        return True

    for ri, rm in enumerate(settings.rmodes):
        if ctx.usage[ri] >= rm.count:
            continue
        formals = _formal_specs(rm, settings)
        for assignment in _assignments(formals, qvars, vtypes):
            base_added, fresh_used = _instantiate(rm.template, assignment, ctx.name_base)
            for added in _expand_thresholds(base_added, bias):
                emit(added, ri)
                for ext in lookahead_extensions(added, bias, ctx.name_base, fresh_used):
                    emit(added + ext, ri)
    return out


# ---------------------------------------------------------------------------
# Discretization (entropy minimization with the MDL stopping rule)


def _entropy(counts) -> float:
    total = sum(counts)
    if total == 0:
        return 0.0
    h = 0.0
    for c in counts:
        if c:
            p = c / total
            h -= p * math.log2(p)
    return h


def _classes_present(counts) -> int:
    return sum(1 for c in counts if c)


def fayyad_irani_cuts(values, max_cuts: int) -> list[float]:
    """Cut points for a multiset of ``(value, label)`` pairs.

    Candidate cuts are midpoints between adjacent distinct values.  Each
    interval's best cut (minimum weighted class entropy, leftmost on ties) is
    kept when its gain clears the MDL criterion; accepted intervals recurse.
    When ``max_cuts`` binds, the highest-gain cuts are kept.
    """
    if max_cuts <= 0:
        return []
    labels = sorted({lbl for _, lbl in values})
    lidx = {l: i for i, l in enumerate(labels)}
    agg: dict[float, list[int]] = {}
    for v, lbl in values:
        agg.setdefault(v, [0] * len(labels))[lidx[lbl]] += 1
    pts = sorted(agg.items())
    k = len(pts)
    nclasses = len(labels)
    prefix = [[0] * nclasses]
    for _, counts in pts:
        prefix.append([a + b for a, b in zip(prefix[-1], counts)])

    def seg(lo, hi):
        return [prefix[hi][c] - prefix[lo][c] for c in range(nclasses)]

    def best_split(lo, hi):
        """(gain, boundary, accepted) for the interval of point indices
        [lo, hi); boundary b cuts between pts[b-1] and pts[b]."""
        parent = seg(lo, hi)
        n = sum(parent)
        ent = _entropy(parent)
        best = None
        for b in range(lo + 1, hi):
            left = seg(lo, b)
            right = seg(b, hi)
            nl = sum(left)
            w = (nl / n) * _entropy(left) + ((n - nl) / n) * _entropy(right)
            if best is None or w < best[0] - 1e-12:
                best = (w, b, left, right)
        if best is None:
            return None
        w, b, left, right = best
        gain = ent - w
        kc = _classes_present(parent)
        delta = math.log2(3**kc - 2) - (
            kc * ent - _classes_present(left) * _entropy(left) - _classes_present(right) * _entropy(right)
        )
        accepted = gain > (math.log2(n - 1) + delta) / n
        return gain, b, accepted

    heap: list[tuple[float, int, int, int]] = []

    def push(lo, hi):
        if hi - lo < 2:
            return
        found = best_split(lo, hi)
        if found and found[2]:
            heapq.heappush(heap, (-found[0], lo, hi, found[1]))

    push(0, k)
    cuts: list[float] = []
    while heap and len(cuts) < max_cuts:
        _, lo, hi, b = heapq.heappop(heap)
        cuts.append((pts[b - 1][0] + pts[b][0]) / 2)
        push(lo, b)
        push(b, hi)
    return sorted(cuts)


def discretize(
    request: DiscretizeRequest,
    data,
    background=None,
    max_thresholds: int = 8,
    budget: int = DEFAULT_BUDGET,
) -> Thresholds:
    """Pool the variable's bindings over all examples (labelled with each
    example's class) and derive cut points."""
    query = Query(request.query)
    values: list[tuple[float, str]] = []
    for _, interp in data.stream_examples():
        for t in answer_all(query, request.var, interp, background, budget):
            if not isinstance(t, Number):
                raise DataError(
                    f"discretize({query}, {request.var}) collected a non-numeric value: "
                    f"{render_literal(Literal('v', (t,)))}"
                )
            values.append((float(t.value), interp.label))
    if max_thresholds <= 0:
        return Thresholds(request, ())
    if not values:
        raise DataError(f"discretize({query}, {request.var}) collected no values")
    return Thresholds(request, tuple(fayyad_irani_cuts(values, max_thresholds)))
