"""First-order logical decision trees: structure, classification, decision
lists, and the model file format.

A tree is binary: internal nodes carry a conjunction of literals, leaves a
class label with the training class distribution.  A node's test is evaluated
as ``Q and conj`` where ``Q`` is the node's associated query (the conjunction
of left-taken ancestors' conjunctions); success extends ``Q`` and descends
left, failure descends right with ``Q`` unchanged.  Exported as a decision
list, each leaf becomes one guarded clause ending in a cut, except the final
catch-all clause, and first-matching-clause evaluation agrees with tree
classification.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

from .engine import DEFAULT_BUDGET, Background, Query, succeeds
from .errors import ModelFormatError
from .settings import Settings, parse_settings
from .store import Interpretation
from .terms import Literal, literal_variables, parse_program, render_conjunction

FORMAT_HEADER = "foldt-model v1"


@dataclass(frozen=True)
class Leaf:
    label: str
    counts: tuple[int, ...]  # aligned with the model's class list


@dataclass(frozen=True)
class INode:
    conj: tuple[Literal, ...]
    assoc_query: Query  # associated query of this node, recorded at build time
    left: "FOLDT"
    right: "FOLDT"


FOLDT = Union[Leaf, INode]


@dataclass(frozen=True)
class Model:
    tree: FOLDT
    classes: tuple[str, ...]
    bias_text: str  # settings snapshot; classification reproduces training's environment
    metadata: dict

    def settings(self) -> Settings:
        return parse_settings(self.bias_text)


def tree_depth(tree: FOLDT) -> int:
    """Number of nodes on the longest root-to-leaf path (a lone leaf is 1)."""
    if isinstance(tree, Leaf):
        return 1
    return 1 + max(tree_depth(tree.left), tree_depth(tree.right))


def count_nodes(tree: FOLDT) -> tuple[int, int]:
    """(internal nodes, leaves)."""
    if isinstance(tree, Leaf):
        return 0, 1
    il, ll = count_nodes(tree.left)
    ir, lr = count_nodes(tree.right)
    return il + ir + 1, ll + lr


def classify(
    model: Model,
    interp: Interpretation,
    background: Background | None = None,
    budget: int = DEFAULT_BUDGET,
) -> str:
    node = model.tree
    q_lits: tuple[Literal, ...] = ()
    while isinstance(node, INode):
        if succeeds(Query(q_lits + node.conj), interp, background, budget):
            q_lits = q_lits + node.conj
            node = node.left
        else:
            node = node.right
    return node.label


@dataclass(frozen=True)
class DecisionRule:
    label: str
    guard: tuple[Literal, ...]
    cut: bool


def to_decision_list(model: Model) -> list[DecisionRule]:
    """Depth-first, left-before-right: one clause per leaf, guarded by the
    leaf's associated query.  The final clause is guard-free and carries no
    cut (the rightmost path never extends the associated query)."""
    rules: list[DecisionRule] = []

    def walk(node: FOLDT, q_lits: tuple[Literal, ...]):
        if isinstance(node, Leaf):
            rules.append(DecisionRule(node.label, q_lits, True))
            return
        walk(node.left, q_lits + node.conj)
        walk(node.right, q_lits)

    walk(model.tree, ())
    last = rules[-1]
    if not last.guard:
        rules[-1] = DecisionRule(last.label, (), False)
    return rules


def render_decision_list(rules: list[DecisionRule]) -> str:
    lines = []
    for r in rules:
        head = f"class({r.label})"
        parts = [render_conjunction(r.guard)] if r.guard else []
        if r.cut:
            parts.append("!")
        if parts:
            lines.append(f"{head} :- {', '.join(parts)}.")
        else:
            lines.append(f"{head}.")
    return "\n".join(lines) + "\n"


def eval_decision_list(
    rules: list[DecisionRule],
    interp: Interpretation,
    background: Background | None = None,
    budget: int = DEFAULT_BUDGET,
) -> str:
    """First-matching-clause semantics (what the cuts encode)."""
    for r in rules:
        if not r.guard or succeeds(Query(r.guard), interp, background, budget):
            return r.label
    raise ModelFormatError("decision list has no applicable clause")


def check_scope(model: Model) -> bool:
    """True iff no variable introduced by a node's conjunction occurs anywhere
    in that node's right subtree."""

    def subtree_vars(node: FOLDT) -> set[str]:
        if isinstance(node, Leaf):
            return set()
        return (
            set(literal_variables(node.conj))
            | subtree_vars(node.left)
            | subtree_vars(node.right)
        )

    def walk(node: FOLDT, scope: set[str]) -> bool:
        if isinstance(node, Leaf):
            return True
        introduced = set(literal_variables(node.conj)) - scope
        if introduced & subtree_vars(node.right):
            return False
        return walk(node.left, scope | introduced) and walk(node.right, scope)

    return walk(model.tree, set())


def recompute_assoc_queries(tree: FOLDT, q_lits: tuple[Literal, ...] = ()) -> FOLDT:
    """Rebuild a tree whose stored associated queries are derived purely from
    the structure (used on deserialization and for coherence checks)."""
    if isinstance(tree, Leaf):
        return tree
    return INode(
        tree.conj,
        Query(q_lits),
        recompute_assoc_queries(tree.left, q_lits + tree.conj),
        recompute_assoc_queries(tree.right, q_lits),
    )


def assoc_queries_coherent(model: Model) -> bool:
    return recompute_assoc_queries(model.tree) == model.tree


def trees_equal(a: FOLDT, b: FOLDT, include_counts: bool = True) -> bool:
    """Structural equality; with ``include_counts=False`` leaf distributions
    are ignored (replication scales them without changing the tree)."""
    if isinstance(a, Leaf) and isinstance(b, Leaf):
        return a.label == b.label and (not include_counts or a.counts == b.counts)
    if isinstance(a, INode) and isinstance(b, INode):
        return (
            a.conj == b.conj
            and trees_equal(a.left, b.left, include_counts)
            and trees_equal(a.right, b.right, include_counts)
        )
    return False


# ---------------------------------------------------------------------------
# Serialization


def _tree_lines(tree: FOLDT, depth: int, out: list[str]):
    if isinstance(tree, Leaf):
        payload = json.dumps(
            {"label": tree.label, "counts": list(tree.counts)},
            separators=(",", ":"),
            sort_keys=True,
        )
        out.append(f"leaf {depth} {payload}")
    else:
        out.append(f"inode {depth} {render_conjunction(tree.conj)}")
        _tree_lines(tree.left, depth + 1, out)
        _tree_lines(tree.right, depth + 1, out)


def serialize(model: Model) -> str:
    meta_line = json.dumps(model.metadata, separators=(",", ":"), sort_keys=True)
    bias_lines = model.bias_text.rstrip("\n").split("\n")
    tree_lines: list[str] = []
    _tree_lines(model.tree, 0, tree_lines)
    dlist_lines = render_decision_list(to_decision_list(model)).rstrip("\n").split("\n")
    parts = [FORMAT_HEADER]
    for name, lines in (
        ("meta", [meta_line]),
        ("bias", bias_lines),
        ("tree", tree_lines),
        ("dlist", dlist_lines),
    ):
        parts.append(f"section {name} {len(lines)}")
        parts.extend(lines)
    return "\n".join(parts) + "\n"


def _parse_conj(text: str) -> tuple[Literal, ...]:
    return parse_program(f"x :- {text}.")[0].body


def _read_tree(lines: list[str], pos: int, depth: int, classes) -> tuple[FOLDT, int]:
    if pos >= len(lines):
        raise ModelFormatError("tree section truncated")
    parts = lines[pos].split(" ", 2)
    if len(parts) != 3 or parts[0] not in ("inode", "leaf"):
        raise ModelFormatError(f"malformed tree line: {lines[pos]!r}")
    if int(parts[1]) != depth:
        raise ModelFormatError(f"tree line at wrong depth: {lines[pos]!r}")
    if parts[0] == "leaf":
        try:
            payload = json.loads(parts[2])
            leaf = Leaf(payload["label"], tuple(int(c) for c in payload["counts"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise ModelFormatError(f"malformed leaf line: {lines[pos]!r}") from e
        if leaf.label not in classes or len(leaf.counts) != len(classes):
            raise ModelFormatError(f"leaf inconsistent with class list: {lines[pos]!r}")
        return leaf, pos + 1
    conj = _parse_conj(parts[2])
    left, pos = _read_tree(lines, pos + 1, depth + 1, classes)
    right, pos = _read_tree(lines, pos, depth + 1, classes)
    return INode(conj, Query(()), left, right), pos


def deserialize(text: str) -> Model:
    lines = text.rstrip("\n").split("\n")
    if not lines or lines[0] != FORMAT_HEADER:
        if lines and lines[0].startswith("foldt-model"):
            raise ModelFormatError(f"unsupported model version: {lines[0]!r}")
        raise ModelFormatError("not a model file")
    sections: dict[str, list[str]] = {}
    i = 1
    for name in ("meta", "bias", "tree", "dlist"):
        if i >= len(lines):
            raise ModelFormatError(f"missing section {name!r}")
        parts = lines[i].split()
        if len(parts) != 3 or parts[0] != "section" or parts[1] != name:
            raise ModelFormatError(f"expected section {name!r}, found {lines[i]!r}")
        n = int(parts[2])
        if i + 1 + n > len(lines):
            raise ModelFormatError(f"section {name!r} truncated")
        sections[name] = lines[i + 1 : i + 1 + n]
        i += 1 + n
    if i != len(lines):
        raise ModelFormatError("trailing content after the last section")
    try:
        metadata = json.loads(sections["meta"][0])
    except (IndexError, json.JSONDecodeError) as e:
        raise ModelFormatError("malformed meta section") from e
    bias_text = "\n".join(sections["bias"]) + "\n"
    settings = parse_settings(bias_text)
    from .bias import declared_predicate_keys
    from .engine import register_predicates

    register_predicates(declared_predicate_keys(settings))
    tree, pos = _read_tree(sections["tree"], 0, 0, set(settings.classes))
    if pos != len(sections["tree"]):
        raise ModelFormatError("extra lines in tree section")
    tree = recompute_assoc_queries(tree)
    model = Model(tree, settings.classes, bias_text, metadata)
    expected = render_decision_list(to_decision_list(model)).rstrip("\n").split("\n")
    if sections["dlist"] != expected:
        raise ModelFormatError("decision-list section does not match the tree")
    parse_program("\n".join(sections["dlist"]), allow_cut=True)
    return model


def save_model(model: Model, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize(model))


def load_model(path) -> Model:
    with open(path, "r", encoding="utf-8") as f:
        return deserialize(f.read())
