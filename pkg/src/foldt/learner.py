"""Tree induction: the depth-first classic engine and the level-wise
large-dataset (LDS) engine, sharing the heuristics and stopping rules.

The classic engine keeps every example resident and recurses: at each node it
generates the refinement candidates of the associated query, evaluates each
candidate on each example reaching the node (candidate loop outside, example
loop inside), picks the best split, and partitions.  Selection considers only
admissible candidates: positive gain and at least ``minleaf`` examples on
each side.  Without that validity filter the gain ratio favors degenerate
near-empty splits (a split isolating one example of a rare class scores a
ratio of ~1.0), which would then be vetoed and turn the node into a leaf
prematurely; a node becomes a leaf only when no admissible candidate exists.

The LDS engine builds one tree level per streaming pass.  During a pass it
holds the class-distribution counter table ``counter[node, candidate,
branch][class]`` in memory and, for each streamed example, evaluates all
candidates of the example's node, spilling the outcome bits to a temporary
file.  After the pass each open node either becomes a leaf or an internal
node; examples are then routed to children straight from the spilled bits of
the winning candidate, so no second pass over the data is needed.  Every
level costs exactly one pass, including the final all-leaf level, so the
pass count equals the depth of the finished tree (counted in node levels).

Memory at any moment is one chunk of examples (bounded by the store's
granularity) plus the counter table, which scales with nodes-per-level times
candidates-per-node, never with the number of examples.  The example-to-node
assignment is one small integer per example.

Both engines make identical decisions from identical integer counters, and
fresh variable names are derived from path-local state, so the two engines
produce structurally identical trees (same splits, conjunctions, variable
names, and leaf distributions) for the same inputs.
"""

from __future__ import annotations

import logging
import math
import struct
import tempfile
import time
from dataclasses import dataclass, field

from .bias import Candidate, RefinementContext, prepare_bias, refinements
from .engine import Background, Query, succeeds
from .errors import DataError
from .model import FOLDT, INode, Leaf, Model, count_nodes, tree_depth
from .settings import Settings, render_settings
from .store import DatasetHandle

log = logging.getLogger(__name__)

LEAF_COVERED = -1


@dataclass
class LearnerConfig:
    algorithm: str = "lds"
    heuristic: str = "gainratio"
    minleaf: int = 2
    gain_epsilon: float = 1e-9
    resolution_budget: int = 100_000
    granularity: int = 10
    max_depth: int | None = None

    @classmethod
    def from_settings(cls, settings: Settings, **overrides) -> "LearnerConfig":
        p = settings.params
        cfg = cls(
            algorithm=p.algorithm,
            heuristic=p.heuristic,
            minleaf=p.minleaf,
            gain_epsilon=p.gain_epsilon,
            resolution_budget=p.resolution_budget,
            granularity=p.granularity,
            max_depth=p.max_depth,
        )
        for k, v in overrides.items():
            if v is not None:
                setattr(cfg, k, v)
        return cfg


# ---------------------------------------------------------------------------
# Heuristics


def entropy(counts) -> float:
    """Class entropy in bits."""
    total = sum(counts)
    if total == 0:
        return 0.0
    h = 0.0
    for c in counts:
        if c:
            p = c / total
            h -= p * math.log2(p)
    return h


def weighted_entropy(left, right) -> float:
    n = sum(left) + sum(right)
    nl = sum(left)
    return (nl / n) * entropy(left) + ((n - nl) / n) * entropy(right)


def gain_of(parent, left, right) -> float:
    return entropy(parent) - weighted_entropy(left, right)


def score(heuristic: str, parent, left, right) -> float | None:
    """The heuristic's value for a split; None rejects the candidate
    (gain ratio is undefined when the split puts everything on one side)."""
    if sum(parent) == 0:
        raise DataError("empty parent distribution")
    w = weighted_entropy(left, right)
    if heuristic == "weighted_entropy":
        return w
    gain = entropy(parent) - w
    if heuristic == "gain":
        return gain
    if heuristic == "gainratio":
        n = sum(parent)
        splitinfo = 0.0
        for nb in (sum(left), sum(right)):
            if nb:
                splitinfo -= (nb / n) * math.log2(nb / n)
        if splitinfo == 0.0:
            return None
        return gain / splitinfo
    raise DataError(f"unknown heuristic {heuristic!r}")


def select_best(scores, heuristic: str) -> int | None:
    """Argmax (argmin for weighted entropy) with strict comparison, so ties
    go to the earliest candidate in generation order."""
    best = None
    best_s = None
    minimize = heuristic == "weighted_entropy"
    for i, s in enumerate(scores):
        if s is None:
            continue
        if best is None or (s < best_s if minimize else s > best_s):
            best, best_s = i, s
    return best


def is_good(gain: float, left_total: int, right_total: int, config: LearnerConfig) -> bool:
    """A split is kept only if it gains information and both branches can
    still carry at least ``minleaf`` examples."""
    return (
        gain > config.gain_epsilon
        and left_total >= 1
        and right_total >= 1
        and min(left_total, right_total) >= config.minleaf
    )


def majority_class(counts, classes) -> str:
    total = sum(counts)
    if total == 0:
        raise DataError("empty class distribution")
    best = max(range(len(counts)), key=lambda i: (counts[i], -i))
    return classes[best]


def _forced_leaf(counts, depth: int, config: LearnerConfig) -> bool:
    """Decisions that need no candidate evaluation: a pure node can never
    gain, a node below 2*minleaf cannot split without starving a branch, and
    the depth cap forces a leaf.  Full evaluation would reach the same
    conclusion, so both engines apply the same shortcut."""
    if sum(1 for c in counts if c) <= 1:
        return True
    if sum(counts) < 2 * config.minleaf:
        return True
    return config.max_depth is not None and depth >= config.max_depth


@dataclass
class BuildStats:
    passes: int = 0
    evaluations: int = 0
    eval_seconds: float = 0.0
    nodes_evaluated: int = 0
    candidates_generated: int = 0
    levels: list = field(default_factory=list)


def _root_counts(data: DatasetHandle, classes) -> tuple[int, ...]:
    unknown = set(data.class_counts) - set(classes)
    if unknown:
        raise DataError(f"dataset labels not in the declared classes: {sorted(unknown)}")
    return tuple(data.class_counts.get(c, 0) for c in classes)


def _metadata(algorithm, cfg, data, stats, tree, wall, cpu) -> dict:
    inodes, leaves = count_nodes(tree)
    return {
        "algorithm": algorithm,
        "heuristic": cfg.heuristic,
        "minleaf": cfg.minleaf,
        "gain_epsilon": cfg.gain_epsilon,
        "resolution_budget": cfg.resolution_budget,
        "granularity": data.granularity,
        "max_depth": cfg.max_depth,
        "examples": len(data),
        "dataset_fingerprint": data.fingerprint,
        "tree_depth": tree_depth(tree),
        "internal_nodes": inodes,
        "leaves": leaves,
        "passes": stats.passes,
        "evaluations": stats.evaluations,
        "nodes_evaluated": stats.nodes_evaluated,
        "candidates_generated": stats.candidates_generated,
        "eval_seconds": stats.eval_seconds,
        "induction_wall_seconds": wall,
        "induction_cpu_seconds": cpu,
        "levels": stats.levels,
    }


# ---------------------------------------------------------------------------
# Classic engine


def learn_classic(
    data: DatasetHandle,
    background: Background | None,
    settings: Settings,
    config: LearnerConfig | None = None,
) -> Model:
    cfg = config or LearnerConfig.from_settings(settings)
    wall0, cpu0 = time.perf_counter(), time.process_time()
    bias = prepare_bias(settings, data, background, cfg.resolution_budget)
    classes = settings.classes
    cidx = settings.class_index()
    _root_counts(data, classes)
    examples = [e for _, e in data.stream_examples()]
    labels = [cidx[e.label] for e in examples]
    stats = BuildStats(passes=1)
    nclasses = len(classes)

    def dist_of(idxs) -> tuple[int, ...]:
        counts = [0] * nclasses
        for i in idxs:
            counts[labels[i]] += 1
        return tuple(counts)

    def build(idxs, query: Query, usage, name_base: int, depth: int) -> FOLDT:
        counts = dist_of(idxs)
        if _forced_leaf(counts, depth, cfg):
            return Leaf(majority_class(counts, classes), counts)
        ctx = RefinementContext(query, usage, name_base)
        candidates = refinements(ctx, bias)
        if not candidates:
            return Leaf(majority_class(counts, classes), counts)
        stats.nodes_evaluated += 1
        stats.candidates_generated += len(candidates)
        t0 = time.perf_counter()
        best_i = None
        best_s = None
        best_bits = None
        minimize = cfg.heuristic == "weighted_entropy"
        for ci, cand in enumerate(candidates):
            left = [0] * nclasses
            right = [0] * nclasses
            bits = []
            for i in idxs:
                ok = succeeds(cand.query, examples[i], background, cfg.resolution_budget)
                (left if ok else right)[labels[i]] += 1
                bits.append(ok)
            stats.evaluations += len(idxs)
            if not is_good(gain_of(counts, left, right), sum(left), sum(right), cfg):
                continue
            s = score(cfg.heuristic, counts, left, right)
            if s is None:
                continue
            if best_i is None or (s < best_s if minimize else s > best_s):
                best_i, best_s = ci, s
                best_bits = bits
        stats.eval_seconds += time.perf_counter() - t0
        if best_i is None:
            return Leaf(majority_class(counts, classes), counts)
        winner = candidates[best_i]
        e1 = [i for i, ok in zip(idxs, best_bits) if ok]
        e2 = [i for i, ok in zip(idxs, best_bits) if not ok]
        fresh = len(winner.query.variables()) - len(query.variables())
        new_usage = tuple(
            u + 1 if ri == winner.rmode_index else u for ri, u in enumerate(usage)
        )
        left = build(e1, winner.query, new_usage, name_base + fresh, depth + 1)
        right = build(e2, query, usage, name_base + fresh, depth + 1)
        return INode(winner.added, query, left, right)

    tree = build(
        list(range(len(examples))), Query(()), (0,) * len(settings.rmodes), 0, 0
    )
    wall, cpu = time.perf_counter() - wall0, time.process_time() - cpu0
    meta = _metadata("classic", cfg, data, stats, tree, wall, cpu)
    return Model(tree, classes, render_settings(settings), meta)


# ---------------------------------------------------------------------------
# LDS engine


@dataclass
class _OpenNode:
    nid: int
    query: Query
    usage: tuple[int, ...]
    name_base: int
    depth: int
    counts: tuple[int, ...]
    candidates: list[Candidate] | None = None
    counters: list | None = None  # per candidate: [left per-class, right per-class]
    result: tuple | None = None  # ("leaf", Leaf) | ("inode", conj, left_id, right_id, winner)


def learn_lds(
    data: DatasetHandle,
    background: Background | None,
    settings: Settings,
    config: LearnerConfig | None = None,
) -> Model:
    cfg = config or LearnerConfig.from_settings(settings)
    wall0, cpu0 = time.perf_counter(), time.process_time()
    bias = prepare_bias(settings, data, background, cfg.resolution_budget)
    classes = settings.classes
    cidx = settings.class_index()
    nclasses = len(classes)
    n_examples = len(data)
    ordinal_of = {ident: i for i, ident in enumerate(data.example_ids)}
    assignment = [0] * n_examples
    stats = BuildStats()

    nodes: dict[int, _OpenNode] = {}
    root = _OpenNode(
        0, Query(()), (0,) * len(settings.rmodes), 0, 0, _root_counts(data, classes)
    )
    nodes[0] = root
    frontier = [root]
    next_id = 1

    def selector(ident):
        return assignment[ordinal_of[ident]] != LEAF_COVERED

    while frontier:
        stats.passes += 1
        level_wall0 = time.perf_counter()
        for n in frontier:
            if _forced_leaf(n.counts, n.depth, cfg):
                continue
            ctx = RefinementContext(n.query, n.usage, n.name_base)
            n.candidates = refinements(ctx, bias) or None
            if n.candidates:
                stats.nodes_evaluated += 1
                stats.candidates_generated += len(n.candidates)
                n.counters = [
                    [[0] * nclasses, [0] * nclasses] for _ in n.candidates
                ]
        evaluable = {n.nid: n for n in frontier if n.candidates}

        # One pass over the non-leaf-covered examples (Always exactly one per
        # level: the final all-leaf level is decided during its own pass.)
        touched = 0
        evals_before = stats.evaluations
        eval_t0 = time.perf_counter()
        with tempfile.TemporaryFile(dir=str(data.dir)) as spill:
            for ordinal, e in data.stream_examples(selector):
                touched += 1
                node = evaluable.get(assignment[ordinal])
                if node is None:
                    continue
                cls = cidx[e.label]
                bits = 0
                for ci, cand in enumerate(node.candidates):
                    if succeeds(cand.query, e, background, cfg.resolution_budget):
                        node.counters[ci][0][cls] += 1
                        bits |= 1 << ci
                    else:
                        node.counters[ci][1][cls] += 1
                stats.evaluations += len(node.candidates)
                nbytes = (len(node.candidates) + 7) // 8
                spill.write(struct.pack("<I", ordinal) + bits.to_bytes(nbytes, "little"))
            stats.eval_seconds += time.perf_counter() - eval_t0

            # Decide every node of the level from its counters.
            new_frontier: list[_OpenNode] = []
            swept_leaf_ids = set()
            for n in frontier:
                winner_i = None
                if n.candidates:
                    scores = [
                        score(cfg.heuristic, n.counts, tuple(l), tuple(r))
                        if is_good(gain_of(n.counts, l, r), sum(l), sum(r), cfg)
                        else None
                        for l, r in n.counters
                    ]
                    winner_i = select_best(scores, cfg.heuristic)
                if winner_i is None:
                    n.result = ("leaf", Leaf(majority_class(n.counts, classes), n.counts))
                    if not n.candidates:
                        swept_leaf_ids.add(n.nid)
                    continue
                winner = n.candidates[winner_i]
                left_counts, right_counts = n.counters[winner_i]
                fresh = len(winner.query.variables()) - len(n.query.variables())
                new_usage = tuple(
                    u + 1 if ri == winner.rmode_index else u
                    for ri, u in enumerate(n.usage)
                )
                lnode = _OpenNode(
                    next_id, winner.query, new_usage, n.name_base + fresh,
                    n.depth + 1, tuple(left_counts),
                )
                rnode = _OpenNode(
                    next_id + 1, n.query, n.usage, n.name_base + fresh,
                    n.depth + 1, tuple(right_counts),
                )
                next_id += 2
                nodes[lnode.nid] = lnode
                nodes[rnode.nid] = rnode
                new_frontier.extend((lnode, rnode))
                n.result = ("inode", winner.added, lnode.nid, rnode.nid, winner_i)

            # Route examples to children from the spilled outcome bits of each
            # node's winning candidate; no re-evaluation pass.
            spill.seek(0)
            header = spill.read(4)
            while header:
                (ordinal,) = struct.unpack("<I", header)
                node = nodes[assignment[ordinal]]
                nbytes = (len(node.candidates) + 7) // 8
                bits = int.from_bytes(spill.read(nbytes), "little")
                if node.result[0] == "leaf":
                    assignment[ordinal] = LEAF_COVERED
                else:
                    _, _, left_id, right_id, wi = node.result
                    assignment[ordinal] = left_id if bits >> wi & 1 else right_id
                header = spill.read(4)
        if swept_leaf_ids:
            for i in range(n_examples):
                if assignment[i] in swept_leaf_ids:
                    assignment[i] = LEAF_COVERED

        # Drop per-level candidate state before the next level's table is built.
        for n in frontier:
            n.candidates = None
            n.counters = None
        level_wall = time.perf_counter() - level_wall0
        stats.levels.append(
            {
                "level": stats.passes,
                "open_nodes": len(frontier),
                "evaluated_nodes": len(evaluable),
                "candidates": sum(len(v.candidates or ()) for v in evaluable.values()),
                "examples_touched": touched,
                "evaluations": stats.evaluations - evals_before,
                "pass_wall_seconds": level_wall,
            }
        )
        log.info(
            "level %d: open=%d evaluated=%d examples=%d pass=%.3fs",
            stats.passes, len(frontier), len(evaluable), touched, level_wall,
        )
        frontier = new_frontier

    def materialize(nid: int) -> FOLDT:
        n = nodes[nid]
        kind = n.result[0]
        if kind == "leaf":
            return n.result[1]
        _, conj, left_id, right_id, _ = n.result
        return INode(conj, n.query, materialize(left_id), materialize(right_id))

    tree = materialize(0)
    wall, cpu = time.perf_counter() - wall0, time.process_time() - cpu0
    meta = _metadata("lds", cfg, data, stats, tree, wall, cpu)
    return Model(tree, classes, render_settings(settings), meta)


def learn(
    data: DatasetHandle,
    background: Background | None,
    settings: Settings,
    config: LearnerConfig | None = None,
) -> Model:
    cfg = config or LearnerConfig.from_settings(settings)
    if cfg.algorithm == "classic":
        return learn_classic(data, background, settings, cfg)
    if cfg.algorithm == "lds":
        return learn_lds(data, background, settings, cfg)
    raise DataError(f"unknown algorithm {cfg.algorithm!r}")
