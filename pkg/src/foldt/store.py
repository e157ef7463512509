"""On-disk dataset store: interpretations chunked by granularity G.

A dataset text file is a sequence of blocks::

    begin(model(4)).
      card(7,spades).
      ...
      pair.
    end(model(4)).

``load_dataset`` parses the blocks once and writes a chunk store next to the
source (or into a target directory): binary chunk files of ``G`` pre-parsed
examples each, a line-oriented manifest (``chunk <index> <file> <first-id>
<count>``), an id list, and a small metadata file.  Streaming passes then
decode one chunk at a time, so at most ``G`` examples are ever resident; the
handle counts chunk loads and the peak number of resident examples so that
callers can verify the bound.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator

from .errors import DataError, ParseError
from .terms import (
    Atom,
    Compound,
    Literal,
    Number,
    Term,
    Variable,
    is_ground,
    iter_clause_texts,
    parse_term,
    render_term,
)

log = logging.getLogger(__name__)

CHUNK_MAGIC = b"foldt-chunk v1\n"
MANIFEST_NAME = "manifest.txt"
META_NAME = "meta.json"
IDS_NAME = "ids.txt"


class _FactGroup:
    __slots__ = ("facts", "by_first")

    def __init__(self, facts: tuple[Literal, ...]):
        self.facts = facts
        by_first: dict[Term, list[Literal]] = {}
        if facts and facts[0].args:
            for f in facts:
                by_first.setdefault(f.args[0], []).append(f)
        self.by_first = {k: tuple(v) for k, v in by_first.items()}


class Interpretation:
    """One example: an identifier, a class label, and an indexed set of
    ground facts (the class fact itself is kept out of the index)."""

    __slots__ = ("ident", "label", "facts", "_groups")

    def __init__(self, ident: Term, label: str, facts: tuple[Literal, ...]):
        self.ident = ident
        self.label = label
        self.facts = facts
        groups: dict[tuple[str, int], list[Literal]] = {}
        for f in facts:
            groups.setdefault(f.key, []).append(f)
        self._groups = {k: _FactGroup(tuple(v)) for k, v in groups.items()}

    def group(self, key: tuple[str, int]) -> _FactGroup | None:
        return self._groups.get(key)

    def predicates(self):
        return self._groups.keys()

    def __eq__(self, other):
        return (
            isinstance(other, Interpretation)
            and self.ident == other.ident
            and self.label == other.label
            and self.facts == other.facts
        )

    def __hash__(self):
        return hash((self.ident, self.label, self.facts))

    def __repr__(self):
        return f"Interpretation({render_term(self.ident)}, {self.label}, {len(self.facts)} facts)"


# ---------------------------------------------------------------------------
# Binary codec

_TAG_ATOM, _TAG_INT, _TAG_FLOAT, _TAG_VAR, _TAG_COMPOUND = range(5)


def _put_uvarint(out: bytearray, n: int):
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return


def _put_str(out: bytearray, s: str):
    raw = s.encode("utf-8")
    _put_uvarint(out, len(raw))
    out.extend(raw)


def _put_term(out: bytearray, t: Term):
    if isinstance(t, Atom):
        out.append(_TAG_ATOM)
        _put_str(out, t.name)
    elif isinstance(t, Number):
        if isinstance(t.value, int):
            out.append(_TAG_INT)
            n = t.value
            _put_uvarint(out, (n << 1) ^ (n >> 63) if -(2**63) <= n < 2**63 else _reject_int(n))
        else:
            out.append(_TAG_FLOAT)
            out.extend(struct.pack("<d", t.value))
    elif isinstance(t, Variable):
        out.append(_TAG_VAR)
        _put_str(out, t.name)
    elif isinstance(t, Compound):
        out.append(_TAG_COMPOUND)
        _put_str(out, t.functor)
        _put_uvarint(out, len(t.args))
        for a in t.args:
            _put_term(out, a)
    else:
        raise TypeError(f"not a term: {t!r}")


def _reject_int(n: int):
    raise DataError(f"integer {n} out of the 64-bit storable range")


class _Reader:
    __slots__ = ("buf", "pos")

    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def uvarint(self) -> int:
        shift = n = 0
        while True:
            b = self.buf[self.pos]
            self.pos += 1
            n |= (b & 0x7F) << shift
            if not b & 0x80:
                return n
            shift += 7

    def string(self) -> str:
        ln = self.uvarint()
        raw = self.buf[self.pos : self.pos + ln]
        self.pos += ln
        return raw.decode("utf-8")

    def term(self) -> Term:
        tag = self.buf[self.pos]
        self.pos += 1
        if tag == _TAG_ATOM:
            return Atom(self.string())
        if tag == _TAG_INT:
            z = self.uvarint()
            return Number((z >> 1) ^ -(z & 1))
        if tag == _TAG_FLOAT:
            (v,) = struct.unpack_from("<d", self.buf, self.pos)
            self.pos += 8
            return Number(v)
        if tag == _TAG_VAR:
            return Variable(self.string())
        if tag == _TAG_COMPOUND:
            functor = self.string()
            arity = self.uvarint()
            return Compound(functor, tuple(self.term() for _ in range(arity)))
        raise DataError(f"corrupt chunk record (bad tag {tag})")


def encode_record(interp: Interpretation) -> bytes:
    out = bytearray()
    _put_term(out, interp.ident)
    _put_str(out, interp.label)
    _put_uvarint(out, len(interp.facts))
    for f in interp.facts:
        _put_str(out, f.pred)
        _put_uvarint(out, len(f.args))
        for a in f.args:
            _put_term(out, a)
    return bytes(out)


def decode_record(buf: bytes) -> Interpretation:
    r = _Reader(buf)
    ident = r.term()
    label = r.string()
    nfacts = r.uvarint()
    facts = []
    for _ in range(nfacts):
        pred = r.string()
        arity = r.uvarint()
        args = tuple(r.term() for _ in range(arity))
        facts.append(Literal(pred, args))
    return Interpretation(ident, label, tuple(facts))


# ---------------------------------------------------------------------------
# Reading data files


def iter_kb_blocks(
    path, classes, on_bad: str = "error", allow_unlabeled: bool = False
) -> Iterator[Interpretation]:
    """Stream interpretations from a ``begin/end`` block file.

    ``classes`` is the declared class-label list: exactly one matching nullary
    fact must appear in each block; it becomes the label and is removed from
    the fact set.  ``on_bad`` is ``"error"`` or ``"skip"`` (warn and drop the
    offending example).  With ``allow_unlabeled`` a block without a class fact
    yields an interpretation with an empty label (classification input).
    """
    class_set = set(classes)
    ident = None
    facts: list[Literal] = []
    label: str | None = None
    bad: str | None = None
    with open(path, "r", encoding="utf-8") as f:
        for text, line, col in iter_clause_texts(f):
            term = parse_term(text, line, col)
            marker = _block_marker(term)
            if marker is not None:
                kind, block_id = marker
                if kind == "begin":
                    if ident is not None:
                        raise DataError(f"begin inside block {render_term(ident)} (line {line})")
                    ident, facts, label, bad = block_id, [], None, None
                    continue
                if ident is None:
                    raise DataError(f"end outside any block (line {line})")
                if block_id != ident:
                    raise DataError(
                        f"mismatched begin/end ids: {render_term(ident)} vs {render_term(block_id)} (line {line})"
                    )
                if label is None and bad is None:
                    if allow_unlabeled:
                        label = ""
                    else:
                        bad = f"no class fact in example {render_term(ident)}"
                if bad is not None:
                    if on_bad == "error":
                        raise DataError(bad)
                    log.warning("skipping example %s: %s", render_term(ident), bad)
                else:
                    yield Interpretation(ident, label, tuple(facts))
                ident = None
                continue
            if ident is None:
                raise DataError(f"fact outside of a begin/end block (line {line})")
            if isinstance(term, Atom) and term.name in class_set:
                if label is not None and bad is None:
                    bad = (
                        f"ambiguous class in example {render_term(ident)}: "
                        f"both {label} and {term.name}"
                    )
                label = term.name
                continue
            if not is_ground(term):
                raise DataError(f"non-ground fact in example {render_term(ident)} (line {line})")
            if isinstance(term, Atom):
                facts.append(Literal(term.name, ()))
            elif isinstance(term, Compound):
                facts.append(Literal(term.functor, term.args))
            else:
                raise DataError(f"a fact must be an atom or compound (line {line})")
    if ident is not None:
        raise DataError(f"unterminated block {render_term(ident)} at end of file")


def _block_marker(term: Term):
    if (
        isinstance(term, Compound)
        and term.functor in ("begin", "end")
        and len(term.args) == 1
        and isinstance(term.args[0], Compound)
        and term.args[0].functor == "model"
        and len(term.args[0].args) == 1
    ):
        block_id = term.args[0].args[0]
        if not is_ground(block_id):
            raise DataError("example identifier must be ground")
        return term.functor, block_id
    return None


# ---------------------------------------------------------------------------
# Chunk store


@dataclass
class ChunkInfo:
    index: int
    path: Path
    first_id: Term
    count: int
    start_ordinal: int


class ChunkWriter:
    """Accumulates interpretations and writes chunk files of size G."""

    def __init__(self, directory, granularity: int):
        if granularity < 1:
            raise DataError("granularity must be a positive integer")
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.granularity = granularity
        self._buffer: list[Interpretation] = []
        self._chunks: list[ChunkInfo] = []
        self._ids: list[Term] = []
        self._id_set: set[Term] = set()
        self._class_counts: Counter = Counter()
        self._record_hashes: list[bytes] = []

    def add(self, interp: Interpretation):
        if interp.ident in self._id_set:
            raise DataError(f"duplicate example id {render_term(interp.ident)}")
        self._id_set.add(interp.ident)
        self._ids.append(interp.ident)
        self._class_counts[interp.label] += 1
        self._buffer.append(interp)
        if len(self._buffer) == self.granularity:
            self._flush()

    def _flush(self):
        if not self._buffer:
            return
        index = len(self._chunks)
        path = self.dir / f"chunk-{index:05d}.bin"
        with open(path, "wb") as f:
            f.write(CHUNK_MAGIC)
            for interp in self._buffer:
                rec = encode_record(interp)
                self._record_hashes.append(hashlib.sha256(rec).digest())
                f.write(struct.pack("<I", len(rec)))
                f.write(rec)
        start = sum(c.count for c in self._chunks)
        self._chunks.append(
            ChunkInfo(index, path, self._buffer[0].ident, len(self._buffer), start)
        )
        self._buffer = []

    def finish(self) -> "DatasetHandle":
        self._flush()
        if not self._chunks:
            raise DataError("empty dataset")
        fingerprint = hashlib.sha256(b"".join(sorted(self._record_hashes))).hexdigest()
        with open(self.dir / MANIFEST_NAME, "w", encoding="utf-8") as f:
            for c in self._chunks:
                f.write(f"chunk {c.index} {c.path.name} {render_term(c.first_id)} {c.count}\n")
        with open(self.dir / IDS_NAME, "w", encoding="utf-8") as f:
            for ident in self._ids:
                f.write(render_term(ident) + "\n")
        meta = {
            "granularity": self.granularity,
            "total": len(self._ids),
            "class_counts": dict(self._class_counts),
            "fingerprint": fingerprint,
        }
        with open(self.dir / META_NAME, "w", encoding="utf-8") as f:
            json.dump(meta, f, indent=1)
        return DatasetHandle(
            self.dir,
            self._chunks,
            self.granularity,
            len(self._ids),
            dict(self._class_counts),
            fingerprint,
            self._ids,
        )


class DatasetHandle:
    """Read handle over a chunk store; shareable for concurrent passes."""

    def __init__(self, directory, chunks, granularity, total, class_counts, fingerprint, ids):
        self.dir = Path(directory)
        self.chunks: list[ChunkInfo] = chunks
        self.granularity = granularity
        self.total = total
        self.class_counts = class_counts
        self.fingerprint = fingerprint
        self.example_ids: list[Term] = ids
        self.chunk_loads = 0
        self._peak = 0

    def __len__(self):
        return self.total

    @property
    def manifest_path(self) -> Path:
        return self.dir / MANIFEST_NAME

    def peak_resident(self) -> int:
        """Maximum number of simultaneously resident examples observed so far
        by streaming passes over this handle (0 before any pass).  Callers
        that copy examples out of the stream are outside this accounting."""
        return self._peak

    def chunk_ids(self, chunk: ChunkInfo) -> list[Term]:
        return self.example_ids[chunk.start_ordinal : chunk.start_ordinal + chunk.count]

    def stream_examples(
        self, selector: Callable[[Term], bool] | None = None
    ) -> Iterator[tuple[int, Interpretation]]:
        """Yield ``(ordinal, interpretation)`` in manifest order.

        ``selector`` filters by example identifier; chunks whose examples are
        all excluded are skipped without opening the file.  At most one chunk
        (<= G examples) is decoded at a time.
        """
        for chunk in self.chunks:
            if selector is not None and not any(selector(i) for i in self.chunk_ids(chunk)):
                continue
            interps = self._load_chunk(chunk)
            for offset, interp in enumerate(interps):
                if selector is None or selector(interp.ident):
                    yield chunk.start_ordinal + offset, interp
            del interps

    def _load_chunk(self, chunk: ChunkInfo) -> list[Interpretation]:
        try:
            raw = chunk.path.read_bytes()
        except OSError as e:
            raise DataError(f"missing chunk file {chunk.path}: {e}") from e
        if not raw.startswith(CHUNK_MAGIC):
            raise DataError(f"corrupt chunk file {chunk.path}: bad magic")
        pos = len(CHUNK_MAGIC)
        out: list[Interpretation] = []
        while pos < len(raw):
            if pos + 4 > len(raw):
                raise DataError(f"corrupt chunk file {chunk.path}: truncated record header")
            (ln,) = struct.unpack_from("<I", raw, pos)
            pos += 4
            if pos + ln > len(raw):
                raise DataError(f"corrupt chunk file {chunk.path}: truncated record")
            try:
                out.append(decode_record(raw[pos : pos + ln]))
            except (IndexError, UnicodeDecodeError, struct.error) as e:
                raise DataError(f"corrupt chunk file {chunk.path}: {e}") from e
            pos += ln
        if len(out) != chunk.count:
            raise DataError(
                f"corrupt chunk file {chunk.path}: expected {chunk.count} records, found {len(out)}"
            )
        self.chunk_loads += 1
        if len(out) > self._peak:
            self._peak = len(out)
        return out


def load_dataset(
    path,
    settings,
    out_dir=None,
    granularity: int | None = None,
    on_bad: str = "error",
) -> DatasetHandle:
    """Parse a block file and build its chunk store.

    The store is written beside the source (``<file>.chunks/``) unless
    ``out_dir`` is given.  Granularity defaults to the settings parameter.
    """
    path = Path(path)
    g = granularity if granularity is not None else settings.params.granularity
    directory = Path(out_dir) if out_dir is not None else path.with_name(path.name + ".chunks")
    writer = ChunkWriter(directory, g)
    for interp in iter_kb_blocks(path, settings.classes, on_bad=on_bad):
        writer.add(interp)
    return writer.finish()


def open_dataset(path) -> DatasetHandle:
    """Open an existing chunk store from its directory or manifest path."""
    path = Path(path)
    directory = path.parent if path.name == MANIFEST_NAME else path
    manifest = directory / MANIFEST_NAME
    if not manifest.exists():
        raise DataError(f"no manifest at {manifest}")
    chunks: list[ChunkInfo] = []
    start = 0
    with open(manifest, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 5 or parts[0] != "chunk":
                raise DataError(f"bad manifest line {lineno}: {line!r}")
            index = int(parts[1])
            fname = parts[2]
            count = int(parts[-1])
            first_id = parse_term(" ".join(parts[3:-1]))
            chunks.append(ChunkInfo(index, directory / fname, first_id, count, start))
            start += count
    try:
        meta = json.loads((directory / META_NAME).read_text(encoding="utf-8"))
        ids = [
            parse_term(line)
            for line in (directory / IDS_NAME).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    except (OSError, json.JSONDecodeError, ParseError) as e:
        raise DataError(f"cannot read chunk-store metadata in {directory}: {e}") from e
    if len(ids) != start:
        raise DataError("id list does not match manifest totals")
    return DatasetHandle(
        directory,
        chunks,
        meta["granularity"],
        meta["total"],
        dict(meta["class_counts"]),
        meta["fingerprint"],
        ids,
    )


def write_kb_file(path, interps: Iterator[Interpretation], class_first: bool = False):
    """Write interpretations back out as a begin/end block file."""
    from .terms import render_fact

    with open(path, "w", encoding="utf-8") as f:
        for interp in interps:
            ident = render_term(interp.ident)
            f.write(f"begin(model({ident})).\n")
            if class_first:
                f.write(f"  {interp.label}.\n")
            for fact in interp.facts:
                f.write(f"  {render_fact(fact)}\n")
            if not class_first:
                f.write(f"  {interp.label}.\n")
            f.write(f"end(model({ident})).\n")
