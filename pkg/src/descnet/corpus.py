"""Entity and taxonomy data model, ingestion, description filtering,
stratified splits, and the synthetic corpus generator.

Entities arrive as JSONL (one object per line: id, name, raw_text,
optional tokens / label / audit_label / description) or as 4-column TSV
(id, name, label, raw_text). A collection is immutable once loaded and
safe to share across threads; the description filter is the single
writer that sets ``description`` during preparation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional, Sequence

import numpy as np

SENTENCE_TERMINATORS = "。！？!?"


class CorpusError(ValueError):
    """Malformed corpus input or contract violation."""


# ---------------------------------------------------------------------------
# entities


@dataclass
class Entity:
    id: str
    name: str
    raw_text: str
    tokens: Optional[tuple[tuple[str, Optional[str]], ...]] = None
    label: Optional[str] = None
    audit_label: Optional[str] = None
    description: Optional[str] = None

    @property
    def is_known(self) -> bool:
        return self.label is not None


class EntityCollection:
    """Ordered, id-unique set of entities."""

    def __init__(self, entities: Iterable[Entity]):
        self.entities: tuple[Entity, ...] = tuple(entities)
        self._by_id: dict[str, Entity] = {}
        for e in self.entities:
            if e.id in self._by_id:
                raise CorpusError(f"duplicate entity id {e.id!r}")
            self._by_id[e.id] = e

    def __len__(self) -> int:
        return len(self.entities)

    def __iter__(self) -> Iterator[Entity]:
        return iter(self.entities)

    def __getitem__(self, entity_id: str) -> Entity:
        return self._by_id[entity_id]

    def __contains__(self, entity_id: str) -> bool:
        return entity_id in self._by_id

    def known(self) -> "EntityCollection":
        return EntityCollection(e for e in self.entities if e.is_known)

    def unknown(self) -> "EntityCollection":
        return EntityCollection(e for e in self.entities if not e.is_known)

    def by_label(self) -> dict[str, list[Entity]]:
        groups: dict[str, list[Entity]] = {}
        for e in self.entities:
            if e.label is not None:
                groups.setdefault(e.label, []).append(e)
        return groups


def _parse_tokens(raw, where: str) -> tuple[tuple[str, Optional[str]], ...]:
    toks = []
    for item in raw:
        if isinstance(item, str):
            toks.append((item, None))
            continue
        if not isinstance(item, (list, tuple)) or not item:
            raise CorpusError(f"{where}: malformed token entry {item!r}")
        word = item[0]
        pos = item[1] if len(item) > 1 else None
        # a third (dependency-tag) element is tolerated and ignored
        if not isinstance(word, str) or not (pos is None or isinstance(pos, str)):
            raise CorpusError(f"{where}: malformed token entry {item!r}")
        toks.append((word, pos))
    return tuple(toks)


def load_entities(path, format: Optional[str] = None) -> EntityCollection:
    """Load a JSONL or TSV entity file, preserving file order.

    Malformed records and duplicate ids raise CorpusError naming the line.
    """
    path = str(path)
    if format is None:
        format = "tsv" if path.endswith(".tsv") else "jsonl"
    if format not in ("jsonl", "tsv"):
        raise CorpusError(f"unknown entity format {format!r}")
    entities: list[Entity] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            if format == "tsv":
                parts = line.split("\t")
                if len(parts) != 4:
                    raise CorpusError(f"{where}: expected 4 tab-separated fields")
                eid, name, label, raw_text = parts
                entities.append(
                    Entity(id=eid, name=name, raw_text=raw_text, label=label or None)
                )
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{where}: invalid JSON ({exc.msg})") from exc
            if not isinstance(rec, dict):
                raise CorpusError(f"{where}: record must be an object")
            for key in ("id", "name", "raw_text"):
                if key not in rec or not isinstance(rec[key], str):
                    raise CorpusError(f"{where}: missing or non-string {key!r}")
            tokens = None
            if rec.get("tokens") is not None:
                tokens = _parse_tokens(rec["tokens"], where)
            entities.append(
                Entity(
                    id=rec["id"],
                    name=rec["name"],
                    raw_text=rec["raw_text"],
                    tokens=tokens,
                    label=rec.get("label"),
                    audit_label=rec.get("audit_label"),
                    description=rec.get("description"),
                )
            )
    try:
        return EntityCollection(entities)
    except CorpusError as exc:
        raise CorpusError(f"{path}: {exc}") from exc


def write_entities(collection: Iterable[Entity], path) -> None:
    """Write entities as JSONL (key order fixed for reproducible bytes)."""
    with open(path, "w", encoding="utf-8") as fh:
        for e in collection:
            rec: dict = {"id": e.id, "name": e.name, "raw_text": e.raw_text}
            if e.tokens is not None:
                rec["tokens"] = [[w, p] for w, p in e.tokens]
            if e.label is not None:
                rec["label"] = e.label
            if e.audit_label is not None:
                rec["audit_label"] = e.audit_label
            if e.description is not None:
                rec["description"] = e.description
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# taxonomy


@dataclass(frozen=True)
class TaxonomyNode:
    key: int  # internal index, root(s) first, depth-first
    name: str
    parent: Optional[int]
    is_other: bool = False


class Taxonomy:
    """Concept tree whose leaves are the classification labels.

    Leaf names are the class ids and must be unique; each leaf gets a
    contiguous index in [0, C). A leaf counts as an "Other" leaf when
    flagged explicitly or when the trailing segment of its name (split
    on '-', '_' or whitespace) is "other" case-insensitively; such
    leaves earn evaluation credit for any gold class below their parent
    concept.
    """

    def __init__(self, nodes: Sequence[TaxonomyNode]):
        self.nodes = tuple(nodes)
        has_children = set()
        for n in self.nodes:
            if n.parent is not None:
                has_children.add(n.parent)
        self._leaf_key = {}
        leaves = []
        for n in self.nodes:
            if n.key in has_children:
                continue
            if n.name in self._leaf_key:
                raise CorpusError(f"duplicate leaf name {n.name!r}")
            self._leaf_key[n.name] = n.key
            leaves.append(n.name)
        if not leaves:
            raise CorpusError("taxonomy has no leaves")
        self.leaves: tuple[str, ...] = tuple(leaves)
        self._index = {name: i for i, name in enumerate(self.leaves)}

    @property
    def class_count(self) -> int:
        return len(self.leaves)

    def index_of(self, leaf: str) -> int:
        try:
            return self._index[leaf]
        except KeyError:
            raise CorpusError(f"unknown class {leaf!r}") from None

    def leaf_at(self, index: int) -> str:
        return self.leaves[index]

    def is_other(self, leaf: str) -> bool:
        node = self.nodes[self._leaf_key[leaf]]
        if node.is_other:
            return True
        segment = node.name.replace("-", " ").replace("_", " ").split()
        return bool(segment) and segment[-1].lower() == "other"

    def parent_key(self, leaf: str) -> Optional[int]:
        return self.nodes[self._leaf_key[leaf]].parent

    def ancestor_keys(self, leaf: str) -> tuple[int, ...]:
        keys = []
        cur = self.nodes[self._leaf_key[leaf]].parent
        while cur is not None:
            keys.append(cur)
            cur = self.nodes[cur].parent
        return tuple(keys)

    @classmethod
    def flat(cls, class_ids: Sequence[str], root: str = "root") -> "Taxonomy":
        nodes = [TaxonomyNode(0, root, None)]
        for name in class_ids:
            nodes.append(TaxonomyNode(len(nodes), name, 0))
        return cls(nodes)


def _parse_taxonomy_json(data) -> list[TaxonomyNode]:
    nodes: list[TaxonomyNode] = []

    def walk(obj, parent):
        if not isinstance(obj, dict) or "name" not in obj:
            raise CorpusError("taxonomy JSON nodes need a 'name' field")
        key = len(nodes)
        nodes.append(
            TaxonomyNode(key, str(obj["name"]), parent, bool(obj.get("other", False)))
        )
        for child in obj.get("children", []) or []:
            walk(child, key)

    roots = data if isinstance(data, list) else [data]
    for root in roots:
        walk(root, None)
    return nodes


def _parse_taxonomy_text(text: str) -> list[TaxonomyNode]:
    nodes: list[TaxonomyNode] = []
    stack: list[tuple[int, int]] = []  # (indent, key)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        indent = len(raw) - len(raw.lstrip(" "))
        name = raw.strip()
        is_other = False
        if name.endswith("[other]"):
            is_other = True
            name = name[: -len("[other]")].strip()
        if not name:
            raise CorpusError(f"taxonomy line {lineno}: empty node name")
        while stack and stack[-1][0] >= indent:
            stack.pop()
        parent = stack[-1][1] if stack else None
        if parent is None and indent != 0 and nodes:
            raise CorpusError(f"taxonomy line {lineno}: inconsistent indentation")
        key = len(nodes)
        nodes.append(TaxonomyNode(key, name, parent, is_other))
        stack.append((indent, key))
    return nodes


def load_taxonomy(path) -> Taxonomy:
    """Load a taxonomy from a JSON tree or indented-text file."""
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if path.endswith(".json") or stripped.startswith(("{", "[")):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}: invalid JSON ({exc.msg})") from exc
        nodes = _parse_taxonomy_json(data)
    else:
        nodes = _parse_taxonomy_text(text)
    try:
        return Taxonomy(nodes)
    except CorpusError as exc:
        raise CorpusError(f"{path}: {exc}") from exc


def write_taxonomy(taxonomy: Taxonomy, path) -> None:
    """Serialize as a JSON forest (inverse of load_taxonomy)."""

    def build(key: int):
        node = taxonomy.nodes[key]
        children = [build(n.key) for n in taxonomy.nodes if n.parent == key]
        out: dict = {"name": node.name}
        if node.is_other:
            out["other"] = True
        if children:
            out["children"] = children
        return out

    roots = [build(n.key) for n in taxonomy.nodes if n.parent is None]
    data = roots[0] if len(roots) == 1 else roots
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def validate_labels(collection: EntityCollection, taxonomy: Taxonomy) -> None:
    for e in collection:
        if e.label is not None:
            taxonomy.index_of(e.label)
        if e.audit_label is not None:
            taxonomy.index_of(e.audit_label)


# ---------------------------------------------------------------------------
# description filtering


def first_sentence(
    raw_text: str,
    terminators: str = SENTENCE_TERMINATORS,
    split_period: bool = True,
) -> str:
    """Prefix of raw_text up to and including the first sentence terminator.

    A '.' terminates only when followed by whitespace or end of text
    (protects abbreviations and decimals); the characters in
    ``terminators`` terminate unconditionally. Without any terminator
    the whole text is the sentence.
    """
    if not raw_text:
        raise CorpusError("empty text has no first sentence")
    n = len(raw_text)
    for i, ch in enumerate(raw_text):
        if ch in terminators:
            return raw_text[: i + 1]
        if split_period and ch == "." and (i + 1 == n or raw_text[i + 1].isspace()):
            return raw_text[: i + 1]
    return raw_text


@dataclass(frozen=True)
class FilterVerdict:
    accepted: bool
    rule: str  # "none" | "name_prefix" | "verb_head"


def make_pos_analyzer(
    verb_prefixes: tuple[str, ...] = ("v",),
    noun_prefixes: tuple[str, ...] = ("n",),
) -> Callable[[Entity], bool]:
    """POS-tag heuristic for "is the sentence head a verb".

    Verb-headed iff the first verb-tagged token precedes every
    noun-tagged candidate head. Answers False when tokens are absent.
    """

    def matches(tag: Optional[str], prefixes: tuple[str, ...]) -> bool:
        return tag is not None and tag.lower().startswith(prefixes)

    def analyzer(entity: Entity) -> bool:
        if not entity.tokens:
            return False
        first_verb = first_noun = None
        for i, (_, tag) in enumerate(entity.tokens):
            if first_verb is None and matches(tag, verb_prefixes):
                first_verb = i
            if first_noun is None and matches(tag, noun_prefixes):
                first_noun = i
        if first_verb is None:
            return False
        return first_noun is None or first_verb < first_noun

    return analyzer


default_analyzer = make_pos_analyzer()


def accept_description(
    entity: Entity,
    analyzer: Optional[Callable[[Entity], bool]] = None,
    terminators: str = SENTENCE_TERMINATORS,
    split_period: bool = True,
) -> FilterVerdict:
    """Accept the first sentence as the entity's description.

    Rule 1: the sentence (after trimming leading whitespace) starts with
    the entity name. Rule 2: the pluggable analyzer judges the sentence
    verb-headed. On accept, ``entity.description`` is set.
    """
    sentence = first_sentence(entity.raw_text, terminators, split_period)
    if sentence.lstrip().startswith(entity.name):
        entity.description = sentence
        return FilterVerdict(True, "name_prefix")
    if analyzer is None:
        analyzer = default_analyzer
    if analyzer(entity):
        entity.description = sentence
        return FilterVerdict(True, "verb_head")
    return FilterVerdict(False, "none")


def filter_descriptions(
    collection: EntityCollection,
    analyzer: Optional[Callable[[Entity], bool]] = None,
    terminators: str = SENTENCE_TERMINATORS,
    split_period: bool = True,
) -> tuple[EntityCollection, EntityCollection]:
    """Apply the description filter; returns (accepted, rejected)."""
    accepted, rejected = [], []
    for e in collection:
        verdict = accept_description(e, analyzer, terminators, split_period)
        (accepted if verdict.accepted else rejected).append(e)
    return EntityCollection(accepted), EntityCollection(rejected)


# ---------------------------------------------------------------------------
# splits


def split_stratified(
    collection: EntityCollection, ratio: float, seed: int
) -> tuple[EntityCollection, EntityCollection]:
    """Per-class split with round-half-up train counts, seeded shuffle."""
    if not 0.0 < ratio < 1.0:
        raise CorpusError(f"split ratio must be in (0,1), got {ratio}")
    for e in collection:
        if e.label is None:
            raise CorpusError(f"entity {e.id!r} is unlabeled; stratified split needs labels")
    rng = np.random.default_rng(seed)
    train: list[Entity] = []
    val: list[Entity] = []
    groups = collection.by_label()
    for label in sorted(groups):
        members = groups[label]
        n_train = int(math.floor(ratio * len(members) + 0.5))
        perm = rng.permutation(len(members))
        train.extend(members[i] for i in perm[:n_train])
        val.extend(members[i] for i in perm[n_train:])
    return EntityCollection(train), EntityCollection(val)


# ---------------------------------------------------------------------------
# synthetic corpus


_SYLLABLES = (
    "ba", "de", "ki", "lo", "mu", "na", "po", "ra", "su", "ti",
    "va", "zo", "fe", "gu", "hy", "ce",
)


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a deterministic synthetic entity corpus.

    Descriptions are drawn mostly from a per-class private vocabulary,
    mixed with a shared pool at ``overlap_rate`` so class separability
    is tunable. ``noise_rate`` of known entities get a wrong label (the
    true class stays in ``audit_label``); ``unlabeled_rate`` of each
    class is emitted unlabeled. ``exact_counts`` realizes both rates as
    exact rounded counts instead of per-entity coin flips.
    """

    class_count: int
    class_sizes: tuple[int, ...]
    vocab_size: int = 50
    shared_vocab_size: int = 50
    overlap_rate: float = 0.2
    noise_rate: float = 0.0
    unlabeled_rate: float = 0.0
    desc_len: tuple[int, int] = (6, 12)
    exact_counts: bool = True
    seed: int = 0

    def validate(self) -> None:
        if self.class_count < 1 or len(self.class_sizes) != self.class_count:
            raise CorpusError("class_sizes must list one count per class")
        if any(c < 1 for c in self.class_sizes):
            raise CorpusError("class counts must be >= 1")
        if not 0.0 <= self.noise_rate < 1.0:
            raise CorpusError("noise_rate must be in [0,1)")
        if self.noise_rate > 0.0 and self.class_count < 2:
            raise CorpusError("label noise needs at least 2 classes")
        if not 0.0 <= self.unlabeled_rate <= 1.0:
            raise CorpusError("unlabeled_rate must be in [0,1]")
        if self.vocab_size < 1 or self.shared_vocab_size < 1:
            raise CorpusError("vocabulary sizes must be >= 1")
        lo, hi = self.desc_len
        if lo < 1 or hi < lo:
            raise CorpusError("desc_len must be (lo, hi) with 1 <= lo <= hi")
        if not 0.0 <= self.overlap_rate <= 1.0:
            raise CorpusError("overlap_rate must be in [0,1]")

    @classmethod
    def log_spaced(
        cls, class_count: int, min_count: int, max_count: int, **kwargs
    ) -> "SynthSpec":
        sizes = np.logspace(
            math.log10(min_count), math.log10(max_count), class_count
        )
        sizes = tuple(int(round(s)) for s in sizes)
        return cls(class_count=class_count, class_sizes=sizes, **kwargs)

    def class_ids(self) -> tuple[str, ...]:
        return tuple(f"class{c:02d}" for c in range(self.class_count))

    def taxonomy(self) -> Taxonomy:
        return Taxonomy.flat(self.class_ids())


def _class_stem(c: int) -> str:
    n = len(_SYLLABLES)
    stem = _SYLLABLES[c % n] + _SYLLABLES[(c * 7 + 3) % n] + _SYLLABLES[(c * 3 + 1) % n]
    return stem.capitalize()


def gen_synthetic(spec: SynthSpec) -> EntityCollection:
    """Generate the corpus; a pure function of the spec (bit-identical reruns)."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    class_ids = spec.class_ids()
    private = [
        [f"c{c:02d}w{j:03d}" for j in range(spec.vocab_size)]
        for c in range(spec.class_count)
    ]
    shared = [f"shw{j:03d}" for j in range(spec.shared_vocab_size)]
    lo, hi = spec.desc_len

    entities: list[Entity] = []
    known_positions: list[int] = []
    for c, size in enumerate(spec.class_sizes):
        stem = _class_stem(c)
        lengths = rng.integers(lo, hi + 1, size=size)
        shared_mask = rng.random(int(lengths.sum())) < spec.overlap_rate
        priv_idx = rng.integers(0, spec.vocab_size, size=int(lengths.sum()))
        shar_idx = rng.integers(0, spec.shared_vocab_size, size=int(lengths.sum()))
        if spec.exact_counts:
            n_unknown = int(round(spec.unlabeled_rate * size))
        else:
            n_unknown = int(rng.binomial(size, spec.unlabeled_rate))
        unknown_at = set(rng.permutation(size)[:n_unknown].tolist())
        cursor = 0
        for k in range(size):
            n_words = int(lengths[k])
            words = [
                shared[shar_idx[cursor + j]]
                if shared_mask[cursor + j]
                else private[c][priv_idx[cursor + j]]
                for j in range(n_words)
            ]
            cursor += n_words
            name = f"{stem}{k:05d}"
            sentence = f"{name} is {' '.join(words)} ."
            raw_text = sentence + f" More notes about {name}."
            tokens = (
                [(name, "nr"), ("is", "v")]
                + [(w, "n") for w in words]
                + [(".", "w")]
            )
            is_known = k not in unknown_at
            if is_known:
                known_positions.append(len(entities))
            entities.append(
                Entity(
                    id=f"{class_ids[c]}-{k:05d}",
                    name=name,
                    raw_text=raw_text,
                    tokens=tuple(tokens),
                    label=class_ids[c] if is_known else None,
                    audit_label=class_ids[c],
                )
            )

    # label noise over the known subset; true class kept in audit_label
    if spec.noise_rate > 0.0 and known_positions:
        n_known = len(known_positions)
        if spec.exact_counts:
            n_noisy = int(round(spec.noise_rate * n_known))
        else:
            n_noisy = int(rng.binomial(n_known, spec.noise_rate))
        victims = rng.permutation(n_known)[:n_noisy]
        for v in sorted(victims.tolist()):
            e = entities[known_positions[v]]
            true_idx = class_ids.index(e.audit_label)
            offset = int(rng.integers(1, spec.class_count))
            e.label = class_ids[(true_idx + offset) % spec.class_count]

    return EntityCollection(entities)
