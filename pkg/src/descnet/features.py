"""Input channels and the shared embedding table.

The classifier consumes two channels: the entity name as a character
sequence bracketed by <start>/<end>, and the description as a word
sequence with all occurrences of the name removed (a «title»-wrapped
name moves to the name channel, marks included). One vocabulary covers
words and characters, so a single-character word and the same character
inside a name resolve to the same embedding row.

Tokens absent from a pretrained vector file get a deterministic hashed
vector (a pure function of token and oov_seed). Tokens absent from the
vocabulary itself are a caller error at channelize time: the pipeline
builds its vocabulary over every prepared entity, so the case cannot
arise internally.
"""

from __future__ import annotations

import hashlib
import unicodedata
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import Entity

PAD = "<pad>"
START = "<start>"
END = "<end>"
SPECIALS = (PAD, START, END)
TITLE_OPEN = "«"
TITLE_CLOSE = "»"

_JOINERS = {"‍", "‌"} | {chr(c) for c in range(0xFE00, 0xFE10)}


class FeatureError(ValueError):
    """Bad channel input or embedding file."""


@dataclass(frozen=True)
class FeatureConfig:
    l_name: int = 16
    l_desc: int = 64
    pos_enabled: bool = True
    d_pos: int = 25
    embedding_dim: int = 200  # used when no pretrained file supplies D
    oov_seed: int = 0

    def validate(self) -> None:
        if self.l_name < 3:
            raise FeatureError("l_name must fit <start>, one char, <end>")
        if self.l_desc < 1 or self.d_pos < 1 or self.embedding_dim < 1:
            raise FeatureError("channel limits and dims must be positive")


def graphemes(text: str) -> list[str]:
    """Approximate grapheme clusters: combining marks and joiners attach
    to the preceding character. CJK characters are single clusters."""
    clusters: list[str] = []
    for ch in text:
        if clusters and (unicodedata.combining(ch) or ch in _JOINERS):
            clusters[-1] += ch
        else:
            clusters.append(ch)
    return clusters


# ---------------------------------------------------------------------------
# vocabulary


class Vocabulary:
    """Shared token->index map (words and characters) plus a POS-tag map.

    Index 0 is always <pad>; indices are contiguous in insertion order.
    """

    def __init__(self) -> None:
        self.token_index: dict[str, int] = {t: i for i, t in enumerate(SPECIALS)}
        self.pos_index: dict[str, int] = {PAD: 0}

    def add_token(self, token: str) -> int:
        idx = self.token_index.get(token)
        if idx is None:
            idx = len(self.token_index)
            self.token_index[token] = idx
        return idx

    def add_pos(self, tag: str) -> int:
        idx = self.pos_index.get(tag)
        if idx is None:
            idx = len(self.pos_index)
            self.pos_index[tag] = idx
        return idx

    def index_of(self, token: str) -> int:
        try:
            return self.token_index[token]
        except KeyError:
            raise FeatureError(
                f"token {token!r} not in vocabulary; build the vocabulary over "
                "every entity that will be channelized"
            ) from None

    def pos_of(self, tag: Optional[str]) -> int:
        if tag is None:
            return 0
        try:
            return self.pos_index[tag]
        except KeyError:
            raise FeatureError(f"POS tag {tag!r} not in vocabulary") from None

    @property
    def n_tokens(self) -> int:
        return len(self.token_index)

    @property
    def n_pos(self) -> int:
        return len(self.pos_index)

    def tokens_in_order(self) -> list[str]:
        return sorted(self.token_index, key=self.token_index.__getitem__)

    def pos_in_order(self) -> list[str]:
        return sorted(self.pos_index, key=self.pos_index.__getitem__)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for tok in self.tokens_in_order():
            h.update(tok.encode("utf-8") + b"\x00")
        h.update(b"\x01")
        for tag in self.pos_in_order():
            h.update(tag.encode("utf-8") + b"\x00")
        return h.hexdigest()


# ---------------------------------------------------------------------------
# embedding table


def oov_vector(token: str, oov_seed: int, dim: int) -> np.ndarray:
    """Deterministic stand-in row for a token without a pretrained vector."""
    digest = hashlib.sha256(f"{oov_seed}:{token}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return rng.uniform(-0.25, 0.25, dim)


@dataclass
class EmbeddingTable:
    """Known token vectors plus the deterministic OOV fallback.

    ``matrix`` holds the known rows (specials first, <pad> all-zero);
    ``vector`` answers for any token. ``pos_matrix`` is attached later
    by the model init when POS features are enabled.
    """

    tokens: dict[str, int]
    matrix: np.ndarray
    oov_seed: int = 0
    trainable: bool = True
    pos_matrix: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def vector(self, token: str) -> np.ndarray:
        idx = self.tokens.get(token)
        if idx is not None:
            return self.matrix[idx]
        if token == PAD:
            return np.zeros(self.dim)
        return oov_vector(token, self.oov_seed, self.dim)

    def for_vocab(self, vocab: Vocabulary) -> np.ndarray:
        """Embedding matrix aligned to a vocabulary (<pad> row zero)."""
        out = np.empty((vocab.n_tokens, self.dim))
        for token, idx in vocab.token_index.items():
            out[idx] = 0.0 if token == PAD else self.vector(token)
        return out

    @classmethod
    def seeded(cls, dim: int, oov_seed: int = 0, trainable: bool = True) -> "EmbeddingTable":
        """Table with no known rows: every lookup is the OOV fallback."""
        tokens = {PAD: 0}
        matrix = np.zeros((1, dim))
        return cls(tokens=tokens, matrix=matrix, oov_seed=oov_seed, trainable=trainable)


def load_pretrained(path, oov_seed: int = 0) -> EmbeddingTable:
    """Read a plain-text vector file: header "V D", then V rows of
    token followed by D numbers. Specials are prepended; <pad> is zero."""
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise FeatureError(f"{path}:1: header must be 'V D'")
        try:
            v_count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise FeatureError(f"{path}:1: header must be two integers") from None
        if v_count < 0 or dim < 1:
            raise FeatureError(f"{path}:1: bad header values")
        tokens: dict[str, int] = {t: i for i, t in enumerate(SPECIALS)}
        rows = [np.zeros(dim), oov_vector(START, oov_seed, dim), oov_vector(END, oov_seed, dim)]
        for lineno in range(2, v_count + 2):
            line = fh.readline()
            if not line:
                raise FeatureError(f"{path}:{lineno}: expected {v_count} vector rows")
            parts = line.split()
            if len(parts) != dim + 1:
                raise FeatureError(
                    f"{path}:{lineno}: expected token + {dim} numbers, got {len(parts) - 1}"
                )
            token = parts[0]
            try:
                vec = np.array([float(x) for x in parts[1:]])
            except ValueError:
                raise FeatureError(f"{path}:{lineno}: non-numeric vector entry") from None
            if token not in tokens:
                tokens[token] = len(rows)
                rows.append(vec)
    return EmbeddingTable(tokens=tokens, matrix=np.vstack(rows), oov_seed=oov_seed)


def build_pos_matrix(n_tags: int, d_pos: int, seed: int) -> np.ndarray:
    """POS embedding learned from scratch; row 0 (<pad>) stays zero."""
    rng = np.random.default_rng(seed)
    out = rng.uniform(-0.25, 0.25, (n_tags, d_pos))
    out[0] = 0.0
    return out


# ---------------------------------------------------------------------------
# channels


def name_channel(name: str, l_name: int = 16) -> list[str]:
    """[<start>, c1..ck, <end>], truncated to l_name - 2 characters."""
    if not name:
        raise FeatureError("empty entity name")
    chars = graphemes(name)[: l_name - 2]
    return [START, *chars, END]


def whitespace_tokenize(text: str) -> tuple[tuple[str, Optional[str]], ...]:
    return tuple((w, None) for w in text.split())


@dataclass(frozen=True)
class DescChannel:
    words: tuple[str, ...]
    pos: tuple[Optional[str], ...]
    moved_title: Optional[str]


def description_channel(
    name: str,
    description: str,
    tokens: Optional[Sequence[tuple[str, Optional[str]]]] = None,
    tokenizer=whitespace_tokenize,
) -> DescChannel:
    """Word sequence for the description channel.

    Removes every occurrence of the name's token sequence. A name
    wrapped in title marks («name», as one token or as mark-name-mark
    tokens) is removed too and handed back as moved_title so the name
    channel can carry it, marks included.
    """
    toks = tuple(tokens) if tokens is not None else tokenizer(description)
    name_toks = tuple(w for w, _ in tokenizer(name))
    marked_single = TITLE_OPEN + name + TITLE_CLOSE
    marked_run = (TITLE_OPEN, *name_toks, TITLE_CLOSE)

    words: list[str] = []
    pos: list[Optional[str]] = []
    moved_title: Optional[str] = None
    i = 0
    n = len(toks)

    def run_matches(at: int, pattern: tuple[str, ...]) -> bool:
        if not pattern or at + len(pattern) > n:
            return False
        return all(toks[at + j][0] == pattern[j] for j in range(len(pattern)))

    while i < n:
        if toks[i][0] == marked_single:
            moved_title = marked_single
            i += 1
            continue
        if run_matches(i, marked_run):
            moved_title = marked_single
            i += len(marked_run)
            continue
        if run_matches(i, name_toks):
            i += len(name_toks)
            continue
        words.append(toks[i][0])
        pos.append(toks[i][1])
        i += 1
    return DescChannel(tuple(words), tuple(pos), moved_title)


@dataclass
class ChannelInput:
    name_ids: np.ndarray  # (l_name,) int64, <pad>-padded
    desc_ids: np.ndarray  # (l_desc,) int64
    desc_pos_ids: Optional[np.ndarray]  # (l_desc,) int64 or None
    valid_name_len: int
    valid_desc_len: int


def _pad(ids: list[int], length: int) -> np.ndarray:
    out = np.zeros(length, dtype=np.int64)
    out[: len(ids)] = ids
    return out


def channelize(entity: Entity, vocab: Vocabulary, config: FeatureConfig) -> ChannelInput:
    """Map an entity with a description to padded index sequences."""
    if entity.description is None:
        raise FeatureError(f"entity {entity.id!r} has no description")
    desc = description_channel(entity.name, entity.description, entity.tokens)
    name_source = desc.moved_title if desc.moved_title is not None else entity.name
    name_toks = name_channel(name_source, config.l_name)
    name_ids = [vocab.index_of(t) for t in name_toks]

    words = desc.words[: config.l_desc]
    tags = desc.pos[: config.l_desc]
    desc_ids = [vocab.index_of(w) for w in words]
    pos_ids = None
    if config.pos_enabled:
        pos_ids = _pad([vocab.pos_of(t) for t in tags], config.l_desc)
    return ChannelInput(
        name_ids=_pad(name_ids, config.l_name),
        desc_ids=_pad(desc_ids, config.l_desc),
        desc_pos_ids=pos_ids,
        valid_name_len=len(name_ids),
        valid_desc_len=len(desc_ids),
    )


def build_vocabulary(entities: Iterable[Entity], config: FeatureConfig) -> Vocabulary:
    """Vocabulary over everything the channels will emit, in entity order."""
    vocab = Vocabulary()
    for e in entities:
        if e.description is None:
            continue
        desc = description_channel(e.name, e.description, e.tokens)
        name_source = desc.moved_title if desc.moved_title is not None else e.name
        for t in name_channel(name_source, config.l_name):
            vocab.add_token(t)
        for w in desc.words[: config.l_desc]:
            vocab.add_token(w)
        if config.pos_enabled:
            for tag in desc.pos[: config.l_desc]:
                if tag is not None:
                    vocab.add_pos(tag)
    return vocab
