"""Byte-level BPE subword tokenizer trained from scratch.

Every byte value is a base vocabulary unit, so any UTF-8 text is encodable
and ``decode(encode(t)) == t`` holds exactly.  Reserved special tokens
([PAD], [CLS], [SEP], [MASK0]..[MASK99], plus language-id tokens) occupy the
lowest id slots and are never produced by merges.

Pre-tokenization splits raw text into runs of letters/underscores, digits,
whitespace, and other symbols; merges never cross those boundaries.  Bytes
are spelled with the usual printable byte alphabet (a bijection from byte
values onto printable code points) so vocab and merges serialize as plain
text lines.
"""

from __future__ import annotations

import json
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

FORMAT_VERSION = 1

PAD, CLS, SEP = "[PAD]", "[CLS]", "[SEP]"
NUM_MASK_TOKENS = 100
MASK_TOKENS = tuple(f"[MASK{i}]" for i in range(NUM_MASK_TOKENS))

_PRETOKEN_RE = re.compile(r"[A-Za-z_]+|[0-9]+|\s+|[^A-Za-z0-9_\s]+")


class TrainingDataError(ValueError):
    """The training corpus is empty or the configuration cannot fit."""


class DecodeIdError(ValueError):
    """An id passed to decode is outside the vocabulary."""


def default_language_tags() -> list[str]:
    from .lexer import builtin_language_tags

    return sorted(builtin_language_tags() + ["en"])


def default_specials(language_tags: Iterable[str] | None = None) -> list[str]:
    """[PAD], [CLS], [SEP], the 100 sentinels, then one <tag> id per language."""
    tags = sorted(language_tags) if language_tags is not None else default_language_tags()
    return [PAD, CLS, SEP, *MASK_TOKENS, *(f"<{t}>" for t in tags)]


def _byte_alphabet() -> dict[int, str]:
    # Bijection byte value -> printable code point; printable ASCII maps to itself.
    visible = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("¡"), ord("¬") + 1))
        + list(range(ord("®"), ord("ÿ") + 1))
    )
    mapping = {b: chr(b) for b in visible}
    shift = 0
    for b in range(256):
        if b not in mapping:
            mapping[b] = chr(256 + shift)
            shift += 1
    return mapping


_BYTE_TO_CHAR = _byte_alphabet()
_CHAR_TO_BYTE = {c: b for b, c in _BYTE_TO_CHAR.items()}


def _to_printable(raw: bytes) -> str:
    return "".join(_BYTE_TO_CHAR[b] for b in raw)


def _to_bytes(printable: str) -> bytes:
    return bytes(_CHAR_TO_BYTE[c] for c in printable)


def is_printable_token(printable: str) -> bool:
    """A merge result is kept only if its bytes decode to UTF-8 text whose
    characters avoid Unicode category C*, newline and tab excepted."""
    try:
        text = _to_bytes(printable).decode("utf-8")
    except UnicodeDecodeError:
        return False
    for ch in text:
        if ch in ("\n", "\t"):
            continue
        if unicodedata.category(ch).startswith("C"):
            return False
    return True


def pretokenize(text: str) -> list[str]:
    """Split raw text into pre-tokens (printable byte-alphabet form)."""
    return [_to_printable(m.group(0).encode("utf-8")) for m in _PRETOKEN_RE.finditer(text)]


@dataclass(frozen=True)
class CompressionReport:
    mean_ratio: float
    ratios: tuple[float, ...]


class SubwordTokenizer:
    """Trained byte-level BPE vocabulary with merges and reserved specials."""

    def __init__(self, specials: list[str], merges: list[tuple[str, str]]):
        self._specials = list(specials)
        self._special_ids = {tok: i for i, tok in enumerate(self._specials)}
        if len(self._special_ids) != len(self._specials):
            raise ValueError("duplicate special tokens")
        self._merges = list(merges)
        self._id_to_token: list[str] = list(self._specials)
        self._id_to_token.extend(_BYTE_TO_CHAR[b] for b in range(256))
        for a, b in self._merges:
            self._id_to_token.append(a + b)
        self._token_to_id = {t: i for i, t in enumerate(self._id_to_token)}
        if len(self._token_to_id) != len(self._id_to_token):
            raise ValueError("vocabulary contains duplicate tokens")
        self._ranks = {pair: r for r, pair in enumerate(self._merges)}
        self._special_re = re.compile(
            "|".join(re.escape(s) for s in sorted(self._specials, key=len, reverse=True))
        )
        self._cache: dict[str, tuple[str, ...]] = {}

    # -- introspection ------------------------------------------------------

    @property
    def vocab_size(self) -> int:
        return len(self._id_to_token)

    @property
    def specials(self) -> list[str]:
        return list(self._specials)

    @property
    def merges(self) -> list[tuple[str, str]]:
        return list(self._merges)

    @property
    def pad_id(self) -> int:
        return self._special_ids[PAD]

    @property
    def cls_id(self) -> int:
        return self._special_ids[CLS]

    @property
    def sep_id(self) -> int:
        return self._special_ids[SEP]

    def mask_id(self, index: int) -> int:
        if not 0 <= index < NUM_MASK_TOKENS:
            raise ValueError(f"sentinel index out of range: {index}")
        return self._special_ids[MASK_TOKENS[index]]

    def sentinel_index(self, token_id: int) -> int | None:
        """Sentinel number when ``token_id`` is a [MASKi] id, else None."""
        if 0 <= token_id < len(self._specials):
            tok = self._specials[token_id]
            if tok.startswith("[MASK") and tok.endswith("]"):
                return int(tok[5:-1])
        return None

    def special_id(self, token: str) -> int:
        if token not in self._special_ids:
            raise KeyError(f"not a special token: {token!r}")
        return self._special_ids[token]

    def language_id(self, tag: str) -> int:
        return self.special_id(f"<{tag}>")

    def is_special_id(self, token_id: int) -> bool:
        return 0 <= token_id < len(self._specials)

    def token_for_id(self, token_id: int) -> str:
        if not 0 <= token_id < len(self._id_to_token):
            raise DecodeIdError(f"id out of range: {token_id}")
        return self._id_to_token[token_id]

    def id_for_token(self, token: str) -> int | None:
        return self._token_to_id.get(token)

    # -- encode / decode ----------------------------------------------------

    def _apply_merges(self, word: str) -> tuple[str, ...]:
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        symbols = list(word)
        while len(symbols) > 1:
            best_rank = None
            best_idx = -1
            for i in range(len(symbols) - 1):
                rank = self._ranks.get((symbols[i], symbols[i + 1]))
                if rank is not None and (best_rank is None or rank < best_rank):
                    best_rank = rank
                    best_idx = i
            if best_rank is None:
                break
            merged = symbols[best_idx] + symbols[best_idx + 1]
            # Merge every occurrence of this pair left to right.
            out: list[str] = []
            i = 0
            while i < len(symbols):
                if (
                    i + 1 < len(symbols)
                    and symbols[i] == self._merges[best_rank][0]
                    and symbols[i + 1] == self._merges[best_rank][1]
                ):
                    out.append(merged)
                    i += 2
                else:
                    out.append(symbols[i])
                    i += 1
            symbols = out
        result = tuple(symbols)
        self._cache[word] = result
        return result

    def encode(self, text: str, use_specials: bool = True) -> list[int]:
        """Encode UTF-8 text to ids; special literals become single ids when enabled."""
        ids: list[int] = []
        if use_specials and self._specials:
            pos = 0
            for m in self._special_re.finditer(text):
                ids.extend(self._encode_plain(text[pos:m.start()]))
                ids.append(self._special_ids[m.group(0)])
                pos = m.end()
            ids.extend(self._encode_plain(text[pos:]))
        else:
            ids.extend(self._encode_plain(text))
        return ids

    def _encode_plain(self, text: str) -> list[int]:
        ids: list[int] = []
        for word in pretokenize(text):
            for token in self._apply_merges(word):
                ids.append(self._token_to_id[token])
        return ids

    def decode(self, ids: Iterable[int]) -> str:
        """Inverse of encode on valid ids; exact on any encode output."""
        raw = bytearray()
        for token_id in ids:
            token = self.token_for_id(token_id)
            if self.is_special_id(token_id):
                raw.extend(token.encode("utf-8"))
            else:
                raw.extend(_to_bytes(token))
        return raw.decode("utf-8", errors="replace")

    # -- persistence --------------------------------------------------------

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        header = [
            f"#codepretrain-tokenizer v{FORMAT_VERSION}",
            "#pretokenizer: regex [A-Za-z_]+|[0-9]+|\\s+|[^A-Za-z0-9_\\s]+ on raw text",
            "#alphabet: 256 byte units in printable byte-alphabet spelling",
            "#specials: " + json.dumps(self._specials),
        ]
        with open(directory / "vocab.txt", "w", encoding="utf-8") as f:
            f.write("\n".join(header) + "\n")
            for token in self._id_to_token:
                f.write(token + "\n")
        with open(directory / "merges.txt", "w", encoding="utf-8") as f:
            f.write(f"#codepretrain-merges v{FORMAT_VERSION}\n")
            for a, b in self._merges:
                f.write(f"{a} {b}\n")

    @classmethod
    def load(cls, directory: str | Path) -> "SubwordTokenizer":
        directory = Path(directory)
        with open(directory / "vocab.txt", encoding="utf-8") as f:
            lines = f.read().split("\n")
        if not lines or not lines[0].startswith("#codepretrain-tokenizer v"):
            raise ValueError("not a tokenizer vocab file")
        specials: list[str] | None = None
        body_start = 0
        for i, line in enumerate(lines):
            if line.startswith("#specials: "):
                specials = json.loads(line[len("#specials: "):])
            if not line.startswith("#"):
                body_start = i
                break
        if specials is None:
            raise ValueError("vocab file is missing its specials header")
        merges: list[tuple[str, str]] = []
        with open(directory / "merges.txt", encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                a, b = line.split(" ")
                merges.append((a, b))
        tok = cls(specials, merges)
        stored = [ln for ln in lines[body_start:] if ln != ""]
        if stored != tok._id_to_token:
            raise ValueError("vocab file disagrees with merges file")
        return tok


def train(
    corpus: Iterable[str],
    vocab_size: int,
    min_freq: int = 3,
    specials: list[str] | None = None,
) -> SubwordTokenizer:
    """Learn a byte-level BPE vocabulary from an iterable of texts.

    Merge candidates must occur at least ``min_freq`` times and spell a
    printable token; among equal-frequency candidates the lexicographically
    smallest pair wins, so training is deterministic.
    """
    specials = list(specials) if specials is not None else default_specials()
    base = len(specials) + 256
    if vocab_size <= base:
        raise TrainingDataError(
            f"vocab_size must exceed specials + byte units ({base}), got {vocab_size}"
        )
    if min_freq < 1:
        raise TrainingDataError(f"min_freq must be >= 1, got {min_freq}")

    word_freq: Counter[str] = Counter()
    for text in corpus:
        word_freq.update(pretokenize(text))
    if not word_freq:
        raise TrainingDataError("training corpus is empty")

    segments: dict[str, list[str]] = {w: list(w) for w in word_freq}
    pair_counts: Counter[tuple[str, str]] = Counter()
    pair_words: dict[tuple[str, str], set[str]] = {}
    for word, symbols in segments.items():
        freq = word_freq[word]
        for pair in zip(symbols, symbols[1:]):
            pair_counts[pair] += freq
            pair_words.setdefault(pair, set()).add(word)

    special_set = set(specials)
    rejected: set[str] = set()
    merges: list[tuple[str, str]] = []

    def _acceptable(pair: tuple[str, str]) -> bool:
        merged = pair[0] + pair[1]
        if merged in rejected:
            return False
        if merged in special_set or not is_printable_token(merged):
            rejected.add(merged)
            return False
        return True

    while base + len(merges) < vocab_size:
        best: tuple[str, str] | None = None
        best_count = 0
        for pair, count in pair_counts.items():
            if count < min_freq or count < best_count:
                continue
            if count == best_count and best is not None and pair >= best:
                continue
            if _acceptable(pair):
                best = pair
                best_count = count
        if best is None:
            break
        merges.append(best)
        merged = best[0] + best[1]
        for word in list(pair_words.get(best, ())):
            freq = word_freq[word]
            symbols = segments[word]
            for pair in zip(symbols, symbols[1:]):
                pair_counts[pair] -= freq
                if pair_counts[pair] <= 0:
                    del pair_counts[pair]
                ws = pair_words.get(pair)
                if ws is not None:
                    ws.discard(word)
                    if not ws:
                        del pair_words[pair]
            out: list[str] = []
            i = 0
            while i < len(symbols):
                if i + 1 < len(symbols) and symbols[i] == best[0] and symbols[i + 1] == best[1]:
                    out.append(merged)
                    i += 2
                else:
                    out.append(symbols[i])
                    i += 1
            segments[word] = out
            for pair in zip(out, out[1:]):
                pair_counts[pair] += freq
                pair_words.setdefault(pair, set()).add(word)

    return SubwordTokenizer(specials, merges)


def compression_ratio(
    tokenizer_a: SubwordTokenizer,
    tokenizer_b: SubwordTokenizer,
    corpus: Iterable[str],
) -> CompressionReport:
    """Per-document length(encode_a)/length(encode_b) and its mean."""
    ratios: list[float] = []
    for text in corpus:
        na = len(tokenizer_a.encode(text, use_specials=False))
        nb = len(tokenizer_b.encode(text, use_specials=False))
        if nb == 0:
            continue
        ratios.append(na / nb)
    if not ratios:
        raise TrainingDataError("corpus is empty")
    return CompressionReport(mean_ratio=sum(ratios) / len(ratios), ratios=tuple(ratios))
