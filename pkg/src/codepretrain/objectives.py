"""Builders for the four pre-training objectives.

An input document is laid out as ``[CLS] nl words [SEP] code tokens [SEP]``.
Masking always operates on whole words (NL words and code lexemes), never
inside a word's subword run:

- span masking: disjoint whole-word spans are replaced by one sentinel each,
  and the decoder target lists ``sentinel, span tokens`` pairs in order;
- identifier tagging: the uncorrupted sequence plus one binary label per
  subword of the code segment;
- identifier masking: every occurrence of each distinct identifier is
  replaced by that identifier's own sentinel (many occurrences, one
  sentinel), and the target lists ``sentinel, identifier`` pairs once each;
- dual generation: a bimodal document yields one NL-to-code and one
  code-to-NL instance, each source prefixed with its language-id token.

Span plans mask exactly ``round(rate * num_words)`` words.  The number of
spans is chosen so the average span length is 3, and the span lengths are a
uniformly sampled composition of the budget into parts of 1..5.  Targets end
with [SEP], which doubles as the end-of-sequence marker.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .bpe import NUM_MASK_TOKENS, SubwordTokenizer
from .corpus import CodeDocument

MSP = "MSP"
IT = "IT"
MIP = "MIP"
DUAL_NL2PL = "DUAL_NL2PL"
DUAL_PL2NL = "DUAL_PL2NL"
FINETUNE = "FINETUNE"
OBJECTIVES = (MSP, IT, MIP, DUAL_NL2PL, DUAL_PL2NL, FINETUNE)
DENOISING_TASKS = (MSP, IT, MIP)

MIN_SPAN, MAX_SPAN = 1, 5
TARGET_MEAN_SPAN = 3

NL_LANGUAGE_TAG = "en"


class SentinelExhaustedError(ValueError):
    """More sentinels are needed than the tokenizer reserves."""


class NoIdentifiersError(ValueError):
    """Identifier masking is undefined for a document with no identifiers;
    callers fall back to span masking."""


class UnimodalDocumentError(ValueError):
    """Dual generation needs a document with an NL side."""


@dataclass(frozen=True)
class TrainingInstance:
    source_ids: tuple[int, ...]
    target_ids: tuple[int, ...]
    objective: str
    tag_labels: tuple[int, ...] | None = None
    control_code: str | None = None

    def to_dict(self) -> dict:
        d = {
            "source_ids": list(self.source_ids),
            "target_ids": list(self.target_ids),
            "objective": self.objective,
        }
        if self.tag_labels is not None:
            d["tag_labels"] = list(self.tag_labels)
        if self.control_code is not None:
            d["control_code"] = self.control_code
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingInstance":
        if d["objective"] not in OBJECTIVES:
            raise ValueError(f"unknown objective {d['objective']!r}")
        tags = d.get("tag_labels")
        return cls(
            source_ids=tuple(d["source_ids"]),
            target_ids=tuple(d["target_ids"]),
            objective=d["objective"],
            tag_labels=None if tags is None else tuple(tags),
            control_code=d.get("control_code"),
        )


@dataclass(frozen=True)
class SpanPlan:
    spans: tuple[tuple[int, int], ...]  # (start, length) over whole-word positions
    corruption_rate: float
    seed: int | None = None

    @property
    def masked_words(self) -> int:
        return sum(length for _, length in self.spans)


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


@lru_cache(maxsize=None)
def _compositions(total: int, parts: int) -> int:
    """Number of ways to write ``total`` as ``parts`` ordered lengths in 1..5."""
    if parts == 0:
        return 1 if total == 0 else 0
    if total < parts * MIN_SPAN or total > parts * MAX_SPAN:
        return 0
    return sum(_compositions(total - l, parts - 1) for l in range(MIN_SPAN, MAX_SPAN + 1))


def _sample_lengths(budget: int, num_spans: int, rng: np.random.Generator) -> list[int]:
    """Uniformly sample one composition of ``budget`` into spans of 1..5 words."""
    lengths: list[int] = []
    remaining = budget
    for slot in range(num_spans, 0, -1):
        weights = [_compositions(remaining - l, slot - 1) for l in range(MIN_SPAN, MAX_SPAN + 1)]
        total = sum(weights)
        pick = rng.random() * total
        acc = 0
        chosen = max(l for l, w in zip(range(MIN_SPAN, MAX_SPAN + 1), weights) if w > 0)
        for l, w in zip(range(MIN_SPAN, MAX_SPAN + 1), weights):
            acc += w
            if pick < acc:
                chosen = l
                break
        lengths.append(chosen)
        remaining -= chosen
    return lengths


def _sample_gaps(free: int, num_gaps: int, rng: np.random.Generator) -> list[int]:
    """Uniform weak composition of ``free`` into ``num_gaps`` nonnegative parts."""
    if num_gaps == 1:
        return [free]
    if free == 0:
        return [0] * num_gaps
    dividers = np.sort(rng.choice(free + num_gaps - 1, size=num_gaps - 1, replace=False))
    gaps = []
    prev = -1
    for d in dividers:
        gaps.append(int(d) - prev - 1)
        prev = int(d)
    gaps.append(free + num_gaps - 2 - prev)
    return gaps


def sample_spans(
    num_words: int,
    rate: float,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
    min_budget: int = 0,
) -> SpanPlan:
    """Plan disjoint whole-word mask spans covering round(rate * num_words) words.

    Spans are kept non-adjacent whenever enough unmasked words remain to
    separate them, so distinct sentinels stand for genuinely distinct spans.
    ``min_budget`` lets the instance pipeline force at least one masked word
    on very short documents where the budget would round to zero.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must be in [0, 1], got {rate}")
    if num_words < 0:
        raise ValueError(f"num_words must be nonnegative, got {num_words}")
    if rng is None:
        rng = np.random.default_rng(seed)
    budget = round_half_up(rate * num_words)
    budget = min(max(budget, min_budget), num_words)
    if budget == 0:
        return SpanPlan(spans=(), corruption_rate=rate, seed=seed)

    num_spans = round_half_up(budget / TARGET_MEAN_SPAN)
    num_spans = max(num_spans, math.ceil(budget / MAX_SPAN), 1)
    num_spans = min(num_spans, budget)
    lengths = _sample_lengths(budget, num_spans, rng)

    free = num_words - budget
    separators = num_spans - 1 if free >= num_spans - 1 else 0
    gaps = _sample_gaps(free - separators, num_spans + 1, rng)

    spans: list[tuple[int, int]] = []
    cursor = gaps[0]
    for i, length in enumerate(lengths):
        spans.append((cursor, length))
        cursor += length + gaps[i + 1]
        if i < num_spans - 1 and separators:
            cursor += 1
    return SpanPlan(spans=tuple(spans), corruption_rate=rate, seed=seed)


def _doc_words(doc: CodeDocument) -> tuple[list[str], int]:
    """All whole words of the document and the NL/code boundary index."""
    words = list(doc.nl_tokens) + list(doc.code_tokens)
    return words, len(doc.nl_tokens)


def _encode_words(words: Iterable[str], tokenizer: SubwordTokenizer) -> list[list[int]]:
    return [tokenizer.encode(w, use_specials=False) for w in words]


def _split_at_boundary(
    spans: Iterable[tuple[int, int]], boundary: int
) -> list[tuple[int, int]]:
    """Split any span straddling the NL/code boundary so the separator token
    between the segments survives corruption."""
    out: list[tuple[int, int]] = []
    for start, length in spans:
        end = start + length
        if start < boundary < end:
            out.append((start, boundary - start))
            out.append((boundary, end - boundary))
        else:
            out.append((start, length))
    return out


def build_msp(
    doc: CodeDocument, tokenizer: SubwordTokenizer, plan: SpanPlan
) -> TrainingInstance:
    """Span-corruption instance: masked source plus sentinel-delimited target."""
    words, boundary = _doc_words(doc)
    for start, length in plan.spans:
        if start < 0 or start + length > len(words):
            raise ValueError(f"span {(start, length)} exceeds document of {len(words)} words")
    spans = _split_at_boundary(plan.spans, boundary)
    if len(spans) > NUM_MASK_TOKENS:
        raise SentinelExhaustedError(f"{len(spans)} spans exceed {NUM_MASK_TOKENS} sentinels")

    word_ids = _encode_words(words, tokenizer)
    span_start = {start: (i, length) for i, (start, length) in enumerate(spans)}

    source: list[int] = [tokenizer.cls_id]
    target: list[int] = []

    def _emit_segment(lo: int, hi: int):
        pos = lo
        while pos < hi:
            if pos in span_start:
                index, length = span_start[pos]
                source.append(tokenizer.mask_id(index))
                target.append(tokenizer.mask_id(index))
                for w in range(pos, pos + length):
                    target.extend(word_ids[w])
                pos += length
            else:
                source.extend(word_ids[pos])
                pos += 1

    _emit_segment(0, boundary)
    source.append(tokenizer.sep_id)
    _emit_segment(boundary, len(words))
    source.append(tokenizer.sep_id)
    if spans:
        target.append(tokenizer.sep_id)
    return TrainingInstance(tuple(source), tuple(target), MSP)


def build_it(doc: CodeDocument, tokenizer: SubwordTokenizer) -> TrainingInstance:
    """Uncorrupted sequence plus per-subword identifier labels for the code segment."""
    source: list[int] = [tokenizer.cls_id]
    for w in doc.nl_tokens:
        source.extend(tokenizer.encode(w, use_specials=False))
    source.append(tokenizer.sep_id)
    tag_labels: list[int] = []
    for token, label in zip(doc.code_tokens, doc.identifier_labels):
        ids = tokenizer.encode(token, use_specials=False)
        source.extend(ids)
        tag_labels.extend([label] * len(ids))
    source.append(tokenizer.sep_id)
    return TrainingInstance(tuple(source), (), IT, tag_labels=tuple(tag_labels))


def build_mip(doc: CodeDocument, tokenizer: SubwordTokenizer) -> TrainingInstance:
    """Identifier-obfuscation instance: each distinct identifier gets one
    sentinel shared by all of its occurrences."""
    distinct: dict[str, int] = {}
    for token, label in zip(doc.code_tokens, doc.identifier_labels):
        if label == 1 and token not in distinct:
            distinct[token] = len(distinct)
    if not distinct:
        raise NoIdentifiersError("document has no identifier tokens")
    if len(distinct) > NUM_MASK_TOKENS:
        raise SentinelExhaustedError(
            f"{len(distinct)} distinct identifiers exceed {NUM_MASK_TOKENS} sentinels"
        )

    source: list[int] = [tokenizer.cls_id]
    for w in doc.nl_tokens:
        source.extend(tokenizer.encode(w, use_specials=False))
    source.append(tokenizer.sep_id)
    for token, label in zip(doc.code_tokens, doc.identifier_labels):
        if label == 1:
            source.append(tokenizer.mask_id(distinct[token]))
        else:
            source.extend(tokenizer.encode(token, use_specials=False))
    source.append(tokenizer.sep_id)

    target: list[int] = []
    for token, index in distinct.items():
        target.append(tokenizer.mask_id(index))
        target.extend(tokenizer.encode(token, use_specials=False))
    target.append(tokenizer.sep_id)
    return TrainingInstance(tuple(source), tuple(target), MIP)


def build_dual_pair(
    doc: CodeDocument, tokenizer: SubwordTokenizer
) -> tuple[TrainingInstance, TrainingInstance]:
    """NL-to-code and code-to-NL instances with language-id source prefixes."""
    if not doc.is_bimodal:
        raise UnimodalDocumentError("dual generation requires a bimodal document")
    nl_ids: list[int] = []
    for w in doc.nl_tokens:
        nl_ids.extend(tokenizer.encode(w, use_specials=False))
    pl_ids: list[int] = []
    for t in doc.code_tokens:
        pl_ids.extend(tokenizer.encode(t, use_specials=False))
    nl_tag = tokenizer.language_id(NL_LANGUAGE_TAG)
    pl_tag = tokenizer.language_id(doc.language)
    sep = tokenizer.sep_id
    nl2pl = TrainingInstance(
        (tokenizer.cls_id, nl_tag, *nl_ids, sep), (*pl_ids, sep), DUAL_NL2PL
    )
    pl2nl = TrainingInstance(
        (tokenizer.cls_id, pl_tag, *pl_ids, sep), (*nl_ids, sep), DUAL_PL2NL
    )
    return nl2pl, pl2nl


def pick_denoising_task(rng: np.random.Generator) -> str:
    """One of the three denoising objectives, each with probability 1/3."""
    return DENOISING_TASKS[rng.integers(len(DENOISING_TASKS))]


def parse_sentinel_segments(
    ids: Iterable[int], tokenizer: SubwordTokenizer
) -> list[tuple[int, list[int]]]:
    """Split a target-style sequence into (sentinel index, following ids) pairs.

    Ids before the first sentinel are dropped; a [SEP] ends the sequence.
    """
    segments: list[tuple[int, list[int]]] = []
    current: list[int] | None = None
    for token_id in ids:
        if token_id == tokenizer.sep_id:
            break
        index = tokenizer.sentinel_index(token_id)
        if index is not None:
            current = []
            segments.append((index, current))
        elif current is not None:
            current.append(token_id)
    return segments


def splice_msp(instance: TrainingInstance, tokenizer: SubwordTokenizer) -> list[int]:
    """Reinsert target spans at their sentinels; yields the uncorrupted ids."""
    segments = dict(parse_sentinel_segments(instance.target_ids, tokenizer))
    out: list[int] = []
    for token_id in instance.source_ids:
        index = tokenizer.sentinel_index(token_id)
        if index is not None:
            out.extend(segments.get(index, []))
        else:
            out.append(token_id)
    return out


def clip_document(doc: CodeDocument, max_nl: int, max_code: int) -> CodeDocument:
    """Length cap at whole-word granularity; a no-op for short documents."""
    if len(doc.nl_tokens) <= max_nl and len(doc.code_tokens) <= max_code:
        return doc
    return CodeDocument(
        nl_tokens=doc.nl_tokens[:max_nl],
        code_tokens=doc.code_tokens[:max_code],
        language=doc.language,
        identifier_labels=doc.identifier_labels[:max_code],
    )


def _words_within_budget(words: Iterable[str], tokenizer: SubwordTokenizer, budget: int) -> int:
    """Largest word-prefix length whose total subword count fits ``budget``."""
    kept = 0
    used = 0
    for w in words:
        used += len(tokenizer.encode(w, use_specials=False))
        if used > budget:
            break
        kept += 1
    return kept


def clip_document_to_subwords(
    doc: CodeDocument,
    tokenizer: SubwordTokenizer,
    max_nl_subwords: int,
    max_code_subwords: int,
) -> CodeDocument:
    """Drop trailing whole words until each segment fits its subword budget."""
    keep_nl = _words_within_budget(doc.nl_tokens, tokenizer, max_nl_subwords)
    keep_code = _words_within_budget(doc.code_tokens, tokenizer, max_code_subwords)
    if keep_nl == len(doc.nl_tokens) and keep_code == len(doc.code_tokens):
        return doc
    return CodeDocument(
        nl_tokens=doc.nl_tokens[:keep_nl],
        code_tokens=doc.code_tokens[:keep_code],
        language=doc.language,
        identifier_labels=doc.identifier_labels[:keep_code],
    )


def document_rng(global_seed: int, doc_index: int) -> np.random.Generator:
    """Per-document generator; output is independent of processing order."""
    return np.random.default_rng(np.random.SeedSequence([global_seed, doc_index]))


def build_denoising_instances(
    docs: Iterable[CodeDocument],
    tokenizer: SubwordTokenizer,
    rate: float = 0.15,
    seed: int = 0,
    max_src_len: int = 512,
    max_tgt_len: int = 256,
) -> list[TrainingInstance]:
    """One denoising instance per document, objective drawn per document.

    Documents are clipped at whole-word boundaries so sources fit
    ``max_src_len`` subword ids.  Documents without identifiers, and the rare
    identifier-heavy ones whose obfuscation target would overflow
    ``max_tgt_len``, fall back from identifier masking to span masking.
    """
    # [CLS] + two [SEP]s frame the source; NL takes at most half the payload
    # budget and code gets whatever NL leaves unused.
    payload = max_src_len - 3
    instances: list[TrainingInstance] = []
    for i, doc in enumerate(docs):
        doc = clip_document_to_subwords(doc, tokenizer, payload // 2, payload)
        nl_used = sum(len(tokenizer.encode(w, use_specials=False)) for w in doc.nl_tokens)
        doc = clip_document_to_subwords(doc, tokenizer, payload // 2, payload - nl_used)
        rng = document_rng(seed, i)
        task = pick_denoising_task(rng)
        if task == MIP:
            try:
                inst = build_mip(doc, tokenizer)
                if len(inst.target_ids) <= max_tgt_len:
                    instances.append(inst)
                    continue
                task = MSP
            except NoIdentifiersError:
                task = MSP
        if task == IT:
            instances.append(build_it(doc, tokenizer))
        else:
            words, _ = _doc_words(doc)
            plan = sample_spans(len(words), rate, rng, min_budget=1)
            instances.append(build_msp(doc, tokenizer, plan))
    return instances


def build_dual_instances(
    docs: Iterable[CodeDocument],
    tokenizer: SubwordTokenizer,
    max_src_len: int = 512,
    max_tgt_len: int = 256,
) -> list[TrainingInstance]:
    """Two instances per bimodal document; unimodal documents are skipped.

    Each segment appears once as a source payload and once as a target, so
    both segments are clipped to the smaller of the two budgets.
    """
    budget = min(max_src_len - 3, max_tgt_len - 1)
    instances: list[TrainingInstance] = []
    for doc in docs:
        if not doc.is_bimodal:
            continue
        doc = clip_document_to_subwords(doc, tokenizer, budget, budget)
        instances.extend(build_dual_pair(doc, tokenizer))
    return instances


def write_instances(instances: Iterable[TrainingInstance], path: str | Path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for inst in instances:
            f.write(json.dumps(inst.to_dict()) + "\n")
            count += 1
    return count


def read_instances(path: str | Path) -> Iterator[TrainingInstance]:
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                yield TrainingInstance.from_dict(json.loads(line))
