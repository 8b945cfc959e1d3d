from __future__ import annotations

import numpy as np
import pytest

from codepretrain import objectives as obj
from codepretrain import synth
from codepretrain.corpus import CodeDocument


def _doc(code_tokens, labels, nl=(), language="mini"):
    return CodeDocument(tuple(nl), tuple(code_tokens), language, tuple(labels))


def _tokens(tokenizer, ids):
    return [tokenizer.token_for_id(i) for i in ids]


# -- span planning -----------------------------------------------------------


def test_budget_twenty_words():
    plan = obj.sample_spans(20, 0.15, np.random.default_rng(0))
    assert plan.masked_words == 3


def test_rate_zero_no_spans():
    plan = obj.sample_spans(50, 0.0, np.random.default_rng(0))
    assert plan.spans == ()


def test_num_words_zero():
    assert obj.sample_spans(0, 0.15, np.random.default_rng(0)).spans == ()


def test_round_half_up_budget():
    # 0.15 * 10 = 1.5 rounds up to 2
    plan = obj.sample_spans(10, 0.15, np.random.default_rng(1))
    assert plan.masked_words == 2


def test_rate_bounds_checked():
    with pytest.raises(ValueError):
        obj.sample_spans(10, 1.5, np.random.default_rng(0))
    with pytest.raises(ValueError):
        obj.sample_spans(-1, 0.5, np.random.default_rng(0))


def test_min_budget_forces_one_span():
    plan = obj.sample_spans(2, 0.15, np.random.default_rng(0), min_budget=1)
    assert plan.masked_words == 1


def test_span_structure_fuzz():
    rng = np.random.default_rng(7)
    for _ in range(500):
        num_words = int(rng.integers(0, 150))
        rate = float(rng.choice([0.0, 0.1, 0.15, 0.3, 0.5, 1.0]))
        plan = obj.sample_spans(num_words, rate, rng)
        assert plan.masked_words == obj.round_half_up(rate * num_words)
        prev_end = -1
        for start, length in plan.spans:
            assert 1 <= length <= 5
            assert start > prev_end
            assert start + length <= num_words
            prev_end = start + length - 1


def test_span_statistics_quick():
    rng = np.random.default_rng(3)
    masked = spans = 0
    for _ in range(3000):
        plan = obj.sample_spans(100, 0.15, rng)
        masked += plan.masked_words
        spans += len(plan.spans)
    assert masked / (100 * 3000) == pytest.approx(0.15, abs=1e-9)
    assert 2.9 <= masked / spans <= 3.1


def test_seeded_plan_reproducible():
    a = obj.sample_spans(80, 0.15, seed=11)
    b = obj.sample_spans(80, 0.15, seed=11)
    assert a == b


# -- span corruption ---------------------------------------------------------


def test_msp_four_word_example(tokenizer):
    doc = _doc(["a", "b", "c", "d"], [1, 1, 1, 1])
    plan = obj.SpanPlan(spans=((1, 2),), corruption_rate=0.5)
    inst = obj.build_msp(doc, tokenizer, plan)
    enc = lambda w: tokenizer.encode(w, use_specials=False)
    assert list(inst.source_ids) == [
        tokenizer.cls_id,
        tokenizer.sep_id,
        *enc("a"),
        tokenizer.mask_id(0),
        *enc("d"),
        tokenizer.sep_id,
    ]
    assert list(inst.target_ids) == [
        tokenizer.mask_id(0),
        *enc("b"),
        *enc("c"),
        tokenizer.sep_id,
    ]


def test_msp_empty_plan_is_identity(tokenizer):
    doc = _doc(["a", "b"], [1, 1], nl=("hi",))
    inst = obj.build_msp(doc, tokenizer, obj.SpanPlan((), 0.0))
    assert inst.target_ids == ()
    assert inst.source_ids[0] == tokenizer.cls_id
    assert tokenizer.mask_id(0) not in inst.source_ids


def test_msp_sentinels_strictly_increasing(tokenizer):
    doc = _doc(list("abcdefghij"), [1] * 10)
    plan = obj.SpanPlan(spans=((1, 2), (5, 1), (8, 2)), corruption_rate=0.5)
    inst = obj.build_msp(doc, tokenizer, plan)
    src_sentinels = [tokenizer.sentinel_index(i) for i in inst.source_ids
                     if tokenizer.sentinel_index(i) is not None]
    tgt_sentinels = [tokenizer.sentinel_index(i) for i in inst.target_ids
                     if tokenizer.sentinel_index(i) is not None]
    assert src_sentinels == [0, 1, 2]
    assert tgt_sentinels == [0, 1, 2]


def test_msp_span_outside_doc_rejected(tokenizer):
    doc = _doc(["a", "b"], [1, 1])
    with pytest.raises(ValueError):
        obj.build_msp(doc, tokenizer, obj.SpanPlan(((1, 5),), 0.5))


def test_msp_sentinel_exhaustion(tokenizer):
    doc = _doc(["x"] * 400, [1] * 400)
    spans = tuple((3 * i, 1) for i in range(101))
    with pytest.raises(obj.SentinelExhaustedError):
        obj.build_msp(doc, tokenizer, obj.SpanPlan(spans, 0.5))


def test_msp_boundary_span_splits(tokenizer):
    doc = _doc(["c1", "c2"], [1, 1], nl=("w1", "w2"))
    # one span covering the last NL word and the first code token
    plan = obj.SpanPlan(spans=((1, 2),), corruption_rate=0.5)
    inst = obj.build_msp(doc, tokenizer, plan)
    sep_positions = [i for i, t in enumerate(inst.source_ids) if t == tokenizer.sep_id]
    m0 = inst.source_ids.index(tokenizer.mask_id(0))
    m1 = inst.source_ids.index(tokenizer.mask_id(1))
    assert m0 < sep_positions[0] < m1  # separator survives between the halves
    ref = obj.build_msp(doc, tokenizer, obj.SpanPlan((), 0.0))
    assert obj.splice_msp(inst, tokenizer) == list(ref.source_ids)


def test_msp_reconstruction_fuzz_small(tokenizer, lexers):
    rng = np.random.default_rng(21)
    for i in range(300):
        doc = synth.random_document(rng, lexers, "mini")
        words = len(doc.nl_tokens) + len(doc.code_tokens)
        plan = obj.sample_spans(words, 0.15, rng, min_budget=1)
        inst = obj.build_msp(doc, tokenizer, plan)
        ref = obj.build_msp(doc, tokenizer, obj.SpanPlan((), 0.0))
        assert obj.splice_msp(inst, tokenizer) == list(ref.source_ids)


# -- identifier tagging ------------------------------------------------------


def test_it_projects_labels_to_subwords(tokenizer):
    # find a code token that splits into at least two subwords
    multi = None
    for cand in ("responseBuffer", "total_count9", "zqx"):
        if len(tokenizer.encode(cand, use_specials=False)) >= 2:
            multi = cand
            break
    assert multi is not None
    n = len(tokenizer.encode(multi, use_specials=False))
    doc = _doc([multi, ";"], [1, 0])
    inst = obj.build_it(doc, tokenizer)
    assert inst.tag_labels == (1,) * n + (0,)


def test_it_all_zero_labels(tokenizer):
    doc = _doc(["int", ";"], [0, 0])
    assert obj.build_it(doc, tokenizer).tag_labels == (0, 0)


def test_it_alignment_matches_code_segment(tokenizer, lexers):
    rng = np.random.default_rng(2)
    for _ in range(50):
        doc = synth.random_document(rng, lexers, "mini")
        inst = obj.build_it(doc, tokenizer)
        code_len = sum(
            len(tokenizer.encode(t, use_specials=False)) for t in doc.code_tokens
        )
        assert len(inst.tag_labels) == code_len
        assert inst.objective == obj.IT
        assert inst.target_ids == ()


def test_it_keywords_zero_identifiers_one(tokenizer, lexers, mini_lexer):
    from codepretrain.corpus import RawRecord, normalize

    doc = normalize(RawRecord(code="if (count) return count;", language="mini"), mini_lexer)
    inst = obj.build_it(doc, tokenizer)
    # walk tag labels token by token
    pos = 0
    for token, label in zip(doc.code_tokens, doc.identifier_labels):
        n = len(tokenizer.encode(token, use_specials=False))
        assert set(inst.tag_labels[pos : pos + n]) == {label}
        pos += n


# -- identifier masking ------------------------------------------------------


def test_mip_shared_sentinel_example(tokenizer):
    doc = _doc(["a", "=", "a", "+", "b"], [1, 0, 1, 0, 1])
    inst = obj.build_mip(doc, tokenizer)
    enc = lambda w: tokenizer.encode(w, use_specials=False)
    assert list(inst.source_ids) == [
        tokenizer.cls_id,
        tokenizer.sep_id,
        tokenizer.mask_id(0),
        *enc("="),
        tokenizer.mask_id(0),
        *enc("+"),
        tokenizer.mask_id(1),
        tokenizer.sep_id,
    ]
    assert list(inst.target_ids) == [
        tokenizer.mask_id(0),
        *enc("a"),
        tokenizer.mask_id(1),
        *enc("b"),
        tokenizer.sep_id,
    ]


def test_mip_single_identifier(tokenizer):
    doc = _doc(["x", ";"], [1, 0])
    inst = obj.build_mip(doc, tokenizer)
    assert sum(1 for i in inst.source_ids if i == tokenizer.mask_id(0)) == 1
    segs = obj.parse_sentinel_segments(inst.target_ids, tokenizer)
    assert [s[0] for s in segs] == [0]


def test_mip_zero_identifiers_skip_signal(tokenizer):
    doc = _doc(["return", ";"], [0, 0])
    with pytest.raises(obj.NoIdentifiersError):
        obj.build_mip(doc, tokenizer)


def test_mip_sentinel_exhaustion(tokenizer):
    names = [f"v{i}" for i in range(101)]
    doc = _doc(names, [1] * 101)
    with pytest.raises(obj.SentinelExhaustedError):
        obj.build_mip(doc, tokenizer)


def test_mip_consistency_fuzz_small(tokenizer, lexers):
    rng = np.random.default_rng(5)
    checked = 0
    for _ in range(300):
        doc = synth.random_document(rng, lexers, "mini")
        if not any(doc.identifier_labels):
            continue
        inst = obj.build_mip(doc, tokenizer)
        segs = obj.parse_sentinel_segments(inst.target_ids, tokenizer)
        indices = [s[0] for s in segs]
        assert indices == sorted(set(indices)), "target sentinels must appear exactly once"
        ident_order = []
        for token, label in zip(doc.code_tokens, doc.identifier_labels):
            if label and token not in ident_order:
                ident_order.append(token)
        assert len(segs) == len(ident_order)
        by_index = dict(segs)
        pos = 0
        for token, label in zip(doc.code_tokens, doc.identifier_labels):
            if label:
                j = ident_order.index(token)
                assert by_index[j] == tokenizer.encode(token, use_specials=False)
        checked += 1
    assert checked > 100


# -- dual generation ---------------------------------------------------------


def test_dual_pair_reverses_payloads(tokenizer):
    doc = _doc(["int", "a", ";"], [0, 1, 0], nl=("store", "it"), language="java")
    nl2pl, pl2nl = obj.build_dual_pair(doc, tokenizer)
    assert nl2pl.objective == obj.DUAL_NL2PL
    assert pl2nl.objective == obj.DUAL_PL2NL
    # payload of one source is the other's target (minus tags/cls/sep framing)
    assert nl2pl.source_ids[2:-1] == pl2nl.target_ids[:-1]
    assert pl2nl.source_ids[2:-1] == nl2pl.target_ids[:-1]


def test_dual_pair_language_ids(tokenizer):
    doc = _doc(["int", "a", ";"], [0, 1, 0], nl=("store",), language="java")
    nl2pl, pl2nl = obj.build_dual_pair(doc, tokenizer)
    assert nl2pl.source_ids[1] == tokenizer.language_id("en")
    assert pl2nl.source_ids[1] == tokenizer.language_id("java")


def test_dual_unimodal_rejected(tokenizer):
    doc = _doc(["int", "a", ";"], [0, 1, 0])
    with pytest.raises(obj.UnimodalDocumentError):
        obj.build_dual_pair(doc, tokenizer)


def test_dual_counts(bundled_docs, tokenizer):
    bimodal = sum(1 for d in bundled_docs if d.is_bimodal)
    instances = obj.build_dual_instances(bundled_docs, tokenizer)
    assert len(instances) == 2 * bimodal


# -- task choice and pipeline ------------------------------------------------


def test_pick_task_membership_and_reproducibility():
    rng = np.random.default_rng(0)
    assert obj.pick_denoising_task(rng) in obj.DENOISING_TASKS
    a = [obj.pick_denoising_task(np.random.default_rng(4)) for _ in range(10)]
    b = [obj.pick_denoising_task(np.random.default_rng(4)) for _ in range(10)]
    assert a == b


def test_pick_task_equal_probability():
    rng = np.random.default_rng(8)
    n = 300_000
    counts = {t: 0 for t in obj.DENOISING_TASKS}
    for _ in range(n):
        counts[obj.pick_denoising_task(rng)] += 1
    for t in obj.DENOISING_TASKS:
        assert abs(counts[t] / n - 1 / 3) < 0.01


def test_build_denoising_instances_deterministic(bundled_docs, tokenizer):
    a = obj.build_denoising_instances(bundled_docs[:40], tokenizer, seed=6)
    b = obj.build_denoising_instances(bundled_docs[:40], tokenizer, seed=6)
    assert a == b
    assert {i.objective for i in a} <= set(obj.DENOISING_TASKS)


def test_identifier_less_docs_fall_back_to_spans(tokenizer):
    docs = [_doc(["return", ";"], [0, 0]) for _ in range(30)]
    instances = obj.build_denoising_instances(docs, tokenizer, seed=0)
    assert all(i.objective in (obj.MSP, obj.IT) for i in instances)


def test_instance_file_roundtrip(bundled_docs, tokenizer, tmp_path):
    instances = obj.build_denoising_instances(bundled_docs[:30], tokenizer, seed=1)
    path = tmp_path / "inst.jsonl"
    obj.write_instances(instances, path)
    assert list(obj.read_instances(path)) == instances


def test_clip_document():
    doc = _doc([str(i) for i in range(10)], [0] * 10, nl=tuple("abcdef"))
    clipped = obj.clip_document(doc, max_nl=3, max_code=4)
    assert len(clipped.nl_tokens) == 3
    assert len(clipped.code_tokens) == 4
    assert len(clipped.identifier_labels) == 4


def test_clip_document_to_subwords(tokenizer):
    words = ["responseBuffer"] * 6
    per_word = len(tokenizer.encode(words[0], use_specials=False))
    doc = _doc(words, [1] * 6)
    clipped = obj.clip_document_to_subwords(doc, tokenizer, 0, per_word * 3 + 1)
    assert len(clipped.code_tokens) == 3  # whole words only, never mid-word
    assert clipped.identifier_labels == (1, 1, 1)


def test_built_instances_respect_length_caps(bundled_docs, tokenizer):
    max_src, max_tgt = 160, 64
    denoise = obj.build_denoising_instances(
        bundled_docs, tokenizer, seed=4, max_src_len=max_src, max_tgt_len=max_tgt
    )
    dual = obj.build_dual_instances(
        bundled_docs, tokenizer, max_src_len=max_src, max_tgt_len=max_tgt
    )
    for inst in denoise + dual:
        assert len(inst.source_ids) <= max_src
        assert len(inst.target_ids) <= max_tgt
