"""Build all four pre-training objectives for one bimodal document."""

import numpy as np

from codepretrain import (
    build_dual_pair,
    build_it,
    build_mip,
    build_msp,
    ingest,
    load_lexers,
    normalize,
    sample_spans,
    train_tokenizer,
)
from codepretrain.corpus import RawRecord, bundled_corpus_path


def show(tokenizer, title, instance):
    print(f"\n{title}")
    print("  source:", " ".join(tokenizer.token_for_id(i) for i in instance.source_ids))
    if instance.target_ids:
        print("  target:", " ".join(tokenizer.token_for_id(i) for i in instance.target_ids))
    if instance.tag_labels is not None:
        print("  tags:  ", "".join(str(t) for t in instance.tag_labels))


def main():
    lexers = load_lexers()
    records = list(ingest(bundled_corpus_path()))
    tokenizer = train_tokenizer(
        [r.code for r in records] + [r.docstring for r in records if r.docstring],
        vocab_size=800,
        min_freq=2,
    )

    record = RawRecord(
        code="int clamp(int value, int limit) { if (value > limit) { value = limit; } return value; }",
        language="mini",
        docstring="clamp a value to a limit",
    )
    doc = normalize(record, lexers["mini"])
    print("document words:", list(doc.nl_tokens) + list(doc.code_tokens))

    rng = np.random.default_rng(4)
    words = len(doc.nl_tokens) + len(doc.code_tokens)
    plan = sample_spans(words, rate=0.15, rng=rng)
    print("span plan:", plan.spans, f"({plan.masked_words} of {words} words masked)")

    show(tokenizer, "span masking (encoder sees holes, decoder refills them):",
         build_msp(doc, tokenizer, plan))
    show(tokenizer, "identifier tagging (binary label per code subword):",
         build_it(doc, tokenizer))
    show(tokenizer, "identifier masking (one sentinel per distinct name):",
         build_mip(doc, tokenizer))
    nl2pl, pl2nl = build_dual_pair(doc, tokenizer)
    show(tokenizer, "dual generation, NL -> code:", nl2pl)
    show(tokenizer, "dual generation, code -> NL:", pl2nl)


if __name__ == "__main__":
    main()
