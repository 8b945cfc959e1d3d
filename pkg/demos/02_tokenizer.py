"""Train the byte-level BPE tokenizer and inspect its code-specific behavior."""

from codepretrain import compression_ratio, ingest, train_tokenizer
from codepretrain.corpus import bundled_corpus_path


def main():
    records = list(ingest(bundled_corpus_path()))
    code_texts = [r.code for r in records]
    nl_texts = [r.docstring for r in records if r.docstring]

    code_tok = train_tokenizer(code_texts, vocab_size=1000, min_freq=2)
    nl_tok = train_tokenizer(nl_texts, vocab_size=1000, min_freq=2)
    print(f"code tokenizer: {code_tok.vocab_size} entries, {len(code_tok.merges)} merges")

    sample = "int total = count + 1; // sum"
    ids = code_tok.encode(sample)
    print(f"\nencode {sample!r}:")
    print(" ", [code_tok.token_for_id(i) for i in ids])
    assert code_tok.decode(ids) == sample

    # brackets are first-class vocabulary entries, never unknown escapes
    for ch in ("{", "}"):
        ids = code_tok.encode(ch, use_specials=False)
        print(f"{ch!r} -> single unit id {ids[0]}")

    # sentinel literals collapse to one reserved id each
    ids = code_tok.encode("x [MASK7] y")
    print(f"'[MASK7]' occupies one id: {sum(code_tok.is_special_id(i) for i in ids)} special id(s)")

    report = compression_ratio(code_tok, nl_tok, code_texts)
    print(
        f"\ncode-trained vs NL-trained tokenizer on code: mean length ratio "
        f"{report.mean_ratio:.3f} (a {1 - report.mean_ratio:.0%} reduction)"
    )


if __name__ == "__main__":
    main()
