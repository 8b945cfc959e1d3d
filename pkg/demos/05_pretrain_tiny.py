"""Pre-train a tiny model on the bundled corpus and watch it refill spans.

Runs a short denoising phase followed by a short dual-generation phase,
then decodes a training instance to show what the model learned.
Takes a minute or two on one CPU core.
"""

import numpy as np

from codepretrain import (
    ModelConfig,
    Seq2SeqModel,
    TrainSchedule,
    build_denoising_instances,
    build_dual_instances,
    generate,
    ingest,
    load_lexers,
    normalize_corpus,
    pretrain,
    train_tokenizer,
)
from codepretrain.corpus import bundled_corpus_path
from codepretrain.objectives import MSP, clip_document


def main():
    lexers = load_lexers()
    records = list(ingest(bundled_corpus_path()))
    tokenizer = train_tokenizer(
        [r.code for r in records] + [r.docstring for r in records if r.docstring],
        vocab_size=800,
        min_freq=2,
    )
    docs = [clip_document(d, 16, 32) for d in normalize_corpus(iter(records), lexers)]

    config = ModelConfig(
        vocab_size=tokenizer.vocab_size,
        d_model=64,
        num_heads=4,
        encoder_layers=2,
        decoder_layers=2,
        feedforward_dim=128,
        max_src_len=160,
        max_tgt_len=64,
    )
    model = Seq2SeqModel(config, seed=0)

    denoise = build_denoising_instances(docs, tokenizer, rate=0.15, seed=1)
    log = pretrain(model, denoise, TrainSchedule(steps=500, batch_size=8, peak_lr=1e-3, seed=0))
    by_objective = {}
    for rec in log:
        by_objective.setdefault(rec.objective, []).append(rec.loss)
    print("denoising phase (mean loss, first 5 vs last 5 steps per objective):")
    for objective, losses in sorted(by_objective.items()):
        print(f"  {objective:<4} {np.mean(losses[:5]):7.3f} -> {np.mean(losses[-5:]):7.3f}")

    inst = next(i for i in denoise if i.objective == MSP)
    decoded = generate(model, inst.source_ids, max_len=len(inst.target_ids) + 8,
                       eos_id=tokenizer.sep_id)
    print("\none span-denoising instance after the denoising phase:")
    print("  masked source:", " ".join(tokenizer.token_for_id(i) for i in inst.source_ids))
    print("  gold target:  ", " ".join(tokenizer.token_for_id(i) for i in inst.target_ids[:-1]))
    print("  model output: ", " ".join(tokenizer.token_for_id(i) for i in decoded))

    dual = build_dual_instances(docs, tokenizer, max_src_len=config.max_src_len,
                                max_tgt_len=config.max_tgt_len)
    dual_log = pretrain(
        model, dual, TrainSchedule(steps=100, batch_size=8, peak_lr=5e-4, seed=1), phase="dual"
    )
    print(f"\ndual phase: loss {dual_log[0].loss:.3f} -> {dual_log[-1].loss:.3f}")


if __name__ == "__main__":
    main()
