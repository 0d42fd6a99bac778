# -*- coding: utf-8 -*-
"""
From raw records to model inputs
================================

Records are JSONL passages with a question, an answer span given as a
character offset, and an entity type.  The pipeline labels each question
with one of eight interrogative classes, balances skewed corpora by
downsampling, builds a vocabulary, and produces the tagged sequence the
generator encodes: passage tokens plus the question word spliced in
right before the answer.
"""

import numpy as np

from qgkit.data import (
    IWClass,
    MetaTag,
    Vocabulary,
    answer_token_span,
    build_qg_input,
    class_counts,
    downsample,
    label_interrogative_class,
    tokenize,
)
from qgkit.synthetic import bundled_corpus

###########################################################################
# The bundled 200-example corpus is deliberately skewed, like real QA
# data.  Downsampling caps each class without touching the small ones.

corpus = bundled_corpus("mini200")
# Others-class questions insert nothing, so pick a classed example
ex = next(e for e in corpus if e.iw_class is not IWClass.Others)
print(f"id        {ex.id}")
print(f"passage   {ex.passage}")
print(f"question  {ex.question}")
span = answer_token_span(ex.passage, ex.answer_text, ex.answer_start)
print(f"answer    {ex.answer_text!r} at tokens {span}")
print(f"class     {ex.iw_class.name}")

###########################################################################
# Class labels come from the question's first tokens ("how many" and
# friends included); anything unrecognized is Others.

for q in ("where was the treaty signed ?", "name the founding city ."):
    print(f"{q!r:45} -> {label_interrogative_class(tokenize(q)).name}")

before = class_counts(corpus)
after = class_counts(downsample(corpus, 20, np.random.default_rng(0)))
print(f"\n{'class':<8} {'before':>6} {'capped at 20':>12}")
for c in IWClass:
    print(f"{c.name:<8} {before[c]:>6} {after[c]:>12}")

###########################################################################
# The generator input tags every token as context or answer and inserts
# the interrogative word just before the answer span.  Dropping the
# inserted token recovers the passage exactly.

vocab = Vocabulary.build(corpus)
print(f"\nvocabulary: {len(vocab)} entries")

seq = build_qg_input(ex, ex.iw_class, vocab)
tags = {MetaTag.Context: " ", MetaTag.Answer: "A", MetaTag.Interrogative: "Q"}
print("tagged source:")
for surface, meta in zip(seq.surfaces, seq.meta):
    print(f"  [{tags[MetaTag(meta)]}] {surface}")
