# -*- coding: utf-8 -*-
"""
The full two-stage pipeline
===========================

Everything wired together at desk scale: balance a corpus, train the
interrogative-word classifier and the generator, run classification
followed by generation on fresh passages, score the output, and trace
how generation quality degrades as the classifier gets noisier.  The
``qgkit`` command line drives the same calls from the shell; this is
the library view.  Takes about half a minute.
"""

import numpy as np

from qgkit.classifier import ClassifierConfig, oracle_classifier, train_classifier
from qgkit.data import Vocabulary, class_counts, downsample, tokenize
from qgkit.generator import QGConfig, generate, pipeline_generate, train_qg
from qgkit.metrics import evaluate_generation
from qgkit.synthetic import make_separable_corpus

###########################################################################
# Corpus and vocabulary.  The held-out split uses answer markers the
# models never saw, so nothing below is memorization.

train = make_separable_corpus(6, seed=0)
held = make_separable_corpus(3, seed=1, novel=True)
vocab = Vocabulary.build(train)
balanced = downsample(train, 6, np.random.default_rng(0))
print(f"{len(train)} train / {len(held)} held-out; "
      f"classes balanced at {max(class_counts(balanced).values())}")

###########################################################################
# Stage one: the classifier, with answer tagging and entity features on.

cls_config = ClassifierConfig(use_answer_tagging=True, use_entity_type=True,
                              word_dim=12, encoder_hidden=16, epochs=3,
                              lr=5e-3, seed=0)
classifier, _ = train_classifier(balanced, cls_config, vocab)

###########################################################################
# Stage two: the generator, trained with the gold question word spliced
# into each passage.

qg_config = QGConfig(word_dim=10, meta_dim=4, encoder_hidden=8,
                     decoder_hidden=16, epochs=8, lr=5e-3, seed=0)
qg, log = train_qg(train, qg_config, vocab)
print(f"generator per-token loss {log[0]['per_token_loss']:.2f} -> "
      f"{log[-1]['per_token_loss']:.2f}\n")

###########################################################################
# Inference chains the stages: predict the class, insert its surface
# form, decode.  The prediction is recorded on each result.

for ex in held[:4]:
    result = pipeline_generate(ex, classifier, qg, vocab)
    print(f"{ex.id}")
    print(f"  predicted {result.predicted_iw.name:<6} -> {result.text}")
    print(f"  gold      {ex.iw_class.name:<6}    {ex.question}")

references = [tokenize(ex.question) for ex in held]
outputs = [pipeline_generate(ex, classifier, qg, vocab).tokens for ex in held]
report = evaluate_generation(outputs, references)
print(f"\nheld-out: bleu4 {report.bleu[3]:.3f}  rougeL {report.rouge_l:.3f}  "
      f"iw recall {report.iw_scores.total_recall:.3f}")

###########################################################################
# How much does classifier quality matter?  Replace stage one with the
# accuracy-dialed oracle and sweep.  Paired seeds mean each column only
# flips predictions from wrong to right as accuracy rises.

print(f"\n{'accuracy':>8} {'bleu4':>7} {'recall':>7}")
for accuracy in (0.6, 0.8, 1.0):
    b4, rec = [], []
    for seed in range(3):
        rng = np.random.default_rng(seed)
        outs = [generate(ex, oracle_classifier(ex.iw_class, accuracy, rng),
                         qg_config, qg.tensors, vocab).tokens for ex in held]
        r = evaluate_generation(outs, references)
        b4.append(r.bleu[3])
        rec.append(r.iw_scores.total_recall)
    print(f"{accuracy:>8.1f} {np.mean(b4):>7.3f} {np.mean(rec):>7.3f}")
