# -*- coding: utf-8 -*-
"""
Scoring generated questions
===========================

Three overlap metrics plus a task-specific one.  BLEU-1..4 pools
clipped n-gram counts over the corpus (no smoothing), ROUGE-L is the
LCS F-measure, and the METEOR variant aligns tokens by exact match
first and then by stem, penalizing fragmented alignments.  On top of
those, interrogative-word recall asks the only question this package
really cares about: did the generated question start with the right
question word?
"""

from qgkit.data import IWClass
from qgkit.metrics import (
    bleu_n,
    evaluate_generation,
    iw_recall_precision,
    meteor_variant,
    rouge_l,
)

###########################################################################
# One reference, three candidates of decreasing quality.

reference = "where was the first telescope built ?".split()
candidates = [
    "where was the first telescope built ?".split(),
    "where was the telescope made ?".split(),
    "what did the telescope see ?".split(),
]

for cand in candidates:
    b = bleu_n([cand], [reference], 4)
    print(f"{' '.join(cand):<42} bleu4 {b[3]:.3f}  "
          f"rougeL {rouge_l([cand], [reference]):.3f}  "
          f"meteor {meteor_variant([cand], [reference]):.3f}")

###########################################################################
# Clipping in action: repeating a matched word does not buy precision.

print()
for cand in (["the", "telescope"], ["the", "the", "the", "telescope"]):
    print(f"{' '.join(cand):<25} bleu1 {bleu_n([cand], [reference], 1)[0]:.3f}")

###########################################################################
# The stem matcher lets inflection differences count, at a discount
# relative to an exact match.

print()
pairs = [(["jump"], ["jump"]), (["jumped"], ["jump"]), (["fell"], ["jump"])]
for cand, ref in pairs:
    print(f"{cand[0]:<8} vs {ref[0]:<6} meteor {meteor_variant([cand], [ref]):.3f}")

###########################################################################
# Interrogative recall compares the leading question word of each
# candidate/reference pair, per class and in total.

generated = [
    "where was it built ?".split(),
    "what was built ?".split(),
    "who built the telescope ?".split(),
]
gold = [
    "where was the first telescope built ?".split(),
    "where was it made ?".split(),
    "who built it ?".split(),
]
scores = iw_recall_precision(generated, gold)
print(f"\ntotal recall {scores.total_recall:.3f}")
for c in (IWClass.Where, IWClass.Who):
    s = scores.per_class[c]
    print(f"  {c.name:<6} recall {s.recall:.2f}  precision {s.precision:.2f}  "
          f"support {s.support}")

###########################################################################
# evaluate_generation bundles everything into one report; on an
# identity corpus every metric is exactly 1.

report = evaluate_generation(gold, gold)
print(f"\nidentity corpus: bleu4 {report.bleu[3]:.1f}  rougeL {report.rouge_l:.1f}  "
      f"meteor {report.meteor_variant:.1f}  recall {report.iw_scores.total_recall:.1f}")
