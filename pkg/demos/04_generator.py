# -*- coding: utf-8 -*-
"""
Copy-mechanism question generation
==================================

The generator encodes the tagged passage with a bidirectional LSTM and
gated self-attention, then decodes with an attention pointer that can
either emit a vocabulary word or copy a source word.  Copy scores are
max-pooled per distinct word, so a word appearing three times competes
once, with its best position.  Out-of-vocabulary source words get
temporary extended ids, which is what lets the model produce words it
has no embedding for.
"""

import numpy as np

from qgkit.data import Vocabulary, tokenize
from qgkit.generator import QGConfig, generate, train_qg
from qgkit.synthetic import bundled_corpus

###########################################################################
# Memorize ten bundled examples.  A minute's budget on one core is
# plenty; training is deterministic, so these outputs are stable.

corpus = bundled_corpus("overfit10")
vocab = Vocabulary.build(corpus)
config = QGConfig(epochs=60)
params, log = train_qg(corpus, config, vocab)
print(f"per-token loss {log[0]['per_token_loss']:.3f} -> "
      f"{log[-1]['per_token_loss']:.3f} after {config.epochs} epochs\n")

###########################################################################
# Decode each passage with its gold question word inserted.

for ex in corpus:
    result = generate(ex, ex.iw_class, config, params.tensors, vocab)
    mark = "=" if result.tokens == tokenize(ex.question) else "!"
    print(f"{mark} {ex.id}: {result.text}")

###########################################################################
# The attention matrix has one row per emitted token.  Mapping each
# row's argmax back to the source shows the pointer walking the passage;
# the first step usually looks straight at the inserted question word.

ex = corpus[0]
result = generate(ex, ex.iw_class, config, params.tensors, vocab)
source = result.source.surfaces
print(f"\nsource: {' '.join(source)}")
for tok, row in zip(result.tokens, result.attention):
    j = int(np.argmax(row))
    print(f"  emits {tok:<12} looking at {source[j]!r} (weight {row[j]:.2f})")
