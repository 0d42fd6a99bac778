"""Sequence-to-sequence question generation with a maxout copy pointer.

The encoder runs a bidirectional recurrent pass over word-plus-role
embeddings, then refines each state with gated self-attention: every
position attends over the whole sequence through a bilinear form and a
fusion gate interpolates between the raw and the attended state.  The
decoder attends over the fused states, scores generation over the fixed
vocabulary, and scores copying per source position with each position's
score capped at the maximum over positions holding the same word; the
combined softmax is then regrouped so every surface word carries a
single probability.  Out-of-vocabulary source words are addressable
through per-example extended ids.

Training is teacher-forced on the gold question with the gold
interrogative class inserted into the source; inference inserts the
predicted class instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import reduce
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Tape, Tensor, adam_step, backward, uniform_init
from .classifier import ClassifierParams, classify
from .data import (
    EOS_ID,
    SOS_ID,
    UNK_ID,
    Example,
    IWClass,
    TaggedSequence,
    Vocabulary,
    build_qg_input,
    tokenize,
)
from .layers import broadcast_rows, init_bilstm, init_linear, init_lstm, linear, lstm_step, run_bilstm

__all__ = [
    "DecodeStep",
    "EncodedPassage",
    "GenerationResult",
    "QGConfig",
    "QGParams",
    "decode_step",
    "encode",
    "generate",
    "init_decoder_state",
    "init_qg",
    "pipeline_generate",
    "qg_loss",
    "sequence_loss",
    "target_ids",
    "train_qg",
]

NUM_META_TAGS = 3


@dataclass
class QGConfig:
    """Generator hyperparameters.

    ``insert_iw`` switches interrogative-word insertion; turning it off
    gives the no-insertion baseline encoder input.  ``beam_size`` 1 is
    greedy decoding; larger values run a plain beam search."""

    word_dim: int = 24
    meta_dim: int = 6
    encoder_hidden: int = 24
    decoder_hidden: int = 48
    epochs: int = 60
    lr: float = 2e-3
    weight_decay: float = 0.0
    seed: int = 0
    max_len: int = 30
    insert_iw: bool = True
    beam_size: int = 1

    def validate(self) -> None:
        for name in ("word_dim", "meta_dim", "encoder_hidden", "decoder_hidden",
                     "epochs", "max_len", "beam_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")

    def to_dict(self) -> dict:
        return {
            "word_dim": self.word_dim,
            "meta_dim": self.meta_dim,
            "encoder_hidden": self.encoder_hidden,
            "decoder_hidden": self.decoder_hidden,
            "epochs": self.epochs,
            "lr": self.lr,
            "weight_decay": self.weight_decay,
            "seed": self.seed,
            "max_len": self.max_len,
            "insert_iw": self.insert_iw,
            "beam_size": self.beam_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QGConfig":
        config = cls(**d)
        config.validate()
        return config


@dataclass
class QGParams:
    config: QGConfig
    tensors: dict[str, Tensor]

    def copy(self) -> "QGParams":
        return QGParams(
            config=replace(self.config),
            tensors={k: t.copy() for k, t in self.tensors.items()},
        )


def init_qg(config: QGConfig, vocab_size: int, rng: np.random.Generator) -> QGParams:
    config.validate()
    h = config.encoder_hidden
    dh = config.decoder_hidden
    tensors: dict[str, Tensor] = {}
    tensors["embed"] = uniform_init(rng, (vocab_size, config.word_dim),
                                    fan_in=config.word_dim, name="embed")
    tensors["meta_embed"] = uniform_init(rng, (NUM_META_TAGS, config.meta_dim),
                                         fan_in=config.meta_dim, name="meta_embed")
    tensors.update(init_bilstm(rng, config.word_dim + config.meta_dim, h, "enc"))
    tensors["att.Ws"] = uniform_init(rng, (2 * h, 2 * h), fan_in=2 * h, name="att.Ws")
    tensors.update(init_linear(rng, 4 * h, 2 * h, "fuse.f"))
    tensors.update(init_linear(rng, 4 * h, 2 * h, "fuse.g"))
    tensors.update(init_linear(rng, 2 * h, dh, "bridge.h"))
    tensors.update(init_linear(rng, 2 * h, dh, "bridge.c"))
    tensors.update(init_lstm(rng, config.word_dim, dh, "dec"))
    tensors["att.Wa"] = uniform_init(rng, (dh, 2 * h), fan_in=dh, name="att.Wa")
    tensors.update(init_linear(rng, dh + 2 * h, vocab_size, "out"))
    return QGParams(config=config, tensors=tensors)


@dataclass
class EncodedPassage:
    """Fused encoder states plus copy-addressing structure.

    ``segments`` groups source positions by extended word id (first
    occurrence order); ``segment_word_ids[k]`` is segment k's id and
    ``position_segment[j]`` maps position j to its segment.  The
    decoder-init vector is the last fused state, so it is a pure
    function of ``states``."""

    states: Tensor
    final_state: Tensor
    source_tokens: TaggedSequence
    segments: list[list[int]] = field(default_factory=list)
    segment_word_ids: list[int] = field(default_factory=list)
    position_segment: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.source_tokens.surfaces)


def _copy_segments(ids: Sequence[int]) -> tuple[list[list[int]], list[int], list[int]]:
    segments: list[list[int]] = []
    word_ids: list[int] = []
    seg_of: dict[int, int] = {}
    pos_seg: list[int] = []
    for j, wid in enumerate(ids):
        k = seg_of.get(wid)
        if k is None:
            k = len(segments)
            seg_of[wid] = k
            segments.append([])
            word_ids.append(wid)
        segments[k].append(j)
        pos_seg.append(k)
    return segments, word_ids, pos_seg


def encode(seq: TaggedSequence, config: QGConfig, params: dict[str, Tensor]) -> EncodedPassage:
    """Fused passage states (n x 2h).

    u = bidirectional pass over [word; meta] rows; a_t = softmax over j
    of u_j' Ws u_t; s_t = sum_j a_tj u_j; f = tanh([u; s] Wf + bf),
    g = sigmoid([u; s] Wg + bg); state = g * f + (1 - g) * u."""
    n = len(seq.surfaces)
    if n == 0:
        raise ValueError("empty generator input")
    rows = [
        ad.concat(
            [ad.lookup(params["embed"], [b]), ad.lookup(params["meta_embed"], [m])],
            axis=1,
        )
        for b, m in zip(seq.base_ids, seq.meta)
    ]
    u_list, _ = run_bilstm(rows, params, "enc", config.encoder_hidden)
    U = ad.concat(u_list, axis=0)
    scores = ad.matmul(ad.matmul(U, params["att.Ws"]), ad.transpose(U))
    # column t holds u_j' Ws u_t over j, so align over axis 0
    A = ad.softmax(scores, axis=0)
    S = ad.matmul(ad.transpose(A), U)
    fused_in = ad.concat([U, S], axis=1)
    F = ad.tanh(ad.add(ad.matmul(fused_in, params["fuse.f.W"]),
                       broadcast_rows(params["fuse.f.b"], n)))
    G = ad.sigmoid(ad.add(ad.matmul(fused_in, params["fuse.g.W"]),
                          broadcast_rows(params["fuse.g.b"], n)))
    states = ad.add(ad.mul(G, F), ad.mul(ad.sub(1.0, G), U))
    segments, word_ids, pos_seg = _copy_segments(seq.ids)
    return EncodedPassage(
        states=states,
        final_state=states[n - 1 : n, :],
        source_tokens=seq,
        segments=segments,
        segment_word_ids=word_ids,
        position_segment=pos_seg,
    )


def init_decoder_state(
    encoded: EncodedPassage, config: QGConfig, params: dict[str, Tensor]
) -> tuple[Tensor, Tensor]:
    """Learned bridge from the last fused encoder state to (h0, c0)."""
    h0 = ad.tanh(linear(encoded.final_state, params["bridge.h.W"], params["bridge.h.b"]))
    c0 = ad.tanh(linear(encoded.final_state, params["bridge.c.W"], params["bridge.c.b"]))
    return h0, c0


@dataclass
class DecodeStep:
    """One decoder step's scores and distributions.

    ``raw_attention``/``attention`` are length-n (pre/post softmax);
    ``copy_scores`` maps each distinct source surface word to its
    max-capped raw score; ``final_dist`` covers the vocabulary followed
    by this example's extended ids."""

    raw_attention: Tensor
    attention: Tensor
    context: Tensor
    generate_scores: Tensor
    copy_scores: dict[str, float]
    final_dist: Tensor


def decode_step(
    prev_token: int,
    state: tuple[Tensor, Tensor],
    encoded: EncodedPassage,
    config: QGConfig,
    params: dict[str, Tensor],
) -> tuple[DecodeStep, tuple[Tensor, Tensor]]:
    """Recurrent update, bilinear attention, generate + maxout copy.

    ``prev_token`` may be an extended id; it is clamped to [UNK] for the
    embedding lookup.  Each position's copy logit is the maximum raw
    attention score over positions holding the same word; the combined
    softmax is regrouped by word id into ``final_dist``."""
    vocab_size = params["embed"].shape[0]
    base = prev_token if prev_token < vocab_size else UNK_ID
    x = ad.lookup(params["embed"], [base])
    h, c = lstm_step(x, state[0], state[1], params["dec.W"], params["dec.b"])
    query = ad.matmul(h, params["att.Wa"])
    e_col = ad.matmul(encoded.states, ad.transpose(query))
    n = len(encoded)
    raw = ad.reshape(e_col, (n,))
    attn_col = ad.softmax(e_col, axis=0)
    context = ad.matmul(ad.transpose(attn_col), encoded.states)
    gen_row = linear(ad.concat([h, context], axis=1), params["out.W"], params["out.b"])
    gen_scores = ad.reshape(gen_row, (vocab_size,))
    maxima, _ = ad.segment_max(raw, encoded.segments)
    capped = ad.reshape(
        ad.lookup(ad.reshape(maxima, (len(encoded.segments), 1)), encoded.position_segment),
        (n,),
    )
    combined = ad.softmax(ad.concat([gen_scores, capped], axis=0), axis=0)
    index_map = list(range(vocab_size)) + list(encoded.source_tokens.ids)
    final = ad.scatter_sum(
        combined, index_map, vocab_size + len(encoded.source_tokens.oov_words)
    )
    surfaces = encoded.source_tokens.surfaces
    copy_scores = {
        surfaces[seg[0]]: float(maxima.data[k])
        for k, seg in enumerate(encoded.segments)
    }
    step = DecodeStep(
        raw_attention=raw,
        attention=ad.reshape(attn_col, (n,)),
        context=context,
        generate_scores=gen_scores,
        copy_scores=copy_scores,
        final_dist=final,
    )
    return step, (h, c)


def target_ids(question_tokens: Sequence[str], vocab: Vocabulary,
               oov_words: Sequence[str]) -> list[int]:
    """Teacher-forcing targets: extended ids against the source's OOV
    list (uncopyable unknowns fall back to [UNK]), closed by [EOS]."""
    return [vocab.extended_id(t, oov_words) for t in question_tokens] + [EOS_ID]


def sequence_loss(
    seq: TaggedSequence,
    targets: Sequence[int],
    config: QGConfig,
    params: dict[str, Tensor],
) -> Tensor:
    """Mean per-token cross-entropy of a teacher-forced pass."""
    if not targets:
        raise ValueError("empty target sequence")
    encoded = encode(seq, config, params)
    state = init_decoder_state(encoded, config, params)
    prev = SOS_ID
    losses = []
    for tid in targets:
        step, state = decode_step(prev, state, encoded, config, params)
        losses.append(ad.cross_entropy(step.final_dist, tid))
        prev = tid
    return ad.mul(reduce(ad.add, losses), 1.0 / len(targets))


def _example_source_and_targets(
    example: Example, config: QGConfig, vocab: Vocabulary
) -> tuple[TaggedSequence, list[int]]:
    seq = build_qg_input(example, example.iw_class, vocab, insert_iw=config.insert_iw)
    return seq, target_ids(tokenize(example.question), vocab, seq.oov_words)


def qg_loss(
    dataset: Sequence[Example],
    config: QGConfig,
    params: dict[str, Tensor],
    vocab: Vocabulary,
) -> float:
    """Corpus per-token loss (total cross-entropy / total target tokens)
    under gold-class insertion, without recording gradients."""
    total, count = 0.0, 0
    for ex in dataset:
        seq, targets = _example_source_and_targets(ex, config, vocab)
        total += sequence_loss(seq, targets, config, params).item() * len(targets)
        count += len(targets)
    return total / count if count else 0.0


def train_qg(
    dataset: Sequence[Example],
    config: QGConfig,
    vocab: Vocabulary,
) -> tuple[QGParams, list[dict]]:
    """Per-example Adam on teacher-forced cross-entropy.

    Sources are built with the GOLD interrogative class so the decoder
    always sees the inserted word during training.  The log starts with
    an epoch-0 entry (untrained corpus loss, near ln of the effective
    vocabulary) followed by one running-loss entry per epoch.
    Deterministic for a fixed config."""
    config.validate()
    if not dataset:
        raise ValueError("empty training set")
    ss = np.random.SeedSequence(config.seed)
    init_rng, order_rng = (np.random.default_rng(s) for s in ss.spawn(2))
    params = init_qg(config, len(vocab), init_rng)
    state = AdamState()
    log = [{"epoch": 0, "per_token_loss": qg_loss(dataset, config, params.tensors, vocab)}]
    prepared = [_example_source_and_targets(ex, config, vocab) for ex in dataset]
    for epoch in range(1, config.epochs + 1):
        total, count = 0.0, 0
        for i in order_rng.permutation(len(prepared)):
            seq, targets = prepared[i]
            with Tape() as tape:
                loss = sequence_loss(seq, targets, config, params.tensors)
            backward(tape, loss)
            grads = {k: t.grad for k, t in params.tensors.items()}
            adam_step(params.tensors, grads, state, lr=config.lr,
                      weight_decay=config.weight_decay)
            total += loss.item() * len(targets)
            count += len(targets)
        log.append({"epoch": epoch, "per_token_loss": total / count})
    return params, log


@dataclass
class GenerationResult:
    """Decoded question plus its attention matrix.

    ``attention`` has one post-softmax row per emitted token (n_out x
    n_in); ``source`` is the tagged input the attention columns index."""

    tokens: list[str]
    attention: np.ndarray
    predicted_iw: IWClass
    source: TaggedSequence

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


def _surface(token_id: int, vocab: Vocabulary, oov_words: Sequence[str]) -> str:
    if token_id < len(vocab):
        return vocab.token(token_id)
    return oov_words[token_id - len(vocab)]


def _greedy(seq, config, params, vocab, max_len):
    encoded = encode(seq, config, params)
    state = init_decoder_state(encoded, config, params)
    prev = SOS_ID
    tokens: list[str] = []
    rows: list[np.ndarray] = []
    for _ in range(max_len):
        step, state = decode_step(prev, state, encoded, config, params)
        nxt = int(np.argmax(step.final_dist.data))
        if nxt == EOS_ID:
            break
        tokens.append(_surface(nxt, vocab, seq.oov_words))
        rows.append(step.attention.data.ravel().copy())
        prev = nxt
    attention = np.vstack(rows) if rows else np.zeros((0, len(seq.surfaces)))
    return tokens, attention


def _beam(seq, config, params, vocab, max_len):
    """Plain beam search on summed log probabilities; ties break toward
    the lexicographically smaller id sequence."""
    encoded = encode(seq, config, params)
    start = init_decoder_state(encoded, config, params)
    # beam item: (neg score, id sequence, prev id, state, attention rows, done)
    beams = [(0.0, [], SOS_ID, start, [], False)]
    for _ in range(max_len):
        if all(b[5] for b in beams):
            break
        candidates = []
        for score, ids, prev, state, rows, done in beams:
            if done:
                candidates.append((score, ids, prev, state, rows, True))
                continue
            step, new_state = decode_step(prev, state, encoded, config, params)
            probs = step.final_dist.data
            top = np.argsort(-probs)[: config.beam_size]
            for tid in top:
                tid = int(tid)
                cost = score - float(np.log(max(probs[tid], ad.PROB_FLOOR)))
                if tid == EOS_ID:
                    candidates.append((cost, ids, tid, new_state, rows, True))
                else:
                    row = step.attention.data.ravel().copy()
                    candidates.append((cost, ids + [tid], tid, new_state, rows + [row], False))
        candidates.sort(key=lambda b: (b[0], b[1]))
        beams = candidates[: config.beam_size]
    best = min(beams, key=lambda b: (b[0], b[1]))
    tokens = [_surface(t, vocab, seq.oov_words) for t in best[1]]
    attention = np.vstack(best[4]) if best[4] else np.zeros((0, len(seq.surfaces)))
    return tokens, attention


def generate(
    example: Example,
    predicted_iw: IWClass,
    config: QGConfig,
    params: dict[str, Tensor],
    vocab: Vocabulary,
    max_len: int | None = None,
) -> GenerationResult:
    """Decode a question for ``example`` with ``predicted_iw`` inserted.

    Greedy argmax from [SOS] until [EOS] or ``max_len`` (beam search
    when config.beam_size > 1).  Emitted extended ids detokenize to
    their source surface forms."""
    seq = build_qg_input(example, predicted_iw, vocab, insert_iw=config.insert_iw)
    limit = config.max_len if max_len is None else max_len
    if config.beam_size > 1:
        tokens, attention = _beam(seq, config, params, vocab, limit)
    else:
        tokens, attention = _greedy(seq, config, params, vocab, limit)
    return GenerationResult(
        tokens=tokens, attention=attention, predicted_iw=predicted_iw, source=seq
    )


def pipeline_generate(
    example: Example,
    classifier: ClassifierParams | Callable[[Example], IWClass],
    qg_params: QGParams,
    vocab: Vocabulary,
) -> GenerationResult:
    """Two-stage inference: predict the interrogative class, then decode
    with that class inserted.  ``classifier`` is either trained
    classifier parameters or any ``example -> IWClass`` predictor (for
    accuracy-controlled oracles); the prediction is recorded on the
    result."""
    if isinstance(classifier, ClassifierParams):
        probs = classify(example, classifier.config, classifier.tensors, vocab)
        predicted = IWClass(int(np.argmax(probs)))
    else:
        predicted = classifier(example)
    return generate(example, predicted, qg_params.config, qg_params.tensors, vocab)
