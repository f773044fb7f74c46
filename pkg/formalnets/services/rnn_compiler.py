"""Compile an RNN encoder-decoder into a two-layer-decoder Transformer over Q^(6d+8)."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
import logging
from typing import List, Sequence, Tuple

import numpy as np

from formalnets.services.attention import MultPhi, PosDiff
from formalnets.services.linalg import (
    HALF,
    ONE,
    Activation,
    AffineMap,
    FeedForward,
    Stage,
    activate,
    identity_matrix,
    zero_matrix,
    zeros,
)
from formalnets.services.machines import RnnEncDec, rnn_run
from formalnets.services.transformer import (
    DecoderLayer,
    EncoderLayer,
    FinalPredicate,
    PositionalEncoding,
    Recognizer,
    TransformerParams,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RnnVectorLayout:
    """Blocks B1..B3 (alpha, beta, gamma), scalars a, b, c, c', blocks B4..B6, scalars a', b', spare, pos."""

    d: int

    @property
    def dim(self) -> int:
        return 6 * self.d + 8

    def block(self, index: int) -> slice:
        """B1..B6 as 0-based slices."""
        starts = {1: 0, 2: self.d, 3: 2 * self.d, 4: 3 * self.d + 4, 5: 4 * self.d + 4, 6: 5 * self.d + 4}
        start = starts[index]
        return slice(start, start + self.d)

    @property
    def a(self) -> int:
        return 3 * self.d

    @property
    def b(self) -> int:
        return 3 * self.d + 1

    @property
    def c(self) -> int:
        return 3 * self.d + 2

    @property
    def c_next(self) -> int:
        return 3 * self.d + 3

    @property
    def a_next(self) -> int:
        return 6 * self.d + 4

    @property
    def b_next(self) -> int:
        return 6 * self.d + 5

    @property
    def spare(self) -> int:
        return 6 * self.d + 6

    @property
    def pos(self) -> int:
        return 6 * self.d + 7

    def slot_names(self) -> List[str]:
        def named(prefix: str) -> List[str]:
            return [f"{prefix}[{k}]" for k in range(self.d)]

        return (
            named("alpha")
            + named("beta")
            + named("gamma")
            + ["a", "b", "c", "c_next"]
            + named("beta_next")
            + named("gamma_next")
            + named("scratch")
            + ["a_next", "b_next", "spare", "pos"]
        )

    def block_of(self, slot: int) -> str:
        name = self.slot_names()[slot]
        return name.split("[", 1)[0]

    def embed_vector(self, x: np.ndarray) -> np.ndarray:
        out = zeros(self.dim)
        out[self.block(1)] = x
        return out


@dataclass(frozen=True)
class RefSequences:
    alpha: List[np.ndarray]
    beta: List[np.ndarray]
    gamma: List[np.ndarray]
    a: List[Fraction]
    b: List[Fraction]
    c: List[Fraction]

    @property
    def length(self) -> int:
        return len(self.beta)


def _sigma(values: np.ndarray) -> np.ndarray:
    return activate(Activation.SIGMA, values.astype(object))


def reference_sequences(rnn: RnnEncDec, X: Sequence[np.ndarray], r: int) -> RefSequences:
    """alpha, beta, gamma, a, b, c for i = 0..r from their recursive definitions."""
    n = len(X)
    hidden = rnn_run(rnn, X, 0).hidden
    alpha: List[np.ndarray] = []
    beta: List[np.ndarray] = []
    gamma: List[np.ndarray] = []
    a: List[Fraction] = []
    b: List[Fraction] = []
    c: List[Fraction] = []
    for i in range(r + 1):
        alpha.append(X[min(i, n) - 1].copy() if i > 0 and n > 0 else zeros(rnn.dim))
        a.append(Fraction(int(i > n)))
        b.append(Fraction(int(i != n + 1)))
        c.append(Fraction(min(i, n)))
        if i == 0:
            beta.append(zeros(rnn.dim))
            gamma.append(zeros(rnn.dim))
            continue
        if i <= n:
            beta.append(hidden[i])
        else:
            beta.append(_sigma(alpha[i].dot(rnn.W) + beta[i - 1].dot(rnn.V)))
        gate = (1 - b[i]) * beta[i - 1]
        gamma.append((_sigma(gamma[i - 1].dot(rnn.U)) + gate).astype(object))
    return RefSequences(alpha, beta, gamma, a, b, c)


def expected_output(layout: RnnVectorLayout, ref: RefSequences, i: int) -> np.ndarray:
    """y_i = [0, beta_i, gamma_i, a_i, b_i, c_i, 0, ..]."""
    out = zeros(layout.dim)
    out[layout.block(2)] = ref.beta[i]
    out[layout.block(3)] = ref.gamma[i]
    out[layout.a] = ref.a[i]
    out[layout.b] = ref.b[i]
    out[layout.c] = ref.c[i]
    return out


def expected_first_layer(layout: RnnVectorLayout, ref: RefSequences, i: int) -> np.ndarray:
    """z^1_i; needs index i + 1 in ``ref``."""
    out = expected_output(layout, ref, i)
    out[layout.block(1)] = ref.alpha[i + 1]
    out[layout.c_next] = ref.c[i + 1]
    out[layout.block(4)] = ref.beta[i + 1]
    out[layout.block(5)] = ref.gamma[i + 1]
    out[layout.a_next] = ref.a[i + 1]
    out[layout.b_next] = ref.b[i + 1]
    out[layout.pos] = Fraction(i + 1)
    return out


def _place(mat: np.ndarray, rows: slice, cols: slice, block: np.ndarray) -> None:
    mat[rows, cols] = block


def _first_layer_ffn(rnn: RnnEncDec, layout: RnnVectorLayout) -> FeedForward:
    d, D = rnn.dim, layout.dim
    eye = identity_matrix(d)
    # f1: [alpha_{i+1}, beta_i, gamma_i, a_{i+1}, b_{i+1}]
    f1 = zero_matrix(D, 3 * d + 2)
    f1_bias = zeros(3 * d + 2)
    _place(f1, layout.block(1), slice(0, d), eye)
    _place(f1, layout.block(2), slice(d, 2 * d), eye)
    _place(f1, layout.block(3), slice(2 * d, 3 * d), eye)
    a_next, b_next = 3 * d, 3 * d + 1
    f1[layout.c_next, a_next] = -ONE
    f1[layout.c, a_next] = ONE
    f1_bias[a_next] = ONE
    f1[layout.c_next, b_next] = ONE
    f1[layout.c, b_next] = -ONE
    f1[layout.a, b_next] = ONE

    # f2 (sigma): [beta_{i+1}, sigma(gamma_i U), (1 - b_{i+1}) beta_i, a_{i+1}, b_{i+1}]
    f2 = zero_matrix(3 * d + 2, 3 * d + 2)
    _place(f2, slice(0, d), slice(0, d), rnn.W)
    _place(f2, slice(d, 2 * d), slice(0, d), rnn.V)
    _place(f2, slice(2 * d, 3 * d), slice(d, 2 * d), rnn.U)
    _place(f2, slice(d, 2 * d), slice(2 * d, 3 * d), eye)
    for k in range(d):
        f2[b_next, 2 * d + k] = -ONE
    f2[a_next, a_next] = ONE
    f2[b_next, b_next] = ONE

    # f3: beta_{i+1} -> B4, gamma_{i+1} -> B5, flags -> a', b'
    f3 = zero_matrix(3 * d + 2, D)
    _place(f3, slice(0, d), layout.block(4), eye)
    _place(f3, slice(d, 2 * d), layout.block(5), eye)
    _place(f3, slice(2 * d, 3 * d), layout.block(5), eye)
    f3[a_next, layout.a_next] = ONE
    f3[b_next, layout.b_next] = ONE

    return FeedForward(
        (
            Stage(AffineMap(f1, f1_bias), Activation.IDENTITY),
            Stage(AffineMap.linear(f2), Activation.SIGMA),
            Stage(AffineMap.linear(f3), Activation.IDENTITY),
        )
    )


def _cleanup_ffn(layout: RnnVectorLayout) -> FeedForward:
    """T - I, where T moves the successor copies into place and halves the doubled c'."""
    D, d = layout.dim, layout.d
    move = zero_matrix(D, D)
    _place(move, layout.block(4), layout.block(2), identity_matrix(d))
    _place(move, layout.block(5), layout.block(3), identity_matrix(d))
    move[layout.a_next, layout.a] = ONE
    move[layout.b_next, layout.b] = ONE
    move[layout.c_next, layout.c] = HALF
    return FeedForward.single((move - identity_matrix(D)).astype(object))


def build_rnn_encoder(layout: RnnVectorLayout) -> Tuple[EncoderLayer, FeedForward, FeedForward]:
    D = layout.dim
    zero = FeedForward.zero(D)
    values = zero_matrix(D, D)
    _place(values, layout.block(1), layout.block(1), identity_matrix(layout.d))
    values[layout.pos, layout.c_next] = ONE
    return EncoderLayer(zero, zero, zero, zero, MultPhi()), FeedForward.identity(), FeedForward.single(values)


def compile_rnn(rnn: RnnEncDec) -> Recognizer:
    layout = RnnVectorLayout(rnn.dim)
    D = layout.dim
    embed = {symbol: layout.embed_vector(vector) for symbol, vector in rnn.embed.items()}
    encoder, final_K, final_V = build_rnn_encoder(layout)
    zero = FeedForward.zero(D)
    pointer = PosDiff(layout.pos)
    decoder = (
        DecoderLayer(zero, zero, zero, _first_layer_ffn(rnn, layout), MultPhi(), pointer),
        DecoderLayer(zero, zero, zero, _cleanup_ffn(layout), MultPhi(), pointer),
    )
    params = TransformerParams(D, (encoder,), final_K, final_V, decoder, FeedForward.identity())
    seed = zeros(D)
    seed[layout.b] = ONE
    final_pred = rnn.accept.shifted(layout.block(3).start) & FinalPredicate.equals([layout.a], 1)
    logger.info("compiled %d-dim RNN into dimension %d", rnn.dim, D)
    return Recognizer(
        tuple(embed),
        embed,
        PositionalEncoding("index", layout.pos),
        params,
        seed,
        final_pred,
        tuple(layout.slot_names()),
    )


def encode_vectors(rec: Recognizer, layout: RnnVectorLayout, X: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Encoder input for raw RNN input vectors: [x_i, 0, .., 0, i]."""
    if not X:
        raise ValueError("RNN inputs must be non-empty")
    return [
        (layout.embed_vector(x) + rec.posenc.vector(i, layout.dim)).astype(object) for i, x in enumerate(X, start=1)
    ]
