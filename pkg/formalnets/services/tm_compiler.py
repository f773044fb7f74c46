"""Compile a normalized Turing machine into a Transformer recognizer.

The network has one encoder layer, three decoder layers and dimension
2|Q| + 4|S| + 11.  Decoder position i+1 carries the machine's state, the
symbol under the head and the previous move; layer 1 applies the transition
function, layer 2 averages the moves into the head position, layer 3 finds
the last time the current cell was written and F chooses the symbol read next.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
import logging
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from formalnets.services.attention import MultPhi
from formalnets.services.linalg import (
    HALF,
    ONE,
    Activation,
    AffineMap,
    FeedForward,
    Stage,
    unit,
    zero_matrix,
    zeros,
)
from formalnets.services.machines import TMTrace, TuringMachine, validate_tm
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
class TMVectorLayout:
    """0-based slot table for a machine with ``n_states`` states and ``n_symbols`` symbols."""

    n_states: int
    n_symbols: int

    @classmethod
    def for_machine(cls, tm: TuringMachine) -> "TMVectorLayout":
        return cls(len(tm.states), len(tm.alphabet))

    @property
    def dim(self) -> int:
        return 2 * self.n_states + 4 * self.n_symbols + 11

    # group 1: q1, s1, x1
    @property
    def q1(self) -> slice:
        return slice(0, self.n_states)

    @property
    def s1(self) -> slice:
        return slice(self.n_states, self.n_states + self.n_symbols)

    @property
    def x1(self) -> int:
        return self.n_states + self.n_symbols

    # group 2: q2, s2, x2..x5
    @property
    def group2(self) -> int:
        return self.x1 + 1

    @property
    def q2(self) -> slice:
        return slice(self.group2, self.group2 + self.n_states)

    @property
    def s2(self) -> slice:
        start = self.group2 + self.n_states
        return slice(start, start + self.n_symbols)

    @property
    def x2(self) -> int:
        return self.group2 + self.n_states + self.n_symbols

    @property
    def x3(self) -> int:
        return self.x2 + 1

    @property
    def x4(self) -> int:
        return self.x2 + 2

    @property
    def x5(self) -> int:
        return self.x2 + 3

    # group 3: s3, x6, s4, x7
    @property
    def group3(self) -> int:
        return self.x5 + 1

    @property
    def s3(self) -> slice:
        return slice(self.group3, self.group3 + self.n_symbols)

    @property
    def x6(self) -> int:
        return self.group3 + self.n_symbols

    @property
    def s4(self) -> slice:
        return slice(self.x6 + 1, self.x6 + 1 + self.n_symbols)

    @property
    def x7(self) -> int:
        return self.x6 + 1 + self.n_symbols

    # group 4: 1, i, 1/i, 1/i^2
    @property
    def x8(self) -> int:
        return self.x7 + 1

    @property
    def x9(self) -> int:
        return self.x8 + 1

    @property
    def x10(self) -> int:
        return self.x8 + 2

    @property
    def x11(self) -> int:
        return self.x8 + 3

    def blocks(self) -> List[Tuple[str, slice]]:
        out: List[Tuple[str, slice]] = []
        for name in ("q1", "s1", "x1", "q2", "s2", "x2", "x3", "x4", "x5", "s3", "x6", "s4", "x7", "x8", "x9", "x10", "x11"):
            value = getattr(self, name)
            out.append((name, value if isinstance(value, slice) else slice(value, value + 1)))
        return out

    def block_of(self, slot: int) -> str:
        for name, span in self.blocks():
            if span.start <= slot < span.stop:
                return name
        raise IndexError(f"slot {slot} outside dimension {self.dim}")

    def slot_names(self, tm: TuringMachine) -> List[str]:
        names: List[str] = []
        for name, span in self.blocks():
            if span.stop - span.start == 1 and name.startswith("x"):
                names.append(name)
            elif name.startswith("q"):
                names.extend(f"{name}[{state}]" for state in tm.states)
            else:
                names.extend(f"{name}[{symbol}]" for symbol in tm.alphabet)
        return names

    def frame(self, tm: TuringMachine) -> pd.DataFrame:
        names = self.slot_names(tm)
        return pd.DataFrame(
            {"slot": range(self.dim), "name": names, "block": [self.block_of(i) for i in range(self.dim)]}
        )


class OneHotCodec:
    """Enumerations of states, symbols, (state, symbol) pairs and (state, symbol, move) triples."""

    def __init__(self, tm: TuringMachine) -> None:
        self._tm = tm
        self.n_states = len(tm.states)
        self.n_symbols = len(tm.alphabet)

    @property
    def n_pairs(self) -> int:
        return self.n_states * self.n_symbols

    def pair(self, state: str, symbol: str) -> int:
        return self._tm.symbol_index(symbol) * self.n_states + self._tm.state_index(state)

    def triple(self, state: str, symbol: str, move: int) -> int:
        return self.pair(state, symbol) + (self.n_pairs if move > 0 else 0)

    def state_vector(self, state: str) -> np.ndarray:
        return unit(self.n_states, self._tm.state_index(state))

    def symbol_vector(self, symbol: str) -> np.ndarray:
        return unit(self.n_symbols, self._tm.symbol_index(symbol))


def build_tm_embedding(tm: TuringMachine) -> Tuple[Dict[str, np.ndarray], PositionalEncoding]:
    layout = TMVectorLayout.for_machine(tm)
    embed = {}
    for index, symbol in enumerate(tm.alphabet):
        embed[symbol] = unit(layout.dim, layout.s3.start + index)
    return embed, PositionalEncoding("harmonic", layout.x8)


def _identity_encoder(dim: int) -> EncoderLayer:
    zero = FeedForward.zero(dim)
    return EncoderLayer(zero, zero, zero, zero, MultPhi())


def build_tm_encoder(tm: TuringMachine) -> Tuple[EncoderLayer, FeedForward, FeedForward]:
    """Identity layer, k_i = [.., i, -1, 0, 0] and v_i = [.., [[s_i]], i, 0_s, 0, ..]."""
    layout = TMVectorLayout.for_machine(tm)
    d = layout.dim
    keys = zero_matrix(d, d)
    keys[layout.x9, layout.x8] = ONE
    keys[layout.x8, layout.x9] = -ONE
    values = zero_matrix(d, d)
    for offset in range(layout.n_symbols):
        values[layout.s3.start + offset, layout.s3.start + offset] = ONE
    values[layout.x9, layout.x6] = ONE
    return _identity_encoder(d), FeedForward.single(keys), FeedForward.single(values)


def pair_encoder(codec: OneHotCodec) -> FeedForward:
    """sigma([[q]] S + [[s]] S' - 1) = [[(q, s)]]: one sigma stage over [q || s]."""
    n_states, n_symbols = codec.n_states, codec.n_symbols
    mat = zero_matrix(n_states + n_symbols, codec.n_pairs)
    for s in range(n_symbols):
        for q in range(n_states):
            column = s * n_states + q
            mat[q, column] = ONE
            mat[n_states + s, column] = ONE
    bias = np.full(codec.n_pairs, -ONE, dtype=object)
    return FeedForward.single(mat, bias, Activation.SIGMA)


def transition_matrix(tm: TuringMachine, codec: OneHotCodec) -> np.ndarray:
    """M with row pi(q, s) equal to [[delta(q, s)]] over the triple enumeration."""
    mat = zero_matrix(codec.n_pairs, 2 * codec.n_pairs)
    for state in tm.states:
        for symbol in tm.alphabet:
            if tm.is_accepting(state):
                target = codec.triple(state, symbol, 1)
            else:
                rule = tm.delta[(state, symbol)]
                target = codec.triple(rule.next, rule.write, 1 if rule.move == "R" else -1)
            mat[codec.pair(state, symbol), target] = ONE
    return mat


def triple_decoder(codec: OneHotCodec) -> np.ndarray:
    """A with [[(q, s, m)]] A = [[[q]], [[s]], m]."""
    n_states, n_symbols = codec.n_states, codec.n_symbols
    mat = zero_matrix(2 * codec.n_pairs, n_states + n_symbols + 1)
    for move in (-1, 1):
        for s in range(n_symbols):
            for q in range(n_states):
                row = s * n_states + q + (codec.n_pairs if move > 0 else 0)
                mat[row, q] = ONE
                mat[row, n_states + s] = ONE
                mat[row, n_states + n_symbols] = Fraction(move)
    return mat


def build_transition_ffn(tm: TuringMachine) -> FeedForward:
    """O_1: clears group 1 and writes [[q^(i+1)]], [[v^(i)]], m^(i), m^(i-1) into group 2."""
    layout = TMVectorLayout.for_machine(tm)
    codec = OneHotCodec(tm)
    d, nq, ns = layout.dim, codec.n_states, codec.n_symbols
    hidden = nq + ns + 1 + codec.n_pairs
    m_hat, pairs = nq + ns, nq + ns + 1

    first = zero_matrix(d, hidden)
    first_bias = zeros(hidden)
    for q in range(nq):
        first[layout.q1.start + q, q] = ONE
    for s in range(ns):
        first[layout.s1.start + s, nq + s] = ONE
    first[layout.x1, m_hat] = HALF
    first_bias[m_hat] = HALF
    encoder = pair_encoder(codec).stages[0].affine
    first[layout.q1.start : layout.q1.stop, pairs:] = encoder.matrix[:nq]
    first[layout.s1.start : layout.s1.stop, pairs:] = encoder.matrix[nq:]
    first_bias[pairs:] = encoder.bias

    second = zero_matrix(hidden, d)
    second_bias = zeros(d)
    for q in range(nq):
        second[q, layout.q1.start + q] = -ONE
    for s in range(ns):
        second[nq + s, layout.s1.start + s] = -ONE
    second[m_hat, layout.x1] = Fraction(-2)
    second_bias[layout.x1] = ONE
    second[m_hat, layout.x3] = Fraction(2)
    second_bias[layout.x3] = -ONE
    lookup = transition_matrix(tm, codec).dot(triple_decoder(codec))
    second[pairs:, layout.q2.start : layout.x2 + 1] = lookup

    return FeedForward(
        (
            Stage(AffineMap(first, first_bias), Activation.SIGMA),
            Stage(AffineMap(second, second_bias), Activation.IDENTITY),
        )
    )


def _cleanup(layout: TMVectorLayout) -> FeedForward:
    """Halve the alpha/beta slots that the forced cross attention doubled."""
    mat = zero_matrix(layout.dim, layout.dim)
    for slot in list(range(layout.s3.start, layout.s3.stop)) + [layout.x6]:
        mat[slot, slot] = -HALF
    return FeedForward.single(mat)


def build_head_position_layer(tm: TuringMachine) -> DecoderLayer:
    """Fully tied self-attention averaging (m^(j), m^(j-1)) into (c^(i+1), c^(i)) / (i+1)."""
    layout = TMVectorLayout.for_machine(tm)
    d = layout.dim
    values = zero_matrix(d, d)
    values[layout.x2, layout.x4] = ONE
    values[layout.x3, layout.x5] = ONE
    zero = FeedForward.zero(d)
    return DecoderLayer(zero, zero, FeedForward.single(values), _cleanup(layout), MultPhi(), MultPhi())


def build_last_write_layer(tm: TuringMachine) -> DecoderLayer:
    """Self-attention whose single winner is l(i+1), fetching [[v^(l(i+1))]] and l(i+1)."""
    layout = TMVectorLayout.for_machine(tm)
    d = layout.dim
    query = zero_matrix(d, d)
    query[layout.x4, layout.x9] = ONE
    query[layout.x10, layout.x10] = ONE
    query[layout.x11, layout.x11] = Fraction(1, 3)
    keys = zero_matrix(d, d)
    keys[layout.x10, layout.x9] = ONE
    keys[layout.x5, layout.x10] = -ONE
    keys[layout.x11, layout.x11] = ONE
    values = zero_matrix(d, d)
    for offset in range(layout.n_symbols):
        values[layout.s2.start + offset, layout.s4.start + offset] = ONE
    values[layout.x9, layout.x7] = ONE
    values[layout.x8, layout.x7] = -ONE
    return DecoderLayer(
        FeedForward.single(query),
        FeedForward.single(keys),
        FeedForward.single(values),
        _cleanup(layout),
        MultPhi(),
        MultPhi(),
    )


def build_if_gadget(m: int, n: int) -> FeedForward:
    """f([x, y, z, b]) = [x, y] if b = 0 and [x, z] if b = 1, for binary x, y, z."""
    if m < 1 or n < 1:
        raise ValueError("if-gadget block sizes must be positive")
    width = m + 2 * n + 1
    b = width - 1
    first = zero_matrix(width, m + 2 * n)
    first_bias = zeros(m + 2 * n)
    for i in range(m + 2 * n):
        first[i, i] = ONE
    for k in range(n):
        first[b, m + k] = -ONE
        first[b, m + n + k] = ONE
        first_bias[m + n + k] = -ONE
    second = zero_matrix(m + 2 * n, m + n)
    for i in range(m):
        second[i, i] = ONE
    for k in range(n):
        second[m + k, m + k] = ONE
        second[m + n + k, m + k] = ONE
    return FeedForward(
        (
            Stage(AffineMap(first, first_bias), Activation.SIGMA),
            Stage(AffineMap.linear(second), Activation.IDENTITY),
        )
    )


def build_output_F(tm: TuringMachine) -> FeedForward:
    """F(z^3_r) = [[[q^(r+1)]], [[s^(r+1)]], m^(r), 0, ..]."""
    layout = TMVectorLayout.for_machine(tm)
    d, nq, ns = layout.dim, layout.n_states, layout.n_symbols
    # stage 1 layout: [q, mh(2), alpha, b1, vl, hash, b2]
    mh = nq
    alpha = nq + 2
    b1 = alpha + ns
    vl = b1 + 1
    hashed = vl + ns
    b2 = hashed + ns
    width = b2 + 1

    prepare = zero_matrix(d, width)
    prepare_bias = zeros(width)
    for q in range(nq):
        prepare[layout.q2.start + q, q] = ONE
    prepare[layout.x2, mh] = HALF
    prepare[layout.x2, mh + 1] = -HALF
    prepare_bias[mh] = HALF
    prepare_bias[mh + 1] = HALF
    for s in range(ns):
        prepare[layout.s3.start + s, alpha + s] = ONE
        prepare[layout.s4.start + s, vl + s] = ONE
    prepare[layout.x9, b1] = ONE
    prepare[layout.x6, b1] = -ONE
    prepare_bias[hashed + tm.symbol_index(tm.blank)] = ONE
    prepare[layout.x7, b2] = ONE
    prepare[layout.x9, b2] = -ONE
    prepare[layout.x8, b2] = Fraction(2)

    # [q, mh, alpha, b1, sel] -> [q, mh, alpha, sel, b1]
    kept = nq + 2 + ns
    swap = zero_matrix(kept + 1 + ns, kept + ns + 1)
    for i in range(kept):
        swap[i, i] = ONE
    swap[kept, kept + ns] = ONE
    for k in range(ns):
        swap[kept + 1 + k, kept + k] = ONE

    finish = zero_matrix(nq + 2 + ns, d)
    for q in range(nq):
        finish[q, layout.q1.start + q] = ONE
    finish[mh, layout.x1] = ONE
    finish[mh + 1, layout.x1] = -ONE
    for s in range(ns):
        finish[nq + 2 + s, layout.s1.start + s] = ONE

    network = (
        FeedForward((Stage(AffineMap(prepare, prepare_bias), Activation.SIGMA),))
        .then(build_if_gadget(nq + 2 + ns + 1, ns))
        .then(FeedForward.single(swap))
        .then(build_if_gadget(nq + 2, ns))
        .then(FeedForward.single(finish))
    )
    return network.fused()


def compile_tm(tm: TuringMachine) -> Recognizer:
    validate_tm(tm)
    layout = TMVectorLayout.for_machine(tm)
    d = layout.dim
    embed, posenc = build_tm_embedding(tm)
    encoder, final_K, final_V = build_tm_encoder(tm)
    zero = FeedForward.zero(d)
    transition_layer = DecoderLayer(zero, zero, zero, build_transition_ffn(tm), MultPhi(), MultPhi())
    params = TransformerParams(
        d,
        (encoder,),
        final_K,
        final_V,
        (transition_layer, build_head_position_layer(tm), build_last_write_layer(tm)),
        build_output_F(tm),
    )
    seed = zeros(d)
    seed[layout.q1.start + tm.state_index(tm.init)] = ONE
    seed[layout.s1.start + tm.symbol_index(tm.blank)] = ONE
    accepting = [tm.state_index(state) for state in tm.accept]
    final_pred = FinalPredicate.one_hot_in(range(layout.q1.start, layout.q1.stop), accepting)
    logger.info("compiled machine with %d states, %d symbols into dimension %d", len(tm.states), len(tm.alphabet), d)
    return Recognizer(tm.alphabet, embed, posenc, params, seed, final_pred, tuple(layout.slot_names(tm)))


def expected_output(tm: TuringMachine, trace: TMTrace, t: int) -> np.ndarray:
    """y_t = [[[q^(t)]], [[s^(t)]], m^(t-1), 0, ..]."""
    layout = TMVectorLayout.for_machine(tm)
    out = zeros(layout.dim)
    out[layout.q1.start + tm.state_index(trace.states[t])] = ONE
    out[layout.s1.start + tm.symbol_index(trace.read[t])] = ONE
    out[layout.x1] = Fraction(trace.move(t - 1))
    return out


def expected_first_layer(tm: TuringMachine, trace: TMTrace, w: Sequence[str], i: int) -> np.ndarray:
    """z^1_i for trace index i (requires step i + 1 in the trace)."""
    layout = TMVectorLayout.for_machine(tm)
    symbols = list(w)
    n = len(symbols)
    out = zeros(layout.dim)
    out[layout.q2.start + tm.state_index(trace.states[i + 1])] = ONE
    out[layout.s2.start + tm.symbol_index(trace.written[i])] = ONE
    out[layout.x2] = Fraction(trace.move(i))
    out[layout.x3] = Fraction(trace.move(i - 1))
    j = min(i + 1, n)
    out[layout.s3.start + tm.symbol_index(symbols[j - 1])] = ONE
    out[layout.x6] = Fraction(j)
    position = i + 1
    out[layout.x8 : layout.x11 + 1] = [ONE, Fraction(position), Fraction(1, position), Fraction(1, position**2)]
    return out


def sigma_stage_outputs(net: FeedForward, x: np.ndarray) -> List[np.ndarray]:
    """Outputs of the sigma stages of ``net`` on x, for range audits."""
    return [value for stage, value in zip(net.stages, net.trace(x)) if stage.activation is Activation.SIGMA]


def audit_values(values: Sequence[np.ndarray]) -> List[Fraction]:
    """Entries outside {0, 1/2, 1}."""
    allowed = (0, HALF, 1)
    return [entry for value in values for entry in value if entry not in allowed]
