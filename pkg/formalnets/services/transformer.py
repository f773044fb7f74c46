"""Hard-attention Transformer: encoder, decoder, the autoregressive loop and recognizers."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from formalnets.exceptions import ShapeError, SpecError, UnknownSymbolError
from formalnets.services.attention import KVPair, MultPhi, PosDiff, ScoreFn, tied_indices
from formalnets.services.linalg import FeedForward, as_rational_array, rat, zeros

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EncoderLayer:
    Q: FeedForward
    K: FeedForward
    V: FeedForward
    O: FeedForward
    score: ScoreFn = field(default_factory=MultPhi)

    def maps(self) -> Dict[str, FeedForward]:
        return {"Q": self.Q, "K": self.K, "V": self.V, "O": self.O}


@dataclass(frozen=True)
class DecoderLayer:
    Qself: FeedForward
    Kself: FeedForward
    Vself: FeedForward
    O: FeedForward
    self_score: ScoreFn = field(default_factory=MultPhi)
    cross_score: ScoreFn = field(default_factory=MultPhi)

    def maps(self) -> Dict[str, FeedForward]:
        return {"Qself": self.Qself, "Kself": self.Kself, "Vself": self.Vself, "O": self.O}


def _check_square(name: str, net: FeedForward, dim: int) -> None:
    for side, value in (("input", net.in_dim), ("output", net.out_dim)):
        if value is not None and value != dim:
            raise ShapeError(f"{name} has {side} dimension {value}, model dimension is {dim}")


def _check_score(name: str, score: ScoreFn, dim: int) -> None:
    if isinstance(score, PosDiff) and not 0 <= score.slot < dim:
        raise ShapeError(f"{name} reads positional slot {score.slot} outside dimension {dim}")


@dataclass(frozen=True)
class TransformerParams:
    """Complete parameter set of an encoder-decoder Transformer of dimension ``dim``."""

    dim: int
    enc_layers: Tuple[EncoderLayer, ...]
    final_K: FeedForward
    final_V: FeedForward
    dec_layers: Tuple[DecoderLayer, ...]
    final_F: FeedForward

    def __post_init__(self) -> None:
        object.__setattr__(self, "enc_layers", tuple(self.enc_layers))
        object.__setattr__(self, "dec_layers", tuple(self.dec_layers))
        if self.dim < 1:
            raise ShapeError("model dimension must be positive")
        if not self.enc_layers or not self.dec_layers:
            raise SpecError("a Transformer needs at least one encoder and one decoder layer")
        for index, layer in enumerate(self.enc_layers):
            for name, net in layer.maps().items():
                _check_square(f"encoder layer {index} {name}", net, self.dim)
            _check_score(f"encoder layer {index} score", layer.score, self.dim)
        for index, layer in enumerate(self.dec_layers):
            for name, net in layer.maps().items():
                _check_square(f"decoder layer {index} {name}", net, self.dim)
            _check_score(f"decoder layer {index} self score", layer.self_score, self.dim)
            _check_score(f"decoder layer {index} cross score", layer.cross_score, self.dim)
        for name in ("final_K", "final_V", "final_F"):
            _check_square(name, getattr(self, name), self.dim)


@dataclass(frozen=True)
class PositionalEncoding:
    """Declarative pos: N -> Q^d.

    ``zero`` adds nothing, ``index`` writes i at ``slot`` and ``harmonic``
    writes (1, i, 1/i, 1/i^2) at ``slot`` .. ``slot + 3``.
    """

    kind: str = "zero"
    slot: int = 0

    KINDS = ("zero", "index", "harmonic")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise SpecError(f"unknown positional encoding {self.kind!r}")
        if self.slot < 0:
            raise SpecError("positional slot must be non-negative")

    def width(self) -> int:
        return {"zero": 0, "index": 1, "harmonic": 4}[self.kind]

    def check(self, dim: int) -> None:
        if self.slot + self.width() > dim:
            raise ShapeError(f"{self.kind} encoding at slot {self.slot} does not fit dimension {dim}")

    def vector(self, position: int, dim: int) -> np.ndarray:
        if position < 1:
            raise ValueError("positions start at 1")
        out = zeros(dim)
        if self.kind == "index":
            out[self.slot] = Fraction(position)
        elif self.kind == "harmonic":
            out[self.slot : self.slot + 4] = [
                Fraction(1),
                Fraction(position),
                Fraction(1, position),
                Fraction(1, position * position),
            ]
        return out


@dataclass(frozen=True)
class Constraint:
    """One clause of a final-set predicate over 0-based coordinates."""

    kind: str
    slots: Tuple[int, ...]
    value: Optional[Fraction] = None
    indices: Tuple[int, ...] = ()

    KINDS = ("equals", "greater_than", "one_hot_in", "unconstrained")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise SpecError(f"unknown constraint kind {self.kind!r}")
        object.__setattr__(self, "slots", tuple(int(slot) for slot in self.slots))
        object.__setattr__(self, "indices", tuple(int(index) for index in self.indices))
        if self.kind in ("equals", "greater_than"):
            if self.value is None:
                raise SpecError(f"{self.kind} constraint needs a value")
            object.__setattr__(self, "value", rat(self.value))
        if self.kind == "one_hot_in" and any(not 0 <= i < len(self.slots) for i in self.indices):
            raise SpecError("one_hot_in indices must point inside the constrained slots")

    def holds(self, y: np.ndarray) -> bool:
        if self.kind == "unconstrained":
            return True
        values = [y[slot] for slot in self.slots]
        if self.kind == "equals":
            return all(value == self.value for value in values)
        if self.kind == "greater_than":
            return all(value > self.value for value in values)
        ones = [i for i, value in enumerate(values) if value == 1]
        if len(ones) != 1 or any(value not in (0, 1) for value in values):
            return False
        return ones[0] in self.indices

    def shifted(self, offset: int) -> "Constraint":
        return Constraint(self.kind, tuple(slot + offset for slot in self.slots), self.value, self.indices)


@dataclass(frozen=True)
class FinalPredicate:
    """Conjunction of constraints; the empty conjunction accepts everything."""

    constraints: Tuple[Constraint, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @classmethod
    def equals(cls, slots: Sequence[int], value) -> "FinalPredicate":
        return cls((Constraint("equals", tuple(slots), rat(value)),))

    @classmethod
    def greater_than(cls, slots: Sequence[int], value) -> "FinalPredicate":
        return cls((Constraint("greater_than", tuple(slots), rat(value)),))

    @classmethod
    def one_hot_in(cls, slots: Sequence[int], indices: Sequence[int]) -> "FinalPredicate":
        return cls((Constraint("one_hot_in", tuple(slots), indices=tuple(indices)),))

    def holds(self, y: np.ndarray) -> bool:
        return all(constraint.holds(y) for constraint in self.constraints)

    def shifted(self, offset: int) -> "FinalPredicate":
        return FinalPredicate(tuple(c.shifted(offset) for c in self.constraints))

    def __and__(self, other: "FinalPredicate") -> "FinalPredicate":
        return FinalPredicate(self.constraints + other.constraints)

    def max_slot(self) -> int:
        return max((max(c.slots) for c in self.constraints if c.slots), default=-1)


@dataclass(frozen=True)
class AcceptDecision:
    accepted: bool
    step: Optional[int] = None

    @classmethod
    def accept(cls, step: int) -> "AcceptDecision":
        return cls(True, step)

    @classmethod
    def undecided(cls) -> "AcceptDecision":
        return cls(False, None)

    def __str__(self) -> str:
        return f"accept({self.step})" if self.accepted else "undecided"


def _plus(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return (x + y).astype(object)


def _average(values: Sequence[np.ndarray], winners: Sequence[int]) -> np.ndarray:
    total = values[winners[0]].copy()
    for index in winners[1:]:
        total = total + values[index]
    if len(winners) > 1:
        total = total / len(winners)
    return total.astype(object)


def _check_vectors(X: Sequence[np.ndarray], dim: int, what: str) -> None:
    for index, x in enumerate(X):
        if x.shape != (dim,):
            raise ShapeError(f"{what} {index} has shape {x.shape}, expected ({dim},)")


def enc_layer(X: Sequence[np.ndarray], p: EncoderLayer) -> List[np.ndarray]:
    if not X:
        raise ShapeError("encoder input must be non-empty")
    dim = int(X[0].shape[0])
    _check_vectors(X, dim, "encoder input")
    kv = KVPair(tuple(p.K.apply(x) for x in X), tuple(p.V.apply(x) for x in X))
    out: List[np.ndarray] = []
    for x in X:
        winners = tied_indices(p.score.scores(p.Q.apply(x), kv.keys))
        a = _plus(_average(kv.values, winners), x)
        out.append(_plus(p.O.apply(a), a))
    return out


def run_tenc(X: Sequence[np.ndarray], params: TransformerParams) -> KVPair:
    """Fold X through the encoder stack and emit (K(X^L), V(X^L))."""
    if not X:
        raise ShapeError("encoder input must be non-empty")
    _check_vectors(X, params.dim, "encoder input")
    current = list(X)
    for layer in params.enc_layers:
        current = enc_layer(current, layer)
    return KVPair(
        tuple(params.final_K.apply(x) for x in current),
        tuple(params.final_V.apply(x) for x in current),
    )


def dec_layer(Y: Sequence[np.ndarray], kv: KVPair, p: DecoderLayer) -> List[np.ndarray]:
    """Full recomputation of one decoder layer over the whole sequence."""
    if not Y:
        raise ShapeError("decoder input must be non-empty")
    dim = int(Y[0].shape[0])
    _check_vectors(Y, dim, "decoder input")
    keys = [p.Kself.apply(y) for y in Y]
    values = [p.Vself.apply(y) for y in Y]
    out: List[np.ndarray] = []
    for i, y in enumerate(Y):
        winners = tied_indices(p.self_score.scores(p.Qself.apply(y), keys[: i + 1]))
        p_i = _plus(_average(values, winners), y)
        cross = tied_indices(p.cross_score.scores(p_i, kv.keys))
        a_i = _plus(_average(kv.values, cross), p_i)
        out.append(_plus(p.O.apply(a_i), a_i))
    return out


@dataclass(frozen=True)
class LayerRecord:
    """What one decoder layer did at one position."""

    self_support: Tuple[int, ...]
    cross_support: Tuple[int, ...]
    attended: np.ndarray
    output: np.ndarray


@dataclass(frozen=True)
class StepRecord:
    position: int
    decoder_input: np.ndarray
    layers: Tuple[LayerRecord, ...]
    output: np.ndarray


class DecoderRun:
    """Incremental decoder evaluation.

    Each push evaluates only the newest position; earlier positions are final
    because self-attention ranges over prefixes.  Running sums of the self
    values make fully tied self-attention O(d) per step.
    """

    def __init__(self, params: TransformerParams, kv: KVPair, posenc: PositionalEncoding | None = None) -> None:
        self._params = params
        self._kv = kv
        self._posenc = posenc or PositionalEncoding()
        layers = len(params.dec_layers)
        self._keys: List[List[np.ndarray]] = [[] for _ in range(layers)]
        self._values: List[List[np.ndarray]] = [[] for _ in range(layers)]
        self._value_sums: List[np.ndarray] = [zeros(params.dim) for _ in range(layers)]
        self.records: List[StepRecord] = []

    @property
    def length(self) -> int:
        return len(self.records)

    def push(self, y: np.ndarray) -> np.ndarray:
        """Append y_t (position t+1) and return y_{t+1} = F(z^L_t)."""
        dim = self._params.dim
        if y.shape != (dim,):
            raise ShapeError(f"decoder vector of shape {y.shape}, expected ({dim},)")
        position = self.length + 1
        x = _plus(y, self._posenc.vector(position, dim))
        decoder_input = x
        layer_records: List[LayerRecord] = []
        for index, layer in enumerate(self._params.dec_layers):
            keys, values = self._keys[index], self._values[index]
            keys.append(layer.Kself.apply(x))
            value = layer.Vself.apply(x)
            values.append(value)
            self._value_sums[index] = _plus(self._value_sums[index], value)
            winners = tied_indices(layer.self_score.scores(layer.Qself.apply(x), keys))
            if len(winners) == len(values):
                attended_self = (self._value_sums[index] / len(values)).astype(object)
            else:
                attended_self = _average(values, winners)
            p = _plus(attended_self, x)
            cross = tied_indices(layer.cross_score.scores(p, self._kv.keys))
            a = _plus(_average(self._kv.values, cross), p)
            z = _plus(layer.O.apply(a), a)
            layer_records.append(LayerRecord(tuple(winners), tuple(cross), a, z))
            x = z
        output = self._params.final_F.apply(x)
        self.records.append(StepRecord(position, decoder_input, tuple(layer_records), output))
        return output


@dataclass(frozen=True)
class Recognizer:
    """Sequence-to-sequence language recognizer (alphabet, embedding, network, seed, final set)."""

    alphabet: Tuple[str, ...]
    embed: Mapping[str, np.ndarray]
    posenc: PositionalEncoding
    params: TransformerParams
    seed: np.ndarray
    final_pred: FinalPredicate
    slots: Optional[Tuple[str, ...]] = None

    def __post_init__(self) -> None:
        dim = self.params.dim
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        if len(set(self.alphabet)) != len(self.alphabet):
            raise SpecError("alphabet symbols must be distinct")
        missing = [symbol for symbol in self.alphabet if symbol not in self.embed]
        if missing:
            raise SpecError(f"no embedding for symbols {missing}")
        embed = {symbol: as_rational_array(self.embed[symbol]) for symbol in self.alphabet}
        _check_vectors(list(embed.values()), dim, "embedding")
        object.__setattr__(self, "embed", embed)
        seed = as_rational_array(self.seed)
        _check_vectors([seed], dim, "seed")
        object.__setattr__(self, "seed", seed)
        self.posenc.check(dim)
        if self.final_pred.max_slot() >= dim:
            raise ShapeError(f"final predicate reads slot {self.final_pred.max_slot()} of a {dim}-dim output")
        if self.slots is not None:
            object.__setattr__(self, "slots", tuple(self.slots))
            if len(self.slots) != dim:
                raise ShapeError(f"{len(self.slots)} slot names for dimension {dim}")

    @property
    def dim(self) -> int:
        return self.params.dim

    def encode(self, w: Sequence[str]) -> List[np.ndarray]:
        """f_pos(s_i, i) = embed(s_i) + pos(i) for i = 1..n."""
        symbols = list(w)
        if not symbols:
            raise SpecError("input words must be non-empty")
        out: List[np.ndarray] = []
        for position, symbol in enumerate(symbols, start=1):
            if symbol not in self.embed:
                raise UnknownSymbolError(symbol, self.alphabet)
            out.append(_plus(self.embed[symbol], self.posenc.vector(position, self.dim)))
        return out

    def decoder(self, w: Sequence[str]) -> DecoderRun:
        return DecoderRun(self.params, run_tenc(self.encode(w), self.params), self.posenc)


def run_trans(X: Sequence[np.ndarray], y0: np.ndarray, r: int, rec: Recognizer) -> List[np.ndarray]:
    """Autoregressive outputs y_1 .. y_r for the encoded input X."""
    if r <= 0:
        return []
    run = DecoderRun(rec.params, run_tenc(X, rec.params), rec.posenc)
    outputs: List[np.ndarray] = []
    y = as_rational_array(y0)
    for _ in range(r):
        y = run.push(y)
        outputs.append(y)
    return outputs


def recognizer_accepts(w: Sequence[str], rec: Recognizer, max_steps: int) -> AcceptDecision:
    """Least t <= max_steps with y_t in the final set, or undecided."""
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    run = rec.decoder(w)
    y = rec.seed
    for step in range(1, max_steps + 1):
        y = run.push(y)
        if rec.final_pred.holds(y):
            logger.debug("recognizer accepted %r at step %d", "".join(w), step)
            return AcceptDecision.accept(step)
    return AcceptDecision.undecided()
