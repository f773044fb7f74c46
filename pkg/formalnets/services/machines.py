"""Reference interpreters: normalized and general Turing machines, and the simplified RNN encoder-decoder."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
import logging
from typing import Dict, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from formalnets.exceptions import NormalizationError, ShapeError, SpecError, UnknownSymbolError
from formalnets.services.linalg import Activation, activate, as_rational_array, zeros
from formalnets.services.transformer import AcceptDecision, FinalPredicate

logger = logging.getLogger(__name__)

MOVES = {"L": -1, "R": 1, "S": 0}


class Transition(NamedTuple):
    next: str
    write: str
    move: str


@dataclass(frozen=True)
class TuringMachine:
    """Deterministic single-tape machine in the normal form the compiler expects.

    The input sits on cells 1..n, the head starts on cell 0 reading the blank,
    every transition moves L or R and accepting states have no transitions.
    """

    states: Tuple[str, ...]
    alphabet: Tuple[str, ...]
    init: str
    read_state: str
    accept: Tuple[str, ...]
    delta: Mapping[Tuple[str, str], Transition]
    blank: str = "#"

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(self, "accept", tuple(self.accept))
        object.__setattr__(self, "delta", {key: Transition(*rule) for key, rule in self.delta.items()})
        object.__setattr__(self, "_state_index", {q: i for i, q in enumerate(self.states)})
        object.__setattr__(self, "_symbol_index", {s: i for i, s in enumerate(self.alphabet)})

    def state_index(self, state: str) -> int:
        return self._state_index[state]  # type: ignore[attr-defined]

    def symbol_index(self, symbol: str) -> int:
        return self._symbol_index[symbol]  # type: ignore[attr-defined]

    def is_accepting(self, state: str) -> bool:
        return state in self.accept

    def rules(self) -> Iterator[Tuple[str, str, Transition]]:
        """Transitions in (state, read) declaration order."""
        for state in self.states:
            for symbol in self.alphabet:
                rule = self.delta.get((state, symbol))
                if rule is not None:
                    yield state, symbol, rule

    def with_rule(self, state: str, symbol: str, rule: Transition) -> "TuringMachine":
        delta = dict(self.delta)
        delta[(state, symbol)] = Transition(*rule)
        return TuringMachine(self.states, self.alphabet, self.init, self.read_state, self.accept, delta, self.blank)


@dataclass(frozen=True)
class GeneralTuringMachine:
    """Unrestricted deterministic machine.

    Moves may be L, R or S; a missing rule halts and rejects; rules out of
    accepting states are ignored.  The head starts on cell 0.  Without a read
    state the input sits on cells 0..n-1 and the head may use one cell of
    margin to the left; a machine that declares a read state runs its own
    read phase, so its input sits on cells 1..n and cell 0 is the margin.
    """

    states: Tuple[str, ...]
    alphabet: Tuple[str, ...]
    init: str
    accept: Tuple[str, ...]
    delta: Mapping[Tuple[str, str], Transition]
    blank: str = "#"
    read_state: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(self, "accept", tuple(self.accept))
        object.__setattr__(self, "delta", {key: Transition(*rule) for key, rule in self.delta.items()})
        if self.blank not in self.alphabet:
            raise SpecError(f"blank {self.blank!r} is not in the alphabet {list(self.alphabet)}")
        known = set(self.states)
        for (state, symbol), rule in self.delta.items():
            if state not in known or rule.next not in known:
                raise SpecError(f"rule ({state}, {symbol}) -> {tuple(rule)} uses an unknown state")
            if symbol not in self.alphabet or rule.write not in self.alphabet:
                raise SpecError(f"rule ({state}, {symbol}) -> {tuple(rule)} uses an unknown symbol")
            if rule.move not in MOVES:
                raise SpecError(f"rule ({state}, {symbol}) has move {rule.move!r}; expected L, R or S")
        if self.init not in known or any(q not in known for q in self.accept):
            raise SpecError("initial and accepting states must be declared states")
        if self.read_state is not None and self.read_state not in known:
            raise SpecError(f"read state {self.read_state!r} is not declared")

    @property
    def input_origin(self) -> int:
        """Cell holding the first input symbol."""
        return 0 if self.read_state is None else 1


@dataclass(frozen=True)
class TMTrace:
    """Per-step quantities of a normalized run; ``moves[i]`` is m^(i)."""

    states: Tuple[str, ...]
    read: Tuple[str, ...]
    written: Tuple[str, ...]
    moves: Tuple[int, ...]
    cells: Tuple[int, ...]
    last_visit: Tuple[int, ...]
    input_length: int
    accept_time: Optional[int] = None

    @property
    def length(self) -> int:
        """Number of recorded steps, i.e. the largest index i plus one."""
        return len(self.states)

    def move(self, i: int) -> int:
        """m^(i) with m^(-1) = 0."""
        return 0 if i < 0 else self.moves[i]

    def frame(self) -> pd.DataFrame:
        rows = []
        for i in range(self.length):
            rows.append(
                {
                    "step": i,
                    "state": self.states[i],
                    "read": self.read[i],
                    "written": self.written[i] if i < len(self.written) else "",
                    "move": self.moves[i] if i < len(self.moves) else "",
                    "cell": self.cells[i],
                    "last_visit": self.last_visit[i],
                }
            )
        return pd.DataFrame(rows, columns=["step", "state", "read", "written", "move", "cell", "last_visit"])


def validate_tm(tm: TuringMachine) -> None:
    """Raise unless ``tm`` satisfies every normal-form assumption."""
    if tm.blank not in tm.alphabet:
        raise SpecError(f"blank {tm.blank!r} is not in the alphabet {list(tm.alphabet)}")
    if len(set(tm.states)) != len(tm.states) or len(set(tm.alphabet)) != len(tm.alphabet):
        raise SpecError("states and alphabet symbols must be distinct")
    known = set(tm.states)
    for name, state in (("initial", tm.init), ("read", tm.read_state)):
        if state not in known:
            raise SpecError(f"{name} state {state!r} is not declared")
    for state in tm.accept:
        if state not in known:
            raise SpecError(f"accepting state {state!r} is not declared")
    if tm.read_state in tm.accept:
        raise NormalizationError(f"read state {tm.read_state!r} must not be accepting")
    for (state, symbol), rule in tm.delta.items():
        label = f"rule ({state}, {symbol}) -> ({rule.next}, {rule.write}, {rule.move})"
        if state not in known or rule.next not in known:
            raise SpecError(f"{label} uses an unknown state")
        if symbol not in tm.alphabet or rule.write not in tm.alphabet:
            raise SpecError(f"{label} uses an unknown symbol")
        if rule.move not in ("L", "R"):
            raise NormalizationError(f"{label} does not move the head; only L and R are allowed")
        if tm.is_accepting(state):
            raise NormalizationError(f"{label} leaves an accepting state")
    for state in tm.states:
        if tm.is_accepting(state):
            continue
        for symbol in tm.alphabet:
            if (state, symbol) not in tm.delta:
                raise SpecError(f"missing transition for ({state}, {symbol})")
    first = tm.delta[(tm.init, tm.blank)]
    if first != Transition(tm.read_state, tm.blank, "R"):
        raise NormalizationError(
            f"initial rule must be ({tm.init}, {tm.blank}) -> ({tm.read_state}, {tm.blank}, R), got {tuple(first)}"
        )
    for symbol in tm.alphabet:
        if symbol == tm.blank:
            continue
        rule = tm.delta[(tm.read_state, symbol)]
        if rule.next != tm.read_state or rule.move != "R":
            raise NormalizationError(
                f"read-phase rule ({tm.read_state}, {symbol}) must stay in {tm.read_state} and move R, got {tuple(rule)}"
            )


def check_word(alphabet: Sequence[str], blank: str, w: Sequence[str]) -> List[str]:
    symbols = list(w)
    if not symbols:
        raise SpecError("input words must be non-empty")
    for symbol in symbols:
        if symbol == blank:
            raise SpecError(f"the blank {blank!r} cannot appear in an input word")
        if symbol not in alphabet:
            raise UnknownSymbolError(symbol, tuple(alphabet))
    return symbols


def last_visits(cells: Sequence[int]) -> List[int]:
    """l(i) = max{j < i : c_j = c_i}, or i - 1 when the cell is new."""
    seen: Dict[int, int] = {}
    out: List[int] = []
    for i, cell in enumerate(cells):
        out.append(seen.get(cell, i - 1))
        seen[cell] = i
    return out


def tm_trace(tm: TuringMachine, w: Sequence[str], T: int) -> TMTrace:
    """Run ``tm`` for up to T steps on w, stopping when an accepting state is entered."""
    symbols = check_word(tm.alphabet, tm.blank, w)
    tape: Dict[int, str] = {cell: symbol for cell, symbol in enumerate(symbols, start=1)}
    state, cell = tm.init, 0
    states, read, cells = [state], [tm.blank], [cell]
    written: List[str] = []
    moves: List[int] = []
    accept_time: Optional[int] = 0 if tm.is_accepting(state) else None
    for i in range(T):
        if accept_time is not None:
            break
        rule = tm.delta.get((state, read[-1]))
        if rule is None:
            raise SpecError(f"missing transition for ({state}, {read[-1]}) at step {i}")
        tape[cell] = rule.write
        written.append(rule.write)
        moves.append(MOVES[rule.move])
        cell += MOVES[rule.move]
        if cell < 0:
            raise NormalizationError(f"head moved left of cell 0 at step {i}")
        state = rule.next
        states.append(state)
        read.append(tape.get(cell, tm.blank))
        cells.append(cell)
        if tm.is_accepting(state):
            accept_time = i + 1
    return TMTrace(
        tuple(states),
        tuple(read),
        tuple(written),
        tuple(moves),
        tuple(cells),
        tuple(last_visits(cells)),
        len(symbols),
        accept_time,
    )


def tm_accepts(tm: TuringMachine, w: Sequence[str], max_steps: int) -> AcceptDecision:
    trace = tm_trace(tm, w, max_steps)
    if trace.accept_time is None:
        return AcceptDecision.undecided()
    return AcceptDecision.accept(trace.accept_time)


def run_general_tm(tm: GeneralTuringMachine, w: Sequence[str], max_steps: int) -> AcceptDecision:
    """Reference run of a general machine; a missing rule rejects."""
    symbols = check_word(tm.alphabet, tm.blank, w)
    origin = tm.input_origin
    tape: Dict[int, str] = dict(enumerate(symbols, start=origin))
    state, cell = tm.init, 0
    for step in range(max_steps + 1):
        if state in tm.accept:
            return AcceptDecision.accept(step)
        if step == max_steps:
            break
        rule = tm.delta.get((state, tape.get(cell, tm.blank)))
        if rule is None:
            return AcceptDecision.undecided()
        tape[cell] = rule.write
        cell += MOVES[rule.move]
        if cell < origin - 1:
            raise NormalizationError(f"head moved past the left margin at step {step}")
        state = rule.next
    return AcceptDecision.undecided()


def _fresh(name: str, taken: set) -> str:
    while name in taken:
        name = f"_{name}"
    taken.add(name)
    return name


def as_normalized(tm: GeneralTuringMachine) -> TuringMachine:
    """Reinterpret a general machine that already declares a read state."""
    if tm.read_state is None:
        raise NormalizationError("machine declares no read state")
    return TuringMachine(tm.states, tm.alphabet, tm.init, tm.read_state, tm.accept, tm.delta, tm.blank)


def _stay_helpers(tm: GeneralTuringMachine, taken: set) -> Dict[str, str]:
    """One fresh state per target of a stay move, in state declaration order."""
    targets = []
    for (state, _symbol), rule in tm.delta.items():
        if state not in tm.accept and rule.move == "S" and rule.next not in targets:
            targets.append(rule.next)
    order = {q: i for i, q in enumerate(tm.states)}
    targets.sort(key=order.__getitem__)
    return {target: _fresh(f"stay_{target}", taken) for target in targets}


def _original_rules(
    tm: GeneralTuringMachine,
    stay: Mapping[str, str],
    reject: Optional[str],
) -> Dict[Tuple[str, str], Transition]:
    """The machine's own rules with stay moves split in two and gaps sent to ``reject``."""
    delta: Dict[Tuple[str, str], Transition] = {}
    for symbol in tm.alphabet:
        for target, name in stay.items():
            delta[(name, symbol)] = Transition(target, symbol, "L")
        if reject is not None:
            delta[(reject, symbol)] = Transition(reject, symbol, "R")
    for state in tm.states:
        if state in tm.accept:
            continue
        for symbol in tm.alphabet:
            rule = tm.delta.get((state, symbol))
            if rule is None:
                delta[(state, symbol)] = Transition(reject, symbol, "R")
            elif rule.move == "S":
                delta[(state, symbol)] = Transition(stay[rule.next], rule.write, "R")
            else:
                delta[(state, symbol)] = rule
    return delta


def _is_partial(tm: GeneralTuringMachine) -> bool:
    return any(
        (state, symbol) not in tm.delta for state in tm.states if state not in tm.accept for symbol in tm.alphabet
    )


def _complete_in_place(tm_general: GeneralTuringMachine) -> TuringMachine:
    """Normal form of a machine that already runs its own read phase on cells 1..n."""
    if all(rule.move != "S" for rule in tm_general.delta.values()):
        candidate = as_normalized(tm_general)
        try:
            validate_tm(candidate)
        except SpecError:
            logger.info("machine declares a read state but is not normalized; completing it")
        else:
            return candidate
    taken = set(tm_general.states)
    stay = _stay_helpers(tm_general, taken)
    reject = _fresh("reject", taken) if _is_partial(tm_general) else None
    delta = _original_rules(tm_general, stay, reject)
    states = tm_general.states + tuple(stay.values()) + ((reject,) if reject else ())
    normalized = TuringMachine(
        states, tm_general.alphabet, tm_general.init, tm_general.read_state, tm_general.accept, delta, tm_general.blank
    )
    validate_tm(normalized)
    logger.info("completed machine: %d states (%d stay helpers), %d rules", len(states), len(stay), len(delta))
    return normalized


def normalize_tm(tm_general: GeneralTuringMachine) -> TuringMachine:
    """Equivalent machine in normal form.

    A machine that declares a read state already keeps its input on cells
    1..n; it is returned as is when it validates, and otherwise only gains a
    fresh state per stay target and, for missing rules, a rejecting sink.
    Any other machine is wrapped: a fresh read state scans the input, a rewind
    state walks back to cell 0 and the original machine starts on cell 1 (the
    one-cell shift that keeps the margin on cell 0).  In both cases stay moves
    go right and come back through the helper state, and rules out of
    accepting states are dropped.
    """
    if tm_general.read_state is not None:
        return _complete_in_place(tm_general)

    blank = tm_general.blank
    taken = set(tm_general.states)
    init = _fresh("init", taken)
    read = _fresh("read", taken)
    rewind = _fresh("rewind", taken)
    stay = _stay_helpers(tm_general, taken)
    reject = _fresh("reject", taken)

    delta = _original_rules(tm_general, stay, reject)
    for symbol in tm_general.alphabet:
        if symbol == blank:
            delta[(init, symbol)] = Transition(read, blank, "R")
            delta[(read, symbol)] = Transition(rewind, blank, "L")
            delta[(rewind, symbol)] = Transition(tm_general.init, blank, "R")
        else:
            delta[(init, symbol)] = Transition(reject, symbol, "R")
            delta[(read, symbol)] = Transition(read, symbol, "R")
            delta[(rewind, symbol)] = Transition(rewind, symbol, "L")

    states = (init, read, rewind) + tm_general.states + tuple(stay.values()) + (reject,)
    normalized = TuringMachine(states, tm_general.alphabet, init, read, tm_general.accept, delta, blank)
    validate_tm(normalized)
    logger.info(
        "normalized machine: %d states (%d stay helpers), %d rules",
        len(states),
        len(stay),
        len(delta),
    )
    return normalized


def _square(name: str, mat: np.ndarray, dim: int) -> np.ndarray:
    mat = as_rational_array(mat)
    if mat.shape != (dim, dim):
        raise ShapeError(f"{name} has shape {mat.shape}, expected ({dim}, {dim})")
    return mat


@dataclass(frozen=True, eq=False)
class RnnEncDec:
    """h_i = sigma(x_i W + h_{i-1} V), g_0 = h_n, g_t = sigma(g_{t-1} U)."""

    dim: int
    W: np.ndarray
    V: np.ndarray
    U: np.ndarray
    embed: Mapping[str, np.ndarray] = field(default_factory=dict)
    accept: FinalPredicate = field(default_factory=FinalPredicate)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ShapeError("RNN dimension must be positive")
        for name in ("W", "V", "U"):
            object.__setattr__(self, name, _square(name, getattr(self, name), self.dim))
        embed = {symbol: as_rational_array(value) for symbol, value in self.embed.items()}
        for symbol, value in embed.items():
            if value.shape != (self.dim,):
                raise ShapeError(f"embedding of {symbol!r} has shape {value.shape}, expected ({self.dim},)")
        object.__setattr__(self, "embed", embed)
        if self.accept.max_slot() >= self.dim:
            raise ShapeError(f"accepting predicate reads slot {self.accept.max_slot()} of a {self.dim}-dim state")

    @property
    def alphabet(self) -> Tuple[str, ...]:
        return tuple(self.embed)

    def embed_word(self, w: Sequence[str]) -> List[np.ndarray]:
        symbols = list(w)
        if not symbols:
            raise SpecError("input words must be non-empty")
        for symbol in symbols:
            if symbol not in self.embed:
                raise UnknownSymbolError(symbol, self.alphabet)
        return [self.embed[symbol] for symbol in symbols]


class RnnRun(NamedTuple):
    hidden: List[np.ndarray]
    decoded: List[np.ndarray]


def rnn_run(rnn: RnnEncDec, X: Sequence[np.ndarray], r: int) -> RnnRun:
    """Encoder states h_0..h_n and decoder states g_0..g_r."""
    h = zeros(rnn.dim)
    hidden = [h]
    for index, x in enumerate(X):
        if x.shape != (rnn.dim,):
            raise ShapeError(f"input {index} has shape {x.shape}, expected ({rnn.dim},)")
        h = activate(Activation.SIGMA, (x.dot(rnn.W) + h.dot(rnn.V)).astype(object))
        hidden.append(h)
    g = hidden[-1]
    decoded = [g]
    for _ in range(r):
        g = activate(Activation.SIGMA, g.dot(rnn.U).astype(object))
        decoded.append(g)
    return RnnRun(hidden, decoded)


def rnn_accepts(
    rnn: RnnEncDec,
    X: Sequence[np.ndarray],
    predicate: Optional[FinalPredicate] = None,
    max_steps: int = 64,
) -> AcceptDecision:
    """Least t with g_t accepted, reported as the decoder step n + 1 + t."""
    predicate = rnn.accept if predicate is None else predicate
    n = len(X)
    remaining = max_steps - n - 1
    if remaining < 0:
        return AcceptDecision.undecided()
    for t, g in enumerate(rnn_run(rnn, X, remaining).decoded):
        if predicate.holds(g):
            return AcceptDecision.accept(n + 1 + t)
    return AcceptDecision.undecided()


_WEIGHTS = (Fraction(-1, 3), Fraction(-1, 6), Fraction(0), Fraction(1, 6), Fraction(1, 3))


def random_rnn(d: int, rng: np.random.Generator, alphabet: Sequence[str] = ("a", "b")) -> RnnEncDec:
    """Small random network with weights in {-1, -1/2, 0, 1/2, 1} / 3."""

    def draw(shape: Tuple[int, ...]) -> np.ndarray:
        picks = rng.integers(0, len(_WEIGHTS), size=shape)
        out = np.empty(shape, dtype=object)
        for index, pick in np.ndenumerate(picks):
            out[index] = _WEIGHTS[pick]
        return out

    embed = {symbol: random_input(d, rng) for symbol in alphabet}
    return RnnEncDec(d, draw((d, d)), draw((d, d)), draw((d, d)), embed)


def random_input(d: int, rng: np.random.Generator, denominator: int = 4) -> np.ndarray:
    """Vector of rationals k/denominator in [0, 1]."""
    out = zeros(d)
    for i, k in enumerate(rng.integers(0, denominator + 1, size=d)):
        out[i] = Fraction(int(k), denominator)
    return out
