"""Neural GPU over exact rationals.

States are numpy object arrays of shape (h, w, d) ("Tensor3"); kernel banks
have shape (kH, kW, d, d) and are applied with the row-vector convention
(K * S)[i, j] = sum_{u, v} S[i + u - kH//2, j + v - kW//2] @ K[u, v].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
import logging
from typing import Dict, List, Sequence, Tuple

import numpy as np

from formalnets.exceptions import GatingError, ShapeError
from formalnets.services.linalg import ONE, ZERO, Activation, activate, as_rational_array, zeros
from formalnets.services.machines import RnnEncDec, rnn_run

logger = logging.getLogger(__name__)

Tensor3 = np.ndarray


class Padding(str, Enum):
    ZERO = "zero"
    CIRCULAR = "circular"


def tensor3(h: int, w: int, d: int) -> Tensor3:
    return np.full((h, w, d), ZERO, dtype=object)


@dataclass(frozen=True, eq=False)
class KernelBank:
    """4-D kernel bank; ``weights[u, v]`` is a d_in x d_out matrix."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        weights = as_rational_array(self.weights)
        if weights.ndim != 4:
            raise ShapeError(f"kernel banks are 4-D, got shape {weights.shape}")
        weights.flags.writeable = False
        object.__setattr__(self, "weights", weights)

    @classmethod
    def zeros(cls, kH: int, kW: int, d_in: int, d_out: int | None = None) -> "KernelBank":
        return cls(np.full((kH, kW, d_in, d_in if d_out is None else d_out), ZERO, dtype=object))

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return tuple(int(n) for n in self.weights.shape)  # type: ignore[return-value]

    @property
    def kH(self) -> int:
        return self.shape[0]

    @property
    def kW(self) -> int:
        return self.shape[1]


def _shifted(S: Tensor3, du: int, dv: int, padding: Padding) -> Tensor3:
    """T[i, j] = S[i + du, j + dv] under the given padding."""
    if padding is Padding.CIRCULAR:
        return np.roll(np.roll(S, -du, axis=0), -dv, axis=1)
    h, w, _ = S.shape
    out = np.full(S.shape, ZERO, dtype=object)
    if abs(du) >= h or abs(dv) >= w:
        return out
    out[max(0, -du) : h - max(0, du), max(0, -dv) : w - max(0, dv)] = S[
        max(0, du) : h + min(0, du), max(0, dv) : w + min(0, dv)
    ]
    return out


def conv3(K: KernelBank, S: Tensor3, padding: Padding | str = Padding.ZERO) -> Tensor3:
    padding = Padding(padding)
    kH, kW, d_in, d_out = K.shape
    if S.ndim != 3 or S.shape[2] != d_in:
        raise ShapeError(f"kernel depth {d_in} does not match tensor of shape {S.shape}")
    h, w, _ = S.shape
    out = np.full((h, w, d_out), ZERO, dtype=object)
    for u in range(kH):
        for v in range(kW):
            block = K.weights[u, v]
            if not np.any(block != 0):
                continue
            shifted = _shifted(S, u - kH // 2, v - kW // 2, padding)
            out = out + np.tensordot(shifted, block, axes=([2], [0]))
    return out.astype(object)


@dataclass(frozen=True, eq=False)
class NGPUParams:
    """Uniform Neural GPU: kernel banks, (w x d) bias rows, activations and padding."""

    KU: KernelBank
    KR: KernelBank
    KF: KernelBank
    BU: np.ndarray
    BR: np.ndarray
    BF: np.ndarray
    fU: Activation = Activation.SIGMA
    fR: Activation = Activation.SIGMA
    fF: Activation = Activation.SIGMA
    padding: Padding = Padding.ZERO

    def __post_init__(self) -> None:
        shapes = {self.KU.shape, self.KR.shape, self.KF.shape}
        if len(shapes) != 1:
            raise ShapeError(f"kernel banks disagree in shape: {sorted(shapes)}")
        _, _, d_in, d_out = self.KU.shape
        if d_in != d_out:
            raise ShapeError("gated updates need square kernel matrices")
        biases = []
        for name in ("BU", "BR", "BF"):
            bias = as_rational_array(getattr(self, name))
            if bias.ndim != 2 or bias.shape[1] != d_in:
                raise ShapeError(f"{name} must be a (w x {d_in}) row matrix, got {bias.shape}")
            biases.append(bias.shape)
            object.__setattr__(self, name, bias)
        if len(set(biases)) != 1:
            raise ShapeError("bias row matrices disagree in width")
        for name in ("fU", "fR", "fF"):
            object.__setattr__(self, name, Activation(getattr(self, name)))
        object.__setattr__(self, "padding", Padding(self.padding))

    @property
    def dim(self) -> int:
        return self.KU.shape[2]

    @property
    def width(self) -> int:
        return int(self.BU.shape[0])


def _check_gate(name: str, activation: Activation, gate: Tensor3) -> None:
    if activation is Activation.SIGMA:
        return
    if not bool(np.all((gate >= 0) & (gate <= 1))):
        raise GatingError(f"{name} gate left [0, 1]")


def ngpu_step(S: Tensor3, p: NGPUParams) -> Tensor3:
    """S' = U * S + (1 - U) * fF(KF * (R * S) + BF)."""
    if S.ndim != 3 or S.shape[1:] != (p.width, p.dim):
        raise ShapeError(f"state of shape {S.shape} does not fit width {p.width} and depth {p.dim}")
    update = activate(p.fU, (conv3(p.KU, S, p.padding) + p.BU[np.newaxis]).astype(object))
    reset = activate(p.fR, (conv3(p.KR, S, p.padding) + p.BR[np.newaxis]).astype(object))
    _check_gate("update", p.fU, update)
    _check_gate("reset", p.fR, reset)
    candidate = activate(p.fF, (conv3(p.KF, (reset * S).astype(object), p.padding) + p.BF[np.newaxis]).astype(object))
    return (update * S + (1 - update) * candidate).astype(object)


def initial_state(X: Sequence[np.ndarray], width: int, dim: int) -> Tensor3:
    if not X:
        raise ShapeError("Neural GPU inputs must be non-empty")
    S = tensor3(len(X), width, dim)
    for i, x in enumerate(X):
        if x.shape != (dim,):
            raise ShapeError(f"input {i} has shape {x.shape}, expected ({dim},)")
        S[i, 0, :] = x
    return S


def ngpu_iterates(S0: Tensor3, T: int, p: NGPUParams) -> List[Tensor3]:
    states = [S0]
    for _ in range(T):
        states.append(ngpu_step(states[-1], p))
    return states


def ngpu_run(X: Sequence[np.ndarray], r: int, p: NGPUParams) -> List[np.ndarray]:
    """Outputs y_t = S^t[n, 1, :] (last cell of the first column) for t = 1..r."""
    if r <= 0:
        return []
    S = initial_state(X, p.width, p.dim)
    outputs = []
    for _ in range(r):
        S = ngpu_step(S, p)
        outputs.append(S[len(X) - 1, 0, :].copy())
    return outputs


@dataclass(frozen=True)
class InputLifter:
    """x -> [x, 0, 0, 1, 1, 0] for a d-dimensional RNN input."""

    d: int

    @property
    def dim(self) -> int:
        return 3 * self.d + 3

    def __call__(self, x: np.ndarray) -> np.ndarray:
        out = zeros(self.dim)
        out[: self.d] = x
        out[3 * self.d] = ONE
        out[3 * self.d + 1] = ONE
        return out

    def blocks(self) -> Dict[str, List[int]]:
        d = self.d
        return {"E": [0, d], "D": [d, 2 * d], "G": [2 * d, 3 * d], "l0": [3 * d, 3 * d + 1], "l1": [3 * d + 1, 3 * d + 2], "l2": [3 * d + 2, 3 * d + 3]}


def compile_rnn_to_ngpu(rnn: RnnEncDec) -> Tuple[NGPUParams, InputLifter]:
    """Kernels of shape (2, 1, 3d+3, 3d+3); K[0] reads the row above, K[1] the row itself."""
    d = rnn.dim
    D = 3 * d + 3
    E, Dk, G = slice(0, d), slice(d, 2 * d), slice(2 * d, 3 * d)
    l0, l1, l2 = 3 * d, 3 * d + 1, 3 * d + 2

    KF = np.full((2, 1, D, D), ZERO, dtype=object)
    KF[0, 0, Dk, E] = rnn.V
    KF[0, 0, Dk, Dk] = rnn.V
    KF[0, 0, l0, l0] = ONE
    KF[1, 0, E, E] = rnn.W
    KF[1, 0, E, Dk] = rnn.W
    KF[1, 0, Dk, G] = rnn.U
    KF[1, 0, G, G] = rnn.U
    KF[1, 0, l0, l1] = ONE

    KU = np.full((2, 1, D, D), ZERO, dtype=object)
    KU[0, 0, l0, E] = ONE
    KU[0, 0, l0, Dk] = ONE
    KU[0, 0, l0, l0] = ONE
    KU[0, 0, l0, l1] = ONE
    KU[1, 0, l0, G] = ONE
    KU[1, 0, l0, l2] = ONE

    KR = np.full((2, 1, D, D), ZERO, dtype=object)
    KR[1, 0, l0, E] = ONE
    KR[1, 0, l1, Dk] = ONE
    KR[1, 0, l0, l0] = ONE
    KR[1, 0, l1, l1] = ONE

    BR = np.full((1, D), ZERO, dtype=object)
    BR[0, G] = ONE
    BR[0, l2] = ONE
    zero_bias = np.full((1, D), ZERO, dtype=object)

    params = NGPUParams(
        KernelBank(KU),
        KernelBank(KR),
        KernelBank(KF),
        zero_bias,
        BR,
        zero_bias.copy(),
        Activation.SIGMA,
        Activation.SIGMA,
        Activation.SIGMA,
        Padding.ZERO,
    )
    logger.info("compiled %d-dim RNN into a Neural GPU of depth %d", d, D)
    return params, InputLifter(d)


def expected_ngpu_rows(rnn: RnnEncDec, X: Sequence[np.ndarray], t: int) -> List[np.ndarray]:
    """Rows of S^t for the compiled network.

    Row i (1-based) holds [0, 0, alpha^i_{t-i}, 0, 0, 0] for i < t,
    [h_i, h_i, 0, 0, 1, 0] for i = t and the lifted input for i > t, where
    alpha^i_0 = h_i and alpha^i_k = sigma(alpha^i_{k-1} U).
    """
    d = rnn.dim
    lift = InputLifter(d)
    hidden = rnn_run(rnn, X, 0).hidden
    rows: List[np.ndarray] = []
    for i in range(1, len(X) + 1):
        row = zeros(lift.dim)
        if i < t:
            state = hidden[i]
            for _ in range(t - i):
                state = activate(Activation.SIGMA, state.dot(rnn.U).astype(object))
            row[2 * d : 3 * d] = state
        elif i == t:
            row[:d] = hidden[i]
            row[d : 2 * d] = hidden[i]
            row[3 * d + 1] = ONE
        else:
            row = lift(X[i - 1])
        rows.append(row)
    return rows


def is_periodic(S: Tensor3, period: int) -> bool:
    h = S.shape[0]
    return bool(np.all(S == np.roll(S, -period, axis=0))) if h % period == 0 else False


@dataclass
class PeriodicityReport:
    ok: bool
    violations: List[str] = field(default_factory=list)
    failing_step: int | None = None


def check_periodicity(p: NGPUParams, S0: Tensor3, period: int, steps: int) -> PeriodicityReport:
    """Check that every iterate of a period-``period`` input keeps the period."""
    violations = []
    if p.padding is not Padding.CIRCULAR:
        violations.append("padding must be circular")
    if period < 1 or S0.shape[0] % period != 0:
        violations.append(f"period {period} does not divide the height {S0.shape[0]}")
    elif not is_periodic(S0, period):
        violations.append(f"initial tensor is not {period}-periodic")
    if violations:
        logger.warning("periodicity preconditions failed: %s", "; ".join(violations))
        return PeriodicityReport(False, violations)
    S = S0
    for step in range(1, steps + 1):
        S = ngpu_step(S, p)
        if not is_periodic(S, period):
            return PeriodicityReport(False, [f"iterate {step} lost the period"], step)
    return PeriodicityReport(True)


def output_row_agreement(p: NGPUParams, u_rows: Tensor3, steps: int) -> bool:
    """Rows 2p of uu and 3p of uuu agree at every step under circular padding."""
    period = u_rows.shape[0]
    S = np.concatenate([u_rows] * 2, axis=0)
    T = np.concatenate([u_rows] * 3, axis=0)
    for _ in range(steps):
        S = ngpu_step(S, p)
        T = ngpu_step(T, p)
        if not bool(np.all(S[2 * period - 1] == T[3 * period - 1])):
            return False
    return True


_CHOICES = (Fraction(-1), Fraction(-1, 2), Fraction(0), Fraction(1, 2), Fraction(1))


def _random_array(shape: Tuple[int, ...], rng: np.random.Generator, choices: Sequence[Fraction] = _CHOICES) -> np.ndarray:
    picks = rng.integers(0, len(choices), size=shape)
    out = np.empty(shape, dtype=object)
    for index, pick in np.ndenumerate(picks):
        out[index] = choices[pick]
    return out


def random_uniform_network(
    d: int,
    w: int,
    kH: int,
    rng: np.random.Generator,
    padding: Padding | str = Padding.CIRCULAR,
    kW: int = 1,
) -> NGPUParams:
    return NGPUParams(
        KernelBank(_random_array((kH, kW, d, d), rng)),
        KernelBank(_random_array((kH, kW, d, d), rng)),
        KernelBank(_random_array((kH, kW, d, d), rng)),
        _random_array((w, d), rng),
        _random_array((w, d), rng),
        _random_array((w, d), rng),
        padding=Padding(padding),
    )


def random_periodic_tensor(period: int, repeats: int, w: int, d: int, rng: np.random.Generator) -> Tensor3:
    unit_rows = _random_array((period, w, d), rng, (Fraction(0), Fraction(1, 2), Fraction(1)))
    return np.concatenate([unit_rows] * repeats, axis=0)

