"""Conversion between JSON documents and workbench objects."""

from __future__ import annotations

from fractions import Fraction
import json
from typing import Any, Dict, List, Mapping, Sequence, Tuple, Type, TypeVar, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from formalnets.exceptions import SpecError
from formalnets.models import (
    ConstraintSpec,
    DecoderLayerDoc,
    EncoderLayerDoc,
    FeedForwardDoc,
    GeneralTuringMachineSpec,
    NetworkDocument,
    NeuralGPUDocument,
    PositionalEncodingDoc,
    RnnSpec,
    ScoreDoc,
    StageDoc,
    TransitionRule,
    TuringMachineSpec,
)
from formalnets.services.attention import MultPhi, NetDefined, PosDiff, ScoreFn
from formalnets.services.linalg import AffineMap, FeedForward, Stage, as_rational_array
from formalnets.services.machines import (
    GeneralTuringMachine,
    RnnEncDec,
    Transition,
    TuringMachine,
    validate_tm,
)
from formalnets.services.neural_gpu import KernelBank, NGPUParams
from formalnets.services.transformer import (
    Constraint,
    DecoderLayer,
    EncoderLayer,
    FinalPredicate,
    PositionalEncoding,
    Recognizer,
    TransformerParams,
)
from formalnets.utils import format_rational, format_row, parse_rational

ModelT = TypeVar("ModelT", bound=BaseModel)
Payload = Union[str, bytes, Mapping[str, Any]]


def load_document(model: Type[ModelT], payload: Payload) -> ModelT:
    """Validate a JSON text or an already decoded mapping against ``model``."""
    try:
        data = json.loads(payload) if isinstance(payload, (str, bytes)) else payload
    except json.JSONDecodeError as exc:
        raise SpecError(f"not a JSON document: {exc}") from exc
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        details = "; ".join(
            f"{'.'.join(str(part) for part in error['loc']) or '<root>'}: {error['msg']}" for error in exc.errors()
        )
        raise SpecError(f"invalid {model.__name__}: {details}") from exc


def dump_document(document: BaseModel) -> str:
    return document.model_dump_json(indent=2, exclude_none=True)


def _rationals(values: Any, what: str) -> np.ndarray:
    try:
        return as_rational_array(values)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"{what}: {exc}") from exc


def _scalar(value: Any, what: str) -> Fraction:
    try:
        return parse_rational(value)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"{what}: {exc}") from exc


def _matrix_rows(mat: np.ndarray) -> List[List[str]]:
    return [format_row(row) for row in mat]


# machines


def _delta(rules: Sequence[TransitionRule]) -> Dict[Tuple[str, str], Transition]:
    delta: Dict[Tuple[str, str], Transition] = {}
    for rule in rules:
        key = (rule.state, rule.read)
        if key in delta:
            raise SpecError(f"duplicate rule for ({rule.state}, {rule.read})")
        delta[key] = Transition(rule.next, rule.write, rule.move)
    return delta


def parse_tm_spec(payload: Payload) -> TuringMachine:
    """Parse and validate a normalized machine document."""
    doc = load_document(TuringMachineSpec, payload)
    tm = TuringMachine(doc.states, doc.alphabet, doc.init, doc.read_state, doc.accept, _delta(doc.delta), doc.blank)
    validate_tm(tm)
    return tm


def parse_general_tm_spec(payload: Payload) -> GeneralTuringMachine:
    doc = load_document(GeneralTuringMachineSpec, payload)
    return GeneralTuringMachine(
        doc.states, doc.alphabet, doc.init, doc.accept, _delta(doc.delta), doc.blank, doc.read_state
    )


def machine_to_document(tm: TuringMachine) -> TuringMachineSpec:
    """Normalized formatting: fixed key order, rules in (state, read) declaration order."""
    rules = [
        TransitionRule(state=state, read=symbol, next=rule.next, write=rule.write, move=rule.move)
        for state, symbol, rule in tm.rules()
    ]
    return TuringMachineSpec(
        states=list(tm.states),
        alphabet=list(tm.alphabet),
        blank=tm.blank,
        init=tm.init,
        read_state=tm.read_state,
        accept=list(tm.accept),
        delta=rules,
    )


# predicates


def predicate_from_specs(specs: Sequence[ConstraintSpec]) -> FinalPredicate:
    constraints = []
    for spec in specs:
        value = None if spec.value is None else _scalar(spec.value, f"{spec.kind} value")
        constraints.append(Constraint(spec.kind, tuple(spec.slots), value, tuple(spec.indices)))
    return FinalPredicate(tuple(constraints))


def predicate_to_specs(predicate: FinalPredicate) -> List[ConstraintSpec]:
    return [
        ConstraintSpec(
            kind=c.kind,
            slots=list(c.slots),
            value=None if c.value is None else format_rational(c.value),
            indices=list(c.indices),
        )
        for c in predicate.constraints
    ]


# rnns


def parse_rnn_spec(payload: Payload) -> RnnEncDec:
    doc = load_document(RnnSpec, payload)
    embed = {symbol: _rationals(values, f"embedding of {symbol!r}") for symbol, values in doc.embed.items()}
    return RnnEncDec(
        doc.d,
        _rationals(doc.W, "W"),
        _rationals(doc.V, "V"),
        _rationals(doc.U, "U"),
        embed,
        predicate_from_specs(doc.accept),
    )


def rnn_to_document(rnn: RnnEncDec) -> RnnSpec:
    return RnnSpec(
        d=rnn.dim,
        W=_matrix_rows(rnn.W),
        V=_matrix_rows(rnn.V),
        U=_matrix_rows(rnn.U),
        embed={symbol: format_row(value) for symbol, value in rnn.embed.items()},
        accept=predicate_to_specs(rnn.accept),
    )


# transformers


def feedforward_to_doc(net: FeedForward) -> FeedForwardDoc:
    return FeedForwardDoc(
        stages=[
            StageDoc(
                matrix=_matrix_rows(stage.affine.matrix),
                bias=format_row(stage.affine.bias),
                activation=stage.activation.value,
            )
            for stage in net.stages
        ]
    )


def feedforward_from_doc(doc: FeedForwardDoc, what: str) -> FeedForward:
    stages = []
    for index, stage in enumerate(doc.stages):
        label = f"{what} stage {index}"
        affine = AffineMap(_rationals(stage.matrix, f"{label} matrix"), _rationals(stage.bias, f"{label} bias"))
        stages.append(Stage(affine, stage.activation))
    return FeedForward(tuple(stages))


def score_to_doc(score: ScoreFn) -> ScoreDoc:
    if isinstance(score, PosDiff):
        return ScoreDoc(kind="pos_diff", slot=score.slot)
    if isinstance(score, NetDefined):
        return ScoreDoc(kind="net", net=feedforward_to_doc(score.net))
    return ScoreDoc(kind="mult_phi")


def score_from_doc(doc: ScoreDoc, what: str) -> ScoreFn:
    if doc.kind == "pos_diff":
        if doc.slot is None:
            raise SpecError(f"{what}: pos_diff score needs a slot")
        return PosDiff(doc.slot)
    if doc.kind == "net":
        if doc.net is None:
            raise SpecError(f"{what}: net score needs a network")
        return NetDefined(feedforward_from_doc(doc.net, what))
    return MultPhi()


def recognizer_to_document(rec: Recognizer) -> NetworkDocument:
    params = rec.params
    encoder = [
        EncoderLayerDoc(
            Q=feedforward_to_doc(layer.Q),
            K=feedforward_to_doc(layer.K),
            V=feedforward_to_doc(layer.V),
            O=feedforward_to_doc(layer.O),
            score=score_to_doc(layer.score),
        )
        for layer in params.enc_layers
    ]
    decoder = [
        DecoderLayerDoc(
            Qself=feedforward_to_doc(layer.Qself),
            Kself=feedforward_to_doc(layer.Kself),
            Vself=feedforward_to_doc(layer.Vself),
            O=feedforward_to_doc(layer.O),
            self_score=score_to_doc(layer.self_score),
            cross_score=score_to_doc(layer.cross_score),
        )
        for layer in params.dec_layers
    ]
    return NetworkDocument(
        dim=params.dim,
        alphabet=list(rec.alphabet),
        embed={symbol: format_row(rec.embed[symbol]) for symbol in rec.alphabet},
        posenc=PositionalEncodingDoc(kind=rec.posenc.kind, slot=rec.posenc.slot),
        encoder=encoder,
        final_K=feedforward_to_doc(params.final_K),
        final_V=feedforward_to_doc(params.final_V),
        decoder=decoder,
        final_F=feedforward_to_doc(params.final_F),
        seed=format_row(rec.seed),
        final_pred=predicate_to_specs(rec.final_pred),
        slots=None if rec.slots is None else list(rec.slots),
    )


def recognizer_from_document(doc: NetworkDocument) -> Recognizer:
    encoder = tuple(
        EncoderLayer(
            feedforward_from_doc(layer.Q, f"encoder {index} Q"),
            feedforward_from_doc(layer.K, f"encoder {index} K"),
            feedforward_from_doc(layer.V, f"encoder {index} V"),
            feedforward_from_doc(layer.O, f"encoder {index} O"),
            score_from_doc(layer.score, f"encoder {index} score"),
        )
        for index, layer in enumerate(doc.encoder)
    )
    decoder = tuple(
        DecoderLayer(
            feedforward_from_doc(layer.Qself, f"decoder {index} Qself"),
            feedforward_from_doc(layer.Kself, f"decoder {index} Kself"),
            feedforward_from_doc(layer.Vself, f"decoder {index} Vself"),
            feedforward_from_doc(layer.O, f"decoder {index} O"),
            score_from_doc(layer.self_score, f"decoder {index} self score"),
            score_from_doc(layer.cross_score, f"decoder {index} cross score"),
        )
        for index, layer in enumerate(doc.decoder)
    )
    params = TransformerParams(
        doc.dim,
        encoder,
        feedforward_from_doc(doc.final_K, "final_K"),
        feedforward_from_doc(doc.final_V, "final_V"),
        decoder,
        feedforward_from_doc(doc.final_F, "final_F"),
    )
    embed = {symbol: _rationals(values, f"embedding of {symbol!r}") for symbol, values in doc.embed.items()}
    return Recognizer(
        tuple(doc.alphabet),
        embed,
        PositionalEncoding(doc.posenc.kind, doc.posenc.slot),
        params,
        _rationals(doc.seed, "seed"),
        predicate_from_specs(doc.final_pred),
        None if doc.slots is None else tuple(doc.slots),
    )


# neural gpus

_GATES = ("U", "R", "F")


def ngpu_to_document(
    params: NGPUParams,
    embed: Mapping[str, np.ndarray],
    blocks: Mapping[str, Sequence[int]] | None = None,
) -> NeuralGPUDocument:
    banks = {"U": params.KU, "R": params.KR, "F": params.KF}
    biases = {"U": params.BU, "R": params.BR, "F": params.BF}
    activations = {"U": params.fU, "R": params.fR, "F": params.fF}
    return NeuralGPUDocument(
        dim=params.dim,
        width=params.width,
        padding=params.padding.value,
        activations={gate: activations[gate].value for gate in _GATES},
        kernels={
            gate: [[_matrix_rows(block) for block in row] for row in banks[gate].weights] for gate in _GATES
        },
        biases={gate: _matrix_rows(biases[gate]) for gate in _GATES},
        embed={symbol: format_row(value) for symbol, value in embed.items()},
        blocks={name: list(bounds) for name, bounds in (blocks or {}).items()},
    )


def ngpu_from_document(doc: NeuralGPUDocument) -> Tuple[NGPUParams, Dict[str, np.ndarray]]:
    missing = [gate for gate in _GATES if gate not in doc.kernels or gate not in doc.biases]
    if missing:
        raise SpecError(f"Neural GPU document lacks kernels or biases for gates {missing}")
    params = NGPUParams(
        KernelBank(_rationals(doc.kernels["U"], "U kernel")),
        KernelBank(_rationals(doc.kernels["R"], "R kernel")),
        KernelBank(_rationals(doc.kernels["F"], "F kernel")),
        _rationals(doc.biases["U"], "U bias"),
        _rationals(doc.biases["R"], "R bias"),
        _rationals(doc.biases["F"], "F bias"),
        doc.activations.get("U", "sigma"),
        doc.activations.get("R", "sigma"),
        doc.activations.get("F", "sigma"),
        doc.padding,
    )
    if params.dim != doc.dim or params.width != doc.width:
        raise SpecError(
            f"document declares dim {doc.dim} and width {doc.width}, kernels give {params.dim} and {params.width}"
        )
    embed = {symbol: _rationals(values, f"embedding of {symbol!r}") for symbol, values in doc.embed.items()}
    return params, embed


def load_network(payload: Payload) -> Union[Recognizer, Tuple[NGPUParams, Dict[str, np.ndarray]]]:
    """Read either kind of network document, dispatching on its ``format`` tag."""
    try:
        data = json.loads(payload) if isinstance(payload, (str, bytes)) else dict(payload)
    except json.JSONDecodeError as exc:
        raise SpecError(f"not a JSON document: {exc}") from exc
    if not isinstance(data, dict):
        raise SpecError("network documents are JSON objects")
    if data.get("format", "transformer") == "neural_gpu":
        return ngpu_from_document(load_document(NeuralGPUDocument, data))
    return recognizer_from_document(load_document(NetworkDocument, data))
