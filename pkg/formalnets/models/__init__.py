"""Pydantic models for the workbench's documents and reports."""

from .specs import (  # noqa: F401
    ConstraintSpec,
    GeneralTuringMachineSpec,
    RnnSpec,
    TransitionRule,
    TuringMachineSpec,
)
from .networks import (  # noqa: F401
    DecoderLayerDoc,
    EncoderLayerDoc,
    FeedForwardDoc,
    NetworkDocument,
    NeuralGPUDocument,
    PositionalEncodingDoc,
    ScoreDoc,
    StageDoc,
)
from .reports import CaseReport, Divergence, VerifyReport  # noqa: F401
