"""Network document schemas for compiled Transformers and Neural GPUs."""

from __future__ import annotations

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from .specs import ConstraintSpec, RationalText


class StageDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    matrix: List[List[RationalText]]
    bias: List[RationalText]
    activation: Literal["identity", "sigma", "relu"] = "identity"


class FeedForwardDoc(BaseModel):
    """An empty stage list is the identity map."""

    model_config = ConfigDict(extra="forbid")

    stages: List[StageDoc] = Field(default_factory=list)


class ScoreDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["mult_phi", "pos_diff", "net"]
    slot: Optional[int] = None
    net: Optional[FeedForwardDoc] = None


class EncoderLayerDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    Q: FeedForwardDoc
    K: FeedForwardDoc
    V: FeedForwardDoc
    O: FeedForwardDoc
    score: ScoreDoc


class DecoderLayerDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    Qself: FeedForwardDoc
    Kself: FeedForwardDoc
    Vself: FeedForwardDoc
    O: FeedForwardDoc
    self_score: ScoreDoc
    cross_score: ScoreDoc


class PositionalEncodingDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["zero", "index", "harmonic"] = "zero"
    slot: int = Field(default=0, ge=0)


class NetworkDocument(BaseModel):
    """A complete recognizer: network, embedding, positional encoding, seed and final set."""

    model_config = ConfigDict(extra="forbid")

    format: Literal["transformer"] = "transformer"
    dim: int = Field(ge=1)
    alphabet: List[str]
    embed: Dict[str, List[RationalText]]
    posenc: PositionalEncodingDoc = Field(default_factory=PositionalEncodingDoc)
    encoder: List[EncoderLayerDoc] = Field(min_length=1)
    final_K: FeedForwardDoc
    final_V: FeedForwardDoc
    decoder: List[DecoderLayerDoc] = Field(min_length=1)
    final_F: FeedForwardDoc
    seed: List[RationalText]
    final_pred: List[ConstraintSpec] = Field(default_factory=list)
    slots: Optional[List[str]] = None


class NeuralGPUDocument(BaseModel):
    """Uniform Neural GPU with per-symbol lifted embeddings and a block table."""

    model_config = ConfigDict(extra="forbid")

    format: Literal["neural_gpu"] = "neural_gpu"
    dim: int = Field(ge=1)
    width: int = Field(ge=1)
    padding: Literal["zero", "circular"] = "zero"
    activations: Dict[Literal["U", "R", "F"], Literal["identity", "sigma", "relu"]]
    kernels: Dict[Literal["U", "R", "F"], List[List[List[List[RationalText]]]]]
    biases: Dict[Literal["U", "R", "F"], List[List[RationalText]]]
    embed: Dict[str, List[RationalText]] = Field(default_factory=dict)
    blocks: Dict[str, List[int]] = Field(default_factory=dict)
