"""Input document schemas: Turing machines, RNNs and final-set predicates."""

from __future__ import annotations

from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, StrictInt, StrictStr

RationalText = Union[StrictInt, StrictStr]


class TransitionRule(BaseModel):
    """One row of a transition table."""

    model_config = ConfigDict(extra="forbid")

    state: str
    read: str
    next: str
    write: str
    move: Literal["L", "R", "S"]


class TuringMachineSpec(BaseModel):
    """Normalized machine document."""

    model_config = ConfigDict(extra="forbid")

    states: List[str] = Field(min_length=1)
    alphabet: List[str] = Field(min_length=1)
    blank: str = "#"
    init: str
    read_state: str
    accept: List[str] = Field(default_factory=list)
    delta: List[TransitionRule] = Field(default_factory=list)


class GeneralTuringMachineSpec(BaseModel):
    """Machine document before normalization; stay moves and partial tables allowed."""

    model_config = ConfigDict(extra="forbid")

    states: List[str] = Field(min_length=1)
    alphabet: List[str] = Field(min_length=1)
    blank: str = "#"
    init: str
    read_state: Optional[str] = None
    accept: List[str] = Field(default_factory=list)
    delta: List[TransitionRule] = Field(default_factory=list)


class ConstraintSpec(BaseModel):
    """One clause of a declarative final-set predicate."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["equals", "greater_than", "one_hot_in", "unconstrained"]
    slots: List[int] = Field(default_factory=list)
    value: Optional[RationalText] = None
    indices: List[int] = Field(default_factory=list)


class RnnSpec(BaseModel):
    """Simplified RNN encoder-decoder with its symbol embedding and accepting predicate."""

    model_config = ConfigDict(extra="forbid")

    d: int = Field(ge=1)
    W: List[List[RationalText]]
    V: List[List[RationalText]]
    U: List[List[RationalText]]
    embed: Dict[str, List[RationalText]] = Field(default_factory=dict)
    accept: List[ConstraintSpec] = Field(default_factory=list)
