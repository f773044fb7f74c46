"""Verification report schemas."""

from __future__ import annotations

from typing import List, Literal, Optional

from pydantic import BaseModel, Field


class Divergence(BaseModel):
    """First point where a network disagrees with its reference."""

    step: int
    stage: str
    slot: Optional[int] = None
    name: Optional[str] = None
    block: Optional[str] = None
    expected: str
    got: str


class CaseReport(BaseModel):
    input: str
    steps_checked: int
    reference_accept: Optional[int] = None
    network_accept: Optional[int] = None
    divergence: Optional[Divergence] = None

    @property
    def passed(self) -> bool:
        return self.divergence is None


class VerifyReport(BaseModel):
    """Envelope for a verification run."""

    status: Literal["PASS", "FAIL"]
    cases: List[CaseReport] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)
    pipeline_steps: List[str] = Field(default_factory=list)
