from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator

from qcm.settings import DEFAULT_SETTINGS, QcmSettings
from tools.estimate import DEFAULT_LEVEL
from tools.rng import fresh_seed

DEFAULT_SHOTS = 100_000


class CliConfig(BaseModel):
    """One command-line invocation, built from argv only."""

    command: Literal["eval", "trace", "estimate", "selftest"]
    expr: Optional[str] = None
    mode: Literal["exact", "sampled"] = "exact"
    shots: Optional[int] = Field(default=None, ge=1)
    seed: Optional[int] = Field(default=None, ge=0)
    level: float = Field(default=DEFAULT_LEVEL, gt=0, lt=1)
    renorm: bool = True
    output: Literal["human", "json"] = "human"
    trace_path: Optional[Path] = None
    den_floor: float = Field(default=DEFAULT_SETTINGS.den_floor, ge=0)
    workers: Optional[int] = Field(default=None, ge=1, description="selftest processes; None means the CPU count.")
    verbosity: int = Field(default=0, ge=0)
    seed_generated: bool = Field(default=False, description="True when no --seed was given and one was drawn.")

    @model_validator(mode="after")
    def _check_command(self):
        if self.command != "selftest" and not self.expr:
            raise ValueError(f"the {self.command} command needs an expression")
        if self.command == "trace" and self.trace_path is None:
            raise ValueError("the trace command needs --trace PATH")
        if self.command == "estimate":
            self.mode = "sampled"
        if self.mode == "sampled":
            if self.shots is None:
                self.shots = DEFAULT_SHOTS
            if self.seed is None:
                self.seed = fresh_seed()
                self.seed_generated = True
        return self

    def settings(self) -> QcmSettings:
        return DEFAULT_SETTINGS.model_copy(update={"den_floor": self.den_floor})
