"""
Run manifest schema.
"""

from datetime import datetime
from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class OutputFile(BaseModel):
    """A file written by a command, relative to the output directory."""
    path: str
    sha256: str
    size: int = Field(..., ge=0)


class CommandRecord(BaseModel):
    """One command execution."""
    command: str
    started_at: datetime
    finished_at: datetime
    outputs: List[OutputFile] = Field(default_factory=list)


class RunManifest(BaseModel):
    """Provenance of an output directory; updated by every command."""
    tool: str
    version: str
    config_digest: str = Field(..., description="SHA-256 of the canonical configuration text")
    seed: int
    started_at: datetime
    finished_at: datetime
    commands: Dict[str, CommandRecord] = Field(default_factory=dict)
    conditions: Optional[Dict[str, str]] = Field(None, description="Verdicts of Conditions A, B, C")
    forced: bool = False

    def all_outputs(self) -> List[OutputFile]:
        return [output for record in self.commands.values() for output in record.outputs]
