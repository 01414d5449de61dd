"""
Run manifest maintenance.
"""

import logging
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterable, Optional

from pydantic import ValidationError

from gou_ruin.core.config import settings
from gou_ruin.schemas.manifest import CommandRecord, OutputFile, RunManifest
from gou_ruin.utils.io import sha256_file, write_json

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def _load(path: Path) -> Optional[RunManifest]:
    if not path.exists():
        return None
    try:
        return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        logger.warning(f"Replacing unreadable manifest {path}: {e}")
        return None


def _describe(out_dir: Path, path: Path) -> OutputFile:
    return OutputFile(path=path.relative_to(out_dir).as_posix(), sha256=sha256_file(path), size=path.stat().st_size)


def update_manifest(
    out_dir: Path,
    command: str,
    config_digest: str,
    seed: int,
    outputs: Iterable[Path],
    started_at: datetime,
    finished_at: datetime,
    conditions: Optional[Dict[str, str]] = None,
    forced: bool = False,
) -> Path:
    """
    Record a command's outputs with their SHA-256 digests.

    An existing manifest for the same configuration digest is extended;
    one for a different configuration is replaced.
    """
    path = out_dir / MANIFEST_NAME
    manifest = _load(path)
    if manifest is None or manifest.config_digest != config_digest:
        manifest = RunManifest(
            tool=settings.project_name,
            version=settings.project_version,
            config_digest=config_digest,
            seed=seed,
            started_at=started_at,
            finished_at=finished_at,
        )

    files = [_describe(out_dir, output) for output in dict.fromkeys(outputs)]
    # Later commands may rewrite files listed by earlier ones (cramer_fit.json, plots).
    for record in manifest.commands.values():
        record.outputs = [
            _describe(out_dir, out_dir / output.path)
            for output in record.outputs
            if (out_dir / output.path).exists()
        ]
    manifest.commands[command] = CommandRecord(
        command=command,
        started_at=started_at,
        finished_at=finished_at,
        outputs=files,
    )
    manifest.finished_at = finished_at
    manifest.forced = manifest.forced or forced
    if conditions is not None:
        manifest.conditions = conditions
    return write_json(path, manifest)


def verify_manifest(out_dir: Path) -> Dict[str, bool]:
    """Map every listed output to whether its file exists with the recorded digest."""
    manifest = _load(out_dir / MANIFEST_NAME)
    if manifest is None:
        return {}
    return {
        output.path: (out_dir / output.path).exists() and sha256_file(out_dir / output.path) == output.sha256
        for output in manifest.all_outputs()
    }
