"""
Output file helpers.

Every file is written to a temporary sibling and renamed into place, so a
reader never observes a partial file.
"""

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Union

import pandas as pd
from pydantic import BaseModel

PathLike = Union[str, Path]


def atomic_write_bytes(path: PathLike, data: bytes) -> Path:
    """Write ``data`` to ``path`` through a temporary file and ``os.replace``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path: PathLike, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: PathLike, payload: Union[BaseModel, Any]) -> Path:
    """Write a pydantic model or a JSON-able value with stable formatting."""
    if isinstance(payload, BaseModel):
        text = payload.model_dump_json(indent=2)
    else:
        text = json.dumps(payload, indent=2, sort_keys=True)
    return atomic_write_text(path, text + "\n")


def write_frame(path: PathLike, frame: pd.DataFrame) -> Path:
    """Write a table as comma-separated text with a fixed float format."""
    text = frame.to_csv(index=False, float_format="%.12g", lineterminator="\n")
    return atomic_write_text(path, text)


def read_frame(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path)


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: PathLike) -> str:
    """Hex SHA-256 digest of a file's contents."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()
