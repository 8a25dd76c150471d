# file_handling.py
"""
This module contains the FileHandler class for reading and writing the toolkit's
text, JSON and JSONL artifacts. Every write goes to a temporary file in the target
directory first and is then renamed over the destination, so readers never see a
partial file.
"""
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator, Optional

logger = logging.getLogger("FileHandler")


class FileHandlerError(Exception):
    """Base class for exceptions in this module."""

    def __init__(self, message: str, path: Optional[Path] = None, line: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.path = path
        self.line = line

    def __str__(self):
        location = f"File: {self.path}"
        if self.line is not None:
            location += f", Line: {self.line}"
        return f"{self.message} ({location})"


class FileHandler:
    """
    A class for handling toolkit files.
    """

    @staticmethod
    def read_text(path: str | Path) -> str:
        path = Path(path)
        if not path.is_file():
            raise FileHandlerError("File does not exist", path)
        return path.read_text(encoding="utf-8")

    @staticmethod
    def read_json(path: str | Path) -> Any:
        text = FileHandler.read_text(path)
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise FileHandlerError(f"Invalid JSON: {e.msg}", Path(path), e.lineno)

    @staticmethod
    def iter_jsonl(path: str | Path) -> Iterator[tuple[int, Any]]:
        """Yield (line number, parsed value) for every non-blank line."""
        text = FileHandler.read_text(path)
        for line_number, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                yield line_number, json.loads(line)
            except json.JSONDecodeError as e:
                raise FileHandlerError(f"Invalid JSON: {e.msg}", Path(path), line_number)

    @staticmethod
    def write_text(path: str | Path, text: str) -> Path:
        """Atomically write `text` to `path` (write-to-temp, then rename)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
            os.replace(tmp_name, path)
        except OSError as e:
            Path(tmp_name).unlink(missing_ok=True)
            raise FileHandlerError(f"Failed to write file: {e}", path)
        logger.debug(f"Wrote {path}")
        return path

    @staticmethod
    def dumps_json(value: Any) -> str:
        """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
        return json.dumps(value, indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    @staticmethod
    def write_json(path: str | Path, value: Any, sort_keys: bool = True) -> Path:
        if sort_keys:
            text = FileHandler.dumps_json(value)
        else:
            text = json.dumps(value, indent=2, ensure_ascii=False) + "\n"
        return FileHandler.write_text(path, text)

    @staticmethod
    def write_jsonl(path: str | Path, rows: Iterable[Any]) -> Path:
        text = "".join(
            json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n" for row in rows
        )
        return FileHandler.write_text(path, text)
