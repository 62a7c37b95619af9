import hashlib
import json
import logging
import os
from pathlib import Path
from typing import TypedDict

import pandas as pd

from .constants import CSV_FLOAT_FORMAT, LOGDIR

handler = None


class OutputFile(TypedDict):
    path: str
    sha256: str
    bytes: int


class RunManifestDict(TypedDict):
    scenario: dict
    version: str
    outputs: list[OutputFile]
    duration_seconds: float


def build_logger(logger_name: str, logger_filename: str, log_dir: str | os.PathLike = LOGDIR, level=logging.INFO):
    """
    Configure root logging with the emeflow format and a file handler.

    Args:
        logger_name: name of the logger to return
        logger_filename: log file created inside ``log_dir``
        log_dir: directory of the log file
        level: level of the root logger

    Returns:
        the named logger
    """
    global handler

    formatter = logging.Formatter(
        fmt="%(asctime)s | %(levelname)s | %(name)s | %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    root = logging.getLogger()
    if not root.handlers:
        logging.basicConfig(level=level)
    root.setLevel(level)
    root.handlers[0].setFormatter(formatter)

    filename = os.path.join(log_dir, logger_filename)
    if handler is not None and handler.baseFilename != os.path.abspath(filename):
        root.removeHandler(handler)
        handler.close()
        handler = None
    if handler is None:
        os.makedirs(log_dir, exist_ok=True)
        handler = logging.FileHandler(filename, encoding="UTF-8")
        handler.setFormatter(formatter)
        root.addHandler(handler)

    return logging.getLogger(logger_name)


def write_csv(frame: pd.DataFrame, path: str | os.PathLike) -> Path:
    """
    Write a table without its index; floats use 15 significant digits.

    Output bytes depend only on the values, so reruns are byte-identical.
    """
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return Path(path)


def read_csv(path: str | os.PathLike) -> pd.DataFrame:
    """Read a table written by ``write_csv``."""
    return pd.read_csv(path)


def save_json(data, path: Path) -> Path:
    """Save ``data`` as indented, key-sorted JSON."""
    with open(path, "w") as file:
        json.dump(data, file, indent=2, sort_keys=True)
        file.write("\n")
    return path


def load_json(path: Path):
    with open(path, "r") as file:
        return json.load(file)


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as file:
        for block in iter(lambda: file.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def describe_output(path: Path, root: Path) -> OutputFile:
    return OutputFile(
        path=Path(path).relative_to(root).as_posix(),
        sha256=file_sha256(path),
        bytes=Path(path).stat().st_size,
    )
