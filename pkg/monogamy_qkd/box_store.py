"""JSON box files.

Schema: ``{"arity": 2 | 3, "probs": [...]}`` where ``probs`` holds 16 or 64
reals in settings-major, outcomes-minor order (see ``monogamy_qkd.boxes``).
"""

import json
import logging
from pathlib import Path
from typing import Dict, Tuple, Union

from monogamy_qkd.boxes import Box, bipartite_from_table, tripartite_from_table
from monogamy_qkd.errors import BoxFormatError

logger = logging.getLogger(__name__)


def box_from_json(document: dict) -> Box:
    """Validate a decoded box document and build the box."""
    if not isinstance(document, dict):
        raise BoxFormatError("box document must be a JSON object")
    arity = document.get("arity")
    probs = document.get("probs")
    if arity not in (2, 3):
        raise BoxFormatError(f"arity must be 2 or 3, got {arity!r}")
    if not isinstance(probs, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in probs
    ):
        raise BoxFormatError("probs must be a flat array of numbers")
    if arity == 2:
        return bipartite_from_table(probs)
    return tripartite_from_table(probs)


def box_to_json(box: Box) -> dict:
    return {"arity": box.arity, "probs": box.to_table()}


class BoxFileReader:
    """Reader for box files, caching validated boxes per file version.

    The cache is keyed on the resolved path, mtime and size, so rewriting a
    file invalidates its entry.
    """

    box_cache: Dict[Tuple[Path, int, int], Box] = {}

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)

    def cache_key(self) -> Tuple[Path, int, int]:
        stat = self.path.stat()
        return (self.path.resolve(), stat.st_mtime_ns, stat.st_size)

    def load(self) -> Box:
        key = self.cache_key()
        cached = self.box_cache.get(key)
        if cached is not None:
            logger.debug(f"Box cache hit for {self.path}")
            return cached

        try:
            document = json.loads(self.path.read_text())
        except json.JSONDecodeError as e:
            raise BoxFormatError(f"{self.path}: not valid JSON ({e})") from e

        box = box_from_json(document)
        self.box_cache[key] = box
        logger.info(f"Loaded arity-{box.arity} box from {self.path}")
        return box


def read_box_file(path: Union[str, Path]) -> Box:
    return BoxFileReader(path).load()


def write_box_file(box: Box, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(box_to_json(box), indent=2) + "\n")
    logger.debug(f"Wrote arity-{box.arity} box to {path}")
    return path
