"""Versioned JSON documents for models and datasets."""

import json
import logging
import os
import re

from odskit import __version__

logger = logging.getLogger("odskit")

FORMAT_VERSION = 1


class DocumentFormatError(ValueError):
    """File is not a readable odskit document."""
    pass


class DocumentVersionError(DocumentFormatError):
    """Document was written by a newer format version."""
    pass


def save_document(path, kind, payload):
    """Write payload as a JSON document headed by format version and kind.

    Floats go through Python's shortest round-trip repr, so reloading gives
    back bit-identical values.
    """
    ordered = {"format_version": FORMAT_VERSION, "kind": kind, "odskit_version": __version__}
    ordered.update({k: v for k, v in payload.items() if k not in ordered})

    raw_json = json.dumps(ordered, indent=2, ensure_ascii=False, allow_nan=False)
    compact_json = _compact_lists(raw_json)

    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, 'w') as f:
        f.write(compact_json)
        f.write("\n")
    logger.debug(f"Saved {kind} document to {path}")


def load_document(path, kind):
    """Read a document written by save_document, checking kind and version."""
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise DocumentFormatError(f"Malformed {kind} document {path}: {e}")

    if not isinstance(data, dict) or "format_version" not in data:
        raise DocumentFormatError(f"{path} is not an odskit document")

    version = data["format_version"]
    if not isinstance(version, int):
        raise DocumentFormatError(f"{path} has a non-integer format_version: {version!r}")
    if version > FORMAT_VERSION:
        raise DocumentVersionError(
            f"{path} uses format version {version}, this build reads up to {FORMAT_VERSION}"
        )
    if data.get("kind") != kind:
        raise DocumentFormatError(f"{path} holds a {data.get('kind')!r} document, expected {kind!r}")

    logger.debug(f"Loaded {kind} document from {path}")
    return data


_NUMBER = r'-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?'


def _compact_lists(raw_json):
    """Put innermost numeric and string lists on single lines."""
    numbers = re.sub(
        r'\[\s*\n\s*((?:' + _NUMBER + r',\s*\n\s*)*' + _NUMBER + r')\s*\n\s*\]',
        lambda m: '[{}]'.format(', '.join(re.findall(_NUMBER, m.group(1)))),
        raw_json
    )
    return re.sub(
        r'\[\s*\n\s*((?:"[^"\n]*",\s*\n\s*)*"[^"\n]*")\s*\n\s*\]',
        lambda m: '[{}]'.format(', '.join(re.findall(r'"[^"\n]*"', m.group(1)))),
        numbers
    )
