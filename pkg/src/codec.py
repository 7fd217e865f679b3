# -*- coding: utf-8 -*-
# Copyright © Technologies Nexios TF Inc. - nexiostf.com
"""Sérialisation canonique des artefacts (MDP, politiques, jeux de données).

JSON à clés triées, flottants IEEE-754 écrits sous leur forme décimale la
plus courte qui relit la même valeur (comportement natif de `repr` en
Python 3). Les empreintes sont le préfixe hexadécimal du sha256 de ce JSON
canonique : mêmes données, mêmes octets, même empreinte.
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Union

import numpy as np

PathLike = Union[str, Path]
FINGERPRINT_LENGTH = 16


def to_plain(value: Any) -> Any:
    """Convertit récursivement tableaux et scalaires numpy en types JSON natifs."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    return value


def canonical_dumps(document: Any) -> str:
    return json.dumps(to_plain(document), sort_keys=True, separators=(",", ":"), allow_nan=False)


def fingerprint(document: Any) -> str:
    """Empreinte déterministe d'un document JSON."""
    payload = canonical_dumps(document).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:FINGERPRINT_LENGTH]


def write_json(path: PathLike, document: Any) -> None:
    Path(path).write_text(canonical_dumps(document) + "\n", encoding="utf-8")


def read_json(path: PathLike) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_jsonl(path: PathLike, lines: Iterable[Dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for line in lines:
            handle.write(canonical_dumps(line))
            handle.write("\n")


def iter_jsonl(path: PathLike) -> Iterator[Dict[str, Any]]:
    with open(path, "r", encoding="utf-8") as handle:
        for raw in handle:
            raw = raw.strip()
            if raw:
                yield json.loads(raw)


def read_jsonl(path: PathLike) -> List[Dict[str, Any]]:
    return list(iter_jsonl(path))
