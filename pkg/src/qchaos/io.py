"""CSV / JSON writers and run sidecars. CSV and JSON are UTF-8 with LF endings."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8", newline="\n")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def sidecar_path(out) -> Path:
    return Path(str(out) + ".run.json")


def write_sidecar(out, command: str, argv: list[str], config: dict) -> Path:
    """Record the resolved configuration next to an output file."""
    p = sidecar_path(out)
    write_json(
        p,
        {"software": "qchaos", "version": __version__, "command": command, "argv": argv, "config": config},
    )
    return p


def read_sidecar(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
