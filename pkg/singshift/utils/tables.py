# ==============================================================================
# tables.py  –  TSV tables with a header line
# ==============================================================================

from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union


def format_cell(value: Any) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else format(value, ".6g")
    return str(value)


def format_tsv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    lines = ["\t".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} cells, header has {len(header)}")
        lines.append("\t".join(format_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def write_tsv(path: Union[str, Path], header: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_tsv(header, rows), encoding="utf-8")
    return path


def read_tsv(path: Union[str, Path]) -> List[Dict[str, str]]:
    """Rows as {column: raw string}."""
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln]
    if not lines:
        return []
    header = lines[0].split("\t")
    return [dict(zip(header, ln.split("\t"))) for ln in lines[1:]]
