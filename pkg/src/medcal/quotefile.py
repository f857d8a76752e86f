"""Quote-file parsing: JSON documents and delimiter-separated tables.

Two interchangeable formats carry a quote set:

JSON (structured, human-writable)::

    {"forward": 1.0,
     "strikes": [0.9, 1.0, 1.1],
     "calls":   [0.14, 0.08, 0.044],
     "digitals": [0.8, 0.5, 0.3],     # optional
     "meta": {"asof": "2024-01-31"}}  # optional, echoed to the export

CSV (header row ``strike,call`` or ``strike,call,digital``)::

    strike,call,digital
    0,1.0,
    0.9,0.14,0.8
    1.0,0.08,0.5
    1.1,0.044,0.3

The strike-0 row carries the forward (a call struck at zero); its digital
cell must be empty or 1.  Format detection is by suffix, falling back to a
content sniff.  All failures raise
:class:`~medcal.errors.QuoteFormatError` naming the offending field or
line.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import QuoteFormatError
from .med import MarketQuotes
from .partition import StrikeGrid

__all__ = ["load_quotes"]


def load_quotes(path) -> tuple[MarketQuotes, dict]:
    """Parse a quote file; returns (quotes, meta)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise QuoteFormatError(f"{path}: cannot read file: {exc}") from exc
    suffix = path.suffix.lower()
    if suffix == ".json" or (suffix != ".csv" and text.lstrip()[:1] == "{"):
        return _parse_json(text, str(path))
    return _parse_csv(text, str(path))


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise QuoteFormatError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _number_list(value, where: str) -> list[float]:
    if not isinstance(value, list) or not value:
        raise QuoteFormatError(f"{where}: expected a non-empty array")
    return [_number(v, f"{where}[{i}]") for i, v in enumerate(value)]


def _build(forward, strikes, calls, digitals, meta, where: str) -> tuple[MarketQuotes, dict]:
    try:
        grid = StrikeGrid(strikes)
        quotes = MarketQuotes(grid=grid, forward=forward, calls=calls,
                              digitals=digitals)
    except ValueError as exc:
        raise QuoteFormatError(f"{where}: {exc}") from exc
    return quotes, meta


def _parse_json(text: str, where: str) -> tuple[MarketQuotes, dict]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise QuoteFormatError(f"{where}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise QuoteFormatError(f"{where}: top level must be an object")
    unknown = set(doc) - {"forward", "strikes", "calls", "digitals", "meta"}
    if unknown:
        raise QuoteFormatError(f"{where}: unknown fields {sorted(unknown)}")
    for key in ("forward", "strikes", "calls"):
        if key not in doc:
            raise QuoteFormatError(f"{where}: missing field {key!r}")
    forward = _number(doc["forward"], f"{where}: forward")
    strikes = _number_list(doc["strikes"], f"{where}: strikes")
    calls = _number_list(doc["calls"], f"{where}: calls")
    digitals = None
    if doc.get("digitals") is not None:
        digitals = _number_list(doc["digitals"], f"{where}: digitals")
    meta = doc.get("meta") or {}
    if not isinstance(meta, dict):
        raise QuoteFormatError(f"{where}: meta must be an object")
    return _build(forward, strikes, calls, digitals, meta, where)


def _parse_csv(text: str, where: str) -> tuple[MarketQuotes, dict]:
    rows = list(csv.reader(text.splitlines()))
    rows = [(i + 1, row) for i, row in enumerate(rows) if any(cell.strip() for cell in row)]
    if not rows:
        raise QuoteFormatError(f"{where}: empty file")
    header = [cell.strip().lower() for cell in rows[0][1]]
    if header[:2] != ["strike", "call"] or len(header) > 3 or \
            (len(header) == 3 and header[2] != "digital"):
        raise QuoteFormatError(
            f"{where}: line 1: header must be strike,call[,digital]")
    has_digital = len(header) == 3

    forward = None
    strikes: list[float] = []
    calls: list[float] = []
    digitals: list[float] = []
    for lineno, row in rows[1:]:
        if len(row) != len(header):
            raise QuoteFormatError(
                f"{where}: line {lineno}: expected {len(header)} cells, got {len(row)}")

        def cell(idx: int, name: str) -> float:
            raw = row[idx].strip()
            try:
                return float(raw)
            except ValueError:
                raise QuoteFormatError(
                    f"{where}: line {lineno}: bad {name} value {raw!r}") from None

        strike = cell(0, "strike")
        call = cell(1, "call")
        if strike == 0.0:
            if forward is not None:
                raise QuoteFormatError(
                    f"{where}: line {lineno}: duplicate strike-0 forward row")
            dig_raw = row[2].strip() if has_digital else ""
            if dig_raw not in ("", "1", "1.0"):
                raise QuoteFormatError(
                    f"{where}: line {lineno}: strike-0 digital must be empty or 1")
            forward = call
            continue
        strikes.append(strike)
        calls.append(call)
        if has_digital:
            digitals.append(cell(2, "digital"))
    if forward is None:
        raise QuoteFormatError(
            f"{where}: no strike-0 row carrying the forward")
    if not strikes:
        raise QuoteFormatError(f"{where}: no strike rows")
    return _build(forward, strikes, calls,
                  digitals if has_digital else None, {}, where)
