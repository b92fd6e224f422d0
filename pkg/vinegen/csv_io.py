import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from vinegen.errors import FormatError, HeaderValidationError

LABEL_COLUMN = "label"
EXPECTED_HEADER = "unique non-empty column names, optional trailing 'label'"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF
FINGERPRINT_CHUNK = 1 << 20


@dataclass
class CsvTable:
    columns: list[str]
    values: np.ndarray
    labels: Optional[np.ndarray] = None


class CsvTableReader:

    def load(self, source: Path) -> CsvTable:
        with open(source, newline="", encoding="utf-8-sig") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            columns, has_label = self._validate_header(header)
            rows: list[list[float]] = []
            labels: list[int] = []
            width = len(columns) + (1 if has_label else 0)
            for idx, row in enumerate(reader, start=2):
                if not row or all(not cell.strip() for cell in row):
                    logging.debug("Row %s skipped: blank line", idx)
                    continue
                if len(row) != width:
                    raise FormatError(
                        f"{source}: row {idx} has {len(row)} fields, expected {width}"
                    )
                cells = [self._clean_value(cell) for cell in row]
                try:
                    rows.append([float(cell) for cell in cells[: len(columns)]])
                    if has_label:
                        labels.append(int(cells[-1]))
                except ValueError as exc:
                    raise FormatError(f"{source}: row {idx}: {exc}") from exc
        values = np.array(rows, dtype=float).reshape(len(rows), len(columns))
        if not np.all(np.isfinite(values)):
            raise FormatError(f"{source}: non-finite values present")
        logging.debug(
            "Loaded %s rows x %s columns from %s (labels=%s)",
            values.shape[0],
            values.shape[1],
            source,
            has_label,
        )
        return CsvTable(
            columns=columns,
            values=values,
            labels=np.array(labels, dtype=int) if has_label else None,
        )

    @staticmethod
    def _validate_header(header: list[str] | None) -> tuple[list[str], bool]:
        if not header:
            raise HeaderValidationError(EXPECTED_HEADER, header)
        cleaned = [CsvTableReader._clean_value(h) for h in header]
        if any(not name for name in cleaned) or len(set(cleaned)) != len(cleaned):
            raise HeaderValidationError(EXPECTED_HEADER, cleaned)
        has_label = cleaned[-1] == LABEL_COLUMN
        if LABEL_COLUMN in cleaned[:-1]:
            raise HeaderValidationError(EXPECTED_HEADER, cleaned)
        columns = cleaned[:-1] if has_label else cleaned
        if not columns:
            raise HeaderValidationError(EXPECTED_HEADER, cleaned)
        return columns, has_label

    @staticmethod
    def _clean_value(value: str | None) -> str:
        if value is None:
            return ""
        return value.replace("\ufeff", "", 1).strip()


def read_csv(source: Path | str) -> CsvTable:
    return CsvTableReader().load(Path(source))


def default_columns(d: int) -> list[str]:
    return [f"x{i}" for i in range(d)]


def write_csv(
    destination: Path | str,
    values: np.ndarray,
    labels: Optional[np.ndarray] = None,
    columns: Optional[Sequence[str]] = None,
) -> Path:
    """Write rows with shortest round-trip decimals so reloads are bit-exact."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    names = list(columns) if columns is not None else default_columns(values.shape[1])
    if len(names) != values.shape[1]:
        raise FormatError(
            f"{len(names)} column names given for {values.shape[1]} columns"
        )
    if labels is not None and len(labels) != values.shape[0]:
        raise FormatError(f"{len(labels)} labels given for {values.shape[0]} rows")
    path = Path(destination)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(names + ([LABEL_COLUMN] if labels is not None else []))
        for i, row in enumerate(values):
            cells = [repr(float(v)) for v in row]
            if labels is not None:
                cells.append(str(int(labels[i])))
            writer.writerow(cells)
    logging.debug("Wrote %s rows to %s", values.shape[0], path)
    return path


def _fnv1a_update(value: int, chunk: bytes) -> int:
    prime, mask = _FNV_PRIME, _MASK64
    for byte in chunk:
        value = ((value ^ byte) * prime) & mask
    return value


def fnv1a_64(payload: bytes) -> str:
    return f"{_fnv1a_update(_FNV_OFFSET, payload):016x}"


def file_fingerprint(source: Path | str, chunk_size: int = FINGERPRINT_CHUNK) -> str:
    # byte-serial: tens of megabytes (full IDX image files) take seconds
    value = _FNV_OFFSET
    with open(source, "rb") as handle:
        while chunk := handle.read(chunk_size):
            value = _fnv1a_update(value, chunk)
    return f"{value:016x}"
