import math
import os
from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class Settings:
    log_level: str
    threads: int
    kde_grid_size: int = 512
    bicop_grid_size: int = 30
    bandwidth_mult: float = 1.0
    min_class_size: int = 100
    source_date_epoch: Optional[int] = None

    @classmethod
    def from_env(cls) -> "Settings":
        epoch_raw = os.getenv("SOURCE_DATE_EPOCH")
        return cls(
            log_level=os.getenv("LOG_LEVEL", "INFO").upper(),
            threads=_parse_int(
                os.getenv("VINEGEN_THREADS"), os.cpu_count() or 1, low=1, high=256
            ),
            kde_grid_size=_parse_int(
                os.getenv("VINEGEN_KDE_GRID"), 512, low=64, high=8192
            ),
            bicop_grid_size=_parse_int(
                os.getenv("VINEGEN_BICOP_GRID"), 30, low=8, high=200
            ),
            bandwidth_mult=_parse_float(
                os.getenv("VINEGEN_TLL_MULT"), 1.0, low=0.1, high=10.0
            ),
            min_class_size=_parse_int(
                os.getenv("VINEGEN_MIN_CLASS_SIZE"), 100, low=1, high=10**9
            ),
            source_date_epoch=(
                _parse_int(epoch_raw, 0, low=0, high=2**63 - 1)
                if epoch_raw
                else None
            ),
        )


def _parse_int(value: Optional[str | int], fallback: int, low: int, high: int) -> int:
    try:
        parsed = int(value) if value is not None else int(fallback)
    except (TypeError, ValueError):
        parsed = int(fallback)
    return max(low, min(parsed, high))


def _parse_float(value: Optional[str], fallback: float, low: float, high: float) -> float:
    try:
        parsed = float(value) if value is not None else float(fallback)
    except ValueError:
        parsed = float(fallback)
    if math.isnan(parsed):
        parsed = float(fallback)
    return max(low, min(parsed, high))
