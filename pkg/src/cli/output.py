"""
输出格式
数值优先用 12 位有效数字；若不能精确还原原值，则退回 Python 的最短往返表示
"""

import csv
import math
import sys
from collections.abc import Iterable, Sequence
from enum import Enum
from pathlib import Path
from typing import Any, TextIO


def format_float(value: float) -> str:
    text = f"{value:.12g}"
    if math.isnan(value) or float(text) != value:
        return repr(value)
    return text


def format_complex(value: complex) -> str:
    """a+bj / a-bj"""
    sign = "-" if math.copysign(1.0, value.imag) < 0 else "+"
    return f"{format_float(value.real)}{sign}{format_float(abs(value.imag))}j"


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, complex):
        return format_complex(value)
    return str(value)


def key_value_lines(pairs: Iterable[tuple[str, Any]]) -> str:
    return "".join(f"{key}={format_value(value)}\n" for key, value in pairs)


def write_csv(header: Sequence[str], rows: Iterable[Sequence[Any]], target: str | Path | None = None) -> None:
    """
    写 CSV（UTF-8，逗号分隔，LF 行尾）

    Args:
        header: 表头
        rows: 数据行（原始数值，统一在这里格式化）
        target: 输出路径；为空时写到标准输出
    """
    if target is None:
        _write_rows(sys.stdout, header, rows)
        return
    path = Path(target)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        _write_rows(handle, header, rows)


def _write_rows(handle: TextIO, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
