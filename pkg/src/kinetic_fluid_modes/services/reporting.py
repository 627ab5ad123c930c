"""CSV/JSON 결과 파일 쓰기 (UTF-8, LF, 결정적 출력)."""

import csv
import dataclasses
import json
import math
from pathlib import Path

import numpy as np

from ..errors import ConfigError

BRANCH_COLUMNS = ["label", "eta", "re_mu", "im_mu", "defect", "residual"] + [
    f"C_{k}{part}" for k in range(5) for part in ("re", "im")
]


def format_float(x):
    """JSON 과 같은 최단 왕복 repr (최대 17 유효숫자). NaN/inf는 문자열 그대로."""
    return repr(float(x))


def _cell(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format_float(value)


def to_jsonable(value):
    """complex -> {"re", "im"}, NaN -> null, numpy/dataclass/tuple -> 기본 타입."""
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        if hasattr(value, "as_dict"):
            return to_jsonable(value.as_dict())
        return to_jsonable(dataclasses.asdict(value))
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": to_jsonable(value.real), "im": to_jsonable(value.imag)}
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if not math.isfinite(value) else value
    return value


def _prepare(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"Cannot create output directory {path.parent}: {e}") from e
    return path


def write_csv(path, header, rows):
    path = _prepare(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
    except OSError as e:
        raise ConfigError(f"Writing {path} failed: {e}") from e
    return path


def write_json(path, data):
    path = _prepare(path)
    text = json.dumps(to_jsonable(data), indent=2, sort_keys=True, allow_nan=False)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text + "\n")
    except OSError as e:
        raise ConfigError(f"Writing {path} failed: {e}") from e
    return path


def branch_rows(branch):
    for s in branch.samples:
        row = [branch.label, s.eta, s.mu.real, s.mu.imag, s.defect, s.residual]
        for c in s.coefficients:
            row.extend([c.real, c.imag])
        yield row


def write_branch_csv(directory, branch):
    path = Path(directory) / f"branch_{branch.label}.csv"
    return write_csv(path, BRANCH_COLUMNS, branch_rows(branch))
