"""Result rows, CSV / json-lines emission and the verifier matrix file format."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import IO, Iterable, Iterator

import numpy as np

from .core import ValidationError

HEADER = (
    "experiment",
    "seed",
    "mu",
    "eps",
    "k",
    "eta",
    "q",
    "iterations",
    "retries",
    "aborted",
    "energy_out",
    "energy_exact_nearest",
    "wall_time_ms",
)
FORMATS = ("csv", "jsonl")
SIG_DIGITS = 12


def fmt_number(x) -> str:
    """12 significant digits; '' for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, f".{SIG_DIGITS}g")


def round_sig(x: float | None) -> float | None:
    return None if x is None else float(fmt_number(x))


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    seed: int
    mu: float | None
    eps: float | None
    k: int | None
    eta: int | None
    q: float | None
    iterations: int
    retries: int
    aborted: bool
    energy_out: float | None
    energy_exact_nearest: float | None
    wall_time_ms: float = 0.0

    def __post_init__(self):
        if self.aborted and self.energy_out is not None:
            raise ValidationError("aborted rows carry no output energy")

    def as_strings(self) -> dict[str, str]:
        d = asdict(self)
        return {name: (d[name] if name == "experiment" else fmt_number(d[name])) for name in HEADER}

    def as_json(self) -> dict:
        d = asdict(self)
        out = {}
        for name in HEADER:
            v = d[name]
            if isinstance(v, float):
                v = round_sig(v)
            elif isinstance(v, np.integer):
                v = int(v)
            out[name] = v
        return out

    def rounded(self) -> "ResultRow":
        """The row as it reads back after serialization."""
        return _from_json(self.as_json())


_INT_FIELDS = {"seed", "k", "eta", "iterations", "retries"}
_FLOAT_FIELDS = {"mu", "eps", "q", "energy_out", "energy_exact_nearest", "wall_time_ms"}


def _parse_cell(name: str, s: str):
    if name == "experiment":
        return s
    if s == "":
        return None
    if name == "aborted":
        if s not in ("true", "false"):
            raise ValidationError(f"bad aborted flag {s!r}")
        return s == "true"
    return int(s) if name in _INT_FIELDS else float(s)


def _from_json(d: dict) -> ResultRow:
    missing = [h for h in HEADER if h not in d]
    if missing:
        raise ValidationError(f"result record lacks fields {missing}")
    vals = {}
    for name in HEADER:
        v = d[name]
        if name in _FLOAT_FIELDS and v is not None:
            v = float(v)
        vals[name] = v
    return ResultRow(**vals)


class ResultWriter:
    """Streams rows to a file, flushing after each row so a killed run leaves a parseable prefix."""

    def __init__(self, target: str | Path | IO[str], fmt: str = "csv"):
        if fmt not in FORMATS:
            raise ValidationError(f"unknown format {fmt!r}; expected one of {FORMATS}")
        self.fmt = fmt
        if isinstance(target, (str, Path)):
            path = Path(target)
            path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(path, "w", newline="", encoding="utf-8")
            self._owned = True
        else:
            self._fh = target
            self._owned = False
        self._csv = None
        if fmt == "csv":
            self._csv = csv.DictWriter(self._fh, fieldnames=HEADER, lineterminator="\n")
            self._csv.writeheader()
            self._fh.flush()
        self.count = 0

    def write(self, row: ResultRow):
        if self._csv is not None:
            self._csv.writerow(row.as_strings())
        else:
            self._fh.write(json.dumps(row.as_json()) + "\n")
        self._fh.flush()
        self.count += 1

    def close(self):
        if self._owned:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_results(rows: Iterable[ResultRow], target, fmt: str = "csv") -> int:
    with ResultWriter(target, fmt) as w:
        for r in rows:
            w.write(r)
        return w.count


def parse_results(text: str, fmt: str = "csv") -> list[ResultRow]:
    if fmt == "csv":
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != HEADER:
            raise ValidationError(f"CSV header {reader.fieldnames} does not match {list(HEADER)}")
        return [ResultRow(**{h: _parse_cell(h, rec[h]) for h in HEADER}) for rec in reader]
    if fmt == "jsonl":
        return [_from_json(json.loads(line)) for line in text.splitlines() if line.strip()]
    raise ValidationError(f"unknown format {fmt!r}")


def read_results(path: str | Path, fmt: str | None = None) -> list[ResultRow]:
    path = Path(path)
    fmt = fmt or ("jsonl" if path.suffix in (".jsonl", ".json") else "csv")
    return parse_results(path.read_text(encoding="utf-8"), fmt)


def iter_table(rows: Iterable[dict], columns: tuple[str, ...]) -> Iterator[str]:
    """CSV lines for the check tables (bounds, jordan), numbers at 12 digits."""
    yield ",".join(columns)
    for r in rows:
        yield ",".join(r[c] if isinstance(r[c], str) else fmt_number(r[c]) for c in columns)


# -- verifier matrix files -----------------------------------------------------
#
#   dim D
#   a+bi a+bi ... (D entries)
#   ... (D rows)
#
# Entries are separated by whitespace.  Each entry is parsed by replacing the
# trailing 'i' with 'j' and handing it to complex(), so '1', '-0.5i',
# '0.25-1e-3i' and 'nan' style tokens follow Python's float grammar exactly.
# Blank lines and lines starting with '#' are ignored.  Writing uses repr of
# the real and imaginary parts, so a write/read cycle is bit-exact.


def _parse_entry(tok: str, lineno: int) -> complex:
    t = tok.strip()
    if t.endswith("i"):
        t = t[:-1] + "j"
    try:
        return complex(t)
    except ValueError:
        raise ValidationError(f"line {lineno}: cannot parse matrix entry {tok!r}") from None


def parse_matrix(text: str) -> np.ndarray:
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValidationError("matrix file is empty")
    lineno, head = lines[0]
    parts = head.split()
    if len(parts) != 2 or parts[0] != "dim" or not parts[1].isdigit():
        raise ValidationError(f"line {lineno}: expected header 'dim D', got {head!r}")
    D = int(parts[1])
    body = lines[1:]
    if len(body) != D:
        raise ValidationError(f"declared dim {D} but found {len(body)} matrix rows")
    M = np.empty((D, D), dtype=complex)
    for r, (lineno, ln) in enumerate(body):
        toks = ln.split()
        if len(toks) != D:
            raise ValidationError(f"line {lineno}: expected {D} entries, found {len(toks)}")
        M[r] = [_parse_entry(t, lineno) for t in toks]
    return M


def _entry(z: complex) -> str:
    re_, im = repr(float(z.real)), repr(float(z.imag))
    sign = "" if im.startswith("-") else "+"
    return f"{re_}{sign}{im}i"


def format_matrix(M: np.ndarray) -> str:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {M.shape}")
    rows = [" ".join(_entry(z) for z in row) for row in M]
    return "\n".join([f"dim {M.shape[0]}"] + rows) + "\n"


def read_matrix(path: str | Path) -> np.ndarray:
    return parse_matrix(Path(path).read_text(encoding="utf-8"))


def write_matrix(path: str | Path, M: np.ndarray):
    Path(path).write_text(format_matrix(M), encoding="utf-8")
