"""Run configuration and CSV input/output.

Configuration files use INI syntax (:mod:`configparser`).  Recognised keys::

    [data]
    path = data.csv          ; CSV with a header row of variable names
    lags = 1                 ; p >= 1
    states = 2               ; M >= 1

    [scheme]
    preset = unrestricted    ; unrestricted | recursive | taylor_with_money |
                             ; taylor_without_money | money_interest_rate
    restricted_rows = all    ; "all" or a comma list of 1-based rows
    pattern =                ; optional explicit grid, rows separated by ";"
    Q =                      ; optional CSV file holding Q (N^2 x r)
    q =                      ; optional CSV file holding q (N^2 values)

    [prior]                  ; any PriorHyperparameters field
    b_omega = 3
    persistence = 0, 0       ; diagonal of the first-lag prior mean

    [sampler]                ; any SamplerConfig field except seed
    n_burn = 5000
    n_draws = 20000
    n_chains = 2
    fixed_blocks =           ; comma list of block names

    [output]
    dir = out

    [run]
    seed = 0

    [simulate]
    periods = 500            ; observations after the presample
    truth = truth.json       ; optional; defaults to a two-variable system

Relative paths are resolved against the directory holding the config file.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import DataFormatError, InsufficientDataError
from .gibbs import SamplerConfig
from .model import ModelParameters, PriorHyperparameters, TimeSeriesData
from .restrictions import RestrictionScheme, preset, scheme_from_pattern

# --------------------------------------------------------------------------
# CSV


def parse_csv_text(text: str, source: str = "<string>", p: int | None = None) -> TimeSeriesData:
    """Parse CSV text with a header row; each following row is one period."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataFormatError(f"{source}: file is empty")
    header = [c.strip() for c in rows[0]]
    if any(not h for h in header):
        raise DataFormatError(f"{source}: blank variable name in header", row=1)
    if len(set(header)) != len(header):
        raise DataFormatError(f"{source}: duplicate variable names in header", row=1)
    body = rows[1:]
    if not body:
        raise DataFormatError(f"{source}: header present but no observations")
    N = len(header)
    values = np.empty((len(body), N))
    for k, row in enumerate(body):
        line = k + 2
        if len(row) != N:
            raise DataFormatError(f"{source}: row {line} has {len(row)} fields, header has {N}", row=line)
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataFormatError(
                    f"{source}: non-numeric value {cell.strip()!r} at row {line}, column {header[j]!r}",
                    row=line, column=header[j],
                ) from None
            if not math.isfinite(v):
                raise DataFormatError(
                    f"{source}: missing or non-finite value {cell.strip()!r} at row {line}, column {header[j]!r}",
                    row=line, column=header[j],
                )
            values[k, j] = v
    if p is not None:
        need = N * (p + 1) + p
        if len(body) < need:
            raise InsufficientDataError(f"{source}: {len(body)} rows; N={N} with p={p} needs at least {need}")
    return TimeSeriesData(values.T, tuple(header))


def load_csv(path, p: int | None = None) -> TimeSeriesData:
    """Read a data file (header of names, one chronological observation per row).

    With ``p`` given, files too short for that lag order are rejected.
    """
    path = Path(path)
    return parse_csv_text(path.read_text(encoding="utf-8"), str(path), p)


def csv_text(header, rows) -> str:
    """CSV with full-precision floats (``repr``) and ``\\n`` line endings."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def data_to_csv_text(data: TimeSeriesData) -> str:
    return csv_text(data.names, data.values.T.tolist())


def write_csv(path, data: TimeSeriesData) -> Path:
    path = Path(path)
    path.write_text(data_to_csv_text(data), encoding="utf-8")
    return path


def load_matrix_csv(path) -> np.ndarray:
    """Headerless numeric CSV as a 2-d array."""
    rows = [r for r in csv.reader(open(path, encoding="utf-8")) if r]
    try:
        return np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise DataFormatError(f"{path}: non-numeric matrix entry") from exc


# --------------------------------------------------------------------------
# Run configuration


@dataclass
class RunConfig:
    data_path: Path | None = None
    p: int = 1
    M: int = 2
    scheme_preset: str = "unrestricted"
    restricted_rows: tuple[int, ...] | None = None
    pattern: tuple[str, ...] | None = None
    Q_path: Path | None = None
    q_path: Path | None = None
    prior: PriorHyperparameters = field(default_factory=PriorHyperparameters)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    out_dir: Path = Path("out")
    seed: int = 0
    periods: int = 500
    truth_path: Path | None = None

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("lag order must be at least 1")
        if self.M < 1:
            raise ValueError("number of states must be at least 1")

    def scheme(self, N: int) -> RestrictionScheme:
        """Restriction scheme for ``N`` variables from the explicit matrices, a pattern or the preset."""
        if self.Q_path is not None or self.q_path is not None:
            if self.Q_path is None or self.q_path is None:
                raise ValueError("explicit restrictions need both Q and q files")
            Q = load_matrix_csv(self.Q_path)
            q = load_matrix_csv(self.q_path).ravel()
            scheme = RestrictionScheme(Q.reshape(q.size, -1), q, name="explicit")
        elif self.pattern:
            scheme = scheme_from_pattern(list(self.pattern), name="pattern")
        else:
            scheme = preset(self.scheme_preset, N, self.restricted_rows)
        if scheme.N != N:
            raise ValueError(f"restriction scheme is for {scheme.N} variables, data has {N}")
        return scheme

    def sampler_config(self) -> SamplerConfig:
        return replace(self.sampler, seed=self.seed)

    def load_data(self) -> TimeSeriesData:
        if self.data_path is None:
            raise ValueError("config has no [data] path")
        return load_csv(self.data_path, self.p)


def parse_rows(text: str | None) -> tuple[int, ...] | None:
    """``"all"``/empty means every row; otherwise a comma list of 1-based rows."""
    if text is None:
        return None
    text = str(text).strip().lower()
    if text in ("", "all"):
        return None
    return tuple(int(t) for t in text.replace(";", ",").split(",") if t.strip())


def _coerce(kind, raw: str):
    if kind is bool:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw


def _section_values(cp, section: str, cls, skip=()):
    out = {}
    if not cp.has_section(section):
        return out
    known = {f.name: f for f in fields(cls)}
    for key, raw in cp.items(section):
        if key in skip:
            continue
        if key not in known:
            raise ValueError(f"unknown key {key!r} in [{section}]")
        default = getattr(cls(), key)
        if key == "persistence":
            out[key] = None if not raw.strip() else tuple(float(v) for v in raw.split(","))
        elif key == "fixed_blocks":
            out[key] = frozenset(t.strip() for t in raw.split(",") if t.strip())
        else:
            out[key] = _coerce(type(default), raw)
    return out


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file {path} not found")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    cp.read(path, encoding="utf-8")
    base = path.parent

    def resolve(value):
        if value is None or not str(value).strip():
            return None
        p = Path(str(value).strip())
        return p if p.is_absolute() else base / p

    get = lambda s, k, d=None: cp.get(s, k, fallback=d)  # noqa: E731
    pattern = get("scheme", "pattern")
    cfg = RunConfig(
        data_path=resolve(get("data", "path")),
        p=int(get("data", "lags", "1")),
        M=int(get("data", "states", "2")),
        scheme_preset=(get("scheme", "preset", "unrestricted") or "unrestricted").strip(),
        restricted_rows=parse_rows(get("scheme", "restricted_rows")),
        pattern=tuple(r.strip() for r in pattern.split(";")) if pattern and pattern.strip() else None,
        Q_path=resolve(get("scheme", "Q")),
        q_path=resolve(get("scheme", "q")),
        prior=PriorHyperparameters(**_section_values(cp, "prior", PriorHyperparameters)),
        sampler=SamplerConfig(**_section_values(cp, "sampler", SamplerConfig, skip=("seed",))),
        out_dir=resolve(get("output", "dir")) or Path("out"),
        seed=int(get("run", "seed", "0")),
        periods=int(get("simulate", "periods", "500")),
        truth_path=resolve(get("simulate", "truth")),
    )
    return cfg


# --------------------------------------------------------------------------
# Simulation truth


def default_truth() -> ModelParameters:
    """Two-variable, two-state, one-lag system with distinct relative variances."""
    A0 = np.array([[1.0, 0.5], [-0.3, 1.0]])
    A = np.array([[0.0, 0.5, 0.0], [0.0, 0.1, 0.4]])
    return ModelParameters(
        A0=A0,
        A=A,
        lambda1=np.array([1.0, 1.0]),
        omega=np.array([[4.0, 9.0]]),
        P=np.array([[0.95, 0.05], [0.05, 0.95]]),
        gamma_alpha=1.0,
        gamma_mu=1.0,
        gamma_beta=1.0,
    )


def load_truth(path) -> ModelParameters:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    return ModelParameters.from_dict(d.get("params", d))
