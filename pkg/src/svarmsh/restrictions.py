"""Linear restrictions ``vec(A0) = Q alpha + q`` on the structural matrix.

Schemes are usually built from a *pattern*: an ``N x N`` grid of string
tokens, one per cell of ``A0``.

* a number (``"0"``, ``"1"``, ``"-1"``) fixes the cell;
* ``"*"`` makes the cell a free element named ``a{row}{col}`` (1-based);
* ``"a65"`` / ``"-a65"`` ties the cell to the free element ``a65`` with
  coefficient ``+1`` / ``-1``.

Free elements are ordered column by column (column-major ``vec``) by the
position of their own cell.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

_TIE = re.compile(r"^([+-]?)(\d*\.?\d*)\*?(a\d+_?\d*)$")

UNRESTRICTED = "unrestricted"
RECURSIVE = "recursive"
TAYLOR_WITH_MONEY = "taylor_with_money"
TAYLOR_WITHOUT_MONEY = "taylor_without_money"
MONEY_INTEREST_RATE = "money_interest_rate"

# Six-variable monetary schemes; variable order (p, gdp, cp, FF, m, uc).
_MONETARY_PATTERNS = {
    TAYLOR_WITH_MONEY: [
        "1 0 0 0 0 0",
        "* 1 0 0 0 0",
        "* * 1 * * *",
        "* * 0 1 * 0",
        "-1 * 0 0 1 *",
        "-a65 0 0 * * 1",
    ],
    TAYLOR_WITHOUT_MONEY: [
        "1 0 0 0 0 0",
        "* 1 0 0 0 0",
        "* * 1 * * *",
        "* * 0 1 0 0",
        "-1 * 0 0 1 *",
        "-a65 0 0 * * 1",
    ],
    MONEY_INTEREST_RATE: [
        "1 0 0 0 0 0",
        "* 1 0 0 0 0",
        "* * 1 * * *",
        "0 0 0 1 * 0",
        "-1 * 0 0 1 *",
        "-a65 0 0 * * 1",
    ],
}

PRESET_NAMES = (UNRESTRICTED, RECURSIVE, TAYLOR_WITH_MONEY, TAYLOR_WITHOUT_MONEY, MONEY_INTEREST_RATE)


def _cell_name(i: int, j: int, n: int) -> str:
    # a65 for small systems, a10_11 once indices need two digits
    if n < 10:
        return f"a{i + 1}{j + 1}"
    return f"a{i + 1}_{j + 1}"


@dataclass(frozen=True)
class RestrictionScheme:
    """Restriction pair ``(Q, q)``; ``Q`` is ``N^2 x r`` and ``q`` has length ``N^2``."""

    Q: np.ndarray
    q: np.ndarray
    name: str | None = None
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        q = np.asarray(self.q, dtype=float).ravel()
        if Q.shape[0] != q.size and Q.size:
            raise ValueError("Q and q have inconsistent lengths")
        n = int(round(np.sqrt(q.size)))
        if n * n != q.size or n < 1:
            raise ValueError("q must have N^2 elements")
        if Q.size == 0:
            Q = np.zeros((q.size, 0))
        diag = np.arange(n) * (n + 1)
        if np.any(Q[diag] != 0) or np.any(q[diag] != 1.0):
            raise ValueError("restrictions must fix the diagonal of A0 at one")
        if Q.shape[1] and np.linalg.matrix_rank(Q) < Q.shape[1]:
            raise ValueError("columns of Q must be linearly independent")
        labels = tuple(self.labels) if self.labels else tuple(f"alpha{k + 1}" for k in range(Q.shape[1]))
        if len(labels) != Q.shape[1]:
            raise ValueError("one label per column of Q")
        Q.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "labels", labels)

    @property
    def N(self) -> int:
        return int(round(np.sqrt(self.q.size)))

    @property
    def r(self) -> int:
        return self.Q.shape[1]

    def reconstruct_A0(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float)
        vec = self.Q @ alpha + self.q
        return vec.reshape(self.N, self.N, order="F")

    def extract_alpha(self, A0) -> np.ndarray:
        """Least-squares inverse of :meth:`reconstruct_A0` (exact for admissible ``A0``)."""
        if self.r == 0:
            return np.zeros(0)
        vec = np.asarray(A0, dtype=float).reshape(-1, order="F") - self.q
        alpha, *_ = np.linalg.lstsq(self.Q, vec, rcond=None)
        return alpha

    def is_admissible(self, A0, atol: float = 1e-10) -> bool:
        return bool(np.allclose(self.reconstruct_A0(self.extract_alpha(A0)), A0, atol=atol, rtol=0))

    def zero_mask(self) -> np.ndarray:
        """Cells of ``A0`` that are zero for every ``alpha``."""
        return (np.all(self.Q == 0, axis=1) & (self.q == 0)).reshape(self.N, self.N, order="F")

    def free_mask(self) -> np.ndarray:
        return np.any(self.Q != 0, axis=1).reshape(self.N, self.N, order="F")

    def column_blocks(self) -> np.ndarray:
        """``Q`` reshaped to ``(N, N, r)`` with axes (column j, row n, free element)."""
        return self.Q.reshape(self.N, self.N, self.r)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "N": self.N,
            "labels": list(self.labels),
            "Q": self.Q.tolist(),
            "q": self.q.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RestrictionScheme":
        n = int(d["N"])
        Q = np.asarray(d["Q"], dtype=float).reshape(n * n, -1)
        return cls(Q, np.asarray(d["q"], dtype=float), d.get("name"), tuple(d.get("labels", ())))


def _tokens(pattern: Sequence) -> list[list[str]]:
    rows = []
    for row in pattern:
        rows.append(row.split() if isinstance(row, str) else [str(c) for c in row])
    return rows


def scheme_from_pattern(pattern: Sequence, name: str | None = None) -> RestrictionScheme:
    cells = _tokens(pattern)
    n = len(cells)
    if any(len(row) != n for row in cells):
        raise ValueError("pattern must be square")
    free: list[tuple[int, int, str]] = []
    for j in range(n):
        for i in range(n):
            if cells[i][j] == "*":
                free.append((i, j, _cell_name(i, j, n)))
    index = {nm: k for k, (_, _, nm) in enumerate(free)}
    Q = np.zeros((n * n, len(free)))
    q = np.zeros(n * n)
    for i in range(n):
        for j in range(n):
            tok = cells[i][j]
            pos = j * n + i
            if tok == "*":
                Q[pos, index[_cell_name(i, j, n)]] = 1.0
                continue
            try:
                q[pos] = float(tok)
                continue
            except ValueError:
                pass
            m = _TIE.match(tok)
            if not m or m.group(3) not in index:
                raise ValueError(f"cannot parse pattern cell ({i + 1},{j + 1}): {tok!r}")
            coef = float(m.group(2)) if m.group(2) else 1.0
            if m.group(1) == "-":
                coef = -coef
            Q[pos, index[m.group(3)]] += coef
    return RestrictionScheme(Q, q, name, tuple(nm for _, _, nm in free))


def unrestricted_pattern(n: int) -> list[list[str]]:
    return [["1" if i == j else "*" for j in range(n)] for i in range(n)]


def recursive_pattern(n: int) -> list[list[str]]:
    return [["1" if i == j else ("*" if j < i else "0") for j in range(n)] for i in range(n)]


def preset_pattern(name: str, n: int) -> list[list[str]]:
    if name == UNRESTRICTED:
        return unrestricted_pattern(n)
    if name == RECURSIVE:
        return recursive_pattern(n)
    if name in _MONETARY_PATTERNS:
        if n != 6:
            raise ValueError(f"preset {name!r} is defined for six variables, got N={n}")
        return _tokens(_MONETARY_PATTERNS[name])
    raise KeyError(f"unknown restriction preset {name!r}; choose from {', '.join(PRESET_NAMES)}")


def preset(name: str, n: int, rows: Iterable[int] | None = None) -> RestrictionScheme:
    """Build a named scheme.

    ``rows`` (1-based) restricts the preset's pattern to those equations only;
    every other row of ``A0`` is left unrestricted.  ``None`` applies the
    pattern to all rows.
    """
    pattern = preset_pattern(name, n)
    label = name
    if rows is not None:
        rows = sorted({int(r) for r in rows})
        if any(r < 1 or r > n for r in rows):
            raise ValueError(f"restricted rows must lie in 1..{n}")
        free = unrestricted_pattern(n)
        pattern = [pattern[i] if (i + 1) in rows else free[i] for i in range(n)]
        # ties into a freed row no longer refer to an existing element
        names_alive = {_cell_name(i, j, n) for i in range(n) for j in range(n) if pattern[i][j] == "*"}
        for i in range(n):
            for j in range(n):
                m = _TIE.match(pattern[i][j])
                if m and m.group(3) not in names_alive:
                    raise ValueError(f"row selection breaks tie {pattern[i][j]!r} in cell ({i + 1},{j + 1})")
        label = f"{name}[rows={','.join(map(str, rows))}]"
    return scheme_from_pattern(pattern, label)


def describe(scheme: RestrictionScheme) -> list[list[str]]:
    """Human-readable grid of the scheme, the inverse of :func:`scheme_from_pattern`."""
    n = scheme.N
    grid = []
    for i in range(n):
        row = []
        for j in range(n):
            pos = j * n + i
            nz = np.flatnonzero(scheme.Q[pos])
            if nz.size == 0:
                row.append(f"{scheme.q[pos]:g}")
                continue
            terms = []
            for k in nz:
                c = scheme.Q[pos, k]
                lab = scheme.labels[k]
                terms.append(lab if c == 1 else (f"-{lab}" if c == -1 else f"{c:g}*{lab}"))
            if scheme.q[pos]:
                terms.append(f"{scheme.q[pos]:g}")
            row.append("+".join(terms).replace("+-", "-"))
        grid.append(row)
    return grid
