"""Clock-wave configurations on the cylinder and the brick moves between them.

A configuration stores, for every column ``k`` of the cylinder, the row
``j_k`` holding the single clock ``1`` of that column.  Rows are cyclic
(``0 .. c-1``); columns are not.  A *full brick* advances two adjacent
columns by one row, a *half brick* advances one of the two boundary columns.
"""

from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import product

from .errors import DimensionError, MoveError, ValidityError

FULL = "full"
LEFT = "left"
RIGHT = "right"


@dataclass(frozen=True)
class Dims:
    """Cylinder size: ``h`` columns (qubits) and ``c`` cyclic rows."""

    h: int
    c: int

    def __post_init__(self):
        if not (isinstance(self.h, int) and isinstance(self.c, int)):
            raise DimensionError(f"h and c must be integers, got {self.h!r}, {self.c!r}")
        if self.h < 2 or self.h % 2:
            raise DimensionError(f"h must be an even integer >= 2, got {self.h}")
        if self.c < 2 or self.c % 2:
            raise DimensionError(f"c must be an even integer >= 2, got {self.c}")
        if self.c <= 2 * self.h:
            raise DimensionError(f"need c > 2h, got c={self.c}, h={self.h}")

    @property
    def g(self) -> int:
        """Bricks (half bricks counted as one) per full wrap of the cylinder."""
        return (self.h + 1) * self.c // 2


@dataclass(frozen=True, order=True)
class ClockConfig:
    front: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "front", tuple(int(j) for j in self.front))

    @property
    def h(self) -> int:
        return len(self.front)

    def __iter__(self):
        return iter(self.front)

    def __getitem__(self, k):
        return self.front[k]


@dataclass(frozen=True)
class BrickMove:
    """One brick: ``kind`` is ``"full"``, ``"left"`` or ``"right"``.

    For a full brick ``k`` is the left column of the pair; half bricks carry
    ``k = -1`` (left boundary) or ``k = h - 1`` (right boundary) as in the
    operator labels ``G_{j,-1}`` and ``G_{j,h-1}``.
    """

    kind: str
    j: int
    k: int

    @property
    def weight(self) -> float:
        return 1.0 if self.kind == FULL else 1.0 / math.sqrt(2.0)

    @property
    def weight_sq(self) -> Fraction:
        return Fraction(1) if self.kind == FULL else Fraction(1, 2)

    def columns(self, h: int) -> tuple[int, ...]:
        if self.kind == FULL:
            return (self.k, self.k + 1)
        if self.kind == LEFT:
            return (0,)
        return (h - 1,)


def _step(d: int, c: int) -> int | None:
    """Cyclic difference mapped into {-1, 0, 1}; None if it does not fit."""
    d %= c
    if d == 0:
        return 0
    if d == 1:
        return 1
    if d == c - 1:
        return -1
    return None


def is_valid(front, dims: Dims) -> bool:
    if len(front) != dims.h:
        return False
    if any(not 0 <= j < dims.c for j in front):
        return False
    for k in range(dims.h - 1):
        d = _step(front[k + 1] - front[k], dims.c)
        if d is None:
            return False
        parity = (front[k] + k) % 2
        if parity == 0 and d == 1:
            return False
        if parity == 1 and d == -1:
            return False
    return True


def check_config(a: ClockConfig, dims: Dims) -> None:
    if not is_valid(a.front, dims):
        raise ValidityError(f"invalid clock configuration {a.front} for {dims}")


def flat_config(dims: Dims, row: int = 0) -> ClockConfig:
    """The flat wall with every column at ``row`` (row must be even)."""
    a = ClockConfig((row % dims.c,) * dims.h)
    check_config(a, dims)
    return a


def staircase_config(dims: Dims) -> ClockConfig:
    """Monotone staircase whose only growth point is the right half brick.

    Column ``k`` sits at row ``h - k``, so the right boundary column is at
    row 1 and every adjacent pair differs by one row.
    """
    a = ClockConfig(tuple(dims.h - k for k in range(dims.h)))
    check_config(a, dims)
    return a


def enumerate_configs(dims: Dims) -> list[ClockConfig]:
    """All valid configurations in lexicographic order of ``front``."""
    return list(_lattice(dims).configs)


def _forward(front, dims: Dims) -> list[BrickMove]:
    h = dims.h
    moves = []
    for k in range(h - 1):
        j = front[k]
        if front[k + 1] == j and (j + k) % 2 == 0:
            moves.append(BrickMove(FULL, j, k))
    if front[0] % 2 == 1:
        moves.append(BrickMove(LEFT, front[0], -1))
    if front[h - 1] % 2 == 1:
        moves.append(BrickMove(RIGHT, front[h - 1], h - 1))
    return moves


def _shifted(front, move: BrickMove, dims: Dims, step: int) -> tuple[int, ...]:
    out = list(front)
    for k in move.columns(dims.h):
        out[k] = (out[k] + step) % dims.c
    return tuple(out)


def forward_moves(a: ClockConfig, dims: Dims) -> list[BrickMove]:
    """Moves that lay one more brick on ``a``; the nonvanishing terms of G."""
    check_config(a, dims)
    return _forward(a.front, dims)


def backward_moves(a: ClockConfig, dims: Dims) -> list[BrickMove]:
    """Moves whose removal from ``a`` leaves a valid wall; the terms of G^dagger."""
    check_config(a, dims)
    front, h, c = a.front, dims.h, dims.c
    candidates = []
    for k in range(h - 1):
        j = (front[k] - 1) % c
        if front[k + 1] == front[k] and (j + k) % 2 == 0:
            candidates.append(BrickMove(FULL, j, k))
    j0 = (front[0] - 1) % c
    if j0 % 2 == 1:
        candidates.append(BrickMove(LEFT, j0, -1))
    jr = (front[h - 1] - 1) % c
    if jr % 2 == 1:
        candidates.append(BrickMove(RIGHT, jr, h - 1))
    out = []
    for m in candidates:
        below = _shifted(front, m, dims, -1)
        if is_valid(below, dims) and m in _forward(below, dims):
            out.append(m)
    return out


def apply_move(a: ClockConfig, m: BrickMove, dims: Dims) -> ClockConfig:
    if m not in forward_moves(a, dims):
        raise MoveError(f"{m} is not applicable to {a.front}")
    return ClockConfig(_shifted(a.front, m, dims, +1))


def apply_move_reverse(a: ClockConfig, m: BrickMove, dims: Dims) -> ClockConfig:
    if m not in backward_moves(a, dims):
        raise MoveError(f"{m} cannot be removed from {a.front}")
    return ClockConfig(_shifted(a.front, m, dims, -1))


def lift(a: ClockConfig, dims: Dims) -> tuple[int, ...]:
    """Unwrapped heights of ``a`` with column 0 at ``j_0``.

    Adjacent columns differ by at most one row, so the lift is unique up to a
    common shift by ``c``, which changes the brick count by exactly ``g``.
    """
    check_config(a, dims)
    heights = [a.front[0]]
    for k in range(dims.h - 1):
        heights.append(heights[-1] + _step(a.front[k + 1] - a.front[k], dims.c))
    return tuple(heights)


def _rows_below(top: int, parity: int) -> int:
    # signed count of rows j with j % 2 == parity in [0, top) (negative if top < 0)
    return (top - parity + 1) // 2


def signed_bricks(heights, dims: Dims) -> int:
    """Signed number of bricks between the flat wall at row 0 and ``heights``."""
    total = _rows_below(heights[0], 1) + _rows_below(heights[-1], 1)
    for k in range(dims.h - 1):
        total += _rows_below(min(heights[k], heights[k + 1]), k % 2)
    return total


def brick_count(a: ClockConfig, dims: Dims) -> int:
    """Bricks between the flat wall at row 0 and ``a``, modulo ``g``."""
    return signed_bricks(lift(a, dims), dims) % dims.g


def base_winding(a: ClockConfig, dims: Dims) -> int:
    """Wraps completed by the canonical lift of ``a`` (may be -1 for tilted walls)."""
    return signed_bricks(lift(a, dims), dims) // dims.g


def bfs_levels(dims: Dims) -> dict[tuple[int, ...], int]:
    """Forward-move distance from the flat wall to every reachable config.

    Used as an independent check of the closed-form brick count.
    """
    start = (0,) * dims.h
    level = {start: 0}
    queue = deque([start])
    while queue:
        front = queue.popleft()
        for m in _forward(front, dims):
            nxt = _shifted(front, m, dims, +1)
            if nxt not in level:
                level[nxt] = level[front] + 1
                queue.append(nxt)
    return level


def pattern_counts(a: ClockConfig) -> tuple[int, int]:
    """Occurrences of ``10`` and ``01`` in the parity string c_k = (j_k + k) mod 2."""
    bits = [(j + k) % 2 for k, j in enumerate(a.front)]
    n10 = sum(1 for x, y in zip(bits, bits[1:]) if (x, y) == (1, 0))
    n01 = sum(1 for x, y in zip(bits, bits[1:]) if (x, y) == (0, 1))
    return n10, n01


def weight_sums(a: ClockConfig, dims: Dims) -> tuple[Fraction, Fraction]:
    """Exact (forward, backward) sums of squared move weights."""
    fw = sum((m.weight_sq for m in forward_moves(a, dims)), Fraction(0))
    bw = sum((m.weight_sq for m in backward_moves(a, dims)), Fraction(0))
    return fw, bw


def brute_force_configs(dims: Dims) -> list[ClockConfig]:
    """Filter all c**h column assignments; independent of the enumeration path."""
    return [ClockConfig(f) for f in product(range(dims.c), repeat=dims.h) if is_valid(f, dims)]


def closure_violations(dims: Dims) -> list[tuple[tuple[int, ...], BrickMove]]:
    """(config, move) pairs whose forward or backward image leaves the enumerated set."""
    known = set(_lattice(dims).index)
    bad = []
    for front in sorted(known):
        a = ClockConfig(front)
        for m in forward_moves(a, dims):
            if _shifted(front, m, dims, +1) not in known:
                bad.append((front, m))
        for m in backward_moves(a, dims):
            if _shifted(front, m, dims, -1) not in known:
                bad.append((front, m))
    return bad


class Lattice:
    """Cached combinatorics for one ``Dims``: configs, index, grading."""

    def __init__(self, dims: Dims):
        self.dims = dims

    @cached_property
    def configs(self) -> tuple[ClockConfig, ...]:
        return tuple(ClockConfig(f) for f in sorted(self._search()))

    @cached_property
    def index(self) -> dict[tuple[int, ...], int]:
        return {a.front: i for i, a in enumerate(self.configs)}

    @cached_property
    def counts(self) -> list[int]:
        """Brick count of every config, in canonical order."""
        return [brick_count(a, self.dims) for a in self.configs]

    @cached_property
    def base_windings(self) -> list[int]:
        return [base_winding(a, self.dims) for a in self.configs]

    def _search(self) -> set[tuple[int, ...]]:
        # closure of the flat wall under forward and backward moves
        dims = self.dims
        start = (0,) * dims.h
        seen = {start}
        stack = [start]
        while stack:
            a = ClockConfig(stack.pop())
            for m in forward_moves(a, dims):
                nxt = _shifted(a.front, m, dims, +1)
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
            for m in backward_moves(a, dims):
                nxt = _shifted(a.front, m, dims, -1)
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    def export_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["index"] + [f"j_{k}" for k in range(self.dims.h)] + ["brick_count"])
        for i, a in enumerate(self.configs):
            writer.writerow([i, *a.front, self.counts[i]])
        return buf.getvalue()


@lru_cache(maxsize=64)
def _lattice(dims: Dims) -> Lattice:
    return Lattice(dims)


def lattice(dims: Dims) -> Lattice:
    return _lattice(dims)
