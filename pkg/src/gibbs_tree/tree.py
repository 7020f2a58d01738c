"""Vertex addressing on rooted Cayley trees.

A vertex is the tuple of digits on the way down from the root; the root is
``()``.  In half-tree mode every vertex has ``k`` successors with digits
``0..k-1``.  In full-tree mode the root has ``k+1`` successors (digits
``0..k``) and every other vertex has ``k``.  Levels are enumerated in
lexicographic order, which also serves as the planar left-to-right order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

from .errors import ConfigurationError, ResourceError

Vertex = tuple[int, ...]

MAX_VERTICES = 10_000_000
MODES = ("half", "full")


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ConfigurationError(f"unknown tree mode {mode!r}; expected 'half' or 'full'")


def branching(x: Vertex, k: int, mode: str = "half") -> int:
    return k + 1 if (mode == "full" and len(x) == 0) else k


def successors(x: Vertex, k: int, mode: str = "half") -> list[Vertex]:
    _check_mode(mode)
    return [x + (d,) for d in range(branching(x, k, mode))]


def level_size(k: int, n: int, mode: str = "half") -> int:
    if n == 0:
        return 1
    return (k + 1) * k ** (n - 1) if mode == "full" else k**n


def volume_size(k: int, n: int, mode: str = "half") -> int:
    return sum(level_size(k, m, mode) for m in range(n + 1))


def level(k: int, n: int, mode: str = "half") -> list[Vertex]:
    """All vertices at distance ``n`` from the root, in lexicographic order."""
    _check_mode(mode)
    if n < 0:
        raise ConfigurationError("level index must be >= 0")
    if level_size(k, n, mode) > MAX_VERTICES:
        raise ResourceError(f"level {n} of the order-{k} tree exceeds {MAX_VERTICES} vertices")
    verts: list[Vertex] = [()]
    for _ in range(n):
        verts = [y for x in verts for y in successors(x, k, mode)]
    return verts


def volume(k: int, n: int, mode: str = "half") -> Iterator[Vertex]:
    """Vertices of V_n level by level."""
    if volume_size(k, n, mode) > MAX_VERTICES:
        raise ResourceError(f"V_{n} of the order-{k} tree exceeds {MAX_VERTICES} vertices")
    for m in range(n + 1):
        yield from level(k, m, mode)


def format_vertex(x: Vertex) -> str:
    return "/".join(str(d) for d in x)


def parse_vertex(text: str) -> Vertex:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(d) for d in text.split("/"))
    except ValueError:
        raise ConfigurationError(f"bad vertex address {text!r}") from None


@dataclass(frozen=True)
class Path:
    """Prefix of an infinite path from the root of the half tree."""

    digits: tuple[int, ...]
    k: int

    @property
    def r(self) -> float:
        return float(sum(Fraction(d, self.k ** (i + 1)) for i, d in enumerate(self.digits)))

    def vertex(self, m: int) -> Vertex:
        """The path vertex x_m at depth m."""
        if m > len(self.digits):
            raise ConfigurationError(f"path known only to depth {len(self.digits)}")
        return self.digits[:m]


def path_from_r(r: float, k: int, depth: int) -> Path:
    """Base-k digits of ``r``; terminating expansions win ties and r=1 maps to all k-1."""
    if not 0.0 <= r <= 1.0:
        raise ConfigurationError("r must lie in [0, 1]")
    if k < 2:
        raise ConfigurationError("paths need k >= 2")
    if r == 1.0:
        return Path((k - 1,) * depth, k)
    x = Fraction(r)
    digits = []
    for _ in range(depth):
        x *= k
        d = int(x)
        digits.append(d)
        x -= d
    return Path(tuple(digits), k)


def r_from_path(p: Path) -> float:
    return p.r


class Side(enum.Enum):
    LEFT = "left"
    ON = "on"
    RIGHT = "right"


def compare_to_path(x: Vertex, p: Path) -> Side:
    prefix = p.vertex(len(x))
    if x == prefix:
        return Side.ON
    return Side.LEFT if x < prefix else Side.RIGHT
