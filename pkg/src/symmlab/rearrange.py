"""Rearrangements of sets and functions on ordered spaces.

Functions are plain numpy arrays indexed by vertex.  Most routines accept a
stack of functions (shape ``(..., n)``) and act on the last axis, which is
what the randomized checkers rely on for speed.

The rearrangement ``f^#`` places the j-th largest value of ``f`` at the
vertex of rank j.  On a finite set this is exactly the level-set definition
``f^#(y) = inf{t : y in (f_t)^#}`` with ``(f_t)^#`` the initial segment of
size ``|{f > t}|``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .graphs import GroundSpace, Order, ProductSpace

__all__ = [
    "Reflection",
    "rearrange_set",
    "rearrange_function",
    "steiner_rearrange",
    "polarize",
    "similarly_ordered_companion",
    "natural_reflections",
    "is_rearranged",
]


def _order_of(order_or_space) -> Order:
    if isinstance(order_or_space, Order):
        return order_or_space
    return order_or_space.order


def rearrange_set(A: Iterable[int], order: Order | GroundSpace) -> frozenset[int]:
    order = _order_of(order)
    A = set(A)
    n = len(order)
    if any(not 0 <= v < n for v in A):
        raise ValueError("set contains vertices outside the space")
    return frozenset(order.permutation[: len(A)])


def rearrange_function(f, order: Order | GroundSpace) -> np.ndarray:
    """Decreasing rearrangement of ``f`` along ``order`` (last axis)."""
    order = _order_of(order)
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != len(order):
        raise ValueError(f"function has {f.shape[-1]} values, space has {len(order)}")
    s = -np.sort(-f, axis=-1)
    out = np.empty_like(s)
    out[..., order.perm] = s
    return out


def is_rearranged(f, order: Order | GroundSpace, atol: float = 0.0) -> bool:
    f = np.asarray(f, dtype=float)
    along = f[..., _order_of(order).perm]
    return bool(np.all(np.diff(along, axis=-1) <= atol))


def _fibers(u, space) -> np.ndarray:
    nm, nn = space.fiber_shape
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != nm * nn:
        raise ValueError(f"function has {u.shape[-1]} values, space has {nm * nn}")
    return u.reshape(u.shape[:-1] + (nm, nn))


def steiner_rearrange(u, space: ProductSpace | GroundSpace) -> np.ndarray:
    """Rearrange each fiber ``u(., y)`` along the order of the M factor."""
    F = _fibers(u, space)
    s = -np.sort(-F, axis=-2)
    out = np.empty_like(s)
    out[..., space.order.perm, :] = s
    return out.reshape(np.shape(u))


@dataclass(frozen=True)
class Reflection:
    """Two-point structure: an involution on vertices plus the front side.

    ``pairing[v]`` is the partner of ``v`` (``pairing[v] == v`` for a fixed
    point); ``front`` holds the members that precede their partner.
    """

    pairing: tuple[int, ...]
    front: frozenset[int]

    def __post_init__(self):
        p = tuple(int(v) for v in self.pairing)
        n = len(p)
        if any(not 0 <= w < n for w in p) or any(p[p[v]] != v for v in range(n)):
            raise ValueError("pairing is not an involution")
        for v in range(n):
            if p[v] != v and (v in self.front) == (p[v] in self.front):
                raise ValueError(f"pair ({v}, {p[v]}) needs exactly one front member")
        object.__setattr__(self, "pairing", p)

    @classmethod
    def from_pairing(cls, pairing: Sequence[int], order: Order | GroundSpace) -> "Reflection":
        """Front member of each pair is the one of lower rank."""
        rank = _order_of(order).rank
        front = frozenset(v for v, w in enumerate(pairing) if w != v and rank[v] < rank[w])
        return cls(tuple(pairing), front)

    def compatible_with(self, order: Order | GroundSpace) -> bool:
        rank = _order_of(order).rank
        return all(rank[v] < rank[self.pairing[v]] for v in self.front)

    @property
    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        a = np.array(sorted(self.front), dtype=int)
        return a, np.asarray(self.pairing, dtype=int)[a]


def polarize(f, r: Reflection) -> np.ndarray:
    """Two-point rearrangement: larger value of each pair moves to the front."""
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != len(r.pairing):
        raise ValueError("function and reflection live on different spaces")
    a, b = r.pairs
    out = f.copy()
    fa, fb = f[..., a], f[..., b]
    out[..., a] = np.maximum(fa, fb)
    out[..., b] = np.minimum(fa, fb)
    return out


def natural_reflections(space: GroundSpace) -> list[Reflection]:
    """Reflections of the line segment and the cycle that respect the order.

    Line ``line:n`` (vertex index ``i`` has label ``i - n``): all point and
    half-point reflections ``x -> c - x`` with ``c`` in ``[-2n, 2n]``.
    Partners falling outside the segment are treated as fixed points; the
    vertex inside is then always the front member, so nothing leaks out.
    Cycle ``cycle:m``: the ``m`` reflections ``x -> c - x (mod m)``.
    """
    kind, _, arg = space.name.partition(":")
    n = space.vertex_count
    out = []
    if kind == "line":
        half = int(arg)
        for c in range(-2 * half, 2 * half + 1):
            pairing = []
            for i in range(n):
                j = (c - (i - half)) + half
                pairing.append(j if 0 <= j < n else i)
            out.append(Reflection.from_pairing(pairing, space))
    elif kind == "cycle":
        for c in range(n):
            out.append(Reflection.from_pairing([(c - x) % n for x in range(n)], space))
    else:
        raise ValueError(f"no natural reflection family for {space.name!r}")
    return out


def similarly_ordered_companion(theta, u, order: Order | GroundSpace | ProductSpace) -> np.ndarray:
    """Function with the values of ``theta`` arranged in the same order as ``u``.

    The j-th largest value of ``theta`` goes to the vertex carrying the j-th
    largest value of ``u``; ties in ``u`` go to the vertex of lower rank.  On
    a product space the construction is done fiber by fiber.
    """
    theta = np.asarray(theta, dtype=float)
    u = np.asarray(u, dtype=float)
    if theta.shape != u.shape:
        raise ValueError("theta and u live on different spaces")
    if isinstance(order, ProductSpace):
        nm, nn = order.fiber_shape
        T, U = theta.reshape(nm, nn), u.reshape(nm, nn)
        out = np.column_stack([
            similarly_ordered_companion(T[:, y], U[:, y], order.order) for y in range(nn)
        ])
        return out.reshape(-1)
    order = _order_of(order)
    if u.size != len(order):
        raise ValueError("theta and u live on different spaces")
    # lexsort: last key is primary -> sort by -u, then by rank
    by_u = np.lexsort((order.rank, -u))
    out = np.empty_like(theta)
    out[by_u] = -np.sort(-theta)
    return out
