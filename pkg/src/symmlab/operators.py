"""Laplacian, Dirichlet heat kernels, energy, star function and J transform.

Sign conventions: ``L = D_ambient - A`` is the combinatorial Laplacian with
ambient degrees and ``Delta = -L``.  Dirichlet conditions on a domain are
realized by restricting ``L`` to the domain's rows and columns, so a
function is read as zero everywhere off the domain (including the virtual
vertices beyond a truncated line or tree).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Union

import numpy as np

from .graphs import GroundSpace, ProductSpace
from .rearrange import steiner_rearrange

Space = Union[GroundSpace, ProductSpace]

__all__ = [
    "Kernel",
    "laplacian_matrix",
    "laplacian",
    "heat_kernel",
    "product_kernel",
    "dirichlet_energy",
    "energy_matrix",
    "star_function",
    "j_transform",
    "dirichlet_eigenvalue",
]


def _domain_key(space: Space, domain) -> tuple[int, ...]:
    if domain is None:
        return tuple(range(space.vertex_count))
    dom = tuple(sorted({int(v) for v in domain}))
    if dom and not (0 <= dom[0] and dom[-1] < space.vertex_count):
        raise ValueError("domain contains vertices outside the space")
    return dom


def laplacian_matrix(space: Space) -> np.ndarray:
    """Dense ``L = D_ambient - A`` on the whole vertex set."""
    return np.diag(np.asarray(space.ambient_degree, dtype=float)) - space.graph.adjacency()


def energy_matrix(space: Space) -> np.ndarray:
    """Quadratic form of the Dirichlet energy: ``E(f) = f @ Q @ f``."""
    return laplacian_matrix(space)


def laplacian(f, space: Space, domain: Iterable[int] | None = None) -> np.ndarray:
    """``(Delta f)(x) = sum_{y~x} (f(y) - f(x))`` for x in the domain.

    Values of ``f`` off the domain are read as 0; the output is 0 off the
    domain as well.
    """
    dom = np.asarray(_domain_key(space, domain), dtype=int)
    f = np.asarray(f, dtype=float)
    g = np.zeros_like(f)
    g[..., dom] = f[..., dom]
    out = -g @ laplacian_matrix(space)
    mask = np.zeros(space.vertex_count, dtype=bool)
    mask[dom] = True
    out[..., ~mask] = 0.0
    return out


@lru_cache(maxsize=256)
def _restricted_eigh(space: Space, dom: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    L = laplacian_matrix(space)
    idx = np.asarray(dom, dtype=int)
    w, V = np.linalg.eigh(L[np.ix_(idx, idx)])
    w.setflags(write=False)
    V.setflags(write=False)
    return w, V


@dataclass(frozen=True, eq=False)
class Kernel:
    """Symmetric vertex-pair matrix; zero rows/columns off the domain."""

    space: Space
    t: float
    entries: np.ndarray
    boundary_domain: frozenset[int] | None = None

    def apply(self, f) -> np.ndarray:
        return np.asarray(f, dtype=float) @ self.entries

    def form(self, f, g) -> np.ndarray:
        """Bilinear form ``sum f(x) K(x,y) g(y)`` (batched over leading axes)."""
        f = np.asarray(f, dtype=float)
        g = np.asarray(g, dtype=float)
        return np.einsum("...i,ij,...j->...", f, self.entries, g)


def heat_kernel(space: Space, domain: Iterable[int] | None = None, t: float = 1.0) -> Kernel:
    """``exp(-t L_D)`` by symmetric eigendecomposition, embedded in n x n."""
    if t < 0:
        raise ValueError("heat kernel time must be nonnegative")
    dom = _domain_key(space, domain)
    if not dom:
        raise ValueError("heat kernel domain must be nonempty")
    n = space.vertex_count
    K = np.zeros((n, n))
    idx = np.asarray(dom, dtype=int)
    if t == 0:
        K[idx, idx] = 1.0
    else:
        w, V = _restricted_eigh(space, dom)
        sub = (V * np.exp(-t * w)) @ V.T
        sub = 0.5 * (sub + sub.T)
        K[np.ix_(idx, idx)] = sub
    return Kernel(space, float(t), K, None if domain is None else frozenset(dom))


def product_kernel(kA: Kernel, kB: Kernel) -> Kernel:
    """Tensor product ``K^A(x1,y1) K^B(x2,y2)`` on the product vertex indexing."""
    if kA.t != kB.t:
        raise ValueError(f"kernel times differ: {kA.t} vs {kB.t}")
    space = None
    if isinstance(kA.space, GroundSpace):
        nb = kB.space.graph if hasattr(kB.space, "graph") else kB.space
        space = ProductSpace(kA.space, nb)
    dom = None
    if kA.boundary_domain is not None or kB.boundary_domain is not None:
        da = kA.boundary_domain or range(kA.entries.shape[0])
        db = kB.boundary_domain or range(kB.entries.shape[0])
        nb_ = kB.entries.shape[0]
        dom = frozenset(x * nb_ + y for x in da for y in db)
    return Kernel(space, kA.t, np.kron(kA.entries, kB.entries), dom)


def dirichlet_energy(f, space: Space) -> np.ndarray | float:
    """Sum over edges of squared differences, boundary edges included.

    Edges leaving a truncated space (ambient degree above graph degree) lead
    to vertices where ``f`` vanishes and contribute ``f(x)**2`` each, so that
    ``E(f) = -sum f * Delta f``.
    """
    f = np.asarray(f, dtype=float)
    e = np.asarray(space.graph.edges, dtype=int).reshape(-1, 2)
    d = f[..., e[:, 0]] - f[..., e[:, 1]]
    deficit = np.asarray(space.ambient_degree) - space.graph.degrees
    val = np.sum(d * d, axis=-1) + np.sum(deficit * f * f, axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def j_transform(v, space: Space) -> np.ndarray:
    """Ball sums ``Jv(v_j, y) = sum_{i <= j} v(v_i, y)`` along the M order."""
    nm, nn = space.fiber_shape
    v = np.asarray(v, dtype=float)
    F = v.reshape(v.shape[:-1] + (nm, nn))
    perm = space.order.perm
    out = np.empty_like(F)
    out[..., perm, :] = np.cumsum(F[..., perm, :], axis=-2)
    return out.reshape(v.shape)


def star_function(u, space: Space) -> np.ndarray:
    """Baernstein star function ``u^I = J(u^#)``: running sums of sorted fibers."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("star function needs a nonnegative function")
    return j_transform(steiner_rearrange(u, space), space)


def dirichlet_eigenvalue(space: Space, A: Iterable[int]) -> float:
    """Smallest eigenvalue of ``L`` restricted to ``A`` (ambient degrees)."""
    dom = _domain_key(space, A)
    if not dom:
        raise ValueError("Dirichlet eigenvalue of an empty set")
    return float(_restricted_eigh(space, dom)[0][0])
