"""Brute-force and randomized checks of the rearrangement inequalities.

Every checker returns a :class:`Report` whose ``worst_margin`` is the
minimum of RHS - LHS over all tested instances, so a negative margin below
``-tolerance`` is a violation and comes with a witness.

For bilinear kernel forms ``sum f K g`` with ``K >= 0`` the layer-cake
formula reduces the inequality for all nonnegative ``f, g`` to indicator
pairs, which is what the exhaustive mode enumerates.  The Dirichlet energy
is quadratic and has no such reduction, so energy checks always use real
valued candidates.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .graphs import GroundSpace, Order, build_space
from .operators import (
    dirichlet_eigenvalue,
    dirichlet_energy,
    energy_matrix,
    heat_kernel,
    laplacian,
)
from .rearrange import (
    Reflection,
    polarize,
    rearrange_function,
    similarly_ordered_companion,
    steiner_rearrange,
)
from .solver import ProblemSpec, residual, symmetrize_problem

__all__ = [
    "Report",
    "SearchConfig",
    "check_hardy_littlewood",
    "check_convolution_rearrangement",
    "check_dirichlet_rearrangement",
    "find_violation",
    "sweep_orders_for_violation",
    "find_valid_order",
    "check_faber_krahn",
    "connected_subtrees",
    "check_polarization_convergence",
    "check_proposition",
    "plateau_thetas",
]

MODES = ("exhaustive-indicators", "random-functions", "gradient-ascent")
MAX_EXHAUSTIVE_VERTICES = 12
_CHUNK = 20_000


@dataclass(frozen=True)
class SearchConfig:
    mode: str = "random-functions"
    samples: int = 1000
    restarts: int = 10
    seed: int = 0
    tolerance: float = 1e-9

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.samples < 1 or self.restarts < 1:
            raise ValueError("samples and restarts must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")

    def rng(self, *salt: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, *salt])


@dataclass
class Report:
    check_name: str
    instances_tested: int
    worst_margin: float
    passed: bool
    witness: object = None
    elapsed: float = 0.0
    tolerance: float = 1e-9
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.worst_margin = float(self.worst_margin)
        self.passed = bool(self.passed)

    def to_dict(self, timing: bool = False) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("elapsed")
        return d

    def to_json(self, timing: bool = False) -> str:
        return json.dumps(_jsonable(self.to_dict(timing)), sort_keys=True)

    def merge(self, other: "Report") -> "Report":
        """Combine two reports of the same check: min margin, summed counts."""
        worst = self if self.worst_margin <= other.worst_margin else other
        return Report(
            check_name=self.check_name,
            instances_tested=self.instances_tested + other.instances_tested,
            worst_margin=min(self.worst_margin, other.worst_margin),
            passed=self.passed and other.passed,
            witness=worst.witness,
            elapsed=self.elapsed + other.elapsed,
            tolerance=max(self.tolerance, other.tolerance),
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, frozenset):
        return sorted(obj)
    return obj


def serialize_function(f) -> list[list]:
    """Witness encoding: ``[[vertex, value], ...]`` over the support."""
    f = np.asarray(f, dtype=float)
    return [[int(v), float(f[v])] for v in np.flatnonzero(f)]


def _finish(name, count, margin, tol, witness, t0, **details) -> Report:
    passed = margin >= -tol
    return Report(name, int(count), margin, passed, None if passed else witness,
                  time.perf_counter() - t0, tol, details)


def random_nonnegative(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    """Random nonnegative functions with a random support density per row."""
    density = rng.uniform(0.2, 1.0, size=(count, 1))
    return rng.random((count, n)) * (rng.random((count, n)) < density)


def _indicator_matrix(n: int) -> np.ndarray:
    return ((np.arange(1 << n)[:, None] >> np.arange(n)[None, :]) & 1).astype(float)


def _indicator_exhaustive(K: np.ndarray, order: Order):
    """Min over all indicator pairs of ``1_A# K 1_B# - 1_A K 1_B``."""
    n = K.shape[0]
    X = _indicator_matrix(n)
    sizes = X.sum(axis=1).astype(int)
    S = X @ K @ X.T
    P = K[np.ix_(order.perm, order.perm)]
    R = np.zeros((n + 1, n + 1))
    R[1:, 1:] = P.cumsum(axis=0).cumsum(axis=1)
    margin = R[sizes][:, sizes] - S
    i, j = np.unravel_index(np.argmin(margin), margin.shape)
    return float(margin[i, j]), (X[i], X[j]), X.shape[0] ** 2


def _max_by_sizes(K: np.ndarray) -> np.ndarray:
    """``M[s1, s2]`` = max of ``1_A K 1_B`` over sets of sizes s1 and s2."""
    n = K.shape[0]
    X = _indicator_matrix(n)
    sizes = X.sum(axis=1).astype(int)
    S = X @ K @ X.T
    M = np.full((n + 1, n + 1), -np.inf)
    for s in range(n + 1):
        rows = S[sizes == s]
        for r in range(n + 1):
            M[s, r] = rows[:, sizes == r].max()
    return M


# --------------------------------------------------------------------------
# Hardy-Littlewood and convolution rearrangement
# --------------------------------------------------------------------------

def _random_bilinear(K: np.ndarray | None, order: Order, rng, samples: int):
    n = len(order)
    worst, wit = np.inf, None
    done = 0
    while done < samples:
        m = min(_CHUNK, samples - done)
        F = random_nonnegative(rng, m, n)
        G = random_nonnegative(rng, m, n)
        Fs, Gs = rearrange_function(F, order), rearrange_function(G, order)
        if K is None:
            lhs, rhs = np.sum(F * G, axis=1), np.sum(Fs * Gs, axis=1)
        else:
            lhs = np.einsum("ki,ij,kj->k", F, K, G)
            rhs = np.einsum("ki,ij,kj->k", Fs, K, Gs)
        margin = rhs - lhs
        k = int(np.argmin(margin))
        if margin[k] < worst:
            worst, wit = float(margin[k]), (F[k], G[k])
        done += m
    return worst, wit


def _pair_witness(pair):
    if pair is None:
        return None
    return {"f": serialize_function(pair[0]), "g": serialize_function(pair[1])}


def check_hardy_littlewood(space: GroundSpace, cfg: SearchConfig = SearchConfig()) -> Report:
    """``sum f g <= sum f^# g^#`` on random nonnegative pairs (and indicators)."""
    t0 = time.perf_counter()
    rng = cfg.rng(1)
    worst, wit = _random_bilinear(None, space.order, rng, cfg.samples)
    count = cfg.samples
    if cfg.mode == "exhaustive-indicators" and space.vertex_count <= MAX_EXHAUSTIVE_VERTICES:
        m, pair, c = _indicator_exhaustive(np.eye(space.vertex_count), space.order)
        count += c
        if m < worst:
            worst, wit = m, pair
    return _finish("hardy-littlewood", count, worst, cfg.tolerance, _pair_witness(wit), t0,
                   space=space.name)


def check_convolution_rearrangement(space: GroundSpace, t_grid: Sequence[float],
                                    cfg: SearchConfig = SearchConfig(),
                                    order: Order | None = None) -> Report:
    """``sum f K_t g <= sum f^# K_t g^#`` for the heat kernel of the space."""
    t0 = time.perf_counter()
    if not len(t_grid):
        raise ValueError("t_grid must be nonempty")
    if any(t < 0 for t in t_grid):
        raise ValueError("heat kernel time must be nonnegative")
    order = order or space.order
    exhaustive = cfg.mode == "exhaustive-indicators" and space.vertex_count <= MAX_EXHAUSTIVE_VERTICES
    worst, wit, count, per_t = np.inf, None, 0, {}
    for i, t in enumerate(t_grid):
        K = heat_kernel(space, None, t).entries
        if exhaustive:
            m, pair, c = _indicator_exhaustive(K, order)
        else:
            m, pair = _random_bilinear(K, order, cfg.rng(2, i), cfg.samples)
            c = cfg.samples
        per_t[repr(float(t))] = m
        count += c
        if m < worst:
            worst, wit = m, (pair, t)
    witness = None if wit is None else dict(_pair_witness(wit[0]), t=float(wit[1]))
    return _finish("convolution-rearrangement", count, worst, cfg.tolerance, witness, t0,
                   space=space.name, order=list(order.permutation),
                   mode="exhaustive-indicators" if exhaustive else "random-functions",
                   margin_by_t=per_t)


# --------------------------------------------------------------------------
# Dirichlet energy
# --------------------------------------------------------------------------

def _energy_gap(F, space, order, Q=None):
    """E(F^#) - E(F) for a batch of rows."""
    return dirichlet_energy(rearrange_function(F, order), space) - dirichlet_energy(F, space)


def _ascent(space: GroundSpace, order: Order, F0: np.ndarray, iters: int = 300) -> np.ndarray:
    """Projected gradient ascent of E(f^#) - E(f) on the nonnegative unit sphere.

    Returns the best iterate seen for every starting row.
    """
    Q = energy_matrix(space)
    step = 0.25 / np.linalg.norm(Q, 2)
    perm = order.perm
    F = F0 / np.maximum(np.linalg.norm(F0, axis=1, keepdims=True), 1e-300)
    best = F.copy()
    best_val = _energy_gap(F, space, order)
    rows = np.arange(F.shape[0])[:, None]
    for _ in range(iters):
        idx = np.argsort(-F, axis=1, kind="stable")
        Fs = np.empty_like(F)
        Fs[:, perm] = F[rows, idx]
        QFs = Fs @ Q
        back = np.empty_like(F)
        back[rows, idx] = QFs[:, perm]
        grad = 2.0 * (back - F @ Q)
        F = np.maximum(F + step * grad, 0.0)
        F /= np.maximum(np.linalg.norm(F, axis=1, keepdims=True), 1e-300)
        val = _energy_gap(F, space, order)
        better = val > best_val
        best[better] = F[better]
        best_val = np.where(better, val, best_val)
    return best


def check_dirichlet_rearrangement(space: GroundSpace, cfg: SearchConfig = SearchConfig(),
                                  order: Order | None = None) -> Report:
    """``E(f) >= E(f^#)`` on random functions plus ascent-refined candidates."""
    t0 = time.perf_counter()
    order = order or space.order
    rng = cfg.rng(3)
    n = space.vertex_count
    worst, wit, done = np.inf, None, 0
    while done < cfg.samples:
        m = min(_CHUNK, cfg.samples - done)
        F = random_nonnegative(rng, m, n)
        margin = -_energy_gap(F, space, order)
        k = int(np.argmin(margin))
        if margin[k] < worst:
            worst, wit = float(margin[k]), F[k]
        done += m
    F = _ascent(space, order, random_nonnegative(rng, cfg.restarts, n))
    margin = -_energy_gap(F, space, order)
    k = int(np.argmin(margin))
    if margin[k] < worst:
        worst, wit = float(margin[k]), F[k]
    return _finish("dirichlet-rearrangement", cfg.samples + cfg.restarts, worst, cfg.tolerance,
                   None if wit is None else serialize_function(wit), t0,
                   space=space.name, order=list(order.permutation))


def _set_energies(space: GroundSpace) -> tuple[np.ndarray, np.ndarray]:
    X = _indicator_matrix(space.vertex_count)
    return X, dirichlet_energy(X, space)


def find_violation(space: GroundSpace, order: Order | None = None,
                   cfg: SearchConfig = SearchConfig()) -> np.ndarray | None:
    """Search for ``f >= 0`` with ``E(f^#) > E(f) + tolerance``.

    Tries indicator functions (small spaces), then random functions, then
    random restarts refined by gradient ascent.  ``None`` is not a proof that
    the inequality holds.
    """
    order = order or space.order
    n = space.vertex_count
    tol = cfg.tolerance
    rng = cfg.rng(4)
    candidates = []
    if n <= 16:
        X, _ = _set_energies(space)
        candidates.append(X)
    candidates.append(random_nonnegative(rng, cfg.samples, n))
    for F in candidates:
        gap = _energy_gap(F, space, order)
        k = int(np.argmax(gap))
        if gap[k] > tol:
            return _audited(F[k], space, order, tol)
    F = _ascent(space, order, random_nonnegative(rng, cfg.restarts, n))
    gap = _energy_gap(F, space, order)
    k = int(np.argmax(gap))
    if gap[k] > tol:
        return _audited(F[k], space, order, tol)
    return None


def _audited(f: np.ndarray, space, order, tol) -> np.ndarray:
    fs = rearrange_function(f, order)
    e_f = float(np.sum((f[:, None] - f[None, :]) ** 2 * space.graph.adjacency()) / 2
                + np.sum((np.asarray(space.ambient_degree) - space.graph.degrees) * f * f))
    e_fs = float(np.sum((fs[:, None] - fs[None, :]) ** 2 * space.graph.adjacency()) / 2
                 + np.sum((np.asarray(space.ambient_degree) - space.graph.degrees) * fs * fs))
    if not e_fs > e_f + tol:
        raise AssertionError("violation witness failed re-evaluation")
    return f


def sweep_orders_for_violation(space: GroundSpace, orders: Iterable[Order] | str,
                               cfg: SearchConfig = SearchConfig(), threshold: float | None = None) -> Report:
    """Run the violation search for many orders of one space.

    ``orders="exhaustive"`` enumerates all ``n!`` orders.  Per order the search
    is capped: all indicators, ``cfg.samples`` shared random functions, then
    ``cfg.restarts`` ascent restarts.  ``worst_margin`` is the smallest
    violation size found over the orders (positive when every order has a
    violation above ``threshold``); each order with no violation is listed.
    """
    t0 = time.perf_counter()
    threshold = cfg.tolerance if threshold is None else threshold
    n = space.vertex_count
    if orders == "exhaustive":
        if n > 10:
            raise ValueError("exhaustive order sweep needs at most 10 vertices")
        orders = (Order(p) for p in itertools.permutations(range(n)))
    rng = cfg.rng(5)
    pools = []
    if n <= 16:
        pools.append(_indicator_matrix(n))
    pools.append(random_nonnegative(rng, cfg.samples, n))
    pool_data = []
    edges = np.asarray(space.graph.edges)
    deficit = np.asarray(space.ambient_degree) - space.graph.degrees
    for F in pools:
        S = -np.sort(-F, axis=1)
        pool_data.append((F, S, dirichlet_energy(F, space)))
    worst = np.inf
    failures = []
    count = 0
    witness_sizes = []
    for order in orders:
        count += 1
        rank = order.rank
        ra, rb = rank[edges[:, 0]], rank[edges[:, 1]]
        d_rank = deficit[order.perm]
        best = -np.inf
        for F, S, EF in pool_data:
            d = S[:, ra] - S[:, rb]
            gap = np.sum(d * d, axis=1) + S * S @ d_rank - EF
            k = int(np.argmax(gap))
            best = max(best, float(gap[k]))
            if best > threshold:
                break
        if best <= threshold:
            f = find_violation(space, order, SearchConfig(cfg.mode, 1, cfg.restarts,
                                                          cfg.seed + count, threshold))
            if f is not None:
                best = float(_energy_gap(f[None, :], space, order)[0])
        witness_sizes.append(best)
        if best <= threshold:
            failures.append(list(order.permutation))
        worst = min(worst, best)
    margin = worst - threshold
    return Report("violation-sweep", count, margin, not failures,
                  None if not failures else {"orders_without_violation": failures[:20]},
                  time.perf_counter() - t0, threshold,
                  {"space": space.name, "orders_without_violation": len(failures),
                   "smallest_violation": worst})


# --------------------------------------------------------------------------
# order search
# --------------------------------------------------------------------------

def find_valid_order(space: GroundSpace, t_grid: Sequence[float],
                     cfg: SearchConfig = SearchConfig(mode="exhaustive-indicators"),
                     find_all: bool = False):
    """Order for which the kernel inequality holds on every indicator pair.

    Depth-first search over orders: a prefix of length d fixes the balls of
    size <= d, so all constraints among those sizes are checked as soon as
    the prefix is placed.  Exhaustive mode needs at most 10 vertices; random
    mode (at most 12) tries ``cfg.samples`` random orders instead.  Returns
    the first valid order (lexicographically by vertex index), or a list of
    all valid orders when ``find_all`` is set.
    """
    n = space.vertex_count
    if cfg.mode == "exhaustive-indicators" and n > 10:
        raise ValueError("exhaustive order search needs at most 10 vertices; use random mode")
    if n > MAX_EXHAUSTIVE_VERTICES:
        raise ValueError(f"order search needs at most {MAX_EXHAUSTIVE_VERTICES} vertices")
    tol = cfg.tolerance
    Ks = np.stack([heat_kernel(space, None, t).entries for t in t_grid])
    Ms = np.stack([_max_by_sizes(K) for K in Ks])

    def ok_prefix(prefix, R):
        d = len(prefix)
        v = prefix[-1]
        row = np.concatenate([np.zeros((len(Ks), 1)), np.cumsum(Ks[:, v, prefix], axis=1)], axis=1)
        R[:, d, :d] = R[:, d - 1, :d] + row[:, :d]
        R[:, d, d] = R[:, d, d - 1] + row[:, d]
        R[:, :d, d] = R[:, d, :d]
        return bool(np.all(R[:, d, : d + 1] >= Ms[:, d, : d + 1] - tol))

    if cfg.mode != "exhaustive-indicators":
        rng = cfg.rng(6)
        found = []
        for _ in range(cfg.samples):
            perm = [int(v) for v in rng.permutation(n)]
            R = np.zeros((len(Ks), n + 1, n + 1))
            if all(ok_prefix(perm[: d + 1], R) for d in range(n)):
                if not find_all:
                    return Order(tuple(perm))
                found.append(Order(tuple(perm)))
        return found if find_all else None

    found = []

    def dfs(prefix, R):
        if len(prefix) == n:
            found.append(Order(tuple(prefix)))
            return not find_all
        used = set(prefix)
        for v in range(n):
            if v in used:
                continue
            R2 = R.copy()
            if ok_prefix(prefix + [v], R2) and dfs(prefix + [v], R2):
                return True
        return False

    dfs([], np.zeros((len(Ks), n + 1, n + 1)))
    if find_all:
        return found
    return found[0] if found else None


# --------------------------------------------------------------------------
# Faber-Krahn on regular trees
# --------------------------------------------------------------------------

def connected_subtrees(space: GroundSpace, size: int) -> list[frozenset[int]]:
    """All connected vertex sets of the given size that contain the root (vertex 0)."""
    adj = [[] for _ in range(space.vertex_count)]
    for a, b in space.graph.edges:
        adj[a].append(b)
        adj[b].append(a)
    level = {frozenset([0])}
    for _ in range(size - 1):
        nxt = set()
        for S in level:
            for v in S:
                for w in adj[v]:
                    if w not in S:
                        nxt.add(S | {w})
        level = nxt
    return sorted(level, key=lambda S: sorted(S))


def check_faber_krahn(degree: int, max_size: int, tolerance: float = 1e-9) -> Report:
    """Spiral balls minimize the Dirichlet eigenvalue among connected subsets of T_m.

    Subsets are taken up to translation (they contain the root) inside a
    truncation deep enough that no subset reaches the cut; eigenvalues use the
    ambient degree, i.e. they are the exact values on the infinite tree.
    Restricting to connected sets loses nothing: the eigenvalue of a set is
    the minimum over its components.
    """
    t0 = time.perf_counter()
    if degree < 3:
        raise ValueError("tree degree must be >= 3")
    if max_size < 1 or max_size > 8 or degree > 6:
        raise ValueError("max_size must be in [1, 8] (and degree <= 6) for enumeration")
    space = build_space({"type": "tree", "degree": degree, "depth": max_size})
    worst, wit, count = np.inf, None, 0
    per_size = {}
    for s in range(1, max_size + 1):
        ball_val = dirichlet_eigenvalue(space, range(s))
        subs = connected_subtrees(space, s)
        vals = np.array([dirichlet_eigenvalue(space, S) for S in subs])
        k = int(np.argmin(vals))
        margin = vals - ball_val
        count += len(subs)
        j = int(np.argmin(margin))
        per_size[s] = {"subsets": len(subs), "ball": ball_val, "min_other": float(vals[k]),
                       "distinct_values": sorted({round(float(v), 12) for v in vals})[:8]}
        if margin[j] < worst:
            worst, wit = float(margin[j]), sorted(subs[j])
    return _finish("faber-krahn", count, worst, tolerance,
                   None if wit is None else [[int(v), 1.0] for v in wit], t0,
                   degree=degree, max_size=max_size, by_size=per_size)


# --------------------------------------------------------------------------
# polarization
# --------------------------------------------------------------------------

def check_polarization_convergence(space: GroundSpace, reflections: Sequence[Reflection],
                                   cfg: SearchConfig = SearchConfig(),
                                   functions: np.ndarray | None = None) -> Report:
    """Iterate polarizations until a full sweep changes nothing.

    ``worst_margin`` is the smallest energy decrease ``E(before) - E(after)``
    over all single steps; convergence to ``f^#`` is reported in ``details``
    (a family that cannot generate every transposition may stall).
    """
    t0 = time.perf_counter()
    for r in reflections:
        if len(r.pairing) != space.vertex_count or not r.compatible_with(space):
            raise ValueError("reflection is not compatible with the order")
    F = random_nonnegative(cfg.rng(7), cfg.samples, space.vertex_count) if functions is None \
        else np.atleast_2d(np.asarray(functions, dtype=float))
    target = rearrange_function(F, space)
    E = dirichlet_energy(F, space)
    worst = np.inf
    wit = None
    sweeps = 0
    max_sweeps = 4 * space.vertex_count + 4
    changed_any = True
    while changed_any and sweeps < max_sweeps:
        changed_any = False
        for r in reflections:
            G = polarize(F, r)
            E2 = dirichlet_energy(G, space)
            dec = E - E2
            k = int(np.argmin(dec))
            if dec[k] < worst:
                worst, wit = float(dec[k]), F[k]
            if np.any(G != F):
                changed_any = True
            F, E = G, E2
        sweeps += 1
    err = np.max(np.abs(F - target), axis=1)
    converged = err < 1e-12
    if not np.isfinite(worst):
        worst = 0.0
    return _finish("polarization", F.shape[0], worst, cfg.tolerance,
                   None if wit is None else serialize_function(wit), t0,
                   space=space.name, reflections=len(reflections), sweeps=sweeps,
                   converged_fraction=float(np.mean(converged)),
                   max_sup_error=float(err.max()), fixed_point=not changed_any)


# --------------------------------------------------------------------------
# the distributional inequality for u^#
# --------------------------------------------------------------------------

def plateau_thetas(p: ProblemSpec, count: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Fiberwise plateau test functions: 1 on ball(j_y) x {y} inside omega^#."""
    q = symmetrize_problem(p)
    nm, nn = p.product.fiber_shape
    sizes = q.mask.reshape(nm, nn).sum(axis=0)
    perm = p.product.order.perm
    out = []
    for _ in range(count):
        th = np.zeros((nm, nn))
        for y in range(nn):
            if sizes[y] and rng.random() < 0.8:
                j = int(rng.integers(1, sizes[y] + 1))
                th[perm[:j], y] = 1.0
        out.append(th.reshape(-1))
    return out


def check_proposition(u, problem: ProblemSpec, thetas: Sequence[np.ndarray],
                      tolerance: float = 1e-9, t_small: float = 1e-2) -> Report:
    """``sum theta (-Delta u^#) <= sum theta (phi(u^#) + psi^# u^# + lam^#)``.

    Also checks the kernel step ``sum theta K_t u^# >= sum theta~ K_t u`` with
    ``theta~`` the companion of ``theta`` similarly ordered to ``u``.
    """
    t0 = time.perf_counter()
    sp = problem.product
    u = np.asarray(u, dtype=float)
    if residual(u, problem) > 1e-8:
        raise ValueError("u does not solve the problem's equation")
    q = symmetrize_problem(problem)
    us = steiner_rearrange(u, sp)
    lap = laplacian(us, sp, q.omega)
    rhs_density = problem.phi(us) + q.psi * us + q.lam
    K = heat_kernel(sp, None, t_small).entries
    worst, wit = np.inf, None
    prop_margins, chain_margins = [], []
    for th in thetas:
        th = np.asarray(th, dtype=float)
        if np.any(th < 0) or np.any(th[q.off_mask] != 0):
            raise ValueError("theta must be nonnegative and vanish off omega^#")
        if np.max(np.abs(steiner_rearrange(th, sp) - th)) > 0:
            raise ValueError("theta is not symmetric decreasing")
        lhs = float(np.sum(th * -lap))
        rhs = float(np.sum(th * rhs_density))
        companion = similarly_ordered_companion(th, u, sp)
        chain = float(th @ K @ us - companion @ K @ u)
        prop_margins.append(rhs - lhs)
        chain_margins.append(chain)
        m = min(rhs - lhs, chain)
        if m < worst:
            worst, wit = m, th
    if not thetas:
        worst = 0.0
    return _finish("proposition", len(thetas), worst, tolerance,
                   None if wit is None else serialize_function(wit), t0,
                   proposition_margin=min(prop_margins, default=0.0),
                   kernel_chain_margin=min(chain_margins, default=0.0))
