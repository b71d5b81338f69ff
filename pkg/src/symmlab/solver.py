"""Semilinear difference equations on product spaces and comparison checks.

The elliptic problem on a finite domain ``omega`` of ``M x N`` is

    -Delta u = phi(u) + psi * u + lam   on omega,     u = 0 off omega,

with ``phi`` decreasing.  It is solved by the shifted monotone iteration

    (L_omega - psi + c) u_{k+1} = phi(u_k) + c u_k + lam,     u_0 = 0,

where ``c`` is a Lipschitz constant of ``phi`` on [0, inf).  Since
``s -> phi(s) + c s`` is nondecreasing and the matrix on the left is a
Stieltjes matrix, the iterates increase monotonically to the solution.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .graphs import Graph, ProductSpace, build_space, product, single_vertex
from .operators import dirichlet_eigenvalue, j_transform, laplacian, laplacian_matrix, star_function
from .rearrange import steiner_rearrange

__all__ = [
    "Nonlinearity",
    "ProblemSpec",
    "ComparisonReport",
    "SolverError",
    "parse_phi",
    "symmetrize_problem",
    "solve_elliptic",
    "solve_parabolic",
    "residual",
    "compare_elliptic",
    "compare_parabolic",
    "random_problem",
    "problem_from_config",
]


class SolverError(RuntimeError):
    """Solvability precondition violated or the iteration did not converge."""


@dataclass(frozen=True)
class Nonlinearity:
    """Decreasing source term ``phi`` from a small named family.

    ``zero``; ``reciprocal`` s -> a / (1 + s); ``linear-decreasing``
    s -> max(a - b s, 0).
    """

    kind: str = "zero"
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "reciprocal", "linear-decreasing"):
            raise ValueError(f"unknown phi family {self.kind!r}")
        if self.a < 0 or self.b < 0:
            raise ValueError("phi parameters must be nonnegative (phi decreasing, phi(0) >= 0)")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(s)
        if self.kind == "reciprocal":
            return self.a / (1.0 + np.maximum(s, 0.0))
        return np.maximum(self.a - self.b * s, 0.0)

    @property
    def lipschitz(self) -> float:
        if self.kind == "reciprocal":
            return self.a
        if self.kind == "linear-decreasing":
            return self.b
        return 0.0

    def __str__(self):
        if self.kind == "zero":
            return "zero"
        if self.kind == "reciprocal":
            return f"reciprocal:{self.a:g}"
        return f"linear-decreasing:{self.a:g},{self.b:g}"


def parse_phi(text: str | Nonlinearity) -> Nonlinearity:
    if isinstance(text, Nonlinearity):
        return text
    kind, _, args = text.partition(":")
    try:
        vals = [float(v) for v in args.split(",")] if args else []
    except ValueError:
        raise ValueError(f"bad phi parameters in {text!r}") from None
    if kind == "zero" and not vals:
        return Nonlinearity()
    if kind == "reciprocal" and len(vals) == 1:
        return Nonlinearity("reciprocal", vals[0])
    if kind == "linear-decreasing" and len(vals) == 2:
        return Nonlinearity("linear-decreasing", vals[0], vals[1])
    raise ValueError(f"unknown phi {text!r}")


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    product: ProductSpace
    omega: frozenset[int]
    phi: Nonlinearity = Nonlinearity()
    psi: np.ndarray | None = None
    lam: np.ndarray | None = None
    initial: np.ndarray | None = None
    # how the symmetrized equation couples psi^#: "v" -> psi^# v, "u" -> psi^# u^#
    coupling: str = "v"

    def __post_init__(self):
        n = self.product.vertex_count
        omega = frozenset(int(v) for v in self.omega)
        if not omega:
            raise ValueError("omega must be nonempty")
        if min(omega) < 0 or max(omega) >= n:
            raise ValueError("omega contains vertices outside the product space")
        object.__setattr__(self, "omega", omega)
        for name in ("psi", "lam"):
            val = getattr(self, name)
            arr = np.zeros(n) if val is None else np.asarray(val, dtype=float)
            if arr.shape != (n,) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be a finite array of length {n}")
            object.__setattr__(self, name, arr)
        if np.any(self.lam < 0):
            raise ValueError("lam must be nonnegative")
        if self.initial is not None:
            ini = np.asarray(self.initial, dtype=float)
            if ini.shape != (n,) or np.any(ini < 0):
                raise ValueError("initial condition must be a nonnegative array")
            if np.any(ini[self.off_mask] != 0):
                raise ValueError("initial condition must be supported in omega")
            object.__setattr__(self, "initial", ini)
        if self.coupling not in ("v", "u"):
            raise ValueError("coupling must be 'v' or 'u'")

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.product.vertex_count, dtype=bool)
        m[list(self.omega)] = True
        return m

    @property
    def off_mask(self) -> np.ndarray:
        return ~self.mask

    def replace(self, **kw) -> "ProblemSpec":
        args = dict(product=self.product, omega=self.omega, phi=self.phi, psi=self.psi,
                    lam=self.lam, initial=self.initial, coupling=self.coupling)
        args.update(kw)
        return ProblemSpec(**args)


def symmetrize_problem(p: ProblemSpec) -> ProblemSpec:
    """Fiberwise initial segments for omega; Steiner rearrangement of the data."""
    sp = p.product
    nm, nn = sp.fiber_shape
    counts = p.mask.reshape(nm, nn).sum(axis=0)
    perm = sp.order.perm
    omega = frozenset(int(perm[j]) * nn + y for y in range(nn) for j in range(counts[y]))
    initial = None if p.initial is None else steiner_rearrange(p.initial, sp)
    return p.replace(omega=omega, psi=steiner_rearrange(p.psi, sp),
                     lam=steiner_rearrange(p.lam, sp), initial=initial)


def _monotone_solve(A: np.ndarray, phi: Nonlinearity, b: np.ndarray,
                    max_iter: int = 100_000, tol: float = 1e-12) -> np.ndarray:
    """Solve ``A u - phi(u) = b`` by the shifted monotone iteration from 0."""
    c = phi.lipschitz
    try:
        factor = cho_factor(A + c * np.eye(len(b)))
    except np.linalg.LinAlgError:
        raise SolverError("operator is not positive definite (psi too large)") from None
    if c == 0 and phi.kind == "zero":
        return cho_solve(factor, b)
    u = np.zeros_like(b)
    for _ in range(max_iter):
        nxt = cho_solve(factor, phi(u) + c * u + b)
        change = np.max(np.abs(nxt - u)) if len(u) else 0.0
        u = nxt
        if change <= tol * max(1.0, np.max(np.abs(u))):
            return u
    raise SolverError(f"monotone iteration did not converge in {max_iter} steps")


def _operator(p: ProblemSpec, idx: np.ndarray, psi: np.ndarray, diag_shift: float = 0.0) -> np.ndarray:
    L = laplacian_matrix(p.product)[np.ix_(idx, idx)]
    A = L - np.diag(psi[idx]) + diag_shift * np.eye(len(idx))
    if np.linalg.eigvalsh(A)[0] <= 0:
        raise SolverError("L_omega - psi is not positive definite; psi exceeds the Dirichlet eigenvalue")
    return A


def solve_elliptic(p: ProblemSpec, extra_source: np.ndarray | None = None,
                   psi_override: np.ndarray | None = None) -> np.ndarray:
    """Nonnegative solution of ``-Delta u = phi(u) + psi u + lam`` on omega."""
    idx = np.flatnonzero(p.mask)
    psi = p.psi if psi_override is None else psi_override
    A = _operator(p, idx, psi)
    b = p.lam[idx].copy()
    if extra_source is not None:
        b += np.asarray(extra_source, dtype=float)[idx]
    u = np.zeros(p.product.vertex_count)
    u[idx] = _monotone_solve(A, p.phi, b)
    if np.min(u) < -1e-12:
        raise SolverError("solution is not nonnegative")
    return np.maximum(u, 0.0)


def residual(u, p: ProblemSpec, extra_source=None, psi_override=None) -> float:
    """Sup-norm residual on omega, recomputed with the graph Laplacian."""
    u = np.asarray(u, dtype=float)
    psi = p.psi if psi_override is None else psi_override
    r = -laplacian(u, p.product, p.omega) - p.phi(u) - psi * u - p.lam
    if extra_source is not None:
        r = r - extra_source
    return float(np.max(np.abs(r[p.mask])))


def solve_parabolic(p: ProblemSpec, dt: float, steps: int,
                    extra_source: Iterable[np.ndarray] | None = None) -> list[np.ndarray]:
    """Implicit-Euler trajectory of ``u_t = Delta u + phi(u) + psi u + lam``.

    Returns ``steps + 1`` snapshots, the first being the initial condition.
    ``extra_source`` optionally supplies one additional source array per step.
    """
    if p.initial is None:
        raise ValueError("parabolic problem needs an initial condition")
    if dt <= 0:
        raise ValueError("dt must be positive")
    idx = np.flatnonzero(p.mask)
    A = _operator(p, idx, p.psi, 1.0 / dt)
    extras = list(extra_source) if extra_source is not None else None
    u = p.initial.copy()
    out = [u.copy()]
    for k in range(steps):
        b = u[idx] / dt + p.lam[idx]
        if extras is not None:
            b = b + extras[k][idx]
        nxt = np.zeros_like(u)
        nxt[idx] = _monotone_solve(A, p.phi, b)
        if np.min(nxt) < -1e-12:
            raise SolverError("parabolic iterate lost nonnegativity")
        u = np.maximum(nxt, 0.0)
        out.append(u.copy())
    return out


@dataclass
class ComparisonReport:
    star_margin: float
    max_margins: list[float]
    phi_means: list[list[float]]
    symmetric_v: bool
    passed: bool
    plateau_margin: float = 0.0
    equivalence_agrees: bool = True
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _fiber_margins(u: np.ndarray, v: np.ndarray, sp: ProductSpace) -> dict:
    nm, nn = sp.fiber_shape
    U, V = u.reshape(nm, nn), v.reshape(nm, nn)
    star = float(np.min(j_transform(v, sp) - star_function(u, sp)))
    origin = sp.m_space.origin
    max_m = [float(V[origin, y] - U[:, y].max()) for y in range(nn)]
    phi_means = [[float(np.sum(V[:, y] ** q) - np.sum(U[:, y] ** q)) for q in (1, 2, 3)]
                 for y in range(nn)]
    # plateau functions max(s - c, 0) at every breakpoint c of either fiber
    plateau = np.inf
    for y in range(nn):
        cs = np.unique(np.concatenate([U[:, y], V[:, y]]))
        pu = np.maximum(U[:, y][None, :] - cs[:, None], 0).sum(axis=1)
        pv = np.maximum(V[:, y][None, :] - cs[:, None], 0).sum(axis=1)
        plateau = min(plateau, float(np.min(pv - pu)))
    return dict(star=star, max=max_m, phi=phi_means, plateau=plateau)


def compare_elliptic(p: ProblemSpec, tol: float = 1e-9) -> ComparisonReport:
    """Solve the problem and its symmetrization; check ``u^I <= Jv`` and corollaries."""
    sp = p.product
    q = symmetrize_problem(p)
    u = solve_elliptic(p)
    if p.coupling == "v":
        v = solve_elliptic(q)
        res_v = residual(v, q)
    else:
        src = q.psi * steiner_rearrange(u, sp)
        zero = np.zeros_like(q.psi)
        v = solve_elliptic(q, extra_source=src, psi_override=zero)
        res_v = residual(v, q, extra_source=src, psi_override=zero)
    m = _fiber_margins(u, v, sp)
    sym = bool(np.max(np.abs(v - steiner_rearrange(v, sp))) <= 1e-10)
    ok_star = m["star"] >= -tol
    ok_plateau = m["plateau"] >= -tol
    passed = ok_star and ok_plateau and min(m["max"]) >= -tol and sym
    return ComparisonReport(
        star_margin=m["star"], max_margins=m["max"], phi_means=m["phi"], symmetric_v=sym,
        passed=bool(passed), plateau_margin=m["plateau"],
        equivalence_agrees=bool(ok_star == ok_plateau),
        details={"residual_u": residual(u, p), "residual_v": res_v,
                 "max_u": float(u.max()), "max_v": float(v.max())},
    )


def _parabolic_pair(p: ProblemSpec, dt: float, steps: int):
    q = symmetrize_problem(p)
    us = solve_parabolic(p, dt, steps)
    if p.coupling == "v":
        vs = solve_parabolic(q, dt, steps)
    else:
        srcs = [q.psi * steiner_rearrange(u, p.product) for u in us[1:]]
        vs = solve_parabolic(q.replace(psi=np.zeros_like(q.psi)), dt, steps, extra_source=srcs)
    return us, vs


def _snapshot_margins(us, vs, sp):
    star, mx, sym = [], [], []
    for u, v in zip(us, vs):
        m = _fiber_margins(u, v, sp)
        star.append(m["star"])
        mx.append(m["max"])
        sym.append(float(np.max(np.abs(v - steiner_rearrange(v, sp)))))
    return np.array(star), np.array(mx), np.array(sym)


def compare_parabolic(p: ProblemSpec, dt: float, steps: int, tol: float = 1e-9) -> ComparisonReport:
    """Snapshot-wise comparison with an O(dt) slack estimated by halving dt.

    The slack constant ``c`` is the largest change of any snapshot margin
    between step ``dt`` and ``dt/2`` at matching times, divided by ``dt/2``.
    """
    sp = p.product
    us, vs = _parabolic_pair(p, dt, steps)
    star, mx, sym = _snapshot_margins(us, vs, sp)
    us2, vs2 = _parabolic_pair(p, dt / 2, 2 * steps)
    star2, mx2, _ = _snapshot_margins(us2[::2], vs2[::2], sp)
    diff = max(float(np.max(np.abs(star - star2))), float(np.max(np.abs(mx - mx2))))
    c = diff / (dt / 2)
    slack = c * dt
    floor = -(tol + slack)
    symmetric = bool(np.max(sym) <= 1e-10)
    passed = bool(star.min() >= floor and mx.min() >= floor and symmetric)
    final = _fiber_margins(us[-1], vs[-1], sp)
    return ComparisonReport(
        star_margin=float(star.min()),
        max_margins=[float(v) for v in mx.min(axis=0)],
        phi_means=final["phi"],
        symmetric_v=symmetric,
        passed=passed,
        plateau_margin=final["plateau"],
        equivalence_agrees=bool((final["star"] >= -tol - slack) == (final["plateau"] >= -tol - slack)),
        details={"dt": dt, "steps": steps, "slack_constant": c, "slack": slack,
                 "snapshot_star_margins": [float(s) for s in star],
                 "mass_u": [float(np.sum(u)) for u in us]},
    )


def random_problem(sp: ProductSpace, rng: np.random.Generator, phi: Nonlinearity | str = "zero",
                   density: float = 0.6, psi_scale: float = 0.5, parabolic: bool = False,
                   coupling: str = "v") -> ProblemSpec:
    """Random admissible instance: psi is rescaled below the Dirichlet eigenvalues."""
    n = sp.vertex_count
    mask = rng.random(n) < density
    if not mask.any():
        mask[rng.integers(n)] = True
    omega = frozenset(np.flatnonzero(mask).tolist())
    lam = rng.random(n) * (rng.random(n) < 0.7)
    psi = rng.uniform(-1.0, 1.0, n)
    initial = rng.random(n) * mask if parabolic else None
    p = ProblemSpec(sp, omega, parse_phi(phi), np.zeros(n), lam, initial, coupling)
    q = symmetrize_problem(p)
    lam1 = min(dirichlet_eigenvalue(sp, p.omega), dirichlet_eigenvalue(sp, q.omega))
    top = psi.max()
    if top > 0:
        psi = psi * (psi_scale * lam1 / top)
    return p.replace(psi=psi)


def _graph_from_spec(spec) -> Graph:
    if spec in (None, "point", "single"):
        return single_vertex()
    return build_space(spec).graph


def problem_from_config(cfg: Mapping) -> ProblemSpec:
    """Build a problem from its JSON config.

    ``{"m_space": "line:2", "n_space": "cycle:5" | "point", "omega": [[x_label, y], ...],
       "psi": [...] | "zero", "lam": [...] | "zero", "phi": "reciprocal:1",
       "initial": [...] (optional), "coupling": "v"}``
    """
    m_space = build_space(cfg["m_space"])
    sp = product(m_space, _graph_from_spec(cfg.get("n_space")))
    labels = {m_space.graph.label(x): x for x in range(m_space.vertex_count)}
    omega = set()
    for x_label, y in cfg["omega"]:
        key = str(x_label)
        if key not in labels:
            raise ValueError(f"unknown M vertex label {x_label!r}")
        omega.add(sp.index(labels[key], int(y)))
    n = sp.vertex_count

    def arr(name):
        val = cfg.get(name, "zero")
        if isinstance(val, str):
            if val != "zero":
                raise ValueError(f"{name} must be an array or 'zero'")
            return np.zeros(n)
        return np.asarray(val, dtype=float)

    initial = cfg.get("initial")
    return ProblemSpec(sp, frozenset(omega), parse_phi(cfg.get("phi", "zero")), arr("psi"),
                       arr("lam"), None if initial is None else np.asarray(initial, dtype=float),
                       cfg.get("coupling", "v"))
