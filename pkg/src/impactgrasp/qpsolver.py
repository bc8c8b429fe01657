"""Dense convex QP solver for small control problems.

    minimize    0.5 x' H x + g' x
    subject to  A_eq x = b_eq
                lb <= A_in x <= ub      (entries may be +-inf)

The method is a primal active set: equality constraints are eliminated
through a QR factorization, a feasible start is produced exactly by a
least-distance projection (Lawson-Hanson NNLS), and the working set is then
updated with deterministic lowest-index tie-breaking.  Problems here are
tiny (n <= ~30), solved at control rate, and must be bit-reproducible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import nnls


class QpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITERATIONS = "max_iterations"


@dataclass
class QpProblem:
    H: np.ndarray
    g: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_in: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        n = self.g.shape[0]
        if self.H.shape != (n, n):
            raise ValueError("H must be n x n")
        if not np.allclose(self.H, self.H.T, atol=1e-10):
            raise ValueError("H must be symmetric")
        if self.A_eq is None:
            self.A_eq = np.zeros((0, n))
            self.b_eq = np.zeros(0)
        else:
            self.A_eq = np.atleast_2d(np.asarray(self.A_eq, dtype=float))
            self.b_eq = np.atleast_1d(np.asarray(self.b_eq, dtype=float))
        if self.A_in is None:
            self.A_in = np.zeros((0, n))
            self.lb = np.zeros(0)
            self.ub = np.zeros(0)
        else:
            self.A_in = np.atleast_2d(np.asarray(self.A_in, dtype=float))
            self.lb = np.atleast_1d(np.asarray(self.lb, dtype=float))
            self.ub = np.atleast_1d(np.asarray(self.ub, dtype=float))
        if self.A_eq.shape[1] != n or self.A_in.shape[1] != n:
            raise ValueError("constraint matrices must have n columns")
        if self.A_eq.shape[0] != self.b_eq.shape[0]:
            raise ValueError("A_eq/b_eq dimension mismatch")
        if self.A_in.shape[0] != self.lb.shape[0] or self.A_in.shape[0] != self.ub.shape[0]:
            raise ValueError("A_in/lb/ub dimension mismatch")
        if np.any(self.lb > self.ub):
            raise ValueError("lb must not exceed ub")

    @property
    def n(self) -> int:
        return self.g.shape[0]


@dataclass
class QpSolution:
    x: np.ndarray
    status: QpStatus
    kkt_residual: float
    active_set: list          # (row, side) pairs, side +1 upper / -1 lower
    iterations: int
    objective: float

    @property
    def ok(self) -> bool:
        return self.status is QpStatus.OPTIMAL


def dump_problem(problem: QpProblem) -> str:
    """Plain-text matrix dump for offline inspection of a controller QP."""
    parts = []
    for name in ("H", "g", "A_eq", "b_eq", "A_in", "lb", "ub"):
        arr = np.atleast_2d(getattr(problem, name))
        parts.append(name)
        for row in arr:
            parts.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(parts) + "\n"


def _solve_kkt(P, G, q, h):
    """Stationary point of 0.5 z'Pz + q'z subject to G z = h."""
    m = G.shape[0]
    if m == 0:
        return np.linalg.solve(P, -q), np.zeros(0)
    kkt = np.block([[P, G.T], [G, np.zeros((m, m))]])
    rhs = np.concatenate([-q, h])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[: P.shape[0]], sol[P.shape[0]:]


class _Reduced:
    """One-sided inequality data expressed in the equality null space."""

    def __init__(self, rows, offsets, tags, norms):
        self.G = rows          # (m, nz), rows scaled to unit length
        self.h = offsets
        self.tags = tags       # (row, side) per one-sided constraint
        self.norms = norms     # original row norms, for multiplier recovery


def _reduce(problem: QpProblem, reg: float):
    """Eliminate equalities; returns None for inconsistent equality systems."""
    n = problem.n
    h_sym = 0.5 * (problem.H + problem.H.T) + reg * np.eye(n)
    m_e = problem.A_eq.shape[0]
    if m_e == 0:
        x_part = np.zeros(n)
        z_basis = np.eye(n)
    else:
        q_full, r_full, piv = scipy.linalg.qr(problem.A_eq.T, pivoting=True)
        diag = np.abs(np.diag(r_full[: min(n, m_e), :]))
        if diag.size == 0 or diag[0] < 1e-13:
            rank = 0
        else:
            rank = int(np.sum(diag > max(n, m_e) * np.finfo(float).eps * diag[0]))
        if rank == 0:
            x_part = np.zeros(n)
            z_basis = np.eye(n)
        else:
            r1 = r_full[:rank, :rank]
            y1 = scipy.linalg.solve_triangular(r1.T, problem.b_eq[piv[:rank]], lower=True)
            x_part = q_full[:, :rank] @ y1
            z_basis = q_full[:, rank:]
        resid = problem.A_eq @ x_part - problem.b_eq
        scale = 1.0 + float(np.max(np.abs(problem.b_eq), initial=0.0))
        if np.max(np.abs(resid), initial=0.0) > 1e-8 * scale:
            return None

    rows, offs, tags, norms = [], [], [], []
    for i in range(problem.A_in.shape[0]):
        a_red = problem.A_in[i] @ z_basis
        base = float(problem.A_in[i] @ x_part)
        nrm = float(np.linalg.norm(a_red))
        for side, bound in ((1, problem.ub[i]), (-1, problem.lb[i])):
            if not np.isfinite(bound):
                continue
            rhs = side * (bound - base)
            if nrm < 1e-13:
                if rhs < -1e-10:  # row has no free direction and is violated
                    return None
                continue
            rows.append(side * a_red / nrm)
            offs.append(rhs / nrm)
            tags.append((i, side))
            norms.append(nrm)
    red = _Reduced(
        np.array(rows).reshape(len(rows), z_basis.shape[1]),
        np.array(offs),
        tags,
        np.array(norms),
    )
    return h_sym, x_part, z_basis, red


def _feasible_point(red: _Reduced, z_unc):
    """Least-distance projection of z_unc onto the polyhedron via NNLS.

    A vanishing last residual component is the Lawson-Hanson certificate
    that the constraint set is empty.
    """
    nz = z_unc.shape[0]
    h_shift = red.h - red.G @ z_unc
    e = np.vstack([red.G.T, h_shift[None, :]])
    f = np.zeros(nz + 1)
    f[nz] = 1.0
    u, _ = nnls(e, f)
    r = e @ u - f
    if abs(r[nz]) < 1e-12:
        return None
    return z_unc + (-r[:nz] / r[nz])


def _kkt_residual(problem, h_sym, x, mu_net, mu_abs_by_row):
    grad = h_sym @ x + problem.g
    rhs = -(grad + problem.A_in.T @ mu_net) if mu_net.size else -grad
    if problem.A_eq.shape[0]:
        nu, *_ = np.linalg.lstsq(problem.A_eq.T, rhs, rcond=None)
        stat = np.max(np.abs(problem.A_eq.T @ nu - rhs), initial=0.0)
        eq_viol = np.max(np.abs(problem.A_eq @ x - problem.b_eq), initial=0.0)
    else:
        stat = np.max(np.abs(rhs), initial=0.0)
        eq_viol = 0.0
    in_viol = 0.0
    comp = 0.0
    if problem.A_in.shape[0]:
        ax = problem.A_in @ x
        hi = np.where(np.isfinite(problem.ub), ax - problem.ub, -np.inf)
        lo = np.where(np.isfinite(problem.lb), problem.lb - ax, -np.inf)
        in_viol = max(0.0, float(np.max(hi, initial=-np.inf)), float(np.max(lo, initial=-np.inf)))
        for (i, side), mu in mu_abs_by_row.items():
            bound = problem.ub[i] if side > 0 else problem.lb[i]
            comp = max(comp, abs(mu) * abs(float(ax[i]) - bound))
    return float(max(stat, eq_viol, in_viol, comp))


def solve(
    problem: QpProblem,
    warm_start=None,
    reg: float = 1e-9,
    tol: float = 1e-8,
    max_iter: int = 200,
) -> QpSolution:
    """Solve the QP; deterministic for identical inputs and warm start.

    ``warm_start`` is the ``active_set`` of a previous solution of a problem
    with the same constraint layout; with an unchanged problem it converges
    in a single iteration.
    """
    reduced = _reduce(problem, reg)
    if reduced is None:
        return QpSolution(np.zeros(problem.n), QpStatus.INFEASIBLE, np.inf, [], 0, np.nan)
    h_sym, x_part, z_basis, red = reduced
    nz = z_basis.shape[1]
    m = red.G.shape[0]
    tag_index = {t: j for j, t in enumerate(red.tags)}

    if nz == 0:
        sol = _assemble(problem, h_sym, x_part, [], {}, red, 0)
        if sol.kkt_residual > 1e-7:
            sol.status = QpStatus.INFEASIBLE
        return sol

    feas_eps = 1e-9
    p_red = z_basis.T @ h_sym @ z_basis
    p_red = 0.5 * (p_red + p_red.T)
    q_red = z_basis.T @ (h_sym @ x_part + problem.g)

    work: list[int] = []
    z = None
    if warm_start:
        ws = sorted(tag_index[tuple(t)] for t in warm_start if tuple(t) in tag_index)
        if ws:
            z_try, _ = _solve_kkt(p_red, red.G[ws], q_red, red.h[ws])
            if m == 0 or np.max(red.G @ z_try - red.h) <= 1e-7:
                z = z_try
                work = list(ws)
    if z is None:
        z_unc = np.linalg.solve(p_red, -q_red)
        if m == 0 or np.max(red.G @ z_unc - red.h) <= feas_eps:
            z = z_unc
        else:
            z = _feasible_point(red, z_unc)
            if z is None:
                return QpSolution(
                    np.zeros(problem.n), QpStatus.INFEASIBLE, np.inf, [], 0, np.nan
                )
        work = []

    converged = False
    iterations = max_iter
    for it in range(1, max_iter + 1):
        g_w = red.G[work] if work else np.zeros((0, nz))
        h_w = red.h[work] if work else np.zeros(0)
        z_new, mult = _solve_kkt(p_red, g_w, q_red, h_w)
        d = z_new - z
        if np.max(np.abs(d), initial=0.0) <= 1e-12 * (1.0 + np.max(np.abs(z), initial=0.0)):
            if mult.size == 0 or np.min(mult) >= -tol:
                converged = True
                iterations = it
                z = z_new
                break
            work.pop(int(np.argmin(mult)))
            continue
        t_step = 1.0
        blocker = -1
        for j in range(m):
            if j in work:
                continue
            a_d = float(red.G[j] @ d)
            if a_d <= 1e-14:
                continue
            t_j = (red.h[j] - float(red.G[j] @ z)) / a_d
            if t_j < t_step - 1e-14:
                t_step = max(t_j, 0.0)
                blocker = j
        z = z + t_step * d
        if blocker >= 0:
            work.append(blocker)
            work.sort()

    x = x_part + z_basis @ z
    mu_by_tag = {}
    if work:
        _, mult = _solve_kkt(p_red, red.G[work], q_red, red.h[work])
        for idx, j in enumerate(work):
            # rows were normalized; scale back to the original-row multiplier
            mu_by_tag[red.tags[j]] = float(mult[idx]) / red.norms[j]
    sol = _assemble(problem, h_sym, x, [red.tags[j] for j in work], mu_by_tag, red, iterations)
    if not converged:
        sol.status = QpStatus.MAX_ITERATIONS
    return sol


def _assemble(problem, h_sym, x, active_tags, mu_by_tag, red, iterations):
    mu_net = np.zeros(problem.A_in.shape[0])
    for (i, side), mu in mu_by_tag.items():
        mu_net[i] += side * mu
    kkt = _kkt_residual(problem, h_sym, x, mu_net, mu_by_tag)
    scale = 1.0 + float(np.max(np.abs(problem.g), initial=0.0))
    status = QpStatus.OPTIMAL if kkt <= 1e-8 * scale + 1e-10 else QpStatus.MAX_ITERATIONS
    obj = float(0.5 * x @ problem.H @ x + problem.g @ x)
    return QpSolution(x, status, kkt, sorted(active_tags), iterations, obj)
