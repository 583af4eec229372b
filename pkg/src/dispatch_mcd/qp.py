"""Dense convex quadratic programming with an active-set method.

Solves problems of the form

    minimize    0.5 x' Q x + c' x
    subject to  A x <= b        (general inequalities)
                E x = f         (equalities)
                lb <= x <= ub   (variable bounds)

and reports Lagrange multipliers for every constraint class.  The solver is
a primal active-set method.  Equalities stay in the working set permanently;
general rows and bounds enter and leave it as the iterates move.  The null
space of the working rows is kept as an orthonormal basis that is updated by
rank-one transformations when a single row is added or removed, so the per
iteration cost is a few small dense factorizations rather than a fresh SVD.
Ties are broken by smallest constraint index so repeated solves are
bit-reproducible.

Intended for dense problems up to a few hundred variables; the dispatch
instances built elsewhere in this package have ~120 variables.
"""

from __future__ import annotations

import dataclasses
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize


class QpError(Exception):
    """Base class for solver failures."""


class NotPsdError(QpError):
    """Q has an eigenvalue below the PSD tolerance."""


class InfeasibleError(QpError):
    """No point satisfies the constraints."""


class UnboundedError(QpError):
    """The objective decreases without bound along a feasible ray."""


class MaxIterationsError(QpError):
    """Iteration cap reached before the tolerances were met."""

    def __init__(self, message: str, solution: Optional["QpSolution"] = None):
        super().__init__(message)
        self.solution = solution


@dataclasses.dataclass(frozen=True)
class SolverSettings:
    """Termination tolerances and iteration control."""

    feas_tol: float = 1e-7
    opt_tol: float = 1e-7
    comp_tol: float = 1e-7
    max_iter: Optional[int] = None  # default 10 * (n + rows)
    psd_tol: float = 1e-9
    check_psd: bool = True


def _as_matrix(M, rows: Optional[int], n: int, name: str) -> np.ndarray:
    if M is None:
        return np.zeros((0, n))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] != n:
        raise ValueError(f"{name} has {M.shape[1]} columns, expected {n}")
    if rows is not None and M.shape[0] != rows:
        raise ValueError(f"{name} has {M.shape[0]} rows, expected {rows}")
    return M


@dataclasses.dataclass
class QpProblem:
    """Canonical dense QP data.

    Labels are opaque tags used to look up duals on the solution; they default
    to ``ineq[i]`` / ``eq[i]``.
    """

    Q: np.ndarray
    c_lin: np.ndarray
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    E: Optional[np.ndarray] = None
    f: Optional[np.ndarray] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None
    ineq_labels: Optional[Sequence[str]] = None
    eq_labels: Optional[Sequence[str]] = None

    def __post_init__(self):
        self.c_lin = np.asarray(self.c_lin, dtype=float).ravel()
        n = self.c_lin.size
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if self.Q.shape != (n, n):
            raise ValueError(f"Q has shape {self.Q.shape}, expected ({n}, {n})")
        b = np.asarray(self.b, dtype=float).ravel() if self.b is not None else np.zeros(0)
        f = np.asarray(self.f, dtype=float).ravel() if self.f is not None else np.zeros(0)
        self.A = _as_matrix(self.A, b.size if self.A is not None else None, n, "A")
        self.E = _as_matrix(self.E, f.size if self.E is not None else None, n, "E")
        if self.A.shape[0] != b.size:
            raise ValueError("rows of A must match b")
        if self.E.shape[0] != f.size:
            raise ValueError("rows of E must match f")
        self.b, self.f = b, f
        self.lb = np.full(n, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float).ravel()
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).ravel()
        if self.lb.size != n or self.ub.size != n:
            raise ValueError("bounds must have one entry per variable")
        if np.any(self.lb > self.ub + 1e-12):
            raise InfeasibleError("a lower bound exceeds its upper bound")
        if self.ineq_labels is None:
            self.ineq_labels = [f"ineq[{i}]" for i in range(b.size)]
        if self.eq_labels is None:
            self.eq_labels = [f"eq[{i}]" for i in range(f.size)]
        if len(self.ineq_labels) != b.size or len(self.eq_labels) != f.size:
            raise ValueError("label lists must match constraint counts")

    @property
    def n(self) -> int:
        return self.c_lin.size

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.Q @ x + self.c_lin @ x)


@dataclasses.dataclass(frozen=True)
class KktReport:
    """Max-norm residuals of the first-order optimality conditions."""

    stationarity: float
    feasibility: float
    complementarity: float
    dual_sign: float  # most negative inequality/bound dual, clipped at 0
    passed: bool


@dataclasses.dataclass
class QpSolution:
    x: np.ndarray
    objective: float
    ineq_duals: np.ndarray
    eq_duals: np.ndarray
    lb_duals: np.ndarray
    ub_duals: np.ndarray
    status: str  # "optimal" | "infeasible" | "max_iterations"
    iterations: int
    residuals: Optional[KktReport] = None
    ineq_labels: Sequence[str] = ()
    eq_labels: Sequence[str] = ()

    def dual(self, label: str) -> float:
        """Dual of the labelled constraint (inequality first, then equality)."""
        if label in self.ineq_labels:
            return float(self.ineq_duals[list(self.ineq_labels).index(label)])
        if label in self.eq_labels:
            return float(self.eq_duals[list(self.eq_labels).index(label)])
        raise KeyError(f"no constraint labelled {label!r}")


def check_kkt(problem: QpProblem, solution: QpSolution, tol: float = 1e-7) -> KktReport:
    """Numerically verify stationarity, feasibility and complementarity.

    Pure check; does not modify its inputs.  ``passed`` is true iff all three
    residuals are within ``tol`` and no dual is more negative than ``-tol``.
    """
    x = solution.x
    grad = problem.Q @ x + problem.c_lin
    lagr = grad.copy()
    if problem.A.shape[0]:
        lagr += problem.A.T @ solution.ineq_duals
    if problem.E.shape[0]:
        lagr += problem.E.T @ solution.eq_duals
    lagr -= solution.lb_duals
    lagr += solution.ub_duals
    stationarity = float(np.max(np.abs(lagr))) if lagr.size else 0.0

    feas = 0.0
    comp = 0.0
    if problem.A.shape[0]:
        resid = problem.A @ x - problem.b
        feas = max(feas, float(np.max(resid, initial=0.0)))
        comp = max(comp, float(np.max(np.abs(solution.ineq_duals * resid), initial=0.0)))
    if problem.E.shape[0]:
        feas = max(feas, float(np.max(np.abs(problem.E @ x - problem.f), initial=0.0)))
    finite_lb = np.isfinite(problem.lb)
    finite_ub = np.isfinite(problem.ub)
    if np.any(finite_lb):
        gap = problem.lb[finite_lb] - x[finite_lb]
        feas = max(feas, float(np.max(gap, initial=0.0)))
        comp = max(comp, float(np.max(np.abs(solution.lb_duals[finite_lb] * gap), initial=0.0)))
    if np.any(finite_ub):
        gap = x[finite_ub] - problem.ub[finite_ub]
        feas = max(feas, float(np.max(gap, initial=0.0)))
        comp = max(comp, float(np.max(np.abs(solution.ub_duals[finite_ub] * gap), initial=0.0)))

    duals = np.concatenate([solution.ineq_duals, solution.lb_duals, solution.ub_duals])
    dual_sign = float(max(0.0, -np.min(duals, initial=0.0)))

    passed = stationarity <= tol and feas <= tol and comp <= tol and dual_sign <= tol
    return KktReport(stationarity, feas, comp, dual_sign, passed)


def _psd_floor(Q: np.ndarray) -> float:
    """Smallest eigenvalue of the symmetrized Q (cheap path for diagonal Q)."""
    n = Q.shape[0]
    if n == 0:
        return 0.0
    off = Q - np.diag(np.diag(Q))
    if not np.any(off):
        return float(np.min(np.diag(Q)))
    return float(np.min(np.linalg.eigvalsh(0.5 * (Q + Q.T))))


def _phase1(problem: QpProblem) -> np.ndarray:
    """Feasible starting point via an LP feasibility solve."""
    n = problem.n
    bounds = list(zip(problem.lb, problem.ub))
    res = scipy.optimize.linprog(
        c=np.zeros(n),
        A_ub=problem.A if problem.A.shape[0] else None,
        b_ub=problem.b if problem.A.shape[0] else None,
        A_eq=problem.E if problem.E.shape[0] else None,
        b_eq=problem.f if problem.E.shape[0] else None,
        bounds=bounds,
        method="highs",
    )
    if res.status == 2:
        raise InfeasibleError("no point satisfies the constraints")
    if res.status == 3:
        # Feasibility LP "unbounded" cannot happen with a zero objective.
        raise QpError("phase-1 LP reported unbounded; constraint data is suspect")
    if res.status != 0 or res.x is None:
        raise QpError(f"phase-1 LP failed: {res.message}")
    x0 = np.clip(res.x, problem.lb, problem.ub)
    if problem.E.shape[0]:
        # One projection pass tightens the equality residual left by the LP.
        resid = problem.f - problem.E @ x0
        if np.max(np.abs(resid), initial=0.0) > 1e-12:
            corr, *_ = np.linalg.lstsq(problem.E, resid, rcond=None)
            x0 = np.clip(x0 + corr, problem.lb, problem.ub)
    return x0


def _feasibility_violation(problem: QpProblem, x: np.ndarray) -> float:
    v = 0.0
    if problem.A.shape[0]:
        v = max(v, float(np.max(problem.A @ x - problem.b, initial=0.0)))
    if problem.E.shape[0]:
        v = max(v, float(np.max(np.abs(problem.E @ x - problem.f), initial=0.0)))
    v = max(v, float(np.max(problem.lb - x, initial=0.0)))
    v = max(v, float(np.max(x - problem.ub, initial=0.0)))
    return v


# Working-row kinds, also the tie-break order (rows, then lb, then ub).
_ROW, _LB, _UB = 0, 1, 2


class _ActiveSet:
    """State of one solve; not reusable."""

    def __init__(self, problem: QpProblem, settings: SolverSettings, x0: np.ndarray):
        p = problem
        self.p = p
        self.s = settings
        self.n = p.n
        self.m = p.A.shape[0]
        self.x = x0.astype(float).copy()
        self.q_diag = p.Q.diagonal().copy() if not np.any(p.Q - np.diag(p.Q.diagonal())) else None
        self.iterations = 0

        act_tol = max(settings.feas_tol, 1e-9)
        self.clamped = p.ub - p.lb <= act_tol  # lb == ub: fixed forever
        self.at_lb = ((np.abs(self.x - p.lb) <= act_tol) & np.isfinite(p.lb)) | self.clamped
        self.at_ub = (np.abs(self.x - p.ub) <= act_tol) & np.isfinite(p.ub) & ~self.at_lb
        self.x[self.at_lb] = p.lb[self.at_lb]
        self.x[self.at_ub] = p.ub[self.at_ub]
        self.row_active = np.zeros(self.m, dtype=bool)

        # Dynamic working rows in "<= gradient" form: A_i, -e_j (lb), +e_j (ub),
        # stored in a persistent buffer below the permanent equality rows.
        self.p_eq = p.E.shape[0]
        self._buf = np.zeros((self.p_eq + self.n + self.m, self.n))
        if self.p_eq:
            self._buf[: self.p_eq] = p.E
        self.k_dyn = 0
        self.work: list[tuple[int, int]] = []  # (kind, index), insertion order
        self._seed(act_tol)
        self.grad = p.Q @ self.x + p.c_lin
        self.slack = p.b - p.A @ self.x if self.m else np.zeros(0)

    # -- working-set matrices --------------------------------------------------

    def _row_vector(self, kind: int, idx: int) -> np.ndarray:
        if kind == _ROW:
            return self.p.A[idx]
        v = np.zeros(self.n)
        v[idx] = -1.0 if kind == _LB else 1.0
        return v

    def _cw(self) -> np.ndarray:
        """View of the stacked working rows: equalities, then dynamic rows."""
        return self._buf[: self.p_eq + self.k_dyn]

    def _push_work(self, kind: int, idx: int, row: np.ndarray) -> None:
        self._buf[self.p_eq + self.k_dyn] = row
        self.k_dyn += 1
        self.work.append((kind, idx))

    def _pop_work(self, position: int) -> None:
        lo = self.p_eq + position
        hi = self.p_eq + self.k_dyn
        self._buf[lo : hi - 1] = self._buf[lo + 1 : hi]
        self.k_dyn -= 1
        del self.work[position]

    def _seed(self, act_tol: float) -> None:
        """Activate touching constraints whose gradients stay independent.

        Independence is tracked with an orthonormal basis of the active row
        space, grown by two-pass Gram-Schmidt over a preallocated buffer.
        """
        p = self.p
        basis = np.zeros((self.p_eq + self.n + self.m, self.n))
        nb = 0

        def try_add(row: np.ndarray) -> bool:
            nonlocal nb
            norm0 = np.linalg.norm(row)
            if norm0 <= 1e-12:
                return False
            v = row / norm0
            B = basis[:nb]
            for _ in range(2):
                if nb:
                    v = v - B.T @ (B @ v)
            norm = np.linalg.norm(v)
            if norm <= 1e-8:
                return False
            basis[nb] = v / norm
            nb += 1
            return True

        for k in range(self.p_eq):
            try_add(p.E[k])
        # Clamped variables go first: if their row is dependent it can only be
        # on equalities, which never leave, so the pin stays implied forever.
        for j in np.flatnonzero(self.clamped):
            if try_add(self._row_vector(_LB, j)):
                self._push_work(_LB, int(j), self._row_vector(_LB, j))
        for j in np.flatnonzero(self.at_lb & ~self.clamped):
            if try_add(self._row_vector(_LB, j)):
                self._push_work(_LB, int(j), self._row_vector(_LB, j))
            else:
                self.at_lb[j] = False  # leave free; a zero-step block re-adds it
        for j in np.flatnonzero(self.at_ub):
            if try_add(self._row_vector(_UB, j)):
                self._push_work(_UB, int(j), self._row_vector(_UB, j))
            else:
                self.at_ub[j] = False
        if self.m:
            resid = p.A @ self.x - p.b
            for i in range(self.m):
                if resid[i] >= -act_tol and try_add(p.A[i]):
                    self.row_active[i] = True
                    self._push_work(_ROW, int(i), p.A[i])
        cw = self._cw()
        if cw.shape[0]:
            # Null basis from the full QR of CW': the trailing columns of Q
            # span the orthogonal complement of the row space.
            q_full, _ = scipy.linalg.qr(cw.T, mode="full")
            self.Z = q_full[:, cw.shape[0]:].copy()
        else:
            self.Z = np.eye(self.n)

    # -- null-space maintenance -------------------------------------------------

    def _null_add_row(self, row: np.ndarray) -> None:
        """Shrink Z after activating ``row``."""
        Z = self.Z
        t = Z.T @ row
        nt = np.linalg.norm(t)
        if nt <= 1e-12 * max(1.0, np.linalg.norm(row)):
            # Row is numerically dependent; rebuild to stay safe.
            self.Z = scipy.linalg.null_space(self._cw())
            return
        # Householder H with t H = |t| e1; drop the first column of Z H.
        v = t.copy()
        v[0] += np.sign(t[0]) * nt if t[0] != 0 else nt
        v /= np.linalg.norm(v)
        ZH = Z - 2.0 * np.outer(Z @ v, v)
        self.Z = ZH[:, 1:]

    def _null_remove_row(self, row: np.ndarray) -> None:
        """Grow Z after releasing ``row`` (already removed from the work list)."""
        CW = self._cw()
        u = row.copy()
        if CW.shape[0]:
            M = CW @ CW.T
            M[np.diag_indices_from(M)] += 1e-14 * max(1.0, float(np.trace(M)) / M.shape[0])
            cho = scipy.linalg.cho_factor(M)
            for _ in range(2):
                u = u - CW.T @ scipy.linalg.cho_solve(cho, CW @ u)
                if self.Z.shape[1]:
                    u = u - self.Z @ (self.Z.T @ u)
        elif self.Z.shape[1]:
            u = u - self.Z @ (self.Z.T @ u)
        norm = np.linalg.norm(u)
        if norm <= 1e-10 * max(1.0, np.linalg.norm(row)):
            self.Z = scipy.linalg.null_space(CW)
            return
        self.Z = np.hstack([self.Z, (u / norm)[:, None]])

    # -- direction subproblem ----------------------------------------------------

    def _qz(self) -> np.ndarray:
        if self.q_diag is not None:
            return self.q_diag[:, None] * self.Z
        return self.p.Q @ self.Z

    def _newton_or_zero(self, Z, Hr, gr, pvec):
        """Accept a Newton step only if it buys a real objective decrease.

        Round-off-scale gradient components against near-cutoff curvature can
        produce sizable steps whose predicted decrease is numerically zero;
        returning a zero step instead routes control to the dual check.
        """
        predicted = -(gr @ pvec + 0.5 * pvec @ (Hr @ pvec))
        noise = 1e-10 * (1.0 + float(np.linalg.norm(gr)) * float(np.linalg.norm(pvec)))
        if predicted <= noise:
            return np.zeros(self.n), False
        return Z @ pvec, False

    def _direction(self):
        """Newton (or ray) direction in the current null space."""
        Z = self.Z
        nz = Z.shape[1]
        if nz == 0:
            return np.zeros(self.n), False
        Hr = Z.T @ self._qz()
        gr = Z.T @ self.grad
        scale = float(np.abs(Hr).max())
        try:
            L = np.linalg.cholesky(Hr)
            pvec = -scipy.linalg.cho_solve((L, True), gr)
            # Near-singular Cholesky can pass yet return an absurd step;
            # hand those to the eigenvalue path, which treats them as rays.
            if float(np.abs(pvec).max()) <= 1e8 * (1.0 + float(np.abs(self.x).max())):
                return self._newton_or_zero(Z, Hr, gr, pvec)
        except np.linalg.LinAlgError:
            pass
        lam, V = np.linalg.eigh(Hr)
        cut = max(1e-12, 1e-12 * scale)
        pos = lam > cut
        grot = V.T @ gr
        g_null = grot.copy()
        g_null[pos] = 0.0
        ray_tol = 1e-9 * (1.0 + float(np.abs(self.grad).max()))
        if float(np.abs(g_null).max()) > ray_tol:
            j = int(np.argmax(np.abs(g_null)))
            ray = -np.sign(g_null[j]) * V[:, j]
            return Z @ ray, True
        if not np.any(pos):
            return np.zeros(self.n), False
        pvec = -(V[:, pos] @ (grot[pos] / lam[pos]))
        return self._newton_or_zero(Z, Hr, gr, pvec)

    # -- duals ---------------------------------------------------------------

    def _duals(self):
        """Multipliers for the current working set.

        Solved from the normal equations of ``CW' nu = -grad`` with one
        refinement pass; CW has full row rank by construction.
        """
        CW = self._cw()
        k = CW.shape[0]
        if k == 0:
            return np.zeros(0)
        M = CW @ CW.T
        M[np.diag_indices_from(M)] += 1e-14 * max(1.0, float(np.trace(M)) / k)
        cho = scipy.linalg.cho_factor(M)
        rhs = -(CW @ self.grad)
        nu = scipy.linalg.cho_solve(cho, rhs)
        resid = -self.grad - CW.T @ nu
        nu = nu + scipy.linalg.cho_solve(cho, CW @ resid)
        return nu

    def _split_duals(self, nu: np.ndarray):
        p_eq = self.p.E.shape[0]
        mu = nu[:p_eq]
        lam_rows = np.zeros(self.m)
        lb_d = np.zeros(self.n)
        ub_d = np.zeros(self.n)
        for r, (kind, idx) in enumerate(self.work):
            v = nu[p_eq + r]
            if kind == _ROW:
                lam_rows[idx] = v
            elif kind == _LB:
                lb_d[idx] = v
            else:
                ub_d[idx] = v
        return mu, lam_rows, lb_d, ub_d

    # -- main loop -----------------------------------------------------------

    def solve(self) -> QpSolution:
        s = self.s
        max_iter = s.max_iter if s.max_iter is not None else 10 * (self.n + self.m + self.p.E.shape[0] + 10)
        while True:
            self.iterations += 1
            if self.iterations > max_iter:
                sol = self._build_solution("max_iterations")
                raise MaxIterationsError(f"active-set iteration cap {max_iter} reached", solution=sol)
            d, is_ray = self._direction()
            step_tol = 1e-10 * (1.0 + float(np.abs(self.x).max()))
            if not is_ray and float(np.abs(d).max()) <= step_tol:
                if self._optimal_or_drop():
                    return self._build_solution("optimal")
                continue
            self._advance(d, is_ray)

    def _optimal_or_drop(self) -> bool:
        nu = self._duals()
        p_eq = self.p.E.shape[0]
        worst_val = -self.s.opt_tol
        worst_key = None
        worst_pos = -1
        for r, (kind, idx) in enumerate(self.work):
            if kind == _LB and self.clamped[idx]:
                continue
            v = nu[p_eq + r]
            key = (kind, idx)
            if v < worst_val - 1e-15 or (worst_key is not None and abs(v - worst_val) <= 1e-15 and key < worst_key):
                worst_val, worst_key, worst_pos = v, key, r
        if worst_key is None:
            self._final_nu = nu
            return True
        kind, idx = worst_key
        row = self._row_vector(kind, idx)
        self._pop_work(worst_pos)
        if kind == _ROW:
            self.row_active[idx] = False
        elif kind == _LB:
            self.at_lb[idx] = False
        else:
            self.at_ub[idx] = False
        self._null_remove_row(row)
        return False

    def _advance(self, d: np.ndarray, is_ray: bool) -> None:
        p = self.p
        dir_tol = 1e-10 * (1.0 + float(np.abs(d).max()))
        cand_alpha = [np.zeros(0)]
        cand_kind = [np.zeros(0, dtype=int)]
        cand_idx = [np.zeros(0, dtype=int)]
        denom = p.A @ d if self.m else np.zeros(0)
        if self.m:
            rows = np.flatnonzero(~self.row_active & (denom > dir_tol))
            if rows.size:
                cand_alpha.append(np.maximum(self.slack[rows], 0.0) / denom[rows])
                cand_kind.append(np.full(rows.size, _ROW, dtype=int))
                cand_idx.append(rows)
        free = ~(self.at_lb | self.at_ub)
        lows = np.flatnonzero(free & (d < -dir_tol) & np.isfinite(p.lb))
        if lows.size:
            cand_alpha.append((p.lb[lows] - self.x[lows]) / d[lows])
            cand_kind.append(np.full(lows.size, _LB, dtype=int))
            cand_idx.append(lows)
        highs = np.flatnonzero(free & (d > dir_tol) & np.isfinite(p.ub))
        if highs.size:
            cand_alpha.append((p.ub[highs] - self.x[highs]) / d[highs])
            cand_kind.append(np.full(highs.size, _UB, dtype=int))
            cand_idx.append(highs)
        alphas = np.maximum(np.concatenate(cand_alpha), 0.0)
        kinds = np.concatenate(cand_kind)
        idxs = np.concatenate(cand_idx)

        blocking = None
        alpha = np.inf if is_ray else 1.0
        if alphas.size:
            amin = float(np.min(alphas))
            if amin < alpha - 1e-12:
                # Smallest-index rule among the tied blocking candidates.
                tied = np.flatnonzero(alphas <= amin + 1e-12 * (1.0 + amin))
                order = np.lexsort((idxs[tied], kinds[tied]))
                pick = tied[order[0]]
                alpha = amin
                blocking = (int(kinds[pick]), int(idxs[pick]))
        if is_ray and blocking is None:
            raise UnboundedError("objective decreases without bound along a feasible ray")
        if np.isfinite(alpha) and alpha > 0.0:
            self.x += alpha * d
            self.grad += alpha * (self.q_diag * d if self.q_diag is not None else p.Q @ d)
            if self.m:
                self.slack -= alpha * denom
        if blocking is not None:
            kind, idx = blocking
            if kind == _ROW:
                self.row_active[idx] = True
                self.slack[idx] = 0.0
            elif kind == _LB:
                self.at_lb[idx] = True
                self.x[idx] = p.lb[idx]
            else:
                self.at_ub[idx] = True
                self.x[idx] = p.ub[idx]
            row = self._row_vector(kind, idx)
            self._push_work(kind, idx, row)
            self._null_add_row(row)

    def _build_solution(self, status: str) -> QpSolution:
        nu = self._final_nu if status == "optimal" else self._duals()
        mu, lam_rows, lb_d, ub_d = self._split_duals(nu)
        lam_rows[np.abs(lam_rows) < 1e-14] = 0.0
        sol = QpSolution(
            x=self.x.copy(),
            objective=self.p.objective(self.x),
            ineq_duals=lam_rows,
            eq_duals=mu,
            lb_duals=lb_d,
            ub_duals=ub_d,
            status=status,
            iterations=self.iterations,
            ineq_labels=tuple(self.p.ineq_labels),
            eq_labels=tuple(self.p.eq_labels),
        )
        sol.residuals = check_kkt(self.p, sol, tol=max(self.s.feas_tol, self.s.opt_tol))
        return sol


def solve_qp(
    problem: QpProblem,
    settings: Optional[SolverSettings] = None,
    x0: Optional[np.ndarray] = None,
) -> QpSolution:
    """Solve the QP and return primal/dual solution with KKT residuals.

    ``x0`` is an optional starting point; it is used when feasible (within
    ``feas_tol``) and silently replaced by a phase-1 point otherwise.

    Raises ``NotPsdError``, ``InfeasibleError``, ``UnboundedError`` or
    ``MaxIterationsError`` (the latter carries the best iterate found).
    """
    s = settings or SolverSettings()
    if s.check_psd:
        floor = _psd_floor(problem.Q)
        if floor < -s.psd_tol:
            raise NotPsdError(f"Q has eigenvalue {floor:.3e} below -{s.psd_tol:.0e}")
    # Symmetrize once so gradients and subproblems agree.
    if problem.Q.size and not np.array_equal(problem.Q, problem.Q.T):
        problem = dataclasses.replace(problem, Q=0.5 * (problem.Q + problem.Q.T))
    if x0 is not None:
        x0 = np.clip(np.asarray(x0, dtype=float).ravel(), problem.lb, problem.ub)
        if _feasibility_violation(problem, x0) > s.feas_tol:
            x0 = None
    if x0 is None:
        x0 = _phase1(problem)
    core = _ActiveSet(problem, s, x0)
    return core.solve()
