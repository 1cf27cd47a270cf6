"""Self-contained second-order-cone programming kernel.

Solves small dense problems

    minimize    objective^T x
    subject to  ||A_i x + b_i|| <= c_i^T x + d_i      (second-order cones)
                g_j^T x <= h_j                        (linear inequalities)
                x_v >= 0 for flagged variables

with a primal-dual interior-point method using Nesterov-Todd scaling and a
Mehrotra predictor-corrector step.  Infeasibility is certified by a slack
phase: minimize a single slack t >= 0 added to every constraint; the problem
is feasible exactly when the minimal slack is (numerically) zero.

The kernel is deliberately dense and single-threaded; the problems produced
by the power-control routines have at most a few hundred variables.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max_iterations"

_STEP_DAMP = 0.99
_TINY = 1e-14


@dataclass
class SocpProblem:
    """Dense second-order-cone program data.

    soc_constraints is a list of (A, b, c, d) meaning ||Ax + b|| <= c^T x + d;
    linear_inequalities a list of (g, h) meaning g^T x <= h; nonneg_mask flags
    variables constrained to be nonnegative.
    """

    n_vars: int
    objective: np.ndarray = None
    soc_constraints: list = field(default_factory=list)
    linear_inequalities: list = field(default_factory=list)
    nonneg_mask: np.ndarray = None

    def __post_init__(self):
        n = self.n_vars
        if n < 1:
            raise ConfigurationError("problem needs at least one variable")
        if self.objective is None:
            self.objective = np.zeros(n)
        self.objective = np.asarray(self.objective, dtype=float)
        if self.objective.shape != (n,):
            raise ConfigurationError("objective length does not match n_vars")
        if self.nonneg_mask is None:
            self.nonneg_mask = np.zeros(n, dtype=bool)
        self.nonneg_mask = np.asarray(self.nonneg_mask, dtype=bool)
        if self.nonneg_mask.shape != (n,):
            raise ConfigurationError("nonneg_mask length does not match n_vars")
        socs = []
        for A, b, c, d in self.soc_constraints:
            A = np.atleast_2d(np.asarray(A, dtype=float))
            b = np.atleast_1d(np.asarray(b, dtype=float))
            c = np.asarray(c, dtype=float)
            d = float(d)
            if A.shape[1] != n or c.shape != (n,) or b.shape != (A.shape[0],):
                raise ConfigurationError("inconsistent cone constraint dimensions")
            socs.append((A, b, c, d))
        self.soc_constraints = socs
        lins = []
        for g, h in self.linear_inequalities:
            g = np.asarray(g, dtype=float)
            if g.shape != (n,):
                raise ConfigurationError("inconsistent linear constraint dimensions")
            lins.append((g, float(h)))
        self.linear_inequalities = lins
        for arr in [self.objective] + [A for A, *_ in socs] + [b for _, b, *_ in socs] \
                + [c for *_, c, _ in socs] + [g for g, _ in lins]:
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError("problem data must be finite")


@dataclass
class SocpSolution:
    status: str
    x: np.ndarray
    objective_value: float
    max_violation: float
    iterations: int = 0
    kkt_residual: float = np.inf  # max of primal/dual residuals and rel. gap


def max_violation(problem, x):
    """Largest constraint violation of a point (0 when feasible)."""
    viol = 0.0
    for A, b, c, d in problem.soc_constraints:
        viol = max(viol, np.linalg.norm(A @ x + b) - (c @ x + d))
    for g, h in problem.linear_inequalities:
        viol = max(viol, g @ x - h)
    if np.any(problem.nonneg_mask):
        viol = max(viol, -x[problem.nonneg_mask].min(initial=0.0))
    return float(viol)


def dump_problem(problem, path):
    """Plain-text dump for cross-checking with external tools."""
    with open(path, "w") as fh:
        fh.write(f"n_vars {problem.n_vars}\n")
        fh.write("objective " + " ".join(f"{v:.17g}" for v in problem.objective) + "\n")
        fh.write("nonneg " + " ".join(str(int(v)) for v in problem.nonneg_mask) + "\n")
        for g, h in problem.linear_inequalities:
            fh.write("lin " + " ".join(f"{v:.17g}" for v in g) + f" <= {h:.17g}\n")
        for A, b, c, d in problem.soc_constraints:
            fh.write(f"soc rows {A.shape[0]}\n")
            for row, bv in zip(A, b):
                fh.write("  A " + " ".join(f"{v:.17g}" for v in row) + f" b {bv:.17g}\n")
            fh.write("  c " + " ".join(f"{v:.17g}" for v in c) + f" d {d:.17g}\n")


# ---------------------------------------------------------------------------
# Conic canonical form:  minimize q^T x  s.t.  G x + s = h,  s in K,
# K = R_+^l x SOC(dim_1) x ... Each block of (G, h) is scaled to unit
# magnitude, which preserves cone membership and conditions the iteration.
# ---------------------------------------------------------------------------


def _conic_data(problem):
    n = problem.n_vars
    rows_G, rows_h = [], []
    for v in np.flatnonzero(problem.nonneg_mask):
        g = np.zeros(n)
        g[v] = -1.0
        rows_G.append(g)
        rows_h.append(0.0)
    for g, h in problem.linear_inequalities:
        scale = max(np.abs(g).max(initial=0.0), abs(h), _TINY)
        rows_G.append(g / scale)
        rows_h.append(h / scale)
    soc_G, soc_h, soc_dims = [], [], []
    for A, b, c, d in problem.soc_constraints:
        scale = max(np.abs(A).max(initial=0.0), np.abs(b).max(initial=0.0),
                    np.abs(c).max(initial=0.0), abs(d), _TINY)
        if A.shape[0] == 0:
            rows_G.append(-c / scale)
            rows_h.append(d / scale)
            continue
        soc_G.append(np.vstack([-c[None, :], -A]) / scale)
        soc_h.append(np.concatenate([[d], b]) / scale)
        soc_dims.append(A.shape[0] + 1)
    l = len(rows_G)
    parts_G = ([np.array(rows_G)] if rows_G else []) + soc_G
    parts_h = ([np.array(rows_h)] if rows_h else []) + soc_h
    if not parts_G:
        raise ConfigurationError("problem has no constraints")
    G = np.vstack(parts_G)
    h = np.concatenate(parts_h)
    return G, h, l, soc_dims


def _jmul(u):
    out = u.copy()
    out[1:] = -out[1:]
    return out


def _soc_det(u):
    return u[0] ** 2 - u[1:] @ u[1:]


class _Scaling:
    """Nesterov-Todd scaling data for the current interior pair (s, z)."""

    def __init__(self, s, z, l, soc_dims):
        self.l = l
        self.soc_dims = soc_dims
        self.w_lin = np.sqrt(s[:l] / z[:l]) if l else np.zeros(0)
        self.lam = np.empty_like(s)
        self.lam[:l] = np.sqrt(s[:l] * z[:l])
        self.blocks = []
        off = l
        for dim in soc_dims:
            sb, zb = s[off:off + dim], z[off:off + dim]
            ds, dz = _soc_det(sb), _soc_det(zb)
            if ds <= 0.0 or dz <= 0.0 or sb[0] <= 0.0 or zb[0] <= 0.0:
                raise NumericalError("iterate left the cone interior")
            sbar, zbar = sb / np.sqrt(ds), zb / np.sqrt(dz)
            gsq = (1.0 + sbar @ zbar) / 2.0
            if not gsq > 0.0:
                raise NumericalError("scaling point is not defined")
            gamma = np.sqrt(gsq)
            wbar = (sbar + _jmul(zbar)) / (2.0 * gamma)
            beta = (ds / dz) ** 0.25
            w = beta * wbar
            q = (w + beta * np.eye(dim)[0]) / np.sqrt(2.0 * (w[0] + beta))
            self.lam[off:off + dim] = 2.0 * q * (q @ zb) - beta * _jmul(zb)
            self.blocks.append((off, dim, w, beta, q))
            off += dim

    def apply_W(self, v):
        out = v.copy()
        out[:self.l] *= self.w_lin
        for off, dim, w, beta, q in self.blocks:
            vb = v[off:off + dim]
            out[off:off + dim] = 2.0 * q * (q @ vb) - beta * _jmul(vb)
        return out

    def apply_Winv(self, v):
        out = v.copy()
        out[:self.l] /= self.w_lin
        for off, dim, w, beta, q in self.blocks:
            vb = v[off:off + dim]
            qi = _jmul(q) / beta
            out[off:off + dim] = 2.0 * qi * (qi @ vb) - _jmul(vb) / beta
        return out

    def apply_Tinv(self, V):
        """(W^T W)^-1 V for a vector or a (m, k) matrix."""
        out = np.array(V, dtype=float, copy=True)
        if out.ndim == 1:
            out = out[:, None]
            squeeze = True
        else:
            squeeze = False
        out[:self.l] /= (self.w_lin ** 2)[:, None]
        for off, dim, w, beta, q in self.blocks:
            vb = out[off:off + dim]
            wi = _jmul(w) / beta ** 2
            jv = vb.copy()
            jv[1:] = -jv[1:]
            out[off:off + dim] = 2.0 * np.outer(wi, wi @ vb) - jv / beta ** 2
        return out[:, 0] if squeeze else out

    def jprod(self, u, v):
        out = u * v
        for off, dim, *_ in self.blocks:
            ub, vb = u[off:off + dim], v[off:off + dim]
            out[off] = ub @ vb
            out[off + 1:off + dim] = ub[0] * vb[1:] + vb[0] * ub[1:]
        return out

    def jdiv_lam(self, v):
        """Solve lam o u = v for u."""
        out = v.copy()
        out[:self.l] /= self.lam[:self.l]
        for off, dim, *_ in self.blocks:
            lb, vb = self.lam[off:off + dim], v[off:off + dim]
            det = _soc_det(lb)
            u0 = (lb[0] * vb[0] - lb[1:] @ vb[1:]) / det
            out[off] = u0
            out[off + 1:off + dim] = (vb[1:] - u0 * lb[1:]) / lb[0]
        return out


def _unit_e(m, l, soc_dims):
    e = np.zeros(m)
    e[:l] = 1.0
    off = l
    for dim in soc_dims:
        e[off] = 1.0
        off += dim
    return e


def _max_step(u, du, l, soc_dims):
    alpha = np.inf
    neg = du[:l] < 0.0
    if np.any(neg):
        alpha = np.min(-u[:l][neg] / du[:l][neg])
    off = l
    for dim in soc_dims:
        ub, db = u[off:off + dim], du[off:off + dim]
        off += dim
        if db[0] < 0.0:
            # The boundary is always met no later than where u0 + alpha*d0
            # hits zero; this guards against the negative-cone sheet when
            # the discriminant below is lost to roundoff.
            alpha = min(alpha, -ub[0] / db[0])
        a = _soc_det(db)
        b = 2.0 * (ub[0] * db[0] - ub[1:] @ db[1:])
        c = _soc_det(ub)
        if abs(a) < _TINY:
            if b < -_TINY:
                alpha = min(alpha, -c / b)
            continue
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            continue
        sq = np.sqrt(disc)
        roots = sorted([(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)])
        pos = [r for r in roots if r > 0.0]
        if pos:
            alpha = min(alpha, pos[0])
    return alpha


def _initial_point(G, h, l, soc_dims, x0):
    m, n = G.shape
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    r = h - G @ x
    s = r.copy()
    s[:l] = np.maximum(r[:l], 1.0)
    off = l
    for dim in soc_dims:
        shift = max(0.0, 1.0 + np.linalg.norm(r[off + 1:off + dim]) - r[off])
        s[off] = r[off] + shift
        off += dim
    z = _unit_e(m, l, soc_dims)
    return x, s, z


def _ipm(G, h, q, l, soc_dims, max_iters, feas_tol, gap_tol, x0=None):
    """Infeasible-start Mehrotra predictor-corrector on the canonical form.

    Returns (x, converged, best_score, iterations); best_score is the largest
    of the primal residual, dual residual and relative gap at the returned x.
    """
    m, n = G.shape
    rho = l + len(soc_dims)
    x, s, z = _initial_point(G, h, l, soc_dims, x0)
    h_norm = max(1.0, np.linalg.norm(h))
    q_norm = max(1.0, np.linalg.norm(q))
    best_x, best_score = x.copy(), np.inf
    tiny_steps = 0

    for it in range(max_iters):
        rz = G @ x + s - h
        rx = G.T @ z + q
        gap = s @ z
        mu = gap / rho
        pres = np.linalg.norm(rz) / h_norm
        dres = np.linalg.norm(rx) / q_norm
        relgap = gap / max(1.0, abs(q @ x))
        score = max(pres, dres, relgap)
        if score < best_score:
            best_score = score
            best_x = x.copy()
        if pres <= feas_tol and dres <= feas_tol and relgap <= gap_tol:
            return x, True, score, it

        try:
            scal = _Scaling(s, z, l, soc_dims)
        except NumericalError:
            break
        TiG = scal.apply_Tinv(G)
        M = G.T @ TiG
        M[np.diag_indices_from(M)] += _TINY * max(np.trace(M) / n, 1.0)
        try:
            L = np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            break

        def solve_kkt(d_s):
            # d_s is the scaled complementarity right-hand side u with
            # W^-T ds + W dz = u.
            Wu = scal.apply_W(d_s)
            rhs = -rx - G.T @ scal.apply_Tinv(rz + Wu)
            dx = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
            dz = scal.apply_Tinv(G @ dx + rz + Wu)
            ds = -rz - G @ dx
            return dx, ds, dz

        # Predictor.
        dx_a, ds_a, dz_a = solve_kkt(-scal.lam)
        alpha_a = min(1.0, _max_step(s, ds_a, l, soc_dims),
                      _max_step(z, dz_a, l, soc_dims))
        mu_aff = ((s + alpha_a * ds_a) @ (z + alpha_a * dz_a)) / rho
        sigma = float(np.clip((mu_aff / mu) ** 3, 0.0, 1.0))

        # Corrector.
        comp = -scal.jprod(scal.lam, scal.lam) \
            - scal.jprod(scal.apply_Winv(ds_a), scal.apply_W(dz_a)) \
            + sigma * mu * _unit_e(m, l, soc_dims)
        dx, ds, dz = solve_kkt(scal.jdiv_lam(comp))
        alpha = _STEP_DAMP * min(_max_step(s, ds, l, soc_dims),
                                 _max_step(z, dz, l, soc_dims))
        alpha = min(1.0, alpha)
        if alpha < 1e-12:
            tiny_steps += 1
            if tiny_steps >= 2:
                break
        else:
            tiny_steps = 0
        x += alpha * dx
        s += alpha * ds
        z += alpha * dz
    return best_x, False, best_score, max_iters


def _minimize(problem, feas_tol, opt_tol, max_iters, x0):
    G, h, l, soc_dims = _conic_data(problem)
    ipm_feas = min(1e-9, feas_tol)
    x, converged, score, iters = _ipm(
        G, h, problem.objective, l, soc_dims, max_iters, ipm_feas, opt_tol, x0
    )
    if not converged and score <= max(feas_tol, 100.0 * opt_tol):
        converged = True
    status = OPTIMAL if converged else MAX_ITERATIONS
    return SocpSolution(
        status=status,
        x=x,
        objective_value=float(problem.objective @ x),
        max_violation=max_violation(problem, x),
        iterations=iters,
        kkt_residual=float(score),
    )


def _slack_problem(problem):
    """Relax every constraint by one shared nonnegative slack t (last var)."""
    n = problem.n_vars
    socs = []
    for A, b, c, d in problem.soc_constraints:
        A2 = np.hstack([A, np.zeros((A.shape[0], 1))])
        c2 = np.concatenate([c, [1.0]])
        socs.append((A2, b, c2, d))
    lins = []
    for g, h in problem.linear_inequalities:
        lins.append((np.concatenate([g, [-1.0]]), h))
    for v in np.flatnonzero(problem.nonneg_mask):
        g = np.zeros(n + 1)
        g[v] = -1.0
        g[-1] = -1.0
        lins.append((g, 0.0))
    mask = np.zeros(n + 1, dtype=bool)
    mask[-1] = True
    obj = np.zeros(n + 1)
    obj[-1] = 1.0
    return SocpProblem(n_vars=n + 1, objective=obj, soc_constraints=socs,
                       linear_inequalities=lins, nonneg_mask=mask)


def solve_feasibility(problem, feas_tol=1e-7, opt_tol=1e-9, max_iters=100, x0=None):
    """Minimize the shared relaxation slack; feasible iff the slack vanishes.

    The returned objective_value is the minimal slack; when it is within
    feas_tol the returned point satisfies the original constraints (up to
    feas_tol) and the status is `optimal`, otherwise `infeasible`.
    """
    relaxed = _slack_problem(problem)
    if x0 is not None:
        x0 = np.concatenate([x0, [max_violation(problem, x0) + 1.0]])
    sol = _minimize(relaxed, feas_tol, opt_tol, max_iters, x0)
    if sol.status == MAX_ITERATIONS and x0 is not None:
        # A warm start near the feasibility boundary can stall the interior
        # point iteration; a cold start often recovers.
        retry = _minimize(relaxed, feas_tol, opt_tol, max_iters, None)
        if retry.status == OPTIMAL or retry.kkt_residual < sol.kkt_residual:
            sol = retry
    slack = float(sol.x[-1])
    x = sol.x[:-1]
    if sol.status != OPTIMAL:
        status = MAX_ITERATIONS
    elif slack <= feas_tol:
        status = OPTIMAL
    else:
        status = INFEASIBLE
    return SocpSolution(status=status, x=x, objective_value=slack,
                        max_violation=max_violation(problem, x),
                        iterations=sol.iterations,
                        kkt_residual=sol.kkt_residual)


def solve(problem, feas_tol=1e-7, opt_tol=1e-9, max_iters=100,
          assume_feasible=False, x0=None):
    """Minimize the objective; infeasible problems are reported as such.

    Unless assume_feasible is set, a slack phase first certifies feasibility
    (its point also warm-starts the main solve).
    """
    if not assume_feasible:
        phase1 = solve_feasibility(problem, feas_tol=feas_tol, opt_tol=opt_tol,
                                   max_iters=max_iters, x0=x0)
        if phase1.status == MAX_ITERATIONS:
            return phase1
        if phase1.status == INFEASIBLE:
            return SocpSolution(status=INFEASIBLE, x=phase1.x,
                                objective_value=np.nan,
                                max_violation=phase1.max_violation,
                                iterations=phase1.iterations,
                                kkt_residual=phase1.kkt_residual)
        x0 = phase1.x
    sol = _minimize(problem, feas_tol, opt_tol, max_iters, x0)
    if sol.status == MAX_ITERATIONS and x0 is not None:
        # A warm start near the feasibility boundary can stall the interior
        # point iteration; a cold start often recovers.
        retry = _minimize(problem, feas_tol, opt_tol, max_iters, None)
        if retry.status == OPTIMAL or retry.kkt_residual < sol.kkt_residual:
            return retry
    return sol
