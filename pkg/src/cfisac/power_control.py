"""Power-control algorithms.

Four allocation rules over the amplitude vector b (stacked per transmit AP as
(zeta[:, m], nu[:, m])):

* upc -- uniform baseline: each AP splits its budget half communication /
  half sensing over its served UEs and assigned regions.
* jopc -- joint optimization: outer bisection on the prioritized metric
  (min SINR or min effective SNR), each probe a feasibility problem with the
  per-AP power cones C1, the SINR cones C3 and, when a sensing floor is
  active, the nonconvex effective-SNR constraint C2 handled by successive
  convex approximation (SCA) with a single relaxation slack.
* sopc -- separate designs for orthogonal time sharing: max-min SINR over
  communication amplitudes only (convex, no SCA, no sensing leakage) and
  max-min effective SNR over sensing amplitudes only.

All solves go through the in-repo SOCP kernel.  Returned allocations are
always verified a posteriori against the true (nonconvex) constraints.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError
from . import socp
from .channels import build_correlation, build_target_geometry
from .estimation import assign_pilots, build_estimation
from .comm_metrics import PowerAllocation, SinrTerms, build_beam_covariances
from .sensing import effective_snr_matrices

COMM_PRIORITIZED = "comm_prioritized"
SENSING_PRIORITIZED = "sensing_prioritized"
COMM_ONLY = "comm_only"
SENSING_ONLY = "sensing_only"

OPTIMAL = "optimal"
INFEASIBLE_AT_THRESHOLD = "infeasible_at_threshold"
NOT_CONVERGED = "not_converged"

_MAX_BISECTIONS = 60
_SOLVER_TOL = 1e-8
_VERIFY_BAND = 1e-6


@dataclass
class QosProblemSpec:
    """Which metric is maximized and which floors constrain the other one."""

    mode: str
    gamma0: float = None        # SINR floor (linear), sensing-prioritized
    gamma_bar0: float = None    # effective-SNR floor, comm-prioritized
    T: float = None             # sensing time share, separate designs
    bisection_tol: float = 1e-3
    sca_tol: float = 1e-4
    sca_max_iters: int = 30

    def validate(self):
        if self.bisection_tol <= 0 or self.sca_tol <= 0 or self.sca_max_iters < 1:
            raise ConfigurationError("tolerances must be positive")
        if self.mode == COMM_PRIORITIZED:
            if self.gamma_bar0 is None or self.gamma_bar0 < 0:
                raise ConfigurationError("comm-prioritized mode needs gamma_bar0 >= 0")
            if self.gamma0 is not None:
                raise ConfigurationError("gamma0 is not used in comm-prioritized mode")
        elif self.mode == SENSING_PRIORITIZED:
            if self.gamma0 is None or self.gamma0 < 0:
                raise ConfigurationError("sensing-prioritized mode needs gamma0 >= 0")
            if self.gamma_bar0 is not None:
                raise ConfigurationError("gamma_bar0 is not used in sensing-prioritized mode")
        elif self.mode in (COMM_ONLY, SENSING_ONLY):
            if self.gamma0 is not None or self.gamma_bar0 is not None:
                raise ConfigurationError("separate designs take no QoS floors")
            if self.T is None:
                raise ConfigurationError("separate designs need the time share T")
            if not (0.0 <= self.T <= 1.0):
                raise DomainError("time share T must lie in [0, 1]")
        else:
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        return self


@dataclass
class OptimizationResult:
    allocation: PowerAllocation
    objective: float
    status: str
    trace: list = field(default_factory=list)


@dataclass
class DropStats:
    """Everything an optimizer needs about one drop (all long-term statistics)."""

    scenario: object
    correlation: object
    pilots: object
    estimation: object
    geometry: object
    beam_cov: object
    quadratic: object      # effective-SNR quadratic form
    terms: SinrTerms       # SINR coefficients with sensing leakage
    terms_comm: SinrTerms  # SINR coefficients without sensing leakage

    @property
    def esnr_scale(self):
        cfg = self.scenario.config
        return cfg.N * self.quadratic.tau_s * cfg.sigma_z_sq


def build_drop_stats(scenario, rng):
    """Assemble all per-drop statistics used by the optimizers."""
    cfg = scenario.config
    correlation = build_correlation(scenario)
    pilots = assign_pilots(cfg.K, cfg.tau_p)
    estimation = build_estimation(correlation, pilots, cfg.pilot_power, cfg.sigma_z_sq)
    geometry = build_target_geometry(scenario)
    beam_cov = build_beam_covariances(scenario, rng)
    quadratic = effective_snr_matrices(scenario, geometry, estimation, cfg.tau_s)
    terms = SinrTerms(scenario, correlation, estimation, pilots, beam_cov)
    terms_comm = SinrTerms(scenario, correlation, estimation, pilots, beam_cov,
                           include_sensing=False)
    return DropStats(scenario=scenario, correlation=correlation, pilots=pilots,
                     estimation=estimation, geometry=geometry, beam_cov=beam_cov,
                     quadratic=quadratic, terms=terms, terms_comm=terms_comm)


# ---------------------------------------------------------------------------
# Amplitude-vector plumbing.
# ---------------------------------------------------------------------------


def _dims(scenario):
    cfg = scenario.config
    return cfg.K, cfg.S, scenario.n_tx, cfg.K + cfg.S


def free_masks(scenario):
    """(comm, sensing) masks of the structurally free entries of b."""
    K, S, T, w = _dims(scenario)
    comm = np.zeros(T * w, dtype=bool)
    sense = np.zeros(T * w, dtype=bool)
    for m in range(T):
        comm[m * w + np.asarray(scenario.served_ues[m], dtype=int)] = True
        sense[m * w + K + np.asarray(scenario.beam_sets[m], dtype=int)] = True
    return comm, sense


def _expand(x, free_idx, n_full):
    b = np.zeros(n_full)
    b[free_idx] = x
    return b


def _sanitize(b, scenario, free_mask):
    """Clip to the structural zeros, nonnegativity and the exact power budget."""
    K, S, T, w = _dims(scenario)
    b = np.where(free_mask, np.clip(b, 0.0, None), 0.0)
    P = scenario.config.P_m
    for m in range(T):
        block = b[m * w:(m + 1) * w]
        p = block @ block
        if p > P:
            block *= np.sqrt(P / p)
    return b


def _min_sinr(b, stats, terms):
    K, S, T, w = _dims(stats.scenario)
    alloc = PowerAllocation.from_b(b, K, S, T)
    return float(terms.sinr(alloc, stats.scenario.config.sigma_z_sq).min())


def _qvals(quadratic, b):
    S, T, w = quadratic.F.shape[0], quadratic.F.shape[1], quadratic.F.shape[2]
    B = b.reshape(T, w)
    return np.einsum("ma,imab,mb->i", B, quadratic.F, B)


def _min_esnr(b, stats):
    return float(_qvals(stats.quadratic, b).min() / stats.esnr_scale)


# ---------------------------------------------------------------------------
# Constraint builders.
# ---------------------------------------------------------------------------


def build_soc_c3(terms, sigma_z_sq, gamma0):
    """Per-UE second-order cones equivalent to SINR_k >= gamma0.

    Each cone reads ||rho_k(b)|| <= sqrt(1 + 1/gamma0) * numerator(b), where
    rho_k stacks the beamforming-uncertainty terms, the real and imaginary
    parts of the coherent copilot terms, the sensing-leakage terms, the noise
    standard deviation and the numerator itself; its squared norm is exactly
    denominator + numerator^2 of the closed-form SINR.
    """
    if gamma0 <= 0.0:
        raise DomainError("SINR floor must be strictly positive")
    K, _, T = terms.coef_a.shape
    S = terms.coef_c.shape[1]
    w = K + S
    n = T * w
    num_cols = np.arange(T) * w
    cones = []
    for k in range(K):
        rows, offsets = [], []
        jj, mm = np.nonzero(terms.coef_a[k])
        for j, m in zip(jj, mm):
            r = np.zeros(n)
            r[m * w + j] = terms.coef_a[k, j, m]
            rows.append(r)
            offsets.append(0.0)
        for j in np.flatnonzero(terms.copilot[k]):
            re = np.zeros(n)
            im = np.zeros(n)
            re[num_cols + j] = terms.coef_b[k, j].real
            im[num_cols + j] = terms.coef_b[k, j].imag
            rows.extend([re, im])
            offsets.extend([0.0, 0.0])
        ii, mm = np.nonzero(terms.coef_c[k])
        for i, m in zip(ii, mm):
            r = np.zeros(n)
            r[m * w + K + i] = terms.coef_c[k, i, m]
            rows.append(r)
            offsets.append(0.0)
        rows.append(np.zeros(n))
        offsets.append(np.sqrt(sigma_z_sq))
        num_row = np.zeros(n)
        num_row[num_cols + k] = terms.coef_num[k]
        rows.append(num_row)
        offsets.append(0.0)
        c = np.sqrt(1.0 + 1.0 / gamma0) * num_row
        cones.append((np.array(rows), np.array(offsets), c, 0.0))
    return cones


def _c1_cones(scenario, free_mask):
    """Per-AP power budgets as cones ||b_m|| <= sqrt(P_m)."""
    K, S, T, w = _dims(scenario)
    root_p = np.sqrt(scenario.config.P_m)
    cones = []
    n = T * w
    for m in range(T):
        idx = np.flatnonzero(free_mask[m * w:(m + 1) * w]) + m * w
        A = np.zeros((len(idx), n))
        A[np.arange(len(idx)), idx] = 1.0
        cones.append((A, np.zeros(len(idx)), np.zeros(n), root_p))
    return cones


def sca_linearize(quadratic, b_prev, region):
    """Value and gradient of q_i(b) = sum_m b_m^T F[i, m] b_m at b_prev.

    The first-order expansion q(b_prev) + grad^T (b - b_prev) under-estimates
    q everywhere because q is convex (F positive semidefinite).
    """
    T, w = quadratic.F.shape[1], quadratic.F.shape[2]
    B = b_prev.reshape(T, w)
    Fi = quadratic.F[region]
    q = float(np.einsum("ma,mab,mb->", B, Fi, B))
    grad = 2.0 * np.einsum("mab,mb->ma", Fi, B).ravel()
    return q, grad


def _reduced_problem(cones_full, free_idx, objective=None, with_slack=False,
                     linear=()):
    n_red = len(free_idx) + (1 if with_slack else 0)
    socs = []
    for A, b, c, d in cones_full:
        Ar = A[:, free_idx]
        cr = c[free_idx]
        if with_slack:
            Ar = np.hstack([Ar, np.zeros((Ar.shape[0], 1))])
            cr = np.concatenate([cr, [0.0]])
        # Cone membership is invariant under positive scaling; normalizing
        # each cone to unit coefficient scale keeps the solver tolerances
        # relative (the raw C3 coefficients are on the order of the noise
        # standard deviation).
        s = max(np.abs(Ar).max(initial=0.0), np.abs(b).max(initial=0.0),
                np.abs(cr).max(initial=0.0), abs(d))
        if s > 0.0:
            Ar, b, cr, d = Ar / s, b / s, cr / s, d / s
        socs.append((Ar, b, cr, d))
    return socp.SocpProblem(
        n_vars=n_red,
        objective=objective,
        soc_constraints=socs,
        linear_inequalities=list(linear),
        nonneg_mask=np.ones(n_red, dtype=bool),
    )


# ---------------------------------------------------------------------------
# Feasibility probe: C1 and C3 are handled exactly; the effective-SNR floor
# C2 (a "convex quadratic >= level" constraint, hence a nonconvex set) is
# handled by SCA with a single nonnegative slack on the linearized rows only,
# which makes the true min_i q_i(b) non-decreasing across iterations.
# ---------------------------------------------------------------------------


def feasibility_probe(stats, terms, free_mask, b_start, sinr_floor=None,
                      snr_level=None, sca_tol=1e-4, sca_max_iters=30):
    """Search a point satisfying {C1, C3(sinr_floor), C2(snr_level)}.

    Returns (feasible, point, trace); trace holds the verified min effective
    SNR after each SCA iteration.  A False verdict means the SCA inner
    approximation could not certify the level (sufficient, not necessary).
    """
    scenario = stats.scenario
    cfg = scenario.config
    K, S, T, w = _dims(scenario)
    n_full = T * w
    free_idx = np.flatnonzero(free_mask)
    sigma = cfg.sigma_z_sq

    cones = _c1_cones(scenario, free_mask)
    if sinr_floor is not None and sinr_floor > 0.0:
        cones += build_soc_c3(terms, sigma, sinr_floor)

    b0 = np.where(free_mask, np.clip(b_start, 0.0, None), 0.0)
    if sinr_floor is not None and sinr_floor > 0.0 \
            and _min_sinr(b0, stats, terms) < sinr_floor * (1.0 - 1e-12):
        problem = _reduced_problem(cones, free_idx)
        sol = socp.solve_feasibility(problem, feas_tol=_SOLVER_TOL, x0=b0[free_idx])
        if sol.status != socp.OPTIMAL:
            return False, None, []
        b0 = _expand(np.clip(sol.x, 0.0, None), free_idx, n_full)

    if snr_level is None or snr_level <= 0.0:
        return True, b0, []

    level_q = snr_level * stats.esnr_scale
    minq = float(_qvals(stats.quadratic, b0).min())
    trace = [minq / stats.esnr_scale]
    for _ in range(sca_max_iters):
        if minq >= level_q * (1.0 - 1e-9):
            return True, b0, trace
        linear = []
        for i in range(S):
            q0, grad = sca_linearize(stats.quadratic, b0, i)
            g = np.concatenate([-grad[free_idx] / level_q, [-1.0]])
            h = (q0 - grad @ b0) / level_q - 1.0
            linear.append((g, h))
        objective = np.zeros(len(free_idx) + 1)
        objective[-1] = 1.0
        problem = _reduced_problem(cones, free_idx, objective=objective,
                                   with_slack=True, linear=linear)
        s0 = max(0.0, 1.0 - minq / level_q) + 1e-3
        sol = socp.solve(problem, feas_tol=_SOLVER_TOL, assume_feasible=True,
                         x0=np.concatenate([b0[free_idx], [s0]]))
        if sol.status != socp.OPTIMAL:
            return False, b0, trace
        b_new = _expand(np.clip(sol.x[:-1], 0.0, None), free_idx, n_full)
        new_minq = float(_qvals(stats.quadratic, b_new).min())
        if new_minq < minq:
            # The inner approximation cannot regress beyond solver noise;
            # treat it as a stall.
            return False, b0, trace
        b0, gain, minq = b_new, new_minq - minq, new_minq
        trace.append(minq / stats.esnr_scale)
        if minq >= level_q * (1.0 - 1e-9):
            return True, b0, trace
        if gain <= sca_tol * max(minq, 1e-300):
            return False, b0, trace
    return False, b0, trace


# ---------------------------------------------------------------------------
# Allocation rules.
# ---------------------------------------------------------------------------


def upc(scenario):
    """Uniform baseline: half the budget per task, donated when a set is empty."""
    alloc = PowerAllocation.zeros(scenario)
    P = scenario.config.P_m
    for m in range(scenario.n_tx):
        ues = np.asarray(scenario.served_ues[m], dtype=int)
        regions = np.asarray(scenario.beam_sets[m], dtype=int)
        if len(ues) and len(regions):
            p_comm, p_sense = P / 2.0, P / 2.0
        elif len(ues):
            p_comm, p_sense = P, 0.0
        elif len(regions):
            p_comm, p_sense = 0.0, P
        else:
            continue
        if len(ues):
            alloc.zeta[ues, m] = np.sqrt(p_comm / len(ues))
        if len(regions):
            alloc.nu[regions, m] = np.sqrt(p_sense / len(regions))
    return alloc


def _uniform_single_task(scenario, task):
    """All power to one task, split uniformly (starting points for S-OPC)."""
    alloc = PowerAllocation.zeros(scenario)
    P = scenario.config.P_m
    for m in range(scenario.n_tx):
        if task == "comm":
            ues = np.asarray(scenario.served_ues[m], dtype=int)
            if len(ues):
                alloc.zeta[ues, m] = np.sqrt(P / len(ues))
        else:
            regions = np.asarray(scenario.beam_sets[m], dtype=int)
            if len(regions):
                alloc.nu[regions, m] = np.sqrt(P / len(regions))
    return alloc


def _bisect_maxmin(stats, terms, free_mask, objective_kind, sinr_floor, snr_floor,
                   starts, bisection_tol, sca_tol, sca_max_iters):
    """Outer bisection maximizing min SINR ('sinr') or min effective SNR ('esnr').

    `starts` are candidate allocations; any that satisfies the fixed
    constraints seeds the lower bracket, so the result can never fall below
    the best feasible start.
    """
    scenario = stats.scenario
    cfg = scenario.config
    K, S, T, w = _dims(scenario)
    sigma = cfg.sigma_z_sq

    def level_of(b):
        if objective_kind == "sinr":
            return _min_sinr(b, stats, terms)
        return _min_esnr(b, stats)

    def fixed_ok(b):
        if objective_kind == "sinr":
            if snr_floor is None or snr_floor <= 0.0:
                return True
            return _min_esnr(b, stats) >= snr_floor * (1.0 - _VERIFY_BAND)
        if sinr_floor is None or sinr_floor <= 0.0:
            return True
        return _min_sinr(b, stats, terms) >= sinr_floor * (1.0 - _VERIFY_BAND)

    def run_probe(level, b_from):
        if objective_kind == "sinr":
            return feasibility_probe(stats, terms, free_mask, b_from,
                                     sinr_floor=level, snr_level=snr_floor,
                                     sca_tol=sca_tol, sca_max_iters=sca_max_iters)
        return feasibility_probe(stats, terms, free_mask, b_from,
                                 sinr_floor=sinr_floor, snr_level=level,
                                 sca_tol=sca_tol, sca_max_iters=sca_max_iters)

    best_b, best_level = None, -np.inf
    for cand in starts:
        b = _sanitize(cand.to_b(), scenario, free_mask)
        if not fixed_ok(b):
            continue
        lvl = level_of(b)
        if lvl > best_level:
            best_b, best_level = b, lvl
    if best_b is None:
        ok, b0, _ = run_probe(0.0, upc(scenario).to_b())
        if not ok:
            return OptimizationResult(allocation=upc(scenario), objective=np.nan,
                                      status=INFEASIBLE_AT_THRESHOLD, trace=[])
        b0 = _sanitize(b0, scenario, free_mask)
        best_b, best_level = b0, level_of(b0)

    # Safe upper bounds on the max-min objective: per entity, bound its metric
    # by giving every AP its full budget; the min over entities bounds min-max.
    if objective_kind == "sinr":
        num_max = terms.coef_num @ np.full(T, np.sqrt(cfg.P_m))
        hi = float((num_max ** 2).min() / sigma)
    else:
        lam_max = stats.quadratic.F.max(axis=(2, 3))  # diagonal PSD blocks
        hi = float((lam_max @ np.full(T, cfg.P_m)).min() / stats.esnr_scale)
    lo = max(best_level, 0.0)
    hi = max(hi, lo * (1.0 + 10.0 * bisection_tol))
    trace = [best_level]

    iters = 0
    while iters < _MAX_BISECTIONS:
        if hi - lo <= bisection_tol * max(hi, 1e-30):
            # The refusal that set `hi` may have come from an earlier
            # incumbent; the probe verdict depends on its starting point
            # (the SCA is a local method).  Re-probe the bracket top from
            # the final point and re-arm the bisection if it now passes.
            ok, b, _ = run_probe(hi, best_b)
            iters += 1
            if not ok:
                break
            b = _sanitize(b, scenario, free_mask)
            lvl = level_of(b)
            if fixed_ok(b) and lvl > best_level:
                best_b, best_level = b, lvl
            lo = max(lo, min(lvl, hi))
            hi = max(hi, lo) * (1.0 + 10.0 * bisection_tol)
            trace.append(best_level)
            continue
        mid = 0.5 * (lo + hi)
        ok, b, _ = run_probe(mid, best_b)
        if ok:
            b = _sanitize(b, scenario, free_mask)
            lvl = level_of(b)
            if fixed_ok(b) and lvl > best_level:
                best_b, best_level = b, lvl
            lo = mid
        else:
            hi = mid
        trace.append(best_level)
        iters += 1

    alloc = PowerAllocation.from_b(best_b, K, S, T)
    status = OPTIMAL if fixed_ok(best_b) else NOT_CONVERGED
    return OptimizationResult(allocation=alloc, objective=best_level,
                              status=status, trace=trace)


def jopc(spec, stats, extra_starts=()):
    """Joint power control maximizing the prioritized metric under the floors."""
    spec.validate()
    if spec.mode not in (COMM_PRIORITIZED, SENSING_PRIORITIZED):
        raise ConfigurationError("jopc handles the prioritized modes only")
    comm_mask, sense_mask = free_masks(stats.scenario)
    free = comm_mask | sense_mask
    starts = [upc(stats.scenario)] + list(extra_starts)
    if spec.mode == COMM_PRIORITIZED:
        return _bisect_maxmin(stats, stats.terms, free, "sinr",
                              sinr_floor=None, snr_floor=spec.gamma_bar0,
                              starts=starts, bisection_tol=spec.bisection_tol,
                              sca_tol=spec.sca_tol, sca_max_iters=spec.sca_max_iters)
    return _bisect_maxmin(stats, stats.terms, free, "esnr",
                          sinr_floor=spec.gamma0, snr_floor=None,
                          starts=starts, bisection_tol=spec.bisection_tol,
                          sca_tol=spec.sca_tol, sca_max_iters=spec.sca_max_iters)


def sopc(spec, stats):
    """Separate designs for orthogonal time sharing.

    Returns (communication result, sensing result).  The allocations do not
    depend on the time share T; T only rescales the reported rates, except
    that T = 0 turns the sensing allocation off entirely.
    """
    spec.validate()
    if spec.mode not in (COMM_ONLY, SENSING_ONLY):
        raise ConfigurationError("sopc handles the separate modes only")
    scenario = stats.scenario
    comm_mask, sense_mask = free_masks(scenario)
    comm_res = _bisect_maxmin(
        stats, stats.terms_comm, comm_mask, "sinr", sinr_floor=None,
        snr_floor=None, starts=[_uniform_single_task(scenario, "comm")],
        bisection_tol=spec.bisection_tol, sca_tol=spec.sca_tol,
        sca_max_iters=spec.sca_max_iters,
    )
    if spec.T == 0.0:
        sense_res = OptimizationResult(allocation=PowerAllocation.zeros(scenario),
                                       objective=0.0, status=OPTIMAL, trace=[])
    else:
        sense_res = _bisect_maxmin(
            stats, stats.terms, sense_mask, "esnr", sinr_floor=None,
            snr_floor=None, starts=[_uniform_single_task(scenario, "sense")],
            bisection_tol=spec.bisection_tol, sca_tol=spec.sca_tol,
            sca_max_iters=spec.sca_max_iters,
        )
    return comm_res, sense_res
