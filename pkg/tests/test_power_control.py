"""Unit tests for the power-control algorithms.

Oracles:
- [DERIVED] algebraic equivalence of the SINR cones with the closed-form
  SINR; finite-difference gradients and convexity bounds for the SCA
  linearization; dominance of optimized allocations over their uniform
  starting points; bisection certificates (the 20-drop version runs in the
  acceptance suite).
- [TRIVIAL] structure masks, sanitation, spec validation.
"""

import numpy as np
import pytest

from cfisac import streams
from cfisac.comm_metrics import PowerAllocation
from cfisac.errors import ConfigurationError, DomainError
from cfisac.power_control import (
    COMM_ONLY,
    COMM_PRIORITIZED,
    NOT_CONVERGED,
    OPTIMAL,
    SENSING_ONLY,
    SENSING_PRIORITIZED,
    QosProblemSpec,
    _min_esnr,
    _min_sinr,
    _sanitize,
    _uniform_single_task,
    build_drop_stats,
    build_soc_c3,
    feasibility_probe,
    free_masks,
    jopc,
    sca_linearize,
    sopc,
    upc,
)
from cfisac.scenario import build_scenario

from test_scenario import small_config


@pytest.fixture(scope="module")
def stats():
    cfg = small_config(M=6, K=4, S=2, N=2, tau_p=2, tau_c=25, tau_s=25,
                       n_rx_aps=1, L_serve=3, L_tx_sense=3, w_mc_samples=100)
    sc = build_scenario(cfg, seed=17)
    return build_drop_stats(sc, streams.stream(17, streams.BEAM_COVARIANCE))


def _random_structured_b(stats, rng, scale=0.3):
    sc = stats.scenario
    comm, sense = free_masks(sc)
    b = np.where(comm | sense, rng.uniform(0.0, scale, comm.size), 0.0)
    return _sanitize(b, sc, comm | sense)


# ------------------------------------------------------------------- specs

def test_spec_validation():
    QosProblemSpec(mode=COMM_PRIORITIZED, gamma_bar0=0.5).validate()
    QosProblemSpec(mode=SENSING_PRIORITIZED, gamma0=1.0).validate()
    QosProblemSpec(mode=COMM_ONLY, T=0.5).validate()
    QosProblemSpec(mode=SENSING_ONLY, T=1.0).validate()
    with pytest.raises(ConfigurationError):
        QosProblemSpec(mode=COMM_PRIORITIZED).validate()  # missing gamma_bar0
    with pytest.raises(ConfigurationError):
        QosProblemSpec(mode=COMM_PRIORITIZED, gamma_bar0=0.1, gamma0=0.1).validate()
    with pytest.raises(ConfigurationError):
        QosProblemSpec(mode=SENSING_PRIORITIZED, gamma_bar0=0.1).validate()
    with pytest.raises(ConfigurationError):
        QosProblemSpec(mode=COMM_ONLY).validate()  # missing T
    with pytest.raises(ConfigurationError):
        QosProblemSpec(mode=COMM_ONLY, T=0.5, gamma0=1.0).validate()
    with pytest.raises(DomainError):
        QosProblemSpec(mode=COMM_ONLY, T=1.5).validate()
    with pytest.raises(ConfigurationError):
        QosProblemSpec(mode="bogus").validate()
    with pytest.raises(ConfigurationError):
        QosProblemSpec(mode=COMM_ONLY, T=0.5, bisection_tol=0.0).validate()


# --------------------------------------------------------------- plumbing

def test_free_masks(stats):
    sc = stats.scenario
    comm, sense = free_masks(sc)
    assert not np.any(comm & sense)
    K, S, T = sc.config.K, sc.config.S, sc.n_tx
    assert comm.sum() == sum(len(u) for u in sc.served_ues)
    assert sense.sum() == sum(len(s) for s in sc.beam_sets)
    w = K + S
    for m in range(T):
        block_comm = np.flatnonzero(comm[m * w:(m + 1) * w])
        assert block_comm.tolist() == sorted(sc.served_ues[m].tolist())


def test_sanitize(stats):
    sc = stats.scenario
    comm, sense = free_masks(sc)
    free = comm | sense
    rng = np.random.default_rng(0)
    b = rng.normal(size=free.size)  # negatives and structural violations
    out = _sanitize(b, sc, free)
    assert np.all(out >= 0.0)
    assert np.all(out[~free] == 0.0)
    K, S, T = sc.config.K, sc.config.S, sc.n_tx
    alloc = PowerAllocation.from_b(out, K, S, T)
    alloc.check_structure(sc)
    assert np.all(alloc.per_ap_power() <= sc.config.P_m * (1 + 1e-12))


def test_upc_budget_and_split(stats):
    sc = stats.scenario
    alloc = upc(sc)
    alloc.check_structure(sc)
    for m in range(sc.n_tx):
        ues, regions = sc.served_ues[m], sc.beam_sets[m]
        power = alloc.per_ap_power()[m]
        if len(ues) or len(regions):
            assert power == pytest.approx(sc.config.P_m, rel=1e-12)
        if len(ues) and len(regions):
            assert (alloc.zeta[:, m] ** 2).sum() == pytest.approx(
                sc.config.P_m / 2, rel=1e-12)
            # Uniform split within the task.
            vals = alloc.zeta[ues, m]
            np.testing.assert_allclose(vals, vals[0])


def test_uniform_single_task(stats):
    sc = stats.scenario
    comm = _uniform_single_task(sc, "comm")
    assert np.all(comm.nu == 0.0)
    sense = _uniform_single_task(sc, "sense")
    assert np.all(sense.zeta == 0.0)
    for m in range(sc.n_tx):
        if len(sc.served_ues[m]):
            assert comm.per_ap_power()[m] == pytest.approx(sc.config.P_m)
        if len(sc.beam_sets[m]):
            assert sense.per_ap_power()[m] == pytest.approx(sc.config.P_m)


# ------------------------------------------------------------ C3 equivalence

def test_c3_cone_matches_sinr(stats):
    # [DERIVED] ||rho_k||^2 = denominator + numerator^2, so the cone holds
    # exactly when SINR_k >= gamma0.
    sc = stats.scenario
    sigma = sc.config.sigma_z_sq
    rng = np.random.default_rng(5)
    for trial in range(10):
        b = _random_structured_b(stats, rng)
        K, S, T = sc.config.K, sc.config.S, sc.n_tx
        alloc = PowerAllocation.from_b(b, K, S, T)
        sinr = stats.terms.sinr(alloc, sigma)
        for gamma0 in [sinr.min() * 0.9, sinr.min() * 1.1]:
            cones = build_soc_c3(stats.terms, sigma, gamma0)
            for k, (A, off, c, d) in enumerate(cones):
                lhs = np.linalg.norm(A @ b + off)
                rhs = c @ b + d
                holds = lhs <= rhs + 1e-12
                assert holds == (sinr[k] >= gamma0 * (1 - 1e-9)), (trial, k)
                # The squared norm is exactly denom + num^2.
                num = stats.terms.coef_num[k] @ alloc.zeta[k]
                denom = num ** 2 / sinr[k]
                assert lhs ** 2 == pytest.approx(denom + num ** 2, rel=1e-9)


def test_c3_rejects_nonpositive_floor(stats):
    with pytest.raises(DomainError):
        build_soc_c3(stats.terms, 1.0, 0.0)


# --------------------------------------------------------------------- SCA

def test_sca_linearize_gradient_and_convexity(stats):
    rng = np.random.default_rng(7)
    b0 = _random_structured_b(stats, rng)
    for region in range(stats.scenario.config.S):
        q0, grad = sca_linearize(stats.quadratic, b0, region)
        # [DERIVED] finite-difference gradient check.
        eps = 1e-6
        for idx in rng.choice(b0.size, size=5, replace=False):
            bp = b0.copy()
            bp[idx] += eps
            qp, _ = sca_linearize(stats.quadratic, bp, region)
            fd = (qp - q0) / eps
            assert grad[idx] == pytest.approx(fd, rel=1e-4, abs=1e-12)
        # Convexity: the tangent under-estimates q everywhere.
        for _ in range(5):
            b1 = _random_structured_b(stats, rng)
            q1, _ = sca_linearize(stats.quadratic, b1, region)
            tangent = q0 + grad @ (b1 - b0)
            assert tangent <= q1 + 1e-12 * max(abs(q1), 1.0)


def test_feasibility_probe_trivial_and_floors(stats):
    sc = stats.scenario
    comm, sense = free_masks(sc)
    free = comm | sense
    b_start = upc(sc).to_b()
    # No floors: immediately feasible.
    ok, b, trace = feasibility_probe(stats, stats.terms, free, b_start)
    assert ok and np.all(b >= 0.0)
    # A modest effective-SNR level reached by SCA; trace is non-decreasing.
    base = _min_esnr(b_start, stats)
    ok, b, trace = feasibility_probe(stats, stats.terms, free, b_start,
                                     snr_level=1.5 * base)
    assert ok
    assert _min_esnr(b, stats) >= 1.5 * base * (1 - 1e-6)
    assert all(t2 >= t1 - 1e-12 for t1, t2 in zip(trace, trace[1:]))
    # An absurd level is refused.
    ok, _, _ = feasibility_probe(stats, stats.terms, free, b_start,
                                 snr_level=1e9 * base)
    assert not ok


# -------------------------------------------------------------------- jopc

def test_jopc_comm_prioritized_dominates_upc(stats):
    sc = stats.scenario
    spec = QosProblemSpec(mode=COMM_PRIORITIZED, gamma_bar0=0.0)
    res = jopc(spec, stats)
    assert res.status == OPTIMAL
    b_upc = upc(sc).to_b()
    assert res.objective >= _min_sinr(b_upc, stats, stats.terms) - 1e-12
    # Objective is the verified metric of the returned allocation.
    assert res.objective == pytest.approx(
        _min_sinr(res.allocation.to_b(), stats, stats.terms), rel=1e-9)
    res.allocation.check_structure(sc, tol=1e-12)
    # Bisection certificate: the probe refuses a level 2 tolerances higher.
    comm, sense = free_masks(sc)
    ok, _, _ = feasibility_probe(
        stats, stats.terms, comm | sense, res.allocation.to_b(),
        sinr_floor=res.objective * (1 + 2 * spec.bisection_tol))
    assert not ok
    # Trace of best verified levels is non-decreasing.
    assert all(t2 >= t1 - 1e-15 for t1, t2 in zip(res.trace, res.trace[1:]))


def test_jopc_sensing_prioritized_honors_floor(stats):
    sc = stats.scenario
    b_upc = upc(sc).to_b()
    gamma0 = 0.5 * _min_sinr(b_upc, stats, stats.terms)
    spec = QosProblemSpec(mode=SENSING_PRIORITIZED, gamma0=gamma0)
    res = jopc(spec, stats)
    assert res.status == OPTIMAL
    b = res.allocation.to_b()
    assert _min_sinr(b, stats, stats.terms) >= gamma0 * (1 - 1e-6)
    assert res.objective == pytest.approx(_min_esnr(b, stats), rel=1e-9)
    # With the floor satisfied by UPC, the optimum dominates UPC's sensing SNR.
    assert res.objective >= _min_esnr(b_upc, stats) - 1e-12


def test_jopc_extra_start_dominates(stats):
    # Seeding with a strong candidate can only raise the objective.
    spec = QosProblemSpec(mode=COMM_PRIORITIZED, gamma_bar0=0.0)
    base = jopc(spec, stats)
    seeded = jopc(QosProblemSpec(mode=COMM_PRIORITIZED, gamma_bar0=0.0),
                  stats, extra_starts=[base.allocation])
    assert seeded.objective >= base.objective * (1 - 1e-12)


def test_jopc_infeasible_floor(stats):
    # A wildly infeasible SINR floor must be reported, not silently ignored.
    spec = QosProblemSpec(mode=SENSING_PRIORITIZED, gamma0=1e12)
    res = jopc(spec, stats)
    assert res.status in (
        "infeasible_at_threshold", NOT_CONVERGED)
    assert res.status != OPTIMAL


def test_jopc_rejects_separate_modes(stats):
    with pytest.raises(ConfigurationError):
        jopc(QosProblemSpec(mode=COMM_ONLY, T=0.5), stats)


# -------------------------------------------------------------------- sopc

def test_sopc_separate_structures(stats):
    sc = stats.scenario
    spec = QosProblemSpec(mode=COMM_ONLY, T=0.5)
    comm_res, sense_res = sopc(spec, stats)
    assert comm_res.status == OPTIMAL and sense_res.status == OPTIMAL
    # Orthogonal accounting: no sensing power in the comm design and
    # vice versa.
    assert np.all(comm_res.allocation.nu == 0.0)
    assert np.all(sense_res.allocation.zeta == 0.0)
    # Each side dominates its uniform single-task start.
    b_comm = _uniform_single_task(sc, "comm").to_b()
    assert comm_res.objective >= _min_sinr(b_comm, stats, stats.terms_comm) - 1e-12
    b_sense = _uniform_single_task(sc, "sense").to_b()
    assert sense_res.objective >= _min_esnr(b_sense, stats) - 1e-12


def test_sopc_zero_time_share(stats):
    comm_res, sense_res = sopc(QosProblemSpec(mode=SENSING_ONLY, T=0.0), stats)
    assert np.all(sense_res.allocation.zeta == 0.0)
    assert np.all(sense_res.allocation.nu == 0.0)
    assert sense_res.objective == 0.0


def test_sopc_rejects_prioritized_modes(stats):
    with pytest.raises(ConfigurationError):
        sopc(QosProblemSpec(mode=COMM_PRIORITIZED, gamma_bar0=0.0), stats)
