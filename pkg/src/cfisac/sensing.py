"""Multi-static sensing: observation synthesis, GLRT detection, receive SNR
and the effective-SNR quadratic form used by the power optimizer.

The effective SNR of region i is a positive-semidefinite quadratic form in
the stacked amplitude vector b,

    gbar_i = (1 / (N tau_s sigma_z^2)) sum_m b_m^T F[i, m] b_m,

with one matrix per transmit AP.  The derivation of F is documented in
docs/effective_snr.md; its key structural facts are that cross-AP terms
vanish (zero-mean precoders, per-AP independent probing symbols) so each
F[i, m] is diagonal in the amplitude coordinates.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import gamma as gamma_dist

from .errors import DegenerateLinkError, DomainError, NumericalError
from .channels import complex_normal

_SV_REL_TOL = 1e-10


@dataclass
class TargetChannelStack:
    """Stacked target channel matrices for one region, one per receive AP."""

    region: int
    rx_indices: np.ndarray  # rx-local indices (M_p^rx)
    stacks: list            # D (N*tau_s, n_tx) per receive AP


@dataclass
class GlrtWorkspace:
    """Whitened subspace data for the GLRT of one region."""

    region: int
    sigma_z_sq: float
    U: list        # per rx AP, (N*tau_s, r) orthonormal columns
    Xi: list       # per rx AP, U^H D / sigma_z
    ranks: list

    @property
    def r_total(self):
        return int(sum(self.ranks))


@dataclass
class SensingQuadratic:
    """F[i, m] matrices of the effective-SNR quadratic form.

    Shape (S, n_tx, K+S, K+S); block m acts on (zeta[:, m], nu[:, m]).
    """

    F: np.ndarray
    n_antennas: int
    tau_s: int


def sample_symbols(K, S, n_tx, tau_s, rng):
    """Unit-variance data and probing symbols; probing symbols independent
    across access points and regions."""
    x_data = complex_normal(rng, (K, tau_s))
    x_sens = complex_normal(rng, (S, n_tx, tau_s))
    return x_data, x_sens


def transmit_signals(scenario, geometry, estimation, realization, alloc, x_data, x_sens):
    """Per-AP transmit signals s_m[t], shape (n_tx, tau_s, N)."""
    cfg = scenario.config
    tau_s = x_data.shape[1]
    N = cfg.N
    s = np.zeros((scenario.n_tx, tau_s, N), dtype=complex)
    for m in range(scenario.n_tx):
        for k in scenario.served_ues[m]:
            w = realization.h_hat[k, m] / np.sqrt(estimation.tr_Phi[k, m])
            s[m] += alloc.zeta[k, m] * np.outer(x_data[k], w)
        for i in scenario.beam_sets[m]:
            w0 = geometry.a_tx[i, m] / np.sqrt(N)
            s[m] += alloc.nu[i, m] * np.outer(x_sens[i, m], w0)
    return s


def target_channel_stack(scenario, geometry, signals, region):
    """Stacked target channel matrices D for one region and all its receive APs.

    Column m' of D (for receive AP r) vertically stacks over the tau_s
    sensing symbols sqrt(beta) * (a_tx^H s_m'[t]) * a_rx, i.e. the echo of
    AP m' bounced off the inspected cell.
    """
    tau_s = signals.shape[1]
    N = scenario.config.N
    rx_set = scenario.target_rx_sets[region]
    stacks = []
    for r in rx_set:
        a_rx = geometry.a_rx[region, r]
        D = np.empty((N * tau_s, scenario.n_tx), dtype=complex)
        for m in range(scenario.n_tx):
            u = signals[m] @ geometry.a_tx[region, m].conj()   # (tau_s,)
            D[:, m] = np.sqrt(geometry.beta[region, r, m]) * np.kron(u, a_rx)
        stacks.append(D)
    return TargetChannelStack(region=region, rx_indices=np.asarray(rx_set), stacks=stacks)


def synthesize_observation(d_stack, alpha, present, sigma_z_sq, rng):
    """One stacked observation: present * D alpha + white noise."""
    noise = np.sqrt(sigma_z_sq) * complex_normal(rng, d_stack.shape[0])
    if present:
        return d_stack @ alpha + noise
    return noise


def build_glrt_workspace(stack, sigma_z_sq, sv_rel_tol=_SV_REL_TOL):
    """Whitened left-singular bases and filtered channel matrices.

    The noise is white after AP-to-AP cancellation, so whitening is the
    scalar 1/sigma_z and U spans the column space of each D.
    """
    U_list, Xi_list, ranks = [], [], []
    for D in stack.stacks:
        Dw = D / np.sqrt(sigma_z_sq)
        u, sv, _ = np.linalg.svd(Dw, full_matrices=False)
        if sv.size and not np.all(np.isfinite(sv)):
            raise NumericalError("singular values are not finite")
        r = int(np.sum(sv > sv_rel_tol * (sv[0] if sv.size else 0.0))) if sv.size else 0
        U = u[:, :r]
        U_list.append(U)
        Xi_list.append(U.conj().T @ Dw)
        ranks.append(r)
    return GlrtWorkspace(region=stack.region, sigma_z_sq=sigma_z_sq,
                         U=U_list, Xi=Xi_list, ranks=ranks)


def glrt_statistic(observations, workspace):
    """Detection statistic: energy of the whitened observations inside the
    per-AP signal subspaces.  Gamma(r_total, 1) distributed under H0."""
    total = 0.0
    for y, U in zip(observations, workspace.U):
        proj = U.conj().T @ (y / np.sqrt(workspace.sigma_z_sq))
        total += float(np.real(proj.conj() @ proj))
    return total


def glrt_threshold(r_total, p_fa):
    """Threshold with false-alarm probability p_fa under the H0 Gamma law."""
    if not (0.0 < p_fa <= 1.0):
        raise DomainError("false-alarm probability must lie in (0, 1]")
    if r_total < 1:
        raise DegenerateLinkError("statistic has no signal subspace")
    if p_fa == 1.0:
        return 0.0
    return float(gamma_dist.isf(p_fa, a=r_total))


def receive_snr(workspace, R):
    """Receive sensing SNR: mean useful-to-noise energy in the GLRT statistic."""
    r_total = workspace.r_total
    if r_total == 0:
        raise DegenerateLinkError("all transmit signals are zero for this region")
    total = 0.0
    for Xi in workspace.Xi:
        total += float(np.real(np.trace(Xi @ R @ Xi.conj().T)))
    return total / r_total


def effective_snr_matrices(scenario, geometry, estimation, tau_s):
    """Closed-form quadratic-form matrices of the effective sensing SNR.

    For each region i and transmit AP m the matrix is diagonal: data
    amplitudes are weighted by the mean beam gain of the maximum-ratio
    precoder toward the cell, probing amplitudes by the cross-beam gain, both
    scaled by N tau_s, the RCS variance and the two-hop gains summed over the
    region's receive APs.
    """
    cfg = scenario.config
    K, S, T, N = cfg.K, cfg.S, scenario.n_tx, cfg.N
    F = np.zeros((S, T, K + S, K + S))
    for i in range(S):
        rx_set = scenario.target_rx_sets[i]
        for m in range(T):
            a = geometry.a_tx[i, m]
            gsum = geometry.beta[i, rx_set, m].sum()
            scale = N * tau_s * geometry.R[i][m, m] * gsum
            diag = np.zeros(K + S)
            for k in range(K):
                tr_phi = estimation.tr_Phi[k, m]
                if tr_phi > 0.0:
                    gain = np.real(a.conj() @ estimation.Phi[k, m] @ a) / tr_phi
                    diag[k] = scale * gain
            for i2 in range(S):
                cross = np.abs(a.conj() @ geometry.a_tx[i2, m]) ** 2 / N
                diag[K + i2] = scale * cross
            F[i, m] = np.diag(diag)
            if np.any(diag < -1e-12 * max(diag.max(initial=0.0), 1e-300)):
                raise NumericalError("effective-SNR matrix has negative weights")
    return SensingQuadratic(F=F, n_antennas=N, tau_s=tau_s)


def effective_snr(alloc, quadratic, sigma_z_sq):
    """Per-region effective SNR of an allocation."""
    S, T = quadratic.F.shape[0], quadratic.F.shape[1]
    K = alloc.zeta.shape[0]
    out = np.empty(S)
    for i in range(S):
        total = 0.0
        for m in range(T):
            bm = np.concatenate([alloc.zeta[:, m], alloc.nu[:, m]])
            total += float(bm @ quadratic.F[i, m] @ bm)
        out[i] = total / (quadratic.n_antennas * quadratic.tau_s * sigma_z_sq)
    return out


def sensing_rate(gamma_bar, tau_s, tau_c, bandwidth):
    """Ergodic sensing mutual-information rate in bit/s."""
    return tau_s / tau_c * bandwidth * np.log2(1.0 + np.asarray(gamma_bar, dtype=float))
