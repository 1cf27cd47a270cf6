"""Communication metrics: closed-form downlink SINR, achievable rate, the
sensing-beam covariance matrices and an independent Monte Carlo SINR oracle.

The closed form and the oracle share one convention: maximum-ratio precoders
normalized by the mean estimate energy, unit-norm sensing beams, and sensing
symbols independent across access points and regions.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .channels import complex_normal
from .scenario import azimuth_elevation, steering_vector


@dataclass
class PowerAllocation:
    """Amplitude (square-root power) coefficients.

    zeta[k, m] = sqrt(eta_{k,m}) for communication, nu[i, m] = sqrt(mu_{i,m})
    for sensing, both indexed by tx-local AP m.  Entries outside the serving
    and beam sets are structural zeros.
    """

    zeta: np.ndarray  # (K, n_tx)
    nu: np.ndarray    # (S, n_tx)

    @classmethod
    def zeros(cls, scenario):
        cfg = scenario.config
        return cls(
            zeta=np.zeros((cfg.K, scenario.n_tx)),
            nu=np.zeros((cfg.S, scenario.n_tx)),
        )

    def per_ap_power(self):
        """Power spent by each transmit AP."""
        return (self.zeta ** 2).sum(axis=0) + (self.nu ** 2).sum(axis=0)

    def check_structure(self, scenario, tol=0.0):
        """Verify nonnegativity and the structural zeros."""
        if np.any(self.zeta < -tol) or np.any(self.nu < -tol):
            raise ConfigurationError("amplitude coefficients must be nonnegative")
        for k, mk in enumerate(scenario.serving_sets):
            outside = np.setdiff1d(np.arange(scenario.n_tx), mk)
            if np.any(np.abs(self.zeta[k, outside]) > tol):
                raise ConfigurationError(f"UE {k} has power outside its serving set")
        for m, sm in enumerate(scenario.beam_sets):
            outside = np.setdiff1d(np.arange(scenario.config.S), sm)
            if np.any(np.abs(self.nu[outside, m]) > tol):
                raise ConfigurationError(f"AP {m} has beam power outside its region set")

    def to_b(self):
        """Stack into the per-AP vector b: block m is (zeta[:, m], nu[:, m])."""
        return np.concatenate([
            np.concatenate([self.zeta[:, m], self.nu[:, m]])
            for m in range(self.zeta.shape[1])
        ])

    @classmethod
    def from_b(cls, b, K, S, n_tx):
        b = np.asarray(b, dtype=float).reshape(n_tx, K + S)
        return cls(zeta=b[:, :K].T.copy(), nu=b[:, K:].T.copy())


@dataclass
class SensingBeamCovariance:
    """W[i, m] = E over the region's cell distribution of w0 w0^H."""

    W: np.ndarray  # (S, n_tx, N, N)


def sample_region_positions(scenario, region, n, rng):
    """Uniform positions inside a region's rectangle at random target height."""
    xmin, xmax, ymin, ymax = scenario.region_bounds[region]
    lo, hi = scenario.config.target_height_range
    return np.column_stack([
        rng.uniform(xmin, xmax, n),
        rng.uniform(ymin, ymax, n),
        rng.uniform(lo, hi, n),
    ])


def unit_beams(ap_position, cell_positions, n_antennas):
    """Unit-norm probing beams from one AP toward many cells, shape (n, N)."""
    az, el = azimuth_elevation(ap_position, np.atleast_2d(cell_positions))
    return steering_vector(az, el, n_antennas) / np.sqrt(n_antennas)


def sensing_beam_covariance(scenario, region, tx_m, n_mc, rng):
    """Monte Carlo average of w0 w0^H over cell positions in one region."""
    if n_mc < 1:
        raise DomainError("need at least one Monte Carlo position")
    pos = sample_region_positions(scenario, region, n_mc, rng)
    beams = unit_beams(scenario.tx_positions()[tx_m], pos, scenario.config.N)
    W = np.einsum("gn,gm->nm", beams, beams.conj()) / n_mc
    return 0.5 * (W + W.conj().T)


def build_beam_covariances(scenario, rng, n_mc=None):
    """All W[i, m] matrices for a drop."""
    cfg = scenario.config
    n_mc = cfg.w_mc_samples if n_mc is None else n_mc
    W = np.empty((cfg.S, scenario.n_tx, cfg.N, cfg.N), dtype=complex)
    for i in range(cfg.S):
        for m in range(scenario.n_tx):
            W[i, m] = sensing_beam_covariance(scenario, i, m, n_mc, rng)
    return SensingBeamCovariance(W=W)


class SinrTerms:
    """Precomputed affine coefficients of the SINR's numerator and denominator.

    For UE k the SINR reads num(zeta)^2 / (q_a + q_b + q_c + sigma_z^2) with
      num    = sum_m coef_num[k, m] * zeta[k, m]
      q_a    = sum_{j,m} (coef_a[k, j, m] * zeta[j, m])^2
      q_b    = sum_{j copilot, j != k} |sum_m coef_b[k, j, m] * zeta[j, m]|^2
      q_c    = sum_{i,m} (coef_c[k, i, m] * nu[i, m])^2
    so every term is an exact square of an affine function of the amplitudes.
    """

    def __init__(self, scenario, correlation, estimation, pilots, beam_cov,
                 include_sensing=True):
        C = correlation.C
        Phi, Lam, trP = estimation.Phi, estimation.Lambda, estimation.tr_Phi
        K, T = trP.shape
        S = scenario.config.S

        tr_cp = np.real(np.einsum("kmab,jmba->kjm", C, Phi))
        tr_cl = np.einsum("kmab,jmba->kjm", C, Lam)

        serve_mask = np.zeros((K, T), dtype=bool)
        for j, mj in enumerate(scenario.serving_sets):
            serve_mask[j, mj] = True
        beam_mask = np.zeros((S, T), dtype=bool)
        for m, sm in enumerate(scenario.beam_sets):
            beam_mask[sm, m] = True

        self.coef_num = np.where(serve_mask, np.sqrt(trP), 0.0)
        self.coef_a = np.where(
            serve_mask[None, :, :], np.sqrt(np.clip(tr_cp, 0.0, None) / trP[None, :, :]), 0.0
        )
        copilot = np.zeros((K, K), dtype=bool)
        for k in range(K):
            copilot[k, pilots.copilot_sets[k]] = True
        copilot[np.arange(K), np.arange(K)] = False
        self.copilot = copilot
        self.coef_b = np.where(serve_mask[None, :, :], tr_cl / np.sqrt(trP)[None, :, :], 0.0)
        if include_sensing:
            tr_cw = np.real(np.einsum("kmab,imba->kim", C, beam_cov.W))
            self.coef_c = np.where(
                beam_mask[None, :, :], np.sqrt(np.clip(tr_cw, 0.0, None)), 0.0
            )
        else:
            self.coef_c = np.zeros((K, S, T))

    def sinr(self, alloc, sigma_z_sq):
        zeta, nu = alloc.zeta, alloc.nu
        num = np.einsum("km,km->k", self.coef_num, zeta)
        q_a = np.einsum("kjm->k", (self.coef_a * zeta[None, :, :]) ** 2)
        b_sums = np.einsum("kjm,jm->kj", self.coef_b, zeta)
        q_b = (np.abs(b_sums) ** 2 * self.copilot).sum(axis=1)
        q_c = np.einsum("kim->k", (self.coef_c * nu[None, :, :]) ** 2)
        return num ** 2 / (q_a + q_b + q_c + sigma_z_sq)


def closed_form_sinr(alloc, estimation, correlation, pilots, beam_cov, sigma_z_sq,
                     scenario, include_sensing=True):
    """Per-UE downlink SINR from the hardening-based closed form."""
    terms = SinrTerms(scenario, correlation, estimation, pilots, beam_cov,
                      include_sensing=include_sensing)
    return terms.sinr(alloc, sigma_z_sq)


def achievable_rate(gamma, tau_c, tau_p, bandwidth):
    """Net rate in bit/s after discounting the training overhead."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise DomainError("SINR must be nonnegative")
    return (tau_c - tau_p) / tau_c * bandwidth * np.log2(1.0 + gamma)


class UatfSampler:
    """Monte Carlo estimator of the use-and-then-forget SINR.

    Simulates the downlink per coherence block: channels, pilot-based MMSE
    estimates, maximum-ratio precoders, and sensing beams pointed at cell
    positions freshly drawn from each region's long-term distribution.  The
    expectations over the unit-variance data and sensing symbols are taken in
    closed form inside each block; all channel and position randomness is
    sampled.  Draws are shared across allocations for variance-free ranking.
    """

    def __init__(self, scenario, correlation, estimation, pilots):
        self.scenario = scenario
        self.correlation = correlation
        self.estimation = estimation
        self.pilots = pilots

    def _sample_batch(self, n, rng):
        sc, est, pil = self.scenario, self.estimation, self.pilots
        K, T, N = sc.config.K, sc.n_tx, sc.config.N
        h = np.empty((K, T, n, N), dtype=complex)
        for k in range(K):
            for m in range(T):
                z = complex_normal(rng, (n, N))
                h[k, m] = z @ self.correlation.sqrt_factor(k, m).T
        noise_std = np.sqrt(est.noise_scale)
        w = np.empty_like(h)
        for m in range(T):
            for p in range(pil.tau_p):
                users = np.flatnonzero(pil.pilot_index == p)
                if users.size == 0:
                    continue
                y = h[users, m].sum(axis=0) + noise_std * complex_normal(rng, (n, N))
                for k in users:
                    w[k, m] = (y @ est.Lambda[k, m].T) / np.sqrt(est.tr_Phi[k, m])
        # Per-block data inner products h_{k,m}^H w_{j,m}, for m in M_j.
        data_ip = np.zeros((K, K, T, n), dtype=complex)
        for j in range(K):
            for m in self.scenario.serving_sets[j]:
                data_ip[:, j, m] = np.einsum("kbn,bn->kb", h[:, m].conj(), w[j, m])
        # Sensing inner products h_{k,m}^H w0_m(p_i[b]) for i in S_m.
        S = sc.config.S
        sens_ip = np.zeros((K, S, T, n), dtype=complex)
        for i in range(S):
            pos = sample_region_positions(sc, i, n, rng)
            for m in range(T):
                if i not in sc.beam_sets[m]:
                    continue
                beams = unit_beams(sc.tx_positions()[m], pos, N)
                sens_ip[:, i, m] = np.einsum("kbn,bn->kb", h[:, m].conj(), beams)
        return data_ip, sens_ip

    def sinr(self, allocs, n_blocks, rng, batch_size=20000):
        single = isinstance(allocs, PowerAllocation)
        allocs = [allocs] if single else list(allocs)
        K = self.scenario.config.K
        sum_useful = np.zeros((len(allocs), K), dtype=complex)
        sum_power = np.zeros((len(allocs), K))
        sum_sens = np.zeros((len(allocs), K))
        done = 0
        while done < n_blocks:
            n = min(batch_size, n_blocks - done)
            data_ip, sens_ip = self._sample_batch(n, rng)
            for a, alloc in enumerate(allocs):
                g = np.einsum("jm,kjmb->kjb", alloc.zeta, data_ip)
                sum_useful[a] += g[np.arange(K), np.arange(K)].sum(axis=1)
                sum_power[a] += (np.abs(g) ** 2).sum(axis=(1, 2))
                c = alloc.nu[None, :, :, None] * sens_ip
                sum_sens[a] += (np.abs(c) ** 2).sum(axis=(1, 2, 3))
            done += n
        useful = np.abs(sum_useful / n_blocks) ** 2
        denom = (sum_power / n_blocks) - useful + sum_sens / n_blocks \
            + self.scenario.config.sigma_z_sq
        out = useful / denom
        return out[0] if single else out


def uatf_monte_carlo_oracle(alloc, scenario, correlation, estimation, pilots,
                            n_blocks, rng, batch_size=20000):
    """Empirical use-and-then-forget SINR for one allocation."""
    sampler = UatfSampler(scenario, correlation, estimation, pilots)
    return sampler.sinr(alloc, n_blocks, rng, batch_size=batch_size)
