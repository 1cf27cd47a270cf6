"""Channel statistics and per-coherence-block realizations.

Covers the spatially correlated Rayleigh access channels (UE to transmit AP),
the two-hop target geometry (transmit AP -> radar cell -> receive AP) and the
sampling of channels, channel estimates and radar-cross-section draws.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .scenario import (
    LOS_TARGET,
    azimuth_elevation,
    large_scale_gain,
    steering_vector,
)

_GH_NODES = 25


@dataclass
class SpatialCorrelation:
    """Per-(UE, transmit AP) spatial correlation matrices, shape (K, n_tx, N, N)."""

    C: np.ndarray

    def trace(self):
        return np.real(np.trace(self.C, axis1=-2, axis2=-1))

    def sqrt_factor(self, k, m):
        """Cached factor B with B B^H = C[k, m]."""
        if not hasattr(self, "_sqrt"):
            self._sqrt = {}
        if (k, m) not in self._sqrt:
            self._sqrt[(k, m)] = matrix_sqrt(self.C[k, m])
        return self._sqrt[(k, m)]


@dataclass
class TargetGeometry:
    """Two-hop gains, steering vectors and RCS covariance for every region.

    beta[i, r, t] is the product of the transmit-AP-t -> cell-i and
    cell-i -> receive-AP-r path gains.  `a_tx` / `a_rx` hold the (unnormalized)
    steering vectors of each AP toward the radar cell.  `R` is the RCS
    covariance over transmit APs, identical for every receive AP of a region.
    """

    beta: np.ndarray   # (S, n_rx, n_tx)
    a_tx: np.ndarray   # (S, n_tx, N)
    a_rx: np.ndarray   # (S, n_rx, N)
    R: np.ndarray      # (S, n_tx, n_tx)

    def steering_outer(self, region, rx_idx, tx_idx):
        """Rank-one outer product a_rx a_tx^H for one (region, rx, tx) triple."""
        return np.outer(self.a_rx[region, rx_idx], self.a_tx[region, tx_idx].conj())

    def rcs_sqrt(self, region):
        """Cached factor B with B B^H = R[region]."""
        if not hasattr(self, "_sqrt"):
            self._sqrt = {}
        if region not in self._sqrt:
            self._sqrt[region] = matrix_sqrt(self.R[region])
        return self._sqrt[region]


@dataclass
class ChannelRealization:
    """One coherence block: channels, MMSE estimates and RCS draws."""

    h: np.ndarray              # (K, n_tx, N)
    h_hat: np.ndarray          # (K, n_tx, N)
    alpha: np.ndarray          # (S, n_rx, n_tx), constant over the block
    target_present: np.ndarray  # (S,) booleans


def gaussian_scattering_correlation(azimuth, spread_rad, n_antennas):
    """Unit-trace-per-antenna angular correlation of the Gaussian local
    scattering model, computed by Gauss-Hermite quadrature.

    Returns sum_i w_i a(az + d_i) a(az + d_i)^H with the d_i Gaussian nodes,
    which is Hermitian PSD by construction and has all-ones diagonal.
    """
    nodes, weights = np.polynomial.hermite.hermgauss(_GH_NODES)
    weights = weights / np.sqrt(np.pi)
    angles = azimuth + np.sqrt(2.0) * spread_rad * nodes
    a = steering_vector(angles, np.zeros_like(angles), n_antennas)
    corr = np.einsum("g,gn,gm->nm", weights, a, a.conj())
    return 0.5 * (corr + corr.conj().T)


def build_correlation(scenario):
    """Spatial correlation matrices C[k, m] = gain * R_angular(azimuth)."""
    cfg = scenario.config
    spread = np.deg2rad(cfg.angular_spread_deg)
    K, T, N = cfg.K, scenario.n_tx, cfg.N
    tx_pos = scenario.tx_positions()
    C = np.empty((K, T, N, N), dtype=complex)
    for k in range(K):
        az, _ = azimuth_elevation(tx_pos, scenario.ue_positions[k])
        for m in range(T):
            C[k, m] = scenario.gains[k, m] * gaussian_scattering_correlation(az[m], spread, N)
    return SpatialCorrelation(C=C)


def _psd_clip(matrix):
    vals, vecs = np.linalg.eigh(0.5 * (matrix + matrix.conj().T))
    vals = np.clip(vals, 0.0, None)
    out = (vecs * vals) @ vecs.conj().T
    return 0.5 * (out + out.conj().T)


def build_target_geometry(scenario):
    """Two-hop gains, steering vectors and the angle-of-view RCS covariance."""
    cfg = scenario.config
    S, T, R_n, N = cfg.S, scenario.n_tx, scenario.n_rx, cfg.N
    tx_pos = scenario.tx_positions()
    rx_pos = scenario.rx_positions()
    sigma_view = np.deg2rad(cfg.view_kernel_deg)
    s_alpha = cfg.sigma_alpha_sq_linear

    beta = np.empty((S, R_n, T))
    a_tx = np.empty((S, T, N), dtype=complex)
    a_rx = np.empty((S, R_n, N), dtype=complex)
    R = np.empty((S, T, T))
    for i, p in enumerate(scenario.radar_cells):
        g_tx = large_scale_gain(tx_pos, p, LOS_TARGET, cfg.carrier_f_c)
        g_rx = large_scale_gain(rx_pos, p, LOS_TARGET, cfg.carrier_f_c)
        beta[i] = np.outer(g_rx, g_tx)
        az_t, el_t = azimuth_elevation(tx_pos, p)
        a_tx[i] = steering_vector(az_t, el_t, N)
        az_r, el_r = azimuth_elevation(rx_pos, p)
        a_rx[i] = steering_vector(az_r, el_r, N)

        # Angular separation of the transmit APs as seen from the radar cell.
        u = tx_pos - p
        u = u / np.linalg.norm(u, axis=1, keepdims=True)
        cosang = np.clip(u @ u.T, -1.0, 1.0)
        dphi = np.arccos(cosang)
        R[i] = _psd_clip(s_alpha * np.exp(-(dphi ** 2) / (2.0 * sigma_view ** 2)))
    return TargetGeometry(beta=beta, a_tx=a_tx, a_rx=a_rx, R=R)


def complex_normal(rng, shape):
    """CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def matrix_sqrt(psd, tol=1e-10):
    """Hermitian square-root factor B with B B^H = psd (eigenvalue form)."""
    vals, vecs = np.linalg.eigh(0.5 * (psd + psd.conj().T))
    scale = max(vals.max(initial=0.0), 0.0)
    if vals.min(initial=0.0) < -tol * max(scale, 1e-300):
        raise DomainError("matrix is not positive semidefinite")
    vals = np.clip(vals, 0.0, None)
    return vecs * np.sqrt(vals)


def sample_realization(scenario, correlation, estimation, pilots, geometry, target_present, rng):
    """Draw one coherence block.

    Channels are CN(0, C); estimates are produced by passing the channels and
    fresh pilot noise through the MMSE filters, so copilot estimates carry the
    correct cross-correlation and the estimation error is uncorrelated with
    the estimate.  RCS vectors are drawn once per (region, receive AP) and
    held constant over the block.
    """
    cfg = scenario.config
    K, T, N = cfg.K, scenario.n_tx, cfg.N
    target_present = np.asarray(target_present, dtype=bool)

    h = np.empty((K, T, N), dtype=complex)
    for k in range(K):
        for m in range(T):
            h[k, m] = correlation.sqrt_factor(k, m) @ complex_normal(rng, N)

    noise_std = np.sqrt(estimation.noise_scale)
    h_hat = np.empty_like(h)
    for m in range(T):
        for p in range(pilots.tau_p):
            users = np.flatnonzero(pilots.pilot_index == p)
            if users.size == 0:
                continue
            y = h[users, m].sum(axis=0) + noise_std * complex_normal(rng, N)
            for k in users:
                h_hat[k, m] = estimation.Lambda[k, m] @ y

    S, R_n = cfg.S, scenario.n_rx
    alpha = np.empty((S, R_n, T), dtype=complex)
    for i in range(S):
        factor = geometry.rcs_sqrt(i)
        for r in range(R_n):
            alpha[i, r] = factor @ complex_normal(rng, T)
    return ChannelRealization(h=h, h_hat=h_hat, alpha=alpha, target_present=target_present)
