"""Pilot assignment, MMSE channel-estimation matrices and beamformers."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLinkError, DomainError, NumericalError
from .scenario import azimuth_elevation, steering_vector


@dataclass
class PilotAssignment:
    """Round-robin pilot codebook assignment.

    The codebook holds tau_p mutually orthogonal sequences of squared norm
    tau_p, so pi_j^H pi_k equals tau_p for copilot UEs and 0 otherwise.
    """

    pilot_index: np.ndarray   # (K,) values in [0, tau_p)
    pilot_matrix: np.ndarray  # (tau_p, tau_p), column p is sequence p
    copilot_sets: list        # P_k per UE, including k itself

    @property
    def tau_p(self):
        return self.pilot_matrix.shape[0]

    def cross_correlation(self, j, k):
        """pi_j^H pi_k normalized by tau_p (1 for copilots, else 0)."""
        pj = self.pilot_matrix[:, self.pilot_index[j]]
        pk = self.pilot_matrix[:, self.pilot_index[k]]
        return (pj.conj() @ pk) / self.tau_p


@dataclass
class EstimationMatrices:
    """MMSE filters Lambda, estimate covariances Phi = Lambda C, cached traces."""

    Lambda: np.ndarray     # (K, n_tx, N, N)
    Phi: np.ndarray        # (K, n_tx, N, N)
    tr_Phi: np.ndarray     # (K, n_tx)
    noise_scale: float     # sigma_z^2 / (p_u * tau_p)


def assign_pilots(K, tau_p, policy="round_robin"):
    """Assign pilots to UEs; the default rule is UE k -> pilot (k mod tau_p)."""
    if tau_p < 1:
        raise DomainError("tau_p must be at least 1")
    if policy != "round_robin":
        raise DomainError(f"unknown pilot policy {policy!r}")
    index = np.arange(K) % tau_p
    matrix = np.sqrt(tau_p) * np.eye(tau_p, dtype=complex)
    copilot = [np.flatnonzero(index == index[k]) for k in range(K)]
    return PilotAssignment(pilot_index=index, pilot_matrix=matrix, copilot_sets=copilot)


def build_estimation(correlation, pilots, pilot_power, sigma_z_sq, psd_tol=1e-9):
    """MMSE estimation matrices for every (UE, transmit AP) pair.

    Lambda[k, m] = C[k, m] (sum_{j copilot of k} C[j, m] + noise_scale I)^-1
    and Phi = Lambda C, with noise_scale = sigma_z^2 / (p_u tau_p).
    """
    C = correlation.C
    K, T, N, _ = C.shape
    noise_scale = sigma_z_sq / (pilot_power * pilots.tau_p)
    Lambda = np.empty_like(C)
    Phi = np.empty_like(C)
    eye = np.eye(N)
    for k in range(K):
        copilots = pilots.copilot_sets[k]
        for m in range(T):
            psi = C[copilots, m].sum(axis=0) + noise_scale * eye
            lam = np.linalg.solve(psi, C[k, m]).conj().T
            phi = lam @ C[k, m]
            phi = 0.5 * (phi + phi.conj().T)
            Lambda[k, m] = lam
            Phi[k, m] = phi
            scale = max(np.real(np.trace(C[k, m])), 1e-300)
            if np.linalg.eigvalsh(phi).min() < -psd_tol * scale:
                raise NumericalError(f"estimate covariance not PSD for UE {k}, AP {m}")
            if np.linalg.eigvalsh(C[k, m] - phi).min() < -psd_tol * scale:
                raise NumericalError(f"error covariance not PSD for UE {k}, AP {m}")
    tr_Phi = np.real(np.trace(Phi, axis1=-2, axis2=-1))
    return EstimationMatrices(Lambda=Lambda, Phi=Phi, tr_Phi=tr_Phi, noise_scale=noise_scale)


def mrt_precoder(h_hat, tr_phi):
    """Maximum-ratio precoder normalized by the mean estimate energy.

    w = h_hat / sqrt(tr Phi), so E[||w||^2] = 1 over estimate realizations.
    """
    if tr_phi <= 0.0:
        raise DegenerateLinkError("UE is statistically invisible to this AP")
    return h_hat / np.sqrt(tr_phi)


def sensing_beamformer(ap_position, cell_position, n_antennas):
    """Unit-norm probing beam steering toward a radar cell.

    The beam is the array response toward the cell scaled to unit norm; power
    coefficients carry all transmit scaling.
    """
    az, el = azimuth_elevation(ap_position, cell_position)
    return steering_vector(az, el, n_antennas) / np.sqrt(n_antennas)
