"""Network geometry, AP roles, sensing regions and association sets.

A scenario is generated deterministically from a configuration and a seed:
AP/UE placement, the transmit/receive AP split, the rectangular tiling of the
surveillance area into sensing regions, the radar cell inspected in each
region, and the user-centric / target-centric association sets.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError
from . import streams

NLOS_ACCESS = "nlos_access"
LOS_TARGET = "los_target"


@dataclass
class ScenarioConfig:
    """Static parameters of a deployment.

    Distances are in meters, powers in watts, bandwidth and carrier in Hz,
    noise density in dBm/Hz and RCS variance in dBsm.
    """

    area_side: float = 707.1067811865476  # sqrt(0.5 km^2)
    M: int = 16
    K: int = 16
    S: int = 4
    N: int = 4
    P_m: float = 2.0
    bandwidth_B: float = 20e6
    carrier_f_c: float = 2e9
    noise_density_N0: float = -174.0
    tau_c: int = 50
    tau_p: int = 8
    tau_s: int = 50
    sigma_alpha_sq: float = 10.0
    n_rx_aps: int = 4
    L_serve: int = 4
    L_tx_sense: int = 4
    ue_height: float = 1.65
    ap_height: float = 10.0
    target_height_range: tuple = (20.0, 100.0)
    seed: int = 0
    # Model constants left open by the reference system description.
    pilot_power: float = 0.1
    angular_spread_deg: float = 15.0
    view_kernel_deg: float = 20.0
    w_mc_samples: int = 1000

    def validate(self):
        positive = {
            "area_side": self.area_side, "M": self.M, "K": self.K, "S": self.S,
            "N": self.N, "P_m": self.P_m, "bandwidth_B": self.bandwidth_B,
            "carrier_f_c": self.carrier_f_c, "tau_c": self.tau_c,
            "tau_p": self.tau_p, "tau_s": self.tau_s, "n_rx_aps": self.n_rx_aps,
            "L_serve": self.L_serve, "L_tx_sense": self.L_tx_sense,
            "pilot_power": self.pilot_power,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ConfigurationError(f"{name} must be strictly positive, got {value}")
        if self.tau_p >= self.tau_c:
            raise ConfigurationError("tau_p must be smaller than tau_c")
        if self.tau_s > self.tau_c:
            raise ConfigurationError("tau_s cannot exceed tau_c")
        if self.n_rx_aps >= self.M:
            raise ConfigurationError("n_rx_aps must leave at least one transmit AP")
        n_tx = self.M - self.n_rx_aps
        if self.L_serve > n_tx:
            raise ConfigurationError("L_serve exceeds the number of transmit APs")
        if self.L_tx_sense > n_tx:
            raise ConfigurationError("L_tx_sense exceeds the number of transmit APs")
        lo, hi = self.target_height_range
        if not (0 < lo <= hi):
            raise ConfigurationError("invalid target height range")
        return self

    @property
    def sigma_z_sq(self):
        """Thermal noise power in watts over the full bandwidth."""
        return 10.0 ** ((self.noise_density_N0 - 30.0) / 10.0) * self.bandwidth_B

    @property
    def sigma_alpha_sq_linear(self):
        """RCS variance in square meters."""
        return 10.0 ** (self.sigma_alpha_sq / 10.0)


@dataclass
class Scenario:
    """A realized network drop.

    Transmit-AP-indexed structures use *tx-local* indices (positions in
    `tx_aps`); receive-AP structures use positions in `rx_aps`.
    """

    config: ScenarioConfig
    ap_positions: np.ndarray          # (M, 3)
    tx_aps: np.ndarray                # global AP ids, sorted
    rx_aps: np.ndarray
    ue_positions: np.ndarray          # (K, 3)
    region_bounds: np.ndarray         # (S, 4): xmin, xmax, ymin, ymax
    radar_cells: np.ndarray           # (S, 3)
    gains: np.ndarray                 # (K, n_tx) large-scale NLOS gain
    serving_sets: list = field(default_factory=list)   # M_k, tx-local
    served_ues: list = field(default_factory=list)     # K_m per tx AP
    target_tx_sets: list = field(default_factory=list)  # M_p^tx, tx-local
    target_rx_sets: list = field(default_factory=list)  # M_p^rx, rx-local
    beam_sets: list = field(default_factory=list)       # S_m per tx AP

    @property
    def n_tx(self):
        return len(self.tx_aps)

    @property
    def n_rx(self):
        return len(self.rx_aps)

    @property
    def ap_role(self):
        role = np.empty(len(self.ap_positions), dtype=object)
        role[self.tx_aps] = "transmit"
        role[self.rx_aps] = "receive"
        return role

    def tx_positions(self):
        return self.ap_positions[self.tx_aps]

    def rx_positions(self):
        return self.ap_positions[self.rx_aps]


def azimuth_elevation(from_pos, to_pos):
    """Azimuth and elevation (radians) of `to_pos` seen from `from_pos`.

    Azimuth is measured in the horizontal plane from the global x axis,
    elevation above the horizon.  Arrays broadcast over leading dimensions.
    """
    delta = np.asarray(to_pos, dtype=float) - np.asarray(from_pos, dtype=float)
    az = np.arctan2(delta[..., 1], delta[..., 0])
    el = np.arctan2(delta[..., 2], np.hypot(delta[..., 0], delta[..., 1]))
    return az, el


def steering_vector(azimuth, elevation, n_antennas):
    """Array response of a half-wavelength ULA along the local x axis.

    Entry n is exp(j*pi*n*sin(azimuth)*cos(elevation)); the norm squared is
    always `n_antennas`.  Angle inputs broadcast to a trailing antenna axis.
    """
    if n_antennas < 1:
        raise DomainError("need at least one antenna")
    phase = np.sin(np.asarray(azimuth)) * np.cos(np.asarray(elevation))
    n = np.arange(n_antennas)
    return np.exp(1j * np.pi * phase[..., None] * n)


def large_scale_gain(tx_pos, rx_pos, link_kind, carrier_f_c):
    """Linear power gain of a link under the urban-micro path-loss models.

    `nlos_access` uses PL = 36.7 log10(d) + 22.7 + 26 log10(f_c/1GHz) dB and
    `los_target` PL = 22 log10(d) + 28 + 20 log10(f_c/1GHz) dB, with d the
    3-D distance in meters.
    """
    d = np.linalg.norm(np.asarray(tx_pos, dtype=float) - np.asarray(rx_pos, dtype=float), axis=-1)
    if np.any(d <= 0.0):
        raise DomainError("zero-distance link has no defined path loss")
    fc_ghz = carrier_f_c / 1e9
    if link_kind == NLOS_ACCESS:
        pl_db = 36.7 * np.log10(d) + 22.7 + 26.0 * np.log10(fc_ghz)
    elif link_kind == LOS_TARGET:
        pl_db = 22.0 * np.log10(d) + 28.0 + 20.0 * np.log10(fc_ghz)
    else:
        raise DomainError(f"unknown link kind {link_kind!r}")
    return 10.0 ** (-pl_db / 10.0)


def _region_grid(S, area_side):
    """Tile the square area into S equal rectangles (rows x cols grid)."""
    rows = 1
    for r in range(1, int(np.sqrt(S)) + 1):
        if S % r == 0:
            rows = r
    cols = S // rows
    dx, dy = area_side / cols, area_side / rows
    bounds = []
    for r in range(rows):
        for c in range(cols):
            bounds.append((c * dx, (c + 1) * dx, r * dy, (r + 1) * dy))
    return np.array(bounds)


def _farthest_point_subset(positions, n_pick):
    """Greedy max-min-distance subset; deterministic given positions."""
    centroid = positions.mean(axis=0)
    chosen = [int(np.argmax(np.linalg.norm(positions - centroid, axis=1)))]
    while len(chosen) < n_pick:
        d = np.min(
            np.linalg.norm(positions[:, None, :] - positions[chosen][None, :, :], axis=2),
            axis=1,
        )
        d[chosen] = -1.0
        chosen.append(int(np.argmax(d)))
    return np.array(sorted(chosen))


def associate_users(scenario, gains, L_serve):
    """User-centric clustering: each UE picks its L_serve strongest transmit APs."""
    n_tx = scenario.n_tx
    if L_serve > n_tx:
        raise ConfigurationError("fewer transmit APs than L_serve")
    if not np.all(np.isfinite(gains)) or np.any(gains <= 0):
        raise ConfigurationError("large-scale gains must be finite and positive")
    serving_sets = []
    for k in range(gains.shape[0]):
        order = np.argsort(-gains[k], kind="stable")
        serving_sets.append(np.array(sorted(order[:L_serve])))
    served_ues = [
        np.array([k for k, mk in enumerate(serving_sets) if m in mk], dtype=int)
        for m in range(n_tx)
    ]
    return serving_sets, served_ues


def associate_targets(scenario):
    """Target-centric clustering: nearest receive AP plus the L_tx_sense
    nearest transmit APs for each region's radar cell."""
    L = scenario.config.L_tx_sense
    if scenario.n_rx < 1 or scenario.n_tx < L:
        raise ConfigurationError("not enough APs for target association")
    tx_pos = scenario.tx_positions()
    rx_pos = scenario.rx_positions()
    target_tx, target_rx = [], []
    for p in scenario.radar_cells:
        d_rx = np.linalg.norm(rx_pos - p, axis=1)
        target_rx.append(np.array([int(np.argmin(d_rx))]))
        d_tx = np.linalg.norm(tx_pos - p, axis=1)
        order = np.argsort(d_tx, kind="stable")
        target_tx.append(np.array(sorted(order[:L])))
    beam_sets = [
        np.array([i for i, mi in enumerate(target_tx) if m in mi], dtype=int)
        for m in range(scenario.n_tx)
    ]
    return target_tx, target_rx, beam_sets


def build_scenario(config, seed=None):
    """Generate a network drop deterministically from (config, seed)."""
    config.validate()
    if seed is None:
        seed = config.seed
    rng = streams.stream(seed, streams.GEOMETRY)

    M, K, S = config.M, config.K, config.S
    ap_xy = rng.uniform(0.0, config.area_side, size=(M, 2))
    ap_positions = np.column_stack([ap_xy, np.full(M, config.ap_height)])
    ue_xy = rng.uniform(0.0, config.area_side, size=(K, 2))
    ue_positions = np.column_stack([ue_xy, np.full(K, config.ue_height)])

    region_bounds = _region_grid(S, config.area_side)
    cell_u = rng.uniform(0.0, 1.0, size=(S, 2))
    lo, hi = config.target_height_range
    cell_z = rng.uniform(lo, hi, size=S)
    radar_cells = np.column_stack([
        region_bounds[:, 0] + cell_u[:, 0] * (region_bounds[:, 1] - region_bounds[:, 0]),
        region_bounds[:, 2] + cell_u[:, 1] * (region_bounds[:, 3] - region_bounds[:, 2]),
        cell_z,
    ])

    rx_aps = _farthest_point_subset(ap_positions[:, :2], config.n_rx_aps)
    tx_aps = np.array(sorted(set(range(M)) - set(rx_aps.tolist())))

    gains = np.empty((K, len(tx_aps)))
    for k in range(K):
        gains[k] = large_scale_gain(
            ap_positions[tx_aps], ue_positions[k], NLOS_ACCESS, config.carrier_f_c
        )

    scenario = Scenario(
        config=config,
        ap_positions=ap_positions,
        tx_aps=tx_aps,
        rx_aps=rx_aps,
        ue_positions=ue_positions,
        region_bounds=region_bounds,
        radar_cells=radar_cells,
        gains=gains,
    )
    scenario.serving_sets, scenario.served_ues = associate_users(scenario, gains, config.L_serve)
    scenario.target_tx_sets, scenario.target_rx_sets, scenario.beam_sets = associate_targets(scenario)
    return scenario
