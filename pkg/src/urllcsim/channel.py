"""Indoor channel model: distance-dependent LOS, path loss, shadowing, fading.

Large-scale model (WINNER II A1 indoor at 3 GHz):

    P_LOS(d) = 1                                              d <= 2.5 m
             = 1 - 0.9 * (1 - (1.24 - 0.61*log10 d)^3)^(1/3)  d >  2.5 m
    PL_LOS(d)  = 18.7*log10 d + 46.8 + 20*log10(0.6)   [dB]
    PL_NLOS(d) = 36.8*log10 d + 43.8 + 20*log10(0.6)   [dB]

Shadowing is log-normal (3 dB std on LOS links, 4 dB on NLOS). Small-scale
fading is unit-power Rician on LOS links and Rayleigh on NLOS links. All
per-link draws happen once per transmission period: the same realization is
seen by both hops of the two-hop protocols.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .geometry import Layout, pairwise_distances

# Mean path loss (dB of the mean linear large-scale gain) observed between
# transmitter-receiver pairs in the reference 9-cell dense hall; anchors the
# "average SNR of a link" scale used on all result axes.
AVG_PATH_LOSS_DB = 59.0

FREQ_CORRECTION_DB = 20.0 * np.log10(0.6)  # 3 GHz correction term, applied verbatim


def los_probability(d) -> np.ndarray:
    """Probability that a link of length d meters has a LOS component.

    Clamped to [0, 1]: the closed form exits the unit interval for very long
    links (the cubic turns negative near d ~ 100 m), where LOS is simply
    impossible.
    """
    d = np.asarray(d, dtype=float)
    x = 1.24 - 0.61 * np.log10(np.maximum(d, 1e-12))
    inner = 1.0 - np.minimum(x, 1.0) ** 3
    p = 1.0 - 0.9 * np.cbrt(np.maximum(inner, 0.0))
    return np.where(d <= 2.5, 1.0, np.clip(p, 0.0, 1.0))


def path_loss_db(d, los) -> np.ndarray:
    """Distance-dependent path loss in dB for LOS / NLOS links."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("path loss undefined for non-positive distance")
    los = np.asarray(los, dtype=bool)
    ld = np.log10(d)
    pl = np.where(los, 18.7 * ld + 46.8, 36.8 * ld + 43.8)
    return pl + FREQ_CORRECTION_DB


def draw_small_scale(los, k_factor_linear: float, rng: np.random.Generator, size=None):
    """Unit-power complex small-scale coefficients.

    LOS entries: h = sqrt(k/(k+1)) e^{j theta} + sqrt(1/(k+1)) CN(0,1) with
    theta uniform on (0, 2pi].  NLOS entries are pure Rayleigh (k = 0).
    E|h|^2 = 1 in both branches.
    """
    if k_factor_linear < 0:
        raise ValueError("k_factor_linear must be >= 0")
    los = np.asarray(los, dtype=bool)
    if size is None:
        size = los.shape
    scatter = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)
    theta = rng.uniform(0.0, 2.0 * np.pi, size)
    k = k_factor_linear
    rician = np.sqrt(k / (k + 1.0)) * np.exp(1j * theta) + np.sqrt(1.0 / (k + 1.0)) * scatter
    return np.where(los, rician, scatter)


def average_link_snr_db(config: ScenarioConfig) -> float:
    """Average link SNR implied by the transmit PSD: p - 59 - sigma^2 [dB]."""
    return config.tx_psd_dbm_hz - AVG_PATH_LOSS_DB - config.noise_psd_dbm_hz


def tx_psd_for_average_snr(avg_snr_db: float, noise_psd_dbm_hz: float = -169.0) -> float:
    """Inverse of average_link_snr_db: the PSD that realizes a target average SNR."""
    return avg_snr_db + AVG_PATH_LOSS_DB + noise_psd_dbm_hz


@dataclass
class ChannelRealization:
    """Complex gains of one transmission period.

    g[a, i] is the gain from controller i to actuator a (a = c*K + k);
    h[a, b] the gain between actuators a and b.  h is symmetric (one draw per
    unordered pair, reciprocal within the coherence period) and its diagonal
    is never read.  Both hops of a period see these same coefficients.
    """

    g: np.ndarray  # (A, C) complex
    h: np.ndarray  # (A, A) complex, symmetric, zero diagonal
    cell_index: np.ndarray  # (A,) int
    los_g: np.ndarray | None = None
    los_h: np.ndarray | None = None
    path_loss_g_db: np.ndarray | None = None
    path_loss_h_db: np.ndarray | None = None
    shadow_g_db: np.ndarray | None = None
    shadow_h_db: np.ndarray | None = None

    @property
    def num_actuators(self) -> int:
        return self.g.shape[0]

    @property
    def num_cells(self) -> int:
        return self.g.shape[1]


def _draw_link_set(d, config: ScenarioConfig, rng: np.random.Generator):
    """Per-link LOS flag, shadowing, path loss and faded complex gain."""
    los = rng.random(d.shape) < los_probability(d)
    shadow = rng.standard_normal(d.shape) * np.where(
        los, config.shadow_std_los_db, config.shadow_std_nlos_db
    )
    pl = path_loss_db(d, los)
    small = draw_small_scale(los, config.rician_k_factor_linear, rng)
    amplitude = 10.0 ** (-(pl + shadow) / 20.0)
    return amplitude * small, los, pl, shadow


def draw_channels(
    config: ScenarioConfig,
    layout: Layout,
    rng: np.random.Generator,
    keep_diagnostics: bool = False,
) -> ChannelRealization:
    """Sample one period's complete gain matrices for a layout.

    Draw order is fixed (controller links first, then the upper triangle of
    the actuator-actuator links) so a given stream always yields the same
    realization.
    """
    d_g = pairwise_distances(
        layout.actuator_positions,
        layout.controller_positions,
        layout,
        config.min_distance_m,
    )
    g, los_g, pl_g, sh_g = _draw_link_set(d_g, config, rng)

    a = layout.num_actuators
    iu = np.triu_indices(a, k=1)
    d_h_full = pairwise_distances(
        layout.actuator_positions,
        layout.actuator_positions,
        layout,
        config.min_distance_m,
    )
    d_pairs = d_h_full[iu]
    h_pairs, los_p, pl_p, sh_p = _draw_link_set(d_pairs, config, rng)

    h = np.zeros((a, a), dtype=complex)
    h[iu] = h_pairs
    h = h + h.T

    def mirror(v, dtype=float):
        m = np.zeros((a, a), dtype=dtype)
        m[iu] = v
        return m + m.T

    diag = {}
    if keep_diagnostics:
        diag = dict(
            los_g=los_g,
            los_h=mirror(los_p, bool),
            path_loss_g_db=pl_g,
            path_loss_h_db=mirror(pl_p),
            shadow_g_db=sh_g,
            shadow_h_db=mirror(sh_p),
        )
    return ChannelRealization(g=g, h=h, cell_index=layout.actuator_cell.copy(), **diag)


def draw_iid_channels(
    num_cells: int,
    actuators_per_cell: int,
    k_factor_linear: float,
    rng: np.random.Generator,
) -> ChannelRealization:
    """Gain matrices with unit large-scale gain and i.i.d. Rician fading.

    Bypasses geometry entirely; used to cross-validate the Monte Carlo engine
    against the closed-form failure probabilities, which assume identically
    distributed gains across the whole network.
    """
    a = num_cells * actuators_per_cell
    all_los = np.ones((a, num_cells), dtype=bool)
    g = draw_small_scale(all_los, k_factor_linear, rng)
    iu = np.triu_indices(a, k=1)
    pair_flags = np.ones(len(iu[0]), dtype=bool)
    h_pairs = draw_small_scale(pair_flags, k_factor_linear, rng)
    h = np.zeros((a, a), dtype=complex)
    h[iu] = h_pairs
    h = h + h.T
    cells = np.repeat(np.arange(num_cells), actuators_per_cell)
    return ChannelRealization(g=g, h=h, cell_index=cells)
