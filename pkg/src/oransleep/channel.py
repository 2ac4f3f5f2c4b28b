"""UMi street-canyon propagation: path loss, LOS mixing, per-PRB SNR and rate.

Distances are 2-D horizontal in meters; the model is valid from 1 m outward.
Shadowed path loss is clamped at 0 dB so linear gains stay in (0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT_M_S = 3.0e8


@dataclass(frozen=True)
class ChannelParams:
    """Propagation constants shared by every RU-UE link."""

    carrier_freq_ghz: float = 2.0
    ru_height_m: float = 15.0
    ue_height_m: float = 1.7
    noise_psd_dbm_hz: float = -174.0
    prb_bandwidth_hz: float = 180e3
    shadowing_sigma_los_db: float = 4.0
    shadowing_sigma_nlos_db: float = 7.82

    def __post_init__(self) -> None:
        if self.carrier_freq_ghz <= 0.0:
            raise ValueError("carrier_freq_ghz must be > 0")
        if self.ru_height_m <= 0.0 or self.ue_height_m <= 0.0:
            raise ValueError("antenna heights must be > 0")
        if self.prb_bandwidth_hz <= 0.0:
            raise ValueError("prb_bandwidth_hz must be > 0")
        if self.shadowing_sigma_los_db < 0.0 or self.shadowing_sigma_nlos_db < 0.0:
            raise ValueError("shadowing sigmas must be >= 0")

    @property
    def breakpoint_distance_m(self) -> float:
        """LOS breakpoint distance 4 * h_RU * h_UE * f / c with f in Hz."""
        f_hz = self.carrier_freq_ghz * 1e9
        return 4.0 * self.ru_height_m * self.ue_height_m * f_hz / SPEED_OF_LIGHT_M_S

    @property
    def noise_per_prb_w(self) -> float:
        """Thermal noise PSD integrated over one PRB bandwidth, in Watts."""
        psd_w_per_hz = 10.0 ** ((self.noise_psd_dbm_hz - 30.0) / 10.0)
        return psd_w_per_hz * self.prb_bandwidth_hz


@dataclass(frozen=True)
class LinkGain:
    """One sampled RU-UE link: shadowed path loss and its linear power gain."""

    path_loss_db: float
    is_los: bool
    gain_linear: float


def _check_distance(d_m) -> None:
    if np.any(np.asarray(d_m, dtype=float) < 1.0):
        raise ValueError("distance below 1 m is outside the model's validity range")


def path_loss_los(d_m, params: ChannelParams):
    """LOS path loss in dB, piecewise around the breakpoint distance.

    Below the breakpoint: 32.4 + 21 log10(d) + 20 log10(f_GHz).
    Beyond it the distance exponent steepens to 40 with a -9.5 dB offset.
    Accepts scalars or arrays; rejects d < 1 m.
    """
    _check_distance(d_m)
    d = np.asarray(d_m, dtype=float)
    f = params.carrier_freq_ghz
    near = 32.4 + 21.0 * np.log10(d) + 20.0 * np.log10(f)
    far = 32.4 + 40.0 * np.log10(d) + 20.0 * np.log10(f) - 9.5
    out = np.where(d <= params.breakpoint_distance_m, near, far)
    return float(out) if np.ndim(d_m) == 0 else out


def path_loss_nlos(d_m, params: ChannelParams):
    """NLOS path loss in dB: 35.3 + 22.4 log10(d) + 21.3 log10(f) - 0.3 (h_UE - 1.5)."""
    _check_distance(d_m)
    d = np.asarray(d_m, dtype=float)
    out = (
        35.3
        + 22.4 * np.log10(d)
        + 21.3 * np.log10(params.carrier_freq_ghz)
        - 0.3 * (params.ue_height_m - 1.5)
    )
    return float(out) if np.ndim(d_m) == 0 else out


def los_probability(d_m):
    """Probability that a link at 2-D distance d is line-of-sight.

    1 inside 18 m, then (18/d)(1 - e^{-d/36}) + e^{-d/36}.
    """
    d = np.asarray(d_m, dtype=float)
    ratio = np.minimum(18.0 / np.maximum(d, 1e-12), 1.0)
    decay = np.exp(-d / 36.0)
    prob = np.where(d < 18.0, 1.0, ratio * (1.0 - decay) + decay)
    return float(prob) if np.ndim(d_m) == 0 else prob


def sample_link(d_m: float, params: ChannelParams, rng: np.random.Generator) -> LinkGain:
    """Draw LOS state and log-normal shadowing for one link at distance d_m.

    The LOS coin and the shadowing normal are always drawn (in that order) so the
    stream advances identically whether or not shadowing is disabled.
    """
    _check_distance(d_m)
    is_los = bool(rng.random() < los_probability(d_m))
    if is_los:
        pl = path_loss_los(d_m, params)
        sigma = params.shadowing_sigma_los_db
    else:
        pl = path_loss_nlos(d_m, params)
        sigma = params.shadowing_sigma_nlos_db
    pl = max(pl + sigma * rng.standard_normal(), 0.0)
    return LinkGain(path_loss_db=pl, is_los=is_los, gain_linear=10.0 ** (-pl / 10.0))


def sample_gain_matrix(dist_m: np.ndarray, params: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    """Sample linear power gains for a whole matrix of link distances (one slot).

    LOS states and shadowing are redrawn independently per link each call; distances
    are clamped to the 1 m model floor. Consumes one uniform and one normal per link
    regardless of the LOS outcome.
    """
    d = np.maximum(np.asarray(dist_m, dtype=float), 1.0)
    los = rng.random(d.shape) < los_probability(d)
    z = rng.standard_normal(d.shape)
    pl = np.where(
        los,
        path_loss_los(d, params) + params.shadowing_sigma_los_db * z,
        path_loss_nlos(d, params) + params.shadowing_sigma_nlos_db * z,
    )
    pl = np.maximum(pl, 0.0)
    return 10.0 ** (-pl / 10.0)


def snr_from_gain(gain_linear, p_tx_w: float, q_total: int, params: ChannelParams):
    """Per-PRB linear SNR when the RU splits p_tx_w evenly across q_total PRBs.

    Both the useful power and the noise scale with the PRB count, so the ratio is
    independent of how many PRBs the UE is granted.
    """
    if q_total < 1:
        raise ValueError("q_total must be >= 1")
    if p_tx_w <= 0.0:
        raise ValueError("p_tx_w must be > 0")
    return p_tx_w * gain_linear / (q_total * params.noise_per_prb_w)


def snr_per_prb(link: LinkGain, p_tx_w: float, q_total: int, params: ChannelParams) -> float:
    """Per-PRB SNR for a sampled link."""
    return float(snr_from_gain(link.gain_linear, p_tx_w, q_total, params))


def achievable_rate(n_prb, snr, params: ChannelParams):
    """Shannon rate n * B_PRB * log2(1 + SNR) in bit/s; linear in the PRB count."""
    return n_prb * params.prb_bandwidth_hz * np.log2(1.0 + snr)
