"""Block-fading uplink channel with COST-231 Hata path loss.

Only the real part of the complex baseband model is simulated, so the
small-scale coefficient is N(0, 1/2) and the default noise variance is 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_NOISE_VARIANCE = 0.5
HATA_BAND_MHZ = (1500.0, 2000.0)


@dataclass(frozen=True)
class CellGeometry:
    """Device-to-server distances (km) and the Hata model parameters."""

    distances: np.ndarray
    carrier_mhz: float = 1800.0
    bs_height_m: float = 30.0
    ms_height_m: float = 1.5
    cell_radius_km: float = 1.0
    city_correction_db: float = 0.0

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=float)
        object.__setattr__(self, "distances", d)
        if np.any(d <= 0) or np.any(d > self.cell_radius_km):
            raise ValueError(f"distances must lie in (0, {self.cell_radius_km}] km")
        lo, hi = HATA_BAND_MHZ
        if not lo <= self.carrier_mhz <= hi:
            raise ValueError(f"carrier {self.carrier_mhz} MHz outside COST-231 band [{lo}, {hi}]")

    @property
    def num_devices(self) -> int:
        return self.distances.size

    @classmethod
    def uniform_disk(cls, rng: np.random.Generator, num_devices: int,
                     cell_radius_km: float = 1.0, min_distance_km: float = 0.01,
                     **params) -> "CellGeometry":
        """Place devices area-uniformly in a disk around the server.

        Radii below ``min_distance_km`` are clipped; the model is meaningless
        at zero distance.
        """
        r = cell_radius_km * np.sqrt(rng.uniform(size=num_devices))
        r = np.clip(r, min_distance_km, cell_radius_km)
        return cls(r, cell_radius_km=cell_radius_km, **params)


@dataclass(frozen=True)
class ChannelState:
    coefficients: np.ndarray
    noise_variance: float = DEFAULT_NOISE_VARIANCE
    magnitudes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h = np.asarray(self.coefficients, dtype=float)
        if not np.all(np.isfinite(h)):
            raise ValueError("channel coefficients must be finite")
        if not self.noise_variance > 0:
            raise ValueError("noise_variance must be positive")
        object.__setattr__(self, "coefficients", h)
        object.__setattr__(self, "magnitudes", np.abs(h))

    @property
    def num_devices(self) -> int:
        return self.coefficients.size


def hata_path_loss_db(distance_km, carrier_mhz=1800.0, bs_height_m=30.0,
                      ms_height_m=1.5, city_correction_db=0.0):
    """COST-231 Hata path loss in dB with the medium-city mobile correction."""
    d = np.asarray(distance_km, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    lo, hi = HATA_BAND_MHZ
    if not lo <= carrier_mhz <= hi:
        raise ValueError(f"carrier {carrier_mhz} MHz outside COST-231 band [{lo}, {hi}]")
    log_f = np.log10(carrier_mhz)
    log_hb = np.log10(bs_height_m)
    a_hm = (1.1 * log_f - 0.7) * ms_height_m - (1.56 * log_f - 0.8)
    return (46.3 + 33.9 * log_f - 13.82 * log_hb - a_hm
            + (44.9 - 6.55 * log_hb) * np.log10(d) + city_correction_db)


def path_loss_cost231(distance_km, geometry: CellGeometry):
    """Amplitude gain 10^(-PL/20) at the given distance(s)."""
    pl = hata_path_loss_db(distance_km, geometry.carrier_mhz, geometry.bs_height_m,
                           geometry.ms_height_m, geometry.city_correction_db)
    return 10.0 ** (-pl / 20.0)


def sample_block_fading(rng: np.random.Generator, geometry: CellGeometry,
                        normalized: bool = True,
                        noise_variance: float = DEFAULT_NOISE_VARIANCE) -> ChannelState:
    """One round of real-valued Rayleigh block fading.

    ``h_k = a_k * s_k`` with ``s_k ~ N(0, 1/2)``; ``a_k`` is the path-loss
    amplitude, or 1 when ``normalized`` is set.
    """
    s = rng.normal(0.0, np.sqrt(0.5), size=geometry.num_devices)
    if normalized:
        return ChannelState(s, noise_variance)
    return ChannelState(path_loss_cost231(geometry.distances, geometry) * s, noise_variance)


def mac_receive(blocks, channel: ChannelState, rng: np.random.Generator | None = None):
    """Superpose ``sum_k h_k x_k`` and add N(0, noise_variance) noise.

    ``blocks`` has shape (K, M). With ``rng=None`` the reception is noiseless.
    """
    x = np.asarray(blocks, dtype=float)
    if x.ndim != 2:
        raise ValueError("blocks must be a (K, M) array")
    if x.shape[0] != channel.num_devices:
        raise ValueError(f"got {x.shape[0]} blocks for {channel.num_devices} channel coefficients")
    y = channel.coefficients @ x
    if rng is not None:
        y = y + rng.normal(0.0, np.sqrt(channel.noise_variance), size=y.shape)
    return y
