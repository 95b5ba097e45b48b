"""LNA nonlinearity and low-resolution ADC models."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .signal import DEFAULT_IMPEDANCE, ConfigError, dbm_to_amplitude, amplitude_to_dbm


@dataclass(frozen=True)
class LnaParams:
    """Memoryless third-order LNA with hard saturation.

    ``beta3`` is in V^-2.  With ``saturate=False`` the polynomial branch is
    used for every input (the knee values are kept for reference).
    """

    beta1: float
    beta3: float
    v_sat: float
    v_max: float
    saturate: bool = True

    def __post_init__(self):
        if self.beta1 <= 0:
            raise ConfigError("beta1 must be positive")
        if self.v_sat < 0:
            raise ConfigError("v_sat must be non-negative")

    @property
    def peak_radius(self) -> float:
        """Input magnitude where the cubic AM-AM curve peaks (inf if beta3 >= 0)."""
        if self.beta3 >= 0:
            return np.inf
        return float(np.sqrt(self.beta1 / (3.0 * abs(self.beta3))))

    @property
    def invertible_radius(self) -> float:
        """Largest input magnitude on which the AM-AM curve is strictly increasing."""
        if self.saturate:
            return min(self.v_sat, self.peak_radius)
        return self.peak_radius

    def clip_only(self) -> "LnaParams":
        """Same knee, cubic term removed (pure linear gain + saturation)."""
        return replace(self, beta3=0.0, v_max=self.beta1 * self.v_sat, saturate=True)

    def poly_only(self) -> "LnaParams":
        return replace(self, saturate=False)

    def linear(self) -> "LnaParams":
        return replace(self, beta3=0.0, v_sat=np.inf, v_max=np.inf, saturate=False)


def lna_params_from_spec(gain_db: float, iip3_dbm: float,
                         impedance_ohm: float = DEFAULT_IMPEDANCE) -> LnaParams:
    """Coefficients from small-signal gain and IIP3.

    Uses the two-tone identity A_ip3**2 = 4*beta1 / (3*|beta3|) with the knee
    placed at a quarter of the intercept amplitude.
    """
    if not (np.isfinite(gain_db) and np.isfinite(iip3_dbm)):
        raise ConfigError("gain_db and iip3_dbm must be finite")
    beta1 = 10.0 ** (gain_db / 20.0)
    a_ip3 = dbm_to_amplitude(iip3_dbm, impedance_ohm)
    beta3 = -4.0 * beta1 / (3.0 * a_ip3**2)
    v_sat = a_ip3 / 4.0
    v_max = beta1 * v_sat + beta3 * v_sat**3
    return LnaParams(beta1=beta1, beta3=beta3, v_sat=v_sat, v_max=v_max)


def iip3_dbm_from_params(p: LnaParams, impedance_ohm: float = DEFAULT_IMPEDANCE) -> float:
    a_ip3 = np.sqrt(4.0 * p.beta1 / (3.0 * abs(p.beta3)))
    return amplitude_to_dbm(a_ip3, impedance_ohm)


def lna(x, p: LnaParams):
    """Apply the AM-AM model elementwise (no AM-PM, no noise)."""
    x = np.asarray(x, dtype=complex)
    mag = np.abs(x)
    y = x * (p.beta1 + p.beta3 * mag**2)
    if p.saturate:
        over = mag > p.v_sat
        if np.any(over):
            y = np.where(over, x / np.where(over, mag, 1.0) * p.v_max, y)
    return y if y.ndim else complex(y)


@dataclass(frozen=True)
class AdcConfig:
    """Mid-rise uniform quantizer applied separately to I and Q.

    ``clip_level`` is the half-range per real dimension; ``loading_fraction``
    is what the AGC multiplies the per-dimension RMS by to set it.
    """

    bits: int
    clip_level: float = 1.0
    loading_fraction: float = 3.0

    def __post_init__(self):
        if not 1 <= self.bits <= 12:
            raise ConfigError("bits must lie in [1, 12]")
        if self.clip_level <= 0:
            raise ConfigError("clip_level must be positive")
        if not 0 < self.loading_fraction <= 4.0 + 1e-12:
            raise ConfigError("loading_fraction must lie in (0, 4]")

    @property
    def step(self) -> float:
        return 2.0 * self.clip_level / 2**self.bits


def agc_clip_level(rms_per_dim: float, cfg: AdcConfig) -> float:
    if not rms_per_dim > 0:
        raise ValueError("AGC needs a positive RMS")
    return cfg.loading_fraction * rms_per_dim


def rms_per_dim(y) -> float:
    """Per-real-dimension RMS pooled over all antennas and samples."""
    y = np.asarray(y)
    return float(np.sqrt(np.mean(np.abs(y) ** 2) / 2.0))


def agc(y, cfg: AdcConfig) -> AdcConfig:
    """Return ``cfg`` with a single clip level set from the array-wide RMS of ``y``."""
    return replace(cfg, clip_level=agc_clip_level(rms_per_dim(y), cfg))


def _quantize_real(v: np.ndarray, bits: int, c: float) -> np.ndarray:
    delta = 2.0 * c / 2**bits
    k = np.floor(v / delta)
    k = np.clip(k, -(2 ** (bits - 1)), 2 ** (bits - 1) - 1)
    return delta * (k + 0.5)


def quantize(y, cfg: AdcConfig):
    y = np.asarray(y, dtype=complex)
    q = _quantize_real(y.real, cfg.bits, cfg.clip_level) + 1j * _quantize_real(y.imag, cfg.bits, cfg.clip_level)
    return q if q.ndim else complex(q)


def optimize_loading_fraction(calibration_signal, bits: int, grid) -> float:
    """Grid value minimizing the Bussgang-normalized quantization distortion.

    Ties go to the smaller fraction.
    """
    from .metrics import bussgang_distortion

    sig = np.asarray(calibration_signal).ravel()
    grid = np.asarray(list(grid), dtype=float)
    if sig.size == 0:
        raise ValueError("empty calibration signal")
    if grid.size == 0:
        raise ValueError("empty loading-fraction grid")
    sigma = rms_per_dim(sig)
    best, best_d = None, np.inf
    for f in np.sort(grid):
        q = quantize(sig, AdcConfig(bits=bits, clip_level=f * sigma, loading_fraction=f))
        d = bussgang_distortion(sig, q).d_bar
        if d < best_d:
            best, best_d = float(f), d
    return best
