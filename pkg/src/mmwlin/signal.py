"""Multi-user baseband waveform generation and power/amplitude conversion.

Power convention: a level of ``P`` dBm maps to the peak amplitude of a
sinusoid dissipating ``P`` in ``impedance_ohm``, ``A = sqrt(2 P R)``.  A
complex baseband sequence "at P dBm" has RMS magnitude ``A / sqrt(2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

DEFAULT_IMPEDANCE = 50.0


class ConfigError(ValueError):
    """Raised for invalid or inconsistent configuration values."""


@dataclass(frozen=True)
class WaveformConfig:
    modulation_order: int = 16
    oversampling_factor: int = 5
    symbol_count: int = 10_000
    pulse_shape: str = "rrc"  # "rrc" or "rect"
    rolloff: float = 0.3
    span_symbols: int = 8
    seed: int = 0

    def __post_init__(self):
        m = self.modulation_order
        side = int(round(np.sqrt(m))) if m > 0 else 0
        if m < 4 or side * side != m:
            raise ConfigError(f"modulation_order must be a perfect square >= 4, got {m}")
        if self.oversampling_factor < 1:
            raise ConfigError("oversampling_factor must be >= 1")
        if self.symbol_count < 1:
            raise ConfigError("symbol_count must be >= 1")
        if self.pulse_shape not in ("rrc", "rect"):
            raise ConfigError(f"unknown pulse_shape {self.pulse_shape!r}")
        if not 0.0 <= self.rolloff <= 1.0:
            raise ConfigError("rolloff must lie in [0, 1]")
        if self.span_symbols < 1:
            raise ConfigError("span_symbols must be >= 1")

    @property
    def num_samples(self) -> int:
        return self.symbol_count * self.oversampling_factor


@dataclass
class TransmitFrame:
    """Per-user transmit samples (U x T), in volts at the antenna reference plane."""

    samples: np.ndarray
    per_user_power_dbm: np.ndarray

    @property
    def num_users(self) -> int:
        return self.samples.shape[0]


def qam_alphabet(order: int) -> np.ndarray:
    """Unit average energy square QAM constellation."""
    side = int(round(np.sqrt(order)))
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    points = (levels[:, None] + 1j * levels[None, :]).ravel()
    return points / np.sqrt(np.mean(np.abs(points) ** 2))


def rrc_taps(rolloff: float, span: int, sps: int) -> np.ndarray:
    """Root-raised-cosine taps normalized so that sum(h**2) == sps.

    With this normalization a zero-stuffed unit-energy symbol stream comes out
    with unit average power.
    """
    n = np.arange(-span * sps // 2, span * sps // 2 + 1, dtype=float)
    t = n / sps
    b = rolloff
    h = np.empty_like(t)
    for i, ti in enumerate(t):
        if np.isclose(ti, 0.0):
            h[i] = 1.0 - b + 4.0 * b / np.pi
        elif b > 0 and np.isclose(abs(ti), 1.0 / (4.0 * b)):
            h[i] = (b / np.sqrt(2.0)) * (
                (1 + 2 / np.pi) * np.sin(np.pi / (4 * b)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * b))
            )
        else:
            num = np.sin(np.pi * ti * (1 - b)) + 4 * b * ti * np.cos(np.pi * ti * (1 + b))
            den = np.pi * ti * (1 - (4 * b * ti) ** 2)
            h[i] = num / den
    return h * np.sqrt(sps / np.sum(h**2))


def _user_row(cfg: WaveformConfig, seq: np.random.SeedSequence) -> np.ndarray:
    rng = np.random.default_rng(seq)
    alphabet = qam_alphabet(cfg.modulation_order)
    symbols = alphabet[rng.integers(0, cfg.modulation_order, size=cfg.symbol_count)]
    L = cfg.oversampling_factor
    if cfg.pulse_shape == "rect":
        return np.repeat(symbols, L)
    up = np.zeros(cfg.symbol_count * L, dtype=complex)
    up[::L] = symbols
    taps = rrc_taps(cfg.rolloff, cfg.span_symbols, L)
    # circular convolution keeps the frame stationary (no edge transients)
    spectrum = np.fft.fft(up) * np.fft.fft(taps, up.size)
    out = np.fft.ifft(spectrum)
    return np.roll(out, -(taps.size // 2))


def gen_qam_frame(cfg: WaveformConfig, num_users: int = 1) -> np.ndarray:
    """Unit-power oversampled QAM streams, one row per user.

    Each user draws from its own child of ``SeedSequence(cfg.seed)``, so row
    ``u`` does not depend on how many other rows are generated.
    """
    if num_users < 1:
        raise ConfigError("num_users must be >= 1")
    children = np.random.SeedSequence(cfg.seed).spawn(num_users)
    return np.vstack([_user_row(cfg, c) for c in children])


def dbm_to_amplitude(power_dbm, impedance_ohm: float = DEFAULT_IMPEDANCE):
    """Peak amplitude (V) of a sinusoid carrying ``power_dbm`` into ``impedance_ohm``."""
    if impedance_ohm <= 0:
        raise ConfigError("impedance_ohm must be positive")
    watts = 10.0 ** ((np.asarray(power_dbm, dtype=float) - 30.0) / 10.0)
    amp = np.sqrt(2.0 * watts * impedance_ohm)
    return float(amp) if amp.ndim == 0 else amp


def amplitude_to_dbm(amplitude, impedance_ohm: float = DEFAULT_IMPEDANCE):
    """Inverse of :func:`dbm_to_amplitude`."""
    watts = np.asarray(amplitude, dtype=float) ** 2 / (2.0 * impedance_ohm)
    out = 10.0 * np.log10(watts) + 30.0
    return float(out) if out.ndim == 0 else out


def rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.abs(x) ** 2)))


def measured_power_dbm(samples: np.ndarray, impedance_ohm: float = DEFAULT_IMPEDANCE) -> float:
    """Power of a complex sequence under the module's convention."""
    return amplitude_to_dbm(np.sqrt(2.0) * rms(samples), impedance_ohm)


def scale_to_power(samples: np.ndarray, target_dbm: float,
                   impedance_ohm: float = DEFAULT_IMPEDANCE) -> np.ndarray:
    """Scale ``samples`` by a positive real constant to land at ``target_dbm``."""
    samples = np.asarray(samples)
    if samples.size == 0:
        raise ValueError("cannot scale an empty sequence")
    current = rms(samples)
    if current == 0.0 or not np.isfinite(current):
        raise ValueError("cannot scale a sequence with zero or non-finite RMS")
    target = dbm_to_amplitude(target_dbm, impedance_ohm) / np.sqrt(2.0)
    return samples * (target / current)


def make_frame(cfg: WaveformConfig, per_user_power_dbm,
               impedance_ohm: float = DEFAULT_IMPEDANCE) -> TransmitFrame:
    """Generate a frame and set each row to its requested power."""
    powers = np.atleast_1d(np.asarray(per_user_power_dbm, dtype=float))
    base = gen_qam_frame(cfg, powers.size)
    rows = [scale_to_power(base[u], powers[u], impedance_ohm) for u in range(powers.size)]
    return TransmitFrame(np.vstack(rows), powers)


def papr_db(samples: np.ndarray) -> float:
    p = np.abs(np.asarray(samples)) ** 2
    return float(10.0 * np.log10(p.max() / p.mean()))


def split_power_dbm(total_dbm: float, count: int, weights: Optional[np.ndarray] = None) -> np.ndarray:
    """Split a total power over ``count`` users, equally unless ``weights`` are given."""
    if weights is None:
        weights = np.ones(count)
    weights = np.asarray(weights, dtype=float)
    if weights.size != count or np.any(weights <= 0):
        raise ConfigError("weights must be positive, one per user")
    frac = weights / weights.sum()
    return total_dbm + 10.0 * np.log10(frac)
