"""Geometric multi-user SIMO channel for a half-wavelength ULA."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .signal import ConfigError, TransmitFrame


class ConditioningError(ValueError):
    """The channel matrix is (numerically) rank deficient."""


class OutOfVisibleSpace(ValueError):
    """An IMD image direction has |sin| > 1 and does not radiate."""


def steering_vector(theta: float, nr: int) -> np.ndarray:
    """ULA response, element n (0-based) = exp(j*pi*n*sin(theta))."""
    if nr < 1:
        raise ConfigError("nr must be >= 1")
    return np.exp(1j * np.pi * np.arange(nr) * np.sin(theta))


@dataclass(frozen=True)
class MultiUserChannel:
    """Channel matrix ``H`` (Nr x U), null-space basis ``N`` ((Nr-U) x Nr) and ZF combiner ``Wh`` (U x Nr).

    Rows of ``N`` are orthonormal and ``N @ H == 0``.
    """

    H: np.ndarray
    aoas: np.ndarray
    N: np.ndarray
    Wh: np.ndarray

    @property
    def nr(self) -> int:
        return self.H.shape[0]

    @property
    def num_users(self) -> int:
        return self.H.shape[1]

    @property
    def null_projector(self) -> np.ndarray:
        """``N^H N``, the orthogonal projector onto the null space (Nr x Nr)."""
        return self.N.conj().T @ self.N


def build_channel(aoas, nr: int, cond_limit: float = 1e8) -> MultiUserChannel:
    aoas = np.atleast_1d(np.asarray(aoas, dtype=float))
    U = aoas.size
    if U >= nr:
        raise ConfigError(f"need fewer users than antennas (U={U}, Nr={nr})")
    H = np.column_stack([steering_vector(t, nr) for t in aoas])
    # full QR: first U columns span range(H), the rest its orthogonal complement
    Q, R = scipy.linalg.qr(H, mode="full")
    diag = np.abs(np.diag(R))
    if diag.min() <= diag.max() / cond_limit:
        raise ConditioningError("channel matrix is rank deficient (repeated sin(AoA)?)")
    N = Q[:, U:].conj().T
    # (H^H H)^-1 H^H via the thin QR factors
    Wh = scipy.linalg.solve_triangular(R[:U, :U], Q[:, :U].conj().T)
    return MultiUserChannel(H=H, aoas=aoas, N=N, Wh=Wh)


def apply_channel(ch: MultiUserChannel, frame) -> np.ndarray:
    """Noise-free received samples, column t = H @ s_t."""
    s = frame.samples if isinstance(frame, TransmitFrame) else np.asarray(frame)
    if s.ndim != 2 or s.shape[0] != ch.num_users:
        raise ValueError(f"frame has {s.shape[0] if s.ndim == 2 else '?'} rows, channel has {ch.num_users} users")
    return ch.H @ s


def draw_aoas(rng: np.random.Generator, num_users: int, nr: int,
              limit: float = np.pi / 3, max_tries: int = 10_000) -> np.ndarray:
    """Uniform AoAs in [-limit, limit] with pairwise |sin a - sin b| >= 2/nr."""
    min_sep = 2.0 / nr
    for _ in range(max_tries):
        aoas = rng.uniform(-limit, limit, size=num_users)
        s = np.sort(np.sin(aoas))
        if num_users < 2 or np.min(np.diff(s)) >= min_sep:
            return aoas
    raise ConfigError("could not draw AoAs with the required separation")


def imd_kernel(theta_l: float, theta_m: float, theta_n: float, nr: int) -> complex:
    """Array factor of the IMD image at sin(w) = sin(l) + sin(m) - sin(n).

    Returns sum_{k<nr} exp(j*pi*k*sin(w)) in closed form.
    """
    u = np.sin(theta_l) + np.sin(theta_m) - np.sin(theta_n)
    if abs(u) > 1.0 + 1e-12:
        raise OutOfVisibleSpace(f"image at sin(w)={u:.4f} lies outside [-1, 1]")
    u = float(np.clip(u, -1.0, 1.0))
    den = 1.0 - np.exp(1j * np.pi * u)
    if abs(den) < 1e-12:
        return complex(nr)
    return complex((1.0 - np.exp(1j * np.pi * nr * u)) / den)
