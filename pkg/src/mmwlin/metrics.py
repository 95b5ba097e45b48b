"""Bussgang distortion metric and link budget arithmetic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DistortionReport:
    alpha: complex
    d: float
    d_bar: float
    mse: float

    @property
    def d_bar_db(self) -> float:
        return float(10.0 * np.log10(max(self.d_bar, 1e-300)))


def bussgang_distortion(s, s_hat) -> DistortionReport:
    """Residual power after the best complex scaling of ``s_hat`` onto ``s``.

    D = min_a mean|s - a*s_hat|^2 and D_bar = D / mean|s|^2.
    """
    s = np.asarray(s).ravel()
    s_hat = np.asarray(s_hat).ravel()
    if s.size != s_hat.size:
        raise ValueError("s and s_hat must have equal length")
    if s.size < 2:
        raise ValueError("need at least two samples")
    ps = float(np.mean(np.abs(s) ** 2))
    if ps == 0.0:
        raise ValueError("reference signal is all zero")
    phh = float(np.mean(np.abs(s_hat) ** 2))
    mse = float(np.mean(np.abs(s - s_hat) ** 2))
    if phh == 0.0:
        return DistortionReport(alpha=0j, d=ps, d_bar=1.0, mse=mse)
    cross = complex(np.vdot(s_hat, s)) / s.size
    alpha = cross / phh
    d = max(ps - abs(cross) ** 2 / phh, 0.0)
    return DistortionReport(alpha=alpha, d=d, d_bar=min(d / ps, 1.0), mse=mse)


def link_budget(tx_dbm: float, tx_gain_db: float, pathloss_db: float,
                rx_elem_gain_db: float, papr_db: float) -> tuple[float, float]:
    """Per-element received average and peak power in dBm."""
    rx = tx_dbm + tx_gain_db - pathloss_db + rx_elem_gain_db
    return rx, rx + papr_db
