"""Digital linearization: null-space saturation recovery, beam-space LMS IMD
compensation and the per-antenna inverse baseline."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numba
import numpy as np

from .impairments import LnaParams
from .signal import ConfigError


@dataclass(frozen=True)
class SatRecoveryConfig:
    gamma_ratio: float = 0.95
    kappa: float = 0.01

    def __post_init__(self):
        if not 0 < self.gamma_ratio <= 1:
            raise ConfigError("gamma_ratio must lie in (0, 1]")
        if self.kappa < 0:
            raise ConfigError("kappa must be non-negative")


class UnderdeterminedWarning(UserWarning):
    """More suspected saturated antennas than null-space dimensions."""


# --------------------------------------------------------------------------
# saturation recovery

def detect_saturated_set(y_adc, threshold: float):
    """Split antenna indices into (unsaturated, suspected-saturated) by magnitude."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    mag = np.abs(np.asarray(y_adc))
    return np.flatnonzero(mag < threshold), np.flatnonzero(mag >= threshold)


def _solve_regularized(V: np.ndarray, p: np.ndarray, kappa: float) -> np.ndarray:
    k = V.shape[1]
    if k == 1:
        # matrix inversion lemma for a single column
        v = V[:, 0]
        return np.array([np.vdot(v, p) / (kappa + np.vdot(v, v).real)])
    gram = V.conj().T @ V + kappa * np.eye(k)
    if kappa == 0 and k > V.shape[0]:
        return np.linalg.lstsq(V, p, rcond=None)[0]
    return np.linalg.solve(gram, V.conj().T @ p)


def saturation_recovery(y_adc, N: np.ndarray, s_c: Sequence[int],
                        cfg: SatRecoveryConfig = SatRecoveryConfig()):
    """Estimate the saturation error on antennas ``s_c`` from null-space power.

    Returns ``(n_sat_hat, y_corrected)``; entries outside ``s_c`` are zero.
    """
    y_adc = np.asarray(y_adc, dtype=complex)
    s_c = np.asarray(s_c, dtype=int)
    n_hat = np.zeros_like(y_adc)
    if s_c.size == 0:
        return n_hat, y_adc.copy()
    if s_c.size > N.shape[0]:
        warnings.warn(f"{s_c.size} suspected saturated antennas exceed the "
                      f"{N.shape[0]}-dim null space", UnderdeterminedWarning, stacklevel=2)
    p = N @ y_adc
    n_hat[s_c] = _solve_regularized(N[:, s_c], p, cfg.kappa)
    return n_hat, y_adc - n_hat


def saturation_recovery_general(y_adc, N: np.ndarray, s_c, kappa: float) -> np.ndarray:
    """Explicit Gram-inverse path, no rank-1 shortcut (for cross-checks and timing)."""
    V = N[:, np.asarray(s_c, dtype=int)]
    gram = V.conj().T @ V + kappa * np.eye(V.shape[1])
    return np.linalg.inv(gram) @ (V.conj().T @ (N @ y_adc))


def saturation_recovery_rank1(y_adc, N: np.ndarray, k: int, kappa: float) -> complex:
    v = N[:, k]
    return np.vdot(v, N @ y_adc) / (kappa + np.vdot(v, v).real)


@numba.njit(cache=True)
def _cholesky_solve(G, b, k):
    """In-place Cholesky solve of the leading k x k block; False if not PD."""
    for j in range(k):
        d = G[j, j].real
        for m in range(j):
            d -= (G[j, m] * np.conj(G[j, m])).real
        if d <= 0.0:
            return False
        d = np.sqrt(d)
        G[j, j] = d
        for i in range(j + 1, k):
            acc = G[i, j]
            for m in range(j):
                acc -= G[i, m] * np.conj(G[j, m])
            G[i, j] = acc / d
    for i in range(k):
        acc = b[i]
        for m in range(i):
            acc -= G[i, m] * b[m]
        b[i] = acc / G[i, i].real
    for i in range(k - 1, -1, -1):
        acc = b[i]
        for m in range(i + 1, k):
            acc -= np.conj(G[m, i]) * b[m]
        b[i] = acc / G[i, i].real
    return True


@numba.njit(cache=True)
def _recover_kernel(Ct, Q, mask_t, kappa, out_t):
    """Per-sample regularized solves in the signal subspace.

    ``Ct`` holds (P y)^T sample-major (T x Nr) and ``Q`` (Nr x U) is an
    orthonormal basis of range(H), so P[S, S] = I - Q_S Q_S^H.  With
    M = (1 + kappa) I_U - Q_S^H Q_S,

        (P[S, S] + kappa I)^-1 c = (c + Q_S M^-1 Q_S^H c) / (1 + kappa),

    a U x U solve per sample whatever the size of S.
    """
    T, nr = Ct.shape
    U = Q.shape[1]
    idx = np.empty(nr, np.int64)
    M = np.empty((U, U), np.complex128)
    z = np.empty(U, np.complex128)
    flags = np.zeros(T, np.bool_)
    for t in range(T):
        k = 0
        for n in range(nr):
            if mask_t[t, n]:
                idx[k] = n
                k += 1
        if k == 0:
            continue
        c = Ct[t]
        if k == 1:
            i0 = idx[0]
            q2 = 0.0
            for u in range(U):
                q2 += Q[i0, u].real * Q[i0, u].real + Q[i0, u].imag * Q[i0, u].imag
            out_t[t, i0] = c[i0] / (kappa + 1.0 - q2)
            continue
        ridge = kappa
        while True:
            for a in range(U):
                z[a] = 0j
                for b in range(U):
                    M[a, b] = 0j
                M[a, a] = 1.0 + ridge
            for j in range(k):
                row = Q[idx[j]]
                cj = c[idx[j]]
                for a in range(U):
                    qa = np.conj(row[a])
                    z[a] += qa * cj
                    for b in range(a + 1):
                        M[a, b] -= qa * row[b]
            for a in range(U):
                for b in range(a):
                    M[b, a] = np.conj(M[a, b])
            if _cholesky_solve(M, z, U):
                break
            # singular system (kappa == 0 with too many unknowns)
            flags[t] = True
            ridge = max(ridge * 10.0, 1e-12)
        scale = 1.0 / (1.0 + ridge)
        for j in range(k):
            row = Q[idx[j]]
            acc = c[idx[j]]
            for a in range(U):
                acc += row[a] * z[a]
            out_t[t, idx[j]] = acc * scale
    return flags


def _range_basis(null_projector: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the complement of the projector's range."""
    w, V = np.linalg.eigh(np.eye(null_projector.shape[0]) - null_projector)
    return np.ascontiguousarray(V[:, w > 0.5])


def recover_frame(Y: np.ndarray, null_projector: np.ndarray, sat_mask: np.ndarray,
                  cfg: SatRecoveryConfig = SatRecoveryConfig()):
    """Saturation recovery for every column of ``Y`` (Nr x T).

    Works from the projector ``P = N^H N``: V^H V = P[S, S] and
    V^H p = (P y)[S].  Returns ``(N_hat, Y_corrected, underdetermined)``;
    the flag marks samples with more suspected antennas than null-space
    dimensions or a singular unregularized system.
    """
    Y = np.asarray(Y, dtype=np.complex128)
    if sat_mask.shape != Y.shape:
        raise ValueError("sat_mask must match Y")
    P = np.asarray(null_projector, dtype=np.complex128)
    null_dim = int(round(np.trace(P).real))
    Q = _range_basis(P)
    PY = Y - Q @ (Q.conj().T @ Y)
    out_t = np.zeros(Y.shape[::-1], dtype=np.complex128)
    flags = _recover_kernel(np.ascontiguousarray(PY.T), Q,
                            np.ascontiguousarray(sat_mask.T, dtype=np.bool_),
                            float(cfg.kappa), out_t)
    flags |= sat_mask.sum(axis=0) > null_dim
    n_hat = out_t.T
    return n_hat, Y - n_hat, flags


@numba.njit(cache=True)
def _direct_kernel(Pt, Nt, mask_t, kappa, out_t):
    """Solve from null-space samples p = N y using columns of N explicitly.

    ``Pt`` is T x (Nr-U), ``Nt`` = N.T is Nr x (Nr-U).  Per sample this costs
    O(m k^2 + k^3) for k suspected antennas and O(m) when k == 1.
    """
    T, m = Pt.shape
    nr = Nt.shape[0]
    idx = np.empty(nr, np.int64)
    G = np.empty((nr, nr), np.complex128)
    b = np.empty(nr, np.complex128)
    for t in range(T):
        k = 0
        for n in range(nr):
            if mask_t[t, n]:
                idx[k] = n
                k += 1
        if k == 0:
            continue
        p = Pt[t]
        if k == 1:
            v = Nt[idx[0]]
            num = 0j
            den = kappa
            for j in range(m):
                num += np.conj(v[j]) * p[j]
                den += v[j].real * v[j].real + v[j].imag * v[j].imag
            out_t[t, idx[0]] = num / den
            continue
        for a in range(k):
            va = Nt[idx[a]]
            acc = 0j
            for j in range(m):
                acc += np.conj(va[j]) * p[j]
            b[a] = acc
            for c in range(a + 1):
                vc = Nt[idx[c]]
                g = 0j
                for j in range(m):
                    g += np.conj(va[j]) * vc[j]
                G[a, c] = g
                G[c, a] = np.conj(g)
            G[a, a] += kappa
        if not _cholesky_solve(G, b, k):
            for a in range(k):
                b[a] = np.nan
        for a in range(k):
            out_t[t, idx[a]] = b[a]


def recover_frame_direct(Y: np.ndarray, N: np.ndarray, sat_mask: np.ndarray,
                         cfg: SatRecoveryConfig = SatRecoveryConfig()):
    """Same estimate as :func:`recover_frame`, computed literally from
    p = N y and V = N[:, S]; requires ``kappa > 0`` when the Gram matrix can be
    singular."""
    Y = np.asarray(Y, dtype=np.complex128)
    Pt = np.ascontiguousarray((N @ Y).T)
    Nt = np.ascontiguousarray(N.T)
    out_t = np.zeros(Y.shape[::-1], dtype=np.complex128)
    _direct_kernel(Pt, Nt, np.ascontiguousarray(sat_mask.T, dtype=np.bool_), float(cfg.kappa), out_t)
    n_hat = out_t.T
    return n_hat, Y - n_hat


# --------------------------------------------------------------------------
# per-antenna inverse

def _cubic_seed(target, p: LnaParams):
    """Root of beta1*r + beta3*r**3 = target on the rising branch (beta3 < 0)."""
    a = -p.beta3
    pp = -p.beta1 / a
    q = target / a
    arg = np.clip((3.0 * q / (2.0 * pp)) * np.sqrt(-3.0 / pp), -1.0, 1.0)
    phi = np.arccos(arg)
    return 2.0 * np.sqrt(-pp / 3.0) * np.cos(phi / 3.0 - 2.0 * np.pi / 3.0)


def per_antenna_inverse(y_adc, p: LnaParams, tol: float = 1e-15, max_iter: int = 60):
    """Invert the small-signal AM-AM curve sample by sample, keeping the phase.

    The magnitude solves beta1*r + beta3*r**3 = |y| on [0, p.invertible_radius]
    by bracketed Newton iteration.  Magnitudes at or above the curve's value at
    that radius map to the radius itself; saturation is not invertible.
    """
    y = np.asarray(y_adc, dtype=complex)
    mag = np.abs(y)
    r_top = p.invertible_radius
    if p.beta3 == 0:
        r = mag / p.beta1
        if np.isfinite(r_top):
            r = np.minimum(r, r_top)
    else:
        f_top = p.beta1 * r_top + p.beta3 * r_top**3 if np.isfinite(r_top) else np.inf
        target = np.minimum(mag, f_top)
        if p.beta3 < 0:
            r = np.minimum(_cubic_seed(target, p), r_top)
            hi = np.full_like(mag, r_top)
        else:
            r = target / p.beta1
            hi = r.copy()
        lo = np.zeros_like(mag)
        for _ in range(max_iter):
            f = p.beta1 * r + p.beta3 * r**3 - target
            lo = np.where(f <= 0, r, lo)
            hi = np.where(f >= 0, r, hi)
            d = p.beta1 + 3.0 * p.beta3 * r**2
            with np.errstate(divide="ignore", invalid="ignore"):
                step = r - f / d
            bad = ~np.isfinite(step) | (step < lo) | (step > hi)
            new = np.where(bad, 0.5 * (lo + hi), step)
            scale = np.maximum(np.abs(new), 1e-300)
            # near the AM-AM peak the root is ill-conditioned; stop on the residual there
            done = bool(np.all((np.abs(new - r) <= tol * scale)
                               | (np.abs(f) <= 8 * np.finfo(float).eps * target)))
            r = new
            if done:
                break
        if np.isfinite(r_top):
            r = np.where(mag >= f_top, r_top, r)
    # exp(j*angle) stays finite for subnormal inputs where y/|y| overflows
    out = np.where(mag > 0, np.exp(1j * np.angle(y)) * r, 0.0)
    return out if out.ndim else complex(out)


# --------------------------------------------------------------------------
# beam-space LMS

def select_streams(powers_linear, eta: float) -> np.ndarray:
    """Indices of streams with power at least ``eta``."""
    if eta < 0:
        raise ValueError("eta must be non-negative")
    return np.flatnonzero(np.asarray(powers_linear, dtype=float) >= eta)


@dataclass
class LmsState:
    """Per-stream LMS weights for beam-space IMD compensation.

    ``variant`` selects the recursion:

    * ``"literal"``: regressor r_i = s_i * P with P the active-set power,
      error e_i = s_i - w_i r_i, update w_i += mu * e_i * conj(r_i).
    * ``"centered"``: the power is centered on its running mean, and the
      update takes its regressor from the output, w_i += mu * e_i * conj(e_i * (P - Pbar)),
      which drives the output envelope to be uncorrelated with the
      interferer power.
    """

    weights: np.ndarray
    mu: np.ndarray
    active_set: np.ndarray
    streams: np.ndarray
    eta: float = 0.0
    variant: str = "centered"
    weight_bound: float = np.inf
    power_sum: float = 0.0
    count: int = 0
    divergence_events: int = 0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=complex).copy()
        self.mu = np.broadcast_to(np.asarray(self.mu, dtype=float), self.weights.shape).copy()
        self.active_set = np.asarray(self.active_set, dtype=int)
        self.streams = np.asarray(self.streams, dtype=int)
        if self.variant not in ("literal", "centered"):
            raise ConfigError(f"unknown LMS variant {self.variant!r}")
        if self.streams.size != self.weights.size:
            raise ConfigError("one weight per compensated stream required")
        if np.any(self.mu < 0):
            raise ConfigError("mu must be non-negative")

    def copy(self) -> "LmsState":
        return replace(self)

    @property
    def power_mean(self) -> float:
        return self.power_sum / self.count if self.count else 0.0


def beamspace_compensate_step(s_hat, state: LmsState):
    """One time sample of beam-space compensation.

    Returns ``(s_comp, new_state)``; streams not in ``state.streams`` pass through.
    """
    s_hat = np.asarray(s_hat, dtype=complex)
    if not np.all(np.isfinite(s_hat)):
        raise ValueError("non-finite beam-space sample")
    if state.active_set.size == 0:
        raise ValueError("empty active stream set")
    st = state.copy()
    power = float(np.sum(np.abs(s_hat[st.active_set]) ** 2))
    st.power_sum += power
    st.count += 1
    out = s_hat.copy()
    for j, i in enumerate(st.streams):
        w = st.weights[j]
        if st.variant == "literal":
            r = s_hat[i] * power
            e = s_hat[i] - w * r
            w_new = w + st.mu[j] * e * np.conj(r)
        else:
            r = s_hat[i] * (power - st.power_mean)
            e = s_hat[i] - w * r
            w_new = w + st.mu[j] * e * np.conj(e) * (power - st.power_mean)
        if abs(w_new) > st.weight_bound:
            st.mu[j] *= 0.5
            st.divergence_events += 1
            w_new = w
        st.weights[j] = w_new
        out[i] = e
    return out, st


def beamspace_compensate(S_hat: np.ndarray, state: LmsState, epochs: int = 1):
    """Run the LMS over a U x T block, sample by sample.

    Output is taken from the last epoch; weights carry over between epochs.
    Equivalent to repeated :func:`beamspace_compensate_step`, but with the
    per-sample work done on Python scalars.
    """
    S_hat = np.asarray(S_hat, dtype=complex)
    if not np.all(np.isfinite(S_hat)):
        raise ValueError("non-finite beam-space samples")
    st = state.copy()
    powers = np.sum(np.abs(S_hat[st.active_set]) ** 2, axis=0)
    out = S_hat.copy()
    for _ in range(epochs):
        if st.variant == "centered":
            csum = st.power_sum + np.cumsum(powers)
            means = csum / (st.count + np.arange(1, powers.size + 1))
            drive = (powers - means).tolist()
        else:
            drive = powers.tolist()
        st.power_sum += float(powers.sum())
        st.count += powers.size
        for j, i in enumerate(st.streams):
            x = S_hat[i].tolist()
            w = complex(st.weights[j])
            mu = float(st.mu[j])
            bound = st.weight_bound
            e_out = [0j] * len(x)
            literal = st.variant == "literal"
            for n, (xn, pn) in enumerate(zip(x, drive)):
                r = xn * pn
                e = xn - w * r
                if literal:
                    w_new = w + mu * e * r.conjugate()
                else:
                    w_new = w + mu * (e.real * e.real + e.imag * e.imag) * pn
                if abs(w_new) > bound:
                    mu *= 0.5
                    st.divergence_events += 1
                else:
                    w = w_new
                e_out[n] = e
            st.weights[j] = w
            st.mu[j] = mu
            out[i] = np.asarray(e_out)
    return out, st


def default_lms_state(S_hat: np.ndarray, streams, active_set, variant: str = "centered",
                      mu0: float | None = None, warmup: int = 1000, eta: float = 0.0,
                      weight_bound: float | None = None) -> LmsState:
    """Zero-initialized state with mu = mu0 / mean|r_i|^2 over the first ``warmup`` samples."""
    S_hat = np.asarray(S_hat)
    streams = np.atleast_1d(np.asarray(streams, dtype=int))
    active_set = np.atleast_1d(np.asarray(active_set, dtype=int))
    if mu0 is None:
        mu0 = 0.1 if variant == "literal" else 2e-4
    head = S_hat[:, :warmup]
    p = np.sum(np.abs(head[active_set]) ** 2, axis=0)
    if variant == "centered":
        p = p - p.mean()
    mus = []
    for i in streams:
        scale = float(np.mean(np.abs(head[i] * p) ** 2))
        mus.append(mu0 / scale if scale > 0 else 0.0)
    if weight_bound is None:
        pm = float(np.mean(np.sum(np.abs(head[active_set]) ** 2, axis=0)))
        weight_bound = 1e3 / pm if pm > 0 else np.inf
    return LmsState(weights=np.zeros(streams.size, dtype=complex), mu=np.array(mus),
                    active_set=active_set, streams=streams, eta=eta, variant=variant,
                    weight_bound=weight_bound)
