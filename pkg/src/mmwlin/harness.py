"""Monte-Carlo link simulation: scenario configs, sweeps and result files.

The chain per trial is

    QAM frames -> H -> LNA -> AGC + ADC -> [recovery | per-antenna inverse]
               -> ZF combiner -> [beam-space LMS] -> Bussgang metric (SOI)

Every trial draws its AoAs and waveforms from ``SeedSequence([master_seed, trial])``.
Sweep points reuse the trial's draws (common random numbers), so curves are
smooth in the swept parameter and results do not depend on execution order.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import channel as chn
from .impairments import (AdcConfig, LnaParams, agc, lna, lna_params_from_spec,
                          optimize_loading_fraction, quantize)
from .linearize import (SatRecoveryConfig, beamspace_compensate, default_lms_state,
                        per_antenna_inverse, recover_frame, select_streams,
                        _direct_kernel)
from .metrics import bussgang_distortion
from .signal import (ConfigError, DEFAULT_IMPEDANCE, WaveformConfig, dbm_to_amplitude,
                     gen_qam_frame, split_power_dbm)

METHODS = ("floor", "none", "sat-recovery", "beamspace", "per-antenna")
LNA_MODES = ("full", "clip-only", "poly-only", "linear")
AXES = ("input_power", "iip3", "adc_bits")

# methods that make sense for each LNA mode
_ALLOWED = {
    "linear": {"floor", "none", "per-antenna"},
    "clip-only": {"floor", "none", "sat-recovery", "per-antenna"},
    "poly-only": {"floor", "none", "beamspace", "per-antenna"},
    "full": set(METHODS),
}


@dataclass(frozen=True)
class LnaSpec:
    gain_db: float = 15.0
    iip3_dbm: float = -30.0
    mode: str = "full"
    impedance_ohm: float = DEFAULT_IMPEDANCE

    def params(self) -> LnaParams:
        p = lna_params_from_spec(self.gain_db, self.iip3_dbm, self.impedance_ohm)
        if self.mode == "clip-only":
            return p.clip_only()
        if self.mode == "poly-only":
            return p.poly_only()
        if self.mode == "linear":
            return p.linear()
        return p


@dataclass(frozen=True)
class AdcSpec:
    bits: int = 6
    enabled: bool = True
    loading_fraction: Optional[float] = None  # None -> optimized on the linear chain
    loading_grid: tuple = tuple(round(1.0 + 0.1 * i, 1) for i in range(31))
    calibration_samples: int = 2000


@dataclass(frozen=True)
class LmsConfig:
    variant: str = "centered"
    mu0: Optional[float] = None
    epochs: int = 2
    warmup: int = 1000
    eta_rel_db: float = 20.0  # streams within this many dB of the strongest


@dataclass(frozen=True)
class ScenarioConfig:
    nr: int = 64
    num_users: int = 8
    aoas: Optional[tuple] = None
    aoa_limit: float = math.pi / 3
    soi_index: int = 0
    soi_dbm: float = -70.0
    interferer_total_dbm: float = -43.0
    interferer_profile: str = "equal"  # "equal" or "dominant"
    dominant_ratio_db: float = 20.0
    interferer_dbm: Optional[tuple] = None  # per-interferer override
    lna: LnaSpec = LnaSpec()
    adc: AdcSpec = AdcSpec()
    waveform: WaveformConfig = WaveformConfig(symbol_count=10_000)
    sat: SatRecoveryConfig = SatRecoveryConfig()
    lms: LmsConfig = LmsConfig()
    methods: tuple = ("none", "sat-recovery")
    trials: int = 20
    master_seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.num_users >= self.nr:
            raise ConfigError("num_users must be smaller than nr")
        if not 0 <= self.soi_index < self.num_users:
            raise ConfigError("soi_index out of range")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.lna.mode not in LNA_MODES:
            raise ConfigError(f"unknown LNA mode {self.lna.mode!r}; choose from {LNA_MODES}")
        if self.interferer_profile not in ("equal", "dominant"):
            raise ConfigError("interferer_profile must be 'equal' or 'dominant'")
        if self.aoas is not None and len(self.aoas) != self.num_users:
            raise ConfigError("need one AoA per user")
        if self.interferer_dbm is not None and len(self.interferer_dbm) != self.num_users - 1:
            raise ConfigError("interferer_dbm needs num_users - 1 entries")
        if not self.methods:
            raise ConfigError("at least one method is required")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; choose from {METHODS}")
            if m not in _ALLOWED[self.lna.mode]:
                raise ConfigError(
                    f"method {m!r} does not apply to LNA mode {self.lna.mode!r}: "
                    + ("saturation recovery needs a saturating LNA" if m == "sat-recovery"
                       else "beam-space compensation targets the cubic term"))
        if self.lms.variant not in ("literal", "centered"):
            raise ConfigError(f"unknown LMS variant {self.lms.variant!r}")

    def user_powers_dbm(self) -> np.ndarray:
        n_int = self.num_users - 1
        if self.interferer_dbm is not None:
            inter = np.asarray(self.interferer_dbm, dtype=float)
        elif self.interferer_profile == "equal":
            inter = split_power_dbm(self.interferer_total_dbm, n_int)
        else:
            w = np.r_[1.0, np.full(n_int - 1, 10 ** (-self.dominant_ratio_db / 10))]
            inter = split_power_dbm(self.interferer_total_dbm, n_int, w)
        return np.insert(inter, self.soi_index, self.soi_dbm)

    def with_axis(self, axis: str, value: float) -> "ScenarioConfig":
        if axis == "input_power":
            return replace(self, interferer_total_dbm=float(value), interferer_dbm=None)
        if axis == "iip3":
            return replace(self, lna=replace(self.lna, iip3_dbm=float(value)))
        if axis == "adc_bits":
            if float(value) != int(value):
                raise ConfigError("adc_bits values must be integers")
            return replace(self, adc=replace(self.adc, bits=int(value)))
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {AXES}")

    # -- JSON round trip ---------------------------------------------------
    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        nested = {"lna": LnaSpec, "adc": AdcSpec, "waveform": WaveformConfig,
                  "sat": SatRecoveryConfig, "lms": LmsConfig}
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        for k, v in d.items():
            if k in nested:
                sub = nested[k]
                sub_known = {f.name for f in dataclasses.fields(sub)}
                bad = set(v) - sub_known
                if bad:
                    raise ConfigError(f"unknown keys in {k!r}: {sorted(bad)}")
                if k == "adc" and "loading_grid" in v:
                    v = {**v, "loading_grid": tuple(v["loading_grid"])}
                kw[k] = sub(**v)
            elif k in ("aoas", "interferer_dbm", "methods") and v is not None:
                kw[k] = tuple(v)
            else:
                kw[k] = v
        return cls(**kw)


@dataclass
class ResultRow:
    sweep_value: float
    method: str
    d_bar_db: float
    sat_antennas: float
    lms_final_weight: Optional[complex]
    wall_time_s: float
    seed: int
    trial: int = -1


def trial_seed(master_seed: int, trial: int) -> int:
    """Deterministic 63-bit seed for one trial."""
    ss = np.random.SeedSequence([int(master_seed) & (2**63 - 1), int(trial)])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


# --------------------------------------------------------------------------
# one trial

class _TrialContext:
    """Draws shared by every sweep point of one trial."""

    def __init__(self, cfg: ScenarioConfig, trial: int):
        self.seed = trial_seed(cfg.master_seed, trial)
        ss = np.random.SeedSequence(self.seed)
        aoa_seq, wave_seq = ss.spawn(2)
        if cfg.aoas is not None:
            aoas = np.asarray(cfg.aoas, dtype=float)
        else:
            aoas = chn.draw_aoas(np.random.default_rng(aoa_seq), cfg.num_users, cfg.nr, cfg.aoa_limit)
        self.ch = chn.build_channel(aoas, cfg.nr)
        wseed = int(wave_seq.generate_state(1, np.uint64)[0] >> np.uint64(1))
        self.unit = gen_qam_frame(replace(cfg.waveform, seed=wseed), cfg.num_users)
        self.unit_rms = np.sqrt(np.mean(np.abs(self.unit) ** 2, axis=1))
        self._lf_cache: dict = {}
        self.floor_cache: dict = {}

    def frame(self, powers_dbm: np.ndarray, impedance: float) -> np.ndarray:
        target = dbm_to_amplitude(powers_dbm, impedance) / np.sqrt(2.0)
        return self.unit * (np.atleast_1d(target) / self.unit_rms)[:, None]

    def loading_fraction(self, cfg: ScenarioConfig, X: np.ndarray, beta1: float) -> float:
        if cfg.adc.loading_fraction is not None:
            return float(cfg.adc.loading_fraction)
        key = (cfg.adc.bits, tuple(np.round(cfg.user_powers_dbm(), 9)))
        if key not in self._lf_cache:
            cal = beta1 * X[:, : cfg.adc.calibration_samples]
            self._lf_cache[key] = optimize_loading_fraction(cal, cfg.adc.bits, cfg.adc.loading_grid)
        return self._lf_cache[key]


def _adc(cfg: ScenarioConfig, Y: np.ndarray, lf: float) -> np.ndarray:
    if not cfg.adc.enabled:
        return Y
    return quantize(Y, agc(Y, AdcConfig(bits=cfg.adc.bits, loading_fraction=lf)))


def _evaluate(cfg: ScenarioConfig, ctx: _TrialContext, sweep_value: float, trial: int) -> list:
    ch = ctx.ch
    soi = cfg.soi_index
    powers_dbm = cfg.user_powers_dbm()
    S = ctx.frame(powers_dbm, cfg.lna.impedance_ohm)
    X = ch.H @ S
    s_ref = S[soi]
    p = cfg.lna.params()
    lf = ctx.loading_fraction(cfg, X, p.beta1) if cfg.adc.enabled else float("nan")
    n_sat = float(np.mean(np.sum(np.abs(X) > p.v_sat, axis=0))) if p.saturate else 0.0

    rows = []
    Y = None
    cache = {}

    def recovered():
        if "Yc" not in cache:
            mask = np.abs(Y) >= cfg.sat.gamma_ratio * p.v_max
            cache["Yc"] = recover_frame(Y, ch.null_projector, mask, cfg.sat)[1]
        return cache["Yc"]

    def emit(method, z, t0, weight=None):
        rep = bussgang_distortion(s_ref, z)
        rows.append(ResultRow(sweep_value=float(sweep_value), method=method,
                              d_bar_db=rep.d_bar_db, sat_antennas=n_sat,
                              lms_final_weight=weight, wall_time_s=time.perf_counter() - t0,
                              seed=ctx.seed, trial=trial))

    for method in cfg.methods:
        t0 = time.perf_counter()
        if method == "floor":
            # independent of IIP3 and LNA mode, so computed once per trial
            key = (cfg.adc, cfg.lna.gain_db, tuple(np.round(powers_dbm, 9)), lf)
            if key not in ctx.floor_cache:
                ctx.floor_cache[key] = ch.Wh[soi] @ _adc(cfg, p.beta1 * X, lf)
            emit(method, ctx.floor_cache[key], t0)
            continue
        if Y is None:
            # shared by the remaining methods, not charged to any of them
            Y = _adc(cfg, lna(X, p), lf)
            t0 = time.perf_counter()
        if method == "none":
            emit(method, ch.Wh[soi] @ Y, t0)
        elif method == "sat-recovery":
            emit(method, ch.Wh[soi] @ recovered(), t0)
        elif method == "per-antenna":
            emit(method, ch.Wh[soi] @ per_antenna_inverse(Y, p), t0)
        elif method == "beamspace":
            # full LNA: recovery first, then combining, then the LMS
            S_hat = ch.Wh @ (recovered() if p.saturate else Y)
            # stream powers measured after combining, as a receiver would
            sigma2 = np.mean(np.abs(S_hat) ** 2, axis=1)
            eta = sigma2.max() * 10 ** (-cfg.lms.eta_rel_db / 10)
            active = select_streams(sigma2, eta)
            if active.size == 0:
                emit(method, S_hat[soi], t0)
                continue
            state = default_lms_state(S_hat, [soi], active, variant=cfg.lms.variant,
                                      mu0=cfg.lms.mu0, warmup=cfg.lms.warmup, eta=eta)
            out, state = beamspace_compensate(S_hat, state, epochs=cfg.lms.epochs)
            emit(method, out[soi], t0, complex(state.weights[0]))
    return rows


def _run_trial(cfg: ScenarioConfig, axis: Optional[str], values: Sequence[float], trial: int) -> list:
    ctx = _TrialContext(cfg, trial)
    rows = []
    for v in values:
        c = cfg if axis is None else cfg.with_axis(axis, v)
        rows.extend(_evaluate(c, ctx, v, trial))
    return rows


def _sort_key(row: ResultRow):
    return (row.sweep_value, METHODS.index(row.method), row.trial)


def _run_all(cfg, axis, values, n_jobs):
    if n_jobs == 1:
        chunks = [_run_trial(cfg, axis, values, t) for t in range(cfg.trials)]
    else:
        from joblib import Parallel, delayed
        chunks = Parallel(n_jobs=n_jobs)(delayed(_run_trial)(cfg, axis, values, t)
                                         for t in range(cfg.trials))
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=_sort_key)
    return rows


def run_scenario(cfg: ScenarioConfig, sweep_value: float = 0.0, n_jobs: int = 1) -> list:
    """One row per (method, trial) for a single configuration."""
    cfg.validate()
    return _run_all(cfg, None, [sweep_value], n_jobs)


def average_rows(rows: Sequence[ResultRow], master_seed: int = 0) -> list:
    """Trial mean (in dB) per (sweep value, method)."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.sweep_value, r.method), []).append(r)
    out = []
    for (v, m), rs in groups.items():
        w = [r.lms_final_weight for r in rs if r.lms_final_weight is not None]
        out.append(ResultRow(
            sweep_value=v, method=m,
            d_bar_db=float(np.mean([r.d_bar_db for r in rs])),
            sat_antennas=float(np.mean([r.sat_antennas for r in rs])),
            lms_final_weight=complex(np.mean(w)) if w else None,
            wall_time_s=float(np.sum([r.wall_time_s for r in rs])),
            seed=master_seed, trial=-1))
    out.sort(key=_sort_key)
    return out


def sweep(cfg: ScenarioConfig, axis: str, values: Sequence[float], average: bool = True,
          n_jobs: int = 1) -> list:
    """Run the scenario at every value of ``axis``; rows ordered by (value, method)."""
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    if axis not in AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {AXES}")
    for v in values:
        cfg.with_axis(axis, v).validate()
    rows = _run_all(cfg, axis, values, n_jobs)
    return average_rows(rows, cfg.master_seed) if average else rows


# --------------------------------------------------------------------------
# threshold crossings

def threshold_crossing(values, d_bar_db, floor_db, margin_db: float = 3.0) -> float:
    """Smallest swept value from which D_bar stays within ``margin_db`` of the floor.

    The passing region is taken as the contiguous run ending at the largest
    value; the edge is placed by linear interpolation against the first
    failing point below it.  Returns nan if even the largest value fails and
    the smallest value if everything passes.
    """
    v = np.asarray(values, dtype=float)
    d = np.asarray(d_bar_db, dtype=float)
    f = np.broadcast_to(np.asarray(floor_db, dtype=float), v.shape)
    order = np.argsort(v)
    v, d, f = v[order], d[order], f[order]
    excess = d - (f + margin_db)
    ok = excess <= 0
    if not ok[-1]:
        return float("nan")
    i = len(v) - 1
    while i > 0 and ok[i - 1]:
        i -= 1
    if i == 0:
        return float(v[0])
    # excess[i-1] > 0 >= excess[i]
    a, b = excess[i - 1], excess[i]
    return float(v[i - 1] + (v[i] - v[i - 1]) * a / (a - b))


# --------------------------------------------------------------------------
# complexity timing

def recovery_timing(nr_values=(16, 32, 64, 128), num_users: int = 8, kappa: float = 0.01,
                    min_work_s: float = 0.02, repeats: int = 7, seed: int = 0) -> dict:
    """Per-sample solve time given p = N y, general path vs single-antenna shortcut.

    The general path is timed with every null-space dimension in use
    (|S_c| = Nr - U), the worst case of the cubic bound.
    """
    rng = np.random.default_rng(seed)
    m_list, t_gen, t_r1 = [], [], []
    for nr in nr_values:
        ch = chn.build_channel(chn.draw_aoas(rng, num_users, nr), nr)
        m = nr - num_users
        Nt = np.ascontiguousarray(ch.N.T)

        def timed(k, batch):
            Y = rng.standard_normal((nr, batch)) + 1j * rng.standard_normal((nr, batch))
            Pt = np.ascontiguousarray((ch.N @ Y).T)
            mask = np.zeros((batch, nr), dtype=np.bool_)
            for t in range(batch):
                mask[t, rng.choice(nr, k, replace=False)] = True
            out = np.zeros((batch, nr), dtype=np.complex128)
            _direct_kernel(Pt, Nt, mask, kappa, out)  # compile / warm
            best = np.inf
            for _ in range(repeats):
                t0 = time.perf_counter()
                _direct_kernel(Pt, Nt, mask, kappa, out)
                best = min(best, time.perf_counter() - t0)
            return best / batch

        # size batches so each timing covers roughly min_work_s
        probe = timed(m, 16)
        t_gen.append(timed(m, int(np.clip(min_work_s / max(probe, 1e-9), 64, 20000))))
        probe = timed(1, 256)
        t_r1.append(timed(1, int(np.clip(min_work_s / max(probe, 1e-9), 1024, 400000))))
        m_list.append(m)
    lm = np.log(m_list)
    return {
        "null_dim": m_list,
        "t_general": t_gen,
        "t_rank1": t_r1,
        "slope_general": float(np.polyfit(lm, np.log(t_gen), 1)[0]),
        "slope_rank1": float(np.polyfit(lm, np.log(t_r1), 1)[0]),
    }


# --------------------------------------------------------------------------
# result files

CSV_FIELDS = ("sweep_value", "method", "d_bar_db", "sat_antennas", "wall_time_s", "seed")


def _fmt(x) -> str:
    return f"{x:.9g}" if isinstance(x, float) else str(x)


def _row_record(r: ResultRow, include_timing: bool) -> dict:
    return {
        "sweep_value": float(r.sweep_value),
        "method": r.method,
        "d_bar_db": float(r.d_bar_db),
        "sat_antennas": float(r.sat_antennas),
        "wall_time_s": float(r.wall_time_s) if include_timing else 0.0,
        "seed": int(r.seed),
    }


def format_results(rows: Sequence[ResultRow], fmt: str = "csv", include_timing: bool = False) -> str:
    """Serialize rows; numbers carry 9 significant digits.

    Wall time is written as 0 unless ``include_timing`` is set, which keeps
    the output byte-identical between runs.
    """
    if not rows:
        raise ValueError("no rows to write")
    recs = [_row_record(r, include_timing) for r in rows]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for rec in recs:
            w.writerow([_fmt(rec[k]) for k in CSV_FIELDS])
        return buf.getvalue()
    if fmt in ("jsonl", "json-lines"):
        lines = []
        for rec in recs:
            rec = {k: (float(_fmt(v)) if isinstance(v, float) else v) for k, v in rec.items()}
            lines.append(json.dumps(rec, separators=(",", ":")))
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown result format {fmt!r}")


def emit_results(rows: Sequence[ResultRow], path, fmt: str = "csv", include_timing: bool = False) -> None:
    text = format_results(rows, fmt, include_timing)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def read_results(path) -> list:
    """Parse a CSV or JSON-lines result file into plain dicts."""
    with open(path) as fh:
        text = fh.read()
    if text.startswith(CSV_FIELDS[0]):
        recs = list(csv.DictReader(io.StringIO(text)))
        return [{"sweep_value": float(r["sweep_value"]), "method": r["method"],
                 "d_bar_db": float(r["d_bar_db"]), "sat_antennas": float(r["sat_antennas"]),
                 "wall_time_s": float(r["wall_time_s"]), "seed": int(r["seed"])} for r in recs]
    return [json.loads(line) for line in text.splitlines() if line.strip()]
