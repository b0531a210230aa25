"""Monte Carlo photon streams for a single detection interval.

Each trial: the nominal state is flipped with the preparation error
probability, the ion makes at most one state transition (exponential
waiting time at the pumping rate of its actual state), photons arrive as a
piecewise-homogeneous Poisson process (bright: eps*R_o + R_bg, dark: R_bg)
and timestamps are floored onto the counter grid.

Trial ``i`` draws only from the Philox substream of index ``i``:

    block 0  prep flip, transition time
    block 1  photon counts before / after the transition
    block 2  first arrival
    block 3+ remaining arrival times (two per block, full traces only)

Counts are drawn by inverse-CDF, so each is monotone in its window for a
fixed substream and results do not depend on chunking or thread count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from . import rng
from .errors import DomainError
from .stats import PrepErrors

CHUNK = 1 << 16
STATES = ("dark", "bright")
STATE_TAG = {"dark": 0, "bright": 1}


@dataclass(frozen=True)
class TrialConfig:
    rates: object
    initial_state: str
    window: float
    timing_resolution: float = 5e-9
    prep: PrepErrors = field(default_factory=PrepErrors)

    def __post_init__(self):
        if self.initial_state not in STATES:
            raise DomainError(f"initial_state must be one of {STATES}")
        if not self.window > 0:
            raise DomainError("window must be > 0")
        if not self.timing_resolution > 0:
            raise DomainError("timing_resolution must be > 0")


@dataclass(frozen=True)
class Substream:
    """Address of one trial's random numbers."""

    seed: int
    index: int


@dataclass(frozen=True)
class PhotonTrace:
    prepared_state: str
    actual_state: str
    ticks: tuple
    window: float
    timing_resolution: float
    transition_time: float | None
    seed_path: tuple

    @property
    def timestamps(self):
        return [k * self.timing_resolution for k in self.ticks]

    @property
    def n_photons(self):
        return len(self.ticks)


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    n_trials: int


@dataclass
class Ensemble:
    """Per-trial summaries of an ensemble, as parallel arrays."""

    config: TrialConfig
    seed: int
    index: np.ndarray          # trial indices
    actual_bright: np.ndarray  # bool
    transition: np.ndarray     # seconds, inf when no transition in the window
    n_before: np.ndarray       # photons before the transition
    n_after: np.ndarray
    first_tick: np.ndarray     # -1 when no photon

    @property
    def n_photons(self):
        return self.n_before + self.n_after

    @property
    def prepared_state(self):
        return self.config.initial_state

    def __len__(self):
        return self.index.size


def _poisson_inv(u, mean, common_mean):
    """Smallest k with CDF(k; mean) >= u, elementwise.

    Trials whose mean equals ``common_mean`` (no transition in the window)
    are served from one tabulated CDF; the rest go through scipy.
    """
    out = np.zeros(u.shape, dtype=np.int64)
    nonzero = u > np.exp(-mean)
    if not nonzero.any():
        return out
    common = nonzero & (mean == common_mean)
    if common.any():
        kmax = int(math.ceil(common_mean + 15.0 * math.sqrt(common_mean) + 40.0))
        cdf = sps.poisson.cdf(np.arange(kmax + 1), common_mean)
        out[common] = np.minimum(np.searchsorted(cdf, u[common], side="left"), kmax)
    other = nonzero & ~common
    if other.any():
        out[other] = sps.poisson.ppf(u[other], mean[other]).astype(np.int64)
    return out


def _state_rates(rates, bright):
    hi = rates.detected_bright + rates.r_bg
    r1 = np.where(bright, hi, rates.r_bg)
    r2 = np.where(bright, rates.r_bg, hi)
    rt = np.where(bright, rates.r_d, rates.r_b)
    return r1, r2, rt


def _simulate_chunk(config, seed, index):
    tag = STATE_TAG[config.initial_state]
    w = config.window
    u0 = rng.uniforms(seed, index, 0, tag)
    u1 = rng.uniforms(seed, index, 1, tag)
    u2 = rng.uniforms(seed, index, 2, tag)

    nominal_bright = config.initial_state == "bright"
    p_flip = config.prep.p_prep_bright if nominal_bright else config.prep.p_prep_dark
    bright = (u0[:, 0] < p_flip) != nominal_bright

    r1, r2, rt = _state_rates(config.rates, bright)
    with np.errstate(divide="ignore"):
        t_trans = np.where(rt > 0, -np.log1p(-u0[:, 1]) / rt, np.inf)
    t_trans = np.where(t_trans < w, t_trans, np.inf)
    seg1 = np.minimum(t_trans, w)
    seg2 = w - seg1

    # no-transition means are trial independent, which keeps the table path deterministic
    n1 = np.zeros(index.size, dtype=np.int64)
    n2 = np.zeros(index.size, dtype=np.int64)
    for b in (False, True):
        sel = bright == b
        if sel.any():
            full = float(r1[sel][0] * w)
            n1[sel] = _poisson_inv(u1[sel, 0], r1[sel] * seg1[sel], full)
            n2[sel] = _poisson_inv(u1[sel, 1], r2[sel] * seg2[sel], -1.0)

    v = u2[:, 0]
    first = np.full(index.size, np.nan)
    has1 = n1 > 0
    has2 = (~has1) & (n2 > 0)
    first[has1] = seg1[has1] * -np.expm1(np.log(v[has1]) / n1[has1])
    first[has2] = seg1[has2] + seg2[has2] * -np.expm1(np.log(v[has2]) / n2[has2])
    first_tick = np.full(index.size, -1, dtype=np.int64)
    got = has1 | has2
    first_tick[got] = np.floor(first[got] / config.timing_resolution).astype(np.int64)
    return bright, t_trans, n1, n2, first_tick, first


def _threads(threads):
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("IONREAD_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def simulate_ensemble(config, n_trials, base_seed, threads=None, start=0):
    """Simulate trials ``start .. start + n_trials - 1`` and return their summaries."""
    if n_trials < 1:
        raise DomainError("n_trials must be >= 1")
    index = np.arange(start, start + n_trials, dtype=np.uint64)
    chunks = [index[i:i + CHUNK] for i in range(0, n_trials, CHUNK)]
    nthreads = min(_threads(threads), len(chunks))
    if nthreads > 1:
        with ThreadPoolExecutor(nthreads) as pool:
            parts = list(pool.map(lambda c: _simulate_chunk(config, base_seed, c), chunks))
    else:
        parts = [_simulate_chunk(config, base_seed, c) for c in chunks]
    bright, t_trans, n1, n2, tick, _ = (np.concatenate(x) for x in zip(*parts))
    return Ensemble(config=config, seed=int(base_seed), index=index, actual_bright=bright,
                    transition=t_trans, n_before=n1, n_after=n2, first_tick=tick)


def _expand(config, seed, i, bright, t_trans, n1, n2, first):
    """Full sorted arrival times of one trial, consistent with its summary."""
    w = config.window
    seg1 = min(t_trans, w)
    extra = max(n1 - 1, 0) + (n2 if n1 > 0 else max(n2 - 1, 0))
    times = [first] if (n1 + n2) > 0 else []
    if extra:
        nblk = (extra + 1) // 2
        idx = np.full(nblk, i, dtype=np.uint64)
        u = rng.uniforms(seed, idx, np.arange(3, 3 + nblk), STATE_TAG[config.initial_state])
        u = u.ravel()[:extra]
        if n1 > 0:
            a = first + (seg1 - first) * u[:n1 - 1]
            b = seg1 + (w - seg1) * u[n1 - 1:]
        else:
            a = np.empty(0)
            b = first + (w - first) * u
        times.extend(a.tolist())
        times.extend(b.tolist())
    ticks = np.floor(np.asarray(times) / config.timing_resolution).astype(np.int64)
    return tuple(int(k) for k in np.sort(ticks))


def simulate_trace(config, stream):
    """One trial drawn from ``stream``; identical to the same trial of an ensemble."""
    index = np.array([stream.index], dtype=np.uint64)
    bright, t_trans, n1, n2, _, first = _simulate_chunk(config, stream.seed, index)
    ticks = _expand(config, stream.seed, stream.index, bool(bright[0]), float(t_trans[0]),
                    int(n1[0]), int(n2[0]), float(first[0]))
    return PhotonTrace(
        prepared_state=config.initial_state,
        actual_state="bright" if bright[0] else "dark",
        ticks=ticks, window=config.window,
        timing_resolution=config.timing_resolution,
        transition_time=None if math.isinf(t_trans[0]) else float(t_trans[0]),
        seed_path=(stream.seed, STATE_TAG[config.initial_state], stream.index),
    )


def run_ensemble(config, n_trials, base_seed, threads=None):
    """Yield full PhotonTraces for trials ``0 .. n_trials - 1`` in index order."""
    if n_trials < 1:
        raise DomainError("n_trials must be >= 1")
    tag = STATE_TAG[config.initial_state]
    for start in range(0, n_trials, CHUNK):
        n = min(CHUNK, n_trials - start)
        idx = np.arange(start, start + n, dtype=np.uint64)
        bright, t_trans, n1, n2, _, first = _simulate_chunk(config, base_seed, idx)
        for j in range(n):
            i = start + j
            ticks = _expand(config, base_seed, i, bool(bright[j]), float(t_trans[j]),
                            int(n1[j]), int(n2[j]), float(first[j]))
            yield PhotonTrace(
                prepared_state=config.initial_state,
                actual_state="bright" if bright[j] else "dark",
                ticks=ticks, window=config.window,
                timing_resolution=config.timing_resolution,
                transition_time=None if math.isinf(t_trans[j]) else float(t_trans[j]),
                seed_path=(int(base_seed), tag, i),
            )


def _binomial(k, n):
    p = k / n
    return McEstimate(p, math.sqrt(p * (1 - p) / n), n)


def _ensemble_outcomes(ens, policy):
    """(decided_bright, stop_time) arrays for an Ensemble under ``policy``."""
    res = ens.config.timing_resolution
    w = policy.window
    if w > ens.config.window * (1 + 1e-12):
        raise DomainError("policy window exceeds the simulated window")
    has = ens.first_tick >= 0
    first_t = np.where(has, ens.first_tick * res, np.inf)
    if abs(w - ens.config.window) <= 1e-12 * w:
        count = ens.n_photons
    elif policy.threshold == 0:
        count = (first_t <= w).astype(np.int64)
    else:
        raise DomainError("threshold > 0 with a shorter policy window needs full traces")
    bright = count > policy.threshold
    if policy.kind == "first_photon_stop" and policy.threshold > 0:
        raise DomainError("early stop with threshold > 0 needs full traces")
    if policy.kind == "first_photon_stop":
        stop = np.minimum(first_t, w)
    else:
        stop = np.full(count.shape, w)
    return bright, stop


def estimate_error_and_time(traces, policy, prior_bright=0.5):
    """Dark/bright/average error and mean stop time from simulated trials.

    ``traces`` is an iterable of PhotonTrace and/or Ensemble objects.  Error
    estimates carry binomial standard errors; averages weight the two
    prepared states by ``prior_bright`` and are only defined when both are
    present.
    """
    from .discriminate import classify

    wrong = {"dark": 0, "bright": 0}
    count = {"dark": 0, "bright": 0}
    tsum = {"dark": 0.0, "bright": 0.0}
    tsq = {"dark": 0.0, "bright": 0.0}
    if isinstance(traces, (Ensemble, PhotonTrace)):
        traces = [traces]
    for item in traces:
        if isinstance(item, Ensemble):
            s = item.prepared_state
            dec, stop = _ensemble_outcomes(item, policy)
            wrong[s] += int(np.count_nonzero(dec != (s == "bright")))
            count[s] += len(item)
            tsum[s] += float(np.sum(stop))
            tsq[s] += float(np.sum(stop * stop))
        else:
            s = item.prepared_state
            out = classify(item, policy)
            wrong[s] += out.decision != s
            count[s] += 1
            tsum[s] += out.stop_time
            tsq[s] += out.stop_time ** 2
    total = count["dark"] + count["bright"]
    if total == 0:
        raise DomainError("no traces to estimate from")

    result = {}
    for s in STATES:
        if count[s]:
            result[f"{s}_error"] = _binomial(wrong[s], count[s])
    if count["dark"] and count["bright"]:
        wts = {"dark": 1 - prior_bright, "bright": prior_bright}
        de, be = result["dark_error"], result["bright_error"]
        result["avg_error"] = McEstimate(
            wts["dark"] * de.value + wts["bright"] * be.value,
            math.hypot(wts["dark"] * de.std_error, wts["bright"] * be.std_error), total)
        mean_t, var_t = 0.0, 0.0
        for s in STATES:
            m = tsum[s] / count[s]
            v = max(tsq[s] / count[s] - m * m, 0.0) / count[s]
            mean_t += wts[s] * m
            var_t += wts[s] ** 2 * v
        result["avg_time"] = McEstimate(mean_t, math.sqrt(var_t), total)
    elif count["dark"] or count["bright"]:
        s = "dark" if count["dark"] else "bright"
        m = tsum[s] / count[s]
        v = max(tsq[s] / count[s] - m * m, 0.0) / count[s]
        result["avg_time"] = McEstimate(m, math.sqrt(v), count[s])
    return result


def dump_rows(ensemble, policy):
    """Rows for the trace dump CSV, one per trial."""
    dec, stop = _ensemble_outcomes(ensemble, policy)
    res_ns = ensemble.config.timing_resolution * 1e9
    for j in range(len(ensemble)):
        tick = int(ensemble.first_tick[j])
        yield {
            "trial": int(ensemble.index[j]),
            "prepared_state": ensemble.prepared_state,
            "n_photons": int(ensemble.n_before[j] + ensemble.n_after[j]),
            "first_arrival_ns": _ns(tick * res_ns) if tick >= 0 else "",
            "stop_time_ns": _ns(stop[j] * 1e9),
            "outcome": "bright" if dec[j] else "dark",
        }


def _ns(x):
    r = round(x)
    return int(r) if abs(x - r) < 1e-6 else float(x)
