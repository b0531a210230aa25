"""Discrimination policies and their evaluation."""
from __future__ import annotations

from dataclasses import dataclass

from . import stats
from .errors import DomainError, UnsupportedConfiguration

KINDS = ("fixed_window_threshold", "first_photon_stop")


@dataclass(frozen=True)
class Policy:
    """Declare bright when strictly more than ``threshold`` photons arrive by ``window``."""

    kind: str
    window: float
    threshold: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"policy kind must be one of {KINDS}")
        if not self.window > 0:
            raise DomainError("policy window must be > 0")
        if self.threshold < 0 or int(self.threshold) != self.threshold:
            raise DomainError("threshold must be a non-negative integer")


@dataclass(frozen=True)
class Outcome:
    decision: str
    stop_time: float


@dataclass(frozen=True)
class Analytic:
    pass


@dataclass(frozen=True)
class MonteCarlo:
    n_trials: int
    seed: int
    threads: int | None = None


def classify(trace, policy):
    if trace.window < policy.window * (1 - 1e-12):
        raise DomainError("trace is shorter than the policy window")
    times = [t for t in trace.timestamps if t <= policy.window]
    decision = "bright" if len(times) > policy.threshold else "dark"
    if policy.kind == "first_photon_stop" and times:
        if policy.threshold == 0:
            stop = times[0]
        else:
            # stop as soon as the decision is settled
            stop = times[policy.threshold] if decision == "bright" else policy.window
    else:
        stop = policy.window
    return Outcome(decision=decision, stop_time=min(stop, policy.window))


def evaluate(policy, rates, prep, backend=Analytic(), prior_bright=0.5):
    """ErrorPoint for ``policy`` from the analytic model or from simulation.

    The analytic backend covers threshold 0 only; its ``avg_time`` is the
    first-photon mean stop time for that policy kind and the full window for
    a fixed window.
    """
    if isinstance(backend, Analytic):
        if policy.threshold != 0:
            raise UnsupportedConfiguration(
                "analytic backend supports threshold 0 only; use the Monte Carlo backend")
        pt = stats.error_point(rates, prep, policy.window, prior_bright)
        if policy.kind == "fixed_window_threshold":
            pt = stats.ErrorPoint(pt.window, pt.dark_error, pt.bright_error,
                                  pt.avg_error, policy.window)
        return pt

    est = evaluate_with_errors(policy, rates, prep, backend, prior_bright)
    return stats.ErrorPoint(window=policy.window, dark_error=est["dark_error"].value,
                            bright_error=est["bright_error"].value,
                            avg_error=est["avg_error"].value, avg_time=est["avg_time"].value)


def evaluate_with_errors(policy, rates, prep, backend, prior_bright=0.5):
    """Monte Carlo evaluation returning the McEstimate dictionary."""
    from . import mcsim

    configs = [mcsim.TrialConfig(rates, s, policy.window, prep=prep) for s in mcsim.STATES]
    if policy.kind == "first_photon_stop" and policy.threshold > 0:
        # the stop time depends on later photons, so expand full traces
        streams = [mcsim.run_ensemble(c, backend.n_trials, backend.seed) for c in configs]
        return mcsim.estimate_error_and_time(
            (t for s in streams for t in s), policy, prior_bright)
    ens = [mcsim.simulate_ensemble(c, backend.n_trials, backend.seed, threads=backend.threads)
           for c in configs]
    return mcsim.estimate_error_and_time(ens, policy, prior_bright)
