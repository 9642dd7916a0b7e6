"""Statistical model of cell-to-cell variation and threshold design.

Cell ohmic resistance is modelled as normal N(mu, sigma^2); string
resistance is the parallel combination of independent cell draws. The
string-resistance distribution is synthesized by Monte Carlo, fitted by
sample moments (a normal shape is assumed even though the parallel
combination is not exactly normal), and the acceptance band is
mu_s +/- k * sigma_s. Healthy draws landing outside the band are false
alarms; faulty draws landing inside are missed detections.

Reproducibility contract: sample j is generated from its own
counter-based stream keyed by (seed, j), so a run is bit-identical for
a given seed no matter how the index range is chunked across workers.

A degradation fault multiplies the faulty cell's resistance by
(1 + delta). Whether delta applies to the cell's sampled value
(mode="sampled", the default) or to the population mean (mode="mean")
is an interpretation choice; both are implemented and every report
should state which one it used.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .errors import DomainError
from .strings import parallel_resistance

_MASK64 = (1 << 64) - 1

FAULT_MODES = ("sampled", "mean")


@dataclass(frozen=True)
class CellPopulation:
    """Normal model of cell resistance across a fleet."""

    mu_ohm: float
    sigma_ohm: float
    label: str = "custom"

    def __post_init__(self):
        if not (self.mu_ohm > 0):
            raise DomainError(f"mu_ohm must be > 0, got {self.mu_ohm}")
        if self.sigma_ohm < 0:
            raise DomainError(f"sigma_ohm must be >= 0, got {self.sigma_ohm}")

    @property
    def kappa(self) -> float:
        """Coefficient of variation sigma/mu."""
        return self.sigma_ohm / self.mu_ohm


# Reference populations: new production cells and a uniformly aged
# fleet. kappa grows from 2% to 3.5% with age.
FRESH = CellPopulation(mu_ohm=6e-3, sigma_ohm=0.12e-3, label="fresh")
AGED = CellPopulation(mu_ohm=11e-3, sigma_ohm=0.385e-3, label="aged")

_NAMED = {"fresh": FRESH, "aged": AGED}


def named_population(name: str) -> CellPopulation:
    try:
        return _NAMED[name]
    except KeyError:
        raise DomainError(f"unknown population {name!r}; known: fresh, aged") from None


@dataclass(frozen=True)
class FaultSpec:
    """One or more cells with a relative resistance increase."""

    delta_rel: float
    n_faulty: int = 1
    mode: str = "sampled"

    def __post_init__(self):
        if self.delta_rel <= -1.0:
            raise DomainError(f"delta_rel must be > -1, got {self.delta_rel}")
        if self.n_faulty < 0:
            raise DomainError(f"n_faulty must be >= 0, got {self.n_faulty}")
        if self.mode not in FAULT_MODES:
            raise DomainError(f"mode must be one of {FAULT_MODES}, got {self.mode!r}")


def sample_stream(seed: int, index: int) -> np.random.Generator:
    """Counter-based per-sample RNG stream keyed by (seed, index)."""
    if index < 0:
        raise DomainError(f"stream index must be >= 0, got {index}")
    key = np.array([seed & _MASK64, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _positive_normal(rng: np.random.Generator, mu: float, sigma: float,
                     n: int) -> np.ndarray:
    """Normal draws truncated to > 0 by rejection.

    At realistic populations a rejection is essentially impossible; the
    retry cap guards pathological custom populations.
    """
    x = rng.normal(mu, sigma, n)
    for _ in range(100):
        bad = x <= 0.0
        if not bad.any():
            return x
        x[bad] = rng.normal(mu, sigma, int(bad.sum()))
    raise DomainError("population places too much mass at non-positive resistance")


def draw_cell_resistances(pop: CellPopulation, n_cells: int,
                          rng: np.random.Generator) -> np.ndarray:
    """n_cells positive cell-resistance draws from the population."""
    if n_cells < 1:
        raise DomainError(f"n_cells must be >= 1, got {n_cells}")
    return _positive_normal(rng, pop.mu_ohm, pop.sigma_ohm, n_cells)


def sample_healthy_string(pop: CellPopulation, n_cells: int,
                          rng: np.random.Generator) -> float:
    """One healthy string-resistance draw."""
    return parallel_resistance(draw_cell_resistances(pop, n_cells, rng))


def sample_faulty_string(pop: CellPopulation, n_cells: int, fault: FaultSpec,
                         rng: np.random.Generator) -> float:
    """One string-resistance draw with the fault applied.

    Consumes the same stream values as the healthy draw, so delta=0 in
    "sampled" mode reproduces the healthy sample exactly.
    """
    if n_cells < 1:
        raise DomainError(f"n_cells must be >= 1, got {n_cells}")
    if fault.n_faulty > n_cells:
        raise DomainError(f"n_faulty={fault.n_faulty} exceeds n_cells={n_cells}")
    x = _positive_normal(rng, pop.mu_ohm, pop.sigma_ohm, n_cells)
    if fault.n_faulty:
        if fault.mode == "sampled":
            x[:fault.n_faulty] *= 1.0 + fault.delta_rel
        else:
            x[:fault.n_faulty] = (1.0 + fault.delta_rel) * pop.mu_ohm
    return parallel_resistance(x)


def _draw_batch(pop: CellPopulation, n_cells: int, fault: FaultSpec | None,
                n_mc: int, seed: int, n_workers: int) -> np.ndarray:
    if n_mc < 1:
        raise DomainError(f"n_mc must be >= 1, got {n_mc}")
    out = np.empty(n_mc)

    def fill(lo: int, hi: int):
        for j in range(lo, hi):
            rng = sample_stream(seed, j)
            if fault is None:
                out[j] = sample_healthy_string(pop, n_cells, rng)
            else:
                out[j] = sample_faulty_string(pop, n_cells, fault, rng)

    if n_workers <= 1:
        fill(0, n_mc)
    else:
        bounds = np.linspace(0, n_mc, n_workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(fill, int(lo), int(hi))
                       for lo, hi in zip(bounds[:-1], bounds[1:])]
            for f in futures:
                f.result()
    return out


def draw_healthy(pop: CellPopulation, n_cells: int, n_mc: int, seed: int,
                 n_workers: int = 1) -> np.ndarray:
    """n_mc healthy string-resistance samples; chunking-independent."""
    return _draw_batch(pop, n_cells, None, n_mc, seed, n_workers)


def draw_faulty(pop: CellPopulation, n_cells: int, fault: FaultSpec, n_mc: int,
                seed: int, n_workers: int = 1) -> np.ndarray:
    """n_mc faulty string-resistance samples; chunking-independent."""
    return _draw_batch(pop, n_cells, fault, n_mc, seed, n_workers)


@dataclass
class StringDistribution:
    """Monte Carlo string-resistance sample with its moment fit."""

    samples: np.ndarray
    mu_s: float
    sigma_s: float
    kappa_s: float
    n_samples: int
    seed: int
    n_cells: int
    population: CellPopulation


def build_distribution(pop: CellPopulation, n_cells: int, n_mc: int = 10000,
                       seed: int = 12345, n_workers: int = 1) -> StringDistribution:
    samples = draw_healthy(pop, n_cells, n_mc, seed, n_workers)
    if n_mc > 1 and np.ptp(samples) > 0.0:
        mu_s = float(np.mean(samples))
        sigma_s = float(np.std(samples, ddof=1))
    else:
        # degenerate sample (sigma = 0 population): pin the fit exactly
        # so the band has zero width and contains the common value
        mu_s = float(samples[0])
        sigma_s = 0.0
    return StringDistribution(
        samples=samples, mu_s=mu_s, sigma_s=sigma_s,
        kappa_s=sigma_s / mu_s, n_samples=n_mc, seed=seed,
        n_cells=n_cells, population=pop,
    )


@dataclass(frozen=True)
class ThresholdSet:
    """Acceptance band mu_s +/- k * sigma_s with its provenance."""

    lower_ohm: float
    upper_ohm: float
    k_sigma: float
    mu_s_ohm: float
    sigma_s_ohm: float
    provenance: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.lower_ohm > self.upper_ohm:
            raise DomainError("lower threshold exceeds upper threshold")

    def contains(self, rs_ohm: float) -> bool:
        """Closed band: the boundary counts as inside (normal)."""
        return self.lower_ohm <= rs_ohm <= self.upper_ohm


def fit_and_thresholds(dist: StringDistribution, k_sigma: float = 2.0) -> ThresholdSet:
    """Thresholds from the fitted moments of a healthy distribution."""
    if dist.n_samples < 100:
        raise DomainError(f"need at least 100 samples to fit, got {dist.n_samples}")
    if k_sigma < 0:
        raise DomainError(f"k_sigma must be >= 0, got {k_sigma}")
    return ThresholdSet(
        lower_ohm=dist.mu_s - k_sigma * dist.sigma_s,
        upper_ohm=dist.mu_s + k_sigma * dist.sigma_s,
        k_sigma=k_sigma,
        mu_s_ohm=dist.mu_s,
        sigma_s_ohm=dist.sigma_s,
        provenance={
            "population": {"label": dist.population.label,
                           "mu_ohm": dist.population.mu_ohm,
                           "sigma_ohm": dist.population.sigma_ohm},
            "n_cells": dist.n_cells,
            "n_samples": dist.n_samples,
            "seed": dist.seed,
        },
    )


@dataclass(frozen=True)
class RateEstimate:
    """Monte Carlo rate with its binomial standard error."""

    rate: float
    se: float
    n_mc: int
    seed: int


def _rate(hits: np.ndarray, n_mc: int, seed: int) -> RateEstimate:
    p = float(np.mean(hits))
    return RateEstimate(rate=p, se=sqrt(p * (1.0 - p) / n_mc), n_mc=n_mc, seed=seed)


def false_alarm_rate(pop: CellPopulation, n_cells: int, thresholds: ThresholdSet,
                     n_mc: int = 10000, seed: int = 12345,
                     n_workers: int = 1) -> RateEstimate:
    """Fraction of healthy strings classified faulty (outside the band)."""
    samples = draw_healthy(pop, n_cells, n_mc, seed, n_workers)
    outside = (samples < thresholds.lower_ohm) | (samples > thresholds.upper_ohm)
    return _rate(outside, n_mc, seed)


def missed_detection_rate(pop: CellPopulation, n_cells: int, fault: FaultSpec,
                          thresholds: ThresholdSet, n_mc: int = 10000,
                          seed: int = 12345, n_workers: int = 1) -> RateEstimate:
    """Fraction of faulty strings that still look healthy.

    A degradation fault is missed only when the draw stays inside the
    band; a draw below the lower threshold trips the short-circuit side
    and therefore counts as detected.
    """
    samples = draw_faulty(pop, n_cells, fault, n_mc, seed, n_workers)
    inside = (samples >= thresholds.lower_ohm) & (samples <= thresholds.upper_ohm)
    return _rate(inside, n_mc, seed)


@dataclass
class SweepRow:
    n_cells: int
    thresholds: ThresholdSet
    false_alarm: RateEstimate
    missed_detection: RateEstimate


def size_sweep(pop: CellPopulation, fault: FaultSpec, k_sigma: float,
               n_cells_list, n_mc: int = 10000, seed: int = 12345,
               n_workers: int = 1) -> list[SweepRow]:
    """FA/MD versus string size, one row per size.

    Derived seeds: the healthy fit uses ``seed``, the false-alarm
    evaluation ``seed + 1`` and the missed-detection evaluation
    ``seed + 2``, so rows share draws where that sharpens comparisons.
    """
    rows = []
    for n_cells in n_cells_list:
        dist = build_distribution(pop, n_cells, n_mc, seed, n_workers)
        thr = fit_and_thresholds(dist, k_sigma)
        fa = false_alarm_rate(pop, n_cells, thr, n_mc, seed + 1, n_workers)
        md = missed_detection_rate(pop, n_cells, fault, thr, n_mc, seed + 2, n_workers)
        rows.append(SweepRow(n_cells=n_cells, thresholds=thr,
                             false_alarm=fa, missed_detection=md))
    return rows


def histogram(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Freedman-Diaconis histogram; returns (bin_edges, counts)."""
    edges = np.histogram_bin_edges(samples, bins="fd")
    counts, _ = np.histogram(samples, bins=edges)
    return edges, counts
