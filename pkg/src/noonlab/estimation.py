"""Phase-estimation statistics for uncorrelated and NOON probes.

Outcomes are modelled as +/-1 eigenvalues of the parity-like observable, so a
single probe with mean m has variance 1 - m^2. The propagated uncertainty is
sqrt(var) / |d mean / d phi|, with the derivative taken by central finite
difference so any pair of mean/variance functions can be plugged in.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

FD_STEP = 1e-5
DERIVATIVE_THRESHOLD = 1e-8
BATCH_SIZE = 8192
RNG_ALGORITHM = "numpy.random.PCG64/SeedSequence.spawn"


class ProbeKind(str, Enum):
    UNCORRELATED = "uncorrelated"
    ENTANGLED = "entangled"


@dataclass(frozen=True)
class ProbeSpec:
    kind: ProbeKind
    N: int
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "kind", ProbeKind(self.kind))
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        object.__setattr__(self, "phi", self.phi % (2 * math.pi))


@dataclass(frozen=True)
class EstimationResult:
    mean: float
    variance: float
    delta_phi: float
    singular: bool = False
    reason: str = ""


def uncorrelated_statistics(N: int, phi: float) -> tuple[float, float]:
    """Mean and variance of the summed observable over N independent probes."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return N * math.cos(phi), N * math.sin(phi) ** 2


def entangled_statistics(N: int, phi: float) -> tuple[float, float]:
    """Mean and variance of the NOON observable |0,N><N,0| + h.c."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return math.cos(N * phi), math.sin(N * phi) ** 2


def statistics(kind: ProbeKind | str, N: int, phi: float) -> tuple[float, float]:
    if ProbeKind(kind) is ProbeKind.UNCORRELATED:
        return uncorrelated_statistics(N, phi)
    return entangled_statistics(N, phi)


def central_difference(f: Callable[[float], float], x: float, step: float = FD_STEP) -> float:
    return (f(x + step) - f(x - step)) / (2 * step)


def phase_uncertainty(
    mean_fn: Callable[[float], float],
    variance_fn: Callable[[float], float],
    phi: float,
    step: float = FD_STEP,
) -> EstimationResult:
    """Error-propagated phase uncertainty at ``phi``.

    Stationary points of the mean give a flagged result with ``delta_phi``
    set to NaN instead of an infinity.
    """
    mean = mean_fn(phi)
    var = max(variance_fn(phi), 0.0)
    slope = central_difference(mean_fn, phi, step)
    if abs(slope) < DERIVATIVE_THRESHOLD:
        return EstimationResult(mean, var, math.nan, True, f"|d<A>/dphi| = {abs(slope):.3g} below threshold")
    return EstimationResult(mean, var, math.sqrt(var) / abs(slope))


def closed_form_uncertainty(kind: ProbeKind | str, N: int, phi: float) -> EstimationResult:
    kind = ProbeKind(kind)
    return phase_uncertainty(lambda x: statistics(kind, N, x)[0], lambda x: statistics(kind, N, x)[1], phi)


def precision_limits(N: int) -> tuple[float, float]:
    """(shot-noise limit 1/sqrt(N), Heisenberg limit 1/N)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return 1.0 / math.sqrt(N), 1.0 / N


def _batch_moments(args: tuple[np.random.SeedSequence, int, int, float]) -> tuple[float, float, int]:
    seq, size, n_probes, p_plus = args
    rng = np.random.Generator(np.random.PCG64(seq))
    plus = rng.binomial(n_probes, p_plus, size=size)
    samples = (2 * plus - n_probes).astype(float)
    return float(samples.sum()), float((samples**2).sum()), size


def monte_carlo_phase_estimate(probe: ProbeSpec, trials: int, seed: int, workers: int = 1) -> EstimationResult:
    """Sample the observable ``trials`` times and propagate the empirical spread.

    Each trial of an uncorrelated probe sums N independent +/-1 outcomes with
    mean cos(phi); an entangled probe yields one +/-1 outcome with mean
    cos(N phi). Trials are drawn in fixed-size batches whose generators are
    spawned from ``seed``, so the result does not depend on ``workers``.
    The slope in the denominator comes from the model mean.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if probe.kind is ProbeKind.UNCORRELATED:
        n_probes, angle = probe.N, probe.phi
    else:
        n_probes, angle = 1, probe.N * probe.phi
    p_plus = min(max((1.0 + math.cos(angle)) / 2.0, 0.0), 1.0)
    n_batches = -(-trials // BATCH_SIZE)
    seqs = np.random.SeedSequence(seed).spawn(n_batches)
    jobs = [
        (seqs[i], min(BATCH_SIZE, trials - i * BATCH_SIZE), n_probes, p_plus) for i in range(n_batches)
    ]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_batch_moments, jobs))
    else:
        parts = [_batch_moments(j) for j in jobs]
    total = sum(p[0] for p in parts)
    total_sq = sum(p[1] for p in parts)
    mean = total / trials
    var = max(total_sq / trials - mean**2, 0.0)
    slope = central_difference(lambda x: statistics(probe.kind, probe.N, x)[0], probe.phi)
    if abs(slope) < DERIVATIVE_THRESHOLD:
        return EstimationResult(mean, var, math.nan, True, "stationary point of the mean")
    return EstimationResult(mean, var, math.sqrt(var) / abs(slope))
