"""
Digital readout of q-ensembles: finite-shot measurement sampling plus
interval estimates for real1 and real4 numbers.

Each qubit ensemble is measured with its own shots; a real4 readout draws
4N shots in total, one independent binomial per component qubit.
"""
import logging
import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_serializer, model_validator
from scipy.stats import norm

from arith.numbers import Real4, r4
from qcm.errors import DenominatorIndistinguishableFromZero, EncodingRangeError
from qcm.store import EnsembleId, EnsembleStore
from tools.rng import GENERATOR_NAME, make_rng, spawn_seeds

logger = logging.getLogger(__name__)

DEFAULT_LEVEL = 0.95


class SampleResult(BaseModel):
    shots: int = Field(ge=1, description="Number of qubits measured.")
    ones: int = Field(ge=0, description="How many of them read |1>.")
    seed: int

    @model_validator(mode="after")
    def _ones_within_shots(self):
        if self.ones > self.shots:
            raise ValueError(f"ones={self.ones} exceeds shots={self.shots}")
        return self

    @property
    def proportion(self) -> float:
        return self.ones / self.shots


class EstimateReport(BaseModel):
    """Point estimate with its confidence interval; `method` is wilson, delta or exact."""

    point: float
    ci_low: float
    ci_high: float
    level: float = DEFAULT_LEVEL
    shots: Optional[int] = None
    seed: Optional[int] = None
    method: str

    @model_serializer
    def _serialize(self) -> dict:
        return {
            "point": self.point,
            "ci": [self.ci_low, self.ci_high],
            "level": self.level,
            "shots": self.shots,
            "seed": self.seed,
            "method": self.method,
        }

    @property
    def width(self) -> float:
        return self.ci_high - self.ci_low


def z_value(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise EncodingRangeError(f"confidence level must lie in (0, 1), got {level}")
    return float(norm.ppf(1.0 - (1.0 - level) / 2.0))


def sample(store: EnsembleStore, a: EnsembleId, shots: int, seed: int) -> SampleResult:
    """Measure `shots` qubits of ensemble `a`; reading does not consume it."""
    if shots < 1:
        raise EncodingRangeError(f"shots must be >= 1, got {shots}")
    p = min(max(store.r1(a), 0.0), 1.0)
    ones = int(make_rng(seed).binomial(shots, p))
    logger.debug("sampled ensemble %d: %d/%d ones (seed %d)", a, ones, shots, seed)
    return SampleResult(shots=shots, ones=ones, seed=seed)


# --- real1 ---

def wilson_bounds(ones, shots, level: float = DEFAULT_LEVEL) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized Wilson score bounds; `ones` may be an array of counts."""
    z = z_value(level)
    ones = np.asarray(ones, dtype=float)
    p_hat = ones / shots
    denominator = 1 + z**2 / shots
    center = (p_hat + z**2 / (2 * shots)) / denominator
    margin = (z / denominator) * np.sqrt(p_hat * (1 - p_hat) / shots + z**2 / (4 * shots**2))
    lower = np.where(ones == 0, 0.0, np.maximum(0.0, center - margin))
    upper = np.where(ones == shots, 1.0, np.minimum(1.0, center + margin))
    return lower, upper


def wilson_interval(ones: int, shots: int, level: float = DEFAULT_LEVEL) -> tuple[float, float]:
    lower, upper = wilson_bounds(ones, shots, level)
    return float(lower), float(upper)


def estimate_real1(s: SampleResult, level: float = DEFAULT_LEVEL) -> EstimateReport:
    lower, upper = wilson_interval(s.ones, s.shots, level)
    return EstimateReport(
        point=s.proportion,
        ci_low=lower,
        ci_high=upper,
        level=level,
        shots=s.shots,
        seed=s.seed,
        method="wilson",
    )


def estimate_real1_exact(p: float, level: float = DEFAULT_LEVEL) -> EstimateReport:
    """The infinite-ensemble limit: the probability itself, zero-width interval."""
    return EstimateReport(point=p, ci_low=p, ci_high=p, level=level, method="exact")


def wilson_coverage(
    p: float,
    shots: int,
    trials: int,
    seed: int,
    level: float = DEFAULT_LEVEL,
) -> float:
    """Fraction of `trials` seeded binomial draws whose Wilson interval contains p."""
    ones = make_rng(seed).binomial(shots, p, size=trials)
    lower, upper = wilson_bounds(ones, shots, level)
    covered = float(np.mean((lower <= p) & (p <= upper)))
    logger.info("wilson coverage p=%.3f N=%d: %.4f over %d trials (%s seed %d)", p, shots, covered, trials, GENERATOR_NAME, seed)
    return covered


# --- real4 ---

def _ratio_with_delta_se(probs: list[float], shots: Optional[int]) -> tuple[float, float, float, float]:
    """
    Plug-in ratio (p1 - p2) / (p3 - p4) and first-order standard errors.

    Returns (point, se_point, denominator, se_denominator); standard errors
    are zero when `shots` is None.
    """
    p1, p2, p3, p4 = probs
    num, den = p1 - p2, p3 - p4
    if shots is None:
        var_num = var_den = 0.0
    else:
        var_num = (p1 * (1 - p1) + p2 * (1 - p2)) / shots
        var_den = (p3 * (1 - p3) + p4 * (1 - p4)) / shots
    if den == 0.0:
        return math.nan, math.inf, den, math.sqrt(var_den)
    point = num / den
    var_point = var_num / den**2 + num**2 * var_den / den**4
    return point, math.sqrt(var_point), den, math.sqrt(var_den)


def estimate_real4(
    x: Real4,
    shots: int,
    seed: int,
    level: float = DEFAULT_LEVEL,
) -> EstimateReport:
    """
    Sample each of the four qubits with `shots` shots and form the plug-in
    ratio. Qubit i is sampled with seed spawn_seeds(seed, 4)[i].
    """
    store = x.store
    seeds = spawn_seeds(seed, 4)
    samples = [sample(store, q.ens, shots, s) for q, s in zip(x.qubits, seeds)]
    z = z_value(level)
    point, se, den, se_den = _ratio_with_delta_se([s.proportion for s in samples], shots)
    if abs(den) <= z * se_den or den == 0.0:
        raise DenominatorIndistinguishableFromZero(
            f"sampled denominator {den:.3e} is within {z:.2f} standard errors ({se_den:.3e}) of zero; "
            f"increase the shot count above {shots}"
        )
    return EstimateReport(
        point=point,
        ci_low=point - z * se,
        ci_high=point + z * se,
        level=level,
        shots=shots,
        seed=seed,
        method="delta",
    )


def delta_standard_error(x: Real4, shots: int) -> float:
    """Delta-method standard error of the ratio at the exact probabilities."""
    _, se, _, _ = _ratio_with_delta_se([q.value for q in x.qubits], shots)
    return se


def estimate_real4_exact(x: Real4, level: float = DEFAULT_LEVEL) -> EstimateReport:
    """Plug-in path with the exact probabilities; the point equals r4(x)."""
    value = r4(x)
    return EstimateReport(point=value, ci_low=value, ci_high=value, level=level, method="exact")
