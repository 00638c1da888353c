"""
Acceptance suite run by `qcm-arith selftest`: one PASS/FAIL line per
criterion, every random draw seeded.
"""
import logging
import operator
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Callable

import numpy as np
from pydantic import BaseModel, Field

from arith.circuits import (
    add_r4,
    div_r4,
    mean_r4,
    mu1,
    mu2,
    mul_r4,
    neg_r4,
    pow_r4_counted,
    sigma1,
    sigma2,
    sigma_r2,
    sub_r4,
)
from arith.numbers import encode_real1, encode_real2, encode_real4, r1, r2, r4
from graph.eval_graph import evaluate
from qcm.densop import (
    classical_state,
    conjugate,
    is_decomposable,
    partial_trace,
    random_density_matrix,
    tensor,
)
from qcm.gates import BUILTIN_GATES, ClassicalPermutationGate, gate_cnot, gate_identity, gate_mean_unitary, gate_prepare
from qcm.store import EnsembleStore, prepared_state
from tools.estimate import delta_standard_error, estimate_real4, wilson_coverage
from tools.expr_parser import Literal, Mul

logger = logging.getLogger(__name__)

REAL4_OPS = {"add": add_r4, "sub": sub_r4, "mul": mul_r4, "div": div_r4}


class SelftestPlan(BaseModel):
    """Sample sizes of the suite; the defaults are the full acceptance counts."""

    seed: int = 20240611
    random_states: int = Field(default=1000, ge=1)
    real1_pairs: int = Field(default=1000, ge=1)
    real2_pairs: int = Field(default=1000, ge=1)
    real4_pairs: int = Field(default=1000, ge=1)
    fixed_circuit_values: int = Field(default=100, ge=2)
    coverage_trials: int = Field(default=10_000, ge=1)
    real4_shots: int = Field(default=1_000_000, ge=1)
    chain_depth: int = Field(default=8, ge=1)
    workers: int = Field(default=1, ge=1, description="Processes the pair-sampling criteria are split across.")


class CriterionResult(BaseModel):
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.number:>2} {self.name}: {self.detail}"


def _rel(actual: float, expected: float) -> float:
    return abs(actual - expected) / abs(expected) if expected != 0 else abs(actual)


def _chunk_worst(error: Callable[[float, float], float], pairs: list[tuple[float, float]]) -> float:
    return max((error(x, y) for x, y in pairs), default=0.0)


def worst_over_pairs(
    error: Callable[[float, float], float],
    pairs: list[tuple[float, float]],
    workers: int = 1,
) -> float:
    """Largest error(x, y) over the pairs, split across `workers` processes."""
    if workers == 1 or len(pairs) < 2:
        return _chunk_worst(error, pairs)
    shards = [pairs[i::workers] for i in range(min(workers, len(pairs)))]
    with ProcessPoolExecutor(max_workers=len(shards)) as pool:
        return max(pool.map(_chunk_worst, [error] * len(shards), shards))


def check_gate_algebra(plan: SelftestPlan, rng: np.random.Generator) -> tuple[bool, str]:
    gates = [factory() for factory in BUILTIN_GATES.values()]
    gates += [gate_identity(2), gate_prepare(float(rng.random()))]
    worst = 0.0
    for gate in gates:
        m = gate.matrix
        worst = max(worst, float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))))
        if isinstance(gate, ClassicalPermutationGate):
            if not (np.isin(m, (0, 1)).all() and (m.sum(axis=0) == 1).all() and (m.sum(axis=1) == 1).all()):
                return False, f"{gate.label} is not a 0/1 permutation matrix"
    return worst <= 1e-12, f"{len(gates)} gates, max |U^dagger U - I| = {worst:.1e}"


def check_diagonalization(plan: SelftestPlan, rng: np.random.Generator) -> tuple[bool, str]:
    worst = 0.0
    zero = classical_state([0])
    for _ in range(plan.random_states):
        s = random_density_matrix(rng)
        joint = conjugate(tensor(s, zero), gate_cnot(), [0, 1])
        for pos in (0, 1):
            marginal = partial_trace(joint, [pos])
            worst = max(worst, float(np.max(np.abs(marginal.data - np.diag(s.diagonal)))))
    return worst <= 1e-12, f"{plan.random_states} states, max deviation {worst:.1e}"


def real1_error(x: float, y: float) -> float:
    store = EnsembleStore()
    cases = [
        (sigma1, (x + y) / 2),
        (sigma2, 1 - (x + y) + 2 * x * y),
        (mu1, x * y / 2 + 0.25),
    ]
    return max(abs(r1(op(encode_real1(store, x), encode_real1(store, y))) - expected) for op, expected in cases)


def check_real1(plan: SelftestPlan, rng: np.random.Generator) -> tuple[bool, str]:
    pairs = [tuple(float(v) for v in rng.random(2)) for _ in range(plan.real1_pairs)]
    worst = worst_over_pairs(real1_error, pairs, plan.workers)
    return worst <= 1e-12, f"{plan.real1_pairs} pairs, max abs error {worst:.1e}"


def real2_error(x: float, y: float) -> float:
    store = EnsembleStore()
    cases = ((sigma_r2, (x + y) / 2), (mu2, x * y / 4))
    return max(abs(r2(op(encode_real2(store, x), encode_real2(store, y))) - expected) for op, expected in cases)


def check_real2(plan: SelftestPlan, rng: np.random.Generator) -> tuple[bool, str]:
    pairs = [tuple(float(v) for v in rng.uniform(-1, 1, 2)) for _ in range(plan.real2_pairs)]
    worst = worst_over_pairs(real2_error, pairs, plan.workers)
    return worst <= 1e-12, f"{plan.real2_pairs} pairs, max abs error {worst:.1e}"


def _divisor(rng: np.random.Generator) -> float:
    while True:
        y = float(rng.uniform(-10, 10))
        if abs(y) >= 1e-3:
            return y


REAL4_EXACT = {"add": operator.add, "sub": operator.sub, "mul": operator.mul, "div": operator.truediv}


def real4_error(x: float, y: float) -> float:
    store = EnsembleStore()
    return max(
        _rel(r4(op(encode_real4(store, x), encode_real4(store, y))), REAL4_EXACT[name](x, y))
        for name, op in REAL4_OPS.items()
    )


def check_real4(plan: SelftestPlan, rng: np.random.Generator) -> tuple[bool, str]:
    pairs = [(float(rng.uniform(-10, 10)), _divisor(rng)) for _ in range(plan.real4_pairs)]
    worst = worst_over_pairs(real4_error, pairs, plan.workers)
    return worst <= 1e-9, f"{plan.real4_pairs} pairs, max rel error {worst:.1e}"


# name -> (encoder, circuit, arity, value range)
FIXED_CIRCUITS: dict[str, tuple[Callable, Callable, int, tuple[float, float]]] = {
    "sigma1": (encode_real1, sigma1, 2, (0.0, 1.0)),
    "sigma2": (encode_real1, sigma2, 2, (0.0, 1.0)),
    "mu1": (encode_real1, mu1, 2, (0.0, 1.0)),
    "sigma_r2": (encode_real2, sigma_r2, 2, (-1.0, 1.0)),
    "mu2": (encode_real2, mu2, 2, (-1.0, 1.0)),
    "add": (encode_real4, add_r4, 2, (-10.0, 10.0)),
    "sub": (encode_real4, sub_r4, 2, (-10.0, 10.0)),
    "mul": (encode_real4, mul_r4, 2, (-10.0, 10.0)),
    "mean": (encode_real4, mean_r4, 2, (-10.0, 10.0)),
    "div": (encode_real4, div_r4, 2, (-10.0, 10.0)),
    "neg": (encode_real4, neg_r4, 1, (-10.0, 10.0)),
}


def physical_count(op: Callable, *values: float, encode: Callable = encode_real4) -> int:
    store = EnsembleStore()
    op(*(encode(store, v) for v in values))
    return store.gate_count(physical=True)


def check_fixed_circuits(plan: SelftestPlan, rng: np.random.Generator) -> tuple[bool, str]:
    counts = {}
    for name, (encode, op, arity, (low, high)) in FIXED_CIRCUITS.items():
        seen = set()
        for _ in range(plan.fixed_circuit_values):
            values = [float(rng.uniform(low, high)) for _ in range(arity - 1)]
            # division needs a divisor away from zero
            values.append(_divisor(rng) if name == "div" else float(rng.uniform(low, high)))
            seen.add(physical_count(op, *values, encode=encode))
        if len(seen) != 1:
            return False, f"{name} gate counts vary: {sorted(seen)}"
        counts[name] = seen.pop()
    return True, ", ".join(f"{name}={count}" for name, count in counts.items())


def check_powering(plan: SelftestPlan, rng: np.random.Generator) -> tuple[bool, str]:
    store = EnsembleStore()
    _, muls = pow_r4_counted(encode_real4(store, 1.0), 1024, renorm=True)
    store = EnsembleStore()
    value, _ = pow_r4_counted(encode_real4(store, 1.1), 128, renorm=True)
    err = _rel(r4(value), 1.1**128)
    return muls <= 11 and err <= 1e-6, f"n=1024 used {muls} multiplications; 1.1^128 rel error {err:.1e}"


def check_negative_control(plan: SelftestPlan, rng: np.random.Generator) -> tuple[bool, str]:
    store = EnsembleStore()
    coherent, _ = store.apply2(gate_mean_unitary(), store.prepare(0.5), store.prepare(0.5))
    deviation = abs(store.r1(coherent) - 0.5)
    diagonal = sigma1(encode_real1(store, 0.5), encode_real1(store, 0.5))
    control = abs(r1(diagonal) - 0.5)
    passed = deviation > 1e-6 and control <= 1e-12
    return passed, f"coherent inputs off by {deviation:.3f}, diagonalized inputs off by {control:.1e}"


def check_statistical_readout(plan: SelftestPlan, rng: np.random.Generator) -> tuple[bool, str]:
    coverage = wilson_coverage(0.3, 1000, plan.coverage_trials, plan.seed)
    store = EnsembleStore()
    x = encode_real4(store, 2.0)
    se = delta_standard_error(x, plan.real4_shots)
    report = estimate_real4(x, plan.real4_shots, plan.seed)
    within = abs(report.point - 2.0) <= 3 * se
    passed = 0.935 <= coverage <= 0.965 and within
    return passed, f"coverage {coverage:.4f}; encode(2) estimate {report.point:.5f} (3 SE = {3 * se:.1e})"


def check_decomposability(plan: SelftestPlan, rng: np.random.Generator) -> tuple[bool, str]:
    product = tensor(random_density_matrix(rng), random_density_matrix(rng))
    product_ok, _ = is_decomposable(product, [[0], [1]], tol=1e-12)
    bell = conjugate(tensor(prepared_state(0.5), classical_state([0])), gate_cnot(), [0, 1])
    bell_ok, _ = is_decomposable(bell, [[0], [1]], tol=1e-3)
    return product_ok and not bell_ok, f"product decomposable={product_ok}, Bell decomposable={bell_ok}"


def multiplication_chain(values: list[float]):
    ast = Literal(values[0])
    for v in values[1:]:
        ast = Mul(ast, Literal(v))
    return ast


def check_renorm_off(plan: SelftestPlan, rng: np.random.Generator) -> tuple[bool, str]:
    values = [float(v) for v in rng.uniform(0.5, 1.0, plan.chain_depth + 1)]
    report = evaluate(multiplication_chain(values), renorm=False)
    bound = 4.0 ** -plan.chain_depth
    shrunk = report.min_den_magnitude <= bound * (1 + 1e-9)
    passed = shrunk and report.rel_err <= 1e-6
    return passed, (
        f"min |den| {report.min_den_magnitude:.3e} (4^-{plan.chain_depth} = {bound:.3e}), "
        f"rel error {report.rel_err:.1e}, components {report.components.probabilities}"
    )


CRITERIA: list[tuple[str, Callable[[SelftestPlan, np.random.Generator], tuple[bool, str]]]] = [
    ("gate algebra", check_gate_algebra),
    ("CNOT diagonalization", check_diagonalization),
    ("real1 sigma1/sigma2/mu1", check_real1),
    ("real2 sigma/mu2", check_real2),
    ("real4 field operations", check_real4),
    ("fixed circuits", check_fixed_circuits),
    ("powering", check_powering),
    ("negative control", check_negative_control),
    ("statistical readout", check_statistical_readout),
    ("decomposability", check_decomposability),
    ("renormalization off", check_renorm_off),
]


def run_criterion(plan: SelftestPlan, number: int) -> CriterionResult:
    name, check = CRITERIA[number - 1]
    rng = np.random.default_rng([plan.seed, number])
    started = time.perf_counter()
    try:
        passed, detail = check(plan, rng)
    except Exception as e:
        logger.exception("criterion %d crashed", number)
        passed, detail = False, f"{type(e).__name__}: {e}"
    elapsed = time.perf_counter() - started
    logger.info("criterion %d took %.2fs", number, elapsed)
    return CriterionResult(number=number, name=name, passed=passed, detail=detail, seconds=elapsed)


def run_selftest(plan: SelftestPlan = SelftestPlan()) -> list[CriterionResult]:
    # each criterion has its own (seed, number) generator, so results do not depend on plan.workers
    return [run_criterion(plan, number) for number in range(1, len(CRITERIA) + 1)]
