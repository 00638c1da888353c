import logging
from typing import Optional, TypedDict

from langgraph.graph import END, StateGraph
from pydantic import BaseModel, Field

from arith.circuits import add_r4, div_r4, mul_r4, neg_r4, pow_r4, renormalize, sub_r4
from arith.numbers import Real4, Real4Components, components, encode_real4, r2, r4
from qcm.errors import EncodingRangeError
from qcm.settings import DEFAULT_SETTINGS, QcmSettings
from qcm.store import EnsembleStore
from tools.estimate import DEFAULT_LEVEL, EstimateReport, estimate_real4
from tools.expr_parser import Add, Div, Expr, Literal, Mul, Neg, Pow, Sub, oracle, parse, to_text
from tools.rng import fresh_seed

logger = logging.getLogger(__name__)

MODES = ("exact", "sampled")


class EvalReport(BaseModel):
    """Result of running one expression through the circuit pipeline."""

    exact_value: float = Field(serialization_alias="exact", description="Floating-point oracle value.")
    circuit_value: float = Field(serialization_alias="circuit", description="Decoded real4 result of the circuit.")
    abs_err: float
    rel_err: float = Field(description="abs_err / |exact|, or abs_err when the exact value is 0.")
    physical_gates: int = Field(ge=0)
    clones: int = Field(ge=0)
    renorms: int = Field(ge=0)
    expr: str = Field(description="Canonical fully parenthesized form of the expression.")
    mode: str
    renorm: bool
    components: Real4Components
    min_den_magnitude: float = Field(description="Smallest |r2(den)| seen at any node before renormalization.")
    estimate: Optional[EstimateReport] = None

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True)


# --- 1. Graph state ---
class EvalState(TypedDict, total=False):
    """
    Represents the state of one expression evaluation.

    Attributes:
        text: Expression source, when the caller has not parsed it yet.
        ast: Parsed expression.
        mode: "exact" or "sampled".
        shots, seed, level: Readout parameters for sampled mode.
        renorm: Renormalize between AST nodes.
        store: The store every ensemble of this run lives in.
        result: Real4 handle of the root node.
    """

    text: Optional[str]
    ast: Optional[Expr]
    mode: str
    shots: Optional[int]
    seed: Optional[int]
    level: float
    renorm: bool
    settings: QcmSettings
    exact_value: Optional[float]
    store: Optional[EnsembleStore]
    result: Optional[Real4]
    min_den: Optional[float]
    estimate: Optional[EstimateReport]
    report: Optional[EvalReport]


class CircuitEvaluator:
    """Builds the real4 circuit of an expression bottom-up in one store."""

    def __init__(self, store: EnsembleStore, renorm: bool):
        self.store = store
        self.renorm = renorm
        self.min_den = float("inf")

    def _settle(self, x: Real4) -> Real4:
        self.min_den = min(self.min_den, abs(r2(x.den)))
        return renormalize(x) if self.renorm else x

    def build(self, node: Expr) -> Real4:
        match node:
            case Literal(value):
                x = encode_real4(self.store, value)
                self.min_den = min(self.min_den, abs(r2(x.den)))
                return x
            case Neg(child):
                return neg_r4(self.build(child))
            case Add(left, right):
                return self._settle(add_r4(self.build(left), self.build(right)))
            case Sub(left, right):
                return self._settle(sub_r4(self.build(left), self.build(right)))
            case Mul(left, right):
                return self._settle(mul_r4(self.build(left), self.build(right)))
            case Div(left, right):
                return self._settle(div_r4(self.build(left), self.build(right)))
            case Pow(base, exponent):
                return self._settle(pow_r4(self.build(base), exponent, self.renorm))
        raise TypeError(f"not an expression node: {node!r}")


# --- 2. Nodes ---

def parse_node(state: EvalState) -> EvalState:
    logger.info("---NODE: Parse---")
    if state.get("ast") is None:
        state["ast"] = parse(state["text"])
    logger.info("   expression: %s", to_text(state["ast"]))
    return state


def oracle_node(state: EvalState) -> EvalState:
    """Floating reference value; also rejects guarded divisors before any circuit runs."""
    logger.info("---NODE: Oracle---")
    state["exact_value"] = oracle(state["ast"], state["settings"].divisor_guard)
    logger.info("   exact value: %r", state["exact_value"])
    return state


def circuit_node(state: EvalState) -> EvalState:
    logger.info("---NODE: Circuit---")
    store = state.get("store") or EnsembleStore(state["settings"])
    evaluator = CircuitEvaluator(store, state["renorm"])
    state["store"] = store
    state["result"] = evaluator.build(state["ast"])
    state["min_den"] = evaluator.min_den
    logger.info("   %d trace events, min |den| %.3e", len(store.trace), evaluator.min_den)
    return state


def route_readout(state: EvalState) -> str:
    return "estimate" if state["mode"] == "sampled" else "report"


def estimate_node(state: EvalState) -> EvalState:
    logger.info("---NODE: Estimate---")
    if state.get("seed") is None:
        state["seed"] = fresh_seed()
        logger.info("   no seed given, using %d", state["seed"])
    state["estimate"] = estimate_real4(state["result"], state["shots"], state["seed"], state["level"])
    return state


def report_node(state: EvalState) -> EvalState:
    logger.info("---NODE: Report---")
    store = state["store"]
    result = state["result"]
    exact = state["exact_value"]
    circuit = r4(result)
    abs_err = abs(circuit - exact)
    state["report"] = EvalReport(
        exact_value=exact,
        circuit_value=circuit,
        abs_err=abs_err,
        rel_err=abs_err / abs(exact) if exact != 0 else abs_err,
        physical_gates=store.gate_count(physical=True),
        clones=store.gate_count(kind="clone"),
        renorms=store.gate_count(kind="renorm"),
        expr=to_text(state["ast"]),
        mode=state["mode"],
        renorm=state["renorm"],
        components=components(result),
        min_den_magnitude=state["min_den"],
        estimate=state.get("estimate"),
    )
    return state


# --- 3. Assemble the graph ---
def build_graph():
    """Parse -> oracle -> circuit -> (estimate) -> report."""
    workflow = StateGraph(EvalState)

    workflow.add_node("parse", parse_node)
    workflow.add_node("oracle", oracle_node)
    workflow.add_node("circuit", circuit_node)
    workflow.add_node("estimate", estimate_node)
    workflow.add_node("report", report_node)

    workflow.set_entry_point("parse")
    workflow.add_edge("parse", "oracle")
    workflow.add_edge("oracle", "circuit")
    workflow.add_conditional_edges(
        "circuit",
        route_readout,
        {
            "estimate": "estimate",
            "report": "report",
        },
    )
    workflow.add_edge("estimate", "report")
    workflow.add_edge("report", END)

    return workflow.compile()


eval_graph = build_graph()


def _run(initial: EvalState) -> tuple[EvalReport, EnsembleStore]:
    if initial["mode"] not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {initial['mode']!r}")
    if initial["mode"] == "sampled" and (initial.get("shots") or 0) < 1:
        raise EncodingRangeError(f"sampled mode needs shots >= 1, got {initial.get('shots')}")
    final = eval_graph.invoke(initial)
    return final["report"], final["store"]


def evaluate(
    ast: Expr,
    mode: str = "exact",
    shots: Optional[int] = None,
    seed: Optional[int] = None,
    renorm: bool = True,
    settings: QcmSettings = DEFAULT_SETTINGS,
    level: float = DEFAULT_LEVEL,
    store: Optional[EnsembleStore] = None,
) -> EvalReport:
    report, _ = evaluate_with_store(ast, mode, shots, seed, renorm, settings, level, store)
    return report


def evaluate_with_store(
    ast: Expr,
    mode: str = "exact",
    shots: Optional[int] = None,
    seed: Optional[int] = None,
    renorm: bool = True,
    settings: QcmSettings = DEFAULT_SETTINGS,
    level: float = DEFAULT_LEVEL,
    store: Optional[EnsembleStore] = None,
) -> tuple[EvalReport, EnsembleStore]:
    """Like `evaluate`, also returning the store so its trace can be exported."""
    return _run(
        {
            "ast": ast,
            "mode": mode,
            "shots": shots,
            "seed": seed,
            "level": level,
            "renorm": renorm,
            "settings": settings,
            "store": store,
        }
    )


def evaluate_text(text: str, **kwargs) -> EvalReport:
    return evaluate(parse(text), **kwargs)
