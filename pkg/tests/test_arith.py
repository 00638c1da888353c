import numpy as np
import pytest

from arith.circuits import (
    add_r4,
    div_r4,
    inv_r4,
    mean_r4,
    mu1,
    mu2,
    mul_r4,
    neg_r4,
    pow_r4,
    pow_r4_counted,
    renormalize,
    sigma1,
    sigma2,
    sigma_r2,
    sub_r4,
)
from arith.numbers import (
    Real1,
    Real2,
    Real4,
    clone_r4,
    components,
    encode_real1,
    encode_real2,
    encode_real4,
    neg_r2,
    r1,
    r2,
    r4,
    real4_probabilities,
)
from qcm.errors import ConsumedEnsembleError, DenominatorNearZero, DivisorNearZero, EncodingRangeError
from qcm.gates import gate_mean_unitary
from qcm.store import EnsembleStore, prepared_state


@pytest.fixture
def store():
    return EnsembleStore()


def from_probabilities(store: EnsembleStore, probs) -> Real4:
    q = [encode_real1(store, p) for p in probs]
    return Real4(Real2(q[0], q[1]), Real2(q[2], q[3]))


def physical_gates(op, *values, encode=encode_real4) -> int:
    store = EnsembleStore()
    op(*(encode(store, v) for v in values))
    return store.gate_count(physical=True)


class TestEncoding:
    @pytest.mark.parametrize("v, expected", [(0.0, (0.5, 0.5)), (1.0, (1.0, 0.0)), (-0.4, (0.3, 0.7))])
    def test_real2_balanced(self, store, v, expected):
        x = encode_real2(store, v)
        assert (r1(x.plus), r1(x.minus)) == pytest.approx(expected, abs=1e-12)
        assert r2(x) == pytest.approx(v, abs=1e-12)

    @pytest.mark.parametrize("v", [1.5, -1.01, float("nan")])
    def test_real2_range(self, store, v):
        with pytest.raises(EncodingRangeError):
            encode_real2(store, v)

    @pytest.mark.parametrize(
        "r, num, den",
        [(2.0, 1.0, 0.5), (0.0, 0.0, 1.0), (-0.25, -0.25, 1.0), (-8.0, -1.0, 0.125)],
    )
    def test_real4_rule(self, store, r, num, den):
        x = encode_real4(store, r)
        assert r2(x.num) == pytest.approx(num, abs=1e-12)
        assert r2(x.den) == pytest.approx(den, abs=1e-12)
        assert r4(x) == pytest.approx(r, abs=1e-12 * max(1, abs(r)))

    def test_real4_qubit_probabilities(self, store):
        assert real4_probabilities(2.0) == pytest.approx((1.0, 0.0, 0.75, 0.25))
        assert components(encode_real4(store, 2.0)).probabilities == pytest.approx([1.0, 0.0, 0.75, 0.25], abs=1e-12)

    @pytest.mark.parametrize("r", [float("inf"), float("nan")])
    def test_real4_rejects_non_finite(self, store, r):
        with pytest.raises(EncodingRangeError):
            encode_real4(store, r)


class TestDecoding:
    @pytest.mark.parametrize(
        "probs, expected",
        [
            ((0.9, 0.1, 0.7, 0.3), 2.0),
            ((0.8, 0.3, 0.8, 0.3), 1.0),
            ((0.5, 0.5, 0.9, 0.1), 0.0),
        ],
    )
    def test_r4(self, store, probs, expected):
        assert r4(from_probabilities(store, probs)) == pytest.approx(expected, abs=1e-12)

    def test_r2_difference(self, store):
        assert r2(Real2(encode_real1(store, 0.9), encode_real1(store, 0.1))) == pytest.approx(0.8)
        assert r2(Real2(encode_real1(store, 0.4), encode_real1(store, 0.4))) == 0

    def test_denominator_floor(self, store):
        with pytest.raises(DenominatorNearZero):
            r4(from_probabilities(store, (0.9, 0.1, 0.5, 0.5)))

    def test_shift_invariance(self, store):
        x = from_probabilities(store, (0.6, 0.2, 0.9, 0.4))
        before = r4(x)
        shifted = store.replace([x.num.plus.ens, x.num.minus.ens], [prepared_state(0.7), prepared_state(0.3)])
        y = Real4(Real2(*(Real1(store, e) for e in shifted)), x.den)
        assert r4(y) == pytest.approx(before, abs=1e-12)


class TestReal1:
    @pytest.mark.parametrize("x, y, expected", [(0, 0, 0), (1, 0, 0.5), (0.3, 0.7, 0.5)])
    def test_sigma1(self, store, x, y, expected):
        assert r1(sigma1(encode_real1(store, x), encode_real1(store, y))) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("x, y, expected", [(0, 0, 1), (1, 1, 1), (0.5, 0.25, 0.5)])
    def test_sigma2(self, store, x, y, expected):
        assert r1(sigma2(encode_real1(store, x), encode_real1(store, y))) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("x, y, expected", [(0, 0, 0.25), (1, 1, 0.75), (0.5, 0.5, 0.375)])
    def test_mu1(self, store, x, y, expected):
        assert r1(mu1(encode_real1(store, x), encode_real1(store, y))) == pytest.approx(expected, abs=1e-12)

    def test_random_pairs_match_closed_forms(self, store):
        rng = np.random.default_rng(21)
        for x, y in rng.random((200, 2)):
            assert r1(sigma1(encode_real1(store, x), encode_real1(store, y))) == pytest.approx((x + y) / 2, abs=1e-12)
            assert r1(sigma2(encode_real1(store, x), encode_real1(store, y))) == pytest.approx(
                1 - (x + y) + 2 * x * y, abs=1e-12
            )
            out = r1(mu1(encode_real1(store, x), encode_real1(store, y)))
            assert out == pytest.approx(x * y / 2 + 0.25, abs=1e-12)
            assert 0.0 <= out <= 1.0

    def test_operands_are_consumed(self, store):
        x, y = encode_real1(store, 0.2), encode_real1(store, 0.4)
        sigma1(x, y)
        with pytest.raises(ConsumedEnsembleError):
            sigma1(x, encode_real1(store, 0.1))

    def test_mean_unitary_needs_diagonal_inputs(self, store):
        out, _ = store.apply2(gate_mean_unitary(), store.prepare(0.5), store.prepare(0.5))
        assert abs(store.r1(out) - 0.5) > 1e-6


class TestReal2:
    @pytest.mark.parametrize("x, y, expected", [(1, -1, 0), (0.5, 0.5, 0.5), (0.8, -0.2, 0.3)])
    def test_sigma_r2(self, store, x, y, expected):
        assert r2(sigma_r2(encode_real2(store, x), encode_real2(store, y))) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("x, y, expected", [(1, 1, 0.25), (-1, 1, -0.25), (0, 0.7, 0)])
    def test_mu2(self, store, x, y, expected):
        assert r2(mu2(encode_real2(store, x), encode_real2(store, y))) == pytest.approx(expected, abs=1e-12)

    def test_random_pairs(self, store):
        rng = np.random.default_rng(22)
        for x, y in rng.uniform(-1, 1, (100, 2)):
            assert r2(sigma_r2(encode_real2(store, x), encode_real2(store, y))) == pytest.approx((x + y) / 2, abs=1e-12)
            out = r2(mu2(encode_real2(store, x), encode_real2(store, y)))
            assert out == pytest.approx(x * y / 4, abs=1e-12)
            assert -1.0 <= out <= 1.0

    def test_neg_r2_is_free(self, store):
        x = encode_real2(store, 0.3)
        before = len(store.trace)
        assert r2(neg_r2(x)) == pytest.approx(-0.3, abs=1e-12)
        assert len(store.trace) == before


class TestReal4:
    @pytest.mark.parametrize(
        "op, x, y, expected",
        [
            (mul_r4, 2, 3, 6),
            (mul_r4, 0.7, 1, 0.7),
            (mul_r4, 5, 0, 0),
            (mean_r4, 2, 4, 3),
            (mean_r4, 1, -1, 0),
            (add_r4, 2, 3, 5),
            (sub_r4, 1, 4, -3),
            (div_r4, 1, 4, 0.25),
        ],
    )
    def test_examples(self, store, op, x, y, expected):
        out = r4(op(encode_real4(store, x), encode_real4(store, y)))
        assert out == pytest.approx(expected, rel=1e-9, abs=1e-12)

    def test_neg_and_inv(self, store):
        before = len(store.trace)
        x = encode_real4(store, 7)
        assert r4(neg_r4(x)) == pytest.approx(-7, rel=1e-12)
        assert r4(inv_r4(encode_real4(store, 2))) == pytest.approx(0.5, rel=1e-12)
        assert store.gate_count(kind="gate") == 0
        assert len(store.trace) == before + 8

    def test_mean_with_clone(self, store):
        x = encode_real4(store, 3.5)
        assert r4(mean_r4(x, clone_r4(x))) == pytest.approx(3.5, rel=1e-9)

    def test_division_by_zero(self, store):
        with pytest.raises(DivisorNearZero):
            div_r4(encode_real4(store, 1), encode_real4(store, 0))

    def test_random_pairs_match_oracle(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            x = float(rng.uniform(-10, 10))
            y = float(rng.uniform(-10, 10))
            if abs(y) < 1e-3:
                continue
            store = EnsembleStore()
            cases = [(add_r4, x + y), (sub_r4, x - y), (mul_r4, x * y), (div_r4, x / y)]
            for op, expected in cases:
                out = r4(op(encode_real4(store, x), encode_real4(store, y)))
                assert out == pytest.approx(expected, rel=1e-9, abs=1e-9)


class TestFixedCircuits:
    @pytest.mark.parametrize(
        "op, encode, low, high",
        [
            (sigma1, encode_real1, 0, 1),
            (sigma2, encode_real1, 0, 1),
            (mu1, encode_real1, 0, 1),
            (sigma_r2, encode_real2, -1, 1),
            (mu2, encode_real2, -1, 1),
            (mul_r4, encode_real4, -10, 10),
            (mean_r4, encode_real4, -10, 10),
            (add_r4, encode_real4, -10, 10),
            (sub_r4, encode_real4, -10, 10),
            (div_r4, encode_real4, 1, 10),
        ],
    )
    def test_gate_count_is_independent_of_operands(self, op, encode, low, high):
        rng = np.random.default_rng(24)
        counts = {physical_gates(op, *rng.uniform(low, high, 2), encode=encode) for _ in range(20)}
        assert len(counts) == 1

    def test_mu1_event_count(self):
        store = EnsembleStore()
        mu1(encode_real1(store, 0.1), encode_real1(store, 0.9))
        # 2 preps, 2 clones, 1 alloc, sigma2, three sigma1 of 2 x (alloc + CNOT) + MEAN
        assert store.counters() == {"alloc": 7, "prep": 2, "clone": 2, "gate": 10, "renorm": 0}


class TestPowering:
    @pytest.mark.parametrize("n, expected", [(0, 1.0), (1, 1.1), (4, 1.4641), (5, 1.61051)])
    def test_small_powers(self, store, n, expected):
        assert r4(pow_r4(encode_real4(store, 1.1), n, renorm=True)) == pytest.approx(expected, rel=1e-9)

    def test_without_renormalization(self, store):
        assert r4(pow_r4(encode_real4(store, -0.9), 3)) == pytest.approx(-0.729, rel=1e-9)

    def test_mul_count_is_logarithmic(self):
        counts = {}
        for k in range(1, 11):
            _, counts[k] = pow_r4_counted(encode_real4(EnsembleStore(), 1.0), 2**k, renorm=True)
        assert counts[10] <= 11
        assert all(counts[k] - counts[k - 1] == 1 for k in range(2, 11))

    @pytest.mark.parametrize("n", [1, 2, 3, 7, 100, 255])
    def test_mul_count_bound(self, n):
        _, muls = pow_r4_counted(encode_real4(EnsembleStore(), 1.0), n, renorm=True)
        assert muls <= 2 * int(np.log2(n)) + 1

    def test_larger_power_with_renormalization(self, store):
        assert r4(pow_r4(encode_real4(store, 1.1), 128, renorm=True)) == pytest.approx(1.1**128, rel=1e-6)

    def test_negative_exponent(self, store):
        with pytest.raises(EncodingRangeError):
            pow_r4(encode_real4(store, 2), -1)


class TestRenormalize:
    def test_restores_components(self, store):
        x = mul_r4(encode_real4(store, 2), encode_real4(store, 3))
        assert abs(r2(x.den)) == pytest.approx(0.5 / 4 / 3, rel=1e-9)
        y = renormalize(x)
        assert r4(y) == pytest.approx(6, rel=1e-12)
        assert abs(r2(y.den)) >= 0.5 * min(1, 1 / 6)
        assert store.is_consumed(x.num.plus.ens)

    def test_fresh_value_unchanged(self, store):
        assert r4(renormalize(encode_real4(store, -0.3))) == pytest.approx(-0.3, abs=1e-12)

    def test_is_not_physical(self, store):
        x = encode_real4(store, 0.5)
        before = store.gate_count(physical=True)
        renormalize(x)
        assert store.gate_count(physical=True) == before
        assert store.gate_count(kind="renorm") == 1
