import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trace_sketch.probes import ProbeKind, ProbeStream, next_probe

KINDS = [ProbeKind.GAUSSIAN, ProbeKind.RADEMACHER, ProbeKind.UNIT_BASIS]


@settings(max_examples=40, deadline=None)
@given(
    kind=st.sampled_from(KINDS),
    n=st.integers(min_value=1, max_value=64),
    seed=st.integers(min_value=-(2**63), max_value=2**63 - 1),
    index=st.integers(min_value=0, max_value=1000),
)
def test_probe_is_pure_function_of_seed_and_index(kind, n, seed, index):
    a = ProbeStream(kind, n, seed)
    b = ProbeStream(kind, n, seed, index=999)
    assert np.array_equal(a.probe(index), b.probe(index))


def test_evaluation_order_does_not_matter():
    stream = ProbeStream(ProbeKind.GAUSSIAN, 16, 1234)
    forward = [stream.probe(i) for i in range(8)]
    backward = [stream.probe(i) for i in reversed(range(8))]
    for i in range(8):
        assert np.array_equal(forward[i], backward[7 - i])


def test_next_probe_advances_and_matches_random_access():
    stream = ProbeStream(ProbeKind.RADEMACHER, 10, 7)
    drawn = [next_probe(stream) for _ in range(5)]
    assert stream.index == 5
    fresh = ProbeStream(ProbeKind.RADEMACHER, 10, 7)
    for i, x in enumerate(drawn):
        assert np.array_equal(x, fresh.probe(i))


def test_rademacher_entries_and_exact_norm():
    for seed in range(5):
        x = ProbeStream(ProbeKind.RADEMACHER, 4, seed).next_probe()
        assert set(np.unique(x)) <= {-1.0, 1.0}
        assert float(x @ x) == 4.0
    big = ProbeStream(ProbeKind.RADEMACHER, 257, 3).probe(11)
    assert float(big @ big) == 257.0


def test_unit_basis_cycles_scaled_basis_vectors():
    stream = ProbeStream(ProbeKind.UNIT_BASIS, 3, 99)
    expected = math.sqrt(3.0)
    for i in range(7):
        x = stream.next_probe()
        assert x[i % 3] == expected
        assert np.count_nonzero(x) == 1


def test_gaussian_canary_pins_the_bit_stream():
    # Frozen output of numpy's Philox + ziggurat path; a change here means the
    # upstream bit stream moved and reproducibility claims must be revisited.
    x = ProbeStream(ProbeKind.GAUSSIAN, 8, 0).probe(0)
    assert x[0] == pytest.approx(0.15929546600623282, abs=0.0)
    assert x[1] == pytest.approx(-1.7741885208017214, abs=0.0)
    assert x[2] == pytest.approx(1.3265118818830892, abs=0.0)


def test_gaussian_large_probe_sample_mean_is_centered():
    # CLT bound: |mean| <= 3/sqrt(n) with probability 0.997; asserted at the
    # looser documented 0.02 for n = 1e5 with a fixed seed.
    x = ProbeStream(ProbeKind.GAUSSIAN, 10**5, 2024).probe(0)
    assert abs(float(x.mean())) <= 0.02


def test_gaussian_unit_variance_over_many_scalar_probes():
    stream = ProbeStream(ProbeKind.GAUSSIAN, 1, 5)
    draws = np.array([stream.probe(i)[0] for i in range(10**5)])
    assert abs(draws.var() - 1.0) <= 0.05


def test_bad_dimension_rejected():
    with pytest.raises(ValueError):
        ProbeStream(ProbeKind.GAUSSIAN, 0, 1)


def test_kind_parse_roundtrip():
    assert ProbeKind.parse("gaussian") is ProbeKind.GAUSSIAN
    assert ProbeKind.parse("unit-basis") is ProbeKind.UNIT_BASIS
    with pytest.raises(ValueError):
        ProbeKind.parse("sobol")
    assert not ProbeKind.GAUSSIAN.has_fixed_norm
    assert ProbeKind.RADEMACHER.has_fixed_norm
