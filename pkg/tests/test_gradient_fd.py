"""Analytic distorted gradients against central differences of the full pipeline."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from gradcheck import REFERENCE_DT_NORM, check, make_instance


@settings(max_examples=60, deadline=None, derandomize=True)
@given(st.integers(0, 10**6))
def test_gradient_cosine_on_random_instances(seed):
    inst = make_instance(seed)
    assert inst.h_norm * inst.problem(REFERENCE_DT_NORM).config.sample_dt <= REFERENCE_DT_NORM * (1 + 1e-12)
    cos, *_ = check(inst)
    assert cos >= 0.999


def test_discrepancy_shrinks_quadratically():
    coarse, fine = [], []
    for seed in range(60):
        _, e1, e2, _ = check(make_instance(seed))
        coarse.append(e1)
        fine.append(e2)
    ratio = np.sum(coarse) / np.sum(fine)
    # first order in dt would give 2, second order 4
    assert 3.0 <= ratio <= 5.0
    assert 3.0 <= np.median(np.divide(coarse, fine)) <= 5.0
