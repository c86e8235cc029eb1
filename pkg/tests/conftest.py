"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the library's vectorized code paths:
binning is done by explicit interval comparison, aggregation by plain
Python loops, and gradients by central finite differences. Tests compare
the production implementations against these.
"""

import numpy as np
import pytest

from calrex.calibration import make_record


# ----------------------------------------------------------------------
# Brute-force calibration oracle
# ----------------------------------------------------------------------

def oracle_bin_index(confidence: float, n_bins: int) -> int:
    """Interval-comparison binning: bin 0 is [0, 1/M], bin m is (m/M, (m+1)/M]."""
    b = 0
    for m in range(1, n_bins):
        if confidence > m / n_bins:
            b = m
    return b


def oracle_ece_oe(confidences, corrects, n_bins: int) -> tuple[float, float]:
    """Loop-based ECE and OE for cross-checking the vectorized versions."""
    members = [[] for _ in range(n_bins)]
    for c, ok in zip(confidences, corrects):
        members[oracle_bin_index(float(c), n_bins)].append((float(c), bool(ok)))
    n = len(confidences)
    ece = 0.0
    oe = 0.0
    for bucket in members:
        if not bucket:
            continue
        acc = sum(1.0 for _, ok in bucket if ok) / len(bucket)
        conf = sum(c for c, _ in bucket) / len(bucket)
        weight = len(bucket) / n
        ece += weight * abs(acc - conf)
        oe += weight * conf * max(conf - acc, 0.0)
    return ece, oe


def records_from_arrays(confidences, corrects, n_classes: int = 6):
    """Build PredictionRecords whose max probability equals the given confidence.

    A C-class distribution cannot have a max below 1/C, so the class count
    grows as needed for small confidences. Confidences must be >= 0.005.
    """
    records = []
    for i, (c, ok) in enumerate(zip(confidences, corrects)):
        c = float(c)
        if c < 0.005:
            raise ValueError("confidence below 0.005 not representable here")
        size = n_classes
        if c < 1.0 / n_classes:
            size = int(np.ceil(1.0 / c)) + 1
        probs = np.full(size, (1.0 - c) / (size - 1))
        probs[0] = c
        rec = make_record(f"r{i}", probs, 0 if ok else 1)
        assert rec.predicted == 0 and rec.confidence == c
        records.append(rec)
    return records


@pytest.fixture
def four_record_fixture():
    """Confidence/correctness quadruple with hand-derivable ECE and OE."""
    return records_from_arrays(
        [0.95, 0.95, 0.65, 0.55], [True, True, False, True]
    )


# ----------------------------------------------------------------------
# Finite-difference oracle
# ----------------------------------------------------------------------

def numerical_gradient(f, arr: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central finite differences of scalar f() with respect to arr in place."""
    grad = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + h
        f_plus = f()
        arr[idx] = orig - h
        f_minus = f()
        arr[idx] = orig
        grad[idx] = (f_plus - f_minus) / (2.0 * h)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)
