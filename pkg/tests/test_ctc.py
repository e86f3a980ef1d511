import itertools

import numpy as np
import pytest

from ctlsed.ctc import as_ctc_grid, ctc_forward, ctc_log_forward, ctc_loss_and_grad, min_frames
from ctlsed.ctl import InfeasibleLabelError
from ctlsed.gradcheck import central_difference, max_relative_error, random_ctc_grid, random_sequence
from ctlsed.labels import onset
from ctlsed.oracle import ctc_brute_force

A = onset(0)
# vocabulary {A, blank} laid out as [blank, A, unused offset]; the offset
# column is zero so the grid is the two-symbol example from the docs
Q2 = np.array([[0.4, 0.6, 0.0], [0.5, 0.5, 0.0]])


def test_two_frame_example(backend):
    assert ctc_forward(Q2, [A]) == pytest.approx(0.8, rel=1e-12)
    assert ctc_brute_force(Q2, [A]) == pytest.approx(0.8, rel=1e-12)
    res = ctc_loss_and_grad(Q2, [A])
    assert res.loss == pytest.approx(-np.log(0.8))


def test_single_frame(backend):
    q = np.array([[0.3, 0.7, 0.0]])
    assert ctc_forward(q, [A]) == pytest.approx(0.7)
    res = ctc_loss_and_grad(q, [A])
    assert res.loss == pytest.approx(-np.log(0.7))
    assert res.grad[0, 1] == pytest.approx(-1 / 0.7)


def test_empty_label_is_all_blank(backend, rng):
    q = random_ctc_grid(rng, 5, 5)
    assert ctc_forward(q, []) == pytest.approx(np.prod(q[:, 0]), rel=1e-12)


def test_infeasible_label(backend):
    q = np.full((2, 3), 1 / 3)
    assert ctc_forward(q, [A, A]) == 0.0  # needs a separating blank: 3 frames
    assert min_frames([A, A]) == 3
    with pytest.raises(InfeasibleLabelError):
        ctc_loss_and_grad(q, [A, A])
    assert ctc_brute_force(q, [A, A, A]) == 0.0


def test_one_hot_alignment():
    q = np.eye(3)[[1, 0, 1]]  # A - A
    assert ctc_brute_force(q, [A, A]) == 1.0
    assert ctc_forward(q, [A, A]) == 1.0
    assert ctc_forward(q, [A]) == 0.0


def test_grid_validation():
    with pytest.raises(ValueError):
        as_ctc_grid([[0.5, 0.4]])
    with pytest.raises(ValueError):
        ctc_forward(np.full((2, 3), 1 / 3), [onset(1)])


def test_matches_oracle(backend, rng):
    for _ in range(60):
        T = int(rng.integers(1, 6))
        n = int(rng.integers(1, 3))
        q = random_ctc_grid(rng, T, 2 * n + 1, floor=0.0)
        L = random_sequence(rng, n, int(rng.integers(0, T + 1)))
        want = ctc_brute_force(q, L)
        assert ctc_forward(q, L) == pytest.approx(want, rel=1e-10, abs=1e-300)


def test_normalization(backend, rng):
    q = random_ctc_grid(rng, 3, 3)
    total = sum(ctc_forward(q, list(s)) for k in range(4) for s in itertools.product(range(2), repeat=k))
    assert total == pytest.approx(1.0, abs=1e-9)


def test_gradient_matches_finite_differences(backend, rng):
    for _ in range(20):
        T, n = int(rng.integers(1, 5)), int(rng.integers(1, 3))
        q = random_ctc_grid(rng, T, 2 * n + 1)
        L = random_sequence(rng, n, int(rng.integers(0, T + 1)))
        if ctc_forward(q, L) < 1e-10:
            continue
        res = ctc_loss_and_grad(q, L)
        fd = central_difference(lambda v: ctc_loss_and_grad(v, L, check_rows=False).loss, q)
        assert max_relative_error(res.grad, fd) < 1e-4


def test_long_sequence_stays_finite(backend, rng):
    q = random_ctc_grid(rng, 500, 5)
    L = random_sequence(rng, 2, 40)
    assert np.isfinite(ctc_log_forward(q, L))
