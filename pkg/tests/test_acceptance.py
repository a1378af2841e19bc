"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` (the lines are also shown without -s).
"""

import numpy as np
import pytest

from ghostcorr import validation as v


def report(capsys, res, label):
    with capsys.disabled():
        print(f"\n[{label}] {res.line()}")


def test_1_moment_theorem(capsys):
    res = v.check_moment_theorem(M=20000, n_tuples=20, modes=128)
    report(capsys, res, "1")
    assert res.metrics["fraction"] >= 0.95
    assert res.elapsed < 30
    assert res.passed


def test_2_closed_forms(capsys):
    res = v.check_closed_forms(tol=0.02)
    report(capsys, res, "2")
    assert res.metrics["C_r1"] <= 0.02 and res.metrics["I_r"] <= 0.02
    assert res.passed


def test_3_thin_lens_argmax(capsys):
    res = v.check_thin_lens_argmax(steps=20, step=0.01)
    report(capsys, res, "3")
    sharp = np.asarray(res.metrics["sharpness"])
    assert len(sharp) == 41
    assert abs(res.metrics["best_step"]) <= 1
    assert res.passed


def test_4_ghost_geometry(capsys):
    res = v.check_ghost_geometry(M=20000, points=128)
    report(capsys, res, "4")
    m = res.metrics
    assert m["magnification"] == pytest.approx(-1.0)
    assert np.max(np.abs(np.sort(m["peaks"]) - m["predicted"])) <= m["cell"]
    assert res.elapsed < 60
    assert res.passed


def test_5_identical_arms(capsys):
    res = v.check_identical_arms(M=20000)
    report(capsys, res, "5")
    assert res.metrics["fraction"] >= 0.95
    assert res.passed


def test_6_visibility_bound(capsys):
    res = v.check_visibility_bound(n_max=5, tol=1e-6)
    report(capsys, res, "6")
    m = res.metrics
    assert m["N"] == [2, 3, 4, 5]
    np.testing.assert_allclose(m["V_qa1"], [(N - 1) / N for N in m["N"]], atol=1e-6)
    assert all(a < b for a, b in zip(m["V_qa5"], m["bound"]))
    assert np.all(np.diff(m["V_qa1"]) > 0) and np.all(np.diff(m["V_qa5"]) > 0)
    # literal values of the bound
    assert m["bound"][0] == 0.5
    assert m["bound"] == [(N - 1) / N for N in m["N"]]
    assert res.passed


def test_7_cauchy_schwarz(capsys):
    res = v.check_cauchy_schwarz(n_configs=10)
    report(capsys, res, "7")
    meas, pred = np.asarray(res.metrics["measured"]), np.asarray(res.metrics["predicted"])
    assert meas.size == 10
    assert np.all(meas >= 1 - 1e-3)
    assert np.all(np.abs(meas / pred - 1) <= 0.05)
    assert res.passed


def test_8_eight_configurations(capsys):
    res = v.check_eight_configurations()
    report(capsys, res, "8")
    assert res.metrics["mismatched"] == []
    assert res.passed


def test_9_determinism(capsys):
    res = v.check_determinism()
    report(capsys, res, "9")
    assert res.passed
