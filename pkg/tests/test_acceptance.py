"""Acceptance criteria 1-7, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line for its criterion (shown even
under output capture) and then asserts on the same verdict.
"""
import time

import pytest

from chpeakon import suites


def report(capsys, number, title, results, started):
    ok = all(r.passed for r in results)
    with capsys.disabled():
        print(f"\nCRITERION {number} {'PASS' if ok else 'FAIL'}: {title} ({time.perf_counter() - started:.1f} s)")
        for r in results:
            print("    " + r.line())
    return ok


def test_criterion_1_constants(capsys):
    t0 = time.perf_counter()
    res = suites.check_constants()
    elapsed = time.perf_counter() - t0
    ok = report(capsys, 1, "peakon values of E, F and the H1 norm", res, t0)
    assert ok and elapsed < 1.0


@pytest.mark.slow
def test_criterion_2_peakon_invariance(capsys):
    t0 = time.perf_counter()
    res = suites.check_peakon_invariance(4000, 5.0, 1e-3)
    assert report(capsys, 2, "travelling peakon, N=4000 and 8000, T=5", [res], t0)


@pytest.mark.slow
def test_criterion_3_conservation_through_breaking(capsys):
    t0 = time.perf_counter()
    res = suites.check_collision(2000, 20.0, 1e-3)
    assert report(capsys, 3, "peakon-antipeakon collision, T=20", [res], t0)


def test_criterion_4_kernel_equivalence(capsys):
    t0 = time.perf_counter()
    res = suites.check_kernel(suites.DEFAULT_SEED, 50)
    elapsed = time.perf_counter() - t0
    ok = report(capsys, 4, "O(N) pressure against the direct sum", [res], t0)
    assert ok and elapsed < 5.0


@pytest.mark.slow
def test_criterion_5_lemma_suite(capsys):
    t0 = time.perf_counter()
    res = [
        suites.check_lemma_i(),
        suites.check_lemma_ii(),
        suites.check_lemma_iii_iv(),
        suites.check_algebraic(1.0, 0.9),
        *suites.check_monitor(2000, 10.0, 1e-3, 0.9),
    ]
    assert report(capsys, 5, "stability lemma and monitored bound", res, t0)


@pytest.mark.slow
def test_criterion_6_weak_form(capsys):
    t0 = time.perf_counter()
    res = suites.check_weakform()
    assert report(capsys, 6, "weak residuals halve under refinement", res, t0)


@pytest.mark.slow
def test_criterion_7_symmetry(capsys):
    t0 = time.perf_counter()
    res = suites.check_symmetry()
    assert report(capsys, 7, "mirrored data give the mirrored run", res, t0)
