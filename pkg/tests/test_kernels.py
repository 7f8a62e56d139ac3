import numpy as np
import pytest

from aerisk import kernels
from aerisk._accel import HAVE_NUMBA

from conftest import exact_competing_risks

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba variant unavailable")


def _data(rng, n, grid=None):
    t = rng.exponential(5.0, n) + 0.01
    if grid:
        t = np.ceil(t / grid) * grid
    t.sort()
    kind = rng.integers(0, 3, n).astype(np.int8)
    return t, kind


@pytest.mark.parametrize("grid", [None, 1.0, 5.0])
@pytest.mark.parametrize("n", [1, 7, 200])
def test_cr_summary_numba_matches_numpy(grid, n):
    rng = np.random.default_rng(n)
    t, kind = _data(rng, n, grid)
    w = rng.integers(0, 4, (6, n)).astype(float)
    w[0] = 1.0
    for tau in (0.005, float(np.median(t)), float(t[-1]), 1e6):
        a = kernels._cr_summary_numba(t, kind, w, tau)
        b = kernels._cr_summary_numpy(t, kind, w, tau)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_cr_summary_matches_exact_oracle():
    rng = np.random.default_rng(3)
    t, kind = _data(rng, 40, grid=2.0)
    for tau in (2.0, 6.0, float(t[-1])):
        ip, omkm, cif_ae, cif_ce, surv = exact_competing_risks(t.tolist(), kind.tolist(), tau)
        for impl in (kernels._cr_summary_numba, kernels._cr_summary_numpy):
            row = impl(t, kind, np.ones((1, len(t))), tau)[0]
            assert row[1] / row[0] == pytest.approx(float(ip), abs=1e-14)
            assert 1 - row[4] == pytest.approx(float(omkm), abs=1e-14)
            assert row[5] == pytest.approx(float(cif_ae), abs=1e-14)
            assert row[6] == pytest.approx(float(cif_ce), abs=1e-14)
            assert row[7] == pytest.approx(float(surv), abs=1e-14)


def test_weights_equal_duplicated_records():
    rng = np.random.default_rng(9)
    t, kind = _data(rng, 30, grid=1.0)
    w = rng.integers(0, 3, 30)
    rep = np.repeat(np.arange(30), w)
    expanded = kernels.cr_summary(t[rep], kind[rep], np.ones((1, len(rep))), 4.0)
    weighted = kernels.cr_summary(t, kind, w[None, :].astype(float), 4.0)
    np.testing.assert_allclose(expanded, weighted, rtol=1e-12)


@pytest.mark.parametrize("grid", [None, 1.0])
def test_cox_tables_numba_matches_numpy(grid):
    rng = np.random.default_rng(4)
    t, _ = _data(rng, 300, grid)
    event = rng.random(300) < 0.6
    group = rng.integers(0, 2, 300).astype(np.int8)
    w = rng.integers(0, 3, 300).astype(float)
    a = kernels._cox_tables_numba(t, event, group, w)
    b = kernels._cox_tables_numpy(t, event, group, w)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y)


def test_cox_tables_by_hand():
    t = np.array([1.0, 2.0, 3.0, 4.0])
    event = np.array([True, True, False, True])
    group = np.array([1, 0, 1, 0], np.int8)
    d, d_exp, r_exp, r_ctl = kernels.cox_tables(t, event, group, np.ones(4))
    np.testing.assert_array_equal(d, [1, 1, 1])
    np.testing.assert_array_equal(d_exp, [1, 0, 0])
    np.testing.assert_array_equal(r_exp, [2, 1, 0])
    np.testing.assert_array_equal(r_ctl, [2, 2, 1])


def test_resample_counts_variants_agree():
    rng = np.random.default_rng(5)
    idx = rng.integers(0, 50, (20, 50))
    a = kernels._resample_counts_numba(idx, 50)
    b = kernels._resample_counts_numpy(idx, 50)
    np.testing.assert_array_equal(a, b)
    assert (a.sum(axis=1) == 50).all()


def test_benchmark_script_runs(capsys):
    import runpy
    from pathlib import Path

    from aerisk._accel import HAVE_NUMBA

    if not HAVE_NUMBA:
        pytest.skip("numba not installed")
    script = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    main = runpy.run_path(str(script))["main"]
    main(["--sizes", "40", "--replicates", "5", "--repeat", "1"])
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4 and all(line.endswith("True") for line in lines[1:])
