import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from wickito.procmodel import BrownianBridge, BrownianMotion, FractionalBM
from wickito.reports import read_csv
from wickito.simulate import (
    BLOCK,
    GridSpec,
    NotPositiveSemidefinite,
    defect_gate,
    gaussian_coords,
    pivoted_cholesky,
    sample_paths,
    truncation_defect,
    write_ensemble_csv,
)


def test_uniform_grid():
    t = GridSpec(2.0, 4).times()
    assert np.array_equal(t, [0.0, 0.5, 1.0, 1.5, 2.0])


def test_geometric_grid_refines_near_start():
    t = GridSpec(1.0, 16, "geometric").times()
    d = np.diff(t)
    assert t[0] == 0.0 and t[-1] == 1.0
    assert np.allclose(d[1:] / d[:-1], np.exp(4.0 / 16))


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(0.0, 4)
    with pytest.raises(ValueError):
        GridSpec(1.0, 4, "chebyshev")


def test_coords_do_not_depend_on_block_boundaries():
    whole = gaussian_coords(9, 0, 600, 5)
    parts = np.vstack([gaussian_coords(9, a, b, 5) for a, b in [(0, 7), (7, 300), (300, 600)]])
    assert np.array_equal(whole, parts)


@pytest.mark.parametrize("sampler", ["hermite", "cholesky"])
def test_thread_count_is_irrelevant(sampler):
    grid = GridSpec(1.0, 32)
    a = sample_paths(FractionalBM(0.3), grid, 3 * BLOCK + 17, seed=4, sampler=sampler, threads=1)
    b = sample_paths(FractionalBM(0.3), grid, 3 * BLOCK + 17, seed=4, sampler=sampler, threads=4)
    assert np.array_equal(a.paths, b.paths)


def test_csv_bytes_identical_across_threads(tmp_path):
    grid = GridSpec(1.0, 16)
    for threads in (1, 3):
        ens = sample_paths(BrownianMotion(), grid, 300, seed=2, threads=threads)
        write_ensemble_csv(tmp_path / f"p{threads}.csv", ens, tmp_path / f"c{threads}.csv")
    assert (tmp_path / "p1.csv").read_bytes() == (tmp_path / "p3.csv").read_bytes()
    assert (tmp_path / "c1.csv").read_bytes() == (tmp_path / "c3.csv").read_bytes()
    header, rows = read_csv(tmp_path / "p1.csv")
    assert header == ["path_id", "t", "value"] and len(rows) == 300 * 17


def test_hermite_paths_reconstruct_from_coordinates():
    ens = sample_paths(BrownianMotion(), GridSpec(1.0, 20), 400, seed=1, K=40)
    assert np.allclose(ens.reconstruct(), ens.paths, atol=1e-14)
    C = BrownianMotion().coeffs(ens.grid, 40)
    assert np.allclose(ens.paths, ens.coords @ C.T, atol=1e-13)


def test_hermite_ensemble_law_is_truncated_covariance():
    ens = sample_paths(FractionalBM(0.7), GridSpec(1.0, 8), 20000, seed=3, K=32)
    C = FractionalBM(0.7).coeffs(ens.grid, 32)
    assert np.allclose(ens.R, np.sum(C * C, axis=1))
    emp = np.mean(ens.paths[:, -1] ** 2)
    assert abs(emp - ens.R[-1]) < 4 * ens.R[-1] * np.sqrt(2 / 20000)


def test_cholesky_matches_model_covariance():
    model = FractionalBM(0.3)
    ens = sample_paths(model, GridSpec(1.0, 4), 40000, seed=8, sampler="cholesky")
    emp = np.cov(ens.paths[:, 1:].T, bias=True)
    assert np.max(np.abs(emp - model.gram(ens.grid[1:]))) < 0.03


def test_marginal_is_gaussian():
    ens = sample_paths(BrownianBridge(), GridSpec(1.0, 4), 5000, seed=6, sampler="cholesky")
    x = ens.paths[:, 2] / np.sqrt(0.25)
    assert stats.kstest(x, "norm").pvalue > 1e-3
    assert np.all(ens.paths[:, [0, -1]] == 0.0)


def test_pivoted_cholesky_handles_rank_deficiency():
    v = np.array([1.0, 2.0, 3.0])
    A = np.outer(v, v)
    L, rank = pivoted_cholesky(A)
    assert rank == 1
    assert np.allclose(L @ L.T, A)
    with pytest.raises(NotPositiveSemidefinite):
        pivoted_cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


@given(st.integers(2, 12), st.integers(0, 2 ** 31))
def test_pivoted_cholesky_reconstructs(n, seed):
    B = np.random.default_rng(seed).normal(size=(n, n // 2 + 1))
    A = B @ B.T
    L, rank = pivoted_cholesky(A)
    assert rank <= n // 2 + 1
    assert np.allclose(L @ L.T, A, atol=1e-9 * max(1.0, np.abs(A).max()))


def test_defect_gate():
    t = np.array([0.5, 1.0])
    rel, ok = defect_gate(BrownianMotion(), t, 512)
    assert not ok and rel == pytest.approx(np.max(truncation_defect(BrownianMotion(), t, 512)))
    rel, ok = defect_gate(FractionalBM(0.7), t, 512)
    assert ok


def test_restrict_keeps_prefix():
    ens = sample_paths(BrownianMotion(), GridSpec(1.0, 8), 10, seed=0)
    sub = ens.restrict(0.5)
    assert sub.grid[-1] == 0.5 and np.array_equal(sub.paths, ens.paths[:, :5])
    with pytest.raises(ValueError):
        ens.restrict(0.3)


def test_sampler_validation():
    with pytest.raises(ValueError):
        sample_paths(BrownianMotion(), GridSpec(1.0, 4), 0)
    with pytest.raises(ValueError):
        sample_paths(BrownianMotion(), GridSpec(1.0, 4), 5, sampler="sobol")
    with pytest.raises(ValueError):
        sample_paths(BrownianMotion(), np.array([0.0, 0.5, 0.4]), 5)
