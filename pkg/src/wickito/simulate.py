"""Path ensembles for the reference processes.

The primary sampler draws the Gaussian coordinates ``Z_k = <., e_k>`` and sets
``G_t = sum_{k<K} c_k(t) Z_k``.  The ensemble then *is* a Gaussian process with
covariance ``R_K(t, s) = sum_k c_k(t) c_k(s)``, and that covariance (not the
closed form of the untruncated model) is what the Wick machinery must use on
it.  The Cholesky sampler reproduces the exact model law on the grid and
serves as an independent oracle.

Every path owns a random stream derived from ``(seed, path index)``, and work
is split into fixed-size blocks, so results do not depend on the thread count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .reports import write_csv

BLOCK = 256


class NotPositiveSemidefinite(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Time grid ``t_0 < ... < t_n`` on ``[t0, t0 + T]``.

    ``spacing="geometric"`` makes consecutive steps grow by a constant factor
    ``exp(grading / n)``, refining the grid near ``t0``.
    """

    T: float
    n: int
    spacing: str = "uniform"
    t0: float = 0.0
    grading: float = 4.0

    def __post_init__(self):
        if self.T <= 0 or self.n < 1:
            raise ValueError("grid needs T > 0 and n >= 1")
        if self.spacing not in ("uniform", "geometric"):
            raise ValueError(f"unknown spacing {self.spacing!r}")

    def times(self):
        u = np.arange(self.n + 1) / self.n
        if self.spacing == "geometric":
            u = np.expm1(self.grading * u) / np.expm1(self.grading)
        t = self.t0 + self.T * u
        t[0], t[-1] = self.t0, self.t0 + self.T
        return t


def path_rng(seed, path):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(path),)))


def gaussian_coords(seed, start, stop, dim):
    """Rows ``start .. stop-1`` of the per-path standard normal draws."""
    out = np.empty((stop - start, dim))
    for i, m in enumerate(range(start, stop)):
        out[i] = path_rng(seed, m).standard_normal(dim)
    return out


def _blocks(M, block=BLOCK):
    return [(a, min(a + block, M)) for a in range(0, M, block)]


def _run_blocks(fn, M, threads):
    blocks = _blocks(M)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            parts = list(pool.map(lambda ab: fn(*ab), blocks))
    else:
        parts = [fn(a, b) for a, b in blocks]
    return parts


def pivoted_cholesky(A, threshold=-1e-8):
    """Diagonal-pivoted Cholesky of a symmetric PSD matrix.

    Returns ``L`` (rows in the original order) with ``A ~ L @ L.T`` and the
    numerical rank.  Raises :class:`NotPositiveSemidefinite` if a pivot or the
    left-over Schur complement goes below ``threshold`` (relative to the
    largest diagonal entry).
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if not np.allclose(A, A.T, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise NotPositiveSemidefinite("matrix is not symmetric")
    scale = max(float(np.max(np.diag(A))), 1e-300)
    piv = np.arange(n)
    L = np.zeros((n, n))
    d = np.diag(A).copy()
    stop_tol = 1e-13 * scale
    rank = n
    for j in range(n):
        i = j + int(np.argmax(d[piv[j:]]))
        piv[[j, i]] = piv[[i, j]]
        L[[j, i], :j] = L[[i, j], :j]
        pivot = d[piv[j]]
        if pivot < threshold * scale:
            raise NotPositiveSemidefinite(f"negative pivot {pivot:.3g}")
        if pivot <= stop_tol:
            rank = j
            break
        L[j, j] = np.sqrt(pivot)
        rest = piv[j + 1:]
        L[j + 1:, j] = (A[rest, piv[j]] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
        d[rest] -= L[j + 1:, j] ** 2
    if rank < n:
        rest = piv[rank:]
        S = A[np.ix_(rest, rest)] - L[rank:, :rank] @ L[rank:, :rank].T
        low = float(np.linalg.eigvalsh(S).min()) if S.size else 0.0
        if low < threshold * scale:
            raise NotPositiveSemidefinite(f"Schur complement eigenvalue {low:.3g}")
    out = np.zeros((n, rank))
    out[piv] = L[:, :rank]
    return out, rank


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """Sampled paths together with the Gaussian draws that produced them.

    ``R`` holds the variance of the sampled process on the grid and
    ``R_step`` the one-step covariances ``Cov(G_{t_i}, G_{t_{i+1}})``.
    """

    model: object
    grid: np.ndarray
    paths: np.ndarray
    coords: np.ndarray
    seed: int
    sampler: str
    K: int | None
    R: np.ndarray
    R_step: np.ndarray
    coeff_table: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_paths(self):
        return self.paths.shape[0]

    @property
    def n_steps(self):
        return self.grid.size - 1

    def reconstruct(self):
        """Hermite sampler only: ``coords @ c_k(t_i)``, equal to ``paths``."""
        if self.coeff_table is None:
            raise ValueError("only hermite ensembles carry a coefficient table")
        C = self.coeff_table
        return np.concatenate([_hermite_block(self.coords[a:b], C) for a, b in _blocks(self.n_paths)])

    def covariance_source(self, which="ensemble"):
        """``(R, R_step)`` of the sampled law or of the closed-form model."""
        if which == "ensemble":
            return self.R, self.R_step
        if which == "model":
            t = self.grid
            return self.model.variance(t), self.model.covariance(t[:-1], t[1:])
        raise ValueError(f"unknown covariance source {which!r}")

    def restrict(self, T):
        """Sub-ensemble on grid points ``t <= T`` (T must be a grid point)."""
        idx = int(np.searchsorted(self.grid, T, side="right"))
        if not np.isclose(self.grid[idx - 1], T, rtol=0, atol=1e-12):
            raise ValueError(f"T={T} is not a grid point")
        ct = None if self.coeff_table is None else self.coeff_table[:idx]
        return PathEnsemble(self.model, self.grid[:idx], self.paths[:, :idx], self.coords, self.seed,
                            self.sampler, self.K, self.R[:idx], self.R_step[:idx - 1], ct)


def _hermite_block(Z, C):
    # callers always use the fixed BLOCK layout, so BLAS sees identical shapes
    return Z @ C.T


def sample_paths(model, grid, M, seed=0, sampler="hermite", K=64, threads=1):
    """Draw ``M`` paths of ``model`` on ``grid`` (a GridSpec or array of times)."""
    if M < 1:
        raise ValueError("need at least one path")
    t = grid.times() if isinstance(grid, GridSpec) else np.asarray(grid, dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ValueError("grid must be strictly increasing")
    model.check_times(t)
    if sampler == "hermite":
        C = model.coeffs(t, K)

        def work(a, b):
            Z = gaussian_coords(seed, a, b, K)
            return Z, _hermite_block(Z, C)

        parts = _run_blocks(work, M, threads)
        coords = np.concatenate([p[0] for p in parts])
        paths = np.concatenate([p[1] for p in parts])
        R = np.einsum("nk,nk->n", C, C)
        R_step = np.einsum("nk,nk->n", C[:-1], C[1:])
        return PathEnsemble(model, t, paths, coords, int(seed), sampler, int(K), R, R_step, C)
    if sampler == "cholesky":
        var = model.variance(t)
        pos = np.flatnonzero(var > 0)
        L, rank = pivoted_cholesky(model.gram(t[pos]))

        def work(a, b):
            Z = gaussian_coords(seed, a, b, rank)
            out = np.zeros((b - a, t.size))
            out[:, pos] = _hermite_block(Z, L)
            return Z, out

        parts = _run_blocks(work, M, threads)
        coords = np.concatenate([p[0] for p in parts])
        paths = np.concatenate([p[1] for p in parts])
        R_step = model.covariance(t[:-1], t[1:])
        return PathEnsemble(model, t, paths, coords, int(seed), sampler, None, var, R_step)
    raise ValueError(f"unknown sampler {sampler!r}")


def truncation_defect(model, grid, K):
    """``R_t - sum_{k<K} c_k(t)^2`` at each grid time."""
    t = grid.times() if isinstance(grid, GridSpec) else np.asarray(grid, dtype=float)
    C = model.coeffs(t, K)
    return model.variance(t) - np.einsum("nk,nk->n", C, C)


def defect_gate(model, grid, K, bound=1e-2, floor=-1e-8):
    """Check the relative truncation defect against ``bound``.

    Returns ``(max_relative_defect, ok)``; a defect below ``floor`` contradicts
    Bessel's inequality and raises.
    """
    t = grid.times() if isinstance(grid, GridSpec) else np.asarray(grid, dtype=float)
    D = truncation_defect(model, t, K)
    if D.min() < floor:
        raise ArithmeticError(f"negative truncation defect {D.min():.3g}: coefficient quadrature is off")
    rel = float(D.max() / max(float(np.max(model.variance(t))), 1e-300))
    return rel, rel <= bound


def write_ensemble_csv(path, ensemble, coords_path=None):
    """Columns ``path_id, t, value``; optionally the draws as ``path_id, k, z``."""
    t = ensemble.grid
    rows = ((m, t[i], ensemble.paths[m, i]) for m in range(ensemble.n_paths) for i in range(t.size))
    write_csv(path, ["path_id", "t", "value"], rows)
    if coords_path is not None:
        Z = ensemble.coords
        write_csv(coords_path, ["path_id", "k", "z"],
                  ((m, k, Z[m, k]) for m in range(Z.shape[0]) for k in range(Z.shape[1])))
