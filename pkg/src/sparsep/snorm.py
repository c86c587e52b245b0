"""Restricted s-norm ||A||_s and restricted-isometry constants.

For a square matrix A, ||A||_s is the supremum of |y^T A x| over unit
vectors x, y sharing a support of size at most s; on a common support it
equals the spectral norm of the principal submatrix, and it is monotone
in s, so enumerating supports of size exactly s suffices.

Exact mode enumerates all supports lexicographically (deterministic
first-found tie-break) and is gated by the enumeration budget
C(N, s) * s^3.  Randomized mode samples supports and sharpens each with a
steepest single-swap local search; it is a certified lower bound on the
exact value and reproducible given its seed.
"""

from dataclasses import dataclass
from itertools import combinations, islice
from math import comb

import numpy as np

from . import budgets, rng
from .errors import DimensionError, ParameterError
from .operators import folded_operator, build_dense_folded

EXACT = "exact"
RANDOMIZED = "randomized_lower_bound"

_CHUNK = 4096


@dataclass(frozen=True)
class SNormResult:
    """Value of ||A||_s with the support attaining it.

    mode is "exact" or "randomized_lower_bound"; in the latter case value
    never exceeds the exact norm and trials records the sample count.
    """

    s: int
    value: float
    mode: str
    argmax_support: tuple
    trials: int = 0


class GramResidualOracle:
    """Submatrix access to Z = I - Phi^T Phi without forming Z densely."""

    def __init__(self, probes):
        self._op = folded_operator(probes)
        self.size = self._op.input_len

    def submatrix(self, support):
        support = np.asarray(support, dtype=int)
        cols = np.empty((self.size, support.size))
        for out_col, i in enumerate(support):
            e = np.zeros(self.size)
            e[i] = 1.0
            cols[:, out_col] = e - self._op.gram_apply(e)
        return cols[support, :]


def _spectral_norms(stack, symmetric):
    """Spectral norm of each matrix in a (batch, s, s) stack."""
    if stack.shape[-1] == 1:
        return np.abs(stack[..., 0, 0])
    if symmetric:
        return np.max(np.abs(np.linalg.eigvalsh(stack)), axis=-1)
    return np.linalg.svd(stack, compute_uv=False)[..., 0]


def _is_symmetric(a):
    return np.array_equal(a, a.T) or np.allclose(a, a.T, rtol=0.0, atol=1e-12)


def _check_args(n, s):
    if s < 1:
        raise ParameterError(f"s must be >= 1, got {s}")
    if s > n:
        raise DimensionError(f"s={s} exceeds matrix size {n}")


def snorm_exact(a, s, work_limit=None):
    """Exhaustive restricted s-norm of a dense square matrix.

    Enumerates supports in lexicographic order; ties in the maximum keep
    the first support found.  Raises BudgetError when C(N, s) * s^3
    exceeds the enumeration budget.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"need a square matrix, got shape {a.shape}")
    n = a.shape[0]
    _check_args(n, s)
    budgets.check_enum(comb(n, s) * s**3, work_limit, "exact s-norm")
    symmetric = _is_symmetric(a)

    best_value = -1.0
    best_support = None
    supports = combinations(range(n), s)
    while True:
        chunk = list(islice(supports, _CHUNK))
        if not chunk:
            break
        idx = np.asarray(chunk)
        sub = a[idx[:, :, None], idx[:, None, :]]
        values = _spectral_norms(sub, symmetric)
        local = int(np.argmax(values))
        if values[local] > best_value:
            best_value = float(values[local])
            best_support = chunk[local]
    return SNormResult(s=s, value=best_value, mode=EXACT, argmax_support=tuple(best_support))


def _submatrix_fn(a):
    if isinstance(a, np.ndarray):
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"need a square matrix, got shape {a.shape}")
        size = a.shape[0]
        symmetric = _is_symmetric(a)
        return size, symmetric, lambda idx: a[np.ix_(idx, idx)]
    # matrix-free oracle: symmetric by construction (Gram residual)
    return a.size, True, a.submatrix


def snorm_randomized(a, s, trials, seed, swap_cap_factor=5):
    """Randomized lower bound on the restricted s-norm.

    Each trial draws a uniform size-s support and runs a steepest
    single-index swap ascent, capped at ``swap_cap_factor * s * N``
    submatrix evaluations per trial.  Deterministic given the seed; the
    result never exceeds the exact norm.
    """
    size, symmetric, submatrix = _submatrix_fn(a)
    _check_args(size, s)
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")

    def value_of(support):
        return float(_spectral_norms(submatrix(support)[None, :, :], symmetric)[0])

    best_value = -1.0
    best_support = None
    cap = swap_cap_factor * s * size
    for trial in range(trials):
        support = rng.rand_support(rng.derive_seed(seed, trial), size, s)
        current = value_of(support)
        evals = 0
        improved = True
        while improved and evals < cap:
            improved = False
            outside = np.setdiff1d(np.arange(size), support)
            step_best = current
            step_support = None
            for pos in range(s):
                for j in outside:
                    candidate = support.copy()
                    candidate[pos] = j
                    candidate = np.sort(candidate)
                    val = value_of(candidate)
                    evals += 1
                    if val > step_best:
                        step_best = val
                        step_support = candidate
                    if evals >= cap:
                        break
                if evals >= cap:
                    break
            if step_support is not None:
                support, current = step_support, step_best
                improved = True
        if current > best_value:
            best_value = current
            best_support = tuple(int(i) for i in support)
    return SNormResult(
        s=s, value=best_value, mode=RANDOMIZED, argmax_support=best_support, trials=trials
    )


def rip_delta(probes, s, mode=EXACT, trials=100, seed=0, work_limit=None, dense_limit=None):
    """Restricted-isometry constant delta_s = ||I - Phi^T Phi||_s (folded).

    The returned delta certifies (1 - delta)||x||^2 <= ||Phi x||^2 <=
    (1 + delta)||x||^2 for every s-sparse x (with equality attainable on
    the argmax support in exact mode).
    """
    size = probes.dims.signal_len
    dense_ok = True
    try:
        budgets.check_dense(size * size, dense_limit, "dense Gram")
        budgets.check_dense(probes.dims.m * size, dense_limit, "dense folded operator")
    except budgets.BudgetError:
        dense_ok = False

    if mode == EXACT:
        if not dense_ok:
            raise budgets.BudgetError(
                "exact rip_delta needs the dense Gram; raise the dense budget"
            )
        phi = build_dense_folded(probes, dense_limit)
        z = np.eye(size) - phi.T @ phi
        return snorm_exact(z, s, work_limit)
    if mode == RANDOMIZED or mode == "randomized":
        if dense_ok:
            phi = build_dense_folded(probes, dense_limit)
            target = np.eye(size) - phi.T @ phi
        else:
            target = GramResidualOracle(probes)
        return snorm_randomized(target, s, trials, seed)
    raise ParameterError(f"unknown mode {mode!r}")
