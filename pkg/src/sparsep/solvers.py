"""Sparse recovery solvers.

* :func:`solve_bpdn` -- l1 minimization subject to ||Phi x - y|| <= eps,
  solved as a sequence of l1-penalized least-squares problems (FISTA with
  backtracking and momentum restarts) with root-finding on the penalty so
  the residual lands on the noise budget.  eps = 0 is handled by driving
  the residual down to feas_tol * ||y|| instead of literal zero.
* :func:`solve_iht` -- iterative hard thresholding
  x <- H_s(x + mu * Phi^T (y - Phi x)), fixed or backtracked step.
* :func:`solve_oracle_ls` -- least squares restricted to a known support;
  the information-unbeatable baseline.
* :func:`reference_bpdn` -- slow, algorithmically independent solution of
  the same constrained program (LP for eps = 0, SQP on the split
  formulation otherwise); used by tests to certify solve_bpdn.

Solvers accept any operator exposing apply/adjoint/input_len/output_len.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, minimize

from .errors import BudgetError, DataError, DimensionError, ParameterError

STEP_FIXED = "fixed"
STEP_ADAPTIVE = "adaptive"

_POWER_SEED_VECTOR = 0x5EED


@dataclass(frozen=True)
class SolverConfig:
    """Shared solver knobs; see the module docstring for semantics."""

    epsilon: float = 0.0
    max_iter: int = 5000
    feas_tol: float = 1e-6
    opt_tol: float = 1e-8
    s_target: int = 0
    step_mode: str = STEP_ADAPTIVE

    def __post_init__(self):
        if self.epsilon < 0:
            raise ParameterError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.max_iter < 1:
            raise ParameterError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.feas_tol <= 0 or self.opt_tol <= 0:
            raise ParameterError("tolerances must be positive")
        if self.step_mode not in (STEP_FIXED, STEP_ADAPTIVE):
            raise ParameterError(f"unknown step_mode {self.step_mode!r}")


@dataclass(frozen=True)
class RecoveryResult:
    x_hat: np.ndarray = field(repr=False)
    residual_norm: float
    l1_norm: float
    iterations: int
    converged: bool
    method: str
    note: str = ""


def _check_y(op, y):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (op.output_len,):
        raise DimensionError(f"y must have length {op.output_len}, got {y.shape}")
    if not np.all(np.isfinite(y)):
        raise DataError("y contains non-finite entries")
    return y


def _result(op, x, y, iterations, converged, method, note=""):
    residual = float(np.linalg.norm(op.apply(x) - y))
    return RecoveryResult(
        x_hat=x,
        residual_norm=residual,
        l1_norm=float(np.sum(np.abs(x))),
        iterations=iterations,
        converged=converged,
        method=method,
        note=note,
    )


def operator_norm_sq(op, iters=200, tol=1e-12):
    """Power-iteration estimate of ||Phi||^2 = sigma_max(Phi)^2.

    Deterministic: the start vector comes from a fixed seed.  Callers that
    need a guaranteed upper bound pair this with backtracking.
    """
    from . import rng

    def gram(x):
        return op.adjoint(op.apply(x))

    v = rng.gaussians(_POWER_SEED_VECTOR, op.input_len)
    v /= np.linalg.norm(v)
    w = gram(v)
    lam = 0.0
    for _ in range(iters):
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        w = gram(v)
        lam_new = float(v @ w)
        if abs(lam_new - lam) <= tol * max(1.0, lam_new):
            lam = lam_new
            break
        lam = lam_new
    return lam


def soft_threshold(v, tau):
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def hard_threshold(v, s):
    """Keep the s largest magnitudes; ties resolved toward lower indices."""
    out = np.zeros_like(v)
    if s <= 0:
        return out
    if s >= v.size:
        return v.copy()
    keep = np.argsort(-np.abs(v), kind="stable")[:s]
    out[keep] = v[keep]
    return out


def _fista(op, y, lam, x0, lips, tol, max_iter):
    """l1-penalized least squares min 0.5||Phi x - y||^2 + lam ||x||_1.

    Backtracking FISTA with gradient-based momentum restarts.  Returns
    (x, iterations, local Lipschitz estimate).
    """
    x = x0.copy()
    z = x0.copy()
    t = 1.0
    L = max(lips, 1e-300)
    it = 0
    while it < max_iter:
        it += 1
        rz = op.apply(z) - y
        fz = 0.5 * float(rz @ rz)
        grad = op.adjoint(rz)
        while True:
            x_new = soft_threshold(z - grad / L, lam / L)
            d = x_new - z
            dd = float(d @ d)
            r_new = op.apply(x_new) - y
            f_new = 0.5 * float(r_new @ r_new)
            if f_new <= fz + float(grad @ d) + 0.5 * L * dd + 1e-12 * max(fz, 1.0):
                break
            L *= 2.0
        if float((z - x_new) @ (x_new - x)) > 0.0:
            t = 1.0  # momentum restart
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = x_new + ((t - 1.0) / t_new) * (x_new - x)
        step_ok = np.linalg.norm(x_new - x) <= tol * max(1.0, np.linalg.norm(x_new))
        x, t = x_new, t_new
        if step_ok:
            break
    return x, it, L


def solve_bpdn(op, y, cfg):
    """min ||x||_1 subject to ||Phi x - y||_2 <= eps.

    Penalty continuation: the residual r(lam) of the penalized problem is
    increasing in lam, so a bracketed log-secant search drives it onto the
    effective budget max(eps, feas_tol * ||y||).  For eps = 0 any residual
    at or below the effective budget is accepted (the penalized path
    converges to the minimum-l1 interpolator as lam -> 0).
    """
    y = _check_y(op, y)
    if cfg.epsilon < 0:
        raise ParameterError("epsilon must be >= 0")
    n = op.input_len
    ynorm = float(np.linalg.norm(y))
    if ynorm <= cfg.epsilon:
        return _result(op, np.zeros(n), y, 0, True, "bpdn", note="zero is feasible")
    eps_eff = max(cfg.epsilon, cfg.feas_tol * ynorm)

    corr = op.adjoint(y)
    lam_max = float(np.max(np.abs(corr)))
    if lam_max == 0.0:
        converged = ynorm <= eps_eff * (1.0 + cfg.feas_tol)
        return _result(op, np.zeros(n), y, 0, converged, "bpdn", note="Phi^T y = 0")

    lips = 1.01 * operator_norm_sq(op)
    exact_mode = cfg.epsilon == 0.0
    root_rtol = 1e-6

    x = np.zeros(n)
    iters = 0
    lam_hi, r_hi = lam_max, ynorm
    lam_lo, r_lo = None, None
    lam = 0.5 * lam_max
    converged = False
    for _ in range(80):
        budget = cfg.max_iter - iters
        if budget <= 0:
            break
        x, it, lips = _fista(op, y, lam, x, lips, cfg.opt_tol, budget)
        iters += it
        r = float(np.linalg.norm(op.apply(x) - y))
        if exact_mode:
            if r <= eps_eff:
                converged = True
                break
            lam_hi, r_hi = lam, r
            lam = lam / 8.0
            continue
        if abs(r - eps_eff) <= root_rtol * eps_eff:
            converged = True
            break
        if r > eps_eff:
            lam_hi, r_hi = lam, r
        else:
            lam_lo, r_lo = lam, r
        if lam_lo is None:
            lam = lam / 8.0
        else:
            # secant on log r vs log lam, clipped inside the bracket
            q = np.log(r_hi / r_lo) / np.log(lam_hi / lam_lo)
            if q > 0 and np.isfinite(q):
                lam_new = lam_hi * (eps_eff / r_hi) ** (1.0 / q)
            else:
                lam_new = np.sqrt(lam_hi * lam_lo)
            if not (lam_lo < lam_new < lam_hi):
                lam_new = np.sqrt(lam_hi * lam_lo)
            lam = lam_new
        if lam < lam_max * 1e-16:
            break
    return _result(op, x, y, iters, converged, "bpdn")


def solve_iht(op, y, cfg):
    """Iterative hard thresholding toward an s_target-sparse estimate.

    Adaptive mode backtracks the step until the residual does not
    increase; fixed mode uses 1/||Phi||^2.  Stops when the iterate change
    drops below opt_tol * ||x|| or max_iter is reached.
    """
    y = _check_y(op, y)
    s = cfg.s_target
    if s < 1:
        raise ParameterError(f"s_target must be >= 1, got {s}")
    n = op.input_len
    lips = operator_norm_sq(op)
    mu0 = 1.0 / lips if lips > 0 else 1.0
    x = np.zeros(n)
    r = y.copy()
    r_norm = float(np.linalg.norm(r))
    converged = False
    it = 0
    while it < cfg.max_iter:
        it += 1
        grad = op.adjoint(r)
        mu = mu0
        if cfg.step_mode == STEP_ADAPTIVE:
            for _ in range(60):
                x_new = hard_threshold(x + mu * grad, s)
                r_new = y - op.apply(x_new)
                r_new_norm = float(np.linalg.norm(r_new))
                if r_new_norm <= r_norm * (1.0 + 1e-12):
                    break
                mu *= 0.5
            else:
                x_new = hard_threshold(x, s)
                r_new = y - op.apply(x_new)
                r_new_norm = float(np.linalg.norm(r_new))
        else:
            x_new = hard_threshold(x + mu * grad, s)
            r_new = y - op.apply(x_new)
            r_new_norm = float(np.linalg.norm(r_new))
        step = float(np.linalg.norm(x_new - x))
        x, r, r_norm = x_new, r_new, r_new_norm
        if step <= cfg.opt_tol * float(np.linalg.norm(x)):
            converged = True
            break
    return _result(op, x, y, it, converged, "iht")


def solve_oracle_ls(op, y, support):
    """Least squares on a known support (minimum-norm if rank deficient)."""
    y = _check_y(op, y)
    support = np.asarray(sorted(set(int(i) for i in support)), dtype=int)
    if support.size > op.output_len:
        raise DimensionError(
            f"support size {support.size} exceeds output length {op.output_len}"
        )
    if support.size and (support.min() < 0 or support.max() >= op.input_len):
        raise DimensionError("support index out of range")
    x = np.zeros(op.input_len)
    note = ""
    if support.size:
        cols = np.empty((op.output_len, support.size))
        for out_col, i in enumerate(support):
            e = np.zeros(op.input_len)
            e[i] = 1.0
            cols[:, out_col] = op.apply(e)
        z, _, rank, _ = np.linalg.lstsq(cols, y, rcond=None)
        if rank < support.size:
            note = "rank_deficient"
        x[support] = z
    return _result(op, x, y, 1, True, "oracle_ls", note=note)


def reference_bpdn(phi, y, eps, size_limit=64):
    """Independent slow solution of min ||x||_1 s.t. ||Phi x - y|| <= eps.

    eps = 0 is solved exactly as a linear program on the positive/negative
    split; eps > 0 runs sequential quadratic programming on the same split
    with the quadratic constraint.  Dense instances with at most
    ``size_limit`` unknowns only.
    """
    phi = np.asarray(phi, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if phi.ndim != 2 or phi.shape[0] != y.size:
        raise DimensionError(f"phi {phi.shape} does not match y {y.shape}")
    n = phi.shape[1]
    if n > size_limit:
        raise BudgetError(f"reference solver limited to {size_limit} unknowns, got {n}")
    if eps < 0:
        raise ParameterError("epsilon must be >= 0")
    if np.linalg.norm(y) <= eps:
        return np.zeros(n)

    if eps == 0.0:
        res = linprog(
            c=np.ones(2 * n),
            A_eq=np.hstack([phi, -phi]),
            b_eq=y,
            bounds=[(0, None)] * (2 * n),
            method="highs",
        )
        if not res.success:
            raise DataError(f"equality-constrained reference LP failed: {res.message}")
        return res.x[:n] - res.x[n:]

    x_ls, *_ = np.linalg.lstsq(phi, y, rcond=None)
    if np.linalg.norm(phi @ x_ls - y) > eps * (1.0 + 1e-9) + 1e-12:
        raise DataError("instance is infeasible: min residual exceeds epsilon")
    x_start = x_ls
    lp = linprog(
        c=np.ones(2 * n),
        A_eq=np.hstack([phi, -phi]),
        b_eq=y,
        bounds=[(0, None)] * (2 * n),
        method="highs",
    )
    if lp.success:  # exact interpolator: feasible and a good SQP start
        x_start = lp.x[:n] - lp.x[n:]
    w0 = np.concatenate([np.maximum(x_start, 0.0), np.maximum(-x_start, 0.0)])

    def split(w):
        return w[:n] - w[n:]

    def constraint(w):
        r = phi @ split(w) - y
        return eps**2 - float(r @ r)

    def constraint_jac(w):
        r = phi @ split(w) - y
        g = -2.0 * (phi.T @ r)
        return np.concatenate([g, -g])

    def feasible(x):
        return np.linalg.norm(phi @ x - y) <= eps * (1.0 + 1e-7)

    res = minimize(
        fun=lambda w: float(np.sum(w)),
        x0=w0,
        jac=lambda w: np.ones(2 * n),
        bounds=[(0, None)] * (2 * n),
        constraints=[{"type": "ineq", "fun": constraint, "jac": constraint_jac}],
        method="SLSQP",
        options={"maxiter": 2000, "ftol": 1e-14},
    )
    if res.success and feasible(split(res.x)):
        return split(res.x)

    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # quasi-Newton warns on the linear objective
        res = minimize(
            fun=lambda w: float(np.sum(w)),
            x0=w0,
            jac=lambda w: np.ones(2 * n),
            bounds=[(0, None)] * (2 * n),
            constraints=[
                {"type": "ineq", "fun": constraint, "jac": lambda w: constraint_jac(w)[None, :]}
            ],
            method="trust-constr",
            options={"maxiter": 5000, "gtol": 1e-12, "xtol": 1e-14},
        )
    if res.success and feasible(split(res.x)):
        return split(res.x)
    raise DataError(f"reference solver failed: {res.message}")
