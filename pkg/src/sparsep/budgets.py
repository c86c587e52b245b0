"""Work budgets for dense constructions and exhaustive enumeration.

Dense matrices and support enumeration are test/diagnostic tools; the
budgets keep them from sneaking O((np)^2) memory or combinatorial blowups
into experiment paths.  The environment variable ``SPARSEP_WORK_LIMIT``,
when set to a positive integer, overrides both budgets at once.
"""

import os

from .errors import BudgetError, ParameterError

DENSE_ELEMENT_LIMIT = 2**22
ENUM_OP_LIMIT = 10**8

_ENV_VAR = "SPARSEP_WORK_LIMIT"


def _env_override():
    raw = os.environ.get(_ENV_VAR)
    if raw is None:
        return None
    try:
        value = int(raw)
    except ValueError:
        raise ParameterError(f"{_ENV_VAR} must be an integer, got {raw!r}")
    if value <= 0:
        raise ParameterError(f"{_ENV_VAR} must be positive, got {value}")
    return value


def dense_limit(override=None):
    """Element-count budget for dense operator matrices."""
    if override is not None:
        return int(override)
    env = _env_override()
    return env if env is not None else DENSE_ELEMENT_LIMIT


def enum_limit(override=None):
    """Elementary-operation budget for exhaustive support enumeration."""
    if override is not None:
        return int(override)
    env = _env_override()
    return env if env is not None else ENUM_OP_LIMIT


def check_dense(n_elements, override=None, what="dense matrix"):
    limit = dense_limit(override)
    if n_elements > limit:
        raise BudgetError(
            f"{what} needs {n_elements} elements, over the budget of {limit}; "
            f"raise the limit explicitly or set {_ENV_VAR}"
        )


def check_enum(n_ops, override=None, what="support enumeration"):
    limit = enum_limit(override)
    if n_ops > limit:
        raise BudgetError(
            f"{what} needs ~{n_ops} operations, over the budget of {limit}; "
            f"raise the limit explicitly or set {_ENV_VAR}"
        )
