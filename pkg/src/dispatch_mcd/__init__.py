"""Degradation-aware economic dispatch with optimal marginal degradation costs."""

import numpy as _np  # ensure BLAS is loaded before limiting its thread pool

try:
    import threadpoolctl as _threadpoolctl

    # The solver works on ~100-variable matrices where BLAS threading costs
    # far more than it saves; parallelism belongs to process pools instead.
    _BLAS_LIMITS = _threadpoolctl.threadpool_limits(limits=1, user_api="blas")
except Exception:  # pragma: no cover - threadpoolctl is an optional speedup
    _BLAS_LIMITS = None

__version__ = "0.1.0"

from .degradation import (  # noqa: E402,F401
    DeratedRatings,
    SohState,
    StorageParams,
    derate,
    soh_step,
    usage_of,
)
from .dispatch import (  # noqa: E402,F401
    ConstrainedUsage,
    DayProfile,
    DegradationCost,
    DispatchInstance,
    DispatchSolution,
    GenParams,
    LoadParams,
    marginal_usage_value,
    soh_sensitivity,
    solve_dispatch,
)
from .horizon import (  # noqa: E402,F401
    DiscountModel,
    HorizonResult,
    McdGrid,
    McdSchedule,
    PeriodSpec,
    Plan,
    backward_sweep,
    brute_force_long_term,
    evaluate_schedule,
    mcd_recursion_step,
    no_storage_baseline,
    optimize_mcd,
)
from .qp import (  # noqa: E402,F401
    KktReport,
    QpProblem,
    QpSolution,
    SolverSettings,
    check_kkt,
    solve_qp,
)
