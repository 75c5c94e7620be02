from ._hitl import (
    dp_optimal_value,
    gen_env,
    query_budget,
    run_fig1,
)

__all__ = ["dp_optimal_value", "gen_env", "query_budget", "run_fig1"]
