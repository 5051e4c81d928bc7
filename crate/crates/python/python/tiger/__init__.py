from ._tiger import (
    Gather,
    Tag,
    Trainer,
    graph_stats,
    log_rule,
    neighborhood_size,
    td_lambda_targets,
    train,
)

__all__ = [
    "Gather",
    "Tag",
    "Trainer",
    "graph_stats",
    "log_rule",
    "neighborhood_size",
    "td_lambda_targets",
    "train",
]
