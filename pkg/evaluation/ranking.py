"""
Rank Aggregation

Within every test case methods are ranked by a result metric (rank 1 =
largest value, ties share the mean of their positions). Ranks are then
averaged over all test cases and over each (T, S1, S2) structural subset.
"""

from typing import Dict, List, Mapping, Optional, Sequence

import pandas as pd

from utils.errors import MissingResultError, SchemaMismatchError
from utils.logger import get_logger

logger = get_logger(__name__)

OVERALL = "overall"


def rank_table(results: pd.DataFrame, metric: str, methods: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """
    Per-test-case ranks

    Args:
        results: Long table with columns test_case, method, <metric>
        metric: Column to rank by (larger is better)
        methods: Method order (default: order of first appearance)

    Returns:
        DataFrame indexed by test_case with one rank column per method

    Raises:
        MissingResultError: if any (test case, method) value is missing
        SchemaMismatchError: if a (test case, method) pair appears more than once
    """
    duplicated = results.duplicated(["test_case", "method"], keep=False)
    if duplicated.any():
        pairs = results.loc[duplicated, ["test_case", "method"]].drop_duplicates()
        raise SchemaMismatchError(
            "results",
            ["one row per (test_case, method)"],
            [f"{tc}:{method}" for tc, method in pairs.itertuples(index=False)][:5],
        )
    if methods is None:
        methods = list(dict.fromkeys(results["method"].tolist()))
    wide = results.pivot(index="test_case", columns="method", values=metric)
    wide = wide.reindex(columns=list(methods))

    missing = [
        (int(tc), method)
        for method in wide.columns
        for tc in wide.index[wide[method].isna()]
    ]
    if missing:
        raise MissingResultError(missing)

    return wide.rank(axis=1, ascending=False, method="average")


def rank_methods(
    results: pd.DataFrame,
    structures: Mapping[int, str],
    metric: str = "dauc_1pct",
    methods: Optional[Sequence[str]] = None,
    subsets: Optional[Sequence[str]] = None,
) -> pd.DataFrame:
    """
    Average ranks overall and per structural subset

    Args:
        results: Long table with columns test_case, method, <metric>
        structures: test_case -> subset label (e.g. "~T,S1,~S2")
        metric: Column to rank by
        methods: Method order
        subsets: Subset order (default: order of first appearance)

    Returns:
        Long table method, subset, avg_rank

    Raises:
        MissingResultError: for missing cells or test cases without a subset label
    """
    ranks = rank_table(results, metric, methods)
    unlabeled = [int(tc) for tc in ranks.index if tc not in structures]
    if unlabeled:
        raise MissingResultError([("structure", tc) for tc in unlabeled])

    labels = pd.Series({tc: structures[tc] for tc in ranks.index})
    if subsets is None:
        subsets = list(dict.fromkeys(labels.tolist()))

    groups: Dict[str, pd.Series] = {OVERALL: ranks.mean(axis=0)}
    for subset in subsets:
        members = labels.index[labels == subset]
        if len(members):
            groups[subset] = ranks.loc[members].mean(axis=0)

    rows: List[dict] = []
    for method in ranks.columns:
        for subset, means in groups.items():
            rows.append({"method": method, "subset": subset, "avg_rank": float(means[method])})

    logger.debug("Methods ranked", methods=len(ranks.columns), test_cases=len(ranks.index), metric=metric)
    return pd.DataFrame(rows, columns=["method", "subset", "avg_rank"])


def rank_matrix(ranks: pd.DataFrame) -> pd.DataFrame:
    """Wide view (methods x subsets) of a rank_methods table"""
    order_methods = list(dict.fromkeys(ranks["method"].tolist()))
    order_subsets = list(dict.fromkeys(ranks["subset"].tolist()))
    wide = ranks.pivot(index="method", columns="subset", values="avg_rank")
    return wide.reindex(index=order_methods, columns=order_subsets)
