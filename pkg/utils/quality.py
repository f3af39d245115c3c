"""Data-quality tables for the schedule and survey files, printed and saved by ``alloc check``."""
import pandas as pd
import numpy as np

import constants
from utils.core import InputError
from utils.prep import RATING_PREFIX, normalize_status

COURSE_KEYS = ["catalog", "section"]


def missingness_table(df: pd.DataFrame) -> pd.DataFrame:
    if df.empty:
        return pd.DataFrame(columns=["column", "missing_count", "missing_pct"])
    blank = df.isna() | df.astype(str).apply(lambda s: s.str.strip() == "")
    miss_ct = blank.sum().rename("missing_count")
    miss_pct = (blank.mean() * 100).round(2).rename("missing_pct")
    out = pd.concat([miss_ct, miss_pct], axis=1).reset_index().rename(columns={"index": "column"})
    return out.sort_values("missing_pct", ascending=False, kind="stable")


def duplicate_courses(schedule: pd.DataFrame) -> pd.DataFrame:
    if schedule.empty or not set(COURSE_KEYS).issubset(schedule.columns):
        return pd.DataFrame(columns=COURSE_KEYS + ["count"])
    g = schedule.groupby(COURSE_KEYS, dropna=False).size().reset_index(name="count")
    return g[g["count"] > 1].sort_values("count", ascending=False)


def bounds_issues(schedule: pd.DataFrame, responses: pd.DataFrame) -> pd.DataFrame:
    checks = []

    def add_issue(table, idx, issue, value):
        checks.append({"table": table, "row_id": int(idx), "issue": issue, "value": value})

    if "capacity" in schedule.columns:
        cap = pd.to_numeric(schedule["capacity"], errors="coerce")
        for idx in schedule.index[cap.notna() & (cap <= 0)]:
            add_issue("schedule", idx, "capacity non-positive", cap[idx])

    rating_cols = [c for c in responses.columns if c.startswith(RATING_PREFIX)]
    for c in rating_cols:
        r = pd.to_numeric(responses[c], errors="coerce")
        bad = r.notna() & ((r < constants.MIN_RATING) | (r > constants.MAX_RATING))
        for idx in responses.index[bad]:
            add_issue("responses", idx, f"{c} outside [{constants.MIN_RATING},{constants.MAX_RATING}]", r[idx])

    if "course_max" in responses.columns:
        cm = pd.to_numeric(responses["course_max"], errors="coerce")
        for idx in responses.index[cm.notna() & (cm <= 0)]:
            add_issue("responses", idx, "course_max non-positive", cm[idx])

    return pd.DataFrame(checks, columns=["table", "row_id", "issue", "value"])


def _status_or_none(label):
    try:
        return normalize_status(label)
    except InputError:
        return None


def logical_consistency(responses: pd.DataFrame) -> pd.DataFrame:
    rules = []

    def add(idx, rule, details):
        rules.append({"row_id": int(idx), "rule": rule, "details": details})

    rating_cols = [c for c in responses.columns if c.startswith(RATING_PREFIX)]
    ratings = responses[rating_cols].apply(pd.to_numeric, errors="coerce") if rating_cols else pd.DataFrame(index=responses.index)
    cm = pd.to_numeric(responses.get("course_max"), errors="coerce") if "course_max" in responses.columns else None

    for idx, r in responses.iterrows():
        status = _status_or_none(r.get("status", np.nan))
        if status is None:
            add(idx, "unknown status", r.get("status", ""))
        elif cm is not None and pd.notna(cm[idx]) and cm[idx] > constants.COURSE_CAP[status]:
            add(idx, "course_max above status cap", f"{int(cm[idx])} > {constants.COURSE_CAP[status]}")

        # Effective respondents rate at least one course above the default
        row = ratings.loc[idx] if rating_cols else pd.Series(dtype=float)
        if not (row > constants.MIN_RATING).any():
            add(idx, "empty preferences", "no rating above 1")

    return pd.DataFrame(rules, columns=["row_id", "rule", "details"])


def quality_report(schedule: pd.DataFrame, responses: pd.DataFrame) -> dict[str, pd.DataFrame]:
    return {
        "missing_schedule": missingness_table(schedule),
        "missing_responses": missingness_table(responses),
        "duplicates": duplicate_courses(schedule),
        "bounds": bounds_issues(schedule, responses),
        "logic": logical_consistency(responses),
    }
