import json
import logging
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd

from utils.core import Agent, Allocation, InputError, Instance, ItemType
from utils.prep import agents_to_frame, responses_to_agents, schedule_to_item_types

logger = logging.getLogger(__name__)


def load_csv(path: str | Path, **kwargs) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise InputError(f"Data file not found: {path.resolve()}")
    try:
        return pd.read_csv(path, encoding="utf-8", low_memory=False, **kwargs)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputError(f"{path}: {e}") from e


def load_column_mapping(path: str | Path) -> dict[str, str]:
    """Sidecar CSV with ``source,target`` rows renaming survey columns."""
    df = load_csv(path, dtype=str, keep_default_na=False)
    if not {"source", "target"}.issubset(df.columns):
        raise InputError(f"{path}: column mapping needs 'source' and 'target' columns")
    return dict(zip(df["source"].str.strip(), df["target"].str.strip()))


def read_schedule_frame(path: str | Path) -> pd.DataFrame:
    return load_csv(path, dtype=str, keep_default_na=False)


def read_responses_frame(path: str | Path, columns: Optional[str | Path] = None) -> pd.DataFrame:
    df = load_csv(path, dtype=str)
    if columns is not None:
        df = df.rename(columns=load_column_mapping(columns))
    return df


def load_schedule(path: str | Path) -> list[ItemType]:
    items = schedule_to_item_types(read_schedule_frame(path), source=str(path))
    logger.info("%s: %d courses, %d seats", path, len(items), sum(it.capacity for it in items))
    return items


def load_responses(path: str | Path, item_types: Sequence[ItemType], columns: Optional[str | Path] = None) -> list[Agent]:
    return responses_to_agents(read_responses_frame(path, columns), item_types, source=str(path))


def write_table(df: pd.DataFrame, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(p, index=False)
    return p


def write_responses(agents: Sequence[Agent], item_types: Sequence[ItemType], path: str | Path) -> Path:
    return write_table(agents_to_frame(agents, item_types), path)


def allocation_frame(alloc: Allocation, instance: Instance) -> pd.DataFrame:
    rows = []
    for a, agent in enumerate(instance.agents):
        for g in alloc.bundle(a).nonzero()[0]:
            it = instance.item_types[g]
            rows.append((agent.student_id, it.catalog_label, it.section_label))
    return pd.DataFrame(rows, columns=["student_id", "catalog", "section"])


def write_allocation(alloc: Allocation, instance: Instance, path: str | Path) -> Path:
    return write_table(allocation_frame(alloc, instance), path)


def write_report(report: dict, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return p


def maybe_read_parquet(path: str | Path) -> pd.DataFrame | None:
    p = Path(path)
    if p.exists():
        return pd.read_parquet(p)
    return None


def write_parquet(df: pd.DataFrame, path: str | Path) -> str:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    df.to_parquet(p, index=False)
    return str(p.resolve())
