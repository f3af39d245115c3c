from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import constants
from utils.core import InputError

MECHANISMS = ("sd", "rr", "ys", "usw-flow", "export-ilp")
MODES = ("real", "reduced", "full", "stress")


@dataclass(frozen=True)
class RunConfig:
    """Everything a single run depends on; equal configs give equal outputs."""

    mechanism: str = "ys"
    seed: int = constants.RANDOM_SEED
    k: int = constants.DEFAULT_K
    scale: float = 1.0
    mode: str = "real"
    cohort: Optional[int] = None
    ell: int = constants.DEFAULT_ELL
    schedule: Path = Path("data") / constants.SCHEDULE_FILENAME
    responses: Path = Path("data") / constants.RESPONSES_FILENAME
    out: Path = Path("out")
    columns: Optional[Path] = None
    check: bool = False
    timing: bool = True

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise InputError(f"Unknown mechanism {self.mechanism!r}; expected one of {', '.join(MECHANISMS)}")
        if self.mode not in MODES:
            raise InputError(f"Unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if self.k < 1:
            raise InputError(f"k must be >= 1, got {self.k}")
        if self.ell < 1:
            raise InputError(f"ell must be >= 1, got {self.ell}")
        if not 0 < self.scale <= 1:
            raise InputError(f"scale must lie in (0, 1], got {self.scale}")
        if self.mode != "real" and self.scale != 1:
            raise InputError(f"scale is fixed by the {self.mode} mode; leave it at 1")
        if self.cohort is not None and self.cohort < 1:
            raise InputError(f"cohort must be positive, got {self.cohort}")
        if self.mode == "stress" and self.cohort is None:
            raise InputError("stress mode needs a cohort size")
        if self.mode in ("real", "reduced") and self.cohort is not None:
            raise InputError(f"{self.mode} mode takes its cohort from the respondents; drop --cohort")
        # Stored paths are always Path objects
        for name in ("schedule", "responses", "out", "columns"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, Path):
                object.__setattr__(self, name, Path(value))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, Path):
                d[k] = v.as_posix()
        return d
