"""Run configuration: defaults, key=value config files, flag overrides.

Precedence, highest first: command-line flags, then the config file, then
built-in defaults. The resolved configuration hashes to a stable digest that
output files embed, so two artifacts can be traced to the same settings.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .errors import InvalidParameter
from .model import Dataset
from .resampling import Ratios

DEFAULT_THRESHOLD = 0.7
DEFAULT_K_FOLDS = 4
DEFAULT_TRAIN_FRACTION = 0.8
DEFAULT_SEED = 0
DEFAULT_SHINGLE_K = 3
# Grid for threshold tuning when none is given.
DEFAULT_THRESHOLD_GRID = (0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)

METRICS = ("question_overlap", "business_key", "shingle_jaccard")

# What "auto" resolves to per dataset.
_AUTO_METRIC = {
    Dataset.FUNSD: "question_overlap",
    Dataset.SROIE: "business_key",
    Dataset.GENERIC: "shingle_jaccard",
}


@dataclass
class RunConfig:
    dataset: Dataset = Dataset.GENERIC
    data_root: Path | None = None
    output_dir: Path = field(default_factory=lambda: Path("templeak_out"))
    metric: str = "auto"  # resolved against dataset by resolved_metric()
    threshold: float = DEFAULT_THRESHOLD
    # None means derive from the corpus: keep its original test share, split
    # the remainder train/val at train_fraction.
    ratios: Ratios | None = None
    seed: int = DEFAULT_SEED
    k_folds: int = DEFAULT_K_FOLDS
    train_fraction: float = DEFAULT_TRAIN_FRACTION
    shingle_k: int = DEFAULT_SHINGLE_K
    ground_truth: Path | None = None
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLD_GRID

    def resolved_metric(self) -> str:
        if self.metric == "auto":
            return _AUTO_METRIC[self.dataset]
        if self.metric not in METRICS:
            raise InvalidParameter(f"unknown metric {self.metric!r}")
        return self.metric

    def digest_lines(self) -> list[str]:
        """Canonical key=value lines of the resolved configuration.

        data_root and output_dir are excluded: moving the same run to a
        different directory must not change the digest.
        """
        if self.ratios is None:
            ratio_line = "ratios=derived"
        else:
            r = self.ratios
            ratio_line = f"ratios=train={r.train!r},val={r.val!r},test={r.test!r}"
        lines = [
            f"dataset={self.dataset.value}",
            f"metric={self.resolved_metric()}",
            f"threshold={self.threshold!r}",
            ratio_line,
            f"seed={self.seed}",
            f"k_folds={self.k_folds}",
            f"train_fraction={self.train_fraction!r}",
            f"shingle_k={self.shingle_k}",
            f"thresholds={','.join(repr(t) for t in self.thresholds)}",
        ]
        return sorted(lines)

    def digest(self) -> str:
        payload = "\n".join(self.digest_lines()).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()


def coerce_value(key: str, value: str) -> Any:
    """Convert one raw config/flag string to the field's typed value."""
    if key == "dataset":
        try:
            return Dataset(value.strip().lower())
        except ValueError:
            raise InvalidParameter(f"unknown dataset {value!r}") from None
    if key in ("data_root", "output_dir", "ground_truth"):
        return Path(value)
    if key == "metric":
        return value.strip()
    if key in ("threshold", "train_fraction"):
        try:
            return float(value)
        except ValueError:
            raise InvalidParameter(f"{key} must be a number, got {value!r}") from None
    if key in ("seed", "k_folds", "shingle_k"):
        try:
            return int(value)
        except ValueError:
            raise InvalidParameter(f"{key} must be an integer, got {value!r}") from None
    if key == "ratios":
        return parse_ratios(value)
    if key == "thresholds":
        try:
            return tuple(float(part) for part in value.split(",") if part.strip())
        except ValueError:
            raise InvalidParameter(f"thresholds must be comma-separated numbers, got {value!r}") from None
    raise InvalidParameter(f"unknown config key {key!r}")


def parse_ratios(value: str) -> Ratios:
    """Parse "train,val,test" or "train,test" (val 0) comma form."""
    parts = [part.strip() for part in value.split(",")]
    try:
        numbers = [float(part) for part in parts]
    except ValueError:
        raise InvalidParameter(f"ratios must be numbers, got {value!r}") from None
    if len(numbers) == 2:
        return Ratios(train=numbers[0], val=0.0, test=numbers[1])
    if len(numbers) == 3:
        return Ratios(train=numbers[0], val=numbers[1], test=numbers[2])
    raise InvalidParameter(f"ratios needs 2 or 3 comma-separated values, got {value!r}")


def parse_config_file(path: Path) -> dict[str, Any]:
    """Read key=value lines; '#' starts a comment, blank lines ignored."""
    values: dict[str, Any] = {}
    text = path.read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidParameter(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        values[key] = coerce_value(key, value.strip())
    return values


_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def build_config(
    file_values: dict[str, Any] | None = None,
    flag_values: dict[str, Any] | None = None,
) -> RunConfig:
    """Merge defaults, config-file values, flag values; flags win."""
    merged: dict[str, Any] = {}
    for source in (file_values or {}), (flag_values or {}):
        for key, value in source.items():
            if key not in _FIELD_NAMES:
                raise InvalidParameter(f"unknown config key {key!r}")
            if value is not None:
                merged[key] = value
    config = RunConfig(**merged)
    config.resolved_metric()  # validate early
    if not 0.0 < config.threshold <= 1.0:
        raise InvalidParameter(f"threshold must be in (0, 1], got {config.threshold}")
    if not 0.0 < config.train_fraction < 1.0:
        raise InvalidParameter(f"train_fraction must be in (0, 1), got {config.train_fraction}")
    if config.k_folds < 0:
        raise InvalidParameter(f"k_folds must be >= 0, got {config.k_folds}")
    if config.shingle_k < 1:
        raise InvalidParameter(f"shingle_k must be >= 1, got {config.shingle_k}")
    return config
