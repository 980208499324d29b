from __future__ import annotations

import dataclasses
import logging
import os
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from databricks.labs.blueprint.entrypoint import find_dir_with_leaf

from databricks.labs.specfix.lang.domain import EXHAUSTIVE_LIMIT
from databricks.labs.specfix.lang.testcases import DEFAULT_TEST_FUEL
from databricks.labs.specfix.overflow.detection import DETECTION_FUEL, DetectionMode
from databricks.labs.specfix.overflow.rules import RuleMode
from databricks.labs.specfix.repair.termination import DEFAULT_BUDGET
from databricks.labs.specfix.termination.prover import (
    DEFAULT_SEED,
    LASSO_EXHAUSTIVE_LIMIT,
    PROVER_FUEL,
    SAMPLES,
    STEP_BUDGET,
    Prover,
    Semantics,
)

logger = logging.getLogger(__name__)

CONFIG_FILE = ".specfix"
SEED_VARIABLE = "SPECFIX_SEED"


@dataclass(frozen=True)
class SpecfixConfig:
    """Every tunable of a run, echoed verbatim into reports."""

    mode: DetectionMode = DetectionMode.EXHAUSTIVE
    rule_mode: RuleMode = RuleMode.CORRECTED
    semantics: Semantics = Semantics.MATHEMATICAL
    fuel: int = DETECTION_FUEL
    test_fuel: int = DEFAULT_TEST_FUEL
    prover_fuel: int = PROVER_FUEL
    prover_steps: int = STEP_BUDGET
    budget: float = DEFAULT_BUDGET
    jobs: int = 1
    seed: int = DEFAULT_SEED
    exhaustive_limit: int = EXHAUSTIVE_LIMIT
    lasso_limit: int = LASSO_EXHAUSTIVE_LIMIT
    samples: int = SAMPLES
    report: Path | None = field(default=None, compare=False)

    def prover(self, ranges=None) -> Prover:
        return Prover(
            self.semantics,
            self.prover_fuel,
            self.lasso_limit,
            self.samples,
            self.seed,
            ranges,
            self.prover_steps,
        )

    def with_overrides(self, overrides: Mapping[str, Any]) -> SpecfixConfig:
        """Applies string or typed values; unknown keys are rejected."""
        known = {f.name: f for f in dataclasses.fields(self)}
        changes = {}
        for key, value in overrides.items():
            name = key.replace("-", "_")
            if name not in known:
                raise ValueError(f"unknown configuration key: {key}")
            if value is None:
                continue
            changes[name] = _coerce(name, getattr(self, name), value)
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            if f.name == "report":
                continue
            value = getattr(self, f.name)
            out[f.name] = value.value if hasattr(value, "value") else value
        return out


def _coerce(name: str, current: Any, value: Any) -> Any:
    if not isinstance(value, str):
        return value
    try:
        if name == "report":
            return Path(value)
        if isinstance(current, (DetectionMode, RuleMode, Semantics)):
            return type(current)(value)
        if isinstance(current, bool):
            return value.lower() in ("1", "true", "yes")
        if isinstance(current, int):
            return int(value)
        if isinstance(current, float):
            return float(value)
    except ValueError as e:
        raise ValueError(f"bad value for {name}: {value}") from e
    return value


def parse_config_file(path: Path) -> dict[str, str]:
    """`key=value` lines; blank lines and `#` comments are skipped, surrounding quotes removed."""
    values = {}
    with path.open(encoding="utf8") as file:
        for line in file:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}: not a key=value line: {line}")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip().strip('"').strip("'")
    return values


def find_config_file(start: Path | None = None) -> Path | None:
    folder = find_dir_with_leaf(start or Path.cwd(), CONFIG_FILE)
    if folder is None:
        return None
    return folder / CONFIG_FILE


def load_config(
    path: Path | None = None, flags: Mapping[str, Any] | None = None, environ: Mapping[str, str] | None = None
) -> SpecfixConfig:
    """Defaults, then the config file, then the environment, then command-line flags."""
    config = SpecfixConfig()
    path = path or find_config_file()
    if path is not None:
        logger.debug(f"reading configuration from {path}")
        config = config.with_overrides(parse_config_file(path))
    environ = os.environ if environ is None else environ
    if SEED_VARIABLE in environ:
        config = config.with_overrides({"seed": environ[SEED_VARIABLE]})
    if flags:
        config = config.with_overrides(flags)
    return config
