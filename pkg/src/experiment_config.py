"""
Experiment Config - Run parameters layered from settings, file, environment and flags
"""

import configparser
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Dict, List, Mapping, Optional

from config.settings import *
from src.errors import ConfigurationError

_SECTION = "experiment"


@dataclass
class ExperimentConfig:
    """All inputs of one run"""

    dataset_path: str = ""
    dataset_format: str = DATASET_FORMAT
    synthetic: bool = False
    synthetic_n: int = 10000
    synthetic_d: int = 30
    synthetic_q: int = 6
    synthetic_cardinality: int = 2
    chunk_size: int = CHUNK_SIZE
    hidden_units: int = HIDDEN_UNITS
    alpha: float = ALPHA
    beta: float = BETA
    gamma: float = GAMMA
    neighbors: int = NEIGHBORS
    qp_max_iters: int = QP_MAX_ITERS
    qp_tol: float = QP_TOL
    delta: float = DELTA
    strategy: str = STRATEGY
    noise_lo: float = NOISE_LO
    noise_hi: float = NOISE_HI
    drift_mode: str = DRIFT_MODE
    drift_split: float = DRIFT_SPLIT
    data_seed: int = DATA_SEED
    noise_seed: int = NOISE_SEED
    model_seed: int = MODEL_SEED
    paper_literal_r: bool = PAPER_LITERAL_R
    reweight_ranking: bool = REWEIGHT_RANKING
    posteriors: str = POSTERIORS
    prob_ridge: float = PROB_RIDGE
    posterior_floor: float = POSTERIOR_FLOOR
    omega_clamp_max: float = OMEGA_CLAMP_MAX
    repeats: int = REPEATS
    output_dir: str = OUTPUT_DIR
    beta_grid: List[float] = field(default_factory=lambda: list(BETA_GRID))
    gamma_grid: List[float] = field(default_factory=lambda: list(GAMMA_GRID))

    def validate(self) -> "ExperimentConfig":
        """Raise ConfigurationError on any value that cannot describe a run"""
        if not self.synthetic and not self.dataset_path:
            raise ConfigurationError("dataset_path is required unless synthetic = true")
        if self.dataset_format not in ("sparse-multilabel", "dense-csv"):
            raise ConfigurationError(f"unknown dataset_format: {self.dataset_format}")
        if self.chunk_size < 1 or self.hidden_units < 1:
            raise ConfigurationError("chunk_size and hidden_units must be positive")
        if self.alpha <= 0:
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.beta <= 1:
            raise ConfigurationError(f"beta must lie in (0, 1], got {self.beta}")
        if self.gamma < 0:
            raise ConfigurationError(f"gamma must be nonnegative, got {self.gamma}")
        if not 1 <= self.neighbors < self.chunk_size:
            raise ConfigurationError(f"neighbors must lie in [1, chunk_size), got {self.neighbors}")
        if not 0 < self.delta < 1:
            raise ConfigurationError(f"delta must lie in (0, 1), got {self.delta}")
        if self.strategy not in ("none", "retrain", "adjust"):
            raise ConfigurationError(f"unknown strategy: {self.strategy}")
        if self.drift_mode not in ("none", "growth", "reduction"):
            raise ConfigurationError(f"unknown drift_mode: {self.drift_mode}")
        if self.posteriors not in ("estimated", "oracle"):
            raise ConfigurationError(f"unknown posteriors source: {self.posteriors}")
        if not 0 <= self.noise_lo <= self.noise_hi or self.noise_hi * 2 >= 1:
            raise ConfigurationError(f"noise range [{self.noise_lo}, {self.noise_hi}] is invalid")
        if not 0 < self.posterior_floor < 0.5:
            raise ConfigurationError(f"posterior_floor must lie in (0, 0.5), got {self.posterior_floor}")
        if self.repeats < 1:
            raise ConfigurationError(f"repeats must be positive, got {self.repeats}")
        if not self.beta_grid or not self.gamma_grid:
            raise ConfigurationError("grid search needs nonempty beta and gamma grids")
        return self

    def with_overrides(self, values: Mapping[str, object]) -> "ExperimentConfig":
        """
        Apply string or typed overrides by field name

        Args:
            values: Mapping of field name to value

        Returns:
            New config
        """
        types = {f.name: f.type for f in fields(self)}
        changes = {}
        for key, raw in values.items():
            if raw is None:
                continue
            if key not in types:
                raise ConfigurationError(f"unknown config key: {key}")
            changes[key] = _coerce(key, raw, types[key])
        return replace(self, **changes)

    def to_echo(self) -> str:
        """Sorted key = value lines, readable back by load_config"""
        lines = []
        for key, value in sorted(asdict(self).items()):
            if isinstance(value, list):
                value = ",".join(repr(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def _coerce(key: str, raw: object, kind) -> object:
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if kind in (bool, "bool"):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind in (int, "int"):
            return int(text)
        if kind in (float, "float"):
            return float(text)
        if kind in (List[float], "List[float]"):
            return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"config key {key}: cannot read '{text}'")
    return text


def read_config_file(path: str) -> Dict[str, str]:
    """
    Read a flat key = value file

    Args:
        path: Config file; '#' starts a comment

    Returns:
        Raw string values by key
    """
    if not os.path.exists(path):
        raise ConfigurationError(f"config file not found: {path}")
    parser = configparser.ConfigParser(comment_prefixes=("#",), inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    with open(path, "r") as f:
        try:
            parser.read_string(f"[{_SECTION}]\n" + f.read())
        except configparser.Error as exc:
            raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    return dict(parser[_SECTION])


def environment_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[str, str]:
    """NCLD_<KEY> variables for known config keys"""
    environ = os.environ if environ is None else environ
    names = {f.name for f in fields(ExperimentConfig)}
    overrides = {}
    for name, value in environ.items():
        if name.startswith(ENV_PREFIX):
            key = name[len(ENV_PREFIX):].lower()
            if key in names:
                overrides[key] = value
    return overrides


def load_config(path: Optional[str] = None, flags: Optional[Mapping[str, object]] = None,
                environ: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
    """
    Settings defaults < config file < environment < command-line flags

    Args:
        path: Optional config file
        flags: Values given on the command line
        environ: Environment mapping, os.environ by default

    Returns:
        Validated ExperimentConfig
    """
    cfg = ExperimentConfig()
    if path:
        cfg = cfg.with_overrides(read_config_file(path))
    cfg = cfg.with_overrides(environment_overrides(environ))
    if flags:
        cfg = cfg.with_overrides(flags)
    return cfg.validate()
