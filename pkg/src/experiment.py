"""
Experiment - Main stream loop, grid search and report files
"""

import logging
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy
import sklearn

from config.settings import CSV_FLOAT_FORMAT
from src import data_stream, drift_monitor, elm_features, metrics, neighbor_graph, noise_weights, online_model
from src.data_stream import DataChunk, Dataset, NoiseSpec
from src.drift_monitor import CardinalityEstimate, DriftConfig, DriftEvent, Strategy
from src.errors import DataError, NcldError, NumericalError, StateError
from src.experiment_config import ExperimentConfig
from src.metrics import ChunkReport
from src.online_model import ChunkWorkspace, ModelState

logger = logging.getLogger(__name__)

__version__ = "1.0.0"

CHUNK_COLUMNS = ["chunk_index", "hamming_loss", "micro_f1", "average_precision", "gm",
                 "drift_detected", "epsilon", "cardinality_mean", "wall_time"]
EVENT_COLUMNS = ["chunk_index", "prev_mean", "new_mean", "epsilon", "strategy"]
SUMMARY_METRICS = ["hamming_loss", "micro_f1", "average_precision", "gm"]


@dataclass
class RunReport:
    """Everything one run produced"""

    chunks: List[ChunkReport] = field(default_factory=list)
    events: List[DriftEvent] = field(default_factory=list)
    summary: Dict[str, float] = field(default_factory=dict)
    config_echo: str = ""
    versions: Dict[str, str] = field(default_factory=dict)
    notes: Dict[str, object] = field(default_factory=dict)
    final_state: Optional[ModelState] = None

    def chunk_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(c) for c in self.chunks], columns=CHUNK_COLUMNS)

    def event_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(e) for e in self.events], columns=EVENT_COLUMNS)


@dataclass
class PreparedChunk:
    """Workspace plus the per-chunk quantities the drift monitor needs"""

    workspace: ChunkWorkspace
    cardinality: CardinalityEstimate


@contextmanager
def _stage(name: str, chunk_index: int):
    """Stamp chunk and stage onto errors raised inside"""
    try:
        yield
    except NcldError as exc:
        if exc.chunk_index is None:
            exc.chunk_index = chunk_index
        exc.stage = exc.stage or name
        raise
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        raise NumericalError(str(exc), chunk_index, name) from exc


class Experiment:
    """One prequential run over a noisy chunk stream"""

    def __init__(self, cfg: ExperimentConfig):
        """
        Initialize experiment

        Args:
            cfg: Validated configuration
        """
        self.cfg = cfg
        self.dataset: Optional[Dataset] = None
        self.chunks: List[DataChunk] = []
        self.noise: Optional[NoiseSpec] = None
        self.hidden = None
        self.scaler = None
        self.state: Optional[ModelState] = None
        self.drift = DriftConfig(cfg.delta, cfg.strategy)

    def load_stream(self) -> List[DataChunk]:
        """Read or generate the dataset, synthesize drift, chunk and corrupt it"""
        cfg = self.cfg
        with _stage("load", 0):
            if cfg.synthetic:
                ds = data_stream.make_synthetic_dataset(cfg.synthetic_n, cfg.synthetic_d, cfg.synthetic_q,
                                                        cfg.synthetic_cardinality, cfg.data_seed)
            else:
                ds = data_stream.parse_dataset(cfg.dataset_path, cfg.dataset_format)
            if cfg.drift_mode != "none":
                ds = data_stream.synthesize_drift(ds, cfg.drift_mode, cfg.drift_split, cfg.data_seed)
            clean = data_stream.chunk_stream(ds, cfg.chunk_size, cfg.data_seed)
            self.noise = data_stream.sample_noise_spec(ds.q, cfg.noise_lo, cfg.noise_hi, cfg.noise_seed)
            self.chunks = [data_stream.inject_noise(c, self.noise, cfg.noise_seed * 1_000_003 + c.index)
                           for c in clean]
        self.dataset = ds
        logger.info(f"Stream ready: {ds.name}, {len(self.chunks)} chunks of {cfg.chunk_size}, q={ds.q}, d={ds.d}")
        return self.chunks

    def prepare_chunk(self, chunk: DataChunk, H: np.ndarray) -> PreparedChunk:
        """
        Build graph, kernel, importance weights, ranking and target matrices

        Args:
            chunk: Noisy chunk
            H: Hidden activations of the chunk

        Returns:
            PreparedChunk
        """
        cfg = self.cfg
        Y = chunk.observed_labels
        X = self.scaler.transform(chunk.features)
        with _stage("graph", chunk.index):
            neighbors = neighbor_graph.knn_indices(X, cfg.neighbors)
            graph = neighbor_graph.solve_reconstruction_weights(X, neighbors, cfg.qp_max_iters, cfg.qp_tol)
            kernel = neighbor_graph.build_scoring_kernel(graph, cfg.beta, cfg.paper_literal_r)
        with _stage("weights", chunk.index):
            posteriors = self._posteriors(chunk, H)
            omega = noise_weights.compute_omega(posteriors, Y, self.noise, cfg.omega_clamp_max)
            rank_omega = omega if cfg.reweight_ranking else noise_weights.unit_omega(Y)
            ranking = noise_weights.build_ranking_matrix(rank_omega, Y)
            target = noise_weights.build_target_matrix(Y, ranking, cfg.beta, cfg.gamma)
            card = drift_monitor.estimate_cardinality(omega, Y)
        ws = ChunkWorkspace(H, kernel, target, ranking, Y, graph, chunk.index)
        return PreparedChunk(ws, card)

    def _posteriors(self, chunk: DataChunk, H: np.ndarray) -> np.ndarray:
        if self.cfg.posteriors == "oracle":
            if chunk.truth_labels is None:
                raise StateError("oracle posteriors need ground-truth labels")
            return noise_weights.oracle_posteriors(chunk.truth_labels, chunk.observed_labels, self.noise)
        model = elm_features.fit_chunk_probability_model(H, chunk.observed_labels, self.cfg.prob_ridge)
        return elm_features.estimate_observed_posteriors(model, H, chunk.observed_labels, self.cfg.posterior_floor)

    def _hidden(self, chunk: DataChunk) -> np.ndarray:
        with _stage("map", chunk.index):
            return elm_features.map_features(self.hidden, self.scaler.transform(chunk.features))

    def initialize(self):
        """Fit scaler, draw the hidden map and train the base model on D0"""
        cfg = self.cfg
        first = self.chunks[0]
        self.scaler = elm_features.fit_feature_scaler(first.features)
        self.hidden = elm_features.init_hidden_map(first.features.shape[1], cfg.hidden_units, cfg.model_seed)
        prepared = self.prepare_chunk(first, self._hidden(first))
        with _stage("initialize", 0):
            self.state = online_model.initialize(prepared.workspace, cfg.alpha, cfg.beta, cfg.gamma)
        self.state.prev_cardinality = prepared.cardinality.mean

    def step(self, chunk: DataChunk) -> Tuple[ChunkReport, Optional[DriftEvent]]:
        """
        Predict, evaluate, then learn from one chunk

        Args:
            chunk: Next noisy chunk

        Returns:
            (ChunkReport, DriftEvent or None)
        """
        started = time.perf_counter()
        H = self._hidden(chunk)

        # Predict before the labels are seen
        with _stage("predict", chunk.index):
            scores = online_model.score(self.state, H)
            predicted = online_model.predict(scores)
        truth = chunk.truth_labels if chunk.truth_labels is not None else chunk.observed_labels
        hl = metrics.hamming_loss(predicted, truth)
        f1 = metrics.micro_f1(predicted, truth)
        ap = metrics.average_precision(scores, truth)

        prepared = self.prepare_chunk(chunk, H)
        ws = prepared.workspace
        with _stage("update", chunk.index):
            state = online_model.update_gram_inverse(self.state, ws)

        # Detect and adapt
        card = prepared.cardinality
        epsilon = drift_monitor.hoeffding_threshold(card, self.drift.delta)
        prev_mean = state.prev_cardinality
        detected = drift_monitor.detect(prev_mean, card, self.drift.delta)
        event = None
        if detected:
            with _stage("adapt", chunk.index):
                if self.drift.strategy == Strategy.RETRAIN:
                    state = drift_monitor.adapt_retrain(state, ws)
                elif self.drift.strategy == Strategy.ADJUST:
                    state = drift_monitor.adapt_adjust(state)
            event = DriftEvent(chunk.index, prev_mean, card.mean, epsilon, self.drift.strategy.value)
            logger.info(f"Drift at chunk {chunk.index}: cardinality {prev_mean:.4f} -> {card.mean:.4f} "
                        f"(eps={epsilon:.4f}, strategy={self.drift.strategy.value})")

        with _stage("update", chunk.index):
            state = online_model.update_coefficients(state, ws)
        state.prev_cardinality = card.mean
        self.state = state

        wall = time.perf_counter() - started
        logger.debug(f"Chunk {chunk.index}: HL={hl:.4f} F1={f1:.4f} {wall:.3f}s")
        report = ChunkReport(chunk.index, hl, f1, ap, metrics.gm_score(hl, f1), detected, epsilon, card.mean, wall)
        return report, event

    def run(self) -> RunReport:
        """Run the whole stream and collect the report"""
        if not self.chunks:
            self.load_stream()
        self.initialize()
        report = RunReport(config_echo=self.cfg.to_echo(), versions=_versions())
        for chunk in self.chunks[1:]:
            chunk_report, event = self.step(chunk)
            report.chunks.append(chunk_report)
            if event:
                report.events.append(event)

        report.summary = summarize(report.chunks)
        report.summary["detections"] = float(len(report.events))
        report.notes = {
            "evaluated_against": "truth" if self.chunks[0].truth_labels is not None else "observed",
            "drift_unchanged": self.dataset.metadata.get("drift_unchanged", 0) if self.dataset else 0,
        }
        report.final_state = self.state
        logger.info(f"Run finished: {len(report.chunks)} chunks, GM={report.summary['gm']:.4f}, "
                    f"{len(report.events)} detections")
        return report


def _versions() -> Dict[str, str]:
    return {"engine": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__, "pandas": pd.__version__}


def summarize(chunks: Sequence[ChunkReport]) -> Dict[str, float]:
    """Mean of each metric over chunks; AP ignores chunks where it is undefined"""
    summary = {}
    for name in SUMMARY_METRICS:
        values = [getattr(c, name) for c in chunks if getattr(c, name) is not None]
        summary[name] = float(np.mean(values)) if values else float("nan")
    summary["wall_time"] = float(sum(c.wall_time for c in chunks))
    return summary


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """
    Execute one full run

    Args:
        cfg: Configuration

    Returns:
        RunReport
    """
    return Experiment(cfg.validate()).run()


def run_repeated(cfg: ExperimentConfig, repeats: int) -> Tuple[List[RunReport], Dict[str, float]]:
    """
    Repeat a run with shifted seeds

    Args:
        cfg: Base configuration
        repeats: Number of runs

    Returns:
        (reports, summary with <metric>_mean and <metric>_std)
    """
    reports = []
    for r in range(repeats):
        shifted = replace(cfg, data_seed=cfg.data_seed + r, noise_seed=cfg.noise_seed + r,
                          model_seed=cfg.model_seed + r)
        reports.append(run_experiment(shifted))
    frame = pd.DataFrame([rep.summary for rep in reports])
    summary = {}
    for name in SUMMARY_METRICS:
        summary[f"{name}_mean"] = float(frame[name].mean())
        summary[f"{name}_std"] = float(frame[name].std(ddof=0))
    return reports, summary


@dataclass
class GridResult:
    """Best grid point and the full surface"""

    beta: float
    gamma: float
    surface: pd.DataFrame


def grid_search(cfg: ExperimentConfig, beta_grid: Sequence[float], gamma_grid: Sequence[float],
                jobs: int = 1, out_dir: Optional[str] = None) -> GridResult:
    """
    Mesh search over beta and gamma by mean GM

    Args:
        cfg: Base configuration; every grid point shares its seeds
        beta_grid: Candidate beta values
        gamma_grid: Candidate gamma values
        jobs: Grid points run in parallel
        out_dir: Where to write grid.csv, if given

    Returns:
        GridResult; ties go to the earlier grid point
    """
    if not beta_grid or not gamma_grid:
        raise DataError("grid search needs nonempty grids")
    points = [(float(b), float(g)) for b in beta_grid for g in gamma_grid]

    def run_point(point):
        beta, gamma = point
        return run_experiment(replace(cfg, beta=beta, gamma=gamma)).summary

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        summaries = list(pool.map(run_point, points))

    surface = pd.DataFrame([dict(beta=b, gamma=g, **s) for (b, g), s in zip(points, summaries)])
    best = int(np.argmax(surface["gm"].to_numpy()))
    if out_dir:
        _write_atomic(os.path.join(out_dir, "grid.csv"),
                      lambda path: surface.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT))
    logger.info(f"Grid search over {len(points)} points: best beta={points[best][0]}, gamma={points[best][1]}")
    return GridResult(points[best][0], points[best][1], surface)


def _write_atomic(path: str, writer):
    """Write through a temporary file in the same directory, then rename"""
    directory = os.path.dirname(path) or "."
    tmp = None
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
        os.close(fd)
        writer(tmp)
        os.replace(tmp, path)
    except OSError as exc:
        if tmp and os.path.exists(tmp):
            os.remove(tmp)
        raise DataError(f"cannot write {path}: {exc}") from exc


def emit_reports(report: RunReport, directory: str) -> List[str]:
    """
    Write chunks.csv, summary.csv, events.csv and config.echo

    Args:
        report: Finished run
        directory: Output directory

    Returns:
        Paths written
    """
    paths = []

    def csv_writer(frame: pd.DataFrame):
        return lambda path: frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)

    def text_writer(text: str):
        def write(path):
            with open(path, "w") as f:
                f.write(text)
        return write

    summary = pd.DataFrame({"metric": list(report.summary), "value": list(report.summary.values())})
    echo = report.config_echo + "".join(f"# {k} = {v}\n" for k, v in sorted(report.versions.items()))
    outputs = [
        ("chunks.csv", csv_writer(report.chunk_frame())),
        ("summary.csv", csv_writer(summary)),
        ("events.csv", csv_writer(report.event_frame())),
        ("config.echo", text_writer(echo)),
    ]
    for name, writer in outputs:
        path = os.path.join(directory, name)
        _write_atomic(path, writer)
        paths.append(path)
    logger.info(f"Reports saved: {directory}")
    return paths
