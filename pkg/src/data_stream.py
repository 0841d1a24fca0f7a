"""
Data Stream - Dataset parsing, chunking, label-noise injection and drift synthesis
"""

import logging
import os
import re
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sp
from sklearn.datasets import dump_svmlight_file, make_multilabel_classification
from sklearn.preprocessing import MultiLabelBinarizer

from src.errors import ConfigurationError, LabelRangeError, ParseError, StateError

logger = logging.getLogger(__name__)

FORMAT_SPARSE = "sparse-multilabel"
FORMAT_DENSE = "dense-csv"
DRIFT_GROWTH = "growth"
DRIFT_REDUCTION = "reduction"

_HEADER = re.compile(r"^#\s*q\s*=\s*(\d+)\s+d\s*=\s*(\d+)(?:\s+n\s*=\s*(\d+))?\s*$")
_LABELS = re.compile(r"^\d+(\.0*)?(,\d+(\.0*)?)*$")
_FEATURE = re.compile(r"^(\d+):([^:\s]+)$")


@dataclass
class Dataset:
    """A full multi-label corpus with bipolar labels"""

    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        if self.features.ndim != 2 or self.labels.ndim != 2:
            raise ParseError("features and labels must be matrices")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ParseError("feature and label row counts differ")
        if self.features.shape[0] < 1 or self.features.shape[1] < 1:
            raise ParseError("dataset needs at least one instance and one feature")
        if self.labels.shape[1] < 2:
            raise ParseError("dataset needs at least two labels")
        if not np.all(np.abs(self.labels) == 1):
            raise ParseError("labels must be -1 or +1")

    @property
    def n_total(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def q(self) -> int:
        return self.labels.shape[1]


@dataclass
class DataChunk:
    """One batch of the stream"""

    features: np.ndarray
    observed_labels: np.ndarray
    truth_labels: Optional[np.ndarray]
    index: int

    @property
    def size(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class NoiseSpec:
    """Per-label flip rates: rho_plus for true relevant, rho_minus for true irrelevant"""

    rho_plus: np.ndarray
    rho_minus: np.ndarray

    def __post_init__(self):
        rho_plus = np.asarray(self.rho_plus, dtype=float)
        rho_minus = np.asarray(self.rho_minus, dtype=float)
        if rho_plus.shape != rho_minus.shape or rho_plus.ndim != 1:
            raise ConfigurationError("noise rates must be two vectors of equal length")
        if np.any(rho_plus < 0) or np.any(rho_minus < 0) or np.any(rho_plus >= 1) or np.any(rho_minus >= 1):
            raise ConfigurationError("noise rates must lie in [0, 1)")
        if np.any(rho_plus + rho_minus >= 1):
            raise ConfigurationError("rho_plus + rho_minus must stay below 1 for every label")
        object.__setattr__(self, "rho_plus", rho_plus)
        object.__setattr__(self, "rho_minus", rho_minus)

    @property
    def q(self) -> int:
        return self.rho_plus.shape[0]

    @classmethod
    def clean(cls, q: int) -> "NoiseSpec":
        """Zero noise on every label"""
        return cls(np.zeros(q), np.zeros(q))


def parse_dataset(path: str, format: str = FORMAT_SPARSE) -> Dataset:
    """
    Parse a dataset file

    Args:
        path: File to read
        format: sparse-multilabel or dense-csv

    Returns:
        Dataset with bipolar labels
    """
    if not os.path.exists(path):
        raise ParseError(f"dataset file not found: {path}")
    name = os.path.splitext(os.path.basename(path))[0]
    if format == FORMAT_SPARSE:
        return _parse_sparse(path, name)
    if format == FORMAT_DENSE:
        return _parse_dense(path, name)
    raise ConfigurationError(f"unknown dataset format: {format}")


def _parse_sparse(path: str, name: str) -> Dataset:
    """Validate each instance line and assemble the feature matrix from its tokens"""
    q = d = declared = None
    label_sets: List[List[int]] = []
    rows: List[int] = []
    cols: List[int] = []
    values: List[float] = []
    with open(path, "r") as f:
        for line_number, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                match = _HEADER.match(line)
                if match and q is None:
                    q, d = int(match.group(1)), int(match.group(2))
                    declared = int(match.group(3)) if match.group(3) else None
                continue
            if q is None:
                raise ParseError("missing '#q=<q> d=<d>' header before the first instance", line_number)
            labels, entries = _parse_sparse_line(line.split("#")[0].split(), q, d, line_number)
            row = len(label_sets)
            label_sets.append(labels)
            for index, value in entries:
                rows.append(row)
                cols.append(index - 1)
                values.append(value)

    n_rows = len(label_sets)
    if q is None:
        raise ParseError("empty file or missing '#q=<q> d=<d>' header", 1)
    if n_rows == 0:
        raise ParseError("no instances after header")
    if declared is not None and declared != n_rows:
        raise ParseError(f"header declares {declared} instances, file holds {n_rows}")

    X = sp.csr_matrix((values, (rows, cols)), shape=(n_rows, d), dtype=float)
    binarizer = MultiLabelBinarizer(classes=list(range(q)))
    indicator = binarizer.fit_transform(label_sets)
    logger.info(f"Dataset loaded: {path} ({n_rows} instances, d={d}, q={q})")
    return Dataset(X.toarray(), 2.0 * indicator - 1.0, name)


def _parse_sparse_line(tokens: List[str], q: int, d: int,
                      line_number: int) -> Tuple[List[int], List[Tuple[int, float]]]:
    """Labels and (index, value) entries of one instance line, in file order"""
    labels: List[int] = []
    if not tokens:
        return labels, []
    feature_tokens = tokens
    if ":" not in tokens[0]:
        if not _LABELS.match(tokens[0]):
            raise ParseError(f"bad label list '{tokens[0]}'", line_number)
        for label in tokens[0].split(","):
            if int(float(label)) >= q:
                raise LabelRangeError(f"line {line_number}: label index {label} >= q={q}")
            labels.append(int(float(label)))
        feature_tokens = tokens[1:]
    entries: List[Tuple[int, float]] = []
    seen = set()
    for token in feature_tokens:
        match = _FEATURE.match(token)
        if not match:
            raise ParseError(f"bad feature token '{token}'", line_number)
        index = int(match.group(1))
        if index < 1 or index > d:
            raise ParseError(f"feature index {index} outside 1..{d}", line_number)
        if index in seen:
            raise ParseError(f"duplicate feature index {index}", line_number)
        seen.add(index)
        try:
            value = float(match.group(2))
        except ValueError:
            raise ParseError(f"feature value '{match.group(2)}' is not a number", line_number)
        if not np.isfinite(value):
            raise ParseError(f"feature value '{match.group(2)}' is not finite", line_number)
        entries.append((index, value))
    return labels, entries


def _parse_dense(path: str, name: str) -> Dataset:
    """Dense CSV: columns f1..fd then l1..lq, labels in {0,1}"""
    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError as exc:
        raise ParseError("empty file", 1) from exc
    except pd.errors.ParserError as exc:
        raise ParseError(f"malformed CSV: {exc}") from exc

    feature_cols = [c for c in frame.columns if re.fullmatch(r"f\d+", str(c))]
    label_cols = [c for c in frame.columns if re.fullmatch(r"l\d+", str(c))]
    if not feature_cols or len(label_cols) < 2 or len(feature_cols) + len(label_cols) != len(frame.columns):
        raise ParseError("header must be f1..fd,l1..lq", 1)
    if frame.empty:
        raise ParseError("no instances after header")

    features = frame[feature_cols].apply(pd.to_numeric, errors="coerce")
    bad_rows = ~np.isfinite(features.to_numpy(dtype=float)).all(axis=1)
    if bad_rows.any():
        # header is line 1
        raise ParseError("non-numeric or non-finite feature value", int(np.argmax(bad_rows)) + 2)
    labels = frame[label_cols].apply(pd.to_numeric, errors="coerce")
    bad_labels = ~labels.isin([0, 1]).all(axis=1)
    if bad_labels.any():
        raise ParseError("labels must be 0 or 1", int(np.argmax(bad_labels.values)) + 2)

    logger.info(f"Dataset loaded: {path} ({len(frame)} instances, d={len(feature_cols)}, q={len(label_cols)})")
    return Dataset(features.to_numpy(dtype=float), 2.0 * labels.to_numpy(dtype=float) - 1.0, name)


def write_dataset(ds: Dataset, path: str, format: str = FORMAT_SPARSE):
    """
    Write a dataset in either supported format

    Args:
        ds: Dataset to write
        path: Destination file
        format: sparse-multilabel or dense-csv
    """
    indicator = (ds.labels > 0).astype(int)
    if format == FORMAT_SPARSE:
        dump_svmlight_file(ds.features, indicator, path, zero_based=False, multilabel=True,
                           comment=f"q={ds.q} d={ds.d} n={ds.n_total}")
    elif format == FORMAT_DENSE:
        columns = {f"f{i + 1}": ds.features[:, i] for i in range(ds.d)}
        columns.update({f"l{j + 1}": indicator[:, j] for j in range(ds.q)})
        pd.DataFrame(columns).to_csv(path, index=False, float_format="%.17g")
    else:
        raise ConfigurationError(f"unknown dataset format: {format}")
    logger.info(f"Dataset saved: {path}")


def make_synthetic_dataset(n: int, d: int, q: int, mean_cardinality: int = 2, seed: int = 0) -> Dataset:
    """
    Generate a multi-label corpus with scikit-learn's multilabel generator

    Args:
        n: Number of instances
        d: Feature dimension
        q: Number of labels
        mean_cardinality: Average number of relevant labels per instance
        seed: Generator seed

    Returns:
        Dataset with every instance carrying at least one relevant label
    """
    X, Y = make_multilabel_classification(n_samples=n, n_features=d, n_classes=q, n_labels=int(mean_cardinality),
                                          allow_unlabeled=False, random_state=seed)
    return Dataset(X.astype(float), 2.0 * Y - 1.0, f"synthetic_q{q}_d{d}")


def chunk_stream(ds: Dataset, N: int, seed: int, has_truth: bool = True) -> List[DataChunk]:
    """
    Permute the dataset and cut it into equal chunks

    Datasets produced by synthesize_drift are permuted on each side of the
    change point only, so the change still lands at the split.

    Args:
        ds: Source dataset
        N: Chunk size
        seed: Permutation seed
        has_truth: Keep the dataset labels as ground truth on each chunk

    Returns:
        Chunks in stream order; chunk 0 initializes the model
    """
    if N < 1:
        raise ConfigurationError(f"chunk size must be positive, got {N}")
    if ds.n_total < 2 * N:
        raise ConfigurationError(f"need at least 2N={2 * N} instances, dataset has {ds.n_total}")

    rng = np.random.default_rng(seed)
    cut = ds.metadata.get("drift_cut")
    if cut is None:
        order = rng.permutation(ds.n_total)
    else:
        # shuffle each side separately so the change stays at the cut
        order = np.concatenate([rng.permutation(cut), cut + rng.permutation(ds.n_total - cut)])
    n_chunks = ds.n_total // N
    dropped = ds.n_total - n_chunks * N
    if dropped:
        logger.debug(f"Dropping {dropped} trailing instances that do not fill a chunk")

    chunks = []
    for i in range(n_chunks):
        rows = order[i * N:(i + 1) * N]
        labels = ds.labels[rows]
        chunks.append(DataChunk(ds.features[rows], labels.copy(), labels.copy() if has_truth else None, i))
    return chunks


def sample_noise_spec(q: int, lo: float, hi: float, seed: int) -> NoiseSpec:
    """
    Draw per-label flip rates uniformly on [lo, hi]

    Args:
        q: Number of labels
        lo, hi: Rate range; hi + hi must stay below 1
        seed: Generator seed

    Returns:
        NoiseSpec
    """
    if q < 1:
        raise ConfigurationError(f"q must be positive, got {q}")
    if not 0 <= lo <= hi:
        raise ConfigurationError(f"noise range needs 0 <= lo <= hi, got [{lo}, {hi}]")
    if hi + hi >= 1:
        raise ConfigurationError(f"noise upper bound {hi} allows rho_plus + rho_minus >= 1")
    rng = np.random.default_rng(seed)
    return NoiseSpec(rng.uniform(lo, hi, size=q), rng.uniform(lo, hi, size=q))


def inject_noise(chunk: DataChunk, spec: NoiseSpec, seed: int) -> DataChunk:
    """
    Flip ground-truth labels independently per entry

    Args:
        chunk: Chunk carrying truth labels
        spec: Flip rates
        seed: Generator seed

    Returns:
        New chunk whose observed labels are the noisy truth
    """
    if chunk.truth_labels is None:
        raise StateError(f"chunk {chunk.index} has no ground-truth labels to corrupt")
    truth = chunk.truth_labels
    if truth.shape[1] != spec.q:
        raise ConfigurationError(f"noise spec covers {spec.q} labels, chunk has {truth.shape[1]}")

    rates = np.where(truth > 0, spec.rho_plus[None, :], spec.rho_minus[None, :])
    flips = np.random.default_rng(seed).random(truth.shape) < rates
    observed = np.where(flips, -truth, truth)
    return replace(chunk, observed_labels=observed, truth_labels=truth.copy())


def synthesize_drift(ds: Dataset, mode: str, split: float, seed: int = 0) -> Dataset:
    """
    Turn one side of the split into a single-label regime

    Args:
        ds: Dataset with full ground-truth label sets
        mode: growth (single-label first) or reduction (single-label last)
        split: Fraction of instances before the change point
        seed: Seed for choosing the surviving label

    Returns:
        Dataset in the original order with the change at the split
    """
    if mode not in (DRIFT_GROWTH, DRIFT_REDUCTION):
        raise ConfigurationError(f"unknown drift mode: {mode}")
    if not 0 < split < 1:
        raise ConfigurationError(f"drift split must lie in (0, 1), got {split}")

    cut = int(ds.n_total * split)
    rows = range(cut) if mode == DRIFT_GROWTH else range(cut, ds.n_total)
    labels = ds.labels.copy()
    rng = np.random.default_rng(seed)
    unchanged = 0
    for t in rows:
        relevant = np.flatnonzero(labels[t] > 0)
        if relevant.size == 0:
            unchanged += 1
            continue
        keep = rng.choice(relevant)
        labels[t] = -1.0
        labels[t, keep] = 1.0

    if unchanged:
        logger.warning(f"Drift synthesis kept {unchanged} instances without relevant labels unchanged")
    suffix = "_a" if mode == DRIFT_GROWTH else "_d"
    metadata = dict(ds.metadata, drift_mode=mode, drift_split=split, drift_cut=cut, drift_unchanged=unchanged)
    return Dataset(ds.features.copy(), labels, ds.name + suffix, metadata)
