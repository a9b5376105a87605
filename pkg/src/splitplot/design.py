"""Cluster-level treatment designs and per-cell size plans.

A design is a list of distinct treatment sequences (0/1 patterns over the
periods), each allocated to one or more clusters. All design summaries are
computed on the cluster-expanded matrix, one row per cluster.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import jsonschema
import numpy as np

from .correlation import CorrelationStructure
from .errors import ValidationError


@dataclass(frozen=True)
class TrialDesign:
    """Treatment sequences over ``periods`` periods with cluster counts.

    Parameters
    ----------
    periods : int
        Number of periods ``T``.
    rows : sequence of (pattern, cluster_count)
        ``pattern`` is a length-``T`` sequence of 0/1 cluster-level treatment
        indicators; ``cluster_count`` is how many clusters follow it.
    name : str, optional
        Label used in reports.
    """

    periods: int
    rows: Tuple[Tuple[Tuple[int, ...], int], ...]
    name: str = ""

    def __post_init__(self):
        T = int(self.periods)
        if T < 1:
            raise ValidationError(f"periods must be >= 1, got {self.periods}")
        rows = []
        for pattern, count in self.rows:
            pattern = tuple(int(v) for v in pattern)
            if len(pattern) != T:
                raise ValidationError(
                    f"pattern {pattern} has length {len(pattern)}, expected {T}")
            if any(v not in (0, 1) for v in pattern):
                raise ValidationError(f"pattern entries must be 0 or 1: {pattern}")
            if int(count) != count or count < 1:
                raise ValidationError(f"cluster count must be an integer >= 1, got {count}")
            rows.append((pattern, int(count)))
        if not rows:
            raise ValidationError("design has no sequences")
        object.__setattr__(self, "periods", T)
        object.__setattr__(self, "rows", tuple(rows))
        if self.n_clusters < 2:
            raise ValidationError("design needs at least 2 clusters")

    @property
    def n_clusters(self):
        return sum(count for _, count in self.rows)

    @property
    def n_sequences(self):
        return len(self.rows)

    @property
    def matrix(self):
        """Cluster-expanded ``n x T`` treatment matrix."""
        return np.array([p for p, count in self.rows for _ in range(count)], dtype=float)

    def replicate(self, k):
        """Design with every sequence allocated to ``k`` times as many clusters."""
        if int(k) != k or k < 1:
            raise ValidationError(f"replication factor must be an integer >= 1, got {k}")
        return TrialDesign(self.periods, tuple((p, c * int(k)) for p, c in self.rows),
                           name=f"{self.name}x{int(k)}" if self.name else "")

    def with_clusters(self, count):
        """Same sequences, ``count`` clusters on each."""
        return TrialDesign(self.periods, tuple((p, int(count)) for p, _ in self.rows),
                           name=self.name)

    @classmethod
    def from_matrix(cls, X, name=""):
        """One cluster per row of a 0/1 matrix."""
        X = np.asarray(X)
        if X.ndim != 2:
            raise ValidationError("treatment matrix must be two-dimensional")
        return cls(X.shape[1], tuple((tuple(row), 1) for row in X.astype(int)), name=name)


@dataclass(frozen=True)
class DesignSummary:
    """Scalar and vector summaries of the cluster-expanded treatment matrix.

    ``B``, ``C`` and ``E`` follow the one-cluster-per-sequence convention:
    ``B`` counts treated cluster-periods, ``C`` sums squared row totals and
    ``E`` sums squared column totals.
    """

    n: int
    T: int
    pi_x: float
    pi_x_cluster: np.ndarray
    pi_xx: float
    pi_x_period: np.ndarray
    B: float
    C: float
    E: float


def summarize(d: TrialDesign) -> DesignSummary:
    X = d.matrix
    n, T = X.shape
    row_tot = X.sum(axis=1)
    col_tot = X.sum(axis=0)
    pi_i = row_tot / T
    return DesignSummary(
        n=n, T=T,
        pi_x=float(X.sum() / (n * T)),
        pi_x_cluster=pi_i,
        pi_xx=float(np.mean(pi_i ** 2)),
        pi_x_period=col_tot / n,
        B=float(X.sum()),
        C=float(np.sum(row_tot ** 2)),
        E=float(np.sum(col_tot ** 2)),
    )


def stepped_wedge(T, clusters=1):
    """Standard stepped wedge: ``T - 1`` sequences, first period all control.

    Sequence ``s`` (1-based) switches to the intervention after period ``s``.
    """
    if int(T) != T or T < 2:
        raise ValidationError(f"stepped wedge needs T >= 2, got {T}")
    T = int(T)
    rows = tuple((tuple(int(j > s) for j in range(1, T + 1)), clusters) for s in range(1, T))
    return TrialDesign(T, rows, name=f"sw:{T}")


def parallel(T, clusters=1):
    """Two constant sequences: all control and all intervention."""
    if int(T) != T or T < 1:
        raise ValidationError(f"parallel design needs T >= 1, got {T}")
    T = int(T)
    return TrialDesign(T, (((0,) * T, clusters), ((1,) * T, clusters)), name=f"parallel:{T}")


def crossover(T, clusters=1):
    """Two-sequence crossover, switching arms halfway through."""
    if int(T) != T or T < 2 or T % 2:
        raise ValidationError(f"crossover design needs an even T >= 2, got {T}")
    T = int(T)
    h = T // 2
    rows = (((0,) * h + (1,) * h, clusters), ((1,) * h + (0,) * h, clusters))
    return TrialDesign(T, rows, name=f"crossover:{T}")


def shares():
    """Hybrid parallel / stepped-wedge design of the SharES trial.

    Six periods; 5 clusters on each constant sequence and 3 clusters on each
    of the 5 stepped-wedge sequences, 25 clusters in total.
    """
    T = 6
    rows = [((0,) * T, 5), ((1,) * T, 5)]
    rows += [(p, 3) for p, _ in stepped_wedge(T).rows]
    return TrialDesign(T, tuple(rows), name="shares")


#: individual-allocation fraction assumed for SharES when none is given
SHARES_DEFAULT_PI_Z = 0.5


def named_design(spec, periods=None, clusters=1):
    """Resolve ``sw:<T>``, ``parallel:<T>``, ``crossover:<T>`` or ``shares``."""
    name, _, arg = str(spec).partition(":")
    name = name.strip().lower()
    if name == "shares":
        if arg or periods not in (None, 6):
            raise ValidationError("the shares design has a fixed layout over 6 periods")
        return shares() if clusters == 1 else shares().replicate(clusters)
    builders = {"sw": stepped_wedge, "stepped_wedge": stepped_wedge,
                "parallel": parallel, "crossover": crossover}
    if name not in builders:
        raise ValidationError(f"unknown design {spec!r}")
    if arg:
        try:
            T = int(arg)
        except ValueError:
            raise ValidationError(f"bad period count in {spec!r}") from None
        if periods is not None and periods != T:
            raise ValidationError(f"{spec!r} conflicts with --periods {periods}")
    elif periods is not None:
        T = periods
    else:
        raise ValidationError(f"design {spec!r} needs a period count")
    return builders[name](T, clusters)


@dataclass(frozen=True)
class CellPlan:
    """Cluster-period sizes and the individual-level allocation fraction.

    Parameters
    ----------
    sizes : ndarray
        ``n x T`` matrix of cell sizes (all >= 1).
    pi_z : float
        Fraction of each cell allocated to the individual-level intervention.
    constant : bool
        True when the plan was specified by a single cell size ``m``.
    """

    sizes: np.ndarray
    pi_z: float
    X: np.ndarray = field(repr=False)
    constant: bool = False

    @property
    def m(self):
        """Common cell size, or None when cell sizes vary."""
        s = self.sizes
        if self.constant or np.all(s == s.flat[0]):
            return int(s.flat[0])
        return None

    @property
    def is_uniform(self):
        return self.m is not None

    @property
    def sigma_z2(self):
        return self.pi_z * (1.0 - self.pi_z)

    @property
    def n_obs(self):
        return int(self.sizes.sum())

    @property
    def n_x1(self):
        return int((self.X * self.sizes).sum())

    @property
    def n_x0(self):
        return int(((1 - self.X) * self.sizes).sum())

    @property
    def treated_counts(self):
        """Number of individuals per cell with the individual-level intervention."""
        return self.pi_z * self.sizes

    @property
    def integral_split(self):
        """True when every cell splits into whole numbers of individuals."""
        k = self.treated_counts
        return bool(np.all(np.abs(k - np.round(k)) < 1e-9))


def cell_plan(d: TrialDesign, sizes, pi_z) -> CellPlan:
    pi_z = float(pi_z)
    if not 0.0 < pi_z < 1.0:
        raise ValidationError(f"pi_z must lie in (0, 1), got {pi_z}")
    X = d.matrix
    arr = np.asarray(sizes)
    constant = arr.ndim == 0
    if constant:
        arr = np.full(X.shape, arr.item())
    if arr.shape != X.shape:
        raise ValidationError(f"cell size matrix has shape {arr.shape}, design needs {X.shape}")
    if np.any(arr != np.round(arr)) or np.any(arr < 1):
        raise ValidationError("cell sizes must be integers >= 1")
    arr = arr.astype(int)
    arr.setflags(write=False)
    return CellPlan(sizes=arr, pi_z=pi_z, X=X, constant=constant)


_DESIGN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["periods", "sequences"],
    "properties": {
        "periods": {"type": "integer", "minimum": 1},
        "sequences": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["pattern", "clusters"],
                "properties": {
                    "pattern": {"type": "array", "items": {"enum": [0, 1]}},
                    "clusters": {"type": "integer", "minimum": 1},
                },
            },
        },
        "cell_size": {"type": "integer", "minimum": 1},
        "cell_sizes": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        },
        "pi_z": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "correlation": {
            "type": "object",
            "additionalProperties": False,
            "required": ["wpicc", "bpicc"],
            "properties": {
                "sigma2": {"type": "number", "exclusiveMinimum": 0},
                "wpicc": {"type": "number"},
                "bpicc": {"type": "number"},
            },
        },
    },
    "not": {"required": ["cell_size", "cell_sizes"]},
}


@dataclass(frozen=True)
class DesignFile:
    """Contents of a design file; optional entries are None when absent."""

    design: TrialDesign
    cell_sizes: Optional[Union[int, np.ndarray]] = None
    pi_z: Optional[float] = None
    correlation: Optional[CorrelationStructure] = None


def parse_design(doc, name="") -> DesignFile:
    """Validate a decoded design document and build its objects."""
    try:
        jsonschema.validate(doc, _DESIGN_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"design file invalid at {where}: {exc.message}") from None
    design = TrialDesign(doc["periods"],
                         tuple((s["pattern"], s["clusters"]) for s in doc["sequences"]),
                         name=name)
    sizes = doc.get("cell_size")
    if "cell_sizes" in doc:
        sizes = np.array(doc["cell_sizes"], dtype=int)
        if sizes.shape != (design.n_clusters, design.periods):
            raise ValidationError(
                f"cell_sizes has shape {sizes.shape}, design needs "
                f"{(design.n_clusters, design.periods)}")
    corr = None
    if "correlation" in doc:
        c = doc["correlation"]
        corr = CorrelationStructure(c.get("sigma2", 1.0), c["wpicc"], c["bpicc"])
    return DesignFile(design, sizes, doc.get("pi_z"), corr)


def load_design(path) -> DesignFile:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from None
    return parse_design(doc, name=path.stem)


def design_to_dict(d: TrialDesign, cell_sizes=None, pi_z=None, corr=None):
    """Inverse of :func:`parse_design`, for writing design files."""
    doc = {"periods": d.periods,
           "sequences": [{"pattern": list(p), "clusters": c} for p, c in d.rows]}
    if cell_sizes is not None:
        if np.ndim(cell_sizes) == 0:
            doc["cell_size"] = int(cell_sizes)
        else:
            doc["cell_sizes"] = np.asarray(cell_sizes, dtype=int).tolist()
    if pi_z is not None:
        doc["pi_z"] = float(pi_z)
    if corr is not None:
        doc["correlation"] = {"sigma2": corr.sigma2_total, "wpicc": corr.wpicc,
                              "bpicc": corr.bpicc}
    return doc
