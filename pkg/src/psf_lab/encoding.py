"""Multi-resolution hash grids with optional per-level rotations.

Each level scales the (optionally rotated) query into its own grid, gathers
the 2^D cell-corner features through a spatial hash, and blends them with
multilinear interpolation.  Per-level rotations decorrelate the grid axes
across levels; the hash makes the memory footprint independent of resolution
at the cost of collisions, which are auditable exactly by enumeration.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .kernels import LevelSchedule

# One prime per axis, XOR-combined; the first is 1 so that 1D stretches of
# vertices map to consecutive buckets before wrap-around.
HASH_PRIMES = np.array([1, 2654435761, 805459861], dtype=np.int64)

# Feature tables start near zero so an untrained field is near zero.
INIT_SCALE = 1e-4

# Rotations are applied about the center of the unit domain.
DOMAIN_CENTER = 0.5

ROTATION_KINDS = ("identity", "progressive2d", "polyhedral3d")
POLYHEDRA = ("tetra", "cube", "octa", "icosa")

_PHI = (1.0 + np.sqrt(5.0)) / 2.0

POLYHEDRON_VERTICES = {
    "tetra": np.array([(1, 1, 1), (-1, -1, 1), (-1, 1, -1), (1, -1, -1)], dtype=np.float64),
    # unit cube corners in lexicographic order
    "cube": np.array(
        [(x, y, z) for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=np.float64
    ),
    "octa": np.array(
        [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)], dtype=np.float64
    ),
    "icosa": np.array(
        [(0, s1, s2 * _PHI) for s1 in (1, -1) for s2 in (1, -1)]
        + [(s1, s2 * _PHI, 0) for s1 in (1, -1) for s2 in (1, -1)]
        + [(s1 * _PHI, 0, s2) for s1 in (1, -1) for s2 in (1, -1)],
        dtype=np.float64,
    ),
}


class AuditBudgetExceeded(RuntimeError):
    """Raised when a collision audit would enumerate more vertices than allowed."""


def spatial_hash(vertices, table_size: int):
    """Hash integer grid vertices into [0, table_size).

    XOR of per-axis coordinate * prime, reduced modulo the table size.
    Defined for all integers, including the negative coordinates produced by
    rotated queries; the result is always non-negative.
    """
    if table_size < 1:
        raise ValueError(f"table_size must be >= 1, got {table_size}")
    v = np.asarray(vertices, dtype=np.int64)
    if v.ndim == 0 or v.shape[-1] > len(HASH_PRIMES):
        raise ValueError(f"vertices must have a last axis of size 1..{len(HASH_PRIMES)}")
    h = v[..., 0] * HASH_PRIMES[0]
    for d in range(1, v.shape[-1]):
        h = h ^ (v[..., d] * HASH_PRIMES[d])
    return h % table_size


def corner_offsets(dim: int) -> np.ndarray:
    """Binary offsets of the 2^dim corners of a unit cell, shape (2^dim, dim)."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    return np.array(
        [[(c >> (dim - 1 - d)) & 1 for d in range(dim)] for c in range(2**dim)], dtype=np.int64
    )


def corner_weights(x_scaled):
    """Cell corners and multilinear weights for scaled coordinates.

    ``x_scaled`` has shape (..., dim).  Returns integer corners of shape
    (..., 2^dim, dim) and non-negative weights of shape (..., 2^dim) that sum
    to one (each axis weight is the linear hat 1-f / f at the cell fraction f).
    """
    x = np.asarray(x_scaled, dtype=np.float64)
    dim = x.shape[-1]
    base = np.floor(x).astype(np.int64)
    frac = x - base
    offs = corner_offsets(dim)
    corners = base[..., None, :] + offs
    w = np.prod(np.where(offs == 1, frac[..., None, :], 1.0 - frac[..., None, :]), axis=-1)
    return corners, w


@dataclass(frozen=True)
class Rotation:
    """Per-level rotation strategy for a hash grid."""

    kind: str = "identity"
    m: int = 1
    solid: str = "icosa"

    def __post_init__(self):
        if self.kind not in ROTATION_KINDS:
            raise ValueError(f"unknown rotation kind {self.kind!r}; expected one of {ROTATION_KINDS}")
        if self.kind == "progressive2d" and self.m < 1:
            raise ValueError(f"progressive2d requires m >= 1, got {self.m}")
        if self.kind == "polyhedral3d" and self.solid not in POLYHEDRA:
            raise ValueError(f"unknown solid {self.solid!r}; expected one of {POLYHEDRA}")

    @classmethod
    def identity(cls) -> "Rotation":
        return cls("identity")

    @classmethod
    def progressive(cls, m: int) -> "Rotation":
        return cls("progressive2d", m=m)

    @classmethod
    def polyhedral(cls, solid: str) -> "Rotation":
        return cls("polyhedral3d", solid=solid)


def _frame_from_axis(v: np.ndarray) -> np.ndarray:
    """Right-handed orthonormal frame whose first column is the unit vector v.

    The remaining axes come from Gram-Schmidt against the fixed helper
    (0, 0, 1), falling back to (0, 1, 0) when v is nearly parallel to it.
    """
    v = v / np.linalg.norm(v)
    helper = np.array([0.0, 0.0, 1.0])
    if abs(np.dot(helper, v)) > 1.0 - 1e-6:
        helper = np.array([0.0, 1.0, 0.0])
    u2 = helper - np.dot(helper, v) * v
    u2 /= np.linalg.norm(u2)
    u3 = np.cross(v, u2)
    return np.column_stack([v, u2, u3])


def rotation_matrices(rotation: Rotation, n_levels: int, dim: int) -> np.ndarray:
    """Materialize one rotation matrix per level, shape (n_levels, dim, dim).

    progressive2d: level l rotates by l * (90 degrees / m).
    polyhedral3d: level l maps the first basis axis onto vertex direction
    l mod V of the chosen solid.
    All outputs are orthonormal with determinant +1.
    """
    if rotation.kind == "identity":
        return np.broadcast_to(np.eye(dim), (n_levels, dim, dim)).copy()
    if rotation.kind == "progressive2d":
        if dim != 2:
            raise ValueError(f"progressive2d requires dim=2, got dim={dim}")
        theta = (np.pi / 2.0) / rotation.m
        out = np.empty((n_levels, 2, 2))
        for l in range(n_levels):
            c, s = np.cos(l * theta), np.sin(l * theta)
            out[l] = [[c, -s], [s, c]]
        return out
    if dim != 3:
        raise ValueError(f"polyhedral3d requires dim=3, got dim={dim}")
    verts = POLYHEDRON_VERTICES[rotation.solid]
    out = np.empty((n_levels, 3, 3))
    for l in range(n_levels):
        out[l] = _frame_from_axis(verts[l % len(verts)])
    return out


@dataclass(frozen=True)
class EncodingConfig:
    """Static description of a multi-resolution hash grid."""

    dim: int = 2
    n_levels: int = 10
    n_min: float = 16.0
    growth: float = 1.5
    table_size: int = 2**16
    n_features: int = 2
    rotation: Rotation = field(default_factory=Rotation.identity)
    seed: int = 0

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.n_levels < 1:
            raise ValueError(f"n_levels must be >= 1, got {self.n_levels}")
        if self.n_min <= 0:
            raise ValueError(f"n_min must be positive, got {self.n_min}")
        if self.n_levels > 1 and self.growth <= 1.0:
            raise ValueError(f"growth must exceed 1 when n_levels > 1, got {self.growth}")
        if self.growth <= 0:
            raise ValueError(f"growth must be positive, got {self.growth}")
        if self.table_size < 1:
            raise ValueError(f"table_size must be >= 1, got {self.table_size}")
        if self.n_features < 1:
            raise ValueError(f"n_features must be >= 1, got {self.n_features}")
        if self.rotation.kind == "progressive2d" and self.dim != 2:
            raise ValueError("progressive2d rotations require dim=2")
        if self.rotation.kind == "polyhedral3d" and self.dim != 3:
            raise ValueError("polyhedral3d rotations require dim=3")
        if self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed}")

    @property
    def schedule(self) -> LevelSchedule:
        return LevelSchedule(self.n_levels, self.n_min, self.growth)

    @property
    def n_outputs(self) -> int:
        return self.n_levels * self.n_features


@dataclass
class HashGrid:
    """An encoding config materialized with feature tables and rotations."""

    config: EncodingConfig
    tables: list  # n_levels arrays of shape (table_size, n_features)
    resolutions: np.ndarray
    rotations: np.ndarray


def build_grid(config: EncodingConfig, rng: np.random.Generator | None = None) -> HashGrid:
    """Allocate a grid with tables drawn uniformly from [-1e-4, 1e-4].

    The same config (or the same explicitly passed generator state) yields
    bit-identical tables.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    tables = [
        rng.uniform(-INIT_SCALE, INIT_SCALE, size=(config.table_size, config.n_features))
        for _ in range(config.n_levels)
    ]
    return HashGrid(
        config=config,
        tables=tables,
        resolutions=config.schedule.resolutions,
        rotations=rotation_matrices(config.rotation, config.n_levels, config.dim),
    )


def _level_scaled(grid: HashGrid, x: np.ndarray, level: int) -> np.ndarray:
    """Rotate ``x`` about the domain center and scale into level coordinates."""
    r = grid.rotations[level]
    if grid.config.rotation.kind == "identity":
        y = x
    else:
        y = (x - DOMAIN_CENTER) @ r.T + DOMAIN_CENTER
    return y * grid.resolutions[level]


def encode(grid: HashGrid, x):
    """Encode points into concatenated per-level features.

    ``x`` has shape (dim,) or (n, dim); the result has shape (n_outputs,) or
    (n, n_outputs).  Coordinates are not clamped: rotated queries may leave
    the unit domain and simply hash whatever vertices they touch.
    """
    cfg = grid.config
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != cfg.dim:
        raise ValueError(f"expected points of dimension {cfg.dim}, got {pts.shape[1]}")
    out = np.empty((pts.shape[0], cfg.n_outputs))
    for l in range(cfg.n_levels):
        corners, w = corner_weights(_level_scaled(grid, pts, l))
        idx = spatial_hash(corners, cfg.table_size)
        feats = np.einsum("nc,ncf->nf", w, grid.tables[l][idx])
        out[:, l * cfg.n_features : (l + 1) * cfg.n_features] = feats
    return out[0] if single else out


def point_support(grid: HashGrid, x) -> list:
    """Per-level gather plan for a single point.

    Returns one ``(table_indices, weights)`` pair per level, each of length
    2^dim.  Hash-colliding corners keep separate entries with the same index.
    """
    cfg = grid.config
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (cfg.dim,):
        raise ValueError(f"expected a single point of shape ({cfg.dim},), got {x.shape}")
    out = []
    for l in range(cfg.n_levels):
        corners, w = corner_weights(_level_scaled(grid, x[None, :], l))
        idx = spatial_hash(corners, cfg.table_size)
        out.append((idx[0], w[0]))
    return out


def encode_support(grid: HashGrid, x) -> list:
    """Sparse view of one encoded point: (level, table index, feature column, weight).

    Summing ``weight * tables[level][index, column]`` over entries that share
    (level, column) reproduces ``encode(grid, x)`` coordinate by coordinate.
    """
    entries = []
    for l, (idx, w) in enumerate(point_support(grid, x)):
        for i, wi in zip(idx.tolist(), w.tolist()):
            for j in range(grid.config.n_features):
                entries.append((l, i, j, wi))
    return entries


@dataclass(frozen=True)
class CollisionAudit:
    """Exact per-level hash-collision statistics over the touched vertex set."""

    table_size: int
    vertex_count: np.ndarray  # touched grid vertices per level
    load_factor: np.ndarray  # vertex_count / table_size, may exceed 1
    colliding_fraction: np.ndarray  # fraction of touched vertices sharing a bucket

    @property
    def total_load_factor(self) -> float:
        """Touched vertices across all levels per table slot."""
        return float(np.sum(self.vertex_count) / self.table_size)

    @property
    def overall_colliding_fraction(self) -> float:
        """Colliding fraction over the union of levels, vertex-weighted."""
        return float(np.sum(self.colliding_fraction * self.vertex_count) / np.sum(self.vertex_count))


def audit_collisions(config: EncodingConfig, budget: int = 50_000_000) -> CollisionAudit:
    """Enumerate every vertex each level can touch from the unit domain and hash it.

    The touched set per level covers the axis-aligned bounding box of the
    rotated domain, extended one vertex past the floor on the upper side
    (interpolation touches both cell ends).  Raises ``AuditBudgetExceeded``
    if the total enumeration would exceed ``budget`` vertices.
    """
    grid = build_grid(replace(config, seed=config.seed))
    cube = corner_offsets(config.dim).astype(np.float64)
    counts, loads, colls = [], [], []
    spent = 0
    for l in range(config.n_levels):
        y = _level_scaled(grid, cube, l)
        lo = np.floor(y.min(axis=0)).astype(np.int64)
        hi = np.floor(y.max(axis=0)).astype(np.int64) + 1
        per_axis = hi - lo + 1
        total = int(np.prod(per_axis.astype(np.float64)))
        spent += total
        if spent > budget:
            raise AuditBudgetExceeded(
                f"level {l} needs {total} vertices ({spent} cumulative), budget is {budget}"
            )
        axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        verts = np.stack([m.ravel() for m in mesh], axis=-1)
        h = spatial_hash(verts, config.table_size)
        _, bucket_counts = np.unique(h, return_counts=True)
        singletons = int(np.sum(bucket_counts == 1))
        counts.append(total)
        loads.append(total / config.table_size)
        colls.append(0.0 if total <= 1 else (total - singletons) / total)
    return CollisionAudit(
        table_size=config.table_size,
        vertex_count=np.array(counts),
        load_factor=np.array(loads),
        colliding_fraction=np.array(colls),
    )


# ---------------------------------------------------------------------------
# Binary serialization
# ---------------------------------------------------------------------------

_MAGIC = b"MHG1"
_HEADER = struct.Struct("<4sHBBIIQddIQ")  # magic, version, dim, rot kind, L, F, T, n_min, growth, rot param, seed
_FORMAT_VERSION = 1

_ROT_CODES = {k: i for i, k in enumerate(ROTATION_KINDS)}
_SOLID_CODES = {s: i for i, s in enumerate(POLYHEDRA)}


def save_grid(grid: HashGrid, path) -> None:
    """Write a grid to ``path``: packed little-endian header, then the feature
    tables level-major in row-major float32."""
    cfg = grid.config
    rot_param = cfg.rotation.m if cfg.rotation.kind == "progressive2d" else _SOLID_CODES[cfg.rotation.solid]
    header = _HEADER.pack(
        _MAGIC,
        _FORMAT_VERSION,
        cfg.dim,
        _ROT_CODES[cfg.rotation.kind],
        cfg.n_levels,
        cfg.n_features,
        cfg.table_size,
        cfg.n_min,
        cfg.growth,
        rot_param,
        cfg.seed,
    )
    with open(path, "wb") as f:
        f.write(header)
        for table in grid.tables:
            f.write(np.ascontiguousarray(table, dtype=np.float32).tobytes())


def load_grid(path) -> HashGrid:
    """Read a grid written by ``save_grid``.  Tables round-trip at float32."""
    with open(path, "rb") as f:
        raw = f.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, dim, rot_code, n_levels, n_features, table_size, n_min, growth, rot_param, seed = _HEADER.unpack(raw)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a hash grid file (bad magic {magic!r})")
        if version != _FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        kind = ROTATION_KINDS[rot_code]
        if kind == "progressive2d":
            rotation = Rotation.progressive(rot_param)
        elif kind == "polyhedral3d":
            rotation = Rotation.polyhedral(POLYHEDRA[rot_param])
        else:
            rotation = Rotation.identity()
        config = EncodingConfig(
            dim=dim,
            n_levels=n_levels,
            n_min=n_min,
            growth=growth,
            table_size=table_size,
            n_features=n_features,
            rotation=rotation,
            seed=seed,
        )
        tables = []
        count = table_size * n_features
        for _ in range(n_levels):
            buf = f.read(4 * count)
            if len(buf) < 4 * count:
                raise ValueError(f"{path}: truncated table payload")
            tables.append(
                np.frombuffer(buf, dtype=np.float32).astype(np.float64).reshape(table_size, n_features)
            )
    grid = build_grid(config)
    grid.tables = tables
    return grid


# ---------------------------------------------------------------------------
# Estimator facade
# ---------------------------------------------------------------------------


class HashGridEncoder(BaseEstimator, TransformerMixin):
    """Transformer producing multi-resolution hash features for points in [0, 1]^d.

    ``fit`` infers the dimension from the data and materializes the grid;
    ``transform`` returns the concatenated per-level features.
    """

    def __init__(
        self,
        n_levels=10,
        n_min=16.0,
        growth=1.5,
        table_size=2**16,
        n_features=2,
        rotation="identity",
        rotation_m=1,
        rotation_solid="icosa",
        seed=0,
    ):
        self.n_levels = n_levels
        self.n_min = n_min
        self.growth = growth
        self.table_size = table_size
        self.n_features = n_features
        self.rotation = rotation
        self.rotation_m = rotation_m
        self.rotation_solid = rotation_solid
        self.seed = seed

    def _rotation(self) -> Rotation:
        return Rotation(self.rotation, m=self.rotation_m, solid=self.rotation_solid)

    def _validate_points(self, X, dim=None):
        X = check_array(X, dtype=np.float64, ensure_2d=True)
        if dim is not None and X.shape[1] != dim:
            raise ValueError(f"expected {dim}-dimensional points, got {X.shape[1]}")
        if X.shape[1] not in (2, 3):
            raise ValueError(f"points must be 2D or 3D, got dimension {X.shape[1]}")
        if X.min() < -1e-9 or X.max() > 1.0 + 1e-9:
            raise ValueError("points must lie in the unit cube [0, 1]^d")
        return X

    def fit(self, X, y=None):
        X = self._validate_points(X)
        self.config_ = EncodingConfig(
            dim=X.shape[1],
            n_levels=self.n_levels,
            n_min=self.n_min,
            growth=self.growth,
            table_size=self.table_size,
            n_features=self.n_features,
            rotation=self._rotation(),
            seed=self.seed,
        )
        self.grid_ = build_grid(self.config_)
        self.n_features_in_ = X.shape[1]
        self.n_output_features_ = self.config_.n_outputs
        return self

    def transform(self, X):
        if not hasattr(self, "grid_"):
            raise RuntimeError("HashGridEncoder must be fitted before calling transform")
        X = self._validate_points(X, dim=self.config_.dim)
        return encode(self.grid_, X)
