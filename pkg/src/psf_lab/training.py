"""Training scalar/RGB fields on hash-grid features with native optimizers.

Two engines share the same forward/backward code: a sparse engine for a
handful of fixed point constraints (only the touched table rows become
optimizer parameters) and a dense engine for pixel-batch image regression.
Gradients are analytic throughout; there is no autodiff dependency.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array

from .encoding import EncodingConfig, HashGrid, build_grid, corner_weights, encode, spatial_hash, _level_scaled

OPTIMIZER_KINDS = ("adam", "sgd", "rmsprop")


class TrainingDiverged(RuntimeError):
    """Raised when the loss blows past the divergence guard."""


DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class DecoderSpec:
    """MLP head mapping concatenated level features to field values.

    ``depth`` counts hidden ReLU layers; depth 0 is a plain linear read-out.
    Biases are off by default: a trainable constant offset is a degenerate
    direction for localized targets (the optimizer grows it into a uniform
    background that has nothing to do with the encoding), and bias-free
    heads are the norm for hash-encoded fields.
    """

    depth: int = 0
    width: int = 64
    out_dim: int = 1
    bias: bool = False

    def __post_init__(self):
        if not 0 <= self.depth <= 3:
            raise ValueError(f"depth must be in 0..3, got {self.depth}")
        if self.width < 1:
            raise ValueError(f"width must be >= 1, got {self.width}")
        if self.out_dim < 1:
            raise ValueError(f"out_dim must be >= 1, got {self.out_dim}")


@dataclass(frozen=True)
class OptimizerSpec:
    """First-order optimizer choice with its hyperparameters and step budget.

    ``decay="cosine"`` anneals the learning rate to zero over the step budget;
    stochastic-batch runs never settle at a fixed lr, so annealing is the
    difference between a converged final loss and sampling the churn.
    """

    kind: str = "adam"
    lr: float = 1e-2
    n_steps: int = 2000
    beta1: float = 0.9
    beta2: float = 0.999  # also the square-average decay for rmsprop
    eps: float = 1e-8
    momentum: float = 0.0
    decay: str = "none"

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise ValueError(f"unknown optimizer {self.kind!r}; expected one of {OPTIMIZER_KINDS}")
        if self.lr < 0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")
        if self.n_steps < 0:
            raise ValueError(f"n_steps must be >= 0, got {self.n_steps}")
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.decay not in ("none", "cosine"):
            raise ValueError(f"unknown decay {self.decay!r}; expected 'none' or 'cosine'")

    def at_step(self, step: int) -> "OptimizerSpec":
        """The spec with the learning rate scheduled for ``step`` (0-based)."""
        if self.decay == "none":
            return self
        scale = 0.5 * (1.0 + np.cos(np.pi * step / max(1, self.n_steps)))
        return replace(self, lr=self.lr * scale)


@dataclass(frozen=True)
class Constraint:
    """A target amplitude at a fixed point strictly inside the unit domain."""

    point: tuple
    amplitude: float

    def __post_init__(self):
        p = np.asarray(self.point, dtype=np.float64)
        if p.ndim != 1 or not np.all((p > 0.0) & (p < 1.0)):
            raise ValueError(f"constraint point must lie strictly inside (0, 1)^d, got {self.point}")


@dataclass
class FieldModel:
    """A hash grid plus decoder layers; layers are (weight, bias) array pairs.

    Bias arrays exist even for bias-free decoders (held at zero and excluded
    from training) so forward/backward code has one shape.
    """

    grid: HashGrid
    decoder: DecoderSpec
    layers: list

    def trainable_layer_arrays(self) -> list:
        if self.decoder.bias:
            return [arr for layer in self.layers for arr in layer]
        return [layer[0] for layer in self.layers]


def init_model(config: EncodingConfig, decoder: DecoderSpec, seed: int | None = None) -> FieldModel:
    """Seeded model: near-zero tables, He-scaled decoder from the same stream."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    grid = build_grid(config, rng)
    sizes = [config.n_outputs] + [decoder.width] * decoder.depth + [decoder.out_dim]
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
        layers.append([w, np.zeros(fan_out)])
    return FieldModel(grid=grid, decoder=decoder, layers=layers)


def _decoder_forward(layers, e):
    """Forward pass caching pre-activations for the backward pass."""
    h = e
    pre, acts = [], [e]
    for w, b in layers[:-1]:
        z = h @ w.T + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    w, b = layers[-1]
    return h @ w.T + b, (pre, acts)


def _decoder_backward(layers, cache, dout):
    """Gradients for every layer plus the gradient w.r.t. the input features."""
    pre, acts = cache
    grads = [None] * len(layers)
    w_last, _ = layers[-1]
    grads[-1] = (dout.T @ acts[-1], dout.sum(axis=0))
    dh = dout @ w_last
    for i in range(len(layers) - 2, -1, -1):
        dz = dh * (pre[i] > 0)
        grads[i] = (dz.T @ acts[i], dz.sum(axis=0))
        dh = dz @ layers[i][0]
    return grads, dh


def forward(model: FieldModel, x, chunk: int = 65536):
    """Field values at points ``x`` of shape (dim,) or (n, dim).

    Scalar decoders return shape (n,) (or a float for a single point).
    """
    pts = np.asarray(x, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    outs = []
    for i in range(0, pts.shape[0], chunk):
        e = encode(model.grid, pts[i : i + chunk])
        out, _ = _decoder_forward(model.layers, e)
        outs.append(out)
    out = np.concatenate(outs, axis=0)
    if model.decoder.out_dim == 1:
        out = out[:, 0]
    if single:
        return float(out[0]) if out.ndim == 1 else out[0]
    return out


def field_fn(model: FieldModel) -> Callable:
    """The model as a plain ``points -> values`` callable."""
    return lambda x: forward(model, x)


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------


def init_opt_state(spec: OptimizerSpec, params: list) -> dict:
    state = {"t": 0}
    if spec.kind == "adam":
        state["m"] = [np.zeros_like(p) for p in params]
        state["v"] = [np.zeros_like(p) for p in params]
    elif spec.kind == "rmsprop":
        state["v"] = [np.zeros_like(p) for p in params]
    elif spec.kind == "sgd" and spec.momentum > 0:
        state["buf"] = [np.zeros_like(p) for p in params]
    return state


def adam_step(params: list, grads: list, state: dict, spec: OptimizerSpec) -> dict:
    """One Adam update, in place: bias-corrected moments, eps outside the sqrt."""
    state["t"] += 1
    c1 = 1.0 - spec.beta1 ** state["t"]
    c2 = 1.0 - spec.beta2 ** state["t"]
    for p, g, m, v in zip(params, grads, state["m"], state["v"]):
        m *= spec.beta1
        m += (1.0 - spec.beta1) * g
        v *= spec.beta2
        v += (1.0 - spec.beta2) * g * g
        p -= spec.lr * (m / c1) / (np.sqrt(v / c2) + spec.eps)
    return state


def sgd_step(params: list, grads: list, state: dict, spec: OptimizerSpec) -> dict:
    state["t"] += 1
    if spec.momentum > 0:
        for p, g, buf in zip(params, grads, state["buf"]):
            buf *= spec.momentum
            buf += g
            p -= spec.lr * buf
    else:
        for p, g in zip(params, grads):
            p -= spec.lr * g
    return state


def rmsprop_step(params: list, grads: list, state: dict, spec: OptimizerSpec) -> dict:
    state["t"] += 1
    for p, g, v in zip(params, grads, state["v"]):
        v *= spec.beta2
        v += (1.0 - spec.beta2) * g * g
        p -= spec.lr * g / (np.sqrt(v) + spec.eps)
    return state


_STEP_FUNCS = {"adam": adam_step, "sgd": sgd_step, "rmsprop": rmsprop_step}


def _select_layer_grads(model: FieldModel, layer_grads: list) -> list:
    """Order-matched gradients for trainable_layer_arrays."""
    if model.decoder.bias:
        return [arr for pair in layer_grads for arr in pair]
    return [pair[0] for pair in layer_grads]


# ---------------------------------------------------------------------------
# Point-constraint training (sparse: only touched table rows are parameters)
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    model: FieldModel
    loss_trace: np.ndarray
    residuals: np.ndarray  # final signed errors, one per constraint


class _PointProblem:
    """Precomputed gather/scatter plan for a fixed set of constraint points.

    Table rows across levels are addressed by a global id level*T + index;
    only the union of touched rows is materialized as a parameter block.
    """

    def __init__(self, model: FieldModel, constraints: list):
        cfg = model.grid.config
        if model.decoder.out_dim != 1:
            raise ValueError("point training expects a scalar decoder (out_dim=1)")
        if not constraints:
            raise ValueError("at least one constraint is required")
        pts = np.array([c.point for c in constraints], dtype=np.float64)
        if pts.shape[1] != cfg.dim:
            raise ValueError(f"constraint points must have dimension {cfg.dim}")
        self.targets = np.array([[c.amplitude] for c in constraints], dtype=np.float64)
        k = pts.shape[0]
        gids = np.empty((k, cfg.n_levels, 2**cfg.dim), dtype=np.int64)
        self.weights = np.empty((k, cfg.n_levels, 2**cfg.dim))
        for l in range(cfg.n_levels):
            corners, w = corner_weights(_level_scaled(model.grid, pts, l))
            gids[:, l, :] = spatial_hash(corners, cfg.table_size) + l * cfg.table_size
            self.weights[:, l, :] = w
        self.unique_gids, self.inv = np.unique(gids, return_inverse=True)
        self.inv = self.inv.reshape(gids.shape)
        self.model = model
        self.cfg = cfg

    def gather_values(self) -> np.ndarray:
        t = self.cfg.table_size
        levels = self.unique_gids // t
        rows = self.unique_gids % t
        vals = np.empty((len(self.unique_gids), self.cfg.n_features))
        for l in range(self.cfg.n_levels):
            sel = levels == l
            vals[sel] = self.model.grid.tables[l][rows[sel]]
        return vals

    def scatter_values(self, vals: np.ndarray) -> None:
        t = self.cfg.table_size
        levels = self.unique_gids // t
        rows = self.unique_gids % t
        for l in range(self.cfg.n_levels):
            sel = levels == l
            self.model.grid.tables[l][rows[sel]] = vals[sel]

    def features(self, vals: np.ndarray) -> np.ndarray:
        gathered = vals[self.inv]  # (k, L, 2^dim, F)
        e = np.einsum("klc,klcf->klf", self.weights, gathered)
        return e.reshape(e.shape[0], -1)

    def loss_and_grads(self, vals: np.ndarray, layers: list):
        e = self.features(vals)
        out, cache = _decoder_forward(layers, e)
        res = out - self.targets
        loss = float(np.mean(res**2))
        dout = (2.0 / res.size) * res
        layer_grads, de = _decoder_backward(layers, cache, dout)
        de = de.reshape(de.shape[0], self.cfg.n_levels, 1, self.cfg.n_features)
        contrib = self.weights[..., None] * de  # (k, L, 2^dim, F)
        gvals = np.zeros_like(vals)
        np.add.at(gvals, self.inv, contrib)
        return loss, res[:, 0], gvals, layer_grads

    def loss_only(self, vals: np.ndarray, layers: list) -> float:
        out, _ = _decoder_forward(layers, self.features(vals))
        return float(np.mean((out - self.targets) ** 2))


def train_points(model: FieldModel, constraints: list, opt: OptimizerSpec) -> TrainResult:
    """Full-batch training on fixed point constraints, in place.

    Gradients reach exactly the table rows in the constraints' interpolation
    support; everything else in the tables is untouched.
    """
    problem = _PointProblem(model, constraints)
    vals = problem.gather_values()
    params = [vals] + model.trainable_layer_arrays()
    state = init_opt_state(opt, params)
    step_fn = _STEP_FUNCS[opt.kind]
    trace = np.empty(opt.n_steps)
    for step in range(opt.n_steps):
        loss, _, gvals, layer_grads = problem.loss_and_grads(vals, model.layers)
        if not np.isfinite(loss) or loss > DIVERGENCE_LIMIT:
            raise TrainingDiverged(
                f"loss {loss:.3e} at step {step} exceeded {DIVERGENCE_LIMIT:.0e}; reduce the learning rate"
            )
        trace[step] = loss
        grads = [gvals] + _select_layer_grads(model, layer_grads)
        step_fn(params, grads, state, opt.at_step(step))
    problem.scatter_values(vals)
    out, _ = _decoder_forward(model.layers, problem.features(vals))
    return TrainResult(model=model, loss_trace=trace, residuals=(out - problem.targets)[:, 0])


def gradient_check(
    model: FieldModel,
    constraints: list,
    n_table_entries: int = 20,
    step: float = 1e-4,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Probes ``n_table_entries`` random entries of the touched table rows plus
    every decoder parameter.
    """
    problem = _PointProblem(model, constraints)
    vals = problem.gather_values()
    _, _, gvals, layer_grads = problem.loss_and_grads(vals, model.layers)

    def rel_err(analytic, numeric):
        return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-12)

    rng = np.random.default_rng(seed)
    worst = 0.0
    flat_n = vals.size
    picks = rng.choice(flat_n, size=min(n_table_entries, flat_n), replace=False)
    for flat in picks:
        i, j = np.unravel_index(flat, vals.shape)
        keep = vals[i, j]
        vals[i, j] = keep + step
        up = problem.loss_only(vals, model.layers)
        vals[i, j] = keep - step
        down = problem.loss_only(vals, model.layers)
        vals[i, j] = keep
        worst = max(worst, rel_err(gvals[i, j], (up - down) / (2 * step)))
    for (w, b), (gw, gb) in zip(model.layers, layer_grads):
        pairs = ((w, gw), (b, gb)) if model.decoder.bias else ((w, gw),)
        for arr, grad in pairs:
            for flat in range(arr.size):
                idx = np.unravel_index(flat, arr.shape)
                keep = arr[idx]
                arr[idx] = keep + step
                up = problem.loss_only(vals, model.layers)
                arr[idx] = keep - step
                down = problem.loss_only(vals, model.layers)
                arr[idx] = keep
                worst = max(worst, rel_err(grad[idx], (up - down) / (2 * step)))
    return worst


# ---------------------------------------------------------------------------
# Batched regression (dense optimizer state over all tables)
# ---------------------------------------------------------------------------


@dataclass
class BatchTrainResult:
    model: FieldModel
    loss_trace: np.ndarray
    eval_steps: np.ndarray
    eval_mse: np.ndarray


def _batch_parts(grid: HashGrid, pts: np.ndarray):
    """Per-level hashed corner ids (offset into the stacked table) and weights."""
    cfg = grid.config
    n = pts.shape[0]
    gids = np.empty((n, cfg.n_levels, 2**cfg.dim), dtype=np.int64)
    weights = np.empty((n, cfg.n_levels, 2**cfg.dim))
    for l in range(cfg.n_levels):
        corners, w = corner_weights(_level_scaled(grid, pts, l))
        gids[:, l, :] = spatial_hash(corners, cfg.table_size) + l * cfg.table_size
        weights[:, l, :] = w
    return gids, weights


def train_batched(
    model: FieldModel,
    x: np.ndarray,
    y: np.ndarray,
    opt: OptimizerSpec,
    batch_size: int,
    seed: int = 0,
    eval_every: int | None = None,
) -> BatchTrainResult:
    """Seeded random-batch MSE training over a fixed sample set, in place.

    All table rows carry dense optimizer state so that momentum decays even
    on steps where a row is not touched.
    """
    cfg = model.grid.config
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if x.ndim != 2 or x.shape[1] != cfg.dim:
        raise ValueError(f"x must have shape (n, {cfg.dim})")
    if y.shape != (x.shape[0], model.decoder.out_dim):
        raise ValueError(f"y must have shape (n, {model.decoder.out_dim})")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")

    stacked = np.concatenate(model.grid.tables, axis=0)  # (L*T, F)
    params = [stacked] + model.trainable_layer_arrays()
    state = init_opt_state(opt, params)
    step_fn = _STEP_FUNCS[opt.kind]
    rng = np.random.default_rng(seed)
    n = x.shape[0]
    rows = stacked.shape[0]

    def full_mse() -> float:
        total = 0.0
        for i in range(0, n, 65536):
            gids, w = _batch_parts(model.grid, x[i : i + 65536])
            e = np.einsum("klc,klcf->klf", w, stacked[gids]).reshape(w.shape[0], -1)
            out, _ = _decoder_forward(model.layers, e)
            total += float(np.sum((out - y[i : i + 65536]) ** 2))
        return total / y.size

    evals = []
    if eval_every:
        evals.append((0, full_mse()))
    trace = np.empty(opt.n_steps)
    for step in range(opt.n_steps):
        sel = rng.integers(0, n, size=batch_size)
        gids, w = _batch_parts(model.grid, x[sel])
        e = np.einsum("klc,klcf->klf", w, stacked[gids]).reshape(batch_size, -1)
        out, cache = _decoder_forward(model.layers, e)
        res = out - y[sel]
        loss = float(np.mean(res**2))
        if not np.isfinite(loss) or loss > DIVERGENCE_LIMIT:
            raise TrainingDiverged(
                f"loss {loss:.3e} at step {step} exceeded {DIVERGENCE_LIMIT:.0e}; reduce the learning rate"
            )
        trace[step] = loss
        dout = (2.0 / res.size) * res
        layer_grads, de = _decoder_backward(model.layers, cache, dout)
        contrib = w[..., None] * de.reshape(batch_size, cfg.n_levels, 1, cfg.n_features)
        flat_ids = gids.ravel()
        flat_contrib = contrib.reshape(-1, cfg.n_features)
        gtable = np.empty_like(stacked)
        for j in range(cfg.n_features):
            gtable[:, j] = np.bincount(flat_ids, weights=flat_contrib[:, j], minlength=rows)
        grads = [gtable] + _select_layer_grads(model, layer_grads)
        step_fn(params, grads, state, opt.at_step(step))
        if eval_every and (step + 1) % eval_every == 0:
            evals.append((step + 1, full_mse()))
    if eval_every and (not evals or evals[-1][0] != opt.n_steps):
        evals.append((opt.n_steps, full_mse()))
    t = cfg.table_size
    for l in range(cfg.n_levels):
        model.grid.tables[l][:] = stacked[l * t : (l + 1) * t]
    steps = np.array([s for s, _ in evals], dtype=np.int64)
    mses = np.array([m for _, m in evals])
    return BatchTrainResult(model=model, loss_trace=trace, eval_steps=steps, eval_mse=mses)


# ---------------------------------------------------------------------------
# Image regression
# ---------------------------------------------------------------------------


def psnr_db(mse: float) -> float:
    """Peak signal-to-noise ratio in dB for values on [0, 1]; inf for exact fits."""
    if mse < 0:
        raise ValueError(f"mse must be >= 0, got {mse}")
    if mse == 0:
        return float("inf")
    return float(-10.0 * np.log10(mse))


def image_coordinates(side: int) -> np.ndarray:
    """Pixel-center coordinates of a side x side image, row-major, in [0, 1]^2.

    Coordinate order is (x, y) = ((col + 0.5) / side, (row + 0.5) / side).
    """
    centers = (np.arange(side) + 0.5) / side
    xx, yy = np.meshgrid(centers, centers, indexing="xy")
    return np.stack([xx.ravel(), yy.ravel()], axis=-1)


@dataclass
class ImageTrainResult:
    model: FieldModel
    loss_trace: np.ndarray
    psnr_steps: np.ndarray
    psnr_trace: np.ndarray
    eval_mse: np.ndarray  # full-image MSE at the same checkpoints

    @property
    def final_psnr(self) -> float:
        return float(self.psnr_trace[-1])


def train_image(
    model: FieldModel,
    image: np.ndarray,
    opt: OptimizerSpec,
    batch_size: int = 8192,
    seed: int = 0,
    eval_every: int | None = None,
) -> ImageTrainResult:
    """Fit a square [0, 1]-valued image with seeded pixel batches.

    PSNR is evaluated over the full image at ``eval_every`` checkpoints
    (default: eight times per run) plus step 0 and the final step.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        channels = 1
        flat = image.reshape(-1, 1)
    elif image.ndim == 3:
        channels = image.shape[2]
        flat = image.reshape(-1, channels)
    else:
        raise ValueError(f"image must be 2D or (H, W, C), got shape {image.shape}")
    if image.shape[0] != image.shape[1]:
        raise ValueError(f"image must be square, got {image.shape[0]}x{image.shape[1]}")
    if image.min() < 0 or image.max() > 1:
        raise ValueError("image values must lie in [0, 1]")
    if channels != model.decoder.out_dim:
        raise ValueError(f"decoder out_dim {model.decoder.out_dim} != image channels {channels}")
    if eval_every is None:
        eval_every = max(1, opt.n_steps // 8)
    coords = image_coordinates(image.shape[0])
    res = train_batched(model, coords, flat, opt, batch_size, seed=seed, eval_every=eval_every)
    return ImageTrainResult(
        model=model,
        loss_trace=res.loss_trace,
        psnr_steps=res.eval_steps,
        psnr_trace=np.array([psnr_db(m) for m in res.eval_mse]),
        eval_mse=res.eval_mse,
    )


# ---------------------------------------------------------------------------
# Estimator facade
# ---------------------------------------------------------------------------


class FieldRegressor(BaseEstimator, RegressorMixin):
    """Hash-encoded field regression with a native first-order optimizer.

    With ``batch_size=None`` the rows of (X, y) are treated as exact point
    constraints and trained full batch; otherwise training draws seeded
    random batches from (X, y).
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
        decoder_depth=0,
        decoder_width=64,
        decoder_bias=False,
        optimizer="adam",
        lr=1e-2,
        n_steps=2000,
        batch_size=None,
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
        self.decoder_depth = decoder_depth
        self.decoder_width = decoder_width
        self.decoder_bias = decoder_bias
        self.optimizer = optimizer
        self.lr = lr
        self.n_steps = n_steps
        self.batch_size = batch_size
        self.seed = seed

    def _check_x(self, X, dim=None):
        X = check_array(X, dtype=np.float64, ensure_2d=True)
        if dim is not None and X.shape[1] != dim:
            raise ValueError(f"expected {dim}-dimensional points, got {X.shape[1]}")
        if X.shape[1] not in (2, 3):
            raise ValueError(f"points must be 2D or 3D, got dimension {X.shape[1]}")
        return X

    def fit(self, X, y):
        from .encoding import Rotation

        X = self._check_x(X)
        y = np.asarray(y, dtype=np.float64)
        if y.ndim == 1:
            y2 = y[:, None]
        elif y.ndim == 2:
            y2 = y
        else:
            raise ValueError("y must be 1D or 2D")
        if y2.shape[0] != X.shape[0]:
            raise ValueError("X and y must have the same number of rows")
        config = EncodingConfig(
            dim=X.shape[1],
            n_levels=self.n_levels,
            n_min=self.n_min,
            growth=self.growth,
            table_size=self.table_size,
            n_features=self.n_features,
            rotation=Rotation(self.rotation, m=self.rotation_m, solid=self.rotation_solid),
            seed=self.seed,
        )
        decoder = DecoderSpec(
            depth=self.decoder_depth, width=self.decoder_width, out_dim=y2.shape[1], bias=self.decoder_bias
        )
        opt = OptimizerSpec(kind=self.optimizer, lr=self.lr, n_steps=self.n_steps)
        self.model_ = init_model(config, decoder, seed=self.seed)
        if self.batch_size is None:
            constraints = [Constraint(tuple(p), float(v)) for p, v in zip(X, y2[:, 0])]
            result = train_points(self.model_, constraints, opt)
        else:
            result = train_batched(self.model_, X, y2, opt, self.batch_size, seed=self.seed)
        self.loss_trace_ = result.loss_trace
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        if not hasattr(self, "model_"):
            raise RuntimeError("FieldRegressor must be fitted before calling predict")
        X = self._check_x(X, dim=self.model_.grid.config.dim)
        return forward(self.model_, X)
