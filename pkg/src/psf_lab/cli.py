"""Config-driven experiment runner.

Usage: ``psf-lab <psf|two-point|collision|rotate-sweep|image|plan>
--config FILE [--out DIR] [--seeds a,b,c] [--parallel N]``.

The config file is flat JSON with one block per subcommand; command line
flags override block values. Exit codes: 0 success, 1 at least one sweep
cell failed (the manifest lists them), 2 invalid config. Every artifact is
written atomically, and reruns with the same config and seeds reproduce
CSV files byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .encoding import EncodingConfig, ROTATION_KINDS, Rotation
from .experiments import collision_sweep, dipole_experiment, measure_point_psf, two_point_experiment
from .images import SYNTHETIC_IMAGES, load_image, synthetic_image
from .metrology import PSFMap, anisotropy_ratio_at, write_fwhm_by_angle_csv, write_psf_map_csv
from .output import write_csv, write_json
from .planner import PlanRequest, UnachievableTargetError, plan_report
from .training import DecoderSpec, OptimizerSpec, init_model, train_image

COMMANDS = ("psf", "two-point", "collision", "rotate-sweep", "image", "plan")


class ConfigError(ValueError):
    """Anything wrong with the config file or flag values."""


# Defaults are mirrored by the JSON files under configs/; a missing block
# key falls back to these.
DEFAULTS = {
    "psf": {
        "cells": [[8, 1.4], [10, 1.5], [12, 1.6]],
        "n_min": 16.0,
        "table_size": 2**20,
        "n_features": 2,
        "rotation": {"kind": "identity"},
        "decoder": {"depth": 0, "width": 64},
        "optimizer": {"kind": "adam", "lr": 0.01, "n_steps": 2000},
        "grid_points": 257,
        "n_angles": 64,
        "levels": [0.5],
        "seeds": [1, 2, 3],
    },
    "two-point": {
        "cells": [[8, 1.4], [10, 1.5], [12, 1.6]],
        "n_min": 16.0,
        "table_size": 2**20,
        "n_features": 2,
        "decoder": {"depth": 0, "width": 64},
        "optimizer": {"kind": "adam", "lr": 0.01, "n_steps": 2000},
        "f_grid": [round(0.2 + 0.15 * i, 2) for i in range(13)] + [2.5, 3.0, 4.0],
        "threshold": 0.01,
        "dipole_frac": 0.3,
        "seeds": [1, 2],
    },
    "collision": {
        "series": [[6, 1.5], [12, 1.5]],
        "table_sizes": [2**8, 2**10, 2**12, 2**14, 2**16, 2**18],
        "n_min": 16.0,
        "n_features": 2,
        "decoder": {"depth": 0, "width": 64},
        "optimizer": {"kind": "adam", "lr": 0.01, "n_steps": 2000},
        "grid_points": 257,
        "snr_guard": 3.0,
        "seeds": [1],
    },
    "rotate-sweep": {
        "m_list": [1, 2, 4, 8, 16],
        "n_levels": 6,
        "growth": 1.5,
        "n_min": 16.0,
        "table_size": 2**20,
        "n_features": 2,
        "decoder": {"depth": 0, "width": 64},
        "optimizer": {"kind": "adam", "lr": 0.01, "n_steps": 2000},
        "grid_points": 257,
        "n_angles": 64,
        "levels": [0.5],
        "seeds": [1, 2, 3, 4, 5, 6, 7, 8],
    },
    "image": {
        "image": "stripes",
        "side": 256,
        "m_list": [1, 2, 4, 8],
        "b_theory": None,
        "b_offsets": [-0.2, -0.1, 0.0, 0.1, 0.2],
        "n_levels": 12,
        "n_min": 16.0,
        "table_size": 2**16,
        "n_features": 2,
        "beta": 3.0,
        "full_grid": False,
        "decoder": {"depth": 2, "width": 64},
        "optimizer": {"kind": "adam", "lr": 0.001, "n_steps": 1500, "decay": "cosine"},
        "batch_size": 4096,
        "seeds": [1, 2, 3],
    },
    "plan": {
        "target_fwhm": None,
        "pixel_pitch": None,
        "n_levels": 16,
        "n_min": 16.0,
        "beta": 3.0,
        "dim": 2,
        "table_size": 2**20,
    },
}


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a JSON object, got {type(data).__name__}")
    return data


def _resolve_block(config: dict, command: str, args) -> tuple:
    block = dict(DEFAULTS[command])
    file_block = config.get(command, {})
    if not isinstance(file_block, dict):
        raise ConfigError(f"config block {command!r} must be an object")
    block.update(file_block)
    out = args.out or block.pop("out", None) or os.path.join("psf_lab_out", command)
    if args.seeds is not None:
        try:
            seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError:
            raise ConfigError(f"--seeds must be comma-separated integers, got {args.seeds!r}") from None
    else:
        seeds = block.get("seeds", [1])
    if command != "plan":
        if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
            raise ConfigError(f"seeds must be a non-empty list of non-negative integers, got {seeds!r}")
    parallel = args.parallel if args.parallel is not None else block.get("parallel", 1)
    if not isinstance(parallel, int) or parallel < 1:
        raise ConfigError(f"parallel must be a positive integer, got {parallel!r}")
    block.pop("seeds", None)
    block.pop("parallel", None)
    return block, out, seeds, parallel


def _cells(block: dict, key: str) -> list:
    cells = block.get(key)
    ok = isinstance(cells, list) and cells
    if ok:
        for cell in cells:
            if not (isinstance(cell, list) and len(cell) == 2):
                ok = False
                break
    if not ok:
        raise ConfigError(f"{key!r} must be a non-empty list of [n_levels, growth] pairs")
    return [(int(l), float(b)) for l, b in cells]


def _rotation_tuple(block: dict) -> tuple:
    rot = block.get("rotation", {"kind": "identity"})
    if not isinstance(rot, dict) or rot.get("kind", "identity") not in ROTATION_KINDS:
        raise ConfigError(f"rotation must be an object with kind in {ROTATION_KINDS}")
    return (rot.get("kind", "identity"), int(rot.get("m", 1)), rot.get("solid", "icosa"))


def _build_config(enc: dict) -> EncodingConfig:
    kind, m, solid = enc["rotation"]
    return EncodingConfig(
        dim=enc.get("dim", 2),
        n_levels=enc["n_levels"],
        n_min=enc["n_min"],
        growth=enc["growth"],
        table_size=enc["table_size"],
        n_features=enc["n_features"],
        rotation=Rotation(kind, m=m, solid=solid),
        seed=enc["seed"],
    )


def _encoding_payload(block: dict, n_levels: int, growth: float, seed: int, rotation=None) -> dict:
    return {
        "dim": 2,
        "n_levels": int(n_levels),
        "n_min": float(block.get("n_min", 16.0)),
        "growth": float(growth),
        "table_size": int(block.get("table_size", 2**20)),
        "n_features": int(block.get("n_features", 2)),
        "rotation": rotation if rotation is not None else _rotation_tuple(block),
        "seed": int(seed),
    }


def _specs(block: dict) -> tuple:
    try:
        decoder = dict(block.get("decoder", {}))
        optimizer = dict(block.get("optimizer", {}))
        DecoderSpec(**decoder)
        OptimizerSpec(**optimizer)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad decoder/optimizer block: {exc}") from None
    return decoder, optimizer


def _run_cells(fn, payloads: list, parallel: int) -> list:
    if parallel > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(fn, payloads))
    return [fn(p) for p in payloads]


def _fmt_b(b: float) -> str:
    return f"{b:g}"


# ---------------------------------------------------------------------------
# psf: (L, b) sweep of single-point responses
# ---------------------------------------------------------------------------


def _psf_cell(payload: dict) -> dict:
    tag = f"cell_L{payload['encoding']['n_levels']}_b{_fmt_b(payload['encoding']['growth'])}_seed{payload['encoding']['seed']}"
    try:
        cfg = _build_config(payload["encoding"])
        point = measure_point_psf(
            cfg,
            DecoderSpec(**payload["decoder"]),
            OptimizerSpec(**payload["optimizer"]),
            grid_points=payload["grid_points"],
            n_angles=payload["n_angles"],
            levels=tuple(payload["levels"]),
        )
        cell_dir = os.path.join(payload["out"], tag)
        os.makedirs(cell_dir, exist_ok=True)
        write_psf_map_csv(point.psf_map, os.path.join(cell_dir, "psf_map.csv"))
        write_fwhm_by_angle_csv(point.fan_angles, point.fan_widths, os.path.join(cell_dir, "fwhm_by_angle.csv"))
        return {
            "ok": True,
            "tag": tag,
            "outputs": [f"{tag}/psf_map.csv", f"{tag}/fwhm_by_angle.csv"],
            "n_avg": cfg.schedule.n_avg,
            "fwhm_axis": point.fwhm_axis,
            "fwhm_diag": point.fwhm_diag,
            "beta_emp": point.beta_emp,
            "snr_db": point.snr_db,
            "anisotropy": {str(k): v for k, v in point.anisotropy.items()},
        }
    except Exception as exc:  # per-cell isolation: a bad cell must not kill the sweep
        return {"ok": False, "tag": tag, "error": f"{type(exc).__name__}: {exc}"}


def cmd_psf(block: dict, out: str, seeds: list, parallel: int) -> tuple:
    cells = _cells(block, "cells")
    decoder, optimizer = _specs(block)
    payloads = [
        {
            "encoding": _encoding_payload(block, lv, gr, seed),
            "decoder": decoder,
            "optimizer": optimizer,
            "grid_points": int(block.get("grid_points", 257)),
            "n_angles": int(block.get("n_angles", 64)),
            "levels": list(block.get("levels", [0.5])),
            "out": out,
        }
        for lv, gr in cells
        for seed in seeds
    ]
    results = _run_cells(_psf_cell, payloads, parallel)
    outputs, failures = [], []
    summary_rows = []
    per_cell = {}
    for payload, res in zip(payloads, results):
        key = (payload["encoding"]["n_levels"], payload["encoding"]["growth"])
        if res["ok"]:
            outputs.extend(res["outputs"])
            per_cell.setdefault(key, []).append(res)
            print(f"psf {res['tag']}: beta_emp={res['beta_emp']:.3f} fwhm_axis={res['fwhm_axis']:.5f}")
        else:
            failures.append({"cell": res["tag"], "error": res["error"]})
            print(f"psf {res['tag']}: FAILED {res['error']}")
    for lv, gr in cells:
        rows = per_cell.get((lv, gr), [])
        if not rows:
            continue
        betas = np.array([r["beta_emp"] for r in rows])
        summary_rows.append(
            (
                lv,
                gr,
                rows[0]["n_avg"],
                float(np.mean([r["fwhm_axis"] for r in rows])),
                float(np.mean([r["fwhm_diag"] for r in rows])),
                float(betas.mean()),
                float(betas.std()),
            )
        )
    write_csv(
        os.path.join(out, "beta_summary.csv"),
        ["L", "b", "n_avg", "fwhm_axis", "fwhm_diag", "beta_emp_mean", "beta_emp_std"],
        summary_rows,
    )
    outputs.append("beta_summary.csv")
    return outputs, failures, {}


# ---------------------------------------------------------------------------
# two-point: separability and dipole response
# ---------------------------------------------------------------------------


def _two_point_cell(payload: dict) -> dict:
    enc = payload["encoding"]
    tag = f"cell_L{enc['n_levels']}_b{_fmt_b(enc['growth'])}_seed{enc['seed']}"
    try:
        cfg = _build_config(enc)
        decoder = DecoderSpec(**payload["decoder"])
        opt = OptimizerSpec(**payload["optimizer"])
        result = two_point_experiment(
            cfg, decoder, opt, threshold=payload["threshold"], f_grid=payload["f_grid"]
        )
        dipole = dipole_experiment(cfg, decoder, opt, separation_frac=payload["dipole_frac"])
        cell_dir = os.path.join(payload["out"], tag)
        os.makedirs(cell_dir, exist_ok=True)
        rows = [
            (float(d), float(f), float(dip))
            for d, f, dip in zip(result.separations, result.f_norm, result.dips)
        ]
        write_csv(os.path.join(cell_dir, "two_point.csv"), ["d", "f_norm", "dip"], rows)
        return {
            "ok": True,
            "tag": tag,
            "outputs": [f"{tag}/two_point.csv"],
            "fwhm_axis": result.fwhm_axis,
            "d_crit": result.d_crit,
            "dipole_cosine": dipole.cosine,
            "entry_failures": [{"separation": d, "error": e} for d, e in result.failures],
        }
    except Exception as exc:
        return {"ok": False, "tag": tag, "error": f"{type(exc).__name__}: {exc}"}


def cmd_two_point(block: dict, out: str, seeds: list, parallel: int) -> tuple:
    cells = _cells(block, "cells")
    decoder, optimizer = _specs(block)
    f_grid = block.get("f_grid")
    if f_grid is not None:
        if not isinstance(f_grid, list) or not f_grid or not all(
            isinstance(f, (int, float)) and f > 0 for f in f_grid
        ):
            raise ConfigError("'f_grid' must be a non-empty list of positive FWHM multiples")
        f_grid = [float(f) for f in f_grid]
    payloads = [
        {
            "encoding": _encoding_payload(block, lv, gr, seed),
            "decoder": decoder,
            "optimizer": optimizer,
            "threshold": float(block.get("threshold", 0.01)),
            "dipole_frac": float(block.get("dipole_frac", 0.3)),
            "f_grid": f_grid,
            "out": out,
        }
        for lv, gr in cells
        for seed in seeds
    ]
    results = _run_cells(_two_point_cell, payloads, parallel)
    outputs, failures, crit_rows = [], [], []
    no_dcrit = []
    for payload, res in zip(payloads, results):
        enc = payload["encoding"]
        if not res["ok"]:
            failures.append({"cell": res["tag"], "error": res["error"]})
            print(f"two-point {res['tag']}: FAILED {res['error']}")
            continue
        outputs.extend(res["outputs"])
        failures.extend({"cell": res["tag"], **f} for f in res["entry_failures"])
        d_crit = res["d_crit"]
        if d_crit is None:
            no_dcrit.append(res["tag"])
        crit_rows.append(
            (
                enc["n_levels"],
                enc["growth"],
                enc["seed"],
                res["fwhm_axis"],
                float("nan") if d_crit is None else d_crit,
                float("nan") if d_crit is None else d_crit / res["fwhm_axis"],
                res["dipole_cosine"],
            )
        )
        print(f"two-point {res['tag']}: d_crit={d_crit} fwhm={res['fwhm_axis']:.5f}")
    write_csv(
        os.path.join(out, "dcrit_vs_fwhm.csv"),
        ["L", "b", "seed", "fwhm_axis", "d_crit", "ratio", "dipole_cosine"],
        crit_rows,
    )
    outputs.append("dcrit_vs_fwhm.csv")
    flags = {"no_dcrit": no_dcrit} if no_dcrit else {}
    return outputs, failures, flags


# ---------------------------------------------------------------------------
# collision: SNR vs hash table size
# ---------------------------------------------------------------------------


def _collision_series(payload: dict) -> dict:
    enc = payload["encoding"]
    tag = f"series_L{enc['n_levels']}_b{_fmt_b(enc['growth'])}_seed{enc['seed']}"
    try:
        cfg = _build_config(enc)
        sweep = collision_sweep(
            cfg,
            payload["table_sizes"],
            DecoderSpec(**payload["decoder"]),
            OptimizerSpec(**payload["optimizer"]),
            grid_points=payload["grid_points"],
            snr_guard=payload["snr_guard"],
        )
        series_dir = os.path.join(payload["out"], tag)
        os.makedirs(series_dir, exist_ok=True)
        rows = []
        degenerate, entry_failures = [], []
        for e in sweep.entries:
            rows.append(
                (
                    e.table_size,
                    float("nan") if e.audit is None else e.audit.total_load_factor,
                    float("nan") if e.audit is None else e.audit.overall_colliding_fraction,
                    float("nan") if e.snr_db is None else e.snr_db,
                )
            )
            if e.degenerate:
                degenerate.append(e.table_size)
            if e.error is not None:
                entry_failures.append({"table_size": e.table_size, "error": e.error})
        write_csv(
            os.path.join(series_dir, "collision_sweep.csv"),
            ["T", "load_factor", "colliding_fraction", "snr_db"],
            rows,
        )
        return {
            "ok": True,
            "tag": tag,
            "outputs": [f"{tag}/collision_sweep.csv"],
            "degenerate": degenerate,
            "entry_failures": entry_failures,
        }
    except Exception as exc:
        return {"ok": False, "tag": tag, "error": f"{type(exc).__name__}: {exc}"}


def cmd_collision(block: dict, out: str, seeds: list, parallel: int) -> tuple:
    series = _cells(block, "series")
    table_sizes = block.get("table_sizes")
    if not isinstance(table_sizes, list) or not table_sizes or not all(
        isinstance(t, int) and t >= 1 for t in table_sizes
    ):
        raise ConfigError("'table_sizes' must be a non-empty list of positive integers")
    decoder, optimizer = _specs(block)
    payloads = [
        {
            "encoding": _encoding_payload(block, lv, gr, seed),
            "decoder": decoder,
            "optimizer": optimizer,
            "table_sizes": table_sizes,
            "grid_points": int(block.get("grid_points", 257)),
            "snr_guard": float(block.get("snr_guard", 3.0)),
            "out": out,
        }
        for lv, gr in series
        for seed in seeds
    ]
    results = _run_cells(_collision_series, payloads, parallel)
    outputs, failures = [], []
    flags = {}
    for res in results:
        if not res["ok"]:
            failures.append({"cell": res["tag"], "error": res["error"]})
            print(f"collision {res['tag']}: FAILED {res['error']}")
            continue
        outputs.extend(res["outputs"])
        failures.extend({"cell": res["tag"], **f} for f in res["entry_failures"])
        if res["degenerate"]:
            flags.setdefault("degenerate", {})[res["tag"]] = res["degenerate"]
        print(f"collision {res['tag']}: done ({len(res['entry_failures'])} entry failures)")
    return outputs, failures, flags


# ---------------------------------------------------------------------------
# rotate-sweep: anisotropy vs orientation count M
# ---------------------------------------------------------------------------


def _rotate_cell(payload: dict) -> dict:
    enc = payload["encoding"]
    tag = f"M{payload['m']}_seed{enc['seed']}"
    try:
        cfg = _build_config(enc)
        point = measure_point_psf(
            cfg,
            DecoderSpec(**payload["decoder"]),
            OptimizerSpec(**payload["optimizer"]),
            grid_points=payload["grid_points"],
            n_angles=payload["n_angles"],
            levels=tuple(payload["levels"]),
        )
        cell_dir = os.path.join(payload["out"], tag)
        os.makedirs(cell_dir, exist_ok=True)
        write_psf_map_csv(point.psf_map, os.path.join(cell_dir, "psf_map.csv"))
        write_fwhm_by_angle_csv(point.fan_angles, point.fan_widths, os.path.join(cell_dir, "fwhm_by_angle.csv"))
        return {
            "ok": True,
            "tag": tag,
            "outputs": [f"{tag}/psf_map.csv", f"{tag}/fwhm_by_angle.csv"],
            "anisotropy": {str(k): v for k, v in point.anisotropy.items()},
            "map_values": point.psf_map.values,
            "half_extent": float(point.psf_map.half_extent),
        }
    except Exception as exc:
        return {"ok": False, "tag": tag, "error": f"{type(exc).__name__}: {exc}"}


def cmd_rotate_sweep(block: dict, out: str, seeds: list, parallel: int) -> tuple:
    m_list = block.get("m_list")
    if not isinstance(m_list, list) or not m_list or not all(isinstance(m, int) and m >= 1 for m in m_list):
        raise ConfigError("'m_list' must be a non-empty list of positive integers")
    decoder, optimizer = _specs(block)
    payloads = [
        {
            "m": m,
            "encoding": _encoding_payload(
                block,
                int(block.get("n_levels", 10)),
                float(block.get("growth", 1.5)),
                seed,
                rotation=("progressive2d", m, "icosa"),
            ),
            "decoder": decoder,
            "optimizer": optimizer,
            "grid_points": int(block.get("grid_points", 257)),
            "n_angles": int(block.get("n_angles", 64)),
            "levels": list(block.get("levels", [0.5])),
            "out": out,
        }
        for m in m_list
        for seed in seeds
    ]
    results = _run_cells(_rotate_cell, payloads, parallel)
    outputs, failures = [], []
    ratios = {}
    mean_maps = {}
    for payload, res in zip(payloads, results):
        if not res["ok"]:
            failures.append({"cell": res["tag"], "error": res["error"]})
            print(f"rotate-sweep {res['tag']}: FAILED {res['error']}")
            continue
        outputs.extend(res["outputs"])
        for level, ratio in res["anisotropy"].items():
            ratios.setdefault((payload["m"], float(level)), []).append(ratio)
        mean_maps.setdefault(payload["m"], []).append((res["map_values"], res["half_extent"]))
        print(f"rotate-sweep {res['tag']}: anisotropy={res['anisotropy']}")
    # Seed-mean of the aligned maps: the expected response, free of the
    # per-seed speckle that biases max/min fan ratios upward.
    map_ratios = {}
    levels = [float(a) for a in block.get("levels", [0.5])]
    for m, stack in sorted(mean_maps.items()):
        values = np.mean([v for v, _ in stack], axis=0)
        he = stack[0][1]
        grid = np.linspace(-he, he, values.shape[0])
        mean_map = PSFMap(
            center=np.array([0.5, 0.5]),
            half_extent=he,
            axes=(0.5 + grid, 0.5 + grid),
            values=values,
            peak=1.0,
        )
        write_psf_map_csv(mean_map, os.path.join(out, f"M{m}_psf_map_mean.csv"))
        outputs.append(f"M{m}_psf_map_mean.csv")
        for level in levels:
            map_ratios[(m, level)] = anisotropy_ratio_at(mean_map, level)
    rows = []
    for (m, level), vals in sorted(ratios.items()):
        arr = np.array(vals)
        rows.append((m, level, float(arr.mean()), float(arr.std()), map_ratios.get((m, level), float("nan"))))
    write_csv(
        os.path.join(out, "anisotropy_vs_M.csv"),
        ["M", "alpha", "ratio_mean", "ratio_std", "ratio_map_mean"],
        rows,
    )
    outputs.append("anisotropy_vs_M.csv")
    return outputs, failures, {}


# ---------------------------------------------------------------------------
# image: regression quality across M and b
# ---------------------------------------------------------------------------


def _image_cell(payload: dict) -> dict:
    enc = payload["encoding"]
    tag = f"run_M{payload['m']}_b{_fmt_b(enc['growth'])}_seed{enc['seed']}"
    try:
        if payload["image"] in SYNTHETIC_IMAGES:
            image = synthetic_image(payload["image"], payload["side"])
        else:
            image = load_image(payload["image"], grayscale=True)
        cfg = _build_config(enc)
        head = {k: v for k, v in payload["decoder"].items() if k != "out_dim"}
        model = init_model(cfg, DecoderSpec(out_dim=1, **head))
        result = train_image(
            model,
            image,
            OptimizerSpec(**payload["optimizer"]),
            batch_size=payload["batch_size"],
            seed=enc["seed"],
        )
        cell_dir = os.path.join(payload["out"], tag)
        os.makedirs(cell_dir, exist_ok=True)
        rows = [
            (int(s), float(m), float(p))
            for s, m, p in zip(result.psnr_steps, result.eval_mse, result.psnr_trace)
        ]
        write_csv(os.path.join(cell_dir, "trace.csv"), ["step", "loss", "psnr"], rows)
        return {"ok": True, "tag": tag, "outputs": [f"{tag}/trace.csv"], "psnr": result.final_psnr}
    except Exception as exc:
        return {"ok": False, "tag": tag, "error": f"{type(exc).__name__}: {exc}"}


def cmd_image(block: dict, out: str, seeds: list, parallel: int) -> tuple:
    from .planner import solve_growth_factor

    name = block.get("image", "stripes")
    if name not in SYNTHETIC_IMAGES and not os.path.exists(name):
        raise ConfigError(f"image {name!r} is neither a synthetic name {sorted(SYNTHETIC_IMAGES)} nor a file")
    side = int(block.get("side", 256))
    m_list = block.get("m_list", [1, 2, 4, 8])
    if not isinstance(m_list, list) or not m_list or not all(isinstance(m, int) and m >= 1 for m in m_list):
        raise ConfigError("'m_list' must be a non-empty list of positive integers")
    n_levels = int(block.get("n_levels", 12))
    n_min = float(block.get("n_min", 16.0))
    b_theory = block.get("b_theory")
    if b_theory is None:
        try:
            plan = solve_growth_factor(
                PlanRequest(
                    target_fwhm=1.0 / side,
                    n_levels=n_levels,
                    n_min=n_min,
                    beta=float(block.get("beta", 3.0)),
                    dim=2,
                    table_size=int(block.get("table_size", 2**16)),
                )
            )
        except UnachievableTargetError as exc:
            raise ConfigError(f"cannot derive b_theory: {exc}") from None
        b_theory = plan.growth
    # Rounded so the zero-offset sweep entry and the M cells share one tag.
    b_theory = round(float(b_theory), 6)
    b_list = [round(b_theory + float(off), 6) for off in block.get("b_offsets", [-0.2, -0.1, 0.0, 0.1, 0.2])]
    if any(b <= 1.0 for b in b_list):
        raise ConfigError(f"b sweep {b_list} includes growth factors <= 1; raise b_theory or offsets")
    decoder, optimizer = _specs(block)
    if block.get("full_grid", False):
        cells = sorted({(m, b) for m in m_list for b in [b_theory, *b_list]})
    else:
        cells = [(m, b_theory) for m in m_list]
        cells.extend((1, b) for b in b_list if (1, b) not in cells)
    payloads = [
        {
            "m": m,
            "image": name,
            "side": side,
            "encoding": _encoding_payload(
                block, n_levels, b, seed, rotation=("progressive2d", m, "icosa")
            ),
            "decoder": decoder,
            "optimizer": optimizer,
            "batch_size": int(block.get("batch_size", 8192)),
            "out": out,
        }
        for m, b in cells
        for seed in seeds
    ]
    results = _run_cells(_image_cell, payloads, parallel)
    outputs, failures, rows = [], [], []
    for payload, res in zip(payloads, results):
        enc = payload["encoding"]
        if not res["ok"]:
            failures.append({"cell": res["tag"], "error": res["error"]})
            print(f"image {res['tag']}: FAILED {res['error']}")
            continue
        outputs.extend(res["outputs"])
        rows.append((name, payload["m"], enc["growth"], enc["seed"], res["psnr"]))
        print(f"image {res['tag']}: psnr={res['psnr']:.2f} dB")
    write_csv(os.path.join(out, "psnr_table.csv"), ["image", "M", "b", "seed", "psnr_db"], rows)
    outputs.append("psnr_table.csv")
    return outputs, failures, {"b_theory": b_theory}


# ---------------------------------------------------------------------------
# plan
# ---------------------------------------------------------------------------


def cmd_plan(block: dict, out: str, seeds: list, parallel: int) -> tuple:
    target = block.get("target_fwhm")
    pitch = block.get("pixel_pitch")
    if target is None and pitch is None:
        raise ConfigError("plan needs 'target_fwhm' or 'pixel_pitch'")
    try:
        req = PlanRequest(
            target_fwhm=float(target if target is not None else pitch),
            n_levels=int(block.get("n_levels", 16)),
            n_min=float(block.get("n_min", 16.0)),
            beta=float(block.get("beta", 3.0)),
            dim=int(block.get("dim", 2)),
            table_size=int(block.get("table_size", 2**20)),
            pixel_pitch=None if pitch is None else float(pitch),
        )
        report = plan_report(req)
    except UnachievableTargetError as exc:
        raise ConfigError(str(exc)) from None
    except ValueError as exc:
        raise ConfigError(f"bad plan request: {exc}") from None
    write_json(os.path.join(out, "plan.json"), report.payload())
    print(report.summary())
    return ["plan.json"], [], {}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

_COMMAND_FUNCS = {
    "psf": cmd_psf,
    "two-point": cmd_two_point,
    "collision": cmd_collision,
    "rotate-sweep": cmd_rotate_sweep,
    "image": cmd_image,
    "plan": cmd_plan,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="psf-lab",
        description="Point-response experiments for multiresolution hash encodings.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON config file (one block per subcommand)")
    parser.add_argument("--out", default=None, help="output directory (default from config)")
    parser.add_argument("--seeds", default=None, help="comma-separated seed list overriding the config")
    parser.add_argument("--parallel", type=int, default=None, help="worker processes for sweep cells")
    args = parser.parse_args(argv)

    start = time.time()
    try:
        config = _load_json(args.config)
        block, out, seeds, parallel = _resolve_block(config, args.command, args)
        os.makedirs(out, exist_ok=True)
        outputs, failures, flags = _COMMAND_FUNCS[args.command](block, out, seeds, parallel)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    resolved = {"block": block, "seeds": seeds}
    manifest = {
        "command": args.command,
        "version": __version__,
        "config_sha256": hashlib.sha256(json.dumps(resolved, sort_keys=True).encode()).hexdigest(),
        "config": resolved,
        "outputs": sorted(outputs),
        "failures": failures,
        "flags": flags,
        "wall_time_s": round(time.time() - start, 3),
    }
    write_json(os.path.join(out, "manifest.json"), manifest)
    status = "partial failure" if failures else "ok"
    print(f"{args.command}: {status}; {len(outputs)} artifacts in {out}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
