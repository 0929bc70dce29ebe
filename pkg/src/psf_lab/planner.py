"""Hyperparameter planning: pick the growth factor from a width target.

Works backwards from a desired point-response width: given the level count,
base resolution, and an assumed total broadening factor, solve for the
growth factor whose average resolution delivers that width, then report the
derived resolution/anisotropy/collision figures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from scipy.optimize import brentq

from .kernels import anisotropy_ratio

# No plan may assume less broadening than the interpolation kernel itself
# contributes; see kernels.kernel_fwhm for where widths bottom out.
MIN_BETA = 1.1808

GROWTH_BRACKET = (1.0 + 1e-9, 8.0)
SOLVER_REL_TOL = 1e-6


class UnachievableTargetError(ValueError):
    """Target width outside what (L, n_min) can reach for any growth factor."""

    def __init__(self, message: str, achievable: tuple):
        super().__init__(message)
        self.achievable = achievable  # (min_fwhm, max_fwhm)


def n_avg(n_levels: int, n_min: float, growth: float) -> float:
    """Arithmetic mean of the level resolutions n_min * growth**l.

    Stable down to growth -> 1+ (and exact at growth = 1 / n_levels = 1).
    """
    if n_levels < 1:
        raise ValueError(f"n_levels must be >= 1, got {n_levels}")
    if n_min <= 0:
        raise ValueError(f"n_min must be positive, got {n_min}")
    if growth <= 0:
        raise ValueError(f"growth must be positive, got {growth}")
    if n_levels == 1 or growth == 1.0:
        return float(n_min)
    log_b = math.log(growth)
    return float(n_min * math.expm1(n_levels * log_b) / (n_levels * math.expm1(log_b)))


@dataclass(frozen=True)
class PlanRequest:
    target_fwhm: float
    n_levels: int = 16
    n_min: float = 16.0
    beta: float = 3.0  # assumed total broadening of the trained response
    dim: int = 2
    table_size: int = 2**20
    pixel_pitch: float | None = None

    def __post_init__(self):
        if self.target_fwhm <= 0:
            raise ValueError(f"target_fwhm must be positive, got {self.target_fwhm}")
        if self.beta < MIN_BETA:
            raise ValueError(f"beta must be >= {MIN_BETA}, got {self.beta}")
        if self.n_levels < 1:
            raise ValueError(f"n_levels must be >= 1, got {self.n_levels}")
        if self.n_min <= 0:
            raise ValueError(f"n_min must be positive, got {self.n_min}")
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.table_size < 1:
            raise ValueError(f"table_size must be >= 1, got {self.table_size}")
        if self.pixel_pitch is not None and self.pixel_pitch <= 0:
            raise ValueError(f"pixel_pitch must be positive, got {self.pixel_pitch}")


@dataclass(frozen=True)
class PlanResult:
    growth: float
    n_avg: float
    fwhm_axis: float  # beta / n_avg at the solution; equals the target
    fwhm_diag: float  # axis width scaled by the diagonal reach factor
    d_crit_est: float  # two equal points blur together below about one width
    load_factors: tuple  # per-level dense vertex count over table capacity


def _load_factors(req: PlanRequest, growth: float) -> tuple:
    factors = []
    for level in range(req.n_levels):
        n = req.n_min * growth**level
        factors.append(float((math.floor(n) + 1) ** req.dim / req.table_size))
    return tuple(factors)


def _result_at(req: PlanRequest, growth: float) -> PlanResult:
    avg = n_avg(req.n_levels, req.n_min, growth)
    fwhm = req.beta / avg
    return PlanResult(
        growth=float(growth),
        n_avg=avg,
        fwhm_axis=fwhm,
        fwhm_diag=fwhm * math.sqrt(anisotropy_ratio(req.dim)),
        d_crit_est=fwhm,
        load_factors=_load_factors(req, growth),
    )


def solve_growth_factor(req: PlanRequest) -> PlanResult:
    """Invert target_fwhm = beta / n_avg(growth) by bisection on (1, 8].

    The map is strictly decreasing in growth for L >= 2, so a sign check on
    the bracket decides achievability up front.
    """
    lo, hi = GROWTH_BRACKET
    f_max = req.beta / n_avg(req.n_levels, req.n_min, lo)  # coarsest reachable
    f_min = req.beta / n_avg(req.n_levels, req.n_min, hi)  # finest reachable
    if req.n_levels == 1:
        if abs(req.target_fwhm - f_max) <= SOLVER_REL_TOL * req.target_fwhm:
            return _result_at(req, 1.0)
        raise UnachievableTargetError(
            f"single-level schedule at n_min={req.n_min} fixes fwhm at {f_max:.6g}; "
            f"target {req.target_fwhm:.6g} is unachievable",
            (f_max, f_max),
        )
    if not f_min <= req.target_fwhm <= f_max:
        raise UnachievableTargetError(
            f"target fwhm {req.target_fwhm:.6g} unachievable with n_levels={req.n_levels}, "
            f"n_min={req.n_min}, beta={req.beta}: achievable range is "
            f"[{f_min:.6g}, {f_max:.6g}] for growth in ({lo:.0f}, {hi:.0f}]",
            (f_min, f_max),
        )
    growth = brentq(
        lambda b: req.beta / n_avg(req.n_levels, req.n_min, b) - req.target_fwhm,
        lo,
        hi,
        xtol=1e-13,
        rtol=8.9e-16,
    )
    return _result_at(req, growth)


@dataclass(frozen=True)
class PlanReport:
    request: PlanRequest
    one_px: PlanResult  # solution targeting one pixel pitch
    two_p5px: Optional[PlanResult]  # 2.5 pixel pitches; None when out of range

    def payload(self) -> dict:
        """The machine-readable plan; scalar figures come from the 1px plan."""
        return {
            "b_1px": self.one_px.growth,
            "b_2p5px": None if self.two_p5px is None else self.two_p5px.growth,
            "n_avg": self.one_px.n_avg,
            "fwhm_axis": self.one_px.fwhm_axis,
            "fwhm_diag": self.one_px.fwhm_diag,
            "d_crit_est": self.one_px.d_crit_est,
            "load_factors": list(self.one_px.load_factors),
        }

    def summary(self) -> str:
        req = self.request
        pitch = req.pixel_pitch if req.pixel_pitch is not None else req.target_fwhm
        if self.two_p5px is None:
            wide = "  2.5 px target: unachievable with this schedule"
        else:
            wide = (
                f"  2.5 px target: growth={self.two_p5px.growth:.6f}  n_avg={self.two_p5px.n_avg:.2f}  "
                f"fwhm_axis={self.two_p5px.fwhm_axis:.6g}"
            )
        lines = [
            f"plan for L={req.n_levels}, n_min={req.n_min}, beta={req.beta}, dim={req.dim}, T={req.table_size}",
            f"  pixel pitch {pitch:.6g}",
            f"  1.0 px target: growth={self.one_px.growth:.6f}  n_avg={self.one_px.n_avg:.2f}  "
            f"fwhm_axis={self.one_px.fwhm_axis:.6g}  fwhm_diag={self.one_px.fwhm_diag:.6g}",
            wide,
            f"  estimated two-point resolution limit: {self.one_px.d_crit_est:.6g}",
            f"  top-level load factor at 1 px: {self.one_px.load_factors[-1]:.4g}",
        ]
        return "\n".join(lines)


def plan_report(req: PlanRequest) -> PlanReport:
    """Solve both standard targets: one pixel, and 2.5 pixels.

    The wider 2.5 px variant trades peak sharpness for an easier collision
    budget; both use the pixel pitch when given, else target_fwhm as the
    pitch. Only the requested 1 px target decides success: a coarse schedule
    can make the advisory 2.5 px variant fall outside the growth bracket, in
    which case it is reported as missing rather than failing the plan.
    """
    pitch = req.pixel_pitch if req.pixel_pitch is not None else req.target_fwhm
    one = solve_growth_factor(
        PlanRequest(
            target_fwhm=pitch,
            n_levels=req.n_levels,
            n_min=req.n_min,
            beta=req.beta,
            dim=req.dim,
            table_size=req.table_size,
            pixel_pitch=req.pixel_pitch,
        )
    )
    try:
        two = solve_growth_factor(
            PlanRequest(
                target_fwhm=2.5 * pitch,
                n_levels=req.n_levels,
                n_min=req.n_min,
                beta=req.beta,
                dim=req.dim,
                table_size=req.table_size,
                pixel_pitch=req.pixel_pitch,
            )
        )
    except UnachievableTargetError:
        two = None
    return PlanReport(request=req, one_px=one, two_p5px=two)
