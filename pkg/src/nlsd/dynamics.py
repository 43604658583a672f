"""Time propagation, initial conditions, collapse detection and run outcomes."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import find_peaks

from . import _kernels as K
from .errors import DomainError, InstabilityError, SeparationError
from .model import ComplexField, Grid, ModelParams, fmt, write_field_csv
from .stationary import SolitonSolution
from .variational import VAPrediction

OBS_COLUMNS = ("xi", "peak_abs2", "power", "hamiltonian", "momentum", "center", "width",
               "core_fwhm", "peak_eta")
MAX_SNAPSHOTS = 2000
OVERLAP_LIMIT = 1e-4


@dataclass(frozen=True)
class SpongeSpec:
    """Quadratic damping ramp over the outer ``width_fraction`` of each side."""

    width_fraction: float = 0.1
    strength: float = 1.0


def sponge_profile(grid: Grid, spec: SpongeSpec | None) -> np.ndarray:
    if spec is None:
        return np.zeros(grid.n)
    eta = grid.eta
    mid = 0.5 * (grid.eta_min + grid.eta_max)
    half = 0.5 * (grid.eta_max - grid.eta_min)
    w = spec.width_fraction * half
    d = np.clip((np.abs(eta - mid) - (half - w)) / w, 0.0, 1.0)
    return spec.strength * d * d


@dataclass(frozen=True)
class SimulationConfig:
    """Time-stepping and collapse-detection settings.

    ``dt`` defaults to ``dt_factor * dx^2`` and must not exceed
    ``dt_safety * dx^2``.  Collapse is declared either when the peak
    intensity exceeds ``collapse_amp_factor`` times its initial value while
    the core narrows below ``collapse_width_cells`` cells, or when it reaches
    ``collapse_intensity_fraction`` of the critical intensity at which the
    equation stops being dispersive (disabled with ``None``).
    """

    xi_max: float = 100.0
    dt: float | None = None
    dt_factor: float = 0.05
    dt_safety: float = 0.1
    snapshot_stride: int | None = None
    observable_stride: int = 1
    sponge: SpongeSpec | None = None
    collapse_amp_factor: float = 10.0
    collapse_width_cells: int = 4
    collapse_intensity_fraction: float | None = 0.99
    cubic: bool = True

    def __post_init__(self):
        if not self.xi_max > 0:
            raise DomainError("xi_max must be positive")
        if self.dt is not None and not self.dt > 0:
            raise DomainError("dt must be positive")
        if not self.collapse_amp_factor > 1:
            raise DomainError("collapse_amp_factor must exceed 1")
        if self.collapse_width_cells < 1 or self.observable_stride < 1:
            raise DomainError("strides and cell counts must be positive")

    def resolve_dt(self, dx: float) -> tuple[float, int]:
        """Step size and step count; dt is shrunk so that n*dt = xi_max exactly."""
        dt = self.dt if self.dt is not None else self.dt_factor * dx * dx
        if dt > self.dt_safety * dx * dx * (1 + 1e-12):
            raise DomainError(f"dt={dt:.3e} exceeds {self.dt_safety} dx^2 = {self.dt_safety * dx * dx:.3e}")
        nsteps = int(math.ceil(self.xi_max / dt - 1e-9))
        return self.xi_max / nsteps, nsteps

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sponge"] = None if self.sponge is None else asdict(self.sponge)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationConfig":
        d = dict(d)
        if d.get("sponge") is not None:
            sp = d["sponge"]
            d["sponge"] = SpongeSpec(**sp) if isinstance(sp, dict) else SpongeSpec()
        return cls(**d)


@dataclass(frozen=True)
class CollapseReport:
    """First collapse trigger: position, distance and the peak history before it."""

    xi_collapse: float
    eta_location: float
    peak_growth_curve: np.ndarray
    trigger: str

    def to_dict(self) -> dict:
        return {"xi_collapse": self.xi_collapse, "eta_location": self.eta_location,
                "trigger": self.trigger,
                "peak_growth_curve": [[float(x), float(p)] for x, p in self.peak_growth_curve]}


@dataclass(eq=False)
class SimulationResult:
    """Observables, snapshots and outcome of one run."""

    observables: dict
    snapshot_xi: np.ndarray
    snapshot_values: np.ndarray
    final: ComplexField
    params: ModelParams
    config: SimulationConfig
    dt: float
    steps: int
    collapse: CollapseReport | None = None
    outcome: str = "inconclusive"
    meta: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return self.final.grid

    @property
    def xi(self) -> np.ndarray:
        return self.observables["xi"]

    @property
    def snapshots(self) -> list:
        g = self.grid
        return [(float(x), ComplexField.from_complex(v, g))
                for x, v in zip(self.snapshot_xi, self.snapshot_values)]

    def drift(self, name: str) -> float:
        """Max relative deviation of a conserved quantity from its initial value."""
        s = self.observables[name]
        return float(np.max(np.abs(s - s[0])) / abs(s[0]))


def detect_collapse(observables: dict, config: SimulationConfig, dx: float,
                    critical_intensity: float = math.inf, peak0: float | None = None,
                    history: int = 50) -> CollapseReport | None:
    """Scan an observables series for the first collapse trigger."""
    peak = observables["peak_abs2"]
    if peak0 is None:
        peak0 = peak[0]
    crit = _crit_level(config, critical_intensity)
    amp = (peak > config.collapse_amp_factor * peak0) & (observables["core_fwhm"] < config.collapse_width_cells * dx)
    hit_i = peak >= crit
    hits = np.nonzero(amp | hit_i)[0]
    if hits.size == 0:
        return None
    i = int(hits[0])
    trigger = "critical-intensity" if hit_i[i] else "amplitude"
    lo = max(0, i - history + 1)
    curve = np.column_stack([observables["xi"][lo:i + 1], peak[lo:i + 1]])
    return CollapseReport(float(observables["xi"][i]), float(observables["peak_eta"][i]), curve, trigger)


def _crit_level(config: SimulationConfig, critical_intensity: float) -> float:
    if config.collapse_intensity_fraction is None or not math.isfinite(critical_intensity):
        return math.inf
    return config.collapse_intensity_fraction * critical_intensity


def evolve(initial: ComplexField, params: ModelParams, config: SimulationConfig,
           classify: str | None = "propagation") -> SimulationResult:
    """Integrate the evolution equation with classic RK4 on the method of lines.

    Integration stops at the first collapse trigger.  Non-finite values that
    appear without a prior trigger raise InstabilityError.

    Parameters
    ----------
    classify : {"propagation", "interaction", None}
        Outcome classifier applied to the finished run.
    """
    initial.check()
    grid = initial.grid
    dx = grid.dx
    dt, nsteps = config.resolve_dt(dx)
    obs_stride = config.observable_stride
    snap_stride = config.snapshot_stride or max(1, int(math.ceil(nsteps / MAX_SNAPSHOTS)))
    obs = np.zeros((nsteps // obs_stride + 2, K.N_OBS))
    snaps = np.zeros((nsteps // snap_stride + 2, grid.n), dtype=np.complex128)
    snap_xi = np.zeros(snaps.shape[0])
    q = initial.values.astype(np.complex128)
    peak0 = float(np.max(initial.abs2))
    rho_c = params.critical_intensity()
    crit = _crit_level(config, rho_c)
    damp = sponge_profile(grid, config.sponge)
    steps, status, trigger, no, ns = K.integrate(
        q, grid.eta, dx, params.beta, params.gamma, 1.0 if config.cubic else 0.0, damp, dt, nsteps,
        obs_stride, snap_stride, obs, snaps, snap_xi, peak0, float(config.collapse_amp_factor),
        float(config.collapse_width_cells), crit)
    if status == K.STATUS_NONFINITE:
        raise InstabilityError(f"non-finite field at xi={steps * dt:.6g} without collapse detection; "
                               f"try a smaller dt (current {dt:.3e})", xi=steps * dt)
    observables = {name: obs[:no, j].copy() for j, name in enumerate(OBS_COLUMNS)}
    result = SimulationResult(observables, snap_xi[:ns].copy(), snaps[:ns].copy(),
                              ComplexField.from_complex(q, grid), params, config, dt, int(steps))
    if status == K.STATUS_COLLAPSE:
        result.collapse = detect_collapse(observables, config, dx, rho_c, peak0)
    result.meta["critical_intensity"] = rho_c
    if classify == "propagation":
        result.outcome = classify_propagation(result)
    elif classify == "interaction":
        result.outcome = classify_interaction(result)
    return result


def classify_propagation(result: SimulationResult, stable_tol: float = 0.05,
                         min_oscillations: int = 3) -> str:
    """Outcome of a single-beam run.

    ``collapse`` if a trigger fired; ``stable-propagation`` if the peak
    intensity over the second half varies by at most ``stable_tol``
    (relative); ``breather`` if it oscillates with at least
    ``min_oscillations`` maxima there; ``dispersal`` if the final peak fell
    below a tenth of the initial one; otherwise ``inconclusive``.
    """
    if result.collapse is not None:
        return "collapse"
    xi = result.observables["xi"]
    peak = result.observables["peak_abs2"]
    late = peak[xi >= 0.5 * xi[-1]]
    if peak[-1] < 0.1 * peak[0]:
        return "dispersal"
    mean = float(np.mean(late))
    if (late.max() - late.min()) <= stable_tol * mean:
        return "stable-propagation"
    maxima, _ = find_peaks(late, prominence=0.01 * mean)
    if maxima.size >= min_oscillations:
        return "breather"
    return "inconclusive"


def perturbed_soliton(solution: SolitonSolution, mode: np.ndarray | None = None, sign: int = 1,
                      epsilon: float = 0.0) -> ComplexField:
    """Q + sign * epsilon * v in the real channel; v is rescaled to unit max-norm."""
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    if epsilon < 0:
        raise DomainError("epsilon must be non-negative")
    re = solution.values.copy()
    if mode is not None and epsilon > 0:
        v = np.asarray(mode, dtype=float)
        if v.shape != re.shape:
            raise DomainError("mode does not match the soliton grid")
        re = re + sign * epsilon * v / np.abs(v).max()
    return ComplexField(re, np.zeros_like(re), solution.grid)


def gaussian_input(prediction: VAPrediction, grid: Grid) -> ComplexField:
    """Real Gaussian A exp(-eta^2 / (2 W^2)) sampled on the grid."""
    eta = grid.eta
    return ComplexField(prediction.A * np.exp(-eta ** 2 / (2.0 * prediction.W ** 2)), np.zeros(grid.n), grid)


def pair_overlap(solution: SolitonSolution, half_separation: float) -> float:
    """Intensity of one copy at the midpoint relative to its peak intensity."""
    spl = CubicSpline(solution.eta, solution.values)
    x = abs(half_separation)
    v = float(spl(x)) if x <= solution.eta[-1] else 0.0
    return v * v / solution.amplitude ** 2


def minimal_half_separation(solution: SolitonSolution, step: float = 0.1) -> float:
    """Smallest multiple of ``step`` satisfying the overlap precondition."""
    x = step
    while pair_overlap(solution, x) >= OVERLAP_LIMIT:
        x += step
    return round(x, 12)


def soliton_pair(solution: SolitonSolution, half_separation: float, phase: str,
                 grid: Grid | None = None) -> ComplexField:
    """Q(eta - eta0) +/- Q(eta + eta0) with zero relative velocity.

    The default grid extends the soliton's grid by ``half_separation`` on
    each side at equal spacing.  The two copies are mirror images, so the
    in-phase input is exactly even and the out-of-phase input exactly odd.
    """
    if phase not in ("in-phase", "out-of-phase"):
        raise DomainError(f"phase must be 'in-phase' or 'out-of-phase', got {phase!r}")
    ov = pair_overlap(solution, half_separation)
    if ov >= OVERLAP_LIMIT:
        raise SeparationError(f"copies overlap at the midpoint: intensity ratio {ov:.3e} >= {OVERLAP_LIMIT:g}; "
                              f"increase half_separation beyond {half_separation}")
    if grid is None:
        grid = Grid.symmetric(solution.grid.eta_max + half_separation, solution.grid.dx)
    if not grid.is_symmetric:
        raise DomainError("pair grid must be symmetric")
    spl = CubicSpline(solution.eta, solution.values)
    eta = grid.eta
    x = eta - half_separation
    right = np.where(np.abs(x) <= solution.eta[-1], spl(x), 0.0)
    left = right[::-1]
    s = 1.0 if phase == "in-phase" else -1.0
    re = right + s * left
    if phase == "out-of-phase":
        re[grid.center_index] = 0.0
    return ComplexField(re, np.zeros(grid.n), grid)


@dataclass(frozen=True)
class PairTrack:
    """Two highest intensity maxima per snapshot."""

    xi: np.ndarray
    separation: np.ndarray  # 0 when merged
    merged: np.ndarray
    peak: np.ndarray

    def separation_at(self, xi: float) -> float:
        return float(np.interp(xi, self.xi, self.separation))


def _refine(eta, a, i):
    if 0 < i < a.size - 1:
        den = a[i - 1] - 2 * a[i] + a[i + 1]
        if den != 0:
            return eta[i] + 0.5 * (a[i - 1] - a[i + 1]) / den * (eta[1] - eta[0])
    return eta[i]


def track_pair(result: SimulationResult, rel_height: float = 0.2, valley: float = 0.9) -> PairTrack:
    """Follow the two highest maxima through the snapshots.

    Two maxima count as merged when the valley between them exceeds
    ``valley`` times the lower one.
    """
    eta = result.grid.eta
    seps, merged, peaks = [], [], []
    for v in result.snapshot_values:
        a = v.real ** 2 + v.imag ** 2
        top = a.max()
        peaks.append(top)
        idx, _ = find_peaks(a, height=rel_height * top)
        if idx.size < 2:
            seps.append(0.0)
            merged.append(True)
            continue
        two = np.sort(idx[np.argsort(a[idx])[-2:]])
        low = min(a[two[0]], a[two[1]])
        if a[two[0]:two[1] + 1].min() > valley * low:
            seps.append(0.0)
            merged.append(True)
            continue
        seps.append(abs(_refine(eta, a, two[1]) - _refine(eta, a, two[0])))
        merged.append(False)
    return PairTrack(result.snapshot_xi.copy(), np.array(seps), np.array(merged), np.array(peaks))


def classify_interaction(result: SimulationResult, min_periods: int = 3,
                         return_fraction: float = 0.8) -> str:
    """Outcome of a two-soliton run.

    ``collapse`` if a collapse report exists.  ``separation`` if the
    separation never drops (beyond one cell) and ends above twice its
    initial value.  ``elastic-oscillation`` if the pair merges and returns to
    at least ``return_fraction`` of the initial separation ``min_periods``
    times.  ``pulson-merger`` if after the first merger the separation never
    climbs back to ``return_fraction`` of the initial one and a localized
    peak persists.  Anything else is ``inconclusive``.
    """
    if result.collapse is not None:
        return "collapse"
    tr = track_pair(result)
    d0 = tr.separation[0]
    if d0 <= 0:
        return "inconclusive"
    d = tr.separation
    dx = result.grid.dx
    if not tr.merged.any():
        if np.all(np.diff(d) >= -dx) and d[-1] > 2.0 * d0:
            return "separation"
        return "inconclusive"
    periods = 0
    state = "apart"
    for m, s in zip(tr.merged, d):
        if state == "apart" and m:
            state = "merged"
        elif state == "merged" and not m and s >= return_fraction * d0:
            periods += 1
            state = "apart"
    if periods >= min_periods and np.isfinite(tr.peak).all():
        return "elastic-oscillation"
    first = int(np.argmax(tr.merged))
    after = d[first:]
    if np.all(after < return_fraction * d0) and tr.peak[-1] >= 0.5 * tr.peak[0]:
        return "pulson-merger"
    return "inconclusive"


def perturbation_norm(result: SimulationResult, solution: SolitonSolution) -> np.ndarray:
    """max |q e^{-i k xi} - Q| per snapshot, phase referenced to the soliton."""
    ph = np.exp(-1j * solution.k * result.snapshot_xi)[:, None]
    return np.max(np.abs(result.snapshot_values * ph - solution.values[None, :]), axis=1)


def growth_rate(result: SimulationResult, solution: SolitonSolution, lo: float, hi: float) -> float:
    """Least-squares slope of log(perturbation norm) while it lies in [lo, hi]."""
    nrm = perturbation_norm(result, solution)
    xi = result.snapshot_xi
    first = int(np.argmax(nrm > lo))
    sel = np.arange(first, nrm.size)
    sel = sel[nrm[sel] < hi]
    sel = sel[sel == first + np.arange(sel.size)]
    if sel.size < 3:
        raise DomainError("too few snapshots in the linear regime")
    return float(np.polyfit(xi[sel], np.log(nrm[sel]), 1)[0])


def write_observables_csv(path, result: SimulationResult) -> Path:
    path = Path(path)
    cols = OBS_COLUMNS
    data = np.column_stack([result.observables[c] for c in cols])
    lines = [",".join(cols)]
    lines.extend(",".join(fmt(v) for v in row) for row in data)
    path.write_text("\n".join(lines) + "\n")
    return path


def run_manifest(result: SimulationResult, extra: dict | None = None) -> dict:
    out = {"params": result.params.to_dict(), "config": result.config.to_dict(),
           "grid": result.grid.to_dict(), "dt": result.dt, "steps": result.steps,
           "outcome": result.outcome,
           "collapse": None if result.collapse is None else result.collapse.to_dict()}
    out.update(extra or {})
    return out


def write_run(out_dir, result: SimulationResult, extra: dict | None = None,
              max_snapshot_files: int = 20) -> Path:
    """Observables CSV, a subsample of snapshot CSVs and the run manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_observables_csv(out / "observables.csv", result)
    sdir = out / "snapshots"
    sdir.mkdir(exist_ok=True)
    m = len(result.snapshot_xi)
    picks = np.unique(np.linspace(0, m - 1, min(m, max_snapshot_files)).round().astype(int))
    for j, i in enumerate(picks):
        f = ComplexField.from_complex(result.snapshot_values[i], result.grid)
        write_field_csv(sdir / f"snapshot_{j:04d}.csv", f, {"xi": float(result.snapshot_xi[i])})
    (out / "run.json").write_text(json.dumps(run_manifest(result, extra), indent=2, sort_keys=True) + "\n")
    return out
