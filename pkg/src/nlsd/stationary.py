"""Stationary solitons: Newton solver, continuation in k, metrics and cutoff.

Stationary solutions q = Q(eta) exp(i k xi) obey

    -k Q + Q'' - (sigma/2) (Q^2 Q'' + Q Q'^2) + Q^3 = 0,   sigma = beta + gamma.

With Q = sqrt(k) Qt(x), x = sqrt(k) eta the same equation holds for Qt with
k -> 1 and sigma -> sigma*k, so every branch is a one-parameter family in
s = sigma*k.  Branches are computed in that normalized frame on a shared
x-grid and mapped to physical coordinates exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .errors import (BracketError, ConvergenceError, DegenerateSolutionError,
                     DomainError, MetricError)
from .model import (Grid, ModelParams, RealProfile, check_finite,
                    dirichlet_derivatives, fmt, total_power)

NORMALIZED_HALF_WIDTH = 24.0
NORMALIZED_DX = 0.02
DEFAULT_TOL = 1e-10
MAX_DS = 0.05


def nls_soliton(eta: np.ndarray, k: float = 1.0) -> np.ndarray:
    """Exact cubic NLS soliton sqrt(2k) sech(sqrt(k) eta)."""
    return math.sqrt(2.0 * k) / np.cosh(math.sqrt(k) * eta)


def fwhm(eta: np.ndarray, values: np.ndarray, level: str = "amplitude") -> float:
    """Full width at half maximum around the global maximum of ``|values|``.

    Parameters
    ----------
    level : {"amplitude", "intensity"}
        ``"amplitude"`` measures where |Q| drops to half its maximum,
        ``"intensity"`` where |Q|^2 drops to half its maximum.
    """
    a = np.abs(np.asarray(values, dtype=float))
    i = int(np.argmax(a))
    top = a[i]
    if not top > 0:
        raise MetricError("profile has no positive maximum")
    if level == "amplitude":
        half = 0.5 * top
    elif level == "intensity":
        half = top / math.sqrt(2.0)
    else:
        raise ValueError(f"unknown FWHM level {level!r}")
    j = i
    while j < a.size - 1 and a[j] > half:
        j += 1
    if a[j] > half:
        raise MetricError("profile does not cross half maximum on the right")
    right = eta[j - 1] + (half - a[j - 1]) * (eta[j] - eta[j - 1]) / (a[j] - a[j - 1])
    j = i
    while j > 0 and a[j] > half:
        j -= 1
    if a[j] > half:
        raise MetricError("profile does not cross half maximum on the left")
    left = eta[j] + (half - a[j]) * (eta[j + 1] - eta[j]) / (a[j + 1] - a[j])
    return float(right - left)


@dataclass(frozen=True, eq=False)
class SolitonSolution:
    """Converged stationary profile with its metrics.

    ``frame`` is ``"physical"`` for a solution of the stationary equation at
    (k, params), or ``"normalized"`` for the rescaled profile Qt(x) that
    solves the k = 1 equation with parameters ``params.scaled(k)``.
    """

    k: float
    profile: RealProfile
    params: ModelParams
    amplitude: float
    fwhm: float
    power: float
    residual_norm: float
    frame: str = "physical"
    residual_history: tuple = ()

    @property
    def grid(self) -> Grid:
        return self.profile.grid

    @property
    def values(self) -> np.ndarray:
        return self.profile.values

    @property
    def eta(self) -> np.ndarray:
        return self.profile.grid.eta

    def equation(self) -> tuple[float, ModelParams]:
        """(k, params) of the equation this profile satisfies in its frame."""
        if self.frame == "normalized":
            return 1.0, self.params.scaled(self.k)
        return self.k, self.params


def _make_solution(values, grid, k, params, frame="physical", history=(), residual=None):
    profile = RealProfile(values, grid)
    amp = float(np.max(np.abs(profile.values)))
    try:
        width = fwhm(grid.eta, profile.values)
    except MetricError:
        width = math.nan
    if residual is None:
        kk, pp = (1.0, params.scaled(k)) if frame == "normalized" else (k, params)
        residual = float(np.max(np.abs(stationary_residual(profile, kk, pp).values)))
    return SolitonSolution(k=float(k), profile=profile, params=params, amplitude=amp, fwhm=width,
                           power=total_power(profile), residual_norm=float(residual),
                           frame=frame, residual_history=tuple(history))


def _residual_arrays(Q, dx, k, s):
    d1, d2 = dirichlet_derivatives(Q, dx)
    r = -k * Q + d2 - 0.5 * s * (Q * Q * d2 + Q * d1 * d1) + Q ** 3
    return r, d1, d2


def stationary_residual(profile: RealProfile, k: float, params: ModelParams) -> RealProfile:
    """Pointwise residual of the stationary equation (centered, Dirichlet)."""
    if not k > 0:
        raise DomainError(f"k must be positive, got {k}")
    r, _, _ = _residual_arrays(profile.values, profile.grid.dx, k, params.sigma)
    return RealProfile(r, profile.grid)


def stationary_jacobian_banded(Q: np.ndarray, dx: float, k: float, s: float) -> np.ndarray:
    """Analytic tridiagonal Jacobian of the discrete residual, LAPACK band layout."""
    d1, d2 = dirichlet_derivatives(Q, dx)
    h2 = dx * dx
    diag = -k - 2.0 / h2 - 0.5 * s * (2.0 * Q * d2 - 2.0 * Q * Q / h2 + d1 * d1) + 3.0 * Q * Q
    upper = 1.0 / h2 - 0.5 * s * (Q * Q / h2 + Q * d1 / dx)
    lower = 1.0 / h2 - 0.5 * s * (Q * Q / h2 - Q * d1 / dx)
    ab = np.zeros((3, Q.size))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return ab


def banded_to_dense(ab: np.ndarray) -> np.ndarray:
    return np.diag(ab[1]) + np.diag(ab[0, 1:], 1) + np.diag(ab[2, :-1], -1)


def center_profile(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Shift a profile so its interpolated maximum sits at the grid midpoint."""
    a = np.abs(values)
    i = int(np.argmax(a))
    if 0 < i < grid.n - 1:
        den = a[i - 1] - 2 * a[i] + a[i + 1]
        off = 0.5 * (a[i - 1] - a[i + 1]) / den if den != 0 else 0.0
    else:
        off = 0.0
    eta = grid.eta
    shift = eta[i] + off * grid.dx - 0.5 * (grid.eta_min + grid.eta_max)
    if abs(shift) < 1e-14 * grid.dx:
        return values.copy()
    spl = CubicSpline(eta, values)
    target = eta + shift
    out = spl(target)
    out[(target < eta[0]) | (target > eta[-1])] = 0.0
    return out


def solve_newton(initial: RealProfile, k: float, params: ModelParams, tol: float = DEFAULT_TOL,
                 max_iter: int = 50, center: bool = True) -> SolitonSolution:
    """Newton iteration for the stationary equation with Dirichlet ends.

    The Jacobian is the analytic tridiagonal linearization.  On a symmetric
    grid the guess is centered and every iterate is symmetrized, which keeps
    the nearly singular odd (translation) direction out of the iteration.

    Raises
    ------
    ConvergenceError
        ``max_iter`` exceeded; carries the last residual norm and ``k``.
    DegenerateSolutionError
        The iteration landed on the zero solution.
    """
    if not k > 0:
        raise DomainError(f"k must be positive, got {k}")
    if not tol > 0:
        raise DomainError("tol must be positive")
    params.require_stationary()
    grid = initial.grid
    Q = initial.values.copy()
    if not np.any(Q):
        raise DomainError("initial guess must be nonzero")
    sym = grid.is_symmetric
    if sym and center:
        Q = center_profile(Q, grid)
        Q = 0.5 * (Q + Q[::-1])
    dx, s = grid.dx, params.sigma
    history = []
    for _ in range(max_iter + 1):
        F, _, _ = _residual_arrays(Q, dx, k, s)
        r = float(np.max(np.abs(F)))
        if not math.isfinite(r):
            raise ConvergenceError(f"Newton diverged at k={k}", last_residual=r, k=k)
        history.append(r)
        if r <= tol:
            break
        if len(history) > max_iter:
            raise ConvergenceError(f"Newton did not converge at k={k} in {max_iter} iterations "
                                   f"(residual {r:.3e})", last_residual=r, k=k)
        Q = Q - solve_banded((1, 1), stationary_jacobian_banded(Q, dx, k, s), F)
        if sym:
            Q = 0.5 * (Q + Q[::-1])
    if np.trapezoid(Q * Q, dx=dx) / math.sqrt(math.pi) < 1e-8:
        raise DegenerateSolutionError(f"Newton converged to the zero solution at k={k}",
                                      last_residual=history[-1], k=k)
    if Q[np.argmax(np.abs(Q))] < 0:
        Q = -Q
    # the effective diffraction 1 - sigma Q^2 / 2 must stay positive
    ell = 1.0 - 0.5 * s * float(np.max(Q * Q))
    if not ell > 0:
        raise ConvergenceError(f"Newton reached a non-elliptic profile at k={k} "
                               f"(1 - sigma*max(Q^2)/2 = {ell:.3e})", last_residual=history[-1], k=k)
    return _make_solution(Q, grid, k, params, history=history, residual=history[-1])


def normalized_grid(half_width: float = NORMALIZED_HALF_WIDTH, dx: float = NORMALIZED_DX) -> Grid:
    return Grid.symmetric(half_width, dx)


def _solve_normalized(guess: np.ndarray, xgrid: Grid, k: float, params: ModelParams, tol, max_iter):
    sol = solve_newton(RealProfile(guess, xgrid), 1.0, params.scaled(k), tol=tol, max_iter=max_iter)
    return replace(sol, k=float(k), params=params, frame="normalized")


def _walk(prev: SolitonSolution | None, guess, xgrid, k_from, k_to, params, tol, max_iter,
          max_halvings, max_ds=MAX_DS):
    """Continue a normalized solution from k_from to k_to, halving on failure."""
    sig = params.sigma
    cur = prev
    cur_guess = guess if prev is None else prev.values
    kc = k_from
    step = k_to - k_from
    if sig > 0:
        step = math.copysign(min(abs(step), max_ds / sig), step)
    halvings = 0
    while True:
        target = k_to if abs(k_to - kc) <= abs(step) * (1 + 1e-12) else kc + step
        try:
            cur = _solve_normalized(cur_guess, xgrid, target, params, tol, max_iter)
        except ConvergenceError as err:
            halvings += 1
            if halvings > max_halvings:
                raise ConvergenceError(f"continuation failed before k={k_to}",
                                       last_residual=err.last_residual, k=k_to) from err
            step *= 0.5
            continue
        kc = target
        cur_guess = cur.values
        halvings = 0
        if kc == k_to:
            return cur


def rescale(solution: SolitonSolution, direction: str, target_grid: Grid | None = None) -> SolitonSolution:
    """Map between normalized (Qt, x) and physical (Q, eta) representations.

    Q = sqrt(k) Qt and x = sqrt(k) eta.  Without ``target_grid`` the natural
    image grid is used and no interpolation occurs; otherwise the profile is
    resampled by cubic interpolation (zero outside the source support).
    """
    k = solution.k
    if not k > 0:
        raise DomainError("rescale needs k > 0")
    rk = math.sqrt(k)
    if direction == "normalized-to-physical":
        if solution.frame != "normalized":
            raise DomainError("solution is not in the normalized frame")
        amp, coord, frame = rk, 1.0 / rk, "physical"
    elif direction == "physical-to-normalized":
        if solution.frame != "physical":
            raise DomainError("solution is not in the physical frame")
        amp, coord, frame = 1.0 / rk, rk, "normalized"
    else:
        raise ValueError(f"unknown direction {direction!r}")
    grid = solution.grid.scaled(coord)
    values = amp * solution.values
    if target_grid is not None:
        spl = CubicSpline(grid.eta, values)
        te = target_grid.eta
        values = spl(te)
        values[(te < grid.eta[0]) | (te > grid.eta[-1])] = 0.0
        grid = target_grid
    return _make_solution(values, grid, k, solution.params, frame=frame,
                          history=solution.residual_history)


def soliton_on_grid(k: float, params: ModelParams, grid: Grid, tol: float = DEFAULT_TOL,
                    max_iter: int = 50) -> SolitonSolution:
    """Discretely exact soliton on a given symmetric physical grid.

    Continues in s = sigma*k from the NLS soliton on the scaled grid, then
    maps back without interpolation.
    """
    if not k > 0:
        raise DomainError(f"k must be positive, got {k}")
    params.require_stationary()
    rk = math.sqrt(k)
    xgrid = grid.scaled(rk)
    seed = nls_soliton(xgrid.eta)
    k0 = min(k, 1e-3 / params.sigma) if params.sigma > 0 else k
    base = _solve_normalized(seed, xgrid, k0, params, tol, max_iter)
    if k0 < k:
        base = _walk(base, None, xgrid, base.k, k, params, tol, max_iter, 10)
    # exact inverse scaling onto the caller's grid
    return _make_solution(rk * base.values, grid, k, params)


@dataclass(frozen=True)
class CutoffInfo:
    """Power maximum of a branch and the metrics of the solution nearest to it."""

    k_co: float
    P_max: float
    A_max_sq: float
    W_min: float

    def __iter__(self):
        return iter((self.k_co, self.P_max, self.A_max_sq, self.W_min))


@dataclass(frozen=True, eq=False)
class Branch:
    """Solutions ordered by strictly increasing k.

    All members share the normalized x-grid; their physical grids are its
    images eta = x / sqrt(k).
    """

    solutions: tuple
    params: ModelParams
    normalized: tuple = ()
    cutoff: CutoffInfo | None = None

    def __post_init__(self):
        ks = [s.k for s in self.solutions]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise DomainError("branch k values must be strictly increasing")

    def __len__(self):
        return len(self.solutions)

    @property
    def k(self) -> np.ndarray:
        return np.array([s.k for s in self.solutions])

    @property
    def power(self) -> np.ndarray:
        return np.array([s.power for s in self.solutions])

    @property
    def amplitude(self) -> np.ndarray:
        return np.array([s.amplitude for s in self.solutions])

    @property
    def fwhm(self) -> np.ndarray:
        return np.array([s.fwhm for s in self.solutions])

    @property
    def residual_norm(self) -> np.ndarray:
        return np.array([s.residual_norm for s in self.solutions])


def continue_branch(k_values, params: ModelParams, seed: RealProfile | None = None,
                    dx: float = NORMALIZED_DX, half_width: float | None = None,
                    tol: float = DEFAULT_TOL, max_iter: int = 50, max_halvings: int = 8) -> Branch:
    """Parametric continuation in k, each solve seeded by the previous one.

    Parameters
    ----------
    k_values : sequence of float
        Strictly increasing positive propagation constants.
    seed : RealProfile, optional
        Normalized-frame guess for the first solve; defaults to the NLS
        soliton sqrt(2) sech(x).  It is interpolated onto the branch grid.
    dx, half_width : float
        Normalized x-grid spacing and half-width.  The default half-width is
        max(24, 20 sqrt(k_max)), wide enough for tails below 1e-10.

    Raises
    ------
    ConvergenceError
        With ``k`` set to the failing value and ``partial`` holding the
        branch computed so far.
    """
    ks = [float(k) for k in k_values]
    if not ks or any(k <= 0 for k in ks):
        raise DomainError("k values must be positive")
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise DomainError("k values must be strictly increasing")
    params.require_stationary()
    if half_width is None:
        half_width = max(NORMALIZED_HALF_WIDTH, 20.0 * math.sqrt(ks[-1]))
    xgrid = normalized_grid(half_width, dx)
    if seed is None:
        guess = nls_soliton(xgrid.eta)
    else:
        spl = CubicSpline(seed.grid.eta, seed.values)
        guess = np.where(np.abs(xgrid.eta) <= seed.grid.eta_max, spl(xgrid.eta), 0.0)
    phys, norm = [], []
    prev = None
    for k in ks:
        try:
            if prev is None:
                try:
                    cur = _solve_normalized(guess, xgrid, k, params, tol, max_iter)
                except ConvergenceError:
                    start = _solve_normalized(guess, xgrid, min(k, 1e-3 / max(params.sigma, 1e-300)),
                                              params, tol, max_iter)
                    cur = _walk(start, None, xgrid, start.k, k, params, tol, max_iter, max_halvings)
            else:
                cur = _walk(prev, None, xgrid, prev.k, k, params, tol, max_iter, max_halvings)
        except ConvergenceError as err:
            partial = Branch(tuple(phys), params, tuple(norm))
            raise ConvergenceError(f"branch continuation failed at k={k}: {err}",
                                   last_residual=err.last_residual, k=k, partial=partial) from err
        prev = cur
        norm.append(cur)
        phys.append(rescale(cur, "normalized-to-physical"))
    return Branch(tuple(phys), params, tuple(norm))


def profile_metrics(solution: SolitonSolution, level: str = "amplitude") -> tuple[float, float, float]:
    """(amplitude, FWHM, power) of a profile.

    The FWHM uses linear interpolation between the grid points around the
    two half-maximum crossings; ``level`` selects amplitude or intensity.
    """
    v = solution.values
    amp = float(np.max(np.abs(v)))
    if not amp > 0:
        raise MetricError("degenerate profile: zero amplitude")
    return amp, fwhm(solution.eta, v, level), total_power(solution.profile)


def find_cutoff(branch: Branch) -> CutoffInfo:
    """Locate the power maximum by a quadratic through the three samples
    around the discrete maximum."""
    if len(branch) < 5:
        raise BracketError(f"need at least 5 solutions to bracket a power maximum, got {len(branch)}")
    k = branch.k
    P = branch.power
    i = int(np.argmax(P))
    if i == 0 or i == len(P) - 1:
        raise BracketError("no interior maximum of P(k) in the sampled range; "
                           f"widen the k range (sampled [{k[0]:.6g}, {k[-1]:.6g}])")
    kk, pp = k[i - 1:i + 2], P[i - 1:i + 2]
    a, b, c = np.polyfit(kk, pp, 2)
    if a < 0:
        k_co = -b / (2 * a)
        p_max = c - b * b / (4 * a)
    else:
        k_co, p_max = kk[1], pp[1]
    j = int(np.argmin(np.abs(k - k_co)))
    near = branch.solutions[j]
    return CutoffInfo(float(k_co), float(p_max), float(near.amplitude ** 2), float(near.fwhm))


@dataclass(frozen=True)
class ConstantsReport:
    """Cutoff scaling constants with per-sum values and spreads.

    ``C_P`` uses the pi^(-1/2)-normalized power; ``C_P_unnormalized`` is the
    same constant for the bare integral of Q^2.  Spreads are the maximum
    relative deviation from the mean, ``None`` for a single sum.
    """

    C_k: float
    C_P: float
    C_A: float
    C_W: float
    C_P_unnormalized: float
    spread: dict | None
    per_sum: tuple

    def to_dict(self) -> dict:
        return {"C_k": self.C_k, "C_P": self.C_P, "C_A": self.C_A, "C_W": self.C_W,
                "C_P_unnormalized": self.C_P_unnormalized, "spread": self.spread,
                "per_sum": list(self.per_sum)}


def cutoff_for_sum(sigma: float, dx: float = NORMALIZED_DX, half_width: float = NORMALIZED_HALF_WIDTH,
                   coarse_ds: float = 0.05, fine_ds: float = 0.002, tol: float = DEFAULT_TOL):
    """Cutoff of the branch with beta + gamma = sigma by a coarse-then-fine scan in s = sigma*k."""
    if not sigma > 0:
        raise BracketError("beta + gamma must be positive for a power maximum to exist")
    params = ModelParams(sigma, 0.0)
    s_coarse = np.arange(1, int(round(0.95 / coarse_ds)) + 1) * coarse_ds
    coarse = continue_branch(s_coarse / sigma, params, dx=dx, half_width=half_width, tol=tol)
    i = int(np.argmax(coarse.power))
    if i == 0 or i == len(coarse) - 1:
        raise BracketError("no interior power maximum in the coarse scan")
    lo, hi = s_coarse[i - 1], s_coarse[i + 1]
    m = int(round((hi - lo) / fine_ds))
    s_fine = lo + fine_ds * np.arange(m + 1)
    seed = coarse.normalized[i - 1].profile
    fine = continue_branch(s_fine / sigma, params, seed=seed, dx=dx, half_width=half_width, tol=tol)
    return find_cutoff(fine), fine


def verify_universal_constants(sums, dx: float = NORMALIZED_DX, half_width: float = NORMALIZED_HALF_WIDTH,
                               fine_ds: float = 0.002) -> ConstantsReport:
    """Scaling constants k_co*sigma, P_max*sqrt(sigma), A^2*sigma, W/sqrt(sigma)."""
    sums = [float(s) for s in sums]
    if not sums:
        raise DomainError("need at least one sum")
    rows = []
    cache = {}
    for sig in sums:
        if sig not in cache:
            cache[sig], _ = cutoff_for_sum(sig, dx=dx, half_width=half_width, fine_ds=fine_ds)
        c = cache[sig]
        rows.append({"sum": sig, "k_co": c.k_co, "P_max": c.P_max, "A_max_sq": c.A_max_sq, "W_min": c.W_min,
                     "C_k": c.k_co * sig, "C_P": c.P_max * math.sqrt(sig),
                     "C_A": c.A_max_sq * sig, "C_W": c.W_min / math.sqrt(sig)})
    means = {n: float(np.mean([r[n] for r in rows])) for n in ("C_k", "C_P", "C_A", "C_W")}
    spread = None
    if len(rows) > 1:
        spread = {n: float(max(abs(r[n] - means[n]) for r in rows) / abs(means[n])) for n in means}
    return ConstantsReport(means["C_k"], means["C_P"], means["C_A"], means["C_W"],
                           means["C_P"] * math.sqrt(math.pi), spread, tuple(rows))


def write_branch_csv(path, branch: Branch) -> Path:
    path = Path(path)
    lines = ["k,amplitude,fwhm,power,residual_norm"]
    for s in branch.solutions:
        lines.append(",".join(fmt(v) for v in (s.k, s.amplitude, s.fwhm, s.power, s.residual_norm)))
    path.write_text("\n".join(lines) + "\n")
    return path


def cutoff_summary(branch: Branch, xgrid: Grid | None = None) -> dict:
    """Cutoff JSON payload; a missing maximum is reported, not raised."""
    out = {"beta": branch.params.beta, "gamma": branch.params.gamma}
    if branch.normalized:
        out["grid"] = {"frame": "normalized", **branch.normalized[0].grid.to_dict()}
    try:
        c = find_cutoff(branch)
        out.update({"k_co": c.k_co, "P_max": c.P_max, "A_max_sq": c.A_max_sq, "W_min": c.W_min})
    except BracketError as err:
        out.update({"k_co": None, "P_max": None, "A_max_sq": None, "W_min": None,
                    "status": "no interior maximum", "detail": str(err)})
    return out


def write_cutoff_json(path, branch: Branch) -> Path:
    path = Path(path)
    path.write_text(json.dumps(cutoff_summary(branch), indent=2, sort_keys=True) + "\n")
    return path
