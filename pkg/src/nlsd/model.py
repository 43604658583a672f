"""Model parameters, grids, fields and conserved quantities.

The evolution equation is

    i q_xi + q_etaeta + |q|^2 q - (beta/2) (|q|^2 q_etaeta + q* q_eta^2)
           + (gamma/2) (q* q_eta^2 - 2 q |q_eta|^2 - q^2 q_etaeta*) = 0,

with Hamiltonian density

    |q_eta|^2 - |q|^4/2 - (beta/2)|q|^2 |q_eta|^2
              - (gamma/4) [(q*)^2 q_eta^2 + q^2 (q_eta*)^2].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, NonFiniteError

SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class ModelParams:
    """Nonlinear-diffraction coefficients."""

    beta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.beta) and math.isfinite(self.gamma)):
            raise DomainError(f"beta and gamma must be finite, got ({self.beta}, {self.gamma})")
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def sigma(self) -> float:
        """The sum beta + gamma that controls stationary solutions."""
        return self.beta + self.gamma

    @property
    def delta(self) -> float:
        return self.beta - self.gamma

    def require_stationary(self) -> None:
        if self.sigma < 0:
            raise DomainError(f"beta + gamma must be >= 0 for stationary solutions, got {self.sigma}")

    def scaled(self, factor: float) -> "ModelParams":
        return ModelParams(self.beta * factor, self.gamma * factor)

    def critical_intensity(self) -> float:
        """Smallest |q|^2 at which the principal part of the evolution loses
        its dispersive character.

        Linearizing the second-order terms around a state of intensity rho
        gives a symbol that stays dispersive while
        (1 - beta*rho/2)^2 > (gamma*rho/2)^2.  Returns ``inf`` when no
        positive root exists.
        """
        roots = [2.0 / c for c in (self.beta + self.gamma, self.beta - self.gamma) if c > 0]
        return min(roots) if roots else math.inf

    def to_dict(self) -> dict:
        return {"beta": self.beta, "gamma": self.gamma}


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [eta_min, eta_max] with n points."""

    eta_min: float
    eta_max: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise DomainError(f"grid needs n >= 3 points, got {self.n}")
        if not (math.isfinite(self.eta_min) and math.isfinite(self.eta_max)):
            raise DomainError("grid bounds must be finite")
        if not self.eta_min < self.eta_max:
            raise DomainError(f"eta_min < eta_max required, got [{self.eta_min}, {self.eta_max}]")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "eta_min", float(self.eta_min))
        object.__setattr__(self, "eta_max", float(self.eta_max))

    @classmethod
    def symmetric(cls, half_width: float, dx: float) -> "Grid":
        """Odd-sized grid symmetric about zero with spacing exactly ``dx``.

        The half-width is rounded up to a whole number of cells.
        """
        if dx <= 0 or half_width <= 0:
            raise DomainError("half_width and dx must be positive")
        m = int(math.ceil(half_width / dx - 1e-9))
        return cls(-m * dx, m * dx, 2 * m + 1)

    @property
    def dx(self) -> float:
        return (self.eta_max - self.eta_min) / (self.n - 1)

    @property
    def eta(self) -> np.ndarray:
        if self.is_symmetric:
            c = (self.n - 1) // 2
            return (np.arange(self.n) - c) * self.dx
        return self.eta_min + self.dx * np.arange(self.n)

    @property
    def is_symmetric(self) -> bool:
        return self.n % 2 == 1 and self.eta_min == -self.eta_max

    @property
    def center_index(self) -> int:
        return (self.n - 1) // 2

    def scaled(self, factor: float) -> "Grid":
        """Grid with every coordinate multiplied by ``factor`` (> 0)."""
        return Grid(self.eta_min * factor, self.eta_max * factor, self.n)

    def to_dict(self) -> dict:
        return {"eta_min": self.eta_min, "eta_max": self.eta_max, "n": self.n, "dx": self.dx}


def check_finite(values: np.ndarray, grid: Grid | None = None, what: str = "field") -> None:
    """Raise NonFiniteError pointing at the first non-finite entry."""
    ok = np.isfinite(values)
    if not ok.all():
        i = int(np.argmin(ok))
        raise NonFiniteError(i, float(grid.eta[i]) if grid is not None else None, what)


@dataclass(frozen=True, eq=False)
class RealProfile:
    """Real amplitudes Q(eta_j) on a grid."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise DomainError(f"profile length {v.shape} does not match grid size {self.grid.n}")
        check_finite(v, self.grid, "profile")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex amplitudes stored as separate real and imaginary channels."""

    re: np.ndarray
    im: np.ndarray
    grid: Grid

    def __post_init__(self):
        re = np.asarray(self.re, dtype=float)
        im = np.asarray(self.im, dtype=float)
        if re.shape != (self.grid.n,) or im.shape != (self.grid.n,):
            raise DomainError(f"field channels must have length {self.grid.n}")
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    @classmethod
    def from_complex(cls, values, grid: Grid) -> "ComplexField":
        v = np.asarray(values, dtype=complex)
        return cls(v.real.copy(), v.imag.copy(), grid)

    @classmethod
    def from_real(cls, profile: RealProfile) -> "ComplexField":
        return cls(profile.values.copy(), np.zeros(profile.grid.n), profile.grid)

    @property
    def values(self) -> np.ndarray:
        return self.re + 1j * self.im

    @property
    def abs2(self) -> np.ndarray:
        return self.re ** 2 + self.im ** 2

    def check(self) -> None:
        check_finite(self.re, self.grid)
        check_finite(self.im, self.grid)


@dataclass(frozen=True)
class SalernoParams:
    """Nonlinearity parameter of the Salerno comparison model, 0 <= m < 1."""

    m: float

    def __post_init__(self):
        if not (0.0 <= self.m < 1.0):
            raise DomainError(f"Salerno parameter must satisfy 0 <= m < 1, got {self.m}")


def _as_field(f) -> ComplexField:
    if isinstance(f, RealProfile):
        return ComplexField.from_real(f)
    return f


def dirichlet_derivatives(u: np.ndarray, dx: float) -> tuple[np.ndarray, np.ndarray]:
    """Centered first and second differences with zero ghost values."""
    up = np.empty(u.shape[0] + 2, dtype=u.dtype)
    up[0] = 0
    up[-1] = 0
    up[1:-1] = u
    d1 = (up[2:] - up[:-2]) / (2.0 * dx)
    d2 = ((up[2:] + up[:-2]) - 2.0 * u) / (dx * dx)
    return d1, d2


def diagnostic_gradient(u: np.ndarray, dx: float) -> np.ndarray:
    """Centered gradient, one-sided second order at the two ends."""
    return np.gradient(u, dx, edge_order=2)


def rhs_evolution(f, params: ModelParams) -> ComplexField:
    """Evaluate dq/dxi of the evolution equation pointwise.

    Parameters
    ----------
    f : ComplexField or RealProfile
        Field at the current propagation distance.
    params : ModelParams

    Returns
    -------
    ComplexField
        The right-hand side ``i [q'' + |q|^2 q - ... ]`` with centered
        differences and homogeneous Dirichlet ghost values.
    """
    f = _as_field(f)
    f.check()
    q = f.values
    d1, d2 = dirichlet_derivatives(q, f.grid.dx)
    a2 = np.abs(q) ** 2
    qc = np.conj(q)
    t = d2 + a2 * q
    t -= 0.5 * params.beta * (a2 * d2 + qc * d1 * d1)
    t += 0.5 * params.gamma * (qc * d1 * d1 - 2.0 * q * np.abs(d1) ** 2 - q * q * np.conj(d2))
    return ComplexField.from_complex(1j * t, f.grid)


def total_power(f) -> float:
    """P = pi^(-1/2) times the trapezoid quadrature of |q|^2."""
    f = _as_field(f)
    f.check()
    return float(np.trapezoid(f.abs2, dx=f.grid.dx) / SQRT_PI)


def hamiltonian_density(q: np.ndarray, dx: float, params: ModelParams) -> np.ndarray:
    qe = diagnostic_gradient(q, dx)
    a2 = np.abs(q) ** 2
    ae2 = np.abs(qe) ** 2
    cross = np.real(np.conj(q) ** 2 * qe ** 2)
    return ae2 - 0.5 * a2 * a2 - 0.5 * params.beta * a2 * ae2 - 0.5 * params.gamma * cross


def hamiltonian(f, params: ModelParams) -> float:
    """Trapezoid quadrature of the Hamiltonian density."""
    f = _as_field(f)
    f.check()
    return float(np.trapezoid(hamiltonian_density(f.values, f.grid.dx, params), dx=f.grid.dx))


def momentum(f, return_residue: bool = False):
    """M = i * integral of conj(q_eta) q.

    With ``return_residue=True`` also returns the imaginary part of the
    quadrature, which vanishes in the continuum.
    """
    f = _as_field(f)
    f.check()
    q = f.values
    m = np.trapezoid(1j * np.conj(diagnostic_gradient(q, f.grid.dx)) * q, dx=f.grid.dx)
    if return_residue:
        return float(m.real), float(m.imag)
    return float(m.real)


def salerno_invariants(f, sp: SalernoParams) -> tuple[float, float]:
    """Norm-like and Hamiltonian invariants of the Salerno continuum model.

    ``P_m = int ln(1 - m|q|^2)`` and
    ``H_m = int |q_eta|^2 + 2(1/m - 1)|q|^2 + (2/m^2) ln(1 - m|q|^2)``.
    No pi^(-1/2) prefactor is applied.  For ``m = 0`` the first is 0 and the
    second is undefined (returned as NaN).
    """
    f = _as_field(f)
    f.check()
    m = sp.m
    a2 = f.abs2
    bad = m * a2 >= 1.0
    if bad.any():
        i = int(np.argmax(bad))
        raise DomainError(
            f"m|q|^2 = {m * a2[i]:.6g} >= 1 at index {i} (eta={f.grid.eta[i]:.6g})", index=i)
    if m == 0.0:
        return 0.0, math.nan
    dx = f.grid.dx
    lg = np.log1p(-m * a2)
    pm = np.trapezoid(lg, dx=dx)
    qe = diagnostic_gradient(f.values, dx)
    dens = np.abs(qe) ** 2 + 2.0 * (1.0 / m - 1.0) * a2 + (2.0 / m ** 2) * lg
    return float(pm), float(np.trapezoid(dens, dx=dx))


def salerno_cutoff(sp) -> float:
    """Existence cutoff (1 - m)/m of the Salerno model; ``inf`` for m = 0."""
    m = sp.m if isinstance(sp, SalernoParams) else float(sp)
    if not (0.0 <= m < 1.0):
        raise DomainError(f"Salerno cutoff needs 0 <= m < 1, got {m}")
    if m == 0.0:
        return math.inf
    return (1.0 - m) / m


def fmt(x: float) -> str:
    return "%.17g" % x


def write_field_csv(path, f, meta: dict | None = None) -> Path:
    """Write a field snapshot with columns eta, re_q, im_q, abs2_q."""
    f = _as_field(f)
    path = Path(path)
    g = f.grid
    lines = [f"# eta_min={fmt(g.eta_min)}", f"# eta_max={fmt(g.eta_max)}", f"# n={g.n}"]
    for key, val in (meta or {}).items():
        lines.append(f"# {key}={fmt(val) if isinstance(val, float) else val}")
    lines.append("eta,re_q,im_q,abs2_q")
    a2 = f.abs2
    for e, r, i, a in zip(g.eta, f.re, f.im, a2):
        lines.append(f"{fmt(e)},{fmt(r)},{fmt(i)},{fmt(a)}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_field_csv(path) -> ComplexField:
    meta = {}
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key] = val
        elif line and not line.startswith("eta"):
            rows.append([float(v) for v in line.split(",")])
    data = np.array(rows)
    grid = Grid(float(meta["eta_min"]), float(meta["eta_max"]), int(meta["n"]))
    return ComplexField(data[:, 1], data[:, 2], grid)
