"""Linear stability of stationary solitons.

Perturbations q = [Q + eps (v + i w)] exp(i k xi) obey v_xi = -L1 w and
w_xi = L2 v, hence lambda^2 v = -L1 L2 v.  Linearizing the evolution
equation gives

    L1 = -k + d2 + Q^2 - (beta/2) [Q^2 d2 + 2QQ' d1 - Q'^2]
                       + (gamma/2) [Q^2 d2 + 2QQ' d1 - 3Q'^2 - 2QQ'']
    L2 = -k + d2 + 3Q^2 - ((beta+gamma)/2) [Q^2 d2 + 2QQ' d1 + Q'^2 + 2QQ'']

(the "derived" form).  The "printed" form carries beta, gamma and
beta+gamma without the factor 1/2 and is kept for comparison.  L2 coincides
with the Newton Jacobian, and L1 Q equals the stationary residual, so the
phase mode is exact on the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import BracketError, DomainError, NLSDError
from .model import ComplexField, Grid, dirichlet_derivatives, fmt, write_field_csv
from .stationary import Branch, SolitonSolution

FORMS = ("derived", "printed")
PARITY_RTOL = 1e-6
IMAG_RTOL = 1e-6


@dataclass(frozen=True, eq=False)
class LinearOperators:
    """Sparse tridiagonal L1, L2 around a physical-frame soliton."""

    L1: sp.csr_matrix
    L2: sp.csr_matrix
    solution: SolitonSolution
    form: str = "derived"

    @property
    def grid(self) -> Grid:
        return self.solution.grid

    def block(self) -> sp.csr_matrix:
        """Generator of (v, w): d/dxi (v, w) = [[0, -L1], [L2, 0]] (v, w)."""
        return sp.bmat([[None, -self.L1], [self.L2, None]], format="csr")


def _difference_matrices(n: int, dx: float):
    one = np.ones(n - 1)
    d1 = sp.diags([-one, one], [-1, 1], format="csr") / (2.0 * dx)
    d2 = sp.diags([one, -2.0 * np.ones(n), one], [-1, 0, 1], format="csr") / (dx * dx)
    return d1, d2


def assemble_linearization(solution: SolitonSolution, form: str = "derived") -> LinearOperators:
    """Discrete L1, L2 with centered differences and Dirichlet ends."""
    if form not in FORMS:
        raise ValueError(f"unknown linearization form {form!r}; expected one of {FORMS}")
    if solution.frame != "physical":
        raise DomainError("linearization needs a physical-frame solution")
    Q = solution.values
    grid = solution.grid
    n, dx = grid.n, grid.dx
    k, b, g = solution.k, solution.params.beta, solution.params.gamma
    D1, D2 = _difference_matrices(n, dx)
    Qp, Qpp = dirichlet_derivatives(Q, dx)
    dg = sp.diags
    eye = sp.identity(n, format="csr")
    c = 0.5 if form == "derived" else 1.0
    core = dg(Q * Q) @ D2 + dg(2.0 * Q * Qp) @ D1
    B1 = core - dg(Qp * Qp)
    G1 = core - dg(3.0 * Qp * Qp + 2.0 * Q * Qpp)
    B2 = core + dg(Qp * Qp + 2.0 * Q * Qpp)
    L1 = -k * eye + D2 + dg(Q * Q) - c * b * B1 + c * g * G1
    L2 = -k * eye + D2 + dg(3.0 * Q * Q) - c * (b + g) * B2
    return LinearOperators(sp.csr_matrix(L1), sp.csr_matrix(L2), solution, form)


def compare_forms(solution: SolitonSolution) -> dict:
    """Differences between the derived and printed operators.

    ``doubled_match`` reports whether the printed matrices equal the derived
    ones with every nonlinear-diffraction coefficient doubled.
    """
    from dataclasses import replace

    der = assemble_linearization(solution, "derived")
    pri = assemble_linearization(solution, "printed")
    d1 = abs(der.L1 - pri.L1).max()
    d2 = abs(der.L2 - pri.L2).max()
    doubled = replace(solution, params=solution.params.scaled(2.0))
    dd = assemble_linearization(doubled, "derived")
    e1 = abs(dd.L1 - pri.L1).max()
    e2 = abs(dd.L2 - pri.L2).max()
    scale = max(abs(pri.L1).max(), abs(pri.L2).max())
    return {"L1_max_abs_diff": float(d1), "L2_max_abs_diff": float(d2),
            "identical": bool(d1 == 0 and d2 == 0),
            "doubled_match": bool(max(e1, e2) <= 1e-12 * scale)}


@dataclass(frozen=True, eq=False)
class StabilitySpectrum:
    """Eigenvalues lambda^2 of -L1 L2 sorted descending, with modes.

    ``modes[:, j]`` is v for eigenvalue j, unit max-norm; ``w_modes[:, j]`` is
    L2 v, which equals lambda * w for the matching w.  ``imag_flags`` lists
    indices whose eigenvalue had a significant imaginary part.
    """

    lambda_sq: np.ndarray
    parity: tuple
    modes: np.ndarray | None
    w_modes: np.ndarray | None
    imag_flags: tuple
    k: float
    grid: Grid
    method: str

    def zero_tolerance(self) -> float:
        return 10.0 * self.grid.dx ** 2 * self.k

    def smallest_magnitudes(self, count: int = 2) -> np.ndarray:
        return np.sort(np.abs(self.lambda_sq))[:count]

    def nonzero_max(self, count: int = 2) -> float:
        """Largest eigenvalue once the ``count`` smallest-|lambda^2| ones are removed."""
        order = np.argsort(np.abs(self.lambda_sq))
        rest = np.delete(self.lambda_sq, order[:count])
        return float(rest.max())


def _parity_tag(v: np.ndarray) -> str:
    r = v[::-1]
    scale = np.abs(v).max()
    if np.abs(v - r).max() <= PARITY_RTOL * scale:
        return "even"
    if np.abs(v + r).max() <= PARITY_RTOL * scale:
        return "odd"
    return "mixed"


def _normalize(v: np.ndarray, parity: str) -> np.ndarray:
    v = v / np.abs(v).max()
    c = (v.size - 1) // 2
    if parity == "even":
        ref = v[c]
    elif parity == "odd":
        ref = v[c + 1]
    else:
        ref = v[np.argmax(np.abs(v))]
    return -v if ref < 0 else v


def _eig(M: np.ndarray, vectors: bool):
    try:
        if vectors:
            return np.linalg.eig(M)
        return np.linalg.eigvals(M), None
    except np.linalg.LinAlgError as err:
        raise NLSDError(f"eigensolver failed ({err}); condition estimate {np.linalg.cond(M):.3e}") from err


def _product(ops: LinearOperators, product: str) -> np.ndarray:
    if product == "L1L2":
        return -(ops.L1 @ ops.L2).toarray()
    if product == "L2L1":
        return -(ops.L2 @ ops.L1).toarray()
    raise ValueError(f"unknown product {product!r}")


def spectrum(ops: LinearOperators, method: str = "auto", product: str = "L1L2",
             vectors: bool = True) -> StabilitySpectrum:
    """All eigenvalues of the dense n x n product -L1 L2 (or -L2 L1).

    Parameters
    ----------
    method : {"auto", "parity", "full"}
        ``"full"`` runs a general eigensolver on the whole product.
        ``"parity"`` splits the same matrix into even and odd blocks, which is
        a similarity transform when the grid and base profile are symmetric;
        parities are then exact.  ``"auto"`` picks parity when possible.
    """
    M = _product(ops, product)
    grid = ops.grid
    Q = ops.solution.values
    symmetric = grid.is_symmetric and np.array_equal(Q, Q[::-1])
    if method == "auto":
        method = "parity" if symmetric else "full"
    if method == "parity" and not symmetric:
        raise DomainError("parity splitting needs a symmetric grid and profile")
    n = grid.n
    if method == "full":
        ev, V = _eig(M, vectors)
        tags = None
    elif method == "parity":
        c = (n - 1) // 2
        rows = M[c:, :]
        right = rows[:, c:]
        left = rows[:, c::-1]
        Me = right.copy()
        Me[:, 1:] += left[:, 1:]
        Mo = right[1:, 1:] - left[1:, 1:]
        ee, Ve = _eig(Me, vectors)
        eo, Vo = _eig(Mo, vectors)
        ev = np.concatenate([ee, eo])
        tags = ["even"] * ee.size + ["odd"] * eo.size
        if vectors:
            V = np.zeros((n, n), dtype=complex)
            V[c:, :ee.size] = Ve
            V[:c, :ee.size] = Ve[:0:-1]
            V[c + 1:, ee.size:] = Vo
            V[:c, ee.size:] = -Vo[::-1]
        else:
            V = None
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(-ev.real, kind="stable")
    ev = ev[order]
    lam = ev.real.copy()
    flags = tuple(int(i) for i in np.nonzero(np.abs(ev.imag) > IMAG_RTOL * np.maximum(1.0, np.abs(lam)))[0])
    modes = wm = None
    if vectors:
        V = V[:, order].real
        if tags is None:
            tags = [_parity_tag(V[:, j]) for j in range(n)]
        else:
            tags = [tags[i] for i in order]
        modes = np.empty_like(V)
        for j in range(V.shape[1]):
            modes[:, j] = _normalize(V[:, j], tags[j])
        L2 = ops.L2 if product == "L1L2" else ops.L1
        wm = np.asarray(L2 @ modes)
    elif tags is not None:
        tags = [tags[i] for i in order]
    else:
        tags = ["unknown"] * lam.size
    return StabilitySpectrum(lam, tuple(tags), modes, wm, flags, ops.solution.k, grid, method)


def block_spectrum(ops: LinearOperators) -> np.ndarray:
    """lambda^2 from the 2n x 2n first-order form, sorted descending.

    Each lambda^2 appears twice (from +lambda and -lambda).
    """
    lam = np.linalg.eigvals(ops.block().toarray())
    return np.sort((lam * lam).real)[::-1]


def vk_slope(branch: Branch, k: float) -> float:
    """Centered finite-difference slope dP/dk from neighbouring samples."""
    ks = branch.k
    P = branch.power
    if len(ks) < 3 or not ks[0] < k < ks[-1]:
        raise BracketError(f"k={k} is not interior to the branch range [{ks[0]:.6g}, {ks[-1]:.6g}]")
    i = int(np.argmin(np.abs(ks - k)))
    if math.isclose(ks[i], k, rel_tol=1e-9, abs_tol=1e-12):
        return float((P[i + 1] - P[i - 1]) / (ks[i + 1] - ks[i - 1]))
    j = int(np.searchsorted(ks, k))
    return float((P[j] - P[j - 1]) / (ks[j] - ks[j - 1]))


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    count: int
    parities: tuple

    @property
    def label(self) -> str:
        if self.stable:
            return "stable"
        return f"unstable({self.count}, {{{', '.join(sorted(set(self.parities)))}}})"


def classify_stability(spec: StabilitySpectrum, zero_tol: float | None = None) -> StabilityVerdict:
    """Unstable iff some lambda^2 exceeds ``zero_tol`` (default 10 dx^2 k)."""
    tol = spec.zero_tolerance() if zero_tol is None else zero_tol
    idx = np.nonzero(spec.lambda_sq > tol)[0]
    return StabilityVerdict(idx.size == 0, int(idx.size), tuple(spec.parity[i] for i in idx))


def write_spectrum_csv(path, spec: StabilitySpectrum) -> Path:
    path = Path(path)
    lines = ["index,lambda_sq,parity"]
    for i, (lam, par) in enumerate(zip(spec.lambda_sq, spec.parity)):
        lines.append(f"{i},{fmt(lam)},{par}")
    path.write_text("\n".join(lines) + "\n")
    return path


def write_mode_csv(path, spec: StabilitySpectrum, index: int) -> Path:
    """Eigenmode j in the field format: re_q = v, im_q = L2 v."""
    if spec.modes is None:
        raise DomainError("spectrum was computed without eigenvectors")
    f = ComplexField(spec.modes[:, index], spec.w_modes[:, index], spec.grid)
    return write_field_csv(path, f, {"lambda_sq": float(spec.lambda_sq[index]),
                                     "parity": spec.parity[index]})
