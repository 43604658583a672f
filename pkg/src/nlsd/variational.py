"""Gaussian-ansatz variational approximation for stationary solitons.

With Q = A exp(-eta^2 / (2 W^2)) and P = A^2 W the effective Lagrangian is

    (4/sqrt(pi)) L = -4kP - 2P/W^2 + (d/(2 sqrt 2)) P^2/W^3 + sqrt(2) P^2/W,

where d = beta - gamma in the default "difference" form.  Its Euler-Lagrange pair
reduces to 8kW^4 + 6(kd - 2)W^2 - d = 0 and P = 8 sqrt(2) W / (3d + 4W^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, NoSolutionError
from .model import ModelParams, fmt

SQRT2 = math.sqrt(2.0)
GAUSS_FWHM = 2.0 * math.sqrt(2.0 * math.log(2.0))
VARIANTS = ("difference", "sum")


def _coefficient(params: ModelParams, variant: str) -> float:
    if variant == "difference":
        return params.beta - params.gamma
    if variant == "sum":
        return params.beta + params.gamma
    raise ValueError(f"unknown VA variant {variant!r}; expected one of {VARIANTS}")


@dataclass(frozen=True)
class VAPrediction:
    """Variational soliton: width W, power P = A^2 W and amplitude A."""

    k: float
    W: float
    P: float
    A: float
    params: ModelParams
    variant: str = "difference"

    @property
    def fwhm(self) -> float:
        """Amplitude FWHM of the Gaussian, 2 W sqrt(2 ln 2)."""
        return GAUSS_FWHM * self.W


def effective_lagrangian(P: float, W: float, k: float, params: ModelParams,
                         variant: str = "difference") -> float:
    """Return (4/sqrt(pi)) L_eff for the Gaussian ansatz."""
    if not W > 0:
        raise DomainError(f"width must be positive, got {W}")
    if P < 0:
        raise DomainError(f"power must be non-negative, got {P}")
    d = _coefficient(params, variant)
    return (-4.0 * k * P - 2.0 * P / W ** 2 + d / (2.0 * SQRT2) * P ** 2 / W ** 3
            + SQRT2 * P ** 2 / W)


def euler_lagrange_residuals(P: float, W: float, k: float, params: ModelParams,
                             variant: str = "difference") -> tuple[float, float]:
    """Partial derivatives of (4/sqrt(pi)) L_eff with respect to P and W."""
    d = _coefficient(params, variant)
    dP = -4.0 * k - 2.0 / W ** 2 + d / SQRT2 * P / W ** 3 + 2.0 * SQRT2 * P / W
    dW = 4.0 * P / W ** 3 - 3.0 * d / (2.0 * SQRT2) * P ** 2 / W ** 4 - SQRT2 * P ** 2 / W ** 2
    return dP, dW


def width_quartic(W: float, k: float, params: ModelParams, variant: str = "difference") -> float:
    d = _coefficient(params, variant)
    return 8.0 * k * W ** 4 + 6.0 * (k * d - 2.0) * W ** 2 - d


def va_width(k: float, params: ModelParams, variant: str = "difference") -> float:
    """Physical root of the width equation.

    Solves the quadratic in u = W^2 in closed form and keeps the root that
    tends to 3/(2k) as the coefficient d goes to zero; it must give W real
    and P > 0.
    """
    if not k > 0:
        raise DomainError(f"k must be positive, got {k}")
    d = _coefficient(params, variant)
    b = 6.0 * (k * d - 2.0)
    disc = b * b + 32.0 * k * d
    if disc < 0:
        raise NoSolutionError("width equation has no real root", discriminant=disc)
    sq = math.sqrt(disc)
    # cancellation-free form of (-b + sq) / (16k)
    u = (-b + sq) / (16.0 * k) if b <= 0 else 2.0 * d / (b + sq)
    if not u > 0 or not 3.0 * d + 4.0 * u > 0:
        raise NoSolutionError(f"no admissible width root for k={k}, d={d} (W^2={u:.6g})",
                              discriminant=disc)
    return math.sqrt(u)


def va_predict(k: float, params: ModelParams, variant: str = "difference",
               check_tol: float = 1e-10) -> VAPrediction:
    """Width, power and amplitude predicted by the Gaussian ansatz."""
    W = va_width(k, params, variant)
    d = _coefficient(params, variant)
    P = 8.0 * SQRT2 * W / (3.0 * d + 4.0 * W * W)
    if not P > 0:
        raise NoSolutionError(f"inadmissible root: P = {P:.6g} <= 0")
    rP, rW = euler_lagrange_residuals(P, W, k, params, variant)
    scale = 4.0 * k + 2.0 / W ** 2
    if abs(rP) > check_tol * scale:
        raise NoSolutionError(f"Euler-Lagrange consistency failed: residual {rP:.3e}")
    return VAPrediction(float(k), W, P, math.sqrt(P / W), params, variant)


def va_curve(k_values, params: ModelParams, variant: str = "difference") -> list[VAPrediction]:
    return [va_predict(k, params, variant) for k in k_values]


def write_va_csv(path, predictions) -> Path:
    path = Path(path)
    lines = ["k,W,P,A,fwhm"]
    for p in predictions:
        lines.append(",".join(fmt(v) for v in (p.k, p.W, p.P, p.A, p.fwhm)))
    path.write_text("\n".join(lines) + "\n")
    return path


def lagrangian_density(Q: np.ndarray, dQ: np.ndarray, k: float, params: ModelParams,
                       variant: str = "difference") -> np.ndarray:
    """Density -kQ^2 - Q'^2 + (d/2) Q^2 Q'^2 + Q^4/2 whose integral is L_eff."""
    d = _coefficient(params, variant)
    return -k * Q ** 2 - dQ ** 2 + 0.5 * d * Q ** 2 * dQ ** 2 + 0.5 * Q ** 4
