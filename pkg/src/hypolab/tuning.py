"""Closed-form friction/rate pipeline.

Given the Poincare constant m > 0 of the position marginal and the Hessian
lower bound K >= 0, the pipeline produces

    zeta        = gamma/(2 sqrt(m)) + sqrt(2 + K/(2m))
    a(gamma)    = 2 + zeta^2
    eps_star    = gamma / a                  (clean suboptimal choice)
    eps_max     = 2 gamma / (sqrt(a)(sqrt(a) + sqrt(a-1)))
    gamma_star  = sqrt(16 m + 2 K)
    x_star      = sqrt(4 + K/(2m))           (maximizer of Phi)
    lambda_coer = sqrt(m) / (4 (sqrt(2+K/2m) + sqrt(4+K/2m)))
    Lambda      = (2/3) lambda_coer
    prefactor   = sqrt(3)

and the 2x2 dissipation matrix M = [[gamma-eps, -eps*zeta/2],
[-eps*zeta/2, eps/2]], positive definite iff eps < 2 gamma / (2 + zeta^2).

Everything here is plain arithmetic on the inputs; all constants are exact up
to floating point and homogeneous of degree 1/2 under (m, K) -> (c m, c K).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class TuningInputs:
    m: float
    K: float
    gamma: float | None = None
    eps: float | None = None

    def __post_init__(self):
        if self.m <= 0:
            raise ConfigurationError("Poincare constant m must be positive")
        if self.K < 0:
            raise ConfigurationError("Hessian bound K must be nonnegative")
        if self.gamma is not None and self.gamma <= 0:
            raise ConfigurationError("gamma override must be positive")
        if self.eps is not None and self.eps <= 0:
            raise ConfigurationError("eps override must be positive")


@dataclass(frozen=True)
class TuningResult:
    m: float
    K: float
    zeta: float
    a: float
    eps_star: float
    eps_max: float
    gamma_star: float
    x_star: float
    lambda_coer: float
    Lambda: float
    prefactor: float

    def as_dict(self) -> dict:
        return asdict(self)


def _zeta(gamma: float, m: float, K: float) -> float:
    return gamma / (2 * math.sqrt(m)) + math.sqrt(2 + K / (2 * m))


def dissipation_matrix(gamma: float, eps: float, m: float, K: float):
    """2x2 coercivity matrix with its determinant, trace, admissibility."""
    if gamma <= 0 or eps <= 0 or m <= 0 or K < 0:
        raise ConfigurationError("dissipation_matrix needs gamma, eps, m > 0, K >= 0")
    z = _zeta(gamma, m, K)
    M = np.array([[gamma - eps, -eps * z / 2], [-eps * z / 2, eps / 2]])
    det = eps * (gamma - eps) / 2 - eps**2 * z**2 / 4
    trace = gamma - eps / 2
    admissible = eps < 2 * gamma / (2 + z**2)
    return M, det, trace, admissible


def optimize_friction(m: float, K: float) -> TuningResult:
    """Full tuned pipeline at gamma = gamma_star = sqrt(16 m + 2 K)."""
    if m <= 0 or K < 0:
        raise ConfigurationError("optimize_friction needs m > 0, K >= 0")
    gamma_star = math.sqrt(16 * m + 2 * K)
    z = _zeta(gamma_star, m, K)
    a = 2 + z**2
    eps_star = gamma_star / a
    eps_max = 2 * gamma_star / (math.sqrt(a) * (math.sqrt(a) + math.sqrt(a - 1)))
    x_star = math.sqrt(4 + K / (2 * m))
    lam, Lam, pref = rate(m, K)
    _sanity_check_maximizer(m, K, x_star)
    return TuningResult(
        m=m,
        K=K,
        zeta=z,
        a=a,
        eps_star=eps_star,
        eps_max=eps_max,
        gamma_star=gamma_star,
        x_star=x_star,
        lambda_coer=lam,
        Lambda=Lam,
        prefactor=pref,
    )


def rate(m: float, K: float):
    """(lambda_coer, Lambda, prefactor) from the closed forms."""
    if m <= 0 or K < 0:
        raise ConfigurationError("rate needs m > 0, K >= 0")
    root2 = math.sqrt(2 + K / (2 * m))
    root4 = math.sqrt(4 + K / (2 * m))
    lam = math.sqrt(m) / (4 * (root2 + root4))
    return lam, 2 * lam / 3, math.sqrt(3)


def _phi(x: float, m: float, K: float) -> float:
    return x / (2 * ((x + math.sqrt(2 + K / (2 * m))) ** 2 + 2))


def _sanity_check_maximizer(m, K, x_star, factor=1.0 + 1e-7):
    # guards transcription errors only; the closed form is the authority
    xs = x_star * np.logspace(-1, 1, 41)
    best = max(_phi(x, m, K) for x in xs)
    if best > _phi(x_star, m, K) * factor:
        raise ConfigurationError(
            "x_star fails the grid sanity check; tuning formulas inconsistent"
        )


def check_ratio_consistency(m: float, K: float) -> dict:
    """Evaluate the bound chain det/tr <= lambda_min(M) at (gamma*, eps*)."""
    res = optimize_friction(m, K)
    M, det, trace, admissible = dissipation_matrix(res.gamma_star, res.eps_star, m, K)
    lam_min = float(np.linalg.eigvalsh(M)[0])
    return {
        "det_over_trace": det / trace,
        "lambda_min_M": lam_min,
        "lambda_coer": res.lambda_coer,
        "admissible": admissible,
        "chain_holds": lam_min >= det / trace >= res.lambda_coer,
    }
