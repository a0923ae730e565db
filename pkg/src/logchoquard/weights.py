"""Radial weight pair (A, Q) and the structural exponents derived from it.

The energy space is built on the weighted gradient integral
``int A(|x|) |grad u|^N dx`` and the weighted Lebesgue norms
``int Q(|x|) |u|^p dx``.  Admissible weights are power-law controlled:

    A(r) >= A_0 r^ell            for all r > 0,
    A_0 (1 + r^ell) <= A(r) <= A_0 (1 + r^L)     for r <= r_0,
    limsup_{r->0} Q(r)/r^{b_0} < inf,  limsup_{r->inf} Q(r)/r^b < inf,
    b_0, b > -N,
    liminf_{r->0} Q(r)/r^{b0_eff} = C_Q > 0,
        b0_eff := max{b_0, b_0 (1 - mu_0/(2N))}.

The built-in profiles

    A(r) = A_0 (1 + r^ell)
    Q(r) = C_Q r^{b_0}  (r <= 1),   C_Q r^b  (r >= 1)

saturate the two-sided bounds with explicit constants (L = ell, r_Q = 1),
so every derived quantity below is exactly computable.

Derived constants:

    gamma   = max{N, (b - ell + N)(N+1)/ell + N}   (weighted embedding exponent)
    j_0     = smallest integer >= gamma (N-1)/N    (truncation order of the
              exponential remainder used in the Trudinger-Moser bound)
    C_A     = inf_{B_1} A = A_0 for the built-in profile
    C_N     = 1 / (2^{N-1} pi^{N/2} Gamma(N/2))    (log-Riesz kernel constant)
    omega   = 2 pi^{N/2} / Gamma(N/2)              (surface measure of S^{N-1})
    alpha_N = N omega^{1/(N-1)}                    (sharp Moser exponent)
    alpha_N_weighted = alpha_N (1 + b_0/N) C_A^{1/(N-1)}
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionError, DomainError

__all__ = [
    "WeightConfig",
    "DerivedExponents",
    "sphere_area",
    "riesz_log_constant",
    "eval_A",
    "eval_Q",
    "derive_exponents",
    "check_integrability",
    "validate_tabulated_weights",
]


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere S^{dim-1} in R^dim."""
    if dim < 1:
        raise DomainError(f"dimension must be >= 1, got {dim}")
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


def riesz_log_constant(dim: int) -> float:
    """Constant C_N of the logarithmic Riesz kernel C_N log(1/|x|).

    C_N^{-1} = 2^{N-1} pi^{N/2} Gamma(N/2); C_2 = 1/(2 pi), C_4 = 1/(8 pi^2).
    """
    if dim < 2:
        raise DomainError(f"dimension must be >= 2, got {dim}")
    return 1.0 / (2.0 ** (dim - 1) * math.pi ** (dim / 2.0) * math.gamma(dim / 2.0))


@dataclass(frozen=True)
class WeightConfig:
    """Parameters of the weight pair (A, Q).

    N      : space dimension, >= 2
    A0, ell: growth of A at infinity, A(r) = A0 (1 + r^ell)
    L      : upper exponent of the two-sided bound near 0 (L >= ell; the
             built-in profile satisfies it with L = ell, but L enters the
             level-bound constants and may be set larger)
    r0     : radius on which the two-sided bound on A is certified
    CQ     : liminf constant of Q at the origin
    b0, b  : power exponents of Q at 0 and at infinity, both > -N
    mu0    : threshold of the kernel approximation parameter, in (0, 1]
    """

    N: int
    A0: float = 1.0
    ell: float = 2.0
    L: float = 2.0
    r0: float = 1.0
    CQ: float = 1.0
    b0: float = 0.0
    b: float = -1.0
    mu0: float = 0.5

    def __post_init__(self):
        if self.N < 2 or int(self.N) != self.N:
            raise AssumptionError("(A)", f"dimension N must be an integer >= 2, got {self.N}")
        if self.A0 <= 0 or self.ell <= 0:
            raise AssumptionError("(A)", f"need A0 > 0 and ell > 0, got A0={self.A0}, ell={self.ell}")
        if self.L < self.ell:
            raise AssumptionError("(A')", f"need L >= ell, got L={self.L} < ell={self.ell}")
        if self.r0 <= 0:
            raise AssumptionError("(A')", f"need r0 > 0, got {self.r0}")
        if self.CQ <= 0:
            raise AssumptionError("(Q')", f"need CQ > 0, got {self.CQ}")
        if self.b0 <= -self.N or self.b <= -self.N:
            raise AssumptionError("(Q)", f"need b0, b > -N = {-self.N}, got b0={self.b0}, b={self.b}")
        if not (0.0 < self.mu0 <= 1.0):
            raise AssumptionError("mu0", f"need mu0 in (0, 1], got {self.mu0}")


@dataclass(frozen=True)
class DerivedExponents:
    """Structural constants computed from a :class:`WeightConfig`."""

    gamma: float
    b0_eff: float
    j0: int
    C_A: float
    C_N: float
    alpha_N: float
    alpha_N_weighted: float
    omega: float
    warnings: tuple[str, ...] = field(default=())

    def as_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "b0_eff": self.b0_eff,
            "j0": self.j0,
            "C_A": self.C_A,
            "C_N": self.C_N,
            "alpha_N": self.alpha_N,
            "alpha_N_weighted": self.alpha_N_weighted,
            "omega": self.omega,
            "warnings": list(self.warnings),
        }


def eval_A(cfg: WeightConfig, r) -> np.ndarray | float:
    """Built-in gradient weight A(r) = A0 (1 + r^ell).

    Satisfies A(r) >= A0 r^ell for all r > 0 and the two-sided bound with
    L = ell by construction.  Requires r > 0.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise DomainError("eval_A requires r > 0")
    out = cfg.A0 * (1.0 + r**cfg.ell)
    return float(out) if out.ndim == 0 else out


def eval_Q(cfg: WeightConfig, r) -> np.ndarray | float:
    """Built-in Lebesgue weight Q(r) = CQ r^{b0} for r <= 1, CQ r^b for r >= 1.

    Continuous at r = 1; matches the power bounds at 0 and infinity with
    exponents b0 and b, and the liminf condition with constant CQ whenever
    b0 >= 0.  Requires r > 0.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise DomainError("eval_Q requires r > 0")
    out = cfg.CQ * np.where(r <= 1.0, r**cfg.b0, r**cfg.b)
    return float(out) if out.ndim == 0 else out


def derive_exponents(cfg: WeightConfig) -> DerivedExponents:
    """Compute all structural exponents and constants for ``cfg``.

    The embedding exponent is gamma = N when b < ell - N and
    (b - ell + N)(N+1)/ell + N otherwise; the truncation order is the
    smallest integer j0 >= gamma (N-1)/N.
    """
    N = cfg.N
    if cfg.b < cfg.ell - N:
        gamma = float(N)
    else:
        gamma = (cfg.b - cfg.ell + N) * (N + 1) / cfg.ell + N
    j0 = math.ceil(gamma * (N - 1) / N)
    b0_eff = max(cfg.b0, cfg.b0 * (1.0 - cfg.mu0 / (2.0 * N)))
    omega = sphere_area(N)
    alpha_N = N * omega ** (1.0 / (N - 1))
    C_A = cfg.A0  # built-in A is nondecreasing, so inf over the unit ball is A(0+) = A0
    alpha_w = alpha_N * (1.0 + cfg.b0 / N) * C_A ** (1.0 / (N - 1))
    warnings = []
    if cfg.b0 < 0:
        warnings.append(
            "b0 < 0: built-in Q gives liminf Q(r)/r^{b0_eff} = +inf rather than CQ; "
            "the liminf condition holds with inequality only"
        )
    return DerivedExponents(
        gamma=gamma,
        b0_eff=b0_eff,
        j0=int(j0),
        C_A=C_A,
        C_N=riesz_log_constant(N),
        alpha_N=alpha_N,
        alpha_N_weighted=alpha_w,
        omega=omega,
        warnings=tuple(warnings),
    )


def check_integrability(cfg: WeightConfig, derived: DerivedExponents | None = None) -> tuple[bool, dict]:
    """Check the tail integrability condition b - ell*gamma/(N-1) + N < 0.

    It holds for every valid configuration (both branches of the gamma
    case split imply it), so a False result signals a configuration bug.
    Returns (holds, report).
    """
    der = derived if derived is not None else derive_exponents(cfg)
    exponent = cfg.b - cfg.ell * der.gamma / (cfg.N - 1) + cfg.N
    report = {
        "tail_exponent": exponent,
        "gamma": der.gamma,
        "branch": "b < ell - N" if cfg.b < cfg.ell - cfg.N else "b >= ell - N",
        "holds": bool(exponent < 0.0),
    }
    return report["holds"], report


def validate_tabulated_weights(
    cfg: WeightConfig,
    A_fn,
    Q_fn,
    sample_radii: np.ndarray | None = None,
) -> dict:
    """Numerically validate user-supplied weight callables on a sample grid.

    Checks A(r) >= A0 r^ell everywhere sampled, the two-sided bound on
    r <= r0, positivity and the power bounds for Q.  Raises
    :class:`AssumptionError` on the first violated condition.
    """
    if sample_radii is None:
        sample_radii = np.geomspace(1e-6, 1e3, 400)
    r = np.asarray(sample_radii, dtype=float)
    A_vals = np.asarray(A_fn(r), dtype=float)
    Q_vals = np.asarray(Q_fn(r), dtype=float)
    slack = 1.0 + 1e-12
    if np.any(A_vals * slack < cfg.A0 * r**cfg.ell):
        raise AssumptionError("(A)", "A(r) >= A0 r^ell fails on the sample grid")
    near = r <= cfg.r0
    lo = cfg.A0 * (1.0 + r[near] ** cfg.ell)
    hi = cfg.A0 * (1.0 + r[near] ** cfg.L)
    if np.any(A_vals[near] * slack < lo) or np.any(A_vals[near] > hi * slack):
        raise AssumptionError("(A')", "two-sided bound on A fails for r <= r0")
    if np.any(Q_vals <= 0.0):
        raise AssumptionError("(Q)", "Q must be positive")
    small, large = r <= 1.0, r >= 1.0
    ratio0 = Q_vals[small] / r[small] ** cfg.b0
    ratio_inf = Q_vals[large] / r[large] ** cfg.b
    # limsup conditions: sampled ratios must stay bounded (10x headroom on CQ)
    if np.any(ratio0 > 10.0 * cfg.CQ) or np.any(ratio_inf > 10.0 * cfg.CQ):
        raise AssumptionError("(Q)", "power-law ratio of Q exceeds 10*CQ on the sample grid")
    return {
        "A_ratio_range": (float(np.min(A_vals / (cfg.A0 * (1 + r**cfg.ell)))),
                          float(np.max(A_vals / (cfg.A0 * (1 + r**cfg.ell))))),
        "Q_ratio_at_0": (float(np.min(ratio0)), float(np.max(ratio0))),
        "Q_ratio_at_inf": (float(np.min(ratio_inf)), float(np.max(ratio_inf))),
    }
