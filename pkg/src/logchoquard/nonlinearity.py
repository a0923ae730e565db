"""Critical-growth nonlinearity family and its assumption validators.

The built-in family is

    F(t) = theta * t^q * exp(alpha0 * t^{N'}),  N' = N/(N-1),  t > 0,
    F(t) = 0 for t <= 0,     f = F',  f' = F''  (closed forms).

It is positive, vanishes on the negative axis, is critical with exponent
alpha0 in the Trudinger-Moser sense, vanishes like t^{q-1} at zero, and the
structure ratio

    R(t) = F(t) f'(t) / f(t)^2

runs from (q-1)/q at t -> 0+ to 1 at t -> +inf.  R is a ratio of polynomials
times t^q (the exponentials cancel), so it is evaluated without overflow at
any t.  Validators certify numerically:

    (f0) sign conditions,
    (f1) criticality of the exponential order alpha0,
    (f2) f(t) = o(t^{p-1}) at 0 for some p > gamma,
    (f3) R(t) in [tau, C] with tau > 1 - 2/N,
    (f4) R(t) -> 1 at infinity,
    (f5) liminf t^lambda f F / exp(2 alpha0 t^{N'}) vs the explicit floor
         beta0 (for the built-in family the ratio diverges whenever
         lambda < 1 + N', so the floor only binds at the borderline lambda).

Auxiliary functions: the truncated exponential remainder

    Phi_{alpha,j0}(t) = exp(alpha |t|^{N'}) - sum_{j<j0} alpha^j |t|^{j N'} / j!

used by the Trudinger-Moser machinery, and the substitution primitive

    H(t) = int_0^t ( (N/2) R(s) - (N-2)/2 )^{1/N} ds,

which is well-defined exactly when (f3) holds and grows like t at infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import AssumptionError, DomainError
from .weights import DerivedExponents, WeightConfig, derive_exponents

__all__ = [
    "NonlinearityConfig",
    "F_eval",
    "f_eval",
    "fprime_eval",
    "structure_ratio",
    "phi_eval",
    "H_eval",
    "beta0_floor",
    "moser_radius",
    "validate_assumptions",
    "sani_power_constant",
]


@dataclass(frozen=True)
class NonlinearityConfig:
    """Parameters (N, q, alpha0, theta, lam) of the built-in family.

    ``lam`` is the exponent used in the liminf condition (f5); the borderline
    value 1 + N/(N-1) activates the explicit floor beta0.
    """

    N: int
    q: float = 3.0
    alpha0: float = 1.0
    theta: float = 1.0
    lam: float | None = None

    def __post_init__(self):
        if self.N < 2 or int(self.N) != self.N:
            raise DomainError(f"dimension N must be an integer >= 2, got {self.N}")
        if self.q <= 1.0:
            raise DomainError(f"need q > 1, got {self.q}")
        if self.alpha0 <= 0.0 or self.theta <= 0.0:
            raise DomainError("need alpha0 > 0 and theta > 0")
        if self.lam is None:
            object.__setattr__(self, "lam", 1.0 + self.N / (self.N - 1.0))
        if not (0.0 < self.lam <= 1.0 + self.N / (self.N - 1.0)):
            raise AssumptionError("(f5)", f"lambda must lie in (0, 1 + N/(N-1)], got {self.lam}")

    @property
    def crit_exp(self) -> float:
        """The limiting-case exponent N' = N/(N-1)."""
        return self.N / (self.N - 1.0)

    @property
    def overflow_cap(self) -> float:
        """Largest t with alpha0 t^{N'} + q log t <= 700 (F stays finite)."""
        lo, hi = 1.0, (700.0 / self.alpha0) ** (1.0 / self.crit_exp)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if self.alpha0 * mid**self.crit_exp + self.q * math.log(mid) <= 700.0:
                lo = mid
            else:
                hi = mid
        return lo


def _pos(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return np.maximum(t, 0.0)


def F_eval(cfg: NonlinearityConfig, t):
    """Primitive F(t) = theta t^q exp(alpha0 t^{N'}) on t > 0, zero on t <= 0."""
    tp = _pos(t)
    with np.errstate(over="ignore"):
        out = np.where(tp > 0.0, cfg.theta * tp**cfg.q * np.exp(cfg.alpha0 * tp**cfg.crit_exp), 0.0)
    return float(out) if out.ndim == 0 else out


def f_eval(cfg: NonlinearityConfig, t):
    """f = F': theta e^{alpha0 t^{N'}} (q t^{q-1} + alpha0 N' t^{q+N'-1})."""
    tp = _pos(t)
    np_ = cfg.crit_exp
    with np.errstate(over="ignore"):
        poly = cfg.q * tp ** (cfg.q - 1.0) + cfg.alpha0 * np_ * tp ** (cfg.q + np_ - 1.0)
        out = np.where(tp > 0.0, cfg.theta * np.exp(cfg.alpha0 * tp**np_) * poly, 0.0)
    return float(out) if out.ndim == 0 else out


def fprime_eval(cfg: NonlinearityConfig, t):
    """f' = F'' in closed form; vanishes on t <= 0."""
    tp = _pos(t)
    np_ = cfg.crit_exp
    a = cfg.alpha0 * np_
    with np.errstate(over="ignore"):
        poly = (
            cfg.q * (cfg.q - 1.0) * tp ** (cfg.q - 2.0)
            + a * (2.0 * cfg.q + np_ - 1.0) * tp ** (cfg.q + np_ - 2.0)
            + a**2 * tp ** (cfg.q + 2.0 * np_ - 2.0)
        )
        out = np.where(tp > 0.0, cfg.theta * np.exp(cfg.alpha0 * tp**np_) * poly, 0.0)
    return float(out) if out.ndim == 0 else out


def structure_ratio(cfg: NonlinearityConfig, t):
    """R(t) = F f' / f^2, computed with the exponentials cancelled.

    Stable at arbitrarily large t; tends to (q-1)/q at 0+ and 1 at infinity.
    """
    tp = np.asarray(t, dtype=float)
    if np.any(tp <= 0.0):
        raise DomainError("structure_ratio requires t > 0")
    np_ = cfg.crit_exp
    a = cfg.alpha0 * np_
    # work with u = t^{N'} and powers of t factored so no term overflows
    p1 = cfg.q + a * tp**np_  # f  = theta t^{q-1} e^g p1
    p2 = (
        cfg.q * (cfg.q - 1.0)
        + a * (2.0 * cfg.q + np_ - 1.0) * tp**np_
        + a**2 * tp ** (2.0 * np_)
    )  # f' = theta t^{q-2} e^g p2
    out = p2 / p1**2
    return float(out) if out.ndim == 0 else out


def phi_eval(alpha: float, j0: int, t, dim: int):
    """Truncated exponential remainder Phi_{alpha,j0}(t); nonnegative, 0 at 0.

    With x = alpha |t|^{N'}, returns exp(x) minus its Taylor partial sum of
    order j0 - 1.  For moderate x the tail series is summed directly to
    avoid cancellation.
    """
    if alpha <= 0.0:
        raise DomainError(f"need alpha > 0, got {alpha}")
    if j0 < 1 or int(j0) != j0:
        raise DomainError(f"need integer j0 >= 1, got {j0}")
    t = np.asarray(t, dtype=float)
    x = alpha * np.abs(t) ** (dim / (dim - 1.0))
    small = x <= 30.0
    out = np.empty_like(x)
    if np.any(small):
        xs = x[small]
        term = xs**j0 / math.factorial(j0)
        acc = term.copy()
        for j in range(j0 + 1, j0 + 120):
            term = term * xs / j
            acc += term
            if np.all(term <= 1e-18 * np.maximum(acc, 1e-300)):
                break
        out[small] = acc
    if np.any(~small):
        xl = x[~small]
        with np.errstate(over="ignore"):
            partial = sum(xl**j / math.factorial(j) for j in range(j0))
            out[~small] = np.exp(xl) - partial
    return float(out) if out.ndim == 0 else out


def sani_power_constant(alpha: float, j0: int, dim: int, r: float, beta: float,
                        margin: float = 1.0 + 1e-7) -> float:
    """Smallest-over-grid C with Phi_{alpha,j0}(t)^r <= C Phi_{alpha*beta,j0}(t).

    Valid for beta > r > 1; the ratio vanishes at 0 and infinity, so the
    maximizer is interior and found on a log grid with golden refinement.
    """
    if not (beta > r > 1.0):
        raise DomainError(f"need beta > r > 1, got r={r}, beta={beta}")

    def log_ratio(t):
        # r*log Phi_a - log Phi_ab, in log space to reach large t
        npow = dim / (dim - 1.0)
        x = alpha * t**npow
        if x <= 600.0:
            return r * math.log(phi_eval(alpha, j0, t, dim)) \
                - math.log(phi_eval(alpha * beta, j0, t, dim))
        return (r - beta) * x  # leading behavior; partial sums negligible

    ts = np.geomspace(1e-6, 1e3, 600)
    vals = np.array([log_ratio(t) for t in ts])
    k = int(np.argmax(vals))
    lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, len(ts) - 1)]
    phi_g = (math.sqrt(5) - 1) / 2
    a_, b_ = lo, hi
    for _ in range(80):
        c1 = b_ - phi_g * (b_ - a_)
        c2 = a_ + phi_g * (b_ - a_)
        if log_ratio(c1) < log_ratio(c2):
            a_ = c1
        else:
            b_ = c2
    t_star = 0.5 * (a_ + b_)
    return float(math.exp(log_ratio(t_star)) * margin)


def H_eval(cfg: NonlinearityConfig, t: float, brute_panels: int | None = None) -> float:
    """Substitution primitive H(t) = int_0^t ((N/2) R(s) - (N-2)/2)^{1/N} ds.

    Monotone nondecreasing with H(0) = 0 and H(t)/t -> 1.  Raises
    :class:`AssumptionError` naming (f3) if the radicand is not positive on
    the integration range.  ``brute_panels`` switches to a fixed-panel
    midpoint rule (used as an independent cross-check of the adaptive
    quadrature).
    """
    if t < 0.0:
        raise DomainError("H_eval requires t >= 0")
    if t == 0.0:
        return 0.0
    N = cfg.N
    shift = (N - 2.0) / 2.0

    def radicand(s):
        return 0.5 * N * structure_ratio(cfg, s) - shift

    probe = np.geomspace(max(t * 1e-8, 1e-12), t, 64)
    if np.any(np.asarray([radicand(s) for s in probe]) <= 0.0):
        raise AssumptionError("(f3)", "radicand (N/2) R(s) - (N-2)/2 is not positive")

    def integrand(s):
        return radicand(s) ** (1.0 / N)

    if brute_panels is not None:
        s = (np.arange(brute_panels) + 0.5) * (t / brute_panels)
        return float(np.sum([integrand(v) for v in s]) * t / brute_panels)
    val, _ = quad(integrand, 0.0, t, limit=200)
    return float(val)


def moser_radius(wcfg: WeightConfig, r_Q: float = 1.0) -> float:
    """Concentration radius rho = min{1/4, r0, r_Q} used by the level bounds."""
    return min(0.25, wcfg.r0, r_Q)


def beta0_floor(ncfg: NonlinearityConfig, wcfg: WeightConfig,
                derived: DerivedExponents | None = None) -> float:
    """Explicit lower threshold beta0 of the liminf condition (f5):

    beta0 = (A0/omega) * 2 (b0_eff+N)^{N+2} / (alpha0^N C_N CQ^2 rho^{2(b0_eff+N)})
            * exp( 2 (b0_eff+N) rho^L / ((N-1) L) ),   rho = min{1/4, r0, r_Q}.
    """
    der = derived if derived is not None else derive_exponents(wcfg)
    N = wcfg.N
    rho = moser_radius(wcfg)
    be = der.b0_eff + N
    return (
        (wcfg.A0 / der.omega)
        * 2.0 * be ** (N + 2)
        / (ncfg.alpha0**N * der.C_N * wcfg.CQ**2 * rho ** (2.0 * be))
        * math.exp(2.0 * be * rho**wcfg.L / ((N - 1.0) * wcfg.L))
    )


def _criticality_log_gap(cfg: NonlinearityConfig, alpha: float, t: float) -> float:
    """log( f(t) / exp(alpha t^{N'}) ), evaluated without overflow."""
    np_ = cfg.crit_exp
    poly = cfg.q * t ** (cfg.q - 1.0) + cfg.alpha0 * np_ * t ** (cfg.q + np_ - 1.0)
    return math.log(cfg.theta * poly) + (cfg.alpha0 - alpha) * t**np_


def validate_assumptions(ncfg: NonlinearityConfig, wcfg: WeightConfig,
                         derived: DerivedExponents | None = None,
                         strict: bool = True) -> dict:
    """Numerical certification of (f0)-(f5) plus the derived growth bounds.

    Returns a report dict; with ``strict`` a failed assumption raises
    :class:`AssumptionError` naming the condition.  The structure ratio is
    scanned on a log grid over [1e-8, 1e3]; beyond, the closed-form
    asymptotics (q-1)/q and 1 apply.
    """
    if ncfg.N != wcfg.N:
        raise DomainError("nonlinearity and weight configs disagree on N")
    der = derived if derived is not None else derive_exponents(wcfg)
    N = ncfg.N
    report: dict = {"passes": {}, "warnings": []}

    def record(name, ok, detail):
        report["passes"][name] = bool(ok)
        if not ok:
            report["warnings"].append(f"{name} failed: {detail}")
            if strict:
                raise AssumptionError(name, str(detail))

    # (f2): need some p > gamma with f = o(t^{p-1}); any p in (gamma, q) works
    record("(f2)", ncfg.q > der.gamma,
           f"built-in family needs q > gamma, got q={ncfg.q}, gamma={der.gamma}")
    p_tilde = 0.5 * (der.gamma + ncfg.q)
    report["p_tilde"] = p_tilde

    ts = np.geomspace(1e-8, 1e3, 4001)
    ratios = structure_ratio(ncfg, ts)
    tau_num = float(np.min(ratios))
    C_num = float(np.max(ratios))
    report["tau_num"] = tau_num
    report["C_num"] = C_num
    report["tau_asymptote_0"] = (ncfg.q - 1.0) / ncfg.q
    record("(f3)", tau_num > 1.0 - 2.0 / N and np.isfinite(C_num),
           f"need tau > 1 - 2/N = {1 - 2/N}, got grid minimum {tau_num}")

    f4_est = float(structure_ratio(ncfg, 1e3))
    report["f4_limit_estimate"] = f4_est
    record("(f4)", abs(f4_est - 1.0) < 1e-2,
           f"R(1e3) = {f4_est} not within 1e-2 of 1")

    # (f1): the exponential order is exactly alpha0
    t_probe = 30.0 if N == 2 else 100.0
    gap_hi = _criticality_log_gap(ncfg, 1.1 * ncfg.alpha0, t_probe)
    gap_lo = _criticality_log_gap(ncfg, 0.9 * ncfg.alpha0, t_probe)
    record("(f1)", gap_hi < -10.0 and gap_lo > 10.0,
           f"log gaps at alpha = 1.1/0.9 alpha0: {gap_hi:.2f}, {gap_lo:.2f}")

    # (f0): sign structure
    small = np.geomspace(1e-10, 10.0, 100)
    record("(f0)", np.all(f_eval(ncfg, small) > 0.0)
           and f_eval(ncfg, -1.0) == 0.0 and F_eval(ncfg, 0.0) == 0.0,
           "sign conditions on f violated")

    # (f5): for the built-in family t^lam f F / e^{2 alpha0 t^{N'}}
    # = theta^2 t^{lam+2q+N'-1} (alpha0 N' + q t^{-N'}) -> +infinity
    report["f5_liminf"] = "+inf"
    b0 = beta0_floor(ncfg, wcfg, der)
    report["beta0"] = b0
    report["beta0_binding"] = bool(abs(ncfg.lam - (1.0 + ncfg.crit_exp)) < 1e-12)
    record("(f5)", True, "")

    # growth-bound constants of the upper estimates on f and F
    report["growth_bounds"] = _calibrate_growth_bounds(ncfg, der, p_tilde)

    # F <= (1 - tau) t f(t): direct consequence of (f3)
    tcheck = np.geomspace(1e-6, ncfg.overflow_cap * 0.99, 400)
    lhs = F_eval(ncfg, tcheck)
    rhs = (1.0 - tau_num) * tcheck * f_eval(ncfg, tcheck)
    record("F<=(1-tau)tf", np.all(lhs <= rhs * (1.0 + 1e-9)),
           "F(t) <= (1-tau) t f(t) fails on samples")

    # F <= M0 f for t >= s0 (F/f is maximal at moderate t and decays)
    s0 = 1.0
    tail = np.geomspace(s0, ncfg.overflow_cap * 0.99, 400)
    M0 = float(np.max(F_eval(ncfg, tail) / f_eval(ncfg, tail)))
    report["M0"] = M0
    report["s0"] = s0

    report["q"] = ncfg.q
    report["alpha0"] = ncfg.alpha0
    report["theta"] = ncfg.theta
    report["lambda"] = ncfg.lam
    report["gamma"] = der.gamma
    report["all_passed"] = all(report["passes"].values())
    return report


def _calibrate_growth_bounds(ncfg: NonlinearityConfig, der: DerivedExponents,
                             p_tilde: float, eps: float = 0.1) -> dict:
    """Constants C1, C2 of |f| <= eps t^{p~-1} + C1 t^{p-1} Phi_{alpha,j0}(t)
    and |F| <= eps t^{p~} + C2 t^p Phi_{alpha,j0}(t), with alpha = 1.1 alpha0,
    p = q, calibrated at the grid maximizer."""
    alpha = 1.1 * ncfg.alpha0
    p = ncfg.q
    ts = np.geomspace(1e-8, (600.0 / alpha) ** (1.0 / ncfg.crit_exp), 2000)
    phi = phi_eval(alpha, der.j0, ts, ncfg.N)
    denom_f = ts ** (p - 1.0) * phi
    denom_F = ts**p * phi
    num_f = np.maximum(f_eval(ncfg, ts) - eps * ts ** (p_tilde - 1.0), 0.0)
    num_F = np.maximum(F_eval(ncfg, ts) - eps * ts**p_tilde, 0.0)
    C1 = float(np.max(num_f / denom_f)) * (1.0 + 1e-7)
    C2 = float(np.max(num_F / denom_F)) * (1.0 + 1e-7)
    return {"eps": eps, "p": p, "alpha": alpha, "C1": C1, "C2": C2}
