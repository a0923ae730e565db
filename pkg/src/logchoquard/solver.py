"""Mountain-pass solver, level-bound verifier, and the mu -> 0 continuation.

The minimax level

    c_mu = inf over paths from 0 to e of the path's maximal J_mu energy

is realized constructively in two phases.

Phase 1 (ridge descent): the energy along every ray t -> J_mu(t v) rises to
a single maximum and then falls off double-exponentially (the interaction
grows like exp(2 alpha0 t^{N'}) against the polynomial kinetic term), so
generic path points past the ridge are dynamically useless -- they plunge to
astronomically negative energies in one step.  Phase 1 therefore works with
the envelope

    E(v) = max_{t >= 0} J_mu(t v),   ||v|| = 1,

descending E over unit directions: the inner maximization is a golden
section search along the ray, the outer step moves the ridge point by a
preconditioned gradient step (the linearized weighted-diffusion solve of
:meth:`EnergyContext.precondition`), renormalizes, and accepts on envelope
decrease.  Every iterate is a ridge point; accepted sweeps never increase
the path maximum, and at stationarity the full gradient vanishes (the ray
component vanishes by the inner maximization, the transverse part by the
outer descent).  The realized path s -> s T v joins 0 to a negative-energy
endpoint through the certified maximum.

Phase 2 (saddle refinement): inexact Newton.  The Newton correction
H delta = -grad is solved by MINRES, which is exactly the right Krylov
method for the symmetric indefinite Hessian at a mountain-pass point (one
negative eigenvalue); Hessian actions are central finite differences of the
gradient and the SPD stiffness solve of :meth:`EnergyContext.precondition`
serves as the preconditioner.  Steps are damped on dual-residual decrease;
if a Newton direction fails, monotone descent steps on the preconditioned
residual functional R(u) = (1/2) grad . K^{-1} grad bridge the gap.  The
refinement drives the independently re-evaluated residual to the
certification tolerance.

Continuation: the approximation parameter follows a decreasing schedule,
each solve warm-started from the previous critical point (phase 2 only);
the final iterate is polished against the limiting log functional, after
which the Poisson component, its residual, the near/far interaction split,
and the tail-decay diagnostic are attached.

Level-bound verification: capped-logarithm concentration profiles

    w_n = (log n)^{1-1/N}            on [0, rho/n],
          log(rho/r)/(log n)^{1/N}   on [rho/n, rho],
          0                          beyond rho,

have gradient-energy expansion ||w_n||^N = omega A0 (1 + delta_n) with
delta_n between (rho^l - (rho/n)^l)/(l log n) and the same with L; after
normalization the maximal energy along the ray t -> J_mu(t w_n) must stay
below the explicit cap (omega A0 / N) ((b0_eff + N)/alpha0)^{N-1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyBreakdown, EnergyContext, poisson_recover, poisson_residual, j_log
from .errors import (CappedEvaluationError, DomainError, GeometryError,
                     NonconvergenceError, StagnationError)
from .grids import DecayReport, RadialFunction, RadialGrid, decay_diagnostic, e_norm
from .nonlinearity import NonlinearityConfig, moser_radius
from .weights import WeightConfig, derive_exponents, eval_A, sphere_area

__all__ = [
    "SolverParams",
    "ContinuationSchedule",
    "MountainPassState",
    "SolutionBundle",
    "MoserReport",
    "ContinuationResult",
    "mp_level_cap",
    "bump_profile",
    "find_geometry",
    "mountain_pass",
    "moser_norm_report",
    "moser_bound_report",
    "continue_to_zero",
]


@dataclass(frozen=True)
class SolverParams:
    """Iteration controls for the two solver phases."""

    path_points: int = 33
    max_sweeps: int = 5000
    refine_max_iter: int = 20000
    tol_factor: float = 1e-6          # dual residual <= tol_factor * max(1, ||u||)
    log_tol_factor: float = 1e-5      # same, against the log functional
    armijo: float = 1e-4
    phase_switch_residual: float = 1e-2
    stall_sweeps: int = 20
    resample_every: int = 40
    seed: int = 20260811
    sigma_max: float = 4.0

    def __post_init__(self):
        if self.path_points < 5:
            raise DomainError("need at least 5 path points")


@dataclass(frozen=True)
class ContinuationSchedule:
    """Strictly decreasing approximation parameters in (0, mu_start]."""

    mu_values: tuple[float, ...]

    def __post_init__(self):
        mus = self.mu_values
        if len(mus) == 0:
            raise DomainError("schedule must contain at least one value")
        if mus[0] <= 0.0 or mus[0] > 1.0:
            raise DomainError("schedule must start in (0, 1]")
        if any(b >= a for a, b in zip(mus, mus[1:])) or any(m <= 0 for m in mus):
            raise DomainError("schedule must be strictly decreasing and positive")

    @classmethod
    def geometric(cls, mu_start: float = 0.5, ratio: float = 0.5,
                  mu_min: float = 1e-4) -> "ContinuationSchedule":
        if not (0.0 < ratio < 1.0):
            raise DomainError("ratio must lie in (0, 1)")
        vals = []
        m = mu_start
        while m >= mu_min * (1.0 - 1e-12):
            vals.append(m)
            m *= ratio
        return cls(tuple(vals))


@dataclass
class MountainPassState:
    """Mutable path state of phase 1 (diagnostic object)."""

    path: np.ndarray                  # (P, M) nodal values, endpoints fixed
    energies: np.ndarray
    max_index: int
    iteration: int
    best_candidate: np.ndarray | None = None
    best_residual: float = math.inf


@dataclass(frozen=True)
class SolutionBundle:
    """A certified critical point with its diagnostics."""

    mu: float | None                  # None = limiting log functional
    u: RadialFunction
    energy: EnergyBreakdown
    c_value: float
    residual_dual: float
    residual_raw: float
    norm_e: float
    iterations: int
    sweeps: int
    converged: bool
    phi: RadialFunction | None = None
    poisson_rel_residual: float | None = None
    decay: DecayReport | None = None
    tangent: np.ndarray | None = field(default=None, repr=False)
    min_value: float = 0.0

    def report(self) -> dict:
        out = {
            "mu": self.mu,
            "c": self.c_value,
            "energy": self.energy.as_dict(),
            "residual_dual": self.residual_dual,
            "residual_raw": self.residual_raw,
            "norm_e": self.norm_e,
            "iterations": self.iterations,
            "sweeps": self.sweeps,
            "converged": self.converged,
            "min_value": self.min_value,
        }
        if self.poisson_rel_residual is not None:
            out["poisson_rel_residual"] = self.poisson_rel_residual
        if self.decay is not None:
            out["decay"] = self.decay.as_dict()
        return out


def mp_level_cap(wcfg: WeightConfig, ncfg: NonlinearityConfig) -> float:
    """Explicit upper bound for the minimax level:
    (omega A0 / N) ((b0_eff + N)/alpha0)^{N-1}."""
    der = derive_exponents(wcfg)
    N = wcfg.N
    return der.omega * wcfg.A0 / N * ((der.b0_eff + N) / ncfg.alpha0) ** (N - 1)


def bump_profile(grid: RadialGrid, inner: float = 0.125, outer: float = 0.25) -> RadialFunction:
    """Smooth radial bump: 1 on [0, inner], quintic transition, 0 beyond outer."""
    r = grid.nodes
    s = np.clip((r - inner) / (outer - inner), 0.0, 1.0)
    smooth = s**3 * (6.0 * s**2 - 15.0 * s + 10.0)
    return RadialFunction(grid, 1.0 - smooth)


def _smooth_direction(rng: np.random.Generator, grid: RadialGrid) -> np.ndarray:
    v = np.zeros_like(grid.nodes)
    for _ in range(rng.integers(2, 5)):
        amp = rng.normal()
        center = rng.uniform(0.0, 2.0)
        width = rng.uniform(0.15, 1.0)
        v += amp * np.exp(-((grid.nodes - center) / width) ** 2)
    v[-1] = 0.0
    return v


@dataclass(frozen=True)
class GeometryReport:
    rho_small: float
    eta: float
    e: RadialFunction
    t_star: float
    bump_norm: float


def find_geometry(ctx: EnergyContext, mu: float | None,
                  params: SolverParams | None = None) -> GeometryReport:
    """Establish the mountain-pass geometry for J_mu (or J when mu is None).

    Returns a small radius rho with positive sampled minimum eta of the
    energy on the sphere of that radius, and an endpoint e = t* phi0 with
    J(e) < -1, found by doubling t*.
    """
    params = params or SolverParams()
    K = ctx.kernel_log() if mu is None else ctx.kernel_mu(mu)
    phi0 = bump_profile(ctx.grid)
    nrm = ctx.norm_e(phi0.values)

    t_star = 1.0
    while True:
        if t_star > 2.0**20:
            raise GeometryError(
                "no negative-energy endpoint up to t* = 2^20; the configuration "
                "violates the coercivity-loss structure or is badly scaled")
        if t_star > ctx.ncfg.overflow_cap:
            raise GeometryError(
                "endpoint search hit the exponential overflow cap before the "
                "energy turned negative; rescale the nonlinearity")
        if ctx.energy(t_star * phi0.values, K).total < -1.0:
            break
        t_star *= 2.0

    e = RadialFunction(ctx.grid, t_star * phi0.values)

    # ridge scan along the bump ray locates the ambient energy scale
    rhos = np.geomspace(1e-3, 0.9 * t_star * nrm, 40)
    vals = np.array([ctx.energy((rho / nrm) * phi0.values, K).total for rho in rhos])
    rho_small = 0.5 * float(rhos[int(np.argmax(vals))])

    rng = np.random.default_rng(params.seed)
    for _ in range(10):
        dirs = []
        for _ in range(32):
            v = _smooth_direction(rng, ctx.grid)
            nv = ctx.norm_e(v)
            if nv > 0:
                dirs.append(v * (rho_small / nv))
        eta = min(ctx.energy(v, K).total for v in dirs)
        if eta > 0.0:
            return GeometryReport(rho_small=rho_small, eta=float(eta), e=e,
                                  t_star=t_star, bump_norm=nrm)
        rho_small *= 0.5
    raise GeometryError("no radius with positive sampled energy minimum found")


def _ray_max(ctx: EnergyContext, K, v_hat: np.ndarray, t_hint: float | None = None,
             golden_iters: int = 60):
    """max_t J(t v_hat) by coarse bracket + golden section.

    Returns (t_star, value, t_neg) where t_neg is a ray parameter past the
    ridge with negative energy (endpoint certificate).  The expansion is
    guarded by the exponential overflow cap.
    """
    cap_t = 0.95 * ctx.ncfg.overflow_cap / max(float(np.max(np.abs(v_hat))), 1e-300)

    def val(t):
        return ctx.energy(t * v_hat, K).total

    t_hi = min(2.0 * t_hint, cap_t) if t_hint else min(4.0, cap_t)
    for _ in range(80):
        ts = np.linspace(0.0, t_hi, 17)
        vs = np.array([val(t) for t in ts[1:]])
        k = 1 + int(np.argmax(vs))
        if k < len(ts) - 1:
            break
        t_hi = min(t_hi * 2.0, cap_t)
        if t_hi >= cap_t * 0.999:
            raise NonconvergenceError(
                "ray maximization hit the overflow cap before the energy "
                "turned over; the interaction term may be too weak")
    a, b = ts[k - 1], ts[k + 1]
    phi_g = (math.sqrt(5) - 1) / 2
    for _ in range(golden_iters):
        c1 = b - phi_g * (b - a)
        c2 = a + phi_g * (b - a)
        if val(c1) < val(c2):
            a = c1
        else:
            b = c2
    t_star = 0.5 * (a + b)
    # a ray point past the ridge with negative energy, for the path endpoint
    t_neg = t_hi
    for _ in range(60):
        if val(t_neg) < 0.0:
            break
        t_neg = min(t_neg * 1.5, cap_t)
    return t_star, val(t_star), t_neg


def _ridge_descent(ctx: EnergyContext, K, v0_vals: np.ndarray, params: SolverParams,
                   switch_res: float, trace: list | None):
    """Phase 1: envelope descent over unit ray directions.

    Returns (state, u, tangent, sweeps) with u the final ridge point and
    tangent the ray direction (the sole ascent direction through it).
    """
    v = v0_vals / ctx.norm_e(v0_vals)
    t_star, e_val, t_neg = _ray_max(ctx, K, v)
    sigma = 0.5
    stall = 0
    rising = 0
    state = MountainPassState(path=np.zeros((2, len(v))), energies=np.zeros(2),
                              max_index=0, iteration=0)
    for sweep in range(params.max_sweeps):
        u = t_star * v
        grad = ctx.gradient(u, K)
        res = ctx.dual_norm(grad)
        scale = max(1.0, ctx.norm_e(u))
        state.iteration = sweep
        if res < state.best_residual:
            state.best_residual = res
            state.best_candidate = u.copy()
        if trace is not None:
            trace.append({"phase": 1, "sweep": sweep, "ridge_energy": float(e_val),
                          "residual": res, "t_star": float(t_star)})
        if res <= switch_res * scale:
            break
        d = ctx.precondition(u, grad)
        accepted = False
        sig = sigma
        for _ in range(40):
            trial = u - sig * d
            trial[-1] = 0.0
            nrm = ctx.norm_e(trial)
            if nrm <= 1e-12:
                sig *= 0.5
                continue
            v_trial = trial / nrm
            try:
                t_t, e_t, tn_t = _ray_max(ctx, K, v_trial, t_hint=t_star,
                                          golden_iters=45)
            except (NonconvergenceError, CappedEvaluationError):
                sig *= 0.5
                continue
            if e_t < e_val:
                accepted = True
                break
            sig *= 0.5
        if not accepted:
            break  # envelope resolved to line-search precision
        if e_t > e_val + 1e-12 * max(1.0, abs(e_val)):
            rising += 1
            if rising >= 10:
                raise StagnationError(
                    "ridge energy increased for 10 consecutive accepted sweeps",
                    {"sweep": sweep, "ridge_energy": e_t})
        else:
            rising = 0
        if e_val - e_t <= 1e-12 * max(1.0, abs(e_val)):
            stall += 1
        else:
            stall = 0
        v, t_star, e_val, t_neg = v_trial, t_t, e_t, tn_t
        sigma = min(sig * 2.0, params.sigma_max)
        if stall >= params.stall_sweeps:
            break
    u = t_star * v
    # certified discrete path through the ridge point: s -> s * t_neg * v
    P = params.path_points
    ss = np.linspace(0.0, 1.0, P)
    path = ss[:, None] * (t_neg * v)[None, :]
    energies = np.array([ctx.energy(p, K).total for p in path])
    state.path = path
    state.energies = energies
    state.max_index = int(np.argmax(energies))
    return state, u.copy(), v.copy(), state.iteration + 1


def _hessian_action(ctx: EnergyContext, K, u: np.ndarray, scale: float):
    """Central-difference Hessian action v -> (grad(u+hv) - grad(u-hv))/2h."""

    def matvec(v):
        v = np.asarray(v, dtype=float)
        vmax = float(np.max(np.abs(v)))
        if vmax == 0.0:
            return np.zeros_like(v)
        h = 1e-6 * scale / vmax
        gp = ctx.gradient(u + h * v, K)
        gm = ctx.gradient(u - h * v, K)
        return (gp - gm) / (2.0 * h)

    return matvec


def _residual_fallback_step(ctx: EnergyContext, K, u, grad, res, scale):
    """One monotone Armijo step on R(u) = (1/2) grad . K^{-1} grad.

    Returns (u, grad, res, moved).  The descent direction is the
    K-preconditioned gradient of R, computed with one extra Hessian action.
    """
    d = ctx.precondition(u, grad)
    hmax = float(np.max(np.abs(d)))
    if hmax == 0.0:
        return u, grad, res, False
    h = 1e-6 * scale / hmax
    Hd = (ctx.gradient(u + h * d, K) - ctx.gradient(u - h * d, K)) / (2.0 * h)
    direction = ctx.precondition(u, Hd)
    slope = float(np.dot(Hd, direction))  # = |K^{-1/2} H d|^2 >= 0
    if slope <= 0.0:
        return u, grad, res, False
    R0 = 0.5 * float(np.dot(grad, d))
    alpha = 1.0
    for _ in range(50):
        trial = u - alpha * direction
        trial[-1] = 0.0
        if np.max(np.abs(trial)) > ctx.ncfg.overflow_cap:
            alpha *= 0.5
            continue
        g_t = ctx.gradient(trial, K)
        R_t = 0.5 * float(np.dot(g_t, ctx.precondition(trial, g_t)))
        if R_t <= R0 - 1e-4 * alpha * slope:
            return trial, g_t, ctx.dual_norm(g_t), True
        alpha *= 0.5
    return u, grad, res, False


def _refine_saddle(ctx: EnergyContext, K, u0: np.ndarray, tangent: np.ndarray,
                   tol_factor: float, params: SolverParams, trace: list | None):
    """Phase 2: inexact Newton (MINRES on the indefinite Hessian).

    Returns (u, residual, iterations).  Raises NonconvergenceError when the
    iteration budget is exhausted.
    """
    from scipy.sparse.linalg import LinearOperator, minres

    u = u0.copy()
    u[-1] = 0.0
    grad = ctx.gradient(u, K)
    res = ctx.dual_norm(grad)
    best_res, best_u = res, u.copy()
    n = len(u)
    fallback_streak = 0
    for it in range(params.refine_max_iter):
        scale = max(1.0, ctx.norm_e(u))
        if res <= tol_factor * scale:
            return u, res, it
        eta = min(0.1, math.sqrt(res / scale))
        Hop = LinearOperator((n, n), matvec=_hessian_action(ctx, K, u, scale))
        Mop = LinearOperator((n, n), matvec=lambda v: ctx.precondition(u, np.asarray(v, float)))
        delta, _ = minres(Hop, -grad, M=Mop, rtol=eta, maxiter=250)
        delta = np.asarray(delta)
        delta[-1] = 0.0
        dn = ctx.norm_e(delta)
        if dn > 0.5 * scale:
            delta *= 0.5 * scale / dn
        moved = False
        alpha = 1.0
        for _ in range(30):
            trial = u + alpha * delta
            trial[-1] = 0.0
            if np.max(np.abs(trial)) > ctx.ncfg.overflow_cap:
                alpha *= 0.5
                continue
            g_t = ctx.gradient(trial, K)
            r_t = ctx.dual_norm(g_t)
            if r_t < res * (1.0 - 1e-4 * alpha):
                u, grad, res = trial, g_t, r_t
                moved = True
                break
            alpha *= 0.5
        if not moved:
            u, grad, res, moved = _residual_fallback_step(ctx, K, u, grad, res, scale)
            fallback_streak += 1
        else:
            fallback_streak = 0
        if trace is not None and (it % 5 == 0 or not moved):
            trace.append({"phase": 2, "iter": it, "residual": res,
                          "newton": fallback_streak == 0})
        if res < best_res:
            best_res, best_u = res, u.copy()
        if not moved and fallback_streak > 3:
            break
    raise NonconvergenceError(
        f"saddle refinement did not reach tolerance in {params.refine_max_iter} "
        f"iterations (best residual {best_res:.3e})",
        {"best_residual": best_res, "iterations": params.refine_max_iter})


def _finalize(ctx: EnergyContext, K, mu, u_vals, res, its, sweeps, tol_factor,
              tangent=None, converged=True) -> SolutionBundle:
    # clear negative round-off if it does not disturb the certificate
    floor = -1e-8 * max(1.0, float(np.max(np.abs(u_vals))))
    if floor <= float(np.min(u_vals)) < 0.0:
        clipped = np.maximum(u_vals, 0.0)
        res_c = ctx.dual_norm(ctx.gradient(clipped, K))
        if res_c <= tol_factor * max(1.0, ctx.norm_e(clipped)):
            u_vals, res = clipped, res_c
    # independent re-evaluation of the gradient certificate
    grad = ctx.gradient(u_vals, K)
    res_dual = ctx.dual_norm(grad)
    res_raw = float(np.linalg.norm(grad))
    bd = ctx.energy(u_vals, K)
    u = RadialFunction(ctx.grid, u_vals)
    return SolutionBundle(
        mu=mu, u=u, energy=bd, c_value=bd.total, residual_dual=res_dual,
        residual_raw=res_raw, norm_e=ctx.norm_e(u_vals), iterations=its,
        sweeps=sweeps, converged=converged, tangent=tangent,
        min_value=float(np.min(u_vals)))


def mountain_pass(ctx: EnergyContext, mu: float | None,
                  params: SolverParams | None = None,
                  warm_start: np.ndarray | None = None,
                  warm_tangent: np.ndarray | None = None,
                  trace: list | None = None) -> SolutionBundle:
    """Locate the mountain-pass critical point of J_mu (log functional when
    mu is None) to the dual-residual tolerance of ``params``.

    A warm start skips the path phase and refines directly from the given
    nodal values.
    """
    params = params or SolverParams()
    K = ctx.kernel_log() if mu is None else ctx.kernel_mu(mu)
    tol_factor = params.log_tol_factor if mu is None else params.tol_factor
    sweeps = 0
    if warm_start is None:
        geom = find_geometry(ctx, mu, params)
        state, u, tangent, sweeps = _ridge_descent(ctx, K, geom.e.values, params,
                                                   params.phase_switch_residual,
                                                   trace)
    else:
        u = warm_start.copy()
        u[-1] = 0.0
        tangent = warm_tangent if warm_tangent is not None else np.gradient(u)
    u_ref, res, its = _refine_saddle(ctx, K, u, tangent, tol_factor, params, trace)
    return _finalize(ctx, K, mu, u_ref, res, its, sweeps, tol_factor, tangent=tangent)


# --- capped-logarithm level-bound verification --------------------------

@dataclass(frozen=True)
class MoserEntry:
    n: float
    norm_pow_quadrature: float
    norm_pow_closed_form: float
    delta_n: float
    delta_lower: float
    delta_upper: float
    t_n: float | None
    max_energy: float | None
    below_cap: bool | None


@dataclass(frozen=True)
class MoserReport:
    rho: float
    level_cap: float
    entries: tuple[MoserEntry, ...]
    deltas_decreasing: bool

    def as_dict(self) -> dict:
        return {
            "rho": self.rho,
            "level_cap": self.level_cap,
            "deltas_decreasing": self.deltas_decreasing,
            "entries": [vars(e) for e in self.entries],
        }


def concentration_profile(grid: RadialGrid, n: float, rho: float) -> RadialFunction:
    """Capped-logarithm profile with corners at rho/n and rho."""
    ln = math.log(n)
    r = grid.nodes
    vals = np.where(
        r <= rho / n, ln ** (1.0 - 1.0 / grid.dim),
        np.where(r < rho, np.log(rho / np.maximum(r, 1e-300)) / ln ** (1.0 / grid.dim), 0.0))
    return RadialFunction(grid, vals)


def moser_norm_report(wcfg: WeightConfig, n_list, rho: float | None = None,
                      grid_points: int = 801, r_max: float = 50.0) -> MoserReport:
    """Quadrature vs closed-form gradient-energy expansion of the profiles.

    ||w_n||^N = omega A0 (1 + delta_n) with
    delta_n = (rho^l - (rho/n)^l) / (l log n) for the built-in weight; the
    profile corners are pinned onto grid nodes so the staggered norm sees
    them exactly.
    """
    rho = rho if rho is not None else moser_radius(wcfg)
    der = derive_exponents(wcfg)
    N = wcfg.N
    entries = []
    for n in n_list:
        grid = RadialGrid.geometric(N, r_max, grid_points, pinned=(rho / n, rho))
        w = concentration_profile(grid, n, rho)
        quad = e_norm(w, lambda r: eval_A(wcfg, r)) ** N
        ln = math.log(n)
        d_lo = (rho**wcfg.ell - (rho / n) ** wcfg.ell) / (wcfg.ell * ln)
        d_hi = (rho**wcfg.L - (rho / n) ** wcfg.L) / (wcfg.L * ln)
        closed = der.omega * wcfg.A0 * (1.0 + d_lo)  # built-in A has L = ell
        delta_n = quad / (der.omega * wcfg.A0) - 1.0
        entries.append(MoserEntry(
            n=float(n), norm_pow_quadrature=float(quad),
            norm_pow_closed_form=float(closed), delta_n=float(delta_n),
            delta_lower=float(d_lo), delta_upper=float(d_hi),
            t_n=None, max_energy=None, below_cap=None))
    deltas = [e.delta_n for e in entries]
    cap = der.omega * wcfg.A0 / N  # placeholder scale; real cap needs alpha0
    report = MoserReport(rho=rho, level_cap=cap, entries=tuple(entries),
                         deltas_decreasing=all(b < a for a, b in zip(deltas, deltas[1:])))
    return report


def moser_bound_report(wcfg: WeightConfig, ncfg: NonlinearityConfig, mu: float,
                       n_list, rho: float | None = None, grid_points: int = 801,
                       r_max: float = 50.0, quad_order: int = 129) -> MoserReport:
    """Full level-bound report: norm expansion plus max_t J_mu(t w_n) < cap.

    The ray maximization uses golden-section search after bracket expansion
    from t_hi = 2 (N cap)^{1/N}.
    """
    rho = rho if rho is not None else moser_radius(wcfg)
    base = moser_norm_report(wcfg, n_list, rho, grid_points, r_max)
    cap = mp_level_cap(wcfg, ncfg)
    entries = []
    for entry in base.entries:
        n = entry.n
        grid = RadialGrid.geometric(wcfg.N, r_max, grid_points, pinned=(rho / n, rho))
        ctx = EnergyContext(grid, wcfg, ncfg, quad_order=quad_order)
        K = ctx.kernel_mu(mu)
        w = concentration_profile(grid, n, rho)
        w_hat = w.values / (entry.norm_pow_quadrature ** (1.0 / wcfg.N))
        t_n, max_e = _maximize_ray(ctx, K, w_hat, cap)
        entries.append(MoserEntry(
            n=entry.n, norm_pow_quadrature=entry.norm_pow_quadrature,
            norm_pow_closed_form=entry.norm_pow_closed_form,
            delta_n=entry.delta_n, delta_lower=entry.delta_lower,
            delta_upper=entry.delta_upper, t_n=float(t_n),
            max_energy=float(max_e), below_cap=bool(max_e < cap)))
    return MoserReport(rho=rho, level_cap=cap, entries=tuple(entries),
                       deltas_decreasing=base.deltas_decreasing)


def _maximize_ray(ctx: EnergyContext, K, w_hat: np.ndarray, cap: float):
    """max_t J(t w_hat) by bracket expansion + golden section."""
    N = ctx.grid.dim
    t_hi = 2.0 * (N * cap) ** (1.0 / N)
    cap_t = 0.95 * ctx.ncfg.overflow_cap / max(float(np.max(np.abs(w_hat))), 1e-300)

    def val(t):
        return ctx.energy(t * w_hat, K).total

    for _ in range(60):
        ts = np.linspace(0.0, t_hi, 33)
        vs = np.array([val(t) for t in ts])
        k = int(np.argmax(vs))
        if k < len(ts) - 1:
            break
        t_hi *= 2.0
        if t_hi > cap_t:
            raise NonconvergenceError(
                "ray maximization bracket expansion hit the overflow cap")
    a, b = ts[max(k - 1, 0)], ts[min(k + 1, len(ts) - 1)]
    phi_g = (math.sqrt(5) - 1) / 2
    for _ in range(120):
        c1 = b - phi_g * (b - a)
        c2 = a + phi_g * (b - a)
        if val(c1) < val(c2):
            a = c1
        else:
            b = c2
    t_star = 0.5 * (a + b)
    return t_star, val(t_star)


# --- continuation --------------------------------------------------------

@dataclass(frozen=True)
class ContinuationResult:
    schedule: ContinuationSchedule
    c_values: tuple[float, ...]
    norms: tuple[float, ...]
    increments: tuple[float, ...]
    level_cap: float
    all_below_cap: bool
    final: SolutionBundle
    bundles: tuple[SolutionBundle, ...]

    def report(self) -> dict:
        return {
            "mu_values": list(self.schedule.mu_values),
            "c_values": list(self.c_values),
            "norms": list(self.norms),
            "increments": list(self.increments),
            "level_cap": self.level_cap,
            "all_below_cap": self.all_below_cap,
            "final": self.final.report(),
        }


def continue_to_zero(ctx: EnergyContext, schedule: ContinuationSchedule | None = None,
                     params: SolverParams | None = None,
                     trace: list | None = None) -> ContinuationResult:
    """Drive the approximation parameter to zero and polish against the
    log functional.

    The first solve is cold (path deformation); subsequent parameters are
    warm-started from the previous critical point.  The final bundle carries
    the Poisson component and residual, the near/far interaction split, and
    the tail-decay diagnostic.
    """
    params = params or SolverParams()
    schedule = schedule or ContinuationSchedule.geometric(mu_start=min(0.5, ctx.wcfg.mu0))
    cap = mp_level_cap(ctx.wcfg, ctx.ncfg)
    bundles: list[SolutionBundle] = []
    increments: list[float] = []
    prev_vals = None
    tangent = None
    for k, mu in enumerate(schedule.mu_values):
        if trace is not None:
            trace.append({"event": "solve_start", "mu": mu, "warm": prev_vals is not None})
        bundle = mountain_pass(ctx, mu, params, warm_start=prev_vals,
                               warm_tangent=tangent, trace=trace)
        if prev_vals is not None:
            increments.append(ctx.norm_e(bundle.u.values - prev_vals))
        prev_vals = bundle.u.values
        tangent = bundle.tangent
        bundles.append(bundle)
        if trace is not None:
            trace.append({"event": "solve_done", "mu": mu, "c": bundle.c_value,
                          "norm": bundle.norm_e, "residual": bundle.residual_dual})
    # limit polish against the log functional
    final_core = mountain_pass(ctx, None, params, warm_start=prev_vals,
                               warm_tangent=tangent, trace=trace)
    split = j_log(final_core.u, ctx, split=True)
    phi = poisson_recover(final_core.u, ctx)
    source = RadialFunction(ctx.grid, ctx.source(final_core.u.values))
    p_res = poisson_residual(phi, source) if ctx.grid.dim in (2, 4) else None
    decay = decay_diagnostic(final_core.u, ctx.wcfg.ell, ctx.wcfg.r0)
    final = SolutionBundle(
        mu=None, u=final_core.u, energy=split, c_value=split.total,
        residual_dual=final_core.residual_dual, residual_raw=final_core.residual_raw,
        norm_e=final_core.norm_e, iterations=final_core.iterations,
        sweeps=final_core.sweeps, converged=final_core.converged,
        phi=phi, poisson_rel_residual=p_res, decay=decay,
        tangent=final_core.tangent, min_value=final_core.min_value)
    c_vals = tuple(b.c_value for b in bundles)
    return ContinuationResult(
        schedule=schedule, c_values=c_vals,
        norms=tuple(b.norm_e for b in bundles), increments=tuple(increments),
        level_cap=cap, all_below_cap=bool(all(0.0 < c < cap for c in c_vals)),
        final=final, bundles=tuple(bundles))
