"""Energy functionals, their discrete gradients, and the Poisson component.

The approximating functional on the radial grid is

    J_mu(u) = (1/N) ||u||^N - (C_N/2) int (G_mu * Q F(u)) Q F(u) dx,

with the limiting functional J using the log kernel in place of G_mu.  The
kinetic term uses the staggered-difference norm of :mod:`logchoquard.grids`;
the interaction term uses the dense angular-averaged kernel matrices of
:mod:`logchoquard.kernels`.  Both terms are exact functions of the nodal
values, and the gradient returned here is the exact coordinate gradient of
the discrete energy:

    g_k = dJ/du_k = omega (flux_{k-1} - flux_k)
          - C_N omega^2 W_k (kappa W conv) Q_k f(u_k),

so finite differences of the energy reproduce it to roundoff.  The last node
is clamped to zero (truncation boundary condition) and its gradient entry is
masked.

The dual residual norm of a gradient g is the quadrature-weighted l2 norm of
the density g_k / m_k, i.e. sqrt(sum g_k^2 / m_k) with node measure
m_k = omega r_k^{N-1} w_k; the raw l2 norm is reported alongside.

The Poisson component is recovered as phi_u = C_N (log-kernel * Q F(u)); for
even dimensions the residual of (-Delta)^{N/2} phi = Q F(u) is measured by
applying the radial Laplacian once (N=2) or twice (N=4) with second-order
finite differences and comparing in a weighted interior L2 norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import CappedEvaluationError, DomainError, UnsupportedDimensionError
from .grids import RadialFunction, RadialGrid, node_derivative
from .kernels import KernelMatrix, assemble_kernel_matrix
from .nonlinearity import NonlinearityConfig, F_eval, f_eval
from .weights import WeightConfig, derive_exponents, eval_A, eval_Q, sphere_area

__all__ = [
    "EnergyBreakdown",
    "EnergyContext",
    "j_mu",
    "j_mu_gradient",
    "j_log",
    "j_log_gradient",
    "dual_norm",
    "poisson_recover",
    "poisson_residual",
    "radial_laplacian",
]


@dataclass(frozen=True)
class EnergyBreakdown:
    """Kinetic / interaction split of a functional value.

    ``total = kinetic - interaction`` identically.  For the log functional
    the signed near (|x-y| <= 1) and far (|x-y| > 1) parts of the interaction
    integral are attached when requested.
    """

    kinetic: float
    interaction: float
    total: float
    near_part: float | None = None
    far_part: float | None = None

    def as_dict(self) -> dict:
        out = {"kinetic": self.kinetic, "interaction": self.interaction,
               "total": self.total}
        if self.near_part is not None:
            out["logFF_near"] = self.near_part
            out["logFF_far"] = self.far_part
        return out


class EnergyContext:
    """Precomputed grid/weight/kernel state shared by all evaluations.

    Immutable after construction apart from the lazily assembled kernel
    matrices (memoized per mu and per log-split region).
    """

    def __init__(self, grid: RadialGrid, wcfg: WeightConfig, ncfg: NonlinearityConfig,
                 quad_order: int = 129, cache_dir: str | None = None):
        if wcfg.N != grid.dim or ncfg.N != grid.dim:
            raise DomainError("grid, weight, and nonlinearity dimensions disagree")
        self.grid = grid
        self.wcfg = wcfg
        self.ncfg = ncfg
        self.derived = derive_exponents(wcfg)
        self.quad_order = quad_order
        self.cache_dir = cache_dir
        self.omega = sphere_area(grid.dim)
        self.A_mid = np.asarray(eval_A(wcfg, grid.midpoints))
        self.A_nodes = np.asarray(eval_A(wcfg, grid.nodes))
        self.Q_nodes = np.asarray(eval_Q(wcfg, grid.nodes))
        self.node_measure = self.omega * grid.volume_weights
        self._kernels: dict = {}

    # -- kernels ----------------------------------------------------------
    def kernel_mu(self, mu: float) -> KernelMatrix:
        key = ("gmu", float(mu))
        if key not in self._kernels:
            self._kernels[key] = assemble_kernel_matrix(
                self.grid, "gmu", mu=float(mu), quad_order=self.quad_order,
                cache_dir=self.cache_dir)
        return self._kernels[key]

    def kernel_log(self, region: str | None = None) -> KernelMatrix:
        key = ("log", region)
        if key not in self._kernels:
            self._kernels[key] = assemble_kernel_matrix(
                self.grid, "log", region=region, quad_order=self.quad_order,
                cache_dir=self.cache_dir)
        return self._kernels[key]

    # -- pointwise source terms --------------------------------------------
    def check_cap(self, values: np.ndarray) -> None:
        cap = self.ncfg.overflow_cap
        worst = float(np.max(np.abs(values)))
        if worst > cap:
            raise CappedEvaluationError(
                f"nodal amplitude {worst:.3g} exceeds the exponential overflow "
                f"cap {cap:.3g}; review the grid resolution and iterate scaling"
            )

    def source(self, values: np.ndarray) -> np.ndarray:
        """Q(r) F(u) at the nodes."""
        return self.Q_nodes * F_eval(self.ncfg, values)

    # -- energy pieces ------------------------------------------------------
    def kinetic(self, values: np.ndarray) -> float:
        """(1/N) ||u||^N with the staggered-difference gradient norm."""
        g = self.grid
        du = np.diff(values) / g.spacings
        N = g.dim
        total = self.omega * float(np.sum(
            self.A_mid * np.abs(du) ** N * g.midpoints ** (N - 1) * g.spacings))
        return total / N

    def norm_e(self, values: np.ndarray) -> float:
        return (self.grid.dim * self.kinetic(values)) ** (1.0 / self.grid.dim)

    def interaction(self, values: np.ndarray, K: KernelMatrix) -> float:
        """(C_N/2) int (k * Q F(u)) Q F(u) dx on the grid."""
        S = self.source(values)
        WS = self.grid.volume_weights * S
        return 0.5 * self.derived.C_N * self.omega**2 * float(WS @ (K.kappa @ WS))

    def energy(self, values: np.ndarray, K: KernelMatrix) -> EnergyBreakdown:
        self.check_cap(values)
        kin = self.kinetic(values)
        inter = self.interaction(values, K)
        return EnergyBreakdown(kinetic=kin, interaction=inter, total=kin - inter)

    def gradient(self, values: np.ndarray, K: KernelMatrix) -> np.ndarray:
        """Exact coordinate gradient of the discrete energy; last node masked."""
        self.check_cap(values)
        g = self.grid
        N = g.dim
        du = np.diff(values) / g.spacings
        flux = self.A_mid * np.abs(du) ** (N - 2) * du * g.midpoints ** (N - 1)
        grad = np.zeros_like(values)
        grad[:-1] -= flux
        grad[1:] += flux
        grad *= self.omega
        S = self.source(values)
        conv = self.omega * (K.folded @ S)  # (k * QF(u)) at the nodes
        grad -= self.derived.C_N * conv * self.Q_nodes \
            * f_eval(self.ncfg, values) * self.node_measure
        grad[-1] = 0.0
        return grad

    def dual_norm(self, grad: np.ndarray) -> float:
        """Quadrature-weighted dual norm sqrt(sum g_k^2 / m_k), boundary excluded."""
        m = self.node_measure[:-1]
        return float(np.sqrt(np.sum(grad[:-1] ** 2 / m)))

    # -- descent preconditioner ----------------------------------------------
    def precondition(self, values: np.ndarray, rhs: np.ndarray,
                     eps: float = 1e-8) -> np.ndarray:
        """Solve the linearized weighted-diffusion problem K(u) d = rhs.

        K is the stiffness form sum_p a_p (D_p d)(D_p v) with coefficient
        a_p = omega A(m) (|D_p u|^2 + eps^2)^{(N-2)/2} m^{N-1} h, Dirichlet at
        the last node.  Tridiagonal solve; returns d with d[-1] = 0.
        """
        g = self.grid
        N = g.dim
        du = np.diff(values) / g.spacings
        coef = self.omega * self.A_mid * (du**2 + eps**2) ** ((N - 2) / 2.0) \
            * g.midpoints ** (N - 1) * g.spacings
        a = coef / g.spacings**2  # panel stiffness a_p / h_p^2 * h_p... folded
        M = len(values)
        n = M - 1  # unknowns: nodes 0..M-2
        diag = np.zeros(n)
        diag[0] = a[0]
        diag[1:] = a[:n - 1] + a[1:n]
        upper = np.zeros(n)
        upper[1:] = -a[:n - 1]
        lower = np.zeros(n)
        lower[:-1] = -a[:n - 1]
        ab = np.vstack([upper, diag, lower])
        sol = solve_banded((1, 1), ab, rhs[:n])
        out = np.zeros_like(values)
        out[:n] = sol
        return out

    def k_inner(self, values: np.ndarray, x: np.ndarray, y: np.ndarray,
                eps: float = 1e-8) -> float:
        """Stiffness inner product <x, y>_{K(u)} matching :meth:`precondition`."""
        g = self.grid
        N = g.dim
        du = np.diff(values) / g.spacings
        coef = self.omega * self.A_mid * (du**2 + eps**2) ** ((N - 2) / 2.0) \
            * g.midpoints ** (N - 1) * g.spacings
        dx = np.diff(x) / g.spacings
        dy = np.diff(y) / g.spacings
        return float(np.sum(coef * dx * dy))


# -- module-level operations matching the public surface ---------------------

def j_mu(u: RadialFunction, mu: float, ctx: EnergyContext) -> EnergyBreakdown:
    """Value of the approximating functional at u."""
    return ctx.energy(u.values, ctx.kernel_mu(mu))


def j_mu_gradient(u: RadialFunction, mu: float, ctx: EnergyContext) -> RadialFunction:
    """Discrete gradient of J_mu at u (coordinate gradient; see module doc)."""
    return RadialFunction(u.grid, ctx.gradient(u.values, ctx.kernel_mu(mu)))


def j_log(u: RadialFunction, ctx: EnergyContext, split: bool = False) -> EnergyBreakdown:
    """Value of the limiting log functional, optionally with the near/far
    split of the interaction integral (certifies its absolute finiteness)."""
    base = ctx.energy(u.values, ctx.kernel_log())
    if not split:
        return base
    S = ctx.source(u.values)
    WS = ctx.grid.volume_weights * S
    near = ctx.derived.C_N * ctx.omega**2 * float(WS @ (ctx.kernel_log("near").kappa @ WS))
    far = ctx.derived.C_N * ctx.omega**2 * float(WS @ (ctx.kernel_log("far").kappa @ WS))
    return EnergyBreakdown(kinetic=base.kinetic, interaction=base.interaction,
                           total=base.total, near_part=near, far_part=far)


def j_log_gradient(u: RadialFunction, ctx: EnergyContext) -> RadialFunction:
    return RadialFunction(u.grid, ctx.gradient(u.values, ctx.kernel_log()))


def dual_norm(g: RadialFunction, ctx: EnergyContext) -> float:
    return ctx.dual_norm(g.values)


def poisson_recover(u: RadialFunction, ctx: EnergyContext) -> RadialFunction:
    """Poisson component phi_u = C_N * (log-kernel * Q F(u))."""
    S = ctx.source(u.values)
    K = ctx.kernel_log()
    vals = ctx.derived.C_N * ctx.omega * (K.folded @ S)
    return RadialFunction(u.grid, vals)


def radial_laplacian(values: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Radial Laplacian f'' + (N-1) f'/r with second-order stencils."""
    r = grid.nodes
    f = values
    out = np.empty_like(f)
    hl = r[1:-1] - r[:-2]
    hr = r[2:] - r[1:-1]
    d2 = 2.0 * (hl * f[2:] - (hl + hr) * f[1:-1] + hr * f[:-2]) / (hl * hr * (hl + hr))
    d1 = (-hr / (hl * (hl + hr))) * f[:-2] + ((hr - hl) / (hl * hr)) * f[1:-1] \
        + (hl / (hr * (hl + hr))) * f[2:]
    out[1:-1] = d2 + (grid.dim - 1) * d1 / r[1:-1]
    # endpoint values by quadratic extrapolation of the interior operator
    out[0] = out[1] + (out[2] - out[1]) * (r[0] - r[1]) / (r[2] - r[1])
    out[-1] = out[-2] + (out[-2] - out[-3]) * (r[-1] - r[-2]) / (r[-2] - r[-3])
    return out


def poisson_residual(phi: RadialFunction, source: RadialFunction,
                     dim: int | None = None, boundary_skip: int = 5):
    """Relative interior residual of (-Delta)^{N/2} phi = source for N in {2, 4}.

    Applies the radial Laplacian once (N=2, with sign -Delta) or twice
    (N=4, Delta^2), compares against the source in the quadrature-weighted
    L2 norm excluding ``boundary_skip`` nodes at each end.
    """
    grid = phi.grid
    N = dim if dim is not None else grid.dim
    if N not in (2, 4):
        raise UnsupportedDimensionError(
            f"residual check implemented for N in {{2, 4}}, got {N} "
            "(fractional powers are out of scope)")
    if N == 2:
        lhs = -radial_laplacian(phi.values, grid)
    else:
        lhs = radial_laplacian(radial_laplacian(phi.values, grid), grid)
    sl = slice(boundary_skip, len(grid.nodes) - boundary_skip)
    w = grid.volume_weights[sl]
    diff = lhs[sl] - source.values[sl]
    num = float(np.sqrt(np.sum(w * diff**2)))
    den = float(np.sqrt(np.sum(w * source.values[sl] ** 2)))
    if den == 0.0:
        return num
    return num / den
