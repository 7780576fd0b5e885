"""Independent checks that an assembled propagator solves the dynamics.

Three instruments, none of which share code paths with the propagator
construction they certify:

* ``cn_evolve``: a Crank-Nicolson integrator for i hbar dpsi/dt =
  -(hbar^2/2m) d2psi/dx2 + V psi on a Dirichlet grid.  The update is a
  Cayley transform of the Hermitian discrete Hamiltonian, so the L2 norm
  is conserved to round-off for real potentials.
* ``schrodinger_residual``: direct stencil substitution of a gridded K
  into the Schrodinger equation.
* ``kernel_propagate``: treats closed-form factors as a two-point kernel
  and evolves a state by quadrature, with the overall constant fixed by
  matching the free-particle normalization (m/(2 pi i hbar t))^(1/2) at
  a small reference elapsed time.

Agreement between the kernel route and the Crank-Nicolson route is the
oracle equivalence test; their disagreement under a deliberate kernel
perturbation is the corresponding negative control.
"""

from __future__ import annotations

import cmath
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .core import ComplexField, PropagatorFactors, SpatialGrid, finite_difference
from .quadratic import QuadraticPotential

__all__ = [
    "WaveState",
    "gaussian_state",
    "free_gaussian_analytic",
    "as_potential",
    "cn_evolve",
    "schrodinger_residual",
    "kernel_propagate",
    "l2_difference",
    "BOUNDARY_AMPLITUDE_WARN",
]

# Dirichlet walls are only trustworthy while the state stays this small there.
BOUNDARY_AMPLITUDE_WARN = 1.0e-8


@dataclass(frozen=True)
class WaveState:
    """A wavefunction sampled on a spatial grid at one instant."""

    grid: SpatialGrid
    psi: np.ndarray
    t: float = 0.0
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self) -> None:
        psi = np.asarray(self.psi, dtype=complex)
        if psi.shape != (self.grid.n_x,):
            raise ValueError(
                f"psi has shape {psi.shape}, grid expects ({self.grid.n_x},)"
            )
        if not np.all(np.isfinite(psi)):
            raise ValueError("psi contains non-finite samples")
        if not self.hbar > 0 or not self.mass > 0:
            raise ValueError("hbar and mass must be positive")
        object.__setattr__(self, "psi", psi)

    def norm(self) -> float:
        """L2 norm with trapezoid weights."""
        dx = self.grid.dx
        dens = np.abs(self.psi) ** 2
        total = dx * (dens.sum() - 0.5 * (dens[0] + dens[-1]))
        return float(np.sqrt(total))

    def center(self) -> float:
        dens = np.abs(self.psi) ** 2
        return float(np.sum(self.grid.x * dens) / np.sum(dens))

    def density_width(self) -> float:
        dens = np.abs(self.psi) ** 2
        mean = np.sum(self.grid.x * dens) / np.sum(dens)
        var = np.sum((self.grid.x - mean) ** 2 * dens) / np.sum(dens)
        return float(np.sqrt(var))


def gaussian_state(
    grid: SpatialGrid,
    sigma0: float,
    x_center: float = 0.0,
    k0: float = 0.0,
    t: float = 0.0,
    hbar: float = 1.0,
    mass: float = 1.0,
) -> WaveState:
    """Normalized Gaussian psi = (2 pi s^2)^(-1/4) exp(-(x-xc)^2/(4 s^2) + i k0 x)."""
    if not sigma0 > 0:
        raise ValueError(f"sigma0 must be positive, got {sigma0}")
    x = grid.x
    psi = (2.0 * np.pi * sigma0**2) ** (-0.25) * np.exp(
        -((x - x_center) ** 2) / (4.0 * sigma0**2) + 1j * k0 * x
    )
    return WaveState(grid=grid, psi=psi, t=t, hbar=hbar, mass=mass)


def free_gaussian_analytic(
    grid: SpatialGrid,
    sigma0: float,
    t: float,
    x_center: float = 0.0,
    hbar: float = 1.0,
    mass: float = 1.0,
) -> WaveState:
    """Exact V = 0 evolution of the centered Gaussian:

        psi(x, t) = (2 pi s^2)^(-1/4) a^(-1/2) exp(-(x-xc)^2/(4 s^2 a)),
        a = 1 + i hbar t / (2 m s^2).
    """
    alpha = 1.0 + 1j * hbar * t / (2.0 * mass * sigma0**2)
    x = grid.x
    psi = (
        (2.0 * np.pi * sigma0**2) ** (-0.25)
        * alpha ** (-0.5)
        * np.exp(-((x - x_center) ** 2) / (4.0 * sigma0**2 * alpha))
    )
    return WaveState(grid=grid, psi=psi, t=t, hbar=hbar, mass=mass)


def as_potential(pot) -> "callable":
    """Coerce a potential argument to a vectorized V(x, t).

    Accepts quadratic coefficient bundles, plain callables of (x, t),
    or constants.
    """
    if isinstance(pot, QuadraticPotential):
        return pot.value
    if callable(pot):
        return pot
    value = float(pot)
    return lambda x, t: value + 0.0 * np.asarray(x) * np.asarray(t)


def cn_evolve(state: WaveState, pot, dt: float, n_steps: int) -> WaveState:
    """Crank-Nicolson evolution over n_steps of size dt.

    (1 + i dt H/(2 hbar)) psi_new = (1 - i dt H/(2 hbar)) psi_old with H
    the tridiagonal discrete Hamiltonian; a time-dependent potential is
    sampled at the step midpoint.  Boundary amplitude above
    BOUNDARY_AMPLITUDE_WARN at any step triggers a single warning with
    the worst value seen (Dirichlet walls reflect, they do not absorb).
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    v_fn = as_potential(pot)
    grid, hbar, mass = state.grid, state.hbar, state.mass
    x = grid.x
    dx = grid.dx
    n = grid.n_x
    kin_off = -(hbar**2) / (2.0 * mass * dx**2)
    kin_diag = hbar**2 / (mass * dx**2)
    lam = dt / (2.0 * hbar)

    psi = state.psi.copy()
    t = state.t
    worst_boundary = 0.0
    ab = np.zeros((3, n), dtype=complex)
    for _ in range(n_steps):
        v_mid = np.broadcast_to(
            np.asarray(v_fn(x, t + 0.5 * dt), dtype=complex), (n,)
        )
        h_diag = kin_diag + v_mid
        # rhs = (1 - i lam H) psi
        h_psi = h_diag * psi
        h_psi[:-1] += kin_off * psi[1:]
        h_psi[1:] += kin_off * psi[:-1]
        rhs = psi - 1j * lam * h_psi
        # lhs matrix (1 + i lam H), banded form for solve_banded
        ab[0, 1:] = 1j * lam * kin_off
        ab[1, :] = 1.0 + 1j * lam * h_diag
        ab[2, :-1] = 1j * lam * kin_off
        psi = solve_banded((1, 1), ab, rhs)
        t += dt
        worst_boundary = max(worst_boundary, abs(psi[0]), abs(psi[-1]))
    if worst_boundary > BOUNDARY_AMPLITUDE_WARN:
        warnings.warn(
            f"boundary amplitude reached {worst_boundary:.3e} (threshold "
            f"{BOUNDARY_AMPLITUDE_WARN:.0e}); Dirichlet walls are interfering",
            stacklevel=2,
        )
    return WaveState(grid=grid, psi=psi, t=t, hbar=hbar, mass=mass)


def schrodinger_residual(
    K: ComplexField, pot, hbar: float = 1.0, mass: float = 1.0
) -> tuple[ComplexField, float]:
    """Stencil substitution into i hbar dK/dt + (hbar^2/2m) d2K/dx2 - V K.

    Returns the residual field and max|residual| / max|K| over the
    stencil-valid nodes.  The potential may also be a gridded
    ComplexField on the same grid (its mask then narrows the valid set).
    Refuses when no node survives masking.
    """
    grid = K.grid
    k_t = finite_difference(K, "t", 1)
    k_xx = finite_difference(K, "x", 2)
    mask = k_t.mask & k_xx.mask
    if isinstance(pot, ComplexField):
        if pot.grid != grid:
            raise ValueError("potential field lives on a different grid")
        v_vals = pot.values
        mask = mask & pot.mask
    else:
        v_fn = as_potential(pot)
        X, T = grid.mesh()
        v_vals = np.broadcast_to(
            np.asarray(v_fn(X, T), dtype=complex), (grid.n_x, grid.n_t)
        )
    if not mask.any():
        raise ValueError("no stencil-valid nodes: every node is excluded")
    values = (
        1j * hbar * k_t.values
        + (hbar**2 / (2.0 * mass)) * k_xx.values
        - v_vals * K.values
    )
    values = np.where(mask, values, 0.0)
    scale = float(np.max(np.abs(K.values[mask])))
    if scale == 0.0:
        raise ValueError("K vanishes on all stencil-valid nodes")
    rel = float(np.max(np.abs(values[mask])) / scale)
    return ComplexField(grid=grid, values=values, mask=mask), rel


def _quadrature_weights(grid: SpatialGrid) -> np.ndarray:
    """Composite Simpson weights; an even node count falls back to
    Simpson on the first n-1 nodes plus a trapezoid closing panel."""
    n = grid.n_x
    dx = grid.dx
    w = np.zeros(n)
    m = n if n % 2 == 1 else n - 1
    w[:m] = 1.0
    w[1:m - 1:2] = 4.0
    w[2:m - 1:2] = 2.0
    w[:m] *= dx / 3.0
    if m != n:
        w[-2] += 0.5 * dx
        w[-1] += 0.5 * dx
    return w


def kernel_propagate(
    psi0: WaveState,
    factors: PropagatorFactors,
    t_target: float,
    reference_time: float | None = None,
) -> WaveState:
    """Evolve by quadrature against the closed-form two-point kernel.

        psi(x, t) = C exp(R(tau)) int exp(i S(x, x0, tau)/hbar) psi0(x0) dx0

    with tau the elapsed time and C fixed so that C exp(R(tau_ref))
    equals the free-particle normalization (m/(2 pi i hbar tau_ref))^(1/2)
    at the configured reference elapsed time.  Without a reference the
    kernel's overall constant is undetermined and the call refuses.
    """
    if factors.two_point_action is None or factors.time_amplitude is None:
        raise ValueError("kernel propagation needs closed-form two-point factors")
    if reference_time is None:
        raise ValueError(
            "unnormalized kernel: no reference match configured "
            "(pass reference_time, e.g. 1e-2)"
        )
    if not reference_time > 0:
        raise ValueError(f"reference_time must be positive, got {reference_time}")
    if factors.hbar != psi0.hbar or factors.mass != psi0.mass:
        raise ValueError("state and factors disagree on hbar or mass")
    tau = t_target - psi0.t
    if tau <= 0:
        raise ValueError(f"t_target={t_target} is not ahead of the state at t={psi0.t}")
    hbar, mass = psi0.hbar, psi0.mass
    free_norm = cmath.sqrt(mass / (2j * np.pi * hbar * reference_time))
    amp_ref = complex(np.asarray(factors.time_amplitude(reference_time), dtype=complex))
    norm_const = free_norm / cmath.exp(amp_ref)
    x = psi0.grid.x
    s2 = np.asarray(
        factors.two_point_action(x[:, None], x[None, :], tau), dtype=complex
    )
    amp = cmath.exp(complex(np.asarray(factors.time_amplitude(tau), dtype=complex)))
    weights = _quadrature_weights(psi0.grid)
    psi = norm_const * amp * (np.exp(1j * s2 / hbar) @ (weights * psi0.psi))
    return WaveState(grid=psi0.grid, psi=psi, t=t_target, hbar=hbar, mass=mass)


def l2_difference(a: WaveState, b: WaveState) -> float:
    """Trapezoid-weighted L2 distance between two states on one grid."""
    if a.grid != b.grid:
        raise ValueError("states live on different grids")
    dx = a.grid.dx
    dens = np.abs(a.psi - b.psi) ** 2
    return float(np.sqrt(dx * (dens.sum() - 0.5 * (dens[0] + dens[-1]))))
