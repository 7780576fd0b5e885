"""Propagator factors for quadratic potentials V = g2(t) x^2 + g1(t) x + g0(t).

With a space-independent amplitude, R = R(t), the factor pair of
K = exp(R + i S / hbar) closes on the polynomial template

    S(x, t) = f0(t) + f1(t) x - m R'(t) x^2,

and the Schrodinger equation splits into three ordinary differential
equations in time:

    m R''  = 2 m (R')^2 + g2
    f1'    = 2 R' f1 - g1
    f0'    = -g0 - f1^2 / (2 m)

together with the consistency relation d2S/dx2 + 2 m dR/dt = 0, which the
template satisfies identically.  This module integrates that system with
RK4, carries the two closed-form families (free particle and harmonic
oscillator) with their exact R and two-point S, identifies exp(R) with
the Van Vleck determinant, and probes that the construction degrades for
non-quadratic potentials.

Caveat on the driven family: the tan/sec reference solutions used for
verification fix f0 through f0' = -g0 - f1^2/(2m) above.  A variant
f0' = (m/2) f1^2 + g0 circulates for this family but fails direct
substitution into the Hamilton-Jacobi equation, so it is not used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import PropagatorFactors, SpacetimeGrid, rk4_solve

__all__ = [
    "QuadraticPotential",
    "PrefactorSolution",
    "solve_prefactor_odes",
    "free_particle_factors",
    "harmonic_factors",
    "caustic_windows",
    "free_particle_identity_residuals",
    "harmonic_identity_residuals",
    "van_vleck_check",
    "VanVleckReport",
    "quadratic_necessity_probe",
    "NecessityReport",
    "riccati_tan_reference",
]

# |dR/dt| beyond this is treated as a caustic approach and truncates the solve.
BLOW_UP_BOUND = 1.0e6


def _as_time_fn(g) -> Callable[[np.ndarray], np.ndarray]:
    if callable(g):
        return g
    value = float(g)
    return lambda t: value + 0.0 * np.asarray(t, dtype=float)


@dataclass(frozen=True)
class QuadraticPotential:
    """Coefficients of V(x, t) = g2(t) x^2 + g1(t) x + g0(t).

    Each coefficient is a constant or a vectorized callable of t.
    """

    g2: object = 0.0
    g1: object = 0.0
    g0: object = 0.0

    def coefficient_fns(self):
        return _as_time_fn(self.g2), _as_time_fn(self.g1), _as_time_fn(self.g0)

    def value(self, x, t):
        f2, f1, f0 = self.coefficient_fns()
        x = np.asarray(x, dtype=float)
        return f2(t) * x**2 + f1(t) * x + f0(t)


@dataclass(frozen=True)
class PrefactorSolution:
    """Sampled solution of the prefactor ODE system.

    Arrays share the sample times ``t``.  ``dR`` is dR/dt.  When the
    integration hit the blow-up bound the arrays stop there and
    ``blow_up_time`` records the truncation time.
    """

    t: np.ndarray
    R: np.ndarray
    dR: np.ndarray
    f1: np.ndarray
    f0: np.ndarray
    mass: float
    potential: QuadraticPotential
    step: float
    blow_up_time: float | None = None

    def action_on(self, x: np.ndarray) -> np.ndarray:
        """S(x_i, t_k) = f0 + f1 x - m dR x^2, shape (len(x), len(t))."""
        x = np.asarray(x, dtype=float)[:, None]
        return self.f0[None, :] + self.f1[None, :] * x - self.mass * self.dR[None, :] * x**2

    def action_x_derivative(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)[:, None]
        return self.f1[None, :] - 2.0 * self.mass * self.dR[None, :] * x

    def ode_residuals(self) -> dict[str, float]:
        """Max-abs residuals of the three ODEs with stencil time derivatives.

        Central differencing on the recorded series keeps this an
        independent substitution check rather than an echo of the
        right-hand sides the integrator used.
        """
        if len(self.t) < 3:
            raise ValueError("need at least three samples to form residuals")
        h = self.step
        g2, g1, g0 = (fn(self.t[1:-1]) for fn in self.potential.coefficient_fns())
        ddR = (self.dR[2:] - self.dR[:-2]) / (2.0 * h)
        df1 = (self.f1[2:] - self.f1[:-2]) / (2.0 * h)
        df0 = (self.f0[2:] - self.f0[:-2]) / (2.0 * h)
        dR_mid, f1_mid = self.dR[1:-1], self.f1[1:-1]
        m = self.mass
        res_r = m * ddR - 2.0 * m * dR_mid**2 - g2
        res_f1 = df1 + g1 - 2.0 * dR_mid * f1_mid
        res_f0 = 2.0 * m * (df0 + g0) + f1_mid**2
        dR_check = (self.R[2:] - self.R[:-2]) / (2.0 * h) - dR_mid
        return {
            "amplitude": float(np.max(np.abs(res_r))),
            "linear": float(np.max(np.abs(res_f1))),
            "constant": float(np.max(np.abs(res_f0))),
            "dR_consistency": float(np.max(np.abs(dR_check))),
        }


def solve_prefactor_odes(
    potential: QuadraticPotential,
    init: Sequence[float],
    t_window: Sequence[float],
    step: float,
    t0: float | None = None,
    mass: float = 1.0,
    blow_up_bound: float = BLOW_UP_BOUND,
) -> PrefactorSolution:
    """Integrate the prefactor system over t_window = (lo, hi).

    init = (R, dR/dt, f1, f0) holds at the reference time t0, which
    defaults to the window start but may sit strictly inside the window
    (the natural place to match closed forms that are singular at an
    edge).  The solve then sweeps backward to the start and forward to
    the end with the same step, merging both legs on one ascending axis.

    The state derivative is
        R' = u,  u' = 2 u^2 + g2/m,  f1' = 2 u f1 - g1,  f0' = -g0 - f1^2/(2m).
    |u| crossing ``blow_up_bound`` marks a caustic approach: the
    affected leg is truncated there and the truncation time reported
    (the forward one if both legs truncate), never smoothed over.
    """
    lo, hi = map(float, t_window)
    if not hi > lo:
        raise ValueError(f"need an increasing window, got [{lo}, {hi}]")
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if not mass > 0:
        raise ValueError(f"mass must be positive, got {mass}")
    if t0 is None:
        t0 = lo
    if not (lo <= t0 <= hi):
        raise ValueError(f"reference time {t0} lies outside the window [{lo}, {hi}]")
    y_init = [float(v) for v in init]
    g2, g1, g0 = potential.coefficient_fns()

    def deriv(t: float, y: np.ndarray) -> np.ndarray:
        _, u, f1, _ = y
        return np.array(
            [
                u,
                2.0 * u * u + float(g2(t)) / mass,
                2.0 * u * f1 - float(g1(t)),
                -float(g0(t)) - f1 * f1 / (2.0 * mass),
            ]
        )

    def stop(t: float, y: np.ndarray) -> bool:
        return abs(y[1]) > blow_up_bound

    back = forth = None
    if t0 - lo > 0.5 * step:
        n_back = max(1, int(round((t0 - lo) / step)))
        back = rk4_solve(deriv, y_init, t0, -step, n_back, stop=stop)
    if hi - t0 > 0.5 * step:
        n_forth = max(1, int(round((hi - t0) / step)))
        forth = rk4_solve(deriv, y_init, t0, step, n_forth, stop=stop)
    if back is None and forth is None:
        raise ValueError("window shorter than one step on both sides of t0")

    blow_up_time: float | None = None
    parts_t, parts_y = [], []
    if back is not None:
        ts_b, ys_b, stop_b = back
        if stop_b is not None:
            blow_up_time = float(ts_b[stop_b])
        keep = slice(1, None) if forth is not None else slice(None)
        parts_t.append(ts_b[keep][::-1])
        parts_y.append(ys_b[keep][::-1])
    if forth is not None:
        ts_f, ys_f, stop_f = forth
        if stop_f is not None:
            blow_up_time = float(ts_f[stop_f])
        parts_t.append(ts_f)
        parts_y.append(ys_f)
    ts = np.concatenate(parts_t)
    ys = np.concatenate(parts_y)
    return PrefactorSolution(
        t=ts,
        R=ys[:, 0],
        dR=ys[:, 1],
        f1=ys[:, 2],
        f0=ys[:, 3],
        mass=mass,
        potential=potential,
        step=step,
        blow_up_time=blow_up_time,
    )


def riccati_tan_reference(
    t: np.ndarray,
    init: Sequence[float],
    t0: float,
    omega: float,
    g0_const: float = 0.0,
    mass: float = 1.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form prefactor solution for g2 = m omega^2 / 2, g1 = 0, g0 const.

    dR/dt = (omega/2) tan(omega t + c0) and f1 = c1 sec(omega t + c0),
    with c0, c1 fixed by the initial data; R and f0 follow by quadrature:

        R  = R0 - (1/2) ln[ cos(omega t + c0) / cos(omega t0 + c0) ]
        f0 = f00 - g0 (t - t0)
             - (c1^2 / (2 m omega)) [ tan(omega t + c0) - tan(omega t0 + c0) ]

    The free particle (omega -> 0) and the oscillator amplitude
    -(omega/2) cot(omega t) (a phase shift c0 = -pi/2 - omega t0') are
    members of the same family.  Valid only while omega t + c0 stays
    inside one branch of tan.
    """
    t = np.asarray(t, dtype=float)
    r0, u0, f10, f00 = map(float, init)
    c0 = math.atan2(2.0 * u0, omega) - omega * t0
    phase0 = omega * t0 + c0
    phase = omega * t + c0
    if np.any(np.cos(phase) <= 0) or math.cos(phase0) <= 0:
        raise ValueError("reference window crosses a tan branch point")
    c1 = f10 * math.cos(phase0)
    dR = 0.5 * omega * np.tan(phase)
    R = r0 - 0.5 * (np.log(np.cos(phase)) - math.log(math.cos(phase0)))
    f1 = c1 / np.cos(phase)
    f0 = (
        f00
        - g0_const * (t - t0)
        - (c1**2 / (2.0 * mass * omega)) * (np.tan(phase) - math.tan(phase0))
    )
    return R, dR, f1, f0


# ---------------------------------------------------------------------------
# closed-form families
# ---------------------------------------------------------------------------


def caustic_windows(omega: float, t_min: float, t_max: float, half_width: float = 0.05) -> tuple[tuple[float, float], ...]:
    """Exclusion windows covering every zero of sin(omega t) in the span."""
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    period = math.pi / omega
    n_lo = math.floor(t_min / period) - 1
    n_hi = math.ceil(t_max / period) + 1
    windows = []
    for n in range(n_lo, n_hi + 1):
        tc = n * period
        lo, hi = tc - half_width, tc + half_width
        if hi <= t_min or lo >= t_max:
            continue
        windows.append((max(lo, t_min), min(hi, t_max)))
    return tuple(windows)


def _valid_times(grid: SpacetimeGrid) -> np.ndarray:
    t = grid.t[grid.time_mask()]
    if t.size == 0:
        raise ValueError("grid has no valid time nodes")
    return t


def free_particle_factors(
    grid: SpacetimeGrid,
    mass: float = 1.0,
    hbar: float = 1.0,
    x0: float = 0.0,
    r_const: float = 0.0,
) -> PropagatorFactors:
    """Exact factors for V = 0:

        R = -(1/2) ln t + const,   S = m (x - x0)^2 / (2 t).

    Refuses grids whose valid nodes reach t <= 0 (the kernel is singular
    at coincidence; hide t = 0 behind an exclusion window instead).
    """
    t_valid = _valid_times(grid)
    if np.any(t_valid <= 0.0):
        raise ValueError(
            f"free-particle factors need t > 0 at valid nodes; found t={t_valid.min():.6g} "
            "(add an exclusion window)"
        )

    def r_fn(x, t):
        return -0.5 * np.log(t) + r_const + 0.0 * x

    def s_fn(x, t):
        return mass * (x - x0) ** 2 / (2.0 * t)

    return PropagatorFactors(
        R=r_fn,
        S=s_fn,
        hbar=hbar,
        mass=mass,
        two_point_action=lambda x, xa, t: mass * (x - xa) ** 2 / (2.0 * t),
        time_amplitude=lambda t: -0.5 * np.log(t) + r_const,
        label="free-particle",
    )


def harmonic_factors(
    grid: SpacetimeGrid,
    mass: float = 1.0,
    omega: float = 1.0,
    hbar: float = 1.0,
    x0: float = 0.0,
    r_const: float = 0.0,
) -> PropagatorFactors:
    """Exact factors for V = (1/2) m omega^2 x^2:

        R = -(1/2) ln sin(omega t) + const
        S = (m omega / 2) [ (x0^2 + x^2) cot(omega t) - 2 x0 x csc(omega t) ]

    Caustics sit at omega t = n pi; every one inside the grid span must
    be covered by an exclusion window or construction refuses.
    """
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    period = math.pi / omega
    n_lo = math.ceil((grid.t_min - 1e-12) / period)
    n_hi = math.floor((grid.t_max + 1e-12) / period)
    for n in range(n_lo, n_hi + 1):
        tc = n * period
        covered = any(lo < tc < hi for lo, hi in grid.exclusions)
        boundary = abs(tc - grid.t_min) < 1e-12 or abs(tc - grid.t_max) < 1e-12
        if not covered and not boundary:
            raise ValueError(
                f"caustic at t={tc:.6g} (n={n}) is not covered by an exclusion window"
            )
    t_valid = _valid_times(grid)
    if np.any(np.abs(np.sin(omega * t_valid)) < 1.0e-12):
        raise ValueError("a valid time node sits on a caustic; widen the window")

    def sin_c(t):
        return np.sin(omega * np.asarray(t, dtype=float)).astype(complex)

    def r_fn(x, t):
        return -0.5 * np.log(sin_c(t)) + r_const + 0.0 * x

    def s2_fn(x, xa, t):
        s = np.sin(omega * t)
        c = np.cos(omega * t)
        return (mass * omega / 2.0) * ((xa**2 + x**2) * c / s - 2.0 * xa * x / s)

    return PropagatorFactors(
        R=r_fn,
        S=lambda x, t: s2_fn(x, x0, t),
        hbar=hbar,
        mass=mass,
        two_point_action=s2_fn,
        time_amplitude=lambda t: -0.5 * np.log(sin_c(t)) + r_const,
        label="harmonic",
    )


# ---------------------------------------------------------------------------
# analytic identity residuals
# ---------------------------------------------------------------------------


def free_particle_identity_residuals(
    grid: SpacetimeGrid, mass: float = 1.0, x0: float = 0.0
) -> dict[str, float]:
    """Hamilton-Jacobi and consistency residuals from analytic derivatives.

    HJ:  dS/dt + (dS/dx)^2 / (2m) + V = 0  with V = 0.
    Consistency:  d2S/dx2 + 2 m dR/dt = 0.
    """
    x = grid.x[:, None]
    t = _valid_times(grid)[None, :]
    s_t = -mass * (x - x0) ** 2 / (2.0 * t**2)
    s_x = mass * (x - x0) / t
    hj = s_t + s_x**2 / (2.0 * mass)
    s_xx = mass / t
    dr_dt = -0.5 / t
    consistency = s_xx + 2.0 * mass * dr_dt
    return {
        "hamilton_jacobi": float(np.max(np.abs(hj))),
        "consistency": float(np.max(np.abs(consistency))),
    }


def harmonic_identity_residuals(
    grid: SpacetimeGrid, mass: float = 1.0, omega: float = 1.0, x0: float = 0.0
) -> dict[str, float]:
    """Analytic-derivative residuals for the oscillator family."""
    x = grid.x[:, None]
    t = _valid_times(grid)[None, :]
    s, c = np.sin(omega * t), np.cos(omega * t)
    csc = 1.0 / s
    cot = c / s
    s_t = (mass * omega**2 / 2.0) * (2.0 * x0 * x * csc * cot - (x0**2 + x**2) * csc**2)
    s_x = mass * omega * (x * cot - x0 * csc)
    v = 0.5 * mass * omega**2 * x**2
    hj = s_t + s_x**2 / (2.0 * mass) + v
    s_xx = mass * omega * cot
    dr_dt = -0.5 * omega * cot
    consistency = s_xx + 2.0 * mass * dr_dt
    return {
        "hamilton_jacobi": float(np.max(np.abs(hj))),
        "consistency": float(np.max(np.abs(consistency))),
    }


# ---------------------------------------------------------------------------
# Van Vleck identification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VanVleckReport:
    deviation: float
    constant: complex
    n_nodes: int


def van_vleck_check(
    factors: PropagatorFactors,
    grid: SpacetimeGrid,
    x0_grid: Sequence[float],
) -> VanVleckReport:
    """Deviation of exp(R) / sqrt(D_VV) from a fitted constant.

    D_VV = -d2S/(dx dx0) is formed by mixed central finite differences of
    the two-point action.  For a genuine Van Vleck pair the prefactor is
    proportional to sqrt(D_VV), so the ratio above is time-independent;
    the report carries the max relative deviation from the fitted
    constant over all (x, x0, t) nodes.

    A real D_VV that is not positive at some node means the determinant
    has changed signature there; the node is reported and the check
    refuses rather than continuing onto another square-root branch.
    """
    if factors.two_point_action is None or factors.time_amplitude is None:
        raise ValueError(
            "van_vleck_check needs closed-form factors with a two-point action"
        )
    x0_grid = np.asarray(x0_grid, dtype=float)
    x = grid.x[:, None, None]
    xa = x0_grid[None, :, None]
    t = _valid_times(grid)[None, None, :]
    h = grid.dx
    k = float(x0_grid[1] - x0_grid[0]) if x0_grid.size > 1 else grid.dx
    s2 = factors.two_point_action
    mixed = (
        s2(x + h, xa + k, t)
        - s2(x + h, xa - k, t)
        - s2(x - h, xa + k, t)
        + s2(x - h, xa - k, t)
    ) / (4.0 * h * k)
    d_vv = np.asarray(-mixed, dtype=complex)
    d_vv = np.broadcast_to(d_vv, np.broadcast_shapes(mixed.shape, t.shape))
    scale = float(np.max(np.abs(d_vv)))
    if np.max(np.abs(d_vv.imag)) <= 1.0e-9 * max(scale, 1.0e-300):
        bad = d_vv.real <= 0.0
        if np.any(bad):
            i, j, n = (int(v[0]) for v in np.nonzero(bad))
            t_flat = np.broadcast_to(t, d_vv.shape)
            raise ValueError(
                "Van Vleck signature breakdown: D_VV = "
                f"{d_vv.real[i, j, n]:.6g} <= 0 at x={grid.x[i]:.6g}, "
                f"x0={x0_grid[j]:.6g}, t={t_flat[i, j, n]:.6g}"
            )
    if np.any(np.abs(d_vv) < 1.0e-300):
        raise ValueError("degenerate Van Vleck determinant (zero mixed derivative)")
    amp = np.exp(np.asarray(factors.time_amplitude(t), dtype=complex))
    ratio = np.broadcast_to(amp / np.sqrt(d_vv), mixed.shape)
    constant = complex(ratio.mean())
    if abs(constant) < 1.0e-300:
        raise ValueError("fitted Van Vleck constant is zero")
    deviation = float(np.max(np.abs(ratio - constant)) / abs(constant))
    return VanVleckReport(deviation=deviation, constant=constant, n_nodes=ratio.size)


# ---------------------------------------------------------------------------
# necessity probe
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NecessityReport:
    residual_norm: float
    fit_residual: float
    coefficients: np.ndarray = field(repr=False)
    blow_up_time: float | None = None


def quadratic_necessity_probe(
    potential_fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    grid: SpacetimeGrid,
    mass: float = 1.0,
    init: Sequence[float] = (0.0, 0.0, 1.0, 0.0),
    step: float = 5.0e-5,
) -> NecessityReport:
    """Hamilton-Jacobi residual of the quadratic template against a general V.

    V(x, t) is least-squares fitted by g2 x^2 + g1 x + g0 on each time
    slice, the prefactor system is integrated for the fitted
    coefficients, and the residual dS/dt + (dS/dx)^2/(2m) + V is formed
    with stencil time derivatives of the integrated series.  The norm is
    ~0 exactly when V is quadratic in x; the non-quadratic remainder
    survives in the residual otherwise.
    """
    x = grid.x
    t_nodes = grid.t
    vandermonde = np.stack([np.ones_like(x), x, x**2], axis=1)
    v_slices = np.asarray(potential_fn(x[:, None], t_nodes[None, :]), dtype=float)
    v_slices = np.broadcast_to(v_slices, (grid.n_x, grid.n_t))
    coeffs, _, _, _ = np.linalg.lstsq(vandermonde, v_slices, rcond=None)
    g0_n, g1_n, g2_n = coeffs  # per time node
    fit_residual = float(np.max(np.abs(v_slices - vandermonde @ coeffs)))

    def interp(series):
        return lambda t: np.interp(t, t_nodes, series)

    potential = QuadraticPotential(g2=interp(g2_n), g1=interp(g1_n), g0=interp(g0_n))
    sol = solve_prefactor_odes(potential, init, (grid.t_min, grid.t_max), step, mass=mass)

    # interior stencil derivatives of the integrated series; the 5-point
    # form keeps the differencing error below the 1e-8 scale the probe
    # must resolve for genuinely quadratic potentials
    h = sol.step
    tm = sol.t[2:-2]

    def d_dt(y):
        return (-y[4:] + 8.0 * y[3:-1] - 8.0 * y[1:-3] + y[:-4]) / (12.0 * h)

    d_dR, d_f1, d_f0 = d_dt(sol.dR), d_dt(sol.f1), d_dt(sol.f0)
    xs = x[:, None]
    s_t = d_f0[None, :] + d_f1[None, :] * xs - mass * d_dR[None, :] * xs**2
    s_x = sol.f1[None, 2:-2] - 2.0 * mass * sol.dR[None, 2:-2] * xs
    v_mid = np.asarray(potential_fn(xs, tm[None, :]), dtype=float)
    residual = s_t + s_x**2 / (2.0 * mass) + v_mid
    return NecessityReport(
        residual_norm=float(np.max(np.abs(residual))),
        fit_residual=fit_residual,
        coefficients=coeffs,
        blow_up_time=sol.blow_up_time,
    )
