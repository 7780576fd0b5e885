"""Homogeneous isotropic cosmology: constraint checks and split-action residuals.

Two operator normalizations coexist here and are deliberately never
converted into each other.  The constraint sector (hamiltonian_constraint,
evolve_classical, friedmann_residual, quantum_transport_residual) carries
the 2*pi/(3a) gravitational kinetic factor and matter kinetic term
p_phi^2/(2 a^3).  The split-action sector (complex_action_residuals,
closure_check, scale_factor_equation_residual) separates the action into
S_a(a, t) + S_phi(phi, t) + i S_g(a, t), uses a plain d^2/da^2 kinetic
normalization, and scales matter by 1/(16 pi a^3).  Each identity is
checked in its own convention.

Momentum map: p_a = -(3/(4 pi)) a adot and p_phi = a^3 phidot.  The p_a
constant and sign are forced by requiring the vanishing constraint to
reproduce the Friedmann equation (adot/a)^2 + k/a^2 = (8 pi/3)(phidot^2/2
+ V) + Lambda/3 with lapse fixed to one.

The closure residual squares a second derivative of S_g.  That is odd
dimensionally, but the expression is checked literally; this module never
repairs it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import rk4_solve, fit_loglog_slope

__all__ = [
    "ScalarPotential",
    "ZERO_POTENTIAL",
    "quadratic_potential",
    "CosmoParams",
    "CosmoState",
    "ClassicalState",
    "Trajectory",
    "ComplexActionFields",
    "ActionGrids",
    "EntropyScalingReport",
    "hamiltonian_constraint",
    "momentum_state",
    "matched_a_dot",
    "evolve_classical",
    "friedmann_residual",
    "klein_gordon_residual",
    "complex_action_residuals",
    "closure_check",
    "scale_factor_equation_residual",
    "entropy_scaling_probe",
    "quantum_transport_residual",
    "COLLAPSE_FRACTION",
    "FRIEDMANN_PRECHECK_TOL",
    "CONSTRAINT_DRIFT_TOL",
]

COLLAPSE_FRACTION = 1.0e-6
FRIEDMANN_PRECHECK_TOL = 1.0e-10
CONSTRAINT_DRIFT_TOL = 1.0e-8

_PI = math.pi


@dataclass(frozen=True)
class ScalarPotential:
    """Pointwise potential V(phi) with its derivative.

    Both callables must accept numpy arrays and broadcast.
    """

    v: callable
    dv: callable
    label: str = ""


ZERO_POTENTIAL = ScalarPotential(
    v=lambda phi: 0.0 * np.asarray(phi, dtype=float),
    dv=lambda phi: 0.0 * np.asarray(phi, dtype=float),
    label="zero",
)


def quadratic_potential(m_squared: float) -> ScalarPotential:
    m2 = float(m_squared)
    return ScalarPotential(
        v=lambda phi: 0.5 * m2 * np.asarray(phi, dtype=float) ** 2,
        dv=lambda phi: m2 * np.asarray(phi, dtype=float),
        label=f"quadratic(m2={m2})",
    )


@dataclass(frozen=True)
class CosmoParams:
    """Curvature, cosmological constant, matter potential, hbar.

    gravity_sign = -1 flips the gravitational kinetic term inside
    hamiltonian_constraint only, for exploring the opposite signature
    convention.  The classical evolution routines always use the printed
    sign; no claim is made about which choice is physical.
    """

    k: int = 0
    lam: float = 0.0
    potential: ScalarPotential = ZERO_POTENTIAL
    hbar: float = 1.0
    gravity_sign: int = 1

    def __post_init__(self) -> None:
        if self.k not in (-1, 0, 1):
            raise ValueError(f"curvature k must be -1, 0, or 1, got {self.k}")
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        if self.gravity_sign not in (-1, 1):
            raise ValueError(f"gravity_sign must be -1 or +1, got {self.gravity_sign}")
        if not callable(self.potential.v) or not callable(self.potential.dv):
            raise ValueError("potential needs callable v and dv")


@dataclass(frozen=True)
class CosmoState:
    """Phase-space point (a, p_a, phi, p_phi) at time t."""

    a: float
    p_a: float
    phi: float
    p_phi: float
    t: float = 0.0

    def __post_init__(self) -> None:
        vals = (self.a, self.p_a, self.phi, self.p_phi, self.t)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("state contains non-finite entries")
        if not self.a > 0:
            raise ValueError(f"scale factor must be positive, got {self.a}")


@dataclass(frozen=True)
class ClassicalState:
    """Velocity parameterization (a, adot, phi, phidot) at time t."""

    a: float
    a_dot: float
    phi: float
    phi_dot: float
    t: float = 0.0

    def __post_init__(self) -> None:
        vals = (self.a, self.a_dot, self.phi, self.phi_dot, self.t)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("state contains non-finite entries")
        if not self.a > 0:
            raise ValueError(f"scale factor must be positive, got {self.a}")


def momentum_state(state: ClassicalState) -> CosmoState:
    """Map velocities to momenta: p_a = -(3/(4 pi)) a adot, p_phi = a^3 phidot."""
    return CosmoState(
        a=state.a,
        p_a=-(3.0 / (4.0 * _PI)) * state.a * state.a_dot,
        phi=state.phi,
        p_phi=state.a**3 * state.phi_dot,
        t=state.t,
    )


def hamiltonian_constraint(state: CosmoState, params: CosmoParams) -> float:
    """-(2 pi/(3a)) p_a^2 - (3k/(8 pi)) a + (Lambda/(8 pi)) a^3
    + p_phi^2/(2 a^3) + a^3 V(phi), with the kinetic sign optionally flipped."""
    a = state.a
    if not a > 0:
        raise ValueError(f"scale factor must be positive, got {a}")
    kinetic = params.gravity_sign * (-(2.0 * _PI / (3.0 * a)) * state.p_a**2)
    return float(
        kinetic
        - (3.0 * params.k / (8.0 * _PI)) * a
        + (params.lam / (8.0 * _PI)) * a**3
        + state.p_phi**2 / (2.0 * a**3)
        + a**3 * float(np.asarray(params.potential.v(state.phi)))
    )


@dataclass(frozen=True)
class Trajectory:
    """Dense classical history; the recorded fields default to None so
    hand-built trajectories for negative controls stay cheap."""

    t: np.ndarray
    a: np.ndarray
    a_dot: np.ndarray
    phi: np.ndarray
    phi_dot: np.ndarray
    collapse_time: float | None = None
    friedmann: np.ndarray | None = None
    constraint_rel: np.ndarray | None = None
    drift_flagged: bool = False


def _friedmann_series(a, a_dot, phi, phi_dot, params) -> np.ndarray:
    v = np.asarray(params.potential.v(phi), dtype=float)
    return (
        (a_dot / a) ** 2
        + params.k / a**2
        - (8.0 * _PI / 3.0) * (0.5 * phi_dot**2 + v)
        - params.lam / 3.0
    )


def _constraint_rel_series(a, a_dot, phi, phi_dot, params) -> np.ndarray:
    """|constraint in momentum variables| over the largest single term."""
    p_a = -(3.0 / (4.0 * _PI)) * a * a_dot
    p_phi = a**3 * phi_dot
    v = np.asarray(params.potential.v(phi), dtype=float)
    terms = np.stack(
        [
            -(2.0 * _PI / (3.0 * a)) * p_a**2,
            -(3.0 * params.k / (8.0 * _PI)) * a,
            (params.lam / (8.0 * _PI)) * a**3,
            p_phi**2 / (2.0 * a**3),
            a**3 * v,
        ]
    )
    total = np.abs(terms.sum(axis=0))
    scale = np.max(np.abs(terms), axis=0)
    return np.where(scale > 0.0, total / np.where(scale > 0.0, scale, 1.0), 0.0)


def matched_a_dot(
    a: float, phi: float, phi_dot: float, params: CosmoParams, expanding: bool = True
) -> float:
    """Expansion rate satisfying the Friedmann equation for the given data."""
    v = float(np.asarray(params.potential.v(phi)))
    rhs = (
        (8.0 * _PI / 3.0) * (0.5 * phi_dot**2 + v)
        + params.lam / 3.0
        - params.k / a**2
    )
    if rhs < 0.0:
        raise ValueError(
            f"no real expansion rate: Friedmann right side is {rhs:.3e} < 0"
        )
    return (1.0 if expanding else -1.0) * a * math.sqrt(rhs)


def evolve_classical(
    state0: ClassicalState,
    params: CosmoParams,
    t_window: tuple[float, float],
    step: float,
) -> Trajectory:
    """RK4 integration of the coupled scale-factor and matter equations.

        addot = (-adot^2 - k + Lambda a^2 - 4 pi a^2 phidot^2
                 + 8 pi a^2 V) / (2a)
        phiddot = -3 (adot/a) phidot - V'(phi)

    The acceleration comes from the constraint-consistent second-order
    form; on the constraint surface it equals the Raychaudhuri form.
    Initial data must satisfy the Friedmann equation or the call refuses.
    Collapse (a at or below COLLAPSE_FRACTION of the initial value, or a
    non-finite state) truncates the trajectory and records the time.
    """
    lo, hi = float(t_window[0]), float(t_window[1])
    if not hi > lo:
        raise ValueError(f"need an increasing window, got ({lo}, {hi})")
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    if abs(lo - state0.t) > 1e-12:
        raise ValueError(
            f"window starts at {lo} but the state sits at t={state0.t}"
        )
    fried0 = float(
        _friedmann_series(
            np.asarray(state0.a),
            np.asarray(state0.a_dot),
            np.asarray(state0.phi),
            np.asarray(state0.phi_dot),
            params,
        )
    )
    if abs(fried0) > FRIEDMANN_PRECHECK_TOL:
        raise ValueError(
            "initial data violates the Friedmann constraint: residual "
            f"{fried0:.3e} exceeds {FRIEDMANN_PRECHECK_TOL:.0e}"
        )
    n_steps = int(round((hi - lo) / step))
    if n_steps < 1:
        raise ValueError("window shorter than one step")

    k, lam = params.k, params.lam
    v_fn, dv_fn = params.potential.v, params.potential.dv
    a_floor = COLLAPSE_FRACTION * state0.a

    def deriv(t, y):
        a, a_dot, phi, phi_dot = y
        v = float(np.asarray(v_fn(phi)))
        dv = float(np.asarray(dv_fn(phi)))
        a_ddot = (
            -(a_dot**2) - k + lam * a**2
            - 4.0 * _PI * a**2 * phi_dot**2
            + 8.0 * _PI * a**2 * v
        ) / (2.0 * a)
        phi_ddot = -3.0 * (a_dot / a) * phi_dot - dv
        return np.array([a_dot, a_ddot, phi_dot, phi_ddot])

    ts, ys, stopped = rk4_solve(
        deriv,
        (state0.a, state0.a_dot, state0.phi, state0.phi_dot),
        lo,
        step,
        n_steps,
        stop=lambda t, y: y[0] <= a_floor,
    )
    collapse_time = None
    if stopped is not None:
        collapse_time = float(ts[-1])
        ts, ys = ts[:-1], ys[:-1]
    a, a_dot, phi, phi_dot = ys.T
    fried = _friedmann_series(a, a_dot, phi, phi_dot, params)
    rel = _constraint_rel_series(a, a_dot, phi, phi_dot, params)
    return Trajectory(
        t=ts,
        a=a,
        a_dot=a_dot,
        phi=phi,
        phi_dot=phi_dot,
        collapse_time=collapse_time,
        friedmann=fried,
        constraint_rel=rel,
        drift_flagged=bool(np.max(rel) > CONSTRAINT_DRIFT_TOL),
    )


def friedmann_residual(trajectory: Trajectory, params: CosmoParams) -> np.ndarray:
    """(adot/a)^2 + k/a^2 - (8 pi/3)(phidot^2/2 + V) - Lambda/3 per sample."""
    t = np.asarray(trajectory.t, dtype=float)
    if t.size == 0:
        raise ValueError("empty trajectory")
    return _friedmann_series(
        np.asarray(trajectory.a, dtype=float),
        np.asarray(trajectory.a_dot, dtype=float),
        np.asarray(trajectory.phi, dtype=float),
        np.asarray(trajectory.phi_dot, dtype=float),
        params,
    )


def klein_gordon_residual(trajectory: Trajectory, params: CosmoParams) -> np.ndarray:
    """phiddot + 3 (adot/a) phidot + V'(phi) with phiddot by stencil."""
    t = np.asarray(trajectory.t, dtype=float)
    if t.size < 3:
        raise ValueError("need at least three samples for the stencil")
    phi_dot = np.asarray(trajectory.phi_dot, dtype=float)
    phi_ddot = np.gradient(phi_dot, t, edge_order=2)
    a = np.asarray(trajectory.a, dtype=float)
    a_dot = np.asarray(trajectory.a_dot, dtype=float)
    dv = np.asarray(params.potential.dv(trajectory.phi), dtype=float)
    return phi_ddot + 3.0 * (a_dot / a) * phi_dot + dv


# ---------------------------------------------------------------------------
# split-action system
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ActionGrids:
    """Strictly increasing sample axes; the a axis must stay positive."""

    a: np.ndarray
    phi: np.ndarray
    t: np.ndarray

    def __post_init__(self) -> None:
        for name in ("a", "phi", "t"):
            axis = np.asarray(getattr(self, name), dtype=float)
            if axis.ndim != 1 or axis.size < 4:
                raise ValueError(f"{name} axis needs at least 4 samples")
            if not np.all(np.isfinite(axis)):
                raise ValueError(f"{name} axis contains non-finite samples")
            if not np.all(np.diff(axis) > 0):
                raise ValueError(f"{name} axis must be strictly increasing")
            object.__setattr__(self, name, axis)
        if not np.all(self.a > 0):
            raise ValueError("scale-factor axis must be positive")


@dataclass(frozen=True)
class ComplexActionFields:
    """S_a(a, t), S_phi(phi, t), S_g(a, t): callables of the two axes,
    or arrays already sampled on the matching product grid."""

    s_a: object
    s_phi: object
    s_g: object
    label: str = ""


def _sampled(field, u: np.ndarray, t: np.ndarray, name: str) -> np.ndarray:
    if callable(field):
        uu, tt = np.meshgrid(u, t, indexing="ij")
        vals = np.broadcast_to(
            np.asarray(field(uu, tt), dtype=float), (u.size, t.size)
        ).copy()
    else:
        vals = np.asarray(field, dtype=float)
        if vals.shape != (u.size, t.size):
            raise ValueError(
                f"{name} has shape {vals.shape}, grid expects {(u.size, t.size)}"
            )
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"{name} contains non-finite samples")
    return vals


def complex_action_residuals(
    fields: ComplexActionFields, params: CosmoParams, grids: ActionGrids
) -> tuple[np.ndarray, np.ndarray]:
    """Residuals of the split-action system.

    A (on the a x phi x t product grid):
        dS_phi/dt + (dS_phi/dphi)^2/(16 pi a^3) + 8 pi a^3 V
        + dS_a/dt + (dS_a/da)^2 + (Lambda/3) a^2 - k - (dS_g/da)^2
    B (on the a x t grid):
        dS_g/dt + 16 (dS_a/da)(dS_g/da)

    Derivatives are second-order stencils, so polynomial hand cases are
    exact to round-off.
    """
    a, phi, t = grids.a, grids.phi, grids.t
    s_a = _sampled(fields.s_a, a, t, "S_a")
    s_p = _sampled(fields.s_phi, phi, t, "S_phi")
    s_g = _sampled(fields.s_g, a, t, "S_g")
    sa_t = np.gradient(s_a, t, axis=1, edge_order=2)
    sa_a = np.gradient(s_a, a, axis=0, edge_order=2)
    sp_t = np.gradient(s_p, t, axis=1, edge_order=2)
    sp_p = np.gradient(s_p, phi, axis=0, edge_order=2)
    sg_t = np.gradient(s_g, t, axis=1, edge_order=2)
    sg_a = np.gradient(s_g, a, axis=0, edge_order=2)

    a_col = a[:, None, None]
    v_row = np.asarray(params.potential.v(phi), dtype=float)[None, :, None]
    res_a = (
        sp_t[None, :, :]
        + sp_p[None, :, :] ** 2 / (16.0 * _PI * a_col**3)
        + 8.0 * _PI * a_col**3 * v_row
        + sa_t[:, None, :]
        + sa_a[:, None, :] ** 2
        + (params.lam / 3.0) * a_col**2
        - params.k
        - sg_a[:, None, :] ** 2
    )
    res_b = sg_t + 16.0 * sa_a * sg_a
    return res_a, res_b


def closure_check(fields: ComplexActionFields, grids: ActionGrids) -> np.ndarray:
    """(d2S_g/da2)^2 - S_g/(4a) - (dS_a/dt + dS_phi/dt) on the product grid."""
    a, phi, t = grids.a, grids.phi, grids.t
    s_a = _sampled(fields.s_a, a, t, "S_a")
    s_p = _sampled(fields.s_phi, phi, t, "S_phi")
    s_g = _sampled(fields.s_g, a, t, "S_g")
    sg_aa = np.gradient(
        np.gradient(s_g, a, axis=0, edge_order=2), a, axis=0, edge_order=2
    )
    sa_t = np.gradient(s_a, t, axis=1, edge_order=2)
    sp_t = np.gradient(s_p, t, axis=1, edge_order=2)
    a_col = grids.a[:, None, None]
    return (
        sg_aa[:, None, :] ** 2
        - s_g[:, None, :] / (4.0 * a_col)
        - sa_t[:, None, :]
        - sp_t[None, :, :]
    )


def scale_factor_equation_residual(
    trajectory: Trajectory, p_phi_series, params: CosmoParams
) -> np.ndarray:
    """2 a addot + adot^2 + k - Lambda a^2 - (p_phi^2/(16 pi a^3) + 8 pi a^3 V).

    addot comes from a stencil on the recorded adot, so the residual on an
    integrated trajectory carries an O(step^2) stencil floor.  p_phi is
    supplied by the caller because this sector's matter normalization
    differs from the momentum map of the constraint sector.
    """
    t = np.asarray(trajectory.t, dtype=float)
    if t.size < 3:
        raise ValueError("need at least three samples for the stencil")
    a = np.asarray(trajectory.a, dtype=float)
    a_dot = np.asarray(trajectory.a_dot, dtype=float)
    a_ddot = np.gradient(a_dot, t, edge_order=2)
    p_phi = np.broadcast_to(np.asarray(p_phi_series, dtype=float), a.shape)
    v = np.asarray(params.potential.v(trajectory.phi), dtype=float)
    return (
        2.0 * a * a_ddot
        + a_dot**2
        + params.k
        - params.lam * a**2
        - (p_phi**2 / (16.0 * _PI * a**3) + 8.0 * _PI * a**3 * v)
    )


@dataclass(frozen=True)
class EntropyScalingReport:
    """Fitted log-log exponent of S_g against a, next to the quadratic
    expectation.  Diagnostic only; nothing is asserted."""

    exponent: float
    deviation_from_square: float
    used_absolute: bool
    n_nonpositive: int


def entropy_scaling_probe(a_samples, s_g_samples) -> EntropyScalingReport:
    """Log-log fit of S_g(a) over at least one decade in a.

    Non-positive S_g samples switch the fit to |S_g| and are counted in
    the report; an exact zero leaves the logarithm undefined and refuses.
    """
    a = np.asarray(a_samples, dtype=float)
    s = np.asarray(s_g_samples, dtype=float)
    if a.ndim != 1 or a.shape != s.shape or a.size < 3:
        raise ValueError("need matching 1-d sample arrays, at least 3 points")
    if not np.all(a > 0) or not np.all(np.diff(a) > 0):
        raise ValueError("a samples must be positive and increasing")
    if a[-1] / a[0] < 10.0:
        raise ValueError(
            f"need at least one decade in a, got span factor {a[-1] / a[0]:.3g}"
        )
    if np.any(s == 0.0):
        raise ValueError("S_g vanishes at a sample; log-log fit undefined")
    n_nonpos = int(np.count_nonzero(s < 0.0))
    slope = fit_loglog_slope(a, np.abs(s))
    return EntropyScalingReport(
        exponent=slope,
        deviation_from_square=slope - 2.0,
        used_absolute=n_nonpos > 0,
        n_nonpositive=n_nonpos,
    )


def _sampled3(field, a, phi, t, name) -> np.ndarray:
    if callable(field):
        aa, pp, tt = np.meshgrid(a, phi, t, indexing="ij")
        vals = np.broadcast_to(
            np.asarray(field(aa, pp, tt), dtype=float),
            (a.size, phi.size, t.size),
        ).copy()
    else:
        vals = np.asarray(field, dtype=float)
        if vals.shape != (a.size, phi.size, t.size):
            raise ValueError(
                f"{name} has shape {vals.shape}, grid expects "
                f"{(a.size, phi.size, t.size)}"
            )
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"{name} contains non-finite samples")
    return vals


def quantum_transport_residual(
    R, S, grids: ActionGrids, params: CosmoParams
) -> np.ndarray:
    """Residual of the amplitude transport equation in the constraint sector:

        dR/dt + (4 pi/(3a))(dS/da)(dR/da) + (1/a^3)(dS/dphi)(dR/dphi)
        + (2 pi/(3a)) d2S/da2 + (1/(2 a^3)) d2S/dphi2

    for caller-supplied R(a, phi, t) and S(a, phi, t).  Evaluation only;
    no solutions are constructed here.
    """
    a, phi, t = grids.a, grids.phi, grids.t
    r = _sampled3(R, a, phi, t, "R")
    s = _sampled3(S, a, phi, t, "S")
    r_t = np.gradient(r, t, axis=2, edge_order=2)
    r_a = np.gradient(r, a, axis=0, edge_order=2)
    r_p = np.gradient(r, phi, axis=1, edge_order=2)
    s_a = np.gradient(s, a, axis=0, edge_order=2)
    s_p = np.gradient(s, phi, axis=1, edge_order=2)
    s_aa = np.gradient(s_a, a, axis=0, edge_order=2)
    s_pp = np.gradient(s_p, phi, axis=1, edge_order=2)
    a_col = a[:, None, None]
    return (
        r_t
        + (4.0 * _PI / (3.0 * a_col)) * s_a * r_a
        + s_p * r_p / a_col**3
        + (2.0 * _PI / (3.0 * a_col)) * s_aa
        + s_pp / (2.0 * a_col**3)
    )
