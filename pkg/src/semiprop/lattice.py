"""Lattice functional Hamilton-Jacobi checks on periodic hypercubic grids.

Fields live on a periodic lattice with every dimension at least two sites
wide.  The quadratic action S[phi] = (1/2) sum_xy phi(x) G(x,y) phi(y) vol^2
is built from the Green's function of the discretized (d'Alembert + m^2)
operator, and the functional derivative convention throughout is
(1 / cell volume) * (partial / partial site value), so continuum formulas
hold on the lattice with no extra volume factors.

Sign conventions: the euclidean operator is -laplacian + m^2 (positive
definite for m > 0), and the lorentzian operator treats dimension 0 as time,
-D_t^2 + laplacian_spatial + m^2.  Lorentzian operators can be exactly
singular on-shell; inversion then refuses with the null mode, unless the
i*epsilon prescription (epsilon = 1e-3 m^2) is requested.

Everything is dense and capped at 4096 sites.  These are verification
probes, not production field solvers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

__all__ = [
    "LatticeConfig",
    "LatticeField",
    "QuadraticFunctional",
    "KleinGordonRun",
    "PointwiseFunction",
    "constant_function",
    "lattice_operator",
    "lattice_greens_function",
    "functional_hj_residual",
    "lattice_klein_gordon_check",
    "lattice_plane_wave",
    "conformal_transport_check",
    "analytic_conformal_derivative",
    "conformal_real_part_residual",
    "conformal_imaginary_part_residual",
]

MAX_SITES = 4096
SIGNATURES = ("euclidean", "lorentzian")

# exp(x) overflows float64 just above x = 709
_EXP_OVERFLOW = 700.0


@dataclass(frozen=True)
class LatticeConfig:
    """Shape and physics of a periodic hypercubic lattice.

    ``dims`` lists the site counts per dimension, ``spacing`` is the common
    lattice constant, and ``signature`` selects whether dimension 0 is time.
    ``mass`` may be zero (free evolution); operations that need positive
    definiteness refuse the massless case themselves.
    """

    dims: Tuple[int, ...]
    spacing: float = 1.0
    signature: str = "euclidean"
    mass: float = 1.0

    def __post_init__(self) -> None:
        dims = tuple(int(n) for n in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) == 0:
            raise ValueError("lattice needs at least one dimension")
        if any(n < 2 for n in dims):
            raise ValueError(
                "every lattice dimension needs at least 2 sites, got {}".format(dims)
            )
        if self.n_sites > MAX_SITES:
            raise ValueError(
                "lattice has {} sites; dense operators are capped at {}".format(
                    self.n_sites, MAX_SITES
                )
            )
        if not (np.isfinite(self.spacing) and self.spacing > 0):
            raise ValueError("spacing must be a positive real number")
        if self.signature not in SIGNATURES:
            raise ValueError(
                "signature must be one of {}, got {!r}".format(
                    SIGNATURES, self.signature
                )
            )
        if not (np.isfinite(self.mass) and self.mass >= 0):
            raise ValueError("mass must be a nonnegative real number")

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.dims))

    @property
    def cell_volume(self) -> float:
        return float(self.spacing ** len(self.dims))

    def axis_signs(self) -> np.ndarray:
        """Metric sign of each (forward-difference) gradient square."""
        signs = np.ones(len(self.dims))
        if self.signature == "lorentzian":
            signs[0] = -1.0
        return signs


@dataclass(frozen=True)
class LatticeField:
    """Per-site values on a lattice, shaped like ``config.dims``."""

    config: LatticeConfig
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        if values.shape != self.config.dims:
            raise ValueError(
                "field has shape {}, lattice expects {}".format(
                    values.shape, self.config.dims
                )
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite samples")
        object.__setattr__(self, "values", values)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


@dataclass(frozen=True)
class QuadraticFunctional:
    """Green's-function kernel of a quadratic lattice action.

    ``g`` is the dense symmetric kernel, ``regulator`` records the i*epsilon
    shift baked into the inverted operator (zero when none was applied).
    """

    g: np.ndarray
    config: LatticeConfig
    regulator: float = 0.0

    def __post_init__(self) -> None:
        g = np.asarray(self.g)
        n = self.config.n_sites
        if g.shape != (n, n):
            raise ValueError(
                "kernel has shape {}, lattice with {} sites expects {}".format(
                    g.shape, n, (n, n)
                )
            )
        asym = np.max(np.abs(g - g.T))
        scale = max(1.0, float(np.max(np.abs(g))))
        if asym > 1e-12 * scale:
            raise ValueError(
                "kernel is not symmetric: max |G - G^T| = {:.3e}".format(asym)
            )
        object.__setattr__(self, "g", g)


def _second_difference(n: int, spacing: float) -> np.ndarray:
    """Periodic 1-d second-difference matrix (eigenvalues <= 0)."""
    d = np.zeros((n, n))
    for i in range(n):
        d[i, i] = -2.0
        d[i, (i + 1) % n] += 1.0
        d[i, (i - 1) % n] += 1.0
    return d / spacing**2


def lattice_operator(config: LatticeConfig, regulator: float = 0.0) -> np.ndarray:
    """Dense matrix of the discretized wave operator plus m^2.

    Euclidean signature gives -laplacian + m^2; lorentzian flips the sign
    of every spatial block: -D_t^2 + laplacian_spatial + m^2.  A nonzero
    ``regulator`` adds i*regulator to the diagonal and makes the result
    complex.
    """
    dims = config.dims
    n = config.n_sites
    op = config.mass**2 * np.eye(n)
    for axis, n_axis in enumerate(dims):
        if config.signature == "lorentzian" and axis > 0:
            sign = 1.0
        else:
            sign = -1.0
        blocks = [np.eye(m) for m in dims]
        blocks[axis] = sign * _second_difference(n_axis, config.spacing)
        op = op + reduce(np.kron, blocks)
    if regulator != 0.0:
        op = op + 1j * regulator * np.eye(n)
    return op


def _dominant_mode(vector: np.ndarray, dims: Tuple[int, ...]) -> Tuple[int, ...]:
    spectrum = np.abs(np.fft.fftn(vector.reshape(dims)))
    return tuple(int(i) for i in np.unravel_index(np.argmax(spectrum), dims))


def lattice_greens_function(
    config: LatticeConfig, use_regulator: bool = False
) -> QuadraticFunctional:
    """Invert the lattice operator into a quadratic-action kernel.

    The euclidean operator is positive definite for m > 0 and is inverted
    directly.  The lorentzian operator is inverted through its spectrum so
    that exact null modes are caught; those refuse with the offending
    wavenumber unless ``use_regulator`` asks for the i*epsilon prescription
    with epsilon = 1e-3 m^2.  The defining property op @ G = identity is
    verified to 1e-8 before the kernel is returned.
    """
    if use_regulator and config.signature != "lorentzian":
        raise ValueError("the i*epsilon regulator applies to the lorentzian signature only")

    n = config.n_sites
    if config.signature == "euclidean":
        if config.mass == 0:
            raise ValueError(
                "euclidean operator needs m > 0: the constant mode is null at m = 0"
            )
        operator = lattice_operator(config)
        g = np.linalg.solve(operator, np.eye(n))
        regulator = 0.0
    else:
        operator = lattice_operator(config)
        eigenvalues, eigenvectors = np.linalg.eigh(operator)
        scale = float(np.max(np.abs(eigenvalues)))
        smallest = int(np.argmin(np.abs(eigenvalues)))
        if use_regulator:
            epsilon = 1e-3 * config.mass**2
            if epsilon == 0.0:
                raise ValueError(
                    "i*epsilon regulator vanishes at m = 0; the operator stays singular"
                )
            inverse = 1.0 / (eigenvalues + 1j * epsilon)
            regulator = epsilon
        else:
            if np.abs(eigenvalues[smallest]) <= 1e-10 * max(scale, 1.0):
                mode = _dominant_mode(eigenvectors[:, smallest], config.dims)
                raise ValueError(
                    "lorentzian operator is singular: null mode near wavenumber "
                    "index {} (eigenvalue {:.3e}); pass use_regulator=True for the "
                    "i*epsilon prescription".format(mode, eigenvalues[smallest])
                )
            inverse = 1.0 / eigenvalues
            regulator = 0.0
        g = (eigenvectors * inverse) @ eigenvectors.T
        operator = lattice_operator(config, regulator=regulator)

    defect = np.max(np.abs(operator @ g - np.eye(n)))
    if defect > 1e-8:
        raise RuntimeError(
            "kernel fails its defining property: max |op @ G - I| = {:.3e}".format(
                defect
            )
        )
    return QuadraticFunctional(g=g, config=config, regulator=regulator)


def _forward_gradient_square(values: np.ndarray, config: LatticeConfig) -> np.ndarray:
    """Signature-weighted sum over axes of forward-difference squares."""
    total = np.zeros(config.dims)
    for axis, sign in enumerate(config.axis_signs()):
        diff = (np.roll(values, -1, axis=axis) - values) / config.spacing
        total = total + sign * diff**2
    return total


def functional_hj_residual(functional: QuadraticFunctional, phi: LatticeField) -> float:
    """Hamilton-Jacobi defect of the quadratic action on a field configuration.

    Evaluates sum_x [ (1/2)(dS/dphi)^2 + (1/2)(grad phi)^2
    + (1/2) m^2 phi^2 ] * vol with dS/dphi(x) = sum_y G(x,y) phi(y) * vol and
    signature-weighted gradients.  In the euclidean signature every term is
    nonnegative, so the residual is >= 0 with equality only at phi = 0; the
    lorentzian value is an indefinite diagnostic.
    """
    if phi.config != functional.config:
        raise ValueError("field and functional live on different lattices")
    if np.iscomplexobj(phi.values):
        raise ValueError("functional Hamilton-Jacobi residual needs a real field")
    config = phi.config
    vol = config.cell_volume
    ds = (functional.g @ phi.flat) * vol
    if functional.regulator != 0.0:
        ds_sq = np.abs(ds) ** 2
    else:
        ds_sq = np.real(ds) ** 2
    density = (
        0.5 * ds_sq.reshape(config.dims)
        + 0.5 * _forward_gradient_square(phi.values, config)
        + 0.5 * config.mass**2 * phi.values**2
    )
    return float(np.sum(density) * vol)


def _laplacian(values: np.ndarray, spacing: float) -> np.ndarray:
    total = np.zeros_like(values)
    for axis in range(values.ndim):
        total = total + (
            np.roll(values, -1, axis=axis)
            + np.roll(values, 1, axis=axis)
            - 2.0 * values
        )
    return total / spacing**2


@dataclass(frozen=True)
class KleinGordonRun:
    """Leapfrog history plus its discrete field-equation residual.

    ``residual[j]`` is the max-norm defect of the second-difference
    d'Alembert stencil at interior time index j + 1.  The update and the
    stencil are the same formula, so the residual certifies the recorded
    history against the discrete field equation (it catches integrator
    bugs, not discretization error); pair it with ``lattice_plane_wave``
    for a dispersion oracle that is independent of the update rule.
    """

    times: np.ndarray
    fields: np.ndarray
    residual: np.ndarray


def lattice_klein_gordon_check(
    phi0: LatticeField,
    velocity: LatticeField,
    dt: float,
    n_steps: int,
) -> KleinGordonRun:
    """Leapfrog-evolve phi_tt = laplacian(phi) - m^2 phi on periodic space.

    Every config dimension is spatial here; time is the integration axis.
    Refuses dt above the lattice spacing (CFL bound).
    """
    if velocity.config != phi0.config:
        raise ValueError("initial field and velocity live on different lattices")
    config = phi0.config
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError("dt must be positive")
    if dt > config.spacing:
        raise ValueError(
            "dt = {:.6g} exceeds the lattice spacing {:.6g}; "
            "the leapfrog CFL bound is violated".format(dt, config.spacing)
        )
    if n_steps < 2:
        raise ValueError("need n_steps >= 2 to form the time stencil")

    m_sq = config.mass**2
    h = config.spacing

    def acceleration(values: np.ndarray) -> np.ndarray:
        return _laplacian(values, h) - m_sq * values

    fields = np.zeros((n_steps + 1,) + config.dims)
    fields[0] = phi0.values
    fields[1] = (
        phi0.values + dt * velocity.values + 0.5 * dt**2 * acceleration(phi0.values)
    )
    for step in range(1, n_steps):
        fields[step + 1] = (
            2.0 * fields[step] - fields[step - 1] + dt**2 * acceleration(fields[step])
        )
        if not np.all(np.isfinite(fields[step + 1])):
            raise FloatingPointError(
                "leapfrog blew up at step {} (t = {:.6g})".format(step + 1, (step + 1) * dt)
            )

    residual = np.zeros(n_steps - 1)
    for step in range(1, n_steps):
        stencil = (fields[step + 1] - 2.0 * fields[step] + fields[step - 1]) / dt**2
        residual[step - 1] = np.max(np.abs(stencil - acceleration(fields[step])))
    times = dt * np.arange(n_steps + 1)
    return KleinGordonRun(times=times, fields=fields, residual=residual)


def lattice_plane_wave(
    config: LatticeConfig, mode: Sequence[int], dt: float
) -> Tuple[LatticeField, LatticeField, float]:
    """Initial data that the leapfrog scheme propagates exactly.

    For the lattice mode with integer index ``mode`` the fully discrete
    dispersion relation is cos(omega dt) = 1 - (dt^2 / 2)(lambda_k + m^2)
    with lambda_k = (4 / h^2) sum_mu sin^2(k_mu h / 2).  Starting from
    phi = cos(k.x) and velocity sin(omega dt)/dt * sin(k.x), the Taylor
    first step lands exactly on cos(k.x - omega dt), so the evolved field
    tracks cos(k.x - omega n dt) to roundoff.
    """
    if len(mode) != len(config.dims):
        raise ValueError(
            "mode index has {} entries, lattice has {} dimensions".format(
                len(mode), len(config.dims)
            )
        )
    h = config.spacing
    k = np.array([2.0 * np.pi * j / (n * h) for j, n in zip(mode, config.dims)])
    lam = float(np.sum(4.0 / h**2 * np.sin(k * h / 2.0) ** 2))
    cos_omega_dt = 1.0 - 0.5 * dt**2 * (lam + config.mass**2)
    if abs(cos_omega_dt) > 1.0:
        raise ValueError(
            "mode {} is unstable at dt = {:.6g}: |cos(omega dt)| = {:.6g} > 1".format(
                tuple(mode), dt, abs(cos_omega_dt)
            )
        )
    omega = float(np.arccos(cos_omega_dt) / dt)

    grids = np.meshgrid(
        *[h * np.arange(n) for n in config.dims], indexing="ij"
    )
    phase = sum(k_mu * x_mu for k_mu, x_mu in zip(k, grids))
    phi0 = LatticeField(config, np.cos(phase))
    velocity = LatticeField(config, np.sin(omega * dt) / dt * np.sin(phase))
    return phi0, velocity, omega


@dataclass(frozen=True)
class PointwiseFunction:
    """Scalar function of a field value with analytic derivatives.

    ``value`` and ``derivative`` must accept and return ndarrays;
    ``second`` is optional and only needed by probes that use curvature.
    """

    value: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    second: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = ""


def constant_function(c: float, label: str = "") -> PointwiseFunction:
    return PointwiseFunction(
        value=lambda x: np.full_like(np.asarray(x, dtype=float), c),
        derivative=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        second=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        label=label or "const {:g}".format(c),
    )


def _checked_exp(exponent: np.ndarray, what: str) -> np.ndarray:
    if np.max(exponent) > _EXP_OVERFLOW:
        idx = np.unravel_index(int(np.argmax(exponent)), exponent.shape)
        raise ValueError(
            "{} overflows at site {}: exponent = {:.6g}".format(
                what, tuple(int(i) for i in idx), float(exponent[idx])
            )
        )
    return np.exp(exponent)


def conformal_transport_check(
    sigma: LatticeField, lam: float, epsilon: float = 1e-6
) -> Tuple[float, float]:
    """Curvature functional of a conformal factor and its derivative check.

    Evaluates R[sigma] = (Lambda / 8) sum_x exp(2 sigma) * vol, then verifies
    the analytic functional derivative (Lambda / 4) exp(2 sigma(x)) against a
    single-site central difference of the full sum, using the
    (1 / vol)(partial / partial site) convention.  Returns the pair
    (R value, max deviation); the deviation is relative to the analytic value
    when Lambda is nonzero and absolute otherwise.

    The difference re-evaluates the whole functional per site, so the check
    stays independent of the analytic shortcut; cancellation roundoff grows
    with site count, which keeps the probe meaningful on small lattices.
    """
    if np.iscomplexobj(sigma.values):
        raise ValueError("conformal factor must be a real field")
    config = sigma.config
    vol = config.cell_volume
    weights = _checked_exp(2.0 * sigma.values, "exp(2 sigma)")
    r_value = float(lam / 8.0 * np.sum(weights) * vol)

    analytic = lam / 4.0 * weights.reshape(-1)
    flat = sigma.flat.astype(float)
    deviations = np.zeros(config.n_sites)
    for site in range(config.n_sites):
        bumped = flat.copy()
        bumped[site] = flat[site] + epsilon
        r_plus = lam / 8.0 * np.sum(np.exp(2.0 * bumped)) * vol
        bumped[site] = flat[site] - epsilon
        r_minus = lam / 8.0 * np.sum(np.exp(2.0 * bumped)) * vol
        numeric = (r_plus - r_minus) / (2.0 * epsilon * vol)
        denom = abs(analytic[site]) if analytic[site] != 0.0 else 1.0
        deviations[site] = abs(numeric - analytic[site]) / denom
    return r_value, float(np.max(deviations))


def analytic_conformal_derivative(sigma: LatticeField, lam: float) -> np.ndarray:
    """Closed-form functional derivative (Lambda / 4) exp(2 sigma)."""
    return lam / 4.0 * np.exp(2.0 * sigma.values)


def conformal_real_part_residual(
    phi: LatticeField,
    sigma: LatticeField,
    w: PointwiseFunction,
    f: PointwiseFunction,
    lam: float,
) -> LatticeField:
    """Real-part constraint density of the conformally split action.

    Nodewise value of (grad phi)^2 + f(sigma) m^2 phi^2
    + 4 exp(4 sigma) W(phi)^2 + (exp(4 sigma) / f(sigma)) W'(phi)^2
    - (grad sigma)^2 - (Lambda^2 / 16) exp(4 sigma), with signature-weighted
    forward-difference gradients.  Refuses when f(sigma) is not positive
    somewhere; warns when W vanishes identically, since the underlying split
    assumed W != 0.
    """
    if phi.config != sigma.config:
        raise ValueError("phi and sigma live on different lattices")
    if np.iscomplexobj(phi.values) or np.iscomplexobj(sigma.values):
        raise ValueError("conformal residuals need real fields")
    config = phi.config
    f_values = np.asarray(f.value(sigma.values), dtype=float)
    if np.min(f_values) <= 0.0:
        idx = np.unravel_index(int(np.argmin(f_values)), config.dims)
        raise ValueError(
            "f(sigma) must be positive; value {:.6g} at site {}".format(
                float(np.min(f_values)), tuple(int(i) for i in idx)
            )
        )
    w_values = np.asarray(w.value(phi.values), dtype=float)
    w_prime = np.asarray(w.derivative(phi.values), dtype=float)
    if np.max(np.abs(w_values)) == 0.0:
        warnings.warn(
            "W vanishes identically; the real/imaginary split assumed W != 0",
            stacklevel=2,
        )
    e4 = _checked_exp(4.0 * sigma.values, "exp(4 sigma)")
    residual = (
        _forward_gradient_square(phi.values, config)
        + f_values * config.mass**2 * phi.values**2
        + 4.0 * e4 * w_values**2
        + e4 / f_values * w_prime**2
        - _forward_gradient_square(sigma.values, config)
        - lam**2 / 16.0 * e4
    )
    return LatticeField(config, residual)


def conformal_imaginary_part_residual(
    sigma: LatticeField,
    phi: LatticeField,
    w: PointwiseFunction,
    dr_dsigma: Union[np.ndarray, float, Callable[[np.ndarray], np.ndarray]],
    lam: float,
) -> LatticeField:
    """Imaginary-part constraint density for a candidate curvature derivative.

    Nodewise value of -2 (dR/dsigma) (2 exp(2 sigma) W(phi))
    + Lambda W(phi) exp(4 sigma).  ``dr_dsigma`` may be a per-site array, a
    scalar, or a callable of the sigma values.  Plugging in the analytic
    derivative (Lambda / 4) exp(2 sigma) cancels the two terms to roundoff.
    Refuses when W vanishes at any site: the split divides the flow by W.
    """
    if phi.config != sigma.config:
        raise ValueError("phi and sigma live on different lattices")
    config = sigma.config
    w_values = np.asarray(w.value(phi.values), dtype=float)
    if np.min(np.abs(w_values)) == 0.0:
        idx = np.unravel_index(int(np.argmin(np.abs(w_values))), config.dims)
        raise ValueError(
            "W vanishes at site {}; the imaginary-part equation divides by W".format(
                tuple(int(i) for i in idx)
            )
        )
    if callable(dr_dsigma):
        derivative = np.asarray(dr_dsigma(sigma.values), dtype=float)
    else:
        derivative = np.broadcast_to(
            np.asarray(dr_dsigma, dtype=float), config.dims
        )
    e2 = _checked_exp(2.0 * sigma.values, "exp(2 sigma)")
    e4 = _checked_exp(4.0 * sigma.values, "exp(4 sigma)")
    residual = -4.0 * derivative * e2 * w_values + lam * w_values * e4
    return LatticeField(config, residual)
