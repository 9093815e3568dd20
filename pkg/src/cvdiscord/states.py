"""Gaussian bipartite states of two optical modes.

Quadratures are ordered (x_A, p_A, x_B, p_B) and expressed in shot-noise
units: the vacuum has variance ``v0`` in every quadrature (default 1).
A state is its mean vector plus a 4x4 covariance matrix with blocks

    sigma = [[A, C], [C^T, B]]

where A, B are the 2x2 single-mode blocks and C holds the intermode
correlations.  A bipartite Gaussian state has zero quantum discord exactly
when C = 0, so every nonzero C block is a detection target.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ValidationError

# tolerances used by the physicality checks
SYMMETRY_TOL = 1e-12
PHYSICALITY_TOL = -1e-9

DEFAULT_V0 = 1.0


def symplectic_form() -> np.ndarray:
    """Two-mode symplectic form in (x_A, p_A, x_B, p_B) ordering."""
    w = np.array([[0.0, 1.0], [-1.0, 0.0]])
    out = np.zeros((4, 4))
    out[:2, :2] = w
    out[2:, 2:] = w
    return out


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    margin: float


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]


def validate_covariance(cov, v0: float = DEFAULT_V0) -> ValidationReport:
    """Check a candidate covariance matrix for symmetry, positivity and the
    uncertainty bound.

    Parameters
    ----------
    cov : array_like
        Candidate 4x4 (or 2x2 single-mode) covariance matrix.
    v0 : float
        Vacuum quadrature variance.

    Returns
    -------
    ValidationReport
        One entry per check; ``report.ok`` is the combined verdict.
        The uncertainty check requires the smallest eigenvalue of
        ``cov + i*v0*Omega`` to stay above -1e-9.

    Raises
    ------
    ValidationError
        If the input is not a square real matrix of even dimension with
        finite entries, or v0 <= 0.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
        raise ValidationError(f"covariance must be square with even dimension, got {cov.shape}")
    if not np.all(np.isfinite(cov)):
        raise ValidationError("covariance has non-finite entries")
    if not (np.isfinite(v0) and v0 > 0):
        raise ValidationError(f"vacuum variance must be positive, got {v0}")

    n_modes = cov.shape[0] // 2
    asym = float(np.abs(cov - cov.T).max())
    sym_ok = asym <= SYMMETRY_TOL

    sym_part = 0.5 * (cov + cov.T)
    eigs = np.linalg.eigvalsh(sym_part)
    pd_margin = float(eigs.min())
    pd_ok = pd_margin > 0

    w = np.array([[0.0, 1.0], [-1.0, 0.0]])
    omega = np.kron(np.eye(n_modes), w)
    phys = np.linalg.eigvalsh(sym_part + 1j * v0 * omega)
    phys_margin = float(phys.min())
    phys_ok = phys_margin >= PHYSICALITY_TOL

    return ValidationReport(
        checks=(
            CheckResult("symmetric", sym_ok, asym),
            CheckResult("positive_definite", pd_ok, pd_margin),
            CheckResult("uncertainty_bound", phys_ok, phys_margin),
        )
    )


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SingleModeState:
    """Gaussian state of one mode: 2-vector mean, 2x2 covariance."""

    means: np.ndarray
    cov: np.ndarray
    v0: float = DEFAULT_V0

    def __post_init__(self):
        means = _freeze(self.means)
        cov = _freeze(self.cov)
        if means.shape != (2,):
            raise ValidationError(f"single-mode means must have shape (2,), got {means.shape}")
        if not np.all(np.isfinite(means)):
            raise ValidationError("means have non-finite entries")
        report = validate_covariance(cov, self.v0)
        if not report.ok:
            raise ValidationError(f"unphysical single-mode covariance: {report.failures()}")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "cov", cov)


@dataclass(frozen=True)
class GaussianBipartiteState:
    """Two-mode Gaussian state in (x_A, p_A, x_B, p_B) ordering."""

    means: np.ndarray
    cov: np.ndarray
    v0: float = DEFAULT_V0

    def __post_init__(self):
        means = _freeze(self.means)
        cov = _freeze(self.cov)
        if means.shape != (4,):
            raise ValidationError(f"means must have shape (4,), got {means.shape}")
        if not np.all(np.isfinite(means)):
            raise ValidationError("means have non-finite entries")
        if cov.shape != (4, 4):
            raise ValidationError(f"covariance must have shape (4, 4), got {cov.shape}")
        report = validate_covariance(cov, self.v0)
        if not report.ok:
            raise ValidationError(f"unphysical covariance: {report.failures()}")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "cov", cov)

    @property
    def block_a(self) -> np.ndarray:
        return self.cov[:2, :2]

    @property
    def block_b(self) -> np.ndarray:
        return self.cov[2:, 2:]

    @property
    def block_c(self) -> np.ndarray:
        return self.cov[:2, 2:]


def vacuum_single(v0: float = DEFAULT_V0) -> SingleModeState:
    return SingleModeState(np.zeros(2), v0 * np.eye(2), v0)


def vacuum_bipartite(v0: float = DEFAULT_V0) -> GaussianBipartiteState:
    return GaussianBipartiteState(np.zeros(4), v0 * np.eye(4), v0)


def tensor(mode_a: SingleModeState, mode_b: SingleModeState) -> GaussianBipartiteState:
    """Uncorrelated two-mode state from two single-mode states."""
    if mode_a.v0 != mode_b.v0:
        raise ValidationError("modes use different vacuum conventions")
    means = np.concatenate([mode_a.means, mode_b.means])
    cov = np.zeros((4, 4))
    cov[:2, :2] = mode_a.cov
    cov[2:, 2:] = mode_b.cov
    return GaussianBipartiteState(means, cov, mode_a.v0)


def modulated_beam(depth_x: float, depth_p: float, v0: float = DEFAULT_V0) -> SingleModeState:
    """Vacuum carrying independent Gaussian displacement noise on each
    quadrature.

    A modulation depth d adds classical noise of variance d^2 * v0, so the
    beam has quadrature variances (1 + d^2) * v0.  Depths must be >= 0.
    """
    if depth_x < 0 or depth_p < 0:
        raise ValidationError("modulation depths must be non-negative")
    cov = v0 * np.diag([1.0 + depth_x**2, 1.0 + depth_p**2])
    return SingleModeState(np.zeros(2), cov, v0)


def split_balanced(mode: SingleModeState) -> GaussianBipartiteState:
    """Send a single-mode state through a balanced splitter with vacuum on
    the idle port.

    For input variances (V_x, V_p) in units of v0 the output blocks are
    A = B = v0 * diag((V_x+1)/2, (V_p+1)/2) and C = v0 * diag((V_x-1)/2,
    (V_p-1)/2): any classical noise above vacuum becomes a positive
    intermode correlation.
    """
    v0 = mode.v0
    half_sum = 0.5 * (mode.cov + v0 * np.eye(2))
    half_diff = 0.5 * (mode.cov - v0 * np.eye(2))
    cov = np.zeros((4, 4))
    cov[:2, :2] = half_sum
    cov[2:, 2:] = half_sum
    cov[:2, 2:] = half_diff
    cov[2:, :2] = half_diff.T
    m = mode.means / np.sqrt(2.0)
    return GaussianBipartiteState(np.concatenate([m, m]), cov, v0)


def beam_splitter_matrix(eta: float) -> np.ndarray:
    """Symplectic matrix of a beam splitter with amplitude transmissivity eta.

    Forward action on the quadrature operators, applied identically to x and
    p: mode 1 keeps eta of itself minus sqrt(1-eta^2) of mode 2, mode 2
    gains sqrt(1-eta^2) of mode 1.  A coherent displacement d on port 1
    therefore exits as (eta*d, sqrt(1-eta^2)*d) with equal signs.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValidationError(f"transmissivity must lie in [0, 1], got {eta}")
    eta_t = np.sqrt(1.0 - eta * eta)
    s = np.zeros((4, 4))
    s[:2, :2] = eta * np.eye(2)
    s[:2, 2:] = -eta_t * np.eye(2)
    s[2:, :2] = eta_t * np.eye(2)
    s[2:, 2:] = eta * np.eye(2)
    return s


def apply_beam_splitter(state: GaussianBipartiteState, eta: float,
                        inverse: bool = False) -> GaussianBipartiteState:
    """Mix the two modes of a bipartite state on a beam splitter.

    Parameters
    ----------
    state : GaussianBipartiteState
    eta : float
        Amplitude transmissivity in [0, 1].
    inverse : bool
        Apply the inverse mixing (undoes a previous application).
    """
    s = beam_splitter_matrix(eta)
    if inverse:
        s = s.T
    return GaussianBipartiteState(s @ state.means, s @ state.cov @ s.T, state.v0)


def rotation_matrix(theta_a: float, theta_b: float) -> np.ndarray:
    """Block-diagonal local-oscillator rotation for both modes."""
    out = np.zeros((4, 4))
    for i, th in ((0, theta_a), (2, theta_b)):
        c, s = np.cos(th), np.sin(th)
        out[i, i] = c
        out[i, i + 1] = s
        out[i + 1, i] = -s
        out[i + 1, i + 1] = c
    return out


def rotate_local(state: GaussianBipartiteState, theta_a: float,
                 theta_b: float) -> GaussianBipartiteState:
    """Rotate each mode's measured quadrature by its local-oscillator phase.

    theta = 0 measures x, theta = pi/2 measures p.
    """
    u = rotation_matrix(theta_a, theta_b)
    return GaussianBipartiteState(u @ state.means, u @ state.cov @ u.T, state.v0)


def c_block_is_zero(state: GaussianBipartiteState, tol: float = 1e-12) -> bool:
    """True when the intermode block vanishes, i.e. the state is a product
    state with zero discord."""
    return bool(np.abs(state.block_c).max() <= tol)


def wigner_density(state: GaussianBipartiteState, point):
    """Phase-space quasiprobability density at 4-vector points.

    W(x) = exp(-(x - m) sigma^{-1} (x - m)^T / 2) / (4 pi^2 sqrt(det sigma)),
    a normal density over (x_A, p_A, x_B, p_B); Gaussian states have
    non-negative Wigner functions.  Accepts a single 4-vector or an array
    of points with the vector on the last axis.
    """
    point = np.asarray(point, dtype=float)
    if point.shape[-1:] != (4,):
        raise ValidationError(f"points must have a last axis of 4, got {point.shape}")
    det = np.linalg.det(state.cov)
    if det <= 0 or not np.isfinite(det):
        raise NumericError(f"covariance determinant {det} is not usable")
    d = point - state.means
    try:
        sol = np.linalg.solve(state.cov, d[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise NumericError("singular covariance in density evaluation") from exc
    val = np.exp(-0.5 * np.sum(d * sol, axis=-1)) / (4.0 * np.pi**2 * np.sqrt(det))
    return val if val.ndim else float(val)


def state_to_json(state: GaussianBipartiteState) -> str:
    doc = {
        "means": state.means.tolist(),
        "cov": state.cov.tolist(),
        "v0": state.v0,
    }
    return json.dumps(doc, indent=2)


def state_from_json(text: str) -> GaussianBipartiteState:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"bad state document: {exc}") from exc
    try:
        means = doc["means"]
        cov = doc["cov"]
    except (KeyError, TypeError) as exc:
        raise ValidationError("state document needs 'means' and 'cov'") from exc
    return GaussianBipartiteState(
        np.asarray(means, dtype=float),
        np.asarray(cov, dtype=float),
        float(doc.get("v0", DEFAULT_V0)),
    )
