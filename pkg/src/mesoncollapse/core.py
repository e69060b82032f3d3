"""Shared domain types: physical parameters, position grid, states.

Natural units with hbar = 1 throughout.  The internal two-level space is
spanned by the mass eigenstates (H, L); particle / anti-particle states
are their equal-weight combinations.
"""

from dataclasses import dataclass, field

import numpy as np

MASS_LABELS = ("H", "L")
FLAVOR_LABELS = ("M0", "M0bar")

# index of each mass eigenstate in the trailing axis of amplitude arrays
IDX_H = 0
IDX_L = 1


class ParameterError(ValueError):
    """A physical or numerical parameter fails its validity constraints."""


class GridResolutionError(ValueError):
    """The position grid is too coarse or too short for the requested state."""


class InvariantViolationError(ValueError):
    """An input object violates a structural invariant (norm, trace, ...)."""


class NormDivergenceError(RuntimeError):
    """A trajectory's norm drifted too far in a single step (dt too large)."""


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the two-level collapse models.

    ``alpha`` parametrizes the initial Gaussian: the amplitude profile is
    proportional to exp(-x^2 / (2 alpha)), so the position probability
    density has variance alpha/2.  This is the convention under which the
    closed-form damped-oscillation probabilities hold with the same alpha.
    """

    m0: float = 1.0
    mH: float = 1.5
    mL: float = 0.5
    lam: float = 0.0      # position-localization (QMUPL) coupling
    gamma: float = 0.0    # smeared-density (CSL) coupling
    rC: float = 1.0       # CSL smearing length
    alpha: float = 1.0
    dim: int = 1

    def __post_init__(self):
        if self.m0 <= 0:
            raise ParameterError("m0 must be positive, got %g" % self.m0)
        if not self.mH > self.mL:
            raise ParameterError("mH must exceed mL (mH=%g, mL=%g)" % (self.mH, self.mL))
        if self.lam < 0:
            raise ParameterError("lambda coupling must be >= 0, got %g" % self.lam)
        if self.gamma < 0:
            raise ParameterError("gamma coupling must be >= 0, got %g" % self.gamma)
        if self.rC <= 0:
            raise ParameterError("rC must be positive, got %g" % self.rC)
        if self.alpha <= 0:
            raise ParameterError("alpha must be positive, got %g" % self.alpha)
        if self.dim not in (1, 3):
            raise ParameterError("dim must be 1 or 3, got %r" % (self.dim,))

    @property
    def dm(self):
        """Mass splitting mH - mL."""
        return self.mH - self.mL


@dataclass(frozen=True)
class Grid:
    """Uniform 1-D quadrature mesh.

    There is no kinetic term anywhere in the dynamics, so grid points never
    couple; the grid is a plain quadrature rule with no boundary conditions.
    """

    n_points: int
    spacing: float
    origin: float = 0.0

    def __post_init__(self):
        if self.n_points < 2:
            raise ParameterError("n_points must be >= 2, got %d" % self.n_points)
        if self.spacing <= 0:
            raise ParameterError("spacing must be positive, got %g" % self.spacing)

    @classmethod
    def centered(cls, n_points, extent):
        """Grid of ``n_points`` covering [-extent/2, extent/2)."""
        spacing = extent / n_points
        return cls(n_points=n_points, spacing=spacing,
                   origin=-extent / 2.0 + spacing / 2.0)

    @property
    def extent(self):
        return self.n_points * self.spacing

    @property
    def points(self):
        return self.origin + self.spacing * np.arange(self.n_points)


def _frozen_array(a, dtype):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GridState:
    """Pure state on the grid: complex amplitudes of shape (n_points, 2).

    The trailing axis runs over the mass eigenstates (H, L).  The squared
    norm is sum(|amplitude|^2) * spacing.
    """

    amplitudes: np.ndarray
    grid: Grid

    def __post_init__(self):
        amp = _frozen_array(self.amplitudes, complex)
        if amp.shape != (self.grid.n_points, 2):
            raise InvariantViolationError(
                "amplitudes must have shape (%d, 2), got %r"
                % (self.grid.n_points, amp.shape))
        if not np.all(np.isfinite(amp.view(float))):
            raise InvariantViolationError("amplitudes contain non-finite values")
        object.__setattr__(self, "amplitudes", amp)

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.spacing))

    def normalized(self):
        n = self.norm()
        if n == 0:
            raise InvariantViolationError("cannot normalize the zero state")
        return GridState(self.amplitudes / n, self.grid)

    def mass_populations(self):
        """(P_H, P_L) of the (unnormalized) state."""
        p = np.sum(np.abs(self.amplitudes) ** 2, axis=0) * self.grid.spacing
        return float(p[IDX_H]), float(p[IDX_L])

    def flavor_probability(self, flavor):
        """Squared overlap with identity_position (x) |flavor>."""
        v = flavor_to_mass(flavor)
        proj = (np.conj(v.cH) * self.amplitudes[:, IDX_H]
                + np.conj(v.cL) * self.amplitudes[:, IDX_L])
        return float(np.sum(np.abs(proj) ** 2) * self.grid.spacing)


@dataclass(frozen=True)
class DensityBlocks:
    """Averaged density matrix rho^{mu nu}(x, y), stored as (2, 2, n, n)."""

    blocks: np.ndarray
    grid: Grid

    def __post_init__(self):
        b = _frozen_array(self.blocks, complex)
        n = self.grid.n_points
        if b.shape != (2, 2, n, n):
            raise InvariantViolationError(
                "blocks must have shape (2, 2, %d, %d), got %r" % (n, n, b.shape))
        object.__setattr__(self, "blocks", b)

    @classmethod
    def from_state(cls, state):
        """Projector |phi><phi| of a pure GridState."""
        amp = state.amplitudes  # (n, 2)
        blocks = np.einsum("xm,yn->mnxy", amp, np.conj(amp))
        return cls(blocks, state.grid)

    def trace(self):
        diag = np.einsum("mmxx->", self.blocks)
        return complex(diag) * self.grid.spacing

    def hermiticity_defect(self):
        """max |rho^{mu nu}(x,y) - conj(rho^{nu mu}(y,x))|."""
        return float(np.max(np.abs(self.blocks
                                   - np.conj(np.transpose(self.blocks, (1, 0, 3, 2))))))

    def validate(self, tol=1e-9):
        if self.hermiticity_defect() > tol:
            raise InvariantViolationError(
                "density blocks are not Hermitian (defect %g)" % self.hermiticity_defect())
        tr = self.trace()
        if abs(tr - 1.0) > tol:
            raise InvariantViolationError("trace is %s, expected 1" % (tr,))
        return self


@dataclass(frozen=True)
class FlavorVector:
    """Internal two-level state in the mass basis."""

    cH: complex
    cL: complex

    def norm(self):
        return float(np.sqrt(abs(self.cH) ** 2 + abs(self.cL) ** 2))

    def inner(self, other):
        """<self | other>."""
        return complex(np.conj(self.cH) * other.cH + np.conj(self.cL) * other.cL)


_SQ2 = 1.0 / np.sqrt(2.0)
_FLAVOR_VECTORS = {
    "M0": FlavorVector(_SQ2, _SQ2),
    "M0bar": FlavorVector(_SQ2, -_SQ2),
    "H": FlavorVector(1.0, 0.0),
    "L": FlavorVector(0.0, 1.0),
}


def flavor_to_mass(label):
    """Mass-basis amplitudes of a flavor (or mass) label.

    M0 -> (1, 1)/sqrt(2), M0bar -> (1, -1)/sqrt(2); the mass labels H, L
    are accepted for convenience and map to basis vectors.
    """
    try:
        return _FLAVOR_VECTORS[label]
    except KeyError:
        raise ParameterError("unknown state label %r (expected one of %s)"
                             % (label, sorted(_FLAVOR_VECTORS))) from None


def make_gaussian_state(params, grid, flavor="M0"):
    """Normalized Gaussian wave packet tensored with a flavor state.

    The amplitude profile is exp(-x^2 / (2 alpha)), normalized on the grid
    (position density variance alpha/2, see ModelParams).  Raises
    GridResolutionError if the grid does not resolve or cover the packet.
    """
    root_alpha = np.sqrt(params.alpha)
    if grid.extent < 8.0 * root_alpha:
        raise GridResolutionError(
            "grid extent %g does not cover 8*sqrt(alpha)=%g"
            % (grid.extent, 8.0 * root_alpha))
    if grid.spacing > root_alpha / 4.0:
        raise GridResolutionError(
            "grid spacing %g exceeds sqrt(alpha)/4=%g"
            % (grid.spacing, root_alpha / 4.0))
    x = grid.points
    psi = np.exp(-x ** 2 / (2.0 * params.alpha))
    psi /= np.sqrt(np.sum(psi ** 2) * grid.spacing)
    v = flavor_to_mass(flavor)
    amp = np.empty((grid.n_points, 2), dtype=complex)
    amp[:, IDX_H] = v.cH * psi
    amp[:, IDX_L] = v.cL * psi
    return GridState(amp, grid)
