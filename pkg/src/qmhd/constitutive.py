"""Closed-form constitutive laws: pressure, cold pressure, enthalpies,
density-dependent magnetic diffusivity, and the quantum (Bohm) force.

The cold-pressure enthalpy is glued C1 at the reference density 1 and
normalized so ``Hc(1) = Hc'(1) = 0``; the pair then satisfies
``rho * Hc'(rho) - Hc(rho) = Pc(rho)`` exactly by construction, with Hc
blowing up at vacuum.  The diffusivity is the lower envelope of the admitted
band: a power law below the threshold, constant above, glued continuously.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DensityFloorViolation, NonpositiveDensity
from .fields import (
    ScalarField,
    VectorField,
    derivative,
    dealiased_product,
    gradient,
    laplacian,
)


@dataclass(frozen=True)
class ResistivityParams:
    """Magnetic diffusivity law nu_b(rho) = d0 rho^-a below ``threshold``,
    constant d2 = d0 * threshold^-a above it.

    d1, d3 and b only delimit the admissible band and are accepted for
    completeness; the concrete law does not use them.
    """

    d0: float = 1.0
    d1: float = 2.0
    d3: float = 1.0
    a: float = 2.0
    a_prime: float = 2.5
    b: float = 0.0
    threshold: float = 1.0

    def __post_init__(self):
        if self.d0 <= 0 or self.d1 <= 0 or self.d3 <= 0:
            raise ValueError("resistivity constants d0, d1, d3 must be positive")
        if not (2.0 <= self.a < self.a_prime < 3.0):
            raise ValueError("resistivity exponents must satisfy 2 <= a < a' < 3")
        if self.b < 0:
            raise ValueError("resistivity exponent b must be nonnegative")
        if self.threshold <= 0:
            raise ValueError("resistivity threshold must be positive")
        if self.d1 < self.d0 * self.threshold ** (self.a_prime - self.a):
            raise ValueError("resistivity band is empty: need d1 >= d0 * threshold^(a'-a)")

    @property
    def d2(self) -> float:
        """Constant value above the threshold (continuity at the knot)."""
        return self.d0 * self.threshold ** (-self.a)


@dataclass(frozen=True)
class PhysParams:
    """Physical constants: adiabatic exponent, cold-pressure law, Planck
    constant and the resistivity band."""

    gamma: float = 5.0 / 3.0
    gamma_minus: float = 4.0
    kappa: float = 0.0
    c1: float = 1.0
    c2: float = 1.0
    resistivity: ResistivityParams = field(default_factory=ResistivityParams)

    def __post_init__(self):
        if self.gamma <= 1:
            raise ValueError("gamma must exceed 1")
        if self.gamma_minus < 1:
            raise ValueError("gamma_minus must be at least 1")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("cold-pressure constants must be positive")


def _as_positive(rho, context: str) -> np.ndarray:
    arr = np.asarray(rho)
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    if arr.size == 0 or np.min(arr) <= 0.0:
        raise NonpositiveDensity(f"{context}: density must be strictly positive")
    return arr


def pressure(rho, params: PhysParams):
    """Barotropic pressure rho^gamma."""
    return _as_positive(rho, "pressure") ** params.gamma


def pressure_field(rho: ScalarField, params: PhysParams) -> ScalarField:
    return ScalarField(rho.grid, pressure(rho.values, params))


def cold_pressure_derivative(rho, params: PhysParams):
    """Piecewise Pc'(rho): singular branch below 1, power law above."""
    arr = _as_positive(rho, "cold_pressure_derivative")
    lo = params.c1 * arr ** (-params.gamma_minus - 1.0)
    hi = params.c2 * arr ** (params.gamma - 1.0)
    return np.where(arr <= 1.0, lo, hi)


def cold_pressure(rho, params: PhysParams):
    """Pc(rho) = rho Hc'(rho) - Hc(rho), closed form on both branches."""
    arr = _as_positive(rho, "cold_pressure")
    gm, g = params.gamma_minus, params.gamma
    lo = (params.c1 / gm) * (1.0 - arr ** (-gm))
    hi = (params.c2 / g) * (arr ** g - 1.0)
    return np.where(arr <= 1.0, lo, hi)


def enthalpy(rho, params: PhysParams):
    """H(rho) = rho^gamma / (gamma - 1); satisfies rho H' - H = P."""
    arr = _as_positive(rho, "enthalpy")
    return arr ** params.gamma / (params.gamma - 1.0)


def enthalpy_derivative(rho, params: PhysParams):
    arr = _as_positive(rho, "enthalpy_derivative")
    g = params.gamma
    return g * arr ** (g - 1.0) / (g - 1.0)


def enthalpy_second(rho, params: PhysParams):
    """H''(rho) = P'(rho)/rho."""
    arr = _as_positive(rho, "enthalpy_second")
    return params.gamma * arr ** (params.gamma - 2.0)


def cold_enthalpy(rho, params: PhysParams):
    """Hc with Hc'' = Pc'/rho, C1 at the knot, Hc(1) = Hc'(1) = 0."""
    arr = _as_positive(rho, "cold_enthalpy")
    gm, g = params.gamma_minus, params.gamma
    lo = params.c1 * (arr ** (-gm) / (gm * (gm + 1.0)) + arr / (gm + 1.0) - 1.0 / gm)
    hi = params.c2 * (arr ** g / (g * (g - 1.0)) - arr / (g - 1.0) + 1.0 / g)
    return np.where(arr <= 1.0, lo, hi)


def cold_enthalpy_derivative(rho, params: PhysParams):
    arr = _as_positive(rho, "cold_enthalpy_derivative")
    gm, g = params.gamma_minus, params.gamma
    lo = params.c1 * (-arr ** (-gm - 1.0) + 1.0) / (gm + 1.0)
    hi = params.c2 * (arr ** (g - 1.0) - 1.0) / (g - 1.0)
    return np.where(arr <= 1.0, lo, hi)


def cold_enthalpy_second(rho, params: PhysParams):
    """Hc''(rho) = Pc'(rho)/rho."""
    arr = _as_positive(rho, "cold_enthalpy_second")
    return cold_pressure_derivative(arr, params) / arr


def magnetic_diffusivity(rho, params: PhysParams):
    """nu_b(rho): d0 rho^-a below the threshold, constant d2 above."""
    arr = _as_positive(rho, "magnetic_diffusivity")
    r = params.resistivity
    return np.where(arr < r.threshold, r.d0 * arr ** (-r.a), r.d2)


def _checked_sqrt(rho: ScalarField, floor: float, context: str) -> ScalarField:
    vals = rho.values
    if vals.min() <= 0.0:
        raise NonpositiveDensity(f"{context}: density must be strictly positive")
    if vals.min() < floor:
        raise DensityFloorViolation(
            f"{context}: min density {vals.min():.3e} below floor {floor:.3e}"
        )
    return ScalarField._adopt(rho.grid, np.sqrt(vals))


def bohm_force_primary(rho: ScalarField, kappa: float, floor: float = 1e-8) -> VectorField:
    """2 kappa^2 rho grad(lap sqrt(rho) / sqrt(rho)), evaluated pointwise."""
    grid = rho.grid
    if kappa == 0.0:
        return VectorField.zero(grid)
    w = _checked_sqrt(rho, floor, "bohm_force_primary")
    quot = ScalarField._adopt(grid, laplacian(w).values / w.values)
    g = gradient(quot)
    coef = 2.0 * kappa**2
    return VectorField.from_arrays(
        grid, [coef * rho.values * c.values for c in g.components]
    )


def bohm_force_divergence_form(rho: ScalarField, kappa: float, floor: float = 1e-8) -> VectorField:
    """Conservative form kappa^2 grad(lap rho) - 4 kappa^2 div(grad sqrt(rho) (x) grad sqrt(rho))."""
    grid = rho.grid
    if kappa == 0.0:
        return VectorField.zero(grid)
    w = _checked_sqrt(rho, floor, "bohm_force_divergence_form")
    gw = gradient(w)
    glap = gradient(laplacian(rho))
    comps = []
    for l in range(3):
        acc = kappa**2 * glap.components[l].values
        for j in range(grid.dim):
            tens = dealiased_product(gw.components[j], gw.components[l])
            acc = acc - 4.0 * kappa**2 * derivative(tens, j).values
        comps.append(acc)
    return VectorField.from_arrays(grid, comps)


def bohm_force_hessian_form(rho: ScalarField, kappa: float, floor: float = 1e-8) -> VectorField:
    """Middle form kappa^2 div(rho hess(log rho)), used as a cross-check."""
    grid = rho.grid
    if kappa == 0.0:
        return VectorField.zero(grid)
    _checked_sqrt(rho, floor, "bohm_force_hessian_form")
    logr = ScalarField._adopt(grid, np.log(rho.values))
    grads = [derivative(logr, j) for j in range(grid.dim)]
    comps = []
    for l in range(3):
        acc = np.zeros(grid.shape)
        for j in range(grid.dim):
            h_jl = derivative(grads[j], l) if l < grid.dim else None
            if h_jl is None:
                continue
            acc = acc + derivative(dealiased_product(rho, h_jl), j).values
        comps.append(kappa**2 * acc)
    return VectorField.from_arrays(grid, comps)
