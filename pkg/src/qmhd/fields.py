"""Scalar and vector fields on a periodic grid, plus spectral operators.

Fields are immutable; every operator returns a new field.  Real-space samples
and normalized spectral coefficients (``f = sum_k c_k exp(i k.x)``) are kept
in sync lazily so chains of spectral operators do not transform back and
forth.  Vector fields always carry three components (2.5D convention): for
dim < 3 the components still exist but only vary along the active axes, so
curls and cross products keep their usual meaning.
"""

from __future__ import annotations

import warnings
from typing import Iterable

import numpy as np

from .errors import SpectralTailWarning
from .grid import TorusGrid


def _forward(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return np.fft.fftn(values) / grid.num_points


def _backward(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return np.fft.ifftn(coeffs * grid.num_points).real


class ScalarField:
    """Real scalar samples on a :class:`TorusGrid` with a spectral view."""

    __slots__ = ("grid", "_values", "_spectrum")

    def __init__(self, grid: TorusGrid, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != grid.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values = values.copy()
        values.setflags(write=False)
        self.grid = grid
        self._values = values
        self._spectrum = None

    @classmethod
    def from_spectrum(cls, grid: TorusGrid, coeffs: np.ndarray) -> "ScalarField":
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape != grid.shape:
            raise ValueError(f"spectrum shape {coeffs.shape} != grid shape {grid.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("spectral coefficients must be finite")
        self = cls.__new__(cls)
        self.grid = grid
        self._values = None
        self._spectrum = coeffs.copy()
        self._spectrum.setflags(write=False)
        return self

    @classmethod
    def _adopt(cls, grid: TorusGrid, values: np.ndarray | None, spectrum: np.ndarray | None = None) -> "ScalarField":
        # internal fast path: takes ownership, skips validation
        self = cls.__new__(cls)
        self.grid = grid
        if values is not None:
            values.setflags(write=False)
        if spectrum is not None:
            spectrum.setflags(write=False)
        self._values = values
        self._spectrum = spectrum
        return self

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            vals = _backward(self._spectrum, self.grid)
            vals.setflags(write=False)
            self._values = vals
        return self._values

    @property
    def spectrum(self) -> np.ndarray:
        if self._spectrum is None:
            spec = _forward(self._values, self.grid)
            spec.setflags(write=False)
            self._spectrum = spec
        return self._spectrum

    def __add__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField._adopt(self.grid, self.values + other.values)
        return ScalarField._adopt(self.grid, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField._adopt(self.grid, self.values - other.values)
        return ScalarField._adopt(self.grid, self.values - other)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField._adopt(self.grid, self.values * other.values)
        return ScalarField._adopt(self.grid, self.values * other)

    __rmul__ = __mul__

    def __repr__(self):
        return f"ScalarField(shape={self.grid.shape})"


class VectorField:
    """Three :class:`ScalarField` components on a shared grid."""

    __slots__ = ("grid", "components")

    def __init__(self, grid: TorusGrid, components: Iterable[ScalarField]):
        components = tuple(components)
        if len(components) != 3:
            raise ValueError("vector fields carry exactly 3 components")
        for c in components:
            if c.grid is not grid and c.grid != grid:
                raise ValueError("all components must share one grid")
        self.grid = grid
        self.components = components

    @classmethod
    def from_arrays(cls, grid: TorusGrid, arrays: Iterable[np.ndarray]) -> "VectorField":
        return cls(grid, [ScalarField(grid, a) for a in arrays])

    @classmethod
    def zero(cls, grid: TorusGrid) -> "VectorField":
        z = np.zeros(grid.shape)
        return cls.from_arrays(grid, [z, z, z])

    def component_values(self) -> list[np.ndarray]:
        return [c.values for c in self.components]

    def __add__(self, other):
        return VectorField(self.grid, [a + b for a, b in zip(self.components, other.components)])

    def __sub__(self, other):
        return VectorField(self.grid, [a - b for a, b in zip(self.components, other.components)])

    def __mul__(self, other):
        return VectorField(self.grid, [c * other for c in self.components])

    __rmul__ = __mul__

    def __repr__(self):
        return f"VectorField(shape={self.grid.shape})"


# --------------------------------------------------------------------------
# differential operators (exact on the retained modes)


def _tail_check(spec: np.ndarray, grid: TorusGrid, op: str, reference: float) -> None:
    """Warn when the top third of the spectrum carries >1% of the result.

    ``reference`` is the largest magnitude the operator could have produced
    from its input; results at the roundoff floor relative to it (e.g. the
    divergence of a solenoidal field) are noise, not unresolved content.
    """
    total = np.sum(np.abs(spec) ** 2)
    if total == 0.0 or total <= (1e-13 * reference) ** 2:
        return
    tail = np.sum(np.abs(spec[grid.tail_mask]) ** 2)
    if tail > 0.01 * total:
        warnings.warn(
            f"{op}: top third of the spectrum holds {100 * tail / total:.1f}% of the L2 mass",
            SpectralTailWarning,
            stacklevel=3,
        )


def derivative(f: ScalarField, axis: int) -> ScalarField:
    """Spectral partial derivative along ``axis`` (zero for inactive axes)."""
    grid = f.grid
    if axis >= grid.dim:
        return ScalarField._adopt(grid, np.zeros(grid.shape))
    return ScalarField._adopt(grid, None, 1j * grid.kvec[axis] * f.spectrum)


def gradient(f: ScalarField) -> VectorField:
    grid = f.grid
    spec = f.spectrum
    comps = []
    for axis in range(3):
        if axis < grid.dim:
            comps.append(ScalarField._adopt(grid, None, 1j * grid.kvec[axis] * spec))
        else:
            comps.append(ScalarField._adopt(grid, np.zeros(grid.shape)))
    return VectorField(grid, comps)


def divergence(v: VectorField) -> ScalarField:
    grid = v.grid
    acc = np.zeros(grid.shape, dtype=np.complex128)
    kmax = np.sqrt(np.max(grid.k_squared))
    ref = 0.0
    for axis in range(grid.dim):
        spec = v.components[axis].spectrum
        acc += 1j * grid.kvec[axis] * spec
        ref = max(ref, kmax * np.linalg.norm(spec.ravel()))
    _tail_check(acc, grid, "divergence", ref)
    return ScalarField._adopt(grid, None, acc)


def curl(v: VectorField) -> VectorField:
    grid = v.grid
    k = grid.kvec
    s = [c.spectrum for c in v.components]
    out = (
        1j * (k[1] * s[2] - k[2] * s[1]),
        1j * (k[2] * s[0] - k[0] * s[2]),
        1j * (k[0] * s[1] - k[1] * s[0]),
    )
    kmax = np.sqrt(np.max(grid.k_squared))
    ref = kmax * max(np.linalg.norm(sp.ravel()) for sp in s)
    for c in out:
        _tail_check(c, grid, "curl", ref)
    return VectorField(grid, [ScalarField._adopt(grid, None, np.ascontiguousarray(c)) for c in out])


def laplacian(f: ScalarField) -> ScalarField:
    grid = f.grid
    spec = -grid.k_squared * f.spectrum
    ref = np.max(grid.k_squared) * np.linalg.norm(f.spectrum.ravel())
    _tail_check(spec, grid, "laplacian", ref)
    return ScalarField._adopt(grid, None, spec)


def power_laplacian(f: ScalarField, exponent: int) -> ScalarField:
    """Apply the ``exponent``-th power of the Laplacian spectrally."""
    if exponent < 1 or int(exponent) != exponent:
        raise ValueError("exponent must be a positive integer")
    grid = f.grid
    spec = (-grid.k_squared) ** int(exponent) * f.spectrum
    ref = np.max(grid.k_squared) ** int(exponent) * np.linalg.norm(f.spectrum.ravel())
    _tail_check(spec, grid, "power_laplacian", ref)
    return ScalarField._adopt(grid, None, spec)


def vector_laplacian(v: VectorField) -> VectorField:
    grid = v.grid
    return VectorField(
        grid,
        [ScalarField._adopt(grid, None, -grid.k_squared * c.spectrum) for c in v.components],
    )


def dealias(f):
    """Zero every coefficient with any |k_axis| > N_axis/3 (idempotent)."""
    if isinstance(f, VectorField):
        return VectorField(f.grid, [dealias(c) for c in f.components])
    grid = f.grid
    return ScalarField._adopt(grid, None, np.where(grid.dealias_mask, f.spectrum, 0.0))


def dealiased_product(a: ScalarField, b: ScalarField) -> ScalarField:
    """Pointwise product followed by 2/3-rule truncation."""
    grid = a.grid
    spec = _forward(a.values * b.values, grid)
    spec[grid.tail_mask] = 0.0
    return ScalarField._adopt(grid, None, spec)


def project_divergence_free(v: VectorField) -> VectorField:
    """Leray projection: remove the gradient part, keep the mean."""
    grid = v.grid
    k = grid.kvec
    s = [c.spectrum for c in v.components]
    k2 = grid.k_squared.copy()
    k2.flat[0] = 1.0  # mean mode untouched: k.v is zero there anyway
    kv = (k[0] * s[0] + k[1] * s[1] + k[2] * s[2]) / k2
    out = [s[axis] - k[axis] * kv for axis in range(3)]
    return VectorField(grid, [ScalarField._adopt(grid, None, c) for c in out])


def cross(a: VectorField, b: VectorField) -> VectorField:
    av, bv = a.component_values(), b.component_values()
    grid = a.grid
    return VectorField.from_arrays(
        grid,
        [
            av[1] * bv[2] - av[2] * bv[1],
            av[2] * bv[0] - av[0] * bv[2],
            av[0] * bv[1] - av[1] * bv[0],
        ],
    )


# --------------------------------------------------------------------------
# quadrature and norms


def integrate(f: ScalarField) -> float:
    grid = f.grid
    if f._spectrum is not None and f._values is None:
        return float(f._spectrum.flat[0].real * grid.volume)
    return float(f.values.mean() * grid.volume)


def inner_product(f, g) -> float:
    """L2 inner product; scalar-scalar or vector-vector."""
    if isinstance(f, VectorField):
        return sum(inner_product(a, b) for a, b in zip(f.components, g.components))
    return float((f.values * g.values).mean() * f.grid.volume)


def l2_norm(f) -> float:
    return float(np.sqrt(max(inner_product(f, f), 0.0)))


def sobolev_seminorm(f, order: int) -> float:
    """L2 norm of the full order-``order`` derivative tensor, spectrally."""
    if isinstance(f, VectorField):
        return float(np.sqrt(sum(sobolev_seminorm(c, order) ** 2 for c in f.components)))
    grid = f.grid
    weight = grid.k_squared ** order
    return float(np.sqrt(grid.volume * np.sum(weight * np.abs(f.spectrum) ** 2)))


def lp_norm(f: ScalarField, p: float) -> float:
    grid = f.grid
    return float((np.abs(f.values) ** p).mean() * grid.volume) ** (1.0 / p)


def spectral_resample(f: ScalarField, grid: TorusGrid) -> ScalarField:
    """Re-express a field on another grid by zero-padding / truncating modes."""
    src = f.grid
    if src.dim != grid.dim:
        raise ValueError("resampling cannot change the dimension")
    out = np.zeros(grid.shape, dtype=np.complex128)
    spec = f.spectrum
    # copy every source mode that exists on the destination grid
    idx_src, idx_dst = [], []
    for axis in range(src.dim):
        ns, nd = src.shape[axis], grid.shape[axis]
        kkeep = [k for k in np.rint(src.axis_wavenumbers[axis]).astype(int) if -nd // 2 < k <= nd // 2]
        idx_src.append(np.array([k % ns for k in kkeep]))
        idx_dst.append(np.array([k % nd for k in kkeep]))
    mesh_src = np.ix_(*idx_src)
    mesh_dst = np.ix_(*idx_dst)
    out[mesh_dst] = spec[mesh_src]
    return ScalarField.from_spectrum(grid, out)
