"""Uniform periodic grids on the d-torus with precomputed spectral bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

TAU = 2.0 * np.pi


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on [0, 2*pi)^dim, dim in {1, 2, 3}.

    Wavenumbers per axis form the symmetric integer set {-N/2+1, ..., N/2}.
    Vector quantities always carry three components; for dim < 3 fields vary
    along the first ``dim`` axes only and the trailing wavenumbers are zero.
    """

    shape: tuple[int, ...]

    def __post_init__(self):
        shape = tuple(int(n) for n in np.atleast_1d(np.asarray(self.shape, dtype=int)))
        object.__setattr__(self, "shape", shape)
        if not 1 <= len(shape) <= 3:
            raise ValueError(f"grid dimension must be 1, 2 or 3, got {len(shape)}")
        for n in shape:
            if n < 8:
                raise ValueError(f"need at least 8 points per axis, got {n}")
            if n % 2:
                raise ValueError(f"points per axis must be even, got {n}")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @cached_property
    def num_points(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def volume(self) -> float:
        return TAU ** self.dim

    @cached_property
    def spacing(self) -> tuple[float, ...]:
        return tuple(TAU / n for n in self.shape)

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        """Coordinate values along each axis."""
        return tuple(np.arange(n) * (TAU / n) for n in self.shape)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, ...]:
        """Broadcast coordinate arrays, one per active axis."""
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def axis_wavenumbers(self) -> tuple[np.ndarray, ...]:
        out = []
        for n in self.shape:
            k = np.fft.fftfreq(n, 1.0 / n)
            k[n // 2] = n // 2  # Nyquist on the positive side
            out.append(k)
        return tuple(out)

    @cached_property
    def kvec(self) -> tuple[np.ndarray, ...]:
        """Three wavenumber arrays broadcast to ``shape``; zero beyond dim."""
        out = []
        for axis in range(3):
            if axis < self.dim:
                k = self.axis_wavenumbers[axis]
                shp = [1] * self.dim
                shp[axis] = self.shape[axis]
                out.append(np.broadcast_to(k.reshape(shp), self.shape))
            else:
                out.append(np.broadcast_to(np.zeros(1), self.shape))
        return tuple(out)

    @cached_property
    def k_squared(self) -> np.ndarray:
        k2 = np.zeros(self.shape)
        for axis in range(self.dim):
            k2 = k2 + self.kvec[axis] ** 2
        return k2

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """True where a mode survives the 2/3-rule (|k_axis| <= N_axis/3)."""
        keep = np.ones(self.shape, dtype=bool)
        for axis in range(self.dim):
            keep &= np.abs(self.kvec[axis]) <= self.shape[axis] // 3
        return keep

    @cached_property
    def tail_mask(self) -> np.ndarray:
        """True on the top third of the spectrum (complement of the 2/3 ball)."""
        return ~self.dealias_mask
