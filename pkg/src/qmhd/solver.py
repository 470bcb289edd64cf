"""Constructive core: semi-implicit density and magnetic solves, the
projected momentum residual, and the per-step fixed-point iteration.

Time discretization is an exponential-midpoint scheme wrapped in a Picard
loop: stiff constant-coefficient pieces (density diffusion, mean magnetic
diffusion) are integrated exactly by spectral factors, the hyperviscous term
is taken at the midpoint inside the velocity solve, and every remaining
nonlinearity is evaluated at the iterated midpoint state.  The converged map
is second-order accurate and time-reversible, which is what the identity
diagnostics measure against.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .basis import GalerkinBasis, MassOperator, VelocityCoeffs
from .constitutive import (
    PhysParams,
    cold_pressure,
    cold_pressure_derivative,
    magnetic_diffusivity,
    pressure,
)
from .errors import (
    DensityFloorViolation,
    MaximumPrincipleViolation,
    PicardDivergence,
    QMHDError,
    SingularMass,
)
from .fields import (
    ScalarField,
    VectorField,
    _forward,
    divergence,
    integrate,
    l2_norm,
    project_divergence_free,
)
from .grid import TorusGrid


@dataclass(frozen=True)
class RegParams:
    """Regularization and discretization constants."""

    epsilon: float = 0.0
    eta: float = 0.0
    delta: float = 0.0
    s: int = 1
    dt: float = 1e-3
    picard_tol: float = 1e-10
    picard_max_iters: int = 50
    density_floor: float = 1e-8

    def __post_init__(self):
        if self.epsilon < 0 or self.eta < 0 or self.delta < 0:
            raise ValueError("epsilon, eta, delta must be nonnegative")
        if self.s < 1 or int(self.s) != self.s:
            raise ValueError("capillarity order s must be a positive integer")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.picard_tol <= 0 or self.picard_max_iters < 1:
            raise ValueError("invalid fixed-point controls")
        if self.density_floor <= 0:
            raise ValueError("density floor must be positive")


@dataclass(frozen=True)
class State:
    """One time level: positive density, velocity in the Galerkin span,
    divergence-free magnetic field."""

    time: float
    rho: ScalarField
    velocity: VelocityCoeffs
    magnetic: VectorField

    @property
    def u(self) -> VectorField:
        return self.velocity.field

    @property
    def basis(self) -> GalerkinBasis:
        return self.velocity.basis

    @cached_property
    def mass(self) -> float:
        return integrate(self.rho)


@dataclass
class StepInfo:
    """Per-step bookkeeping for logging and the contraction diagnostics."""

    picard_iters: int
    update_norms: list[float]
    contraction_ratios: list[float]
    corridor_margin: float
    div_b_norm: float


def initial_state(
    rho: ScalarField,
    velocity: VectorField,
    magnetic: VectorField,
    basis: GalerkinBasis,
    reg: RegParams,
    time: float = 0.0,
) -> State:
    """Build a valid initial state: reject near-vacuum data, project the
    velocity onto the Galerkin span and the magnetic field onto the
    divergence-free subspace."""
    if rho.values.min() < 10.0 * reg.density_floor:
        raise DensityFloorViolation(
            f"initial density minimum {rho.values.min():.3e} is below 10x the floor"
        )
    coeffs = basis.project(velocity)
    b0 = project_divergence_free(magnetic)
    return State(time, rho, VelocityCoeffs(basis, coeffs), b0)


# --------------------------------------------------------------------------
# spectral integrating factors

_FACTORS: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}


def _heat_factors(grid: TorusGrid, coef: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    key = (grid.shape, float(coef), float(dt))
    hit = _FACTORS.get(key)
    if hit is None:
        full = np.exp(-coef * dt * grid.k_squared)
        half = np.exp(-0.5 * coef * dt * grid.k_squared)
        if len(_FACTORS) > 64:
            _FACTORS.clear()
        _FACTORS[key] = hit = (full, half)
    return hit


def _masked_fft(values: np.ndarray, grid: TorusGrid) -> np.ndarray:
    spec = _forward(values, grid)
    spec[grid.tail_mask] = 0.0
    return spec


_INNER_TOL = 1e-13
_INNER_MAX = 24


def solve_density_step(
    rho_old: ScalarField,
    u: VectorField,
    epsilon: float,
    dt: float,
    *,
    density_floor: float = 1e-8,
    corridor_tol: float = 1e-8,
    _guess: ScalarField | None = None,
) -> ScalarField:
    """One advance of the regularized continuity equation with the given
    (time-centered) velocity: diffusion integrated exactly, the advective
    flux dealiased and taken at the midpoint density.

    The result is checked against the density floor and the maximum-principle
    corridor spanned by ``rho_old`` and exp(+-dt * |div u|_inf).
    """
    grid = rho_old.grid
    full, half = _heat_factors(grid, epsilon, dt)
    spec_old = rho_old.spectrum
    vals_old = rho_old.values
    uvals = u.component_values()

    start = rho_old if _guess is None else _guess
    spec_new = start.spectrum
    vals_new = start.values
    for _ in range(_INNER_MAX):
        mid = 0.5 * (vals_old + vals_new)
        div_flux = np.zeros(grid.shape, dtype=np.complex128)
        for axis in range(grid.dim):
            div_flux += 1j * grid.kvec[axis] * _masked_fft(mid * uvals[axis], grid)
        nxt = full * spec_old - dt * half * div_flux
        change = np.linalg.norm(nxt - spec_new)
        spec_new = nxt
        vals_new = np.fft.ifftn(spec_new * grid.num_points).real
        if change <= _INNER_TOL * max(np.linalg.norm(spec_new), 1e-300):
            break
    else:
        raise PicardDivergence("density midpoint iteration stalled; reduce dt")

    new_min = float(vals_new.min())
    new_max = float(vals_new.max())
    if new_min < density_floor:
        raise DensityFloorViolation(
            f"density minimum {new_min:.3e} fell below the floor {density_floor:.3e}"
        )
    div_u = divergence(u).values
    sup = float(np.max(np.abs(div_u)))
    lower = vals_old.min() * np.exp(-abs(dt) * sup)
    upper = vals_old.max() * np.exp(abs(dt) * sup)
    if new_min < lower * (1.0 - corridor_tol) or new_max > upper * (1.0 + corridor_tol):
        raise MaximumPrincipleViolation(
            f"density range [{new_min:.6e}, {new_max:.6e}] left the corridor "
            f"[{lower:.6e}, {upper:.6e}]; reduce dt"
        )
    return ScalarField._adopt(grid, vals_new, spec_new)


def corridor_margin(rho_old: ScalarField, rho_new: ScalarField, u: VectorField, dt: float) -> float:
    """Relative excess of ``rho_new`` over the maximum-principle corridor."""
    sup = float(np.max(np.abs(divergence(u).values)))
    lower = rho_old.values.min() * np.exp(-abs(dt) * sup)
    upper = rho_old.values.max() * np.exp(abs(dt) * sup)
    below = (lower - rho_new.values.min()) / lower
    above = (rho_new.values.max() - upper) / upper
    return float(max(below, above, 0.0))


def solve_magnetic_step(
    B_old: VectorField,
    u: VectorField,
    rho: ScalarField,
    dt: float,
    phys: PhysParams,
    *,
    density_floor: float = 1e-8,
    _guess: VectorField | None = None,
) -> VectorField:
    """One advance of the induction equation with given (time-centered)
    velocity and density: mean diffusivity integrated exactly, transport and
    the variable-diffusivity remainder at the midpoint, then a final
    divergence-free projection."""
    grid = B_old.grid
    if rho.values.min() < density_floor:
        raise DensityFloorViolation("magnetic solve: density below the floor")
    nu_vals = magnetic_diffusivity(rho.values, phys)
    nu_bar = float(nu_vals.mean())
    nu_fluct = nu_vals - nu_bar
    full, half = _heat_factors(grid, nu_bar, dt)

    spec_old = [c.spectrum for c in B_old.components]
    vals_old = B_old.component_values()
    uvals = u.component_values()
    k = grid.kvec

    start = B_old if _guess is None else _guess
    spec_new = [c.spectrum for c in start.components]
    vals_new = [c.values for c in start.components]
    for _ in range(_INNER_MAX):
        mid = [0.5 * (o + n) for o, n in zip(vals_old, vals_new)]
        # electromotive field u x B at the midpoint
        emf = [
            _masked_fft(uvals[1] * mid[2] - uvals[2] * mid[1], grid),
            _masked_fft(uvals[2] * mid[0] - uvals[0] * mid[2], grid),
            _masked_fft(uvals[0] * mid[1] - uvals[1] * mid[0], grid),
        ]
        # variable-coefficient part of the resistive term
        mid_spec = [0.5 * (o + n) for o, n in zip(spec_old, spec_new)]
        curl_mid = [
            np.fft.ifftn((1j * (k[1] * mid_spec[2] - k[2] * mid_spec[1])) * grid.num_points).real,
            np.fft.ifftn((1j * (k[2] * mid_spec[0] - k[0] * mid_spec[2])) * grid.num_points).real,
            np.fft.ifftn((1j * (k[0] * mid_spec[1] - k[1] * mid_spec[0])) * grid.num_points).real,
        ]
        g = [_masked_fft(nu_fluct * c, grid) for c in curl_mid]
        rhs = [e - gg for e, gg in zip(emf, g)]
        curl_rhs = [
            1j * (k[1] * rhs[2] - k[2] * rhs[1]),
            1j * (k[2] * rhs[0] - k[0] * rhs[2]),
            1j * (k[0] * rhs[1] - k[1] * rhs[0]),
        ]
        nxt = [full * so + dt * half * cr for so, cr in zip(spec_old, curl_rhs)]
        change = sum(np.linalg.norm(a - b) for a, b in zip(nxt, spec_new))
        scale = sum(np.linalg.norm(a) for a in nxt)
        spec_new = nxt
        vals_new = [np.fft.ifftn(sn * grid.num_points).real for sn in spec_new]
        if change <= _INNER_TOL * max(scale, 1e-300):
            break
    else:
        raise PicardDivergence("magnetic midpoint iteration stalled; reduce dt")

    out = VectorField(grid, [ScalarField._adopt(grid, v, s) for v, s in zip(vals_new, spec_new)])
    return project_divergence_free(out)


def momentum_residual(
    rho: ScalarField,
    velocity: VelocityCoeffs,
    B: VectorField,
    phys: PhysParams,
    reg: RegParams,
) -> np.ndarray:
    """Weak momentum right-hand side tested against every basis mode.

    Entry i collects convection, pressure work, the conservative quantum
    force, the diffusion-correction term, high-order capillarity in its
    transposed form, viscosity, hyperviscosity and the Lorentz force.
    """
    grid = rho.grid
    basis = velocity.basis
    if rho.values.min() < reg.density_floor:
        raise DensityFloorViolation("momentum residual: density below the floor")

    u = velocity.field
    uvals = u.component_values()
    rvals = rho.values
    k = grid.kvec
    dim = grid.dim

    force_spec = [np.zeros(grid.shape, dtype=np.complex128) for _ in range(3)]

    # convection: - sum_j d_j (rho u_j u_l)
    mom = [np.fft.ifftn(_masked_fft(rvals * uvals[j], grid) * grid.num_points).real for j in range(3)]
    for l in range(3):
        for j in range(dim):
            force_spec[l] -= 1j * k[j] * _masked_fft(mom[j] * uvals[l], grid)

    # pressure: - grad (P + Pc)
    p_spec = _masked_fft(pressure(rvals, phys) + cold_pressure(rvals, phys), grid)
    for l in range(dim):
        force_spec[l] -= 1j * k[l] * p_spec

    # velocity gradient (d_j u_l for active j), shared by viscosity and the
    # diffusion-correction term
    u_spec = [c.spectrum for c in u.components]
    du = [[np.fft.ifftn(1j * k[j] * u_spec[l] * grid.num_points).real for l in range(3)] for j in range(dim)]

    # viscosity: + 2 sum_j d_j (rho D(u)_jl)
    for l in range(3):
        for j in range(dim):
            d_jl = 0.5 * (du[j][l] + (du[l][j] if l < dim else 0.0))
            force_spec[l] += 2j * k[j] * _masked_fft(rvals * d_jl, grid)

    # hyperviscosity is exact on the eigenbasis: -eta |k|^4 lambda
    hyper = -reg.eta * basis.eigen_k2**2 * velocity.values if reg.eta else 0.0

    # diffusion correction: - epsilon (grad rho . grad) u
    if reg.epsilon:
        r_spec = rho.spectrum
        dr = [np.fft.ifftn(1j * k[j] * r_spec * grid.num_points).real for j in range(dim)]
        for l in range(3):
            corr = np.zeros(grid.shape)
            for j in range(dim):
                corr += dr[j] * du[j][l]
            force_spec[l] -= reg.epsilon * _masked_fft(corr, grid)

    # quantum force, conservative form
    if phys.kappa:
        w = np.sqrt(rvals)
        w_spec = _forward(w, grid)
        dw = [np.fft.ifftn(1j * k[j] * w_spec * grid.num_points).real for j in range(dim)]
        kap2 = phys.kappa**2
        lap_r = -grid.k_squared * rho.spectrum
        for l in range(dim):
            force_spec[l] += kap2 * 1j * k[l] * lap_r
            for j in range(dim):
                force_spec[l] -= 4.0 * kap2 * 1j * k[j] * _masked_fft(dw[j] * dw[l], grid)

    # Lorentz force: (curl B) x B
    b_spec = [c.spectrum for c in B.components]
    cb = [
        np.fft.ifftn(1j * (k[1] * b_spec[2] - k[2] * b_spec[1]) * grid.num_points).real,
        np.fft.ifftn(1j * (k[2] * b_spec[0] - k[0] * b_spec[2]) * grid.num_points).real,
        np.fft.ifftn(1j * (k[0] * b_spec[1] - k[1] * b_spec[0]) * grid.num_points).real,
    ]
    bvals = B.component_values()
    force_spec[0] += _masked_fft(cb[1] * bvals[2] - cb[2] * bvals[1], grid)
    force_spec[1] += _masked_fft(cb[2] * bvals[0] - cb[0] * bvals[2], grid)
    force_spec[2] += _masked_fft(cb[0] * bvals[1] - cb[1] * bvals[0], grid)

    entries = basis.project_force_spectra(force_spec)
    if reg.eta:
        entries += hyper

    # capillarity, transposed weak form per mode:
    # - delta < lap^s div(rho e_i), lap^(s+1) rho >
    if reg.delta:
        s = reg.s
        weight_cap = grid.volume * ((-grid.k_squared) ** s)
        target = np.conj(((-grid.k_squared) ** (s + 1)) * rho.spectrum)
        for i, mode in enumerate(basis.modes):
            axis = mode.component
            if axis >= dim:
                continue
            prod = _masked_fft(rvals * basis.profiles[i], grid)
            div_spec = 1j * k[axis] * prod
            entries[i] -= reg.delta * float(np.sum((weight_cap * div_spec) * target).real)

    return entries


def advance_step(
    state: State,
    phys: PhysParams,
    reg: RegParams,
    *,
    dt: float | None = None,
    _mass_old: MassOperator | None = None,
) -> tuple[State, StepInfo]:
    """One time step of the coupled system via the fixed-point loop:
    density solve, magnetic solve, then the velocity update through the
    density-weighted Gram operator.  Raises :class:`PicardDivergence` when
    the iteration stops contracting (halve dt and retry)."""
    basis = state.basis
    grid = state.rho.grid
    h = reg.dt if dt is None else dt
    lam_old = state.velocity.values
    rho_old = state.rho
    b_old = state.magnetic

    mass_old = _mass_old if _mass_old is not None else MassOperator(basis, rho_old)
    rhs_base = mass_old.apply(lam_old)
    hyper_diag = reg.eta * basis.eigen_k2**2 if reg.eta else None

    lam_k = lam_old.copy()
    rho_new = rho_old
    b_new = b_old
    update_norms: list[float] = []
    ratios: list[float] = []
    converged = False

    for it in range(reg.picard_max_iters):
        lam_mid = 0.5 * (lam_old + lam_k)
        vel_mid = VelocityCoeffs(basis, lam_mid)
        u_mid = vel_mid.field
        rho_new = solve_density_step(
            rho_old,
            u_mid,
            reg.epsilon,
            h,
            density_floor=reg.density_floor,
            _guess=rho_new if it else None,
        )
        rho_mid = ScalarField._adopt(grid, 0.5 * (rho_old.values + rho_new.values))
        b_new = solve_magnetic_step(
            b_old,
            u_mid,
            rho_mid,
            h,
            phys,
            density_floor=reg.density_floor,
            _guess=b_new if it else None,
        )
        b_mid = VectorField(
            grid,
            [
                ScalarField._adopt(grid, 0.5 * (o.values + n.values))
                for o, n in zip(b_old.components, b_new.components)
            ],
        )
        n_mid = momentum_residual(rho_mid, vel_mid, b_mid, phys, reg)

        mass_new = MassOperator(basis, rho_new)
        if hyper_diag is None:
            lam_next = mass_new.solve(rhs_base + h * n_mid)
        else:
            # hyperviscous midpoint folded into the matrix: unconditionally
            # stable for arbitrarily stiff eta |k|^4
            a = mass_new.matrix + (0.5 * h * reg.eta) * np.diag(basis.eigen_k2**2)
            try:
                fac = cho_factor(a, lower=True)
            except LinAlgError as exc:  # pragma: no cover - eta >= 0 keeps A SPD
                raise SingularMass("shifted velocity system lost definiteness") from exc
            rhs = rhs_base + h * n_mid + (0.5 * h) * hyper_diag * lam_k
            lam_next = cho_solve(fac, rhs)

        upd = float(np.linalg.norm(lam_next - lam_k))
        denom = max(float(np.linalg.norm(lam_next)), 1e-8)
        if update_norms:
            prev = update_norms[-1]
            noise = 100.0 * np.finfo(float).eps * denom
            if prev > noise:
                ratios.append(upd / prev)
        update_norms.append(upd)
        lam_k = lam_next
        if upd <= reg.picard_tol * denom:
            converged = True
            break
        if len(ratios) >= 2 and ratios[-1] >= 1.0 and ratios[-2] >= 1.0:
            if upd > 1e4 * np.finfo(float).eps * denom:
                raise PicardDivergence(
                    f"fixed-point updates stopped contracting (ratio {ratios[-1]:.3f}); halve dt"
                )

    if not converged:
        raise PicardDivergence(
            f"no fixed-point convergence in {reg.picard_max_iters} iterations; halve dt"
        )

    margin = corridor_margin(rho_old, rho_new, VelocityCoeffs(basis, 0.5 * (lam_old + lam_k)).field, h)
    div_b = l2_norm(divergence(b_new))
    new_state = State(state.time + h, rho_new, VelocityCoeffs(basis, lam_k), b_new)
    info = StepInfo(
        picard_iters=len(update_norms),
        update_norms=update_norms,
        contraction_ratios=ratios,
        corridor_margin=margin,
        div_b_norm=div_b,
    )
    return new_state, info


@dataclass
class Trajectory:
    """Sampled states of one run plus per-step bookkeeping."""

    times: list[float]
    states: list[State]
    step_infos: list[StepInfo]
    dt: float
    sample_every: int
    phys: PhysParams
    reg: RegParams

    @property
    def sampled_dt(self) -> float:
        return self.dt * self.sample_every

    @property
    def final_state(self) -> State:
        return self.states[-1]

    def max_contraction_ratio(self) -> float:
        worst = 0.0
        for info in self.step_infos:
            if info.contraction_ratios:
                worst = max(worst, max(info.contraction_ratios))
        return worst


def run_simulation(
    initial: State,
    phys: PhysParams,
    reg: RegParams,
    t_end: float,
    *,
    sample_every: int = 1,
    callbacks: Sequence[Callable[[State, int], None]] = (),
    snapshot_writer: Callable[[State, int], None] | None = None,
) -> Trajectory:
    """March from ``initial.time`` to ``t_end`` in fixed steps of ``reg.dt``,
    sampling every ``sample_every`` steps (the initial state is always the
    first sample).  Deterministic for a fixed configuration."""
    span = t_end - initial.time
    if span < 0:
        raise ValueError("t_end must not precede the initial time")
    nsteps = int(round(span / reg.dt))
    if abs(nsteps * reg.dt - span) > 1e-8 * max(abs(span), reg.dt):
        raise ValueError("t_end - t0 must be an integer multiple of dt")

    mass0 = initial.mass
    state = initial
    times = [state.time]
    states = [state]
    infos: list[StepInfo] = []
    for cb in callbacks:
        cb(state, 0)
    if snapshot_writer is not None:
        snapshot_writer(state, 0)

    mass_cache: MassOperator | None = None
    for step in range(1, nsteps + 1):
        state, info = advance_step(state, phys, reg, _mass_old=mass_cache)
        mass_cache = MassOperator(state.basis, state.rho)
        infos.append(info)

        drift = abs(state.mass - mass0) / max(abs(mass0), 1e-300)
        if drift > 1e-10:
            raise QMHDError(f"mass conservation broke: relative drift {drift:.3e}")
        b_scale = max(l2_norm(state.magnetic), 1e-300)
        if info.div_b_norm > 1e-12 * max(b_scale, 1.0):
            raise QMHDError(f"magnetic field stopped being solenoidal: {info.div_b_norm:.3e}")

        if step % sample_every == 0:
            times.append(state.time)
            states.append(state)
        for cb in callbacks:
            cb(state, step)
        if snapshot_writer is not None and step % sample_every == 0:
            snapshot_writer(state, step)

    return Trajectory(times, states, infos, reg.dt, sample_every, phys, reg)


def cfl_report(state: State, phys: PhysParams, reg: RegParams) -> dict[str, float]:
    """Advisory stability numbers for the configured step (no adaptivity)."""
    grid = state.rho.grid
    dx = min(grid.spacing)
    umax = max(float(np.max(np.abs(c))) for c in state.u.component_values())
    kmax2 = float(np.max(grid.k_squared))
    kb = float(np.sqrt(np.max(state.basis.eigen_k2))) if state.basis.n else 0.0
    nu_vals = magnetic_diffusivity(state.rho.values, phys)
    nu_bar = float(nu_vals.mean())
    rho_bar = float(state.rho.values.mean())
    sound = float(
        np.sqrt(phys.gamma * rho_bar ** (phys.gamma - 1.0) + cold_pressure_derivative(rho_bar, phys))
    )
    return {
        "advective": umax * reg.dt / dx,
        "density_diffusion_exact": reg.epsilon * kmax2 * reg.dt,
        "magnetic_mean_exact": nu_bar * kmax2 * reg.dt,
        "magnetic_fluctuation": float(np.max(np.abs(nu_vals - nu_bar))) * kmax2 * reg.dt,
        "hyperviscous_midpoint": reg.eta * kb**4 * reg.dt,
        "acoustic": sound * kb * reg.dt,
        "capillary_wave": float(np.sqrt(reg.delta * rho_bar)) * kb ** (2 * reg.s + 2) * reg.dt,
        "quantum_wave": phys.kappa * kb**2 * reg.dt,
    }
