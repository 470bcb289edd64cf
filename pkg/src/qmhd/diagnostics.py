"""Numerical verification of the conservation structure: the energy
identity, the BD (Bresch-Desjardins) entropy identity, the quantum-force
algebraic identity, the log-Sobolev-type inequality record, weak-form
residuals against a battery of space-time test functions, and the norm
monitors consumed by the limit experiments.

Time derivatives of the functionals are centered differences on stored
snapshots, so the residuals measure what the scheme actually produced; with
the second-order stepper they shrink at second order in the step size.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, fields as dc_fields
from typing import Callable, Sequence

import numpy as np

from .constitutive import (
    PhysParams,
    bohm_force_divergence_form,
    bohm_force_hessian_form,
    bohm_force_primary,
    cold_enthalpy,
    cold_enthalpy_second,
    cold_pressure,
    cold_pressure_derivative,
    enthalpy,
    enthalpy_second,
    magnetic_diffusivity,
    pressure,
)
from .errors import DensityFloorViolation, NonuniformSampling
from .fields import (
    ScalarField,
    VectorField,
    curl,
    derivative,
    divergence,
    gradient,
    inner_product,
    l2_norm,
    laplacian,
    lp_norm,
    sobolev_seminorm,
)
from .solver import RegParams, State, Trajectory


# --------------------------------------------------------------------------
# pointwise tensor helpers


def _check_floor(rho: ScalarField, floor: float, context: str) -> np.ndarray:
    vals = rho.values
    if vals.min() < floor:
        raise DensityFloorViolation(f"{context}: density below the floor")
    return vals


def velocity_gradient(u: VectorField) -> list[list[np.ndarray]]:
    """d_j u_l for active j (rows), all three components l (columns)."""
    grid = u.grid
    return [[derivative(u.components[l], j).values for l in range(3)] for j in range(grid.dim)]


def strain_frobenius_sq(u: VectorField) -> np.ndarray:
    """|D(u)|^2 pointwise, D the symmetric velocity gradient (full tensor)."""
    grid = u.grid
    dim = grid.dim
    du = velocity_gradient(u)
    total = np.zeros(grid.shape)
    for j in range(3):
        for l in range(3):
            a = du[j][l] if j < dim else 0.0
            b = du[l][j] if l < dim else 0.0
            total = total + (0.5 * (a + b)) ** 2
    return total


def spin_frobenius_sq(u: VectorField) -> np.ndarray:
    """|A(u)|^2 pointwise, A the antisymmetric velocity gradient."""
    grid = u.grid
    dim = grid.dim
    du = velocity_gradient(u)
    total = np.zeros(grid.shape)
    for j in range(3):
        for l in range(3):
            a = du[j][l] if j < dim else 0.0
            b = du[l][j] if l < dim else 0.0
            total = total + (0.5 * (a - b)) ** 2
    return total


def hessian_frobenius_sq(f: ScalarField) -> np.ndarray:
    grid = f.grid
    total = np.zeros(grid.shape)
    for j in range(grid.dim):
        dj = derivative(f, j)
        for l in range(grid.dim):
            total = total + derivative(dj, l).values ** 2
    return total


def grad_sq(f: ScalarField) -> np.ndarray:
    grid = f.grid
    total = np.zeros(grid.shape)
    for j in range(grid.dim):
        total = total + derivative(f, j).values ** 2
    return total


# --------------------------------------------------------------------------
# energy identity


@dataclass(frozen=True)
class EnergyReport:
    """Term-by-term values of the energy functional."""

    kinetic: float
    internal: float
    cold: float
    quantum: float
    magnetic: float
    capillary: float

    @property
    def total(self) -> float:
        return self.kinetic + self.internal + self.cold + self.quantum + self.magnetic + self.capillary

    def as_dict(self) -> dict[str, float]:
        d = asdict(self)
        d["total"] = self.total
        return d


@dataclass(frozen=True)
class DissipationReport:
    """Term-by-term dissipation integrals; every entry is a weighted square."""

    viscous: float
    pressure_diss: float
    magnetic_diss: float
    hyper: float
    capillary_diss: float
    quantum_diss: float

    @property
    def total(self) -> float:
        return (
            self.viscous
            + self.pressure_diss
            + self.magnetic_diss
            + self.hyper
            + self.capillary_diss
            + self.quantum_diss
        )

    def as_dict(self) -> dict[str, float]:
        d = asdict(self)
        d["total"] = self.total
        return d


def compute_energy_fields(
    rho: ScalarField, u: VectorField, B: VectorField, phys: PhysParams, reg: RegParams
) -> EnergyReport:
    grid = rho.grid
    rvals = _check_floor(rho, reg.density_floor, "energy")
    uvals = u.component_values()
    kinetic = 0.5 * float((rvals * sum(v * v for v in uvals)).mean() * grid.volume)
    internal = float(enthalpy(rvals, phys).mean() * grid.volume)
    cold = float(cold_enthalpy(rvals, phys).mean() * grid.volume)
    w = ScalarField._adopt(grid, np.sqrt(rvals))
    # note the factor 2: with the quantum force 2 kappa^2 rho grad(lap w / w)
    # the conserved quantity carries 2 kappa^2 |grad sqrt(rho)|^2
    quantum = 2.0 * phys.kappa**2 * float((grad_sq(w)).mean() * grid.volume)
    magnetic = 0.5 * sum(l2_norm(c) ** 2 for c in B.components)
    capillary = 0.5 * reg.delta * sobolev_seminorm(rho, 2 * reg.s + 1) ** 2
    return EnergyReport(kinetic, internal, cold, quantum, magnetic, capillary)


def compute_energy(state: State, phys: PhysParams, reg: RegParams) -> EnergyReport:
    return compute_energy_fields(state.rho, state.u, state.magnetic, phys, reg)


def compute_dissipation_fields(
    rho: ScalarField, u: VectorField, B: VectorField, phys: PhysParams, reg: RegParams
) -> DissipationReport:
    grid = rho.grid
    rvals = _check_floor(rho, reg.density_floor, "dissipation")
    viscous = 2.0 * float((rvals * strain_frobenius_sq(u)).mean() * grid.volume)
    gr2 = grad_sq(rho)
    pressure_diss = reg.epsilon * float(
        ((enthalpy_second(rvals, phys) + cold_enthalpy_second(rvals, phys)) * gr2).mean() * grid.volume
    )
    cb = curl(B)
    magnetic_diss = float(
        (magnetic_diffusivity(rvals, phys) * sum(c.values**2 for c in cb.components)).mean()
        * grid.volume
    )
    hyper = reg.eta * sum(l2_norm(laplacian(c)) ** 2 for c in u.components)
    capillary_diss = reg.delta * reg.epsilon * sobolev_seminorm(rho, 2 * (reg.s + 1)) ** 2
    logr = ScalarField._adopt(grid, np.log(rvals))
    quantum_diss = (
        reg.epsilon
        * phys.kappa**2
        * float((rvals * hessian_frobenius_sq(logr)).mean() * grid.volume)
    )
    return DissipationReport(viscous, pressure_diss, magnetic_diss, hyper, capillary_diss, quantum_diss)


def compute_dissipation(state: State, phys: PhysParams, reg: RegParams) -> DissipationReport:
    return compute_dissipation_fields(state.rho, state.u, state.magnetic, phys, reg)


@dataclass
class ResidualSeries:
    times: np.ndarray
    raw: np.ndarray
    relative: np.ndarray


def _require_uniform(traj: Trajectory) -> float:
    times = np.asarray(traj.times)
    if times.size < 3:
        raise NonuniformSampling("need at least 3 uniformly spaced samples")
    steps = np.diff(times)
    h = steps[0]
    if np.max(np.abs(steps - h)) > 1e-12 * max(abs(h), 1.0):
        raise NonuniformSampling("trajectory samples are not uniformly spaced")
    return float(h)


def energy_identity_residual(traj: Trajectory) -> ResidualSeries:
    """Centered-difference energy rate plus dissipation, per interior sample."""
    h = _require_uniform(traj)
    phys, reg = traj.phys, traj.reg
    energies = [compute_energy(s, phys, reg).total for s in traj.states]
    dissip = [compute_dissipation(s, phys, reg) for s in traj.states]
    times, raw, rel = [], [], []
    for k in range(1, len(traj.states) - 1):
        dedt = (energies[k + 1] - energies[k - 1]) / (2.0 * h)
        d = dissip[k]
        r = dedt + d.total
        scale = max(abs(dedt), *(abs(v) for v in asdict(d).values()), 1e-300)
        times.append(traj.times[k])
        raw.append(r)
        rel.append(r / scale)
    return ResidualSeries(np.array(times), np.array(raw), np.array(rel))


# --------------------------------------------------------------------------
# BD entropy identity


@dataclass(frozen=True)
class BDEntropyReport:
    """One snapshot of the BD entropy balance.

    ``lhs_*`` entries are the dissipation integrals that sit with the time
    derivative; ``rhs_*`` entries are the exchange terms.  The identity reads
    d/dt bd_energy + sum(lhs) = sum(rhs).
    """

    bd_energy: float
    lhs_hyper: float
    lhs_antisymmetric: float
    lhs_pressure_gradient: float
    lhs_quantum_hessian: float
    lhs_quantum_hessian_eps: float
    lhs_magnetic: float
    lhs_capillary_eps: float
    lhs_capillary: float
    lhs_pressure_gradient_eps: float
    rhs_density_laplacian: float
    rhs_velocity_gradient: float
    rhs_log_gradient_laplacian: float
    rhs_hyperviscous: float
    rhs_mass_flux: float
    rhs_lorentz: float
    spot_density_laplacian: float

    @property
    def lhs_total(self) -> float:
        return (
            self.lhs_hyper
            + self.lhs_antisymmetric
            + self.lhs_pressure_gradient
            + self.lhs_quantum_hessian
            + self.lhs_quantum_hessian_eps
            + self.lhs_magnetic
            + self.lhs_capillary_eps
            + self.lhs_capillary
            + self.lhs_pressure_gradient_eps
        )

    @property
    def rhs_total(self) -> float:
        return (
            self.rhs_density_laplacian
            + self.rhs_velocity_gradient
            + self.rhs_log_gradient_laplacian
            + self.rhs_hyperviscous
            + self.rhs_mass_flux
            + self.rhs_lorentz
        )

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def bd_entropy_report_fields(
    rho: ScalarField, u: VectorField, B: VectorField, phys: PhysParams, reg: RegParams
) -> BDEntropyReport:
    grid = rho.grid
    rvals = _check_floor(rho, reg.density_floor, "bd entropy")
    uvals = u.component_values()
    eps, eta, delta, kappa = reg.epsilon, reg.eta, reg.delta, phys.kappa

    logr = ScalarField._adopt(grid, np.log(rvals))
    phi = 2.0 * logr
    gphi = gradient(phi)
    gphi_vals = gphi.component_values()
    w = ScalarField._adopt(grid, np.sqrt(rvals))

    # augmented energy with the gradient-shifted velocity
    shifted = [uvals[l] + gphi_vals[l] for l in range(3)]
    bd_energy = 0.5 * float((rvals * sum(v * v for v in shifted)).mean() * grid.volume)
    bd_energy += float((enthalpy(rvals, phys) + cold_enthalpy(rvals, phys)).mean() * grid.volume)
    bd_energy += 2.0 * kappa**2 * float(grad_sq(w).mean() * grid.volume)
    bd_energy += 0.5 * sum(l2_norm(c) ** 2 for c in B.components)
    bd_energy += 0.5 * delta * sobolev_seminorm(rho, 2 * reg.s + 1) ** 2

    ptot_prime = cold_pressure_derivative(rvals, phys) + phys.gamma * rvals ** (phys.gamma - 1.0)
    gr2 = grad_sq(rho)
    hess_log = hessian_frobenius_sq(logr)
    cb = curl(B)

    lhs_hyper = eta * sum(l2_norm(laplacian(c)) ** 2 for c in u.components)
    lhs_antisymmetric = 2.0 * float((rvals * spin_frobenius_sq(u)).mean() * grid.volume)
    lhs_pressure_gradient = 2.0 * float((ptot_prime / rvals * gr2).mean() * grid.volume)
    lhs_quantum_hessian = 2.0 * kappa**2 * float((rvals * hess_log).mean() * grid.volume)
    lhs_quantum_hessian_eps = eps * kappa**2 * float((rvals * hess_log).mean() * grid.volume)
    lhs_magnetic = float(
        (magnetic_diffusivity(rvals, phys) * sum(c.values**2 for c in cb.components)).mean()
        * grid.volume
    )
    cap_sq = sobolev_seminorm(rho, 2 * (reg.s + 1)) ** 2
    lhs_capillary_eps = eps * delta * cap_sq
    lhs_capillary = 2.0 * delta * cap_sq
    lhs_pressure_gradient_eps = eps * float((ptot_prime / rvals * gr2).mean() * grid.volume)

    lap_r = laplacian(rho)
    phi_prime_lap = ScalarField._adopt(grid, 2.0 / rvals * lap_r.values)
    g_pl = gradient(phi_prime_lap)
    rhs_density_laplacian = eps * float(
        (rvals * sum(a.values * b.values for a, b in zip(gphi.components, g_pl.components))).mean()
        * grid.volume
    )
    spot_density_laplacian = -4.0 * eps * float((lap_r.values**2 / rvals).mean() * grid.volume)

    du = velocity_gradient(u)
    dr = [derivative(rho, j).values for j in range(grid.dim)]
    coupling = np.zeros(grid.shape)
    for j in range(grid.dim):
        for l in range(grid.dim):
            coupling = coupling + dr[j] * du[j][l] * gphi_vals[l]
    rhs_velocity_gradient = -eps * float(coupling.mean() * grid.volume)

    rhs_log_gradient_laplacian = eps * float(
        (0.5 * sum(v * v for v in gphi_vals) * lap_r.values).mean() * grid.volume
    )

    rhs_hyperviscous = -eta * float(
        sum(
            (laplacian(u.components[l]).values * laplacian(gphi.components[l]).values)
            for l in range(grid.dim)
        ).mean()
        * grid.volume
    )

    div_m = divergence(
        VectorField.from_arrays(grid, [rvals * uvals[l] for l in range(3)])
    ).values
    rhs_mass_flux = -eps * float((div_m * phi_prime_lap.values).mean() * grid.volume)

    bvals = B.component_values()
    cbv = [c.values for c in cb.components]
    lorentz = [
        cbv[1] * bvals[2] - cbv[2] * bvals[1],
        cbv[2] * bvals[0] - cbv[0] * bvals[2],
        cbv[0] * bvals[1] - cbv[1] * bvals[0],
    ]
    rhs_lorentz = float(
        sum(lorentz[l] * gphi_vals[l] for l in range(3)).mean() * grid.volume
    )

    return BDEntropyReport(
        bd_energy=bd_energy,
        lhs_hyper=lhs_hyper,
        lhs_antisymmetric=lhs_antisymmetric,
        lhs_pressure_gradient=lhs_pressure_gradient,
        lhs_quantum_hessian=lhs_quantum_hessian,
        lhs_quantum_hessian_eps=lhs_quantum_hessian_eps,
        lhs_magnetic=lhs_magnetic,
        lhs_capillary_eps=lhs_capillary_eps,
        lhs_capillary=lhs_capillary,
        lhs_pressure_gradient_eps=lhs_pressure_gradient_eps,
        rhs_density_laplacian=rhs_density_laplacian,
        rhs_velocity_gradient=rhs_velocity_gradient,
        rhs_log_gradient_laplacian=rhs_log_gradient_laplacian,
        rhs_hyperviscous=rhs_hyperviscous,
        rhs_mass_flux=rhs_mass_flux,
        rhs_lorentz=rhs_lorentz,
        spot_density_laplacian=spot_density_laplacian,
    )


def bd_entropy_report(state: State, phys: PhysParams, reg: RegParams) -> BDEntropyReport:
    return bd_entropy_report_fields(state.rho, state.u, state.magnetic, phys, reg)


def bd_entropy_residual(traj: Trajectory) -> tuple[ResidualSeries, list[BDEntropyReport]]:
    h = _require_uniform(traj)
    reports = [bd_entropy_report(s, traj.phys, traj.reg) for s in traj.states]
    times, raw, rel = [], [], []
    for k in range(1, len(traj.states) - 1):
        dedt = (reports[k + 1].bd_energy - reports[k - 1].bd_energy) / (2.0 * h)
        r = dedt + reports[k].lhs_total - reports[k].rhs_total
        scale = max(abs(dedt), abs(reports[k].lhs_total), abs(reports[k].rhs_total), 1e-300)
        times.append(traj.times[k])
        raw.append(r)
        rel.append(r / scale)
    return ResidualSeries(np.array(times), np.array(raw), np.array(rel)), reports


# --------------------------------------------------------------------------
# quantum force identity and inequality record


@dataclass(frozen=True)
class BohmIdentityReport:
    primary_vs_divergence: float
    primary_vs_hessian: float
    divergence_vs_hessian: float


def bohm_identity_check(rho: ScalarField, kappa: float, floor: float = 1e-8) -> BohmIdentityReport:
    """Pairwise L2 distances of the three force forms, normalized by kappa^2."""
    if kappa == 0.0:
        return BohmIdentityReport(0.0, 0.0, 0.0)
    f1 = bohm_force_primary(rho, kappa, floor)
    f2 = bohm_force_divergence_form(rho, kappa, floor)
    f3 = bohm_force_hessian_form(rho, kappa, floor)

    def dist(a: VectorField, b: VectorField) -> float:
        return float(
            np.sqrt(
                sum(
                    ((x.values - y.values) ** 2).mean() * rho.grid.volume
                    for x, y in zip(a.components, b.components)
                )
            )
            / kappa**2
        )

    return BohmIdentityReport(dist(f1, f2), dist(f1, f3), dist(f2, f3))


@dataclass(frozen=True)
class QuantumInequalityReport:
    """All integrals of the second-order log-density inequality, plus the
    empirically admissible constants against both candidate right sides."""

    hess_sqrt: float
    quartic_gradient: float
    gradient_rhs: float
    hessian_rhs: float
    c1_gradient: float
    c2_gradient: float
    c1_hessian: float
    c2_hessian: float


def quantum_inequality_check(rho: ScalarField, floor: float = 1e-8) -> QuantumInequalityReport:
    grid = rho.grid
    rvals = _check_floor(rho, floor, "quantum inequality")
    w = ScalarField._adopt(grid, np.sqrt(rvals))
    q = ScalarField._adopt(grid, rvals**0.25)
    logr = ScalarField._adopt(grid, np.log(rvals))
    hess_sqrt = float(hessian_frobenius_sq(w).mean() * grid.volume)
    quartic = float((grad_sq(q) ** 2).mean() * grid.volume)
    grad_rhs = float((rvals * grad_sq(logr)).mean() * grid.volume)
    hess_rhs = float((rvals * hessian_frobenius_sq(logr)).mean() * grid.volume)

    def ratio(num: float, den: float) -> float:
        return num / den if den > 0 else np.inf

    return QuantumInequalityReport(
        hess_sqrt=hess_sqrt,
        quartic_gradient=quartic,
        gradient_rhs=grad_rhs,
        hessian_rhs=hess_rhs,
        c1_gradient=ratio(grad_rhs, hess_sqrt),
        c2_gradient=ratio(grad_rhs, quartic),
        c1_hessian=ratio(hess_rhs, hess_sqrt),
        c2_hessian=ratio(hess_rhs, quartic),
    )


# --------------------------------------------------------------------------
# weak-form residuals


@dataclass(frozen=True)
class TestFunction:
    """Separable space-time test function g(t) * phi(x) with g(T) = 0."""

    name: str
    spatial: ScalarField | VectorField
    envelope: Callable[[float], float]

    def g(self, t: float) -> float:
        return float(self.envelope(t))


def default_scalar_battery(grid, t_final: float) -> list[TestFunction]:
    mesh = grid.mesh
    env = lambda t: (1.0 - t / t_final) ** 2
    fns = [
        TestFunction("const", ScalarField(grid, np.ones(grid.shape)), env),
        TestFunction("cos_x", ScalarField(grid, np.cos(mesh[0])), env),
        TestFunction("sin_x", ScalarField(grid, np.sin(mesh[0])), env),
    ]
    if grid.dim >= 2:
        fns.append(TestFunction("cos_y", ScalarField(grid, np.cos(mesh[1])), env))
    return fns


def default_vector_battery(grid, t_final: float) -> list[TestFunction]:
    mesh = grid.mesh
    env = lambda t: (1.0 - t / t_final) ** 2
    zero = np.zeros(grid.shape)
    items = [
        ("e0_sin_x", [np.sin(mesh[0]), zero, zero]),
        ("e1_cos_x", [zero, np.cos(mesh[0]), zero]),
        ("e2_sin_x", [zero, zero, np.sin(mesh[0])]),
    ]
    if grid.dim >= 2:
        items.append(("e0_cos_y", [np.cos(mesh[1]), zero, zero]))
    return [TestFunction(name, VectorField.from_arrays(grid, arrs), env) for name, arrs in items]


def _midpoint_pairs(traj: Trajectory):
    for k in range(len(traj.states) - 1):
        yield traj.states[k], traj.states[k + 1], traj.times[k], traj.times[k + 1]


def weak_form_residual(
    traj: Trajectory,
    scalar_battery: Sequence[TestFunction] | None = None,
    vector_battery: Sequence[TestFunction] | None = None,
) -> dict[str, dict[str, float]]:
    """Distributional residuals of continuity, momentum and induction over
    the sampled trajectory, one number per test function.

    Quadrature is midpoint-in-time with the summation-by-parts pairing, so a
    conservative scheme telescopes the continuity item to solver tolerance
    when the density diffusion is off.
    """
    h = _require_uniform(traj)
    grid = traj.states[0].rho.grid
    phys = traj.phys
    t_final = traj.times[-1]
    if scalar_battery is None:
        scalar_battery = default_scalar_battery(grid, t_final)
    if vector_battery is None:
        vector_battery = default_vector_battery(grid, t_final)

    from .fields import dealiased_product

    out: dict[str, dict[str, float]] = {"continuity": {}, "momentum": {}, "magnetic": {}}

    # continuity -----------------------------------------------------------
    for tf in scalar_battery:
        phi = tf.spatial
        gphi = gradient(phi)
        r = tf.g(traj.times[0]) * inner_product(traj.states[0].rho, phi)
        for s0, s1, t0, t1 in _midpoint_pairs(traj):
            g0, g1 = tf.g(t0), tf.g(t1)
            gmid = 0.5 * (g0 + g1)
            rho_mid = ScalarField._adopt(grid, 0.5 * (s0.rho.values + s1.rho.values))
            u_mid = VectorField(
                grid,
                [
                    ScalarField._adopt(grid, 0.5 * (a.values + b.values))
                    for a, b in zip(s0.u.components, s1.u.components)
                ],
            )
            r += (g1 - g0) * inner_product(rho_mid, phi)
            flux = sum(
                inner_product(dealiased_product(rho_mid, u_mid.components[l]), gphi.components[l])
                for l in range(grid.dim)
            )
            r += h * gmid * flux
        out["continuity"][tf.name] = float(r)

    # momentum (sqrt-density factored form) --------------------------------
    for tf in vector_battery:
        phi = tf.spatial
        pvals = phi.component_values()
        gphi = [[derivative(phi.components[l], j).values for l in range(3)] for j in range(grid.dim)]
        div_phi = divergence(phi)
        lap_phi = [laplacian(c).values for c in phi.components]
        grad_div_phi = gradient(div_phi)
        m0 = [
            traj.states[0].rho.values * traj.states[0].u.component_values()[l] for l in range(3)
        ]
        r = tf.g(traj.times[0]) * float(
            sum((m0[l] * pvals[l]).mean() for l in range(3)) * grid.volume
        )
        for s0, s1, t0, t1 in _midpoint_pairs(traj):
            g0, g1 = tf.g(t0), tf.g(t1)
            gmid = 0.5 * (g0 + g1)
            rv = 0.5 * (s0.rho.values + s1.rho.values)
            uv = [
                0.5 * (a + b)
                for a, b in zip(s0.u.component_values(), s1.u.component_values())
            ]
            bv = [
                0.5 * (a.values + b.values)
                for a, b in zip(s0.magnetic.components, s1.magnetic.components)
            ]
            wv = 0.5 * (np.sqrt(s0.rho.values) + np.sqrt(s1.rho.values))
            wfield = ScalarField._adopt(grid, wv)
            dw = [derivative(wfield, j).values for j in range(grid.dim)]
            mv = [rv * uv[l] for l in range(3)]

            r += (g1 - g0) * float(sum((mv[l] * pvals[l]).mean() for l in range(3)) * grid.volume)

            term = 0.0
            # transport: rho u (x) u : grad phi
            for j in range(grid.dim):
                for l in range(3):
                    term += float((rv * uv[j] * uv[l] * gphi[j][l]).mean() * grid.volume)
            # pressure work
            ptot = pressure(rv, phys) + cold_pressure(rv, phys)
            term += float((ptot * div_phi.values).mean() * grid.volume)
            # viscosity in the factored form
            for j in range(grid.dim):
                for l in range(3):
                    term += 2.0 * float((dw[j] * wv * uv[l] * gphi[j][l]).mean() * grid.volume)
                    if l < grid.dim:
                        term += 2.0 * float((wv * uv[j] * dw[l] * gphi[j][l]).mean() * grid.volume)
            for l in range(3):
                term += float((rv * uv[l] * lap_phi[l]).mean() * grid.volume)
            for l in range(grid.dim):
                term += float((rv * uv[l] * grad_div_phi.components[l].values).mean() * grid.volume)
            # quantum terms in the integrated-by-parts form
            if phys.kappa:
                kap2 = phys.kappa**2
                for l in range(grid.dim):
                    term += 2.0 * kap2 * float(
                        (wv * dw[l] * grad_div_phi.components[l].values).mean() * grid.volume
                    )
                for j in range(grid.dim):
                    for l in range(grid.dim):
                        term += 4.0 * kap2 * float((dw[j] * dw[l] * gphi[j][l]).mean() * grid.volume)
            # Lorentz force
            cbx = derivative(ScalarField._adopt(grid, bv[2]), 1).values - derivative(
                ScalarField._adopt(grid, bv[1]), 2
            ).values
            cby = derivative(ScalarField._adopt(grid, bv[0]), 2).values - derivative(
                ScalarField._adopt(grid, bv[2]), 0
            ).values
            cbz = derivative(ScalarField._adopt(grid, bv[1]), 0).values - derivative(
                ScalarField._adopt(grid, bv[0]), 1
            ).values
            lor = [
                cby * bv[2] - cbz * bv[1],
                cbz * bv[0] - cbx * bv[2],
                cbx * bv[1] - cby * bv[0],
            ]
            term += float(sum((lor[l] * pvals[l]).mean() for l in range(3)) * grid.volume)
            r += h * gmid * term
        out["momentum"][tf.name] = float(r)

    # induction -------------------------------------------------------------
    for tf in vector_battery:
        phi = tf.spatial
        cphi = curl(phi)
        cphi_vals = cphi.component_values()
        pvals = phi.component_values()
        b0 = traj.states[0].magnetic.component_values()
        r = tf.g(traj.times[0]) * float(
            sum((b0[l] * pvals[l]).mean() for l in range(3)) * grid.volume
        )
        for s0, s1, t0, t1 in _midpoint_pairs(traj):
            g0, g1 = tf.g(t0), tf.g(t1)
            gmid = 0.5 * (g0 + g1)
            rv = 0.5 * (s0.rho.values + s1.rho.values)
            uv = [
                0.5 * (a + b)
                for a, b in zip(s0.u.component_values(), s1.u.component_values())
            ]
            bv = [
                0.5 * (a.values + b.values)
                for a, b in zip(s0.magnetic.components, s1.magnetic.components)
            ]
            r += (g1 - g0) * float(sum((bv[l] * pvals[l]).mean() for l in range(3)) * grid.volume)
            emf = [
                uv[1] * bv[2] - uv[2] * bv[1],
                uv[2] * bv[0] - uv[0] * bv[2],
                uv[0] * bv[1] - uv[1] * bv[0],
            ]
            term = float(sum((emf[l] * cphi_vals[l]).mean() for l in range(3)) * grid.volume)
            bmid = VectorField.from_arrays(grid, bv)
            cb = curl(bmid)
            nu = magnetic_diffusivity(rv, phys)
            term -= float(
                (nu * sum(cb.components[l].values * cphi_vals[l] for l in range(3))).mean()
                * grid.volume
            )
            r += h * gmid * term
        out["magnetic"][tf.name] = float(r)

    return out


# --------------------------------------------------------------------------
# norm monitors


MONITOR_KEYS = (
    "rho_Lgamma",
    "inv_rho_Lgamma_minus",
    "grad_sqrt_rho_L2",
    "sqrt_rho_u_L2",
    "sqrt_rho_Du_L2",
    "grad_rho_gamma_half_L2",
    "B_L2",
    "grad_B_L2",
    "inv_rho_Linf",
    "sqrt_rho_H2",
    "grad_rho_quarter_L4",
)


def norm_monitor(state: State, phys: PhysParams, reg: RegParams) -> dict[str, float]:
    """The catalog of norms the a priori bounds control, one value each."""
    grid = state.rho.grid
    rvals = _check_floor(state.rho, reg.density_floor, "norm monitor")
    uvals = state.u.component_values()
    w = ScalarField._adopt(grid, np.sqrt(rvals))
    q = ScalarField._adopt(grid, rvals**0.25)
    rg = ScalarField._adopt(grid, rvals ** (phys.gamma / 2.0))
    h2 = np.sqrt(
        l2_norm(w) ** 2 + sobolev_seminorm(w, 1) ** 2 + sobolev_seminorm(w, 2) ** 2
    )
    return {
        "rho_Lgamma": lp_norm(state.rho, phys.gamma),
        "inv_rho_Lgamma_minus": lp_norm(ScalarField._adopt(grid, 1.0 / rvals), phys.gamma_minus),
        "grad_sqrt_rho_L2": sobolev_seminorm(w, 1),
        "sqrt_rho_u_L2": float(
            np.sqrt((rvals * sum(v * v for v in uvals)).mean() * grid.volume)
        ),
        "sqrt_rho_Du_L2": float(
            np.sqrt((rvals * strain_frobenius_sq(state.u)).mean() * grid.volume)
        ),
        "grad_rho_gamma_half_L2": sobolev_seminorm(rg, 1),
        "B_L2": float(np.sqrt(sum(l2_norm(c) ** 2 for c in state.magnetic.components))),
        "grad_B_L2": float(
            np.sqrt(sum(sobolev_seminorm(c, 1) ** 2 for c in state.magnetic.components))
        ),
        "inv_rho_Linf": float(1.0 / rvals.min()),
        "sqrt_rho_H2": float(h2),
        "grad_rho_quarter_L4": float(((grad_sq(q) ** 2).mean() * grid.volume) ** 0.25),
    }


# --------------------------------------------------------------------------
# CSV emission

SCHEMA_VERSION = 1


class DiagnosticsWriter:
    """One CSV row per sampled state, fixed column order, versioned header."""

    def __init__(self, path, phys: PhysParams, reg: RegParams):
        self.path = path
        self.phys = phys
        self.reg = reg
        energy_cols = [f.name for f in dc_fields(EnergyReport)] + ["energy_total"]
        diss_cols = [f.name for f in dc_fields(DissipationReport)] + ["dissipation_total"]
        self.columns = (
            ["time"]
            + energy_cols
            + diss_cols
            + list(MONITOR_KEYS)
            + ["min_rho", "mass", "div_b", "picard_iters", "picard_max_ratio", "schema_version"]
        )
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(self.columns)

    def write_row(self, state: State, info=None) -> None:
        e = compute_energy(state, self.phys, self.reg)
        d = compute_dissipation(state, self.phys, self.reg)
        mon = norm_monitor(state, self.phys, self.reg)
        div_b = l2_norm(divergence(state.magnetic))
        iters = info.picard_iters if info is not None else 0
        ratio = (
            max(info.contraction_ratios) if info is not None and info.contraction_ratios else 0.0
        )
        row = (
            [repr(float(state.time))]
            + [repr(float(v)) for v in e.as_dict().values()]
            + [repr(float(v)) for v in d.as_dict().values()]
            + [repr(float(mon[k])) for k in MONITOR_KEYS]
            + [
                repr(float(state.rho.values.min())),
                repr(float(state.mass)),
                repr(float(div_b)),
                str(iters),
                repr(float(ratio)),
                str(SCHEMA_VERSION),
            ]
        )
        self._writer.writerow(row)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
