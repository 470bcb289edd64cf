"""Parameter-limit studies: Galerkin refinement, vanishing regularization
(epsilon and eta slaved to delta), and the vanishing-Planck-constant limit.

Each sweep runs one simulation per rung from shared initial data, measures
solution distances against the final (limit) rung, archives the norm
monitors, and evaluates the weak integrals of the terms that are supposed to
vanish.  Everything is deterministic for a fixed configuration.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .basis import GalerkinBasis
from .constitutive import PhysParams
from .diagnostics import MONITOR_KEYS, compute_energy, default_vector_battery, norm_monitor
from .errors import QMHDError
from .fields import (
    ScalarField,
    VectorField,
    dealias,
    derivative,
    divergence,
    gradient,
    inner_product,
    project_divergence_free,
    spectral_resample,
)
from .grid import TorusGrid
from .solver import RegParams, State, Trajectory, initial_state, run_simulation

BENCHMARK_NAMES = ("single_mode", "density_bump", "random_smooth")


def benchmark_fields(name: str, grid: TorusGrid, seed: int = 0):
    """The three canonical initial data sets (strictly positive density)."""
    mesh = grid.mesh
    x = mesh[0]
    y = mesh[1] if grid.dim >= 2 else None
    zero = np.zeros(grid.shape)
    if name == "single_mode":
        rho = np.ones(grid.shape)
        u = [zero, 0.2 * np.sin(x), zero]
        b = [zero, zero, 0.1 * np.sin(x)]
        if y is not None:
            u = [0.1 * np.sin(y), 0.2 * np.sin(x), zero]
            b = [zero, zero, 0.1 * np.sin(x) + 0.05 * np.cos(y)]
    elif name == "density_bump":
        rho = 1.0 + 0.5 * np.cos(x)
        if y is not None:
            rho = rho + 0.1 * np.cos(y)
        u = [zero, zero, zero]
        b = [zero, zero, 0.1 * np.sin(x)]
    elif name == "random_smooth":
        rng = np.random.default_rng(seed)
        def band_limited():
            spec = np.zeros(grid.shape, dtype=np.complex128)
            for axis_k in np.ndindex(*([5] * grid.dim)):
                k = tuple(kk - 2 for kk in axis_k)
                if all(v == 0 for v in k):
                    continue
                idx = tuple(k[a] % grid.shape[a] for a in range(grid.dim))
                spec[idx] = rng.normal() + 1j * rng.normal()
            f = ScalarField.from_spectrum(grid, spec)
            m = np.max(np.abs(f.values))
            return f.values / max(m, 1e-300)
        rho = 1.0 + 0.25 * band_limited()
        u = [0.1 * band_limited() for _ in range(3)]
        b = [0.1 * band_limited() for _ in range(3)]
    else:
        raise ValueError(f"unknown benchmark {name!r}; pick one of {BENCHMARK_NAMES}")
    rho_f = ScalarField(grid, rho)
    u_f = VectorField.from_arrays(grid, u)
    b_f = project_divergence_free(VectorField.from_arrays(grid, b))
    return rho_f, u_f, b_f


def benchmark_state(
    name: str, grid: TorusGrid, basis: GalerkinBasis, reg: RegParams, seed: int = 0
) -> State:
    rho, u, b = benchmark_fields(name, grid, seed)
    return initial_state(rho, u, b, basis, reg)


# --------------------------------------------------------------------------
# state and trajectory distances


@dataclass(frozen=True)
class StateDistance:
    sqrt_rho: float
    rho: float
    momentum: float
    sqrt_rho_u: float
    magnetic: float
    velocity: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def _common_grid_fields(a: State, b: State):
    ga, gb = a.rho.grid, b.rho.grid
    if ga.shape == gb.shape:
        return a, b
    fine = ga if ga.num_points >= gb.num_points else gb
    def lift(s: State):
        if s.rho.grid.shape == fine.shape:
            return s.rho, s.u, s.magnetic
        rho = spectral_resample(s.rho, fine)
        u = VectorField(fine, [spectral_resample(c, fine) for c in s.u.components])
        bb = VectorField(fine, [spectral_resample(c, fine) for c in s.magnetic.components])
        return rho, u, bb
    return lift(a), lift(b)


def compare_states(a: State, b: State) -> StateDistance:
    """L2 distances of the fields the limit theorems control."""
    if a.rho.grid.shape == b.rho.grid.shape:
        ra, ua, ba = a.rho, a.u, a.magnetic
        rb, ub, bb = b.rho, b.u, b.magnetic
    else:
        (ra, ua, ba), (rb, ub, bb) = _common_grid_fields(a, b)
    grid = ra.grid
    vol = grid.volume
    rva, rvb = ra.values, rb.values
    wa, wb = np.sqrt(rva), np.sqrt(rvb)
    uva, uvb = [c.values for c in ua.components], [c.values for c in ub.components]
    bva, bvb = [c.values for c in ba.components], [c.values for c in bb.components]

    def l2(diff_sq) -> float:
        return float(np.sqrt(np.mean(diff_sq) * vol))

    return StateDistance(
        sqrt_rho=l2((wa - wb) ** 2),
        rho=l2((rva - rvb) ** 2),
        momentum=l2(sum((rva * a_ - rvb * b_) ** 2 for a_, b_ in zip(uva, uvb))),
        sqrt_rho_u=l2(sum((wa * a_ - wb * b_) ** 2 for a_, b_ in zip(uva, uvb))),
        magnetic=l2(sum((a_ - b_) ** 2 for a_, b_ in zip(bva, bvb))),
        velocity=l2(sum((a_ - b_) ** 2 for a_, b_ in zip(uva, uvb))),
    )


def trajectory_distance(a: Trajectory, b: Trajectory) -> dict[str, float]:
    """Space-time L2 distances over the common sample times (trapezoid)."""
    ta, tb = np.asarray(a.times), np.asarray(b.times)
    if len(ta) != len(tb) or np.max(np.abs(ta - tb)) > 1e-10:
        raise QMHDError("trajectories must share their sample times")
    keys = list(StateDistance.__annotations__)
    sq = {k: 0.0 for k in keys}
    h = a.sampled_dt
    for i, (sa, sb) in enumerate(zip(a.states, b.states)):
        d = compare_states(sa, sb).as_dict()
        wgt = 0.5 if i in (0, len(a.states) - 1) else 1.0
        for k in keys:
            sq[k] += wgt * h * d[k] ** 2
    return {k: float(np.sqrt(v)) for k, v in sq.items()}


# --------------------------------------------------------------------------
# weak integrals of the vanishing terms


def quantum_term_weak_integral(
    traj: Trajectory, kappa: float, battery=None
) -> dict[str, float]:
    """Space-time weak integral of the quantum force in its integrated-by-
    parts form; reports the value and value/kappa^2."""
    grid = traj.states[0].rho.grid
    if battery is None:
        battery = default_vector_battery(grid, traj.times[-1])
    if kappa == 0.0:
        return {"value": 0.0, "per_kappa_sq": 0.0}
    h = traj.sampled_dt
    total = 0.0
    for tf in battery:
        phi = tf.spatial
        gphi = [[derivative(phi.components[l], j).values for l in range(3)] for j in range(grid.dim)]
        gdiv = gradient(divergence(phi))
        acc = 0.0
        for i, s in enumerate(traj.states):
            w = ScalarField._adopt(grid, np.sqrt(s.rho.values))
            dw = [derivative(w, j).values for j in range(grid.dim)]
            inner = 0.0
            for l in range(grid.dim):
                inner += float((w.values * dw[l] * gdiv.components[l].values).mean() * grid.volume)
            for j in range(grid.dim):
                for l in range(grid.dim):
                    inner += 2.0 * float((dw[j] * dw[l] * gphi[j][l]).mean() * grid.volume)
            wgt = 0.5 if i in (0, len(traj.states) - 1) else 1.0
            acc += wgt * h * tf.g(traj.times[i]) * inner
        total += 2.0 * kappa**2 * acc
    return {"value": float(total), "per_kappa_sq": float(total / kappa**2)}


def capillarity_term_weak_integral(
    traj: Trajectory, delta: float, s_order: int, battery=None
) -> dict[str, float]:
    """Space-time weak integral of the capillarity term in transposed form;
    reports the value and the value scaled by delta^((1-alpha)/2) with
    alpha = (4s+2)/(4s+3)."""
    grid = traj.states[0].rho.grid
    if battery is None:
        battery = default_vector_battery(grid, traj.times[-1])
    if delta == 0.0:
        return {"value": 0.0, "scaled": 0.0}
    h = traj.sampled_dt
    total = 0.0
    for tf in battery:
        phi = tf.spatial
        acc = 0.0
        for i, st in enumerate(traj.states):
            rho = st.rho
            # lap^s moved across: pair lap^(2s+1) rho against div(rho phi)
            hi_field = ScalarField._adopt(
                grid, None, (-grid.k_squared) ** (2 * s_order + 1) * rho.spectrum
            )
            inner = 0.0
            for l in range(grid.dim):
                prod = dealias(ScalarField._adopt(grid, rho.values * phi.components[l].values))
                inner += inner_product(hi_field, derivative(prod, l))
            wgt = 0.5 if i in (0, len(traj.states) - 1) else 1.0
            acc += wgt * h * tf.g(traj.times[i]) * inner
        total += -delta * acc
    alpha = (4.0 * s_order + 2.0) / (4.0 * s_order + 3.0)
    return {"value": float(total), "scaled": float(total / delta ** ((1.0 - alpha) / 2.0))}


# --------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class Coupling:
    """Slaved parameter rule: target = coeff * value ** exponent."""

    target: str
    coeff: float
    exponent: float


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    benchmark: str
    dim: int
    points: int
    t_end: float
    phys: PhysParams = field(default_factory=PhysParams)
    reg: RegParams = field(default_factory=RegParams)
    n_modes: int = 9
    couplings: tuple[Coupling, ...] = ()
    sample_every: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.parameter not in ("n", "epsilon", "eta", "delta", "kappa"):
            raise ValueError(f"unknown sweep parameter {self.parameter!r}")
        vals = tuple(self.values)
        if len(vals) < 3:
            raise ValueError("a ladder needs at least 3 rungs")
        diffs = np.diff(np.asarray(vals, dtype=float))
        if self.parameter == "n":
            if not np.all(diffs > 0):
                raise ValueError("mode-count ladders must be strictly increasing")
        else:
            if not np.all(diffs < 0):
                raise ValueError("parameter ladders must be strictly decreasing")
            if any(v < 0 for v in vals):
                raise ValueError("ladder values must be nonnegative")
        object.__setattr__(self, "values", vals)

    def rung_params(self, value) -> tuple[PhysParams, RegParams, int]:
        phys, reg, n = self.phys, self.reg, self.n_modes
        if self.parameter == "kappa":
            phys = replace(phys, kappa=float(value))
        elif self.parameter == "n":
            n = int(value)
        else:
            reg = replace(reg, **{self.parameter: float(value)})
        for rule in self.couplings:
            coupled = rule.coeff * float(value) ** rule.exponent
            if rule.target == "kappa":
                phys = replace(phys, kappa=coupled)
            else:
                reg = replace(reg, **{rule.target: coupled})
        return phys, reg, n


@dataclass
class RungResult:
    value: float
    monitors_max: dict[str, float]
    min_rho: float
    capillary_energy_max: float
    quantum_energy_max: float
    weak_integrals: dict[str, float]
    distance_to_reference: dict[str, float]
    tail_energy: float | None = None


@dataclass
class SweepResult:
    spec: SweepSpec
    rungs: list[RungResult]
    convergence_orders: dict[str, float]


def _run_rung(spec: SweepSpec, value) -> tuple[Trajectory, RungResult]:
    grid = TorusGrid((spec.points,) * spec.dim)
    phys, reg, n = spec.rung_params(value)
    basis = GalerkinBasis.lowest_modes(grid, n)
    state = benchmark_state(spec.benchmark, grid, basis, reg, seed=spec.seed)
    traj = run_simulation(state, phys, reg, spec.t_end, sample_every=spec.sample_every)

    monitors = {k: 0.0 for k in MONITOR_KEYS}
    min_rho = np.inf
    cap_max = 0.0
    quant_max = 0.0
    for s in traj.states:
        mon = norm_monitor(s, phys, reg)
        for k in MONITOR_KEYS:
            monitors[k] = max(monitors[k], mon[k])
        min_rho = min(min_rho, float(s.rho.values.min()))
        e = compute_energy(s, phys, reg)
        cap_max = max(cap_max, e.capillary)
        quant_max = max(quant_max, e.quantum)

    weak: dict[str, float] = {}
    if spec.parameter == "kappa":
        weak = quantum_term_weak_integral(traj, phys.kappa)
    elif spec.parameter == "delta":
        weak = capillarity_term_weak_integral(traj, reg.delta, reg.s)

    rung = RungResult(
        value=float(value),
        monitors_max=monitors,
        min_rho=float(min_rho),
        capillary_energy_max=cap_max,
        quantum_energy_max=quant_max,
        weak_integrals=weak,
        distance_to_reference={},
    )
    return traj, rung


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Execute every rung, measure distances to the final (limit) rung."""
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(_run_rung, [spec] * len(spec.values), spec.values))
    else:
        pairs = [_run_rung(spec, v) for v in spec.values]
    trajectories = [p[0] for p in pairs]
    rungs = [p[1] for p in pairs]

    reference = trajectories[-1]
    for i, traj in enumerate(trajectories):
        if i == len(trajectories) - 1:
            rungs[i].distance_to_reference = {k: 0.0 for k in StateDistance.__annotations__}
        else:
            rungs[i].distance_to_reference = trajectory_distance(traj, reference)

    if spec.parameter == "n":
        ref_final = reference.final_state.velocity.values
        for rung in rungs:
            n1 = int(rung.value)
            rung.tail_energy = float(np.sum(ref_final[n1:] ** 2))

    orders: dict[str, float] = {}
    vals = np.array([r.value for r in rungs[:-1]], dtype=float)
    if spec.parameter != "n" and np.all(vals > 0):
        for key in StateDistance.__annotations__:
            dists = np.array([r.distance_to_reference[key] for r in rungs[:-1]])
            good = dists > 0
            if good.sum() >= 2:
                slope, _ = np.polyfit(np.log(vals[good]), np.log(dists[good]), 1)
                orders[key] = float(slope)
    return SweepResult(spec, rungs, orders)


def sweep_rows(result: SweepResult) -> list[dict[str, float]]:
    """Flat per-rung rows (for CSV emission)."""
    rows = []
    for rung in result.rungs:
        row: dict[str, float] = {"value": rung.value, "min_rho": rung.min_rho}
        row["capillary_energy_max"] = rung.capillary_energy_max
        row["quantum_energy_max"] = rung.quantum_energy_max
        for k, v in rung.monitors_max.items():
            row[f"max_{k}"] = v
        for k, v in rung.distance_to_reference.items():
            row[f"dist_{k}"] = v
        for k, v in rung.weak_integrals.items():
            row[f"weak_{k}"] = v
        if rung.tail_energy is not None:
            row["tail_energy"] = rung.tail_energy
        rows.append(row)
    return rows


def content_hash(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()
