"""Transverse-field Ising scenarios under global or local dephasing.

A scenario wires together the symmetry basis of total spin, a dephasing
noise model, the Monte Carlo ensemble and the cumulant prediction, and
collects the resulting numbers in a :class:`ScenarioReport`.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import fff
from .basis import QBasis, build_qbasis, sector_decompose
from .noise import NoiseModel, PsdSpec, correlation_length
from .operators import SIGMA_X, SIGMA_Y, SIGMA_Z, embed, trace_distance
from .propagation import Schedule, ensemble_average, ideal_propagate

MAX_QUBITS = 6


class ConfigError(ValueError):
    """Inconsistent or out-of-range scenario configuration."""


class InvariantViolation(RuntimeError):
    """A structural property that must hold was violated."""


def build_j_squared(n: int) -> np.ndarray:
    """Total spin ``J^2`` of ``n`` qubits with ``J_a = 1/2 sum_i sigma_a^(i)``."""
    if n < 1:
        raise ConfigError("need at least one qubit")
    out = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for s in (SIGMA_X, SIGMA_Y, SIGMA_Z):
        ja = sum(embed(s, i, n) for i in range(n)) / 2
        out += ja @ ja
    return out


@dataclass
class TfimConfig:
    """Ising couplings, transverse field and time grid.

    ``topology`` is ``"all-to-all"`` (uniform ``J`` on every pair),
    ``"chain"`` (open nearest-neighbour) or ``"matrix"`` with explicit
    ``couplings``. Duration is ``duration`` if set, else ``tau_factor`` times
    the noise correlation length.
    """

    n: int = 3
    coupling: float = 1.0
    field: float = 1.0
    topology: str = "all-to-all"
    couplings: Optional[list] = None
    tau_factor: float = 2.0
    duration: Optional[float] = None
    dt: Optional[float] = None
    allow_large: bool = False

    def validate(self) -> None:
        if self.n < 2:
            raise ConfigError("TFIM needs n >= 2")
        if self.n > MAX_QUBITS and not self.allow_large:
            raise ConfigError(f"n={self.n} exceeds {MAX_QUBITS}; set allow_large to override")
        if self.topology not in ("all-to-all", "chain", "matrix"):
            raise ConfigError(f"unknown topology {self.topology!r}")
        j = self.coupling_matrix()
        if not np.allclose(j, j.T) or np.any(np.diag(j) != 0):
            raise ConfigError("couplings must be symmetric with zero diagonal")
        if self.duration is not None and self.duration <= 0:
            raise ConfigError("duration must be positive")
        if self.duration is None and self.tau_factor <= 0:
            raise ConfigError("tau_factor must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ConfigError("dt must be positive")

    def coupling_matrix(self) -> np.ndarray:
        n = self.n
        if self.topology == "matrix":
            if self.couplings is None:
                raise ConfigError("topology 'matrix' needs explicit couplings")
            j = np.asarray(self.couplings, dtype=float)
            if j.shape != (n, n):
                raise ConfigError(f"coupling matrix must be {n}x{n}")
            return j
        j = np.zeros((n, n))
        if self.topology == "chain":
            for i in range(n - 1):
                j[i, i + 1] = j[i + 1, i] = self.coupling
        else:
            j[:] = self.coupling
            np.fill_diagonal(j, 0.0)
        return j


def tfim_hamiltonian(config: TfimConfig) -> np.ndarray:
    """``sum_{i<j} J_ij Z_i Z_j + h sum_i X_i``."""
    n = config.n
    j = config.coupling_matrix()
    z = [embed(SIGMA_Z, i, n) for i in range(n)]
    h = sum(j[a, b] * z[a] @ z[b] for a in range(n) for b in range(a + 1, n))
    h = h + config.field * sum(embed(SIGMA_X, i, n) for i in range(n))
    return np.asarray(h, dtype=complex)


def build_tfim(config: TfimConfig, tau: Optional[float] = None, omega_uv: Optional[float] = None) -> Schedule:
    """Constant TFIM Hamiltonian on a uniform grid, checked against ``J^2``.

    The step defaults to ``pi / (4 omega_uv)`` when a noise cutoff is given and
    ``0.1 / ||H_0||`` otherwise.
    """
    config.validate()
    h0 = tfim_hamiltonian(config)
    if config.duration is not None:
        duration = config.duration
    elif tau is not None:
        duration = config.tau_factor * tau
    else:
        raise ConfigError("duration unset and no correlation length available")
    if config.dt is not None:
        dt = config.dt
    elif omega_uv is not None:
        dt = np.pi / (4 * omega_uv)
    else:
        dt = 0.1 / max(np.linalg.norm(h0, 2), 1e-12)
    return Schedule.constant(h0, duration, dt, symmetry=build_j_squared(config.n))


def build_dephasing(n: int, kind: str, psd: PsdSpec, n_modes: Optional[int] = None) -> NoiseModel:
    """``sigma_z`` noise on every qubit: one shared (global) or independent (local) process."""
    if kind not in ("global", "local"):
        raise ConfigError(f"dephasing kind must be 'global' or 'local', got {kind!r}")
    ops = tuple(embed(SIGMA_Z, i, n) for i in range(n))
    corr = np.ones((n, n)) if kind == "global" else np.eye(n)
    kwargs = {} if n_modes is None else {"n_modes": n_modes}
    return NoiseModel(ops, (psd,) * n, corr, **kwargs)


def initial_state(n: int, spec: str = "plus") -> np.ndarray:
    """``plus`` for ``|+>^n``, ``zeros`` for ``|0...0>`` or ``basis:<bits>``."""
    dim = 2 ** n
    if spec == "plus":
        v = np.ones(dim) / np.sqrt(dim)
    elif spec == "zeros":
        v = np.zeros(dim)
        v[0] = 1
    elif spec.startswith("basis:"):
        bits = spec.split(":", 1)[1]
        if len(bits) != n or set(bits) - {"0", "1"}:
            raise ConfigError(f"basis state needs {n} bits, got {bits!r}")
        v = np.zeros(dim)
        v[int(bits, 2)] = 1
    else:
        raise ConfigError(f"unknown initial state {spec!r}")
    return np.outer(v, v).astype(complex)


SCENARIOS = {
    "figure2a": {"noise": "global", "tau_factor": 2.0, "long_time": False},
    "figure2b": {"noise": "local", "tau_factor": 2.0, "long_time": False},
    "figure3a": {"noise": "global", "tau_factor": 50.0, "long_time": True},
    "figure3b": {"noise": "local", "tau_factor": 50.0, "long_time": True},
    "custom": {},
}


@dataclass
class ScenarioConfig:
    """Everything needed to reproduce a scenario run.

    ``s0_tau`` sets the noise strength as the dimensionless product of the
    spectral maximum and the correlation length; ``s0`` overrides it with an
    absolute spectral maximum.
    """

    name: str = "custom"
    tfim: TfimConfig = field(default_factory=TfimConfig)
    noise: str = "local"
    psd_kind: str = "pink"
    omega_ir: float = 0.2
    omega_uv: float = 20.0
    tau_c: float = 0.5
    s0_tau: float = 1.0
    s0: Optional[float] = None
    trajectories: int = 20000
    seed: int = 0
    initial: str = "plus"
    long_time: bool = False
    mc_long: bool = False
    run_mc: bool = True
    antithetic: bool = False
    control_variate: bool = False
    quadrature: str = "step"
    kernel: str = "synthesis"
    n_omega: int = 2000
    with_bounds: bool = True
    checkpoints: int = 8
    workers: Optional[int] = None

    @classmethod
    def preset(cls, name: str, **overrides) -> "ScenarioConfig":
        if name not in SCENARIOS:
            raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
        preset = dict(SCENARIOS[name])
        tfim_over = overrides.pop("tfim", {})
        if isinstance(tfim_over, TfimConfig):
            tfim_over = dataclasses.asdict(tfim_over)
        tfim = TfimConfig(**{**({"tau_factor": preset.pop("tau_factor")} if "tau_factor" in preset else {}),
                             **tfim_over})
        cfg = cls(name=name, tfim=tfim, **{**preset, **overrides})
        if cfg.long_time:
            cfg.with_bounds = overrides.get("with_bounds", False)
            cfg.run_mc = overrides.get("run_mc", cfg.mc_long)
        return cfg

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        name = d.pop("name", "custom")
        known = {f.name for f in dataclasses.fields(cls)}
        tfim_known = {f.name for f in dataclasses.fields(TfimConfig)}
        unknown = set(d) - known - {"tfim"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        tfim = d.pop("tfim", {})
        if set(tfim) - tfim_known:
            raise ConfigError(f"unknown tfim keys: {sorted(set(tfim) - tfim_known)}")
        return cls.preset(name, tfim=tfim, **d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def psd(self, tau: Optional[float] = None) -> PsdSpec:
        """Spectrum at the configured strength (``tau`` of the unit-strength shape if known)."""
        shape = self._shape(1.0)
        if self.s0 is not None:
            target = self.s0
        else:
            if tau is None:
                tau = correlation_length(shape)
            target = self.s0_tau / tau
        return shape.scaled(target / shape.max_value())

    def _shape(self, s0: float) -> PsdSpec:
        if self.psd_kind == "pink":
            if not 0 < self.omega_ir < self.omega_uv:
                raise ConfigError("pink noise needs 0 < omega_ir < omega_uv")
            return PsdSpec.pink(s0 * self.omega_ir, self.omega_ir, self.omega_uv)
        if self.psd_kind == "lorentzian":
            if self.tau_c <= 0:
                raise ConfigError("tau_c must be positive")
            return PsdSpec.lorentzian(s0 / (2 * self.tau_c), self.tau_c, self.omega_uv)
        if self.psd_kind == "white":
            return PsdSpec.white(s0, self.omega_uv)
        raise ConfigError(f"unknown psd kind {self.psd_kind!r}")

    def validate(self) -> None:
        self.tfim.validate()
        if self.noise not in ("global", "local"):
            raise ConfigError("noise must be 'global' or 'local'")
        if self.trajectories < 1:
            raise ConfigError("trajectories must be >= 1")
        if self.s0 is None and self.s0_tau < 0 or (self.s0 is not None and self.s0 < 0):
            raise ConfigError("noise strength must be non-negative")
        if self.quadrature not in ("step", "trapezoid"):
            raise ConfigError("quadrature must be 'step' or 'trapezoid'")
        if self.kernel not in ("synthesis", "quadrature"):
            raise ConfigError("kernel must be 'synthesis' or 'quadrature'")
        if self.psd_kind == "white" and self.s0 is None:
            raise ConfigError("white noise has no correlation length; give an absolute s0")
        if self.tfim.duration is None and self.psd_kind == "white":
            raise ConfigError("white noise needs an absolute duration")
        self._shape(1.0)
        initial_state(self.tfim.n, self.initial)


@dataclass
class Setup:
    config: ScenarioConfig
    basis: QBasis
    model: NoiseModel
    schedule: Schedule
    rho0: np.ndarray
    tau: Optional[float]
    sector: int


def prepare(config: ScenarioConfig) -> Setup:
    """Validate ``config`` and build basis, noise model, schedule and initial state."""
    config.validate()
    n = config.tfim.n
    h0 = tfim_hamiltonian(config.tfim)
    q = build_j_squared(n)
    # refining degenerate sectors by H_0 makes the averaged leakage diagonal
    basis = build_qbasis(sector_decompose(q, refine=h0))
    tau = None if config.psd_kind == "white" else correlation_length(config._shape(1.0))
    psd = config.psd(tau)
    model = build_dephasing(n, config.noise, psd)
    schedule = build_tfim(config.tfim, tau, psd.omega_hi)
    rho0 = initial_state(n, config.initial)
    spec = basis.spectrum
    pops = [np.trace(spec.projector(s) @ rho0).real for s in range(spec.n_sectors)]
    sector = int(np.argmax(pops))
    if pops[sector] < 1 - 1e-9:
        raise ConfigError("initial state must lie in a single symmetry sector")
    return Setup(config, basis, model, schedule, rho0, tau, sector)


def q_basis_matrix(rho, basis: QBasis) -> np.ndarray:
    """``rho`` in the (sector-ordered) eigenbasis of Q."""
    return basis.spectrum.to_eigenbasis(rho)


def state_labels(basis: QBasis) -> list:
    spec = basis.spectrum
    return [f"q={spec.eigenvalues[s]:g}#{k}" for s in range(spec.n_sectors) for k in range(spec.multiplicities[s])]


@dataclass
class LeakageMetrics:
    """Weight of a state outside sector ``q`` in the Q eigenbasis.

    ``outside_population`` sums diagonal entries outside the sector;
    ``outside_offdiag_max`` is the largest off-diagonal magnitude with at
    least one index outside the sector.
    """

    sector_population: float
    outside_population: float
    outside_diag_max: float
    outside_offdiag_max: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def leakage_metrics(rho, basis: QBasis, sector: int) -> LeakageMetrics:
    r = q_basis_matrix(rho, basis)
    sl = basis.spectrum.sector_slice(sector)
    inside = np.zeros(r.shape[0], dtype=bool)
    inside[sl] = True
    outside_pair = ~(inside[:, None] & inside[None, :])
    offdiag = outside_pair & ~np.eye(len(inside), dtype=bool)
    diag = np.diag(r).real
    return LeakageMetrics(
        sector_population=float(diag[inside].sum()),
        outside_population=float(diag[~inside].sum()),
        outside_diag_max=float(np.abs(diag[~inside]).max(initial=0.0)),
        outside_offdiag_max=float(np.abs(r[offdiag]).max(initial=0.0)),
    )


@dataclass
class ScenarioReport:
    """Numbers and matrices produced by :func:`run_scenario`.

    ``rho_mc`` / ``rho_fff`` are in the Q eigenbasis (sector-ordered).
    """

    config: ScenarioConfig
    provenance: dict
    labels: list
    sector_bounds: list
    rho_fff: np.ndarray
    rho_mc: Optional[np.ndarray]
    metrics: dict
    populations: dict
    structure: dict
    spectrum: dict
    bounds: Optional[dict]
    steady: Optional[dict]
    violations: list = field(default_factory=list)
    chi: Optional[dict] = None
    filter_functions: Optional[fff.FilterFunctions] = None
    basis: Optional[QBasis] = None

    def heatmap(self, source: str = "mc") -> np.ndarray:
        rho = self.rho_mc if source == "mc" and self.rho_mc is not None else self.rho_fff
        return np.abs(rho)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "provenance": self.provenance,
            "labels": self.labels,
            "sector_bounds": self.sector_bounds,
            "metrics": self.metrics,
            "populations": self.populations,
            "structure": self.structure,
            "spectrum": self.spectrum,
            "bounds": self.bounds,
            "steady_state": self.steady,
            "violations": self.violations,
            "chi_blocks": self.chi,
        }


def cumulant_for(setup: Setup, schedule: Optional[Schedule] = None):
    """Control matrix, coherence parameters and cumulant on ``schedule``."""
    schedule = schedule or setup.schedule
    cache, rho_t = ideal_propagate(schedule, setup.rho0)
    cm = fff.control_matrix(cache, setup.basis, setup.model)
    cp = fff.coherence_params(cm, setup.model, method=setup.config.quadrature, kernel=setup.config.kernel)
    return cache, rho_t, cm, cp, fff.assemble_cumulant(cp.chi1, cp.chi2, setup.basis)


def _population_curve(setup: Setup, count: int) -> dict:
    """Sector populations of ``exp(C(t))[rho_0(t)]`` at evenly spaced checkpoints."""
    sched = setup.schedule
    spec = setup.basis.spectrum
    ks = np.unique(np.linspace(2, sched.steps, max(count, 1)).round().astype(int))
    times, pops = [], []
    for k in ks:
        sub = Schedule(sched.times[: k + 1], sched.hamiltonians[:k])
        _, rho_t, _, _, c = cumulant_for(setup, sub)
        rho = fff.predict_average_state(c, rho_t)
        times.append(float(sched.times[k]))
        pops.append([float(np.trace(spec.projector(s) @ rho).real) for s in range(spec.n_sectors)])
    return {"times": times, "sectors": [float(v) for v in spec.eigenvalues], "populations": pops}


def run_scenario(config: ScenarioConfig) -> ScenarioReport:
    """Run the Monte Carlo ensemble and the cumulant prediction for one scenario.

    Raises
    ------
    ConfigError
        Before any heavy computation when the configuration is inconsistent.
    """
    setup = prepare(config)
    basis, model, sched = setup.basis, setup.model, setup.schedule
    preserving = config.noise == "global"
    noise_class = "preserving" if preserving else "breaking"
    sector = setup.sector
    cache, rho_t, cm, cp, c = cumulant_for(setup)
    violations = []

    block = fff.block_structure_report(cm, basis)
    if not block["noise_ok"]:
        violations.append(f"control matrix leaves its blocks (residual {block['noise_residual']:.3g})")
    states = [rho_t, basis.spectrum.projector(sector) / basis.spectrum.multiplicities[sector]]
    struct = fff.structure_check(c, noise_class, sector=sector, states=states)
    if not struct.ok:
        violations.append(f"cumulant structure check failed for {noise_class} noise (residual {struct.residual:.3g})")
    spectrum = c.spectrum_report()
    if not spectrum["sym_nsd"]:
        violations.append("symmetric part of the cumulant is not negative semidefinite")

    rho_fff = fff.predict_average_state(c, rho_t)
    metrics = {
        "fff": leakage_metrics(rho_fff, basis, sector).to_dict(),
        "cumulant_norm": c.norm(),
        "s0": model.s0(),
        "s0T": model.s0() * sched.duration,
        "ideal_state_distance": trace_distance(rho_fff, rho_t),
    }

    rho_mc = None
    if config.run_mc:
        ens = ensemble_average(sched, model, config.trajectories, config.seed, setup.rho0,
                               workers=config.workers, antithetic=config.antithetic,
                               control_variate=config.control_variate)
        rho_mc = ens.mean_state
        metrics["mc"] = leakage_metrics(rho_mc, basis, sector).to_dict()
        metrics["statistical_floor"] = ens.statistical_floor
        metrics["integrator_floor"] = sched.steps * np.finfo(float).eps
        metrics["fff_mc_distance"] = trace_distance(rho_fff, rho_mc)
        metrics["fff_mc_distance_plain"] = trace_distance(rho_fff, ens.plain_mean)
        metrics["max_stderr"] = float(ens.stderr.max())

    bounds = None
    ffs = None
    if config.with_bounds:
        ffs = fff.filter_functions(cm, model, method=config.quadrature, n_omega=config.n_omega)
        br = fff.distance_and_bounds(c, rho_t, ffs, model, sector, sched.duration)
        bounds = br.to_dict()
        if not br.ordered():
            violations.append("distance bounds are not ordered D <= sum(psi) <= white-noise bound")
        bounds["route_chi1_rel_diff"] = float(np.abs(ffs.chi1 - cp.chi1).max() / max(np.abs(cp.chi1).max(), 1e-300))

    steady = None
    if config.long_time:
        ss = fff.steady_state(c, sector, noise_class, rho_t)
        steady = {
            "distance_extrapolated": ss.distance_to_predicted,
            "distance_projection": trace_distance(ss.state, ss.predicted),
            "distance_fff_at_T": trace_distance(rho_fff, ss.predicted),
            "kernel_dim": ss.kernel_dim,
            "expected_kernel_dim": ss.expected_kernel_dim,
            "extra_kernel": ss.extra_kernel,
            "gap": ss.gap,
            "s": ss.s,
        }
        if rho_mc is not None:
            steady["distance_mc"] = trace_distance(rho_mc, ss.predicted)
        rho_fff = ss.extrapolated

    spec = basis.spectrum
    provenance = {
        "master_seed": config.seed,
        "trajectories": config.trajectories if config.run_mc else 0,
        "dt": sched.dt,
        "steps": sched.steps,
        "duration": sched.duration,
        "tau": setup.tau,
        "psd": model.psds[0].to_dict(),
        "couplings": config.tfim.coupling_matrix().tolist(),
        "field": config.tfim.field,
        "sector": float(spec.eigenvalues[sector]),
        "n_modes": model.n_modes,
    }
    off = spec.offsets
    return ScenarioReport(
        config=config,
        provenance=provenance,
        labels=state_labels(basis),
        sector_bounds=[[float(spec.eigenvalues[s]), int(off[s]), int(off[s + 1])] for s in range(spec.n_sectors)],
        rho_fff=q_basis_matrix(rho_fff, basis),
        rho_mc=None if rho_mc is None else q_basis_matrix(rho_mc, basis),
        metrics=metrics,
        populations=_population_curve(setup, config.checkpoints) if config.checkpoints else {},
        structure={"control_matrix": block, "cumulant": {"ok": struct.ok, "residual": struct.residual,
                                                         "details": struct.details,
                                                         "offending": [list(o) for o in struct.offending[:20]]}},
        spectrum=spectrum,
        bounds=bounds,
        steady=steady,
        violations=violations,
        chi=fff.chi_blocks(cp.chi1, cp.chi2, basis),
        filter_functions=ffs,
        basis=basis,
    )
