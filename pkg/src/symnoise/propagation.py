"""Piecewise-constant propagation of ideal and noisy dynamics.

Noisy steps use ``exp(-i [H_0(t_k) + sum_mu beta_mu(t_k + dt/2) N_mu] dt)``.
Monte Carlo ensembles are split into fixed-size chunks; chunk partial sums
are combined by a fixed pairwise tree so the mean is bit-identical for any
worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .noise import NoiseModel, Trajectory, check_grid, draw_coefficients, synthesize, trajectory_seed
from .operators import dagger, expm_hermitian_batch, is_hermitian

WORKERS_ENV = "SYMNOISE_WORKERS"
CHUNK = 250


class SymmetryViolation(ValueError):
    """The declared symmetry does not commute with the Hamiltonian."""

    def __init__(self, message, steps=()):
        super().__init__(message)
        self.steps = list(steps)


@dataclass(frozen=True)
class Schedule:
    """Uniform grid ``t_k = k dt`` with ``H_0`` constant on each ``[t_k, t_{k+1})``.

    ``hamiltonians`` has shape ``(K, N, N)``; ``times`` has ``K + 1`` entries.
    """

    times: np.ndarray
    hamiltonians: np.ndarray
    symmetry: Optional[np.ndarray] = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        hams = np.asarray(self.hamiltonians, dtype=complex)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "hamiltonians", hams)
        if len(times) < 3 or hams.shape[0] != len(times) - 1:
            raise ValueError("need K >= 2 steps and one Hamiltonian per step")
        if not np.allclose(np.diff(times), times[1] - times[0], rtol=1e-9, atol=0):
            raise ValueError("time grid must be uniform")
        if not all(is_hermitian(h) for h in hams[:: max(1, len(hams) // 16)]):
            raise ValueError("Hamiltonians must be Hermitian")
        if self.symmetry is not None:
            q = np.asarray(self.symmetry, dtype=complex)
            object.__setattr__(self, "symmetry", q)
            bad = self.symmetry_violations()
            if bad:
                raise SymmetryViolation(f"[Q, H_0(t_k)] != 0 at steps {bad[:10]}", bad)

    @classmethod
    def constant(cls, h0, duration: float, dt: float, symmetry=None) -> "Schedule":
        """Time-independent ``h0`` on ``[0, duration]`` with step close to ``dt``."""
        steps = max(2, int(np.ceil(duration / dt - 1e-9)))
        times = np.linspace(0.0, duration, steps + 1)
        h0 = np.asarray(h0, dtype=complex)
        return cls(times, np.broadcast_to(h0, (steps,) + h0.shape).copy(), symmetry)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def dim(self) -> int:
        return self.hamiltonians.shape[-1]

    def symmetry_violations(self, q=None, rtol: float = 1e-10) -> list:
        """Steps ``k`` where ``max|[Q, H_0(t_k)]| > rtol * max|H_0|``."""
        q = self.symmetry if q is None else np.asarray(q)
        if q is None:
            return []
        comm = q @ self.hamiltonians - self.hamiltonians @ q
        scale = max(np.abs(self.hamiltonians).max(), 1e-300) * max(np.abs(q).max(), 1.0)
        return [int(k) for k in np.nonzero(np.abs(comm).max(axis=(1, 2)) > rtol * scale)[0]]


@dataclass(frozen=True)
class PropagatorCache:
    """Ideal propagators on the grid.

    ``steps[k] = exp(-i H_0(t_k) dt)``, ``forward[k] = U_0(t_k, 0)`` and
    ``anchored[k] = U_0(T, t_k)``.
    """

    schedule: Schedule
    steps: np.ndarray
    forward: np.ndarray
    anchored: np.ndarray


def ideal_propagate(schedule: Schedule, rho0):
    """Noiseless evolution; returns ``(cache, rho_0(T))``."""
    steps = expm_hermitian_batch(schedule.hamiltonians, schedule.dt)
    dim = schedule.dim
    forward = np.empty((schedule.steps + 1, dim, dim), dtype=complex)
    forward[0] = np.eye(dim)
    for k in range(schedule.steps):
        forward[k + 1] = steps[k] @ forward[k]
    anchored = forward[-1] @ dagger(forward)
    anchored[-1] = np.eye(dim)
    cache = PropagatorCache(schedule, steps, forward, anchored)
    u = forward[-1]
    return cache, u @ np.asarray(rho0) @ u.conj().T


def ideal_states(cache: PropagatorCache, rho0) -> np.ndarray:
    """``rho_0(t_k)`` at every grid time."""
    u = cache.forward
    return u @ np.asarray(rho0) @ dagger(u)


def step_averaged_operators(cache: PropagatorCache, ops) -> np.ndarray:
    """``int_{t_k}^{t_{k+1}} U_0(T,s) N U_0(T,s)^dagger ds`` for every step and operator.

    Exact for piecewise-constant ``H_0``; returns shape ``(K, n_ops, N, N)``.
    """
    sched = cache.schedule
    dt = sched.dt
    energies, vecs = np.linalg.eigh(sched.hamiltonians)
    omega = energies[:, :, None] - energies[:, None, :]
    small = np.abs(omega * dt) < 1e-8
    safe = np.where(small, 1.0, omega)
    phi = np.where(small, dt - 0.5j * omega * dt ** 2, (1 - np.exp(-1j * safe * dt)) / (1j * safe))
    ops = np.asarray(ops)
    local = dagger(vecs)[:, None] @ ops[None] @ vecs[:, None]
    avg = vecs[:, None] @ (local * phi[:, None]) @ dagger(vecs)[:, None]
    w = cache.anchored[1:, None]
    return w @ avg @ dagger(w)


def _nested(a, b, rho):
    """``[a, [b, rho]]`` over broadcast stacks."""
    inner = b @ rho - rho @ b
    return a @ inner - inner @ a


def second_order_term(averaged, betas, rho_t):
    """Second-order Dyson term of ``rho(T)`` for each noise sample.

    With ``B_k = sum_mu beta_{mu k} Nbar_{mu k}`` this is
    ``-sum_{k1 > k2} [B_k1, [B_k2, rho_t]] - 1/2 sum_k [B_k, [B_k, rho_t]]``.
    """
    b = np.einsum("bku,kuij->bkij", betas, averaged)
    prefix = np.cumsum(b, axis=1) - 0.5 * b
    return -_nested(b, prefix, rho_t[None, None]).sum(axis=1)


def second_order_mean(averaged, kernel, rho_t):
    """Expectation of :func:`second_order_term` for lag covariances ``kernel[lag, mu, nu]``."""
    steps = averaged.shape[0]
    out = np.zeros(rho_t.shape, dtype=complex)
    for k1 in range(steps):
        lag = k1 - np.arange(k1 + 1)
        weight = np.ones(k1 + 1)
        weight[-1] = 0.5
        # sum_{k2 <= k1} w C_{mu nu}(t_k1 - t_k2) Nbar_{nu k2}
        inner = np.einsum("k,kuv,kvij->uij", weight, kernel[lag], averaged[: k1 + 1])
        out -= _nested(averaged[k1], inner, rho_t[None]).sum(axis=0)
    return out


def _noise_operators(model: NoiseModel):
    return np.stack(model.operators)


def _propagate_batch(schedule: Schedule, ops, betas, columns):
    """Evolve ``columns`` (N x r) under a batch of midpoint samples ``betas`` (B, K, n_ch)."""
    b = betas.shape[0]
    psi = np.broadcast_to(columns, (b,) + columns.shape).astype(complex)
    h0 = schedule.hamiltonians
    for k in range(schedule.steps):
        h = h0[k] + np.einsum("bu,uij->bij", betas[:, k], ops)
        psi = expm_hermitian_batch(h, schedule.dt) @ psi
    return psi


def _columns(rho0):
    """Weighted eigenvectors ``W`` with ``rho0 = W W^dagger`` (zero weights dropped)."""
    rho0 = np.asarray(rho0, dtype=complex)
    p, v = np.linalg.eigh(0.5 * (rho0 + rho0.conj().T))
    keep = p > 1e-14 * max(p.max(), 1e-300)
    if np.any(p < -1e-10):
        raise ValueError("initial state is not positive semidefinite")
    return v[:, keep] * np.sqrt(p[keep])


def noisy_trajectory(schedule: Schedule, model: NoiseModel, traj: Trajectory, rho0):
    """Final state of one noise realization."""
    if len(traj.times) != len(schedule.times) or not np.allclose(traj.times, schedule.times, rtol=1e-12, atol=1e-15):
        raise ValueError("trajectory grid does not match schedule grid")
    w = _columns(rho0)
    psi = _propagate_batch(schedule, _noise_operators(model), traj.midpoints[None], w)[0]
    return psi @ psi.conj().T


@dataclass
class StateEnsemble:
    """Noise-averaged final state.

    ``stderr`` is the elementwise standard error of ``mean_state`` and
    ``statistical_floor`` the ``1/sqrt(M)`` scale. ``plain_mean`` is the
    sample mean without control-variate correction.
    """

    count: int
    mean_state: np.ndarray
    stderr: np.ndarray
    statistical_floor: float
    states: Optional[np.ndarray] = None
    antithetic: bool = False
    plain_mean: Optional[np.ndarray] = None


def worker_count(workers: Optional[int] = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return 1


def _pairwise_sum(parts):
    parts = list(parts)
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def _run_chunk(schedule, model, ops, columns, mids, master_seed, start, stop, antithetic, keep, control):
    if antithetic:
        seeds = [trajectory_seed(master_seed, m // 2) for m in range(start, stop)]
        signs = np.array([1.0 if m % 2 == 0 else -1.0 for m in range(start, stop)])
    else:
        seeds = [trajectory_seed(master_seed, m) for m in range(start, stop)]
        signs = np.ones(stop - start)
    coef = np.stack([draw_coefficients(model, s) for s in seeds]) * signs[:, None, None, None]
    betas = synthesize(model, coef, mids)
    psi = _propagate_batch(schedule, ops, betas, columns)
    states = psi @ dagger(psi)
    units = states.reshape((-1, 2) + states.shape[1:]).mean(axis=1) if antithetic else states
    raw = units.sum(axis=0)
    if control is not None:
        averaged, rho_t = control
        # g is even in beta, so one member of each antithetic pair suffices
        units = units - second_order_term(averaged, betas[::2] if antithetic else betas, rho_t)
    s1 = units.sum(axis=0)
    s2 = (units.real ** 2).sum(axis=0) + 1j * (units.imag ** 2).sum(axis=0)
    return s1, s2, raw, (states if keep else None)


def ensemble_average(schedule: Schedule, model: NoiseModel, count: int, master_seed: int, rho0,
                     workers: Optional[int] = None, antithetic: bool = False,
                     keep_states: bool = False, chunk: int = CHUNK,
                     control_variate: bool = False) -> StateEnsemble:
    """Monte Carlo average of the final state over ``count`` noise trajectories.

    Trajectory ``m`` is seeded with ``trajectory_seed(master_seed, m)``. With
    ``antithetic=True`` trajectories come in pairs ``(beta, -beta)`` sharing
    the seed of pair ``m // 2``; ``count`` is rounded up to even.

    ``control_variate=True`` subtracts each trajectory's second-order Dyson
    term and adds back its exact mean under the sampler's covariance. The
    estimate stays unbiased, but the fluctuations linear in noise power
    cancel, leaving only fourth-order noise.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if antithetic:
        count += count % 2
        chunk += chunk % 2
    dt = check_grid(model, schedule.times)
    mids = schedule.times[:-1] + dt / 2
    ops = _noise_operators(model)
    cols = _columns(rho0)
    control = correction = None
    if control_variate:
        cache, rho_t = ideal_propagate(schedule, rho0)
        averaged = step_averaged_operators(cache, ops)
        control = (averaged, rho_t)
        correction = second_order_mean(averaged, model.kernel(np.arange(schedule.steps) * dt), rho_t)
    bounds = [(a, min(a + chunk, count)) for a in range(0, count, chunk)]
    args = [(schedule, model, ops, cols, mids, master_seed, a, b, antithetic, keep_states, control)
            for a, b in bounds]
    n_workers = min(worker_count(workers), len(bounds))
    if n_workers > 1:
        with ThreadPoolExecutor(n_workers) as pool:
            results = list(pool.map(lambda a: _run_chunk(*a), args))
    else:
        results = [_run_chunk(*a) for a in args]
    units = count // 2 if antithetic else count
    s1 = _pairwise_sum(r[0] for r in results)
    s2 = _pairwise_sum(r[1] for r in results)
    mean = s1 / units
    plain = _pairwise_sum(r[2] for r in results) / units
    var_re = np.clip(s2.real / units - mean.real ** 2, 0, None)
    var_im = np.clip(s2.imag / units - mean.imag ** 2, 0, None)
    stderr = np.sqrt((var_re + var_im) / max(units - 1, 1))
    states = np.concatenate([r[3] for r in results]) if keep_states else None
    return StateEnsemble(
        count=count,
        mean_state=mean if correction is None else mean + correction,
        stderr=stderr,
        statistical_floor=1.0 / np.sqrt(count),
        states=states,
        antithetic=antithetic,
        plain_mean=plain,
    )
