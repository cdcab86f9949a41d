"""Stationary Gaussian noise with prescribed power spectral densities.

Conventions: spectra are one-sided in angular frequency and the
autocorrelation is ``C(t) = (1/pi) int_0^inf S(w) cos(w t) dw``, i.e. an
``int_0^inf dw/2pi`` measure on the symmetric extension of ``S``.
Trajectories are harmonic superpositions over a uniform grid of modes, so
their covariance is exactly :func:`synthesis_autocorrelation`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, optimize, signal

DEFAULT_MODES = 512


class NyquistError(ValueError):
    pass


class CorrelationLengthError(ValueError):
    pass


@dataclass(frozen=True)
class PsdSpec:
    """One-sided PSD.

    ``kind`` is one of ``white``, ``pink``, ``lorentzian``, ``tabulated``.
    Use the classmethod constructors rather than building this directly.
    """

    kind: str
    params: tuple
    omega_lo: float
    omega_hi: float

    @classmethod
    def white(cls, s0: float, omega_uv: float) -> "PsdSpec":
        if s0 < 0 or omega_uv <= 0:
            raise ValueError("white noise needs s0 >= 0 and omega_uv > 0")
        return cls("white", (float(s0),), 0.0, float(omega_uv))

    @classmethod
    def pink(cls, amplitude: float, omega_ir: float, omega_uv: float) -> "PsdSpec":
        """``S(w) = amplitude / w`` on ``[omega_ir, omega_uv]``."""
        if not 0 < omega_ir < omega_uv:
            raise ValueError("pink noise needs 0 < omega_ir < omega_uv")
        if amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        return cls("pink", (float(amplitude),), float(omega_ir), float(omega_uv))

    @classmethod
    def lorentzian(cls, s0: float, tau_c: float, omega_uv: Optional[float] = None) -> "PsdSpec":
        """Spectrum whose autocorrelation is ``s0 * exp(-|t|/tau_c)`` (band-limited at ``omega_uv``)."""
        if s0 < 0 or tau_c <= 0:
            raise ValueError("lorentzian needs s0 >= 0 and tau_c > 0")
        if omega_uv is None:
            omega_uv = 100.0 / tau_c
        return cls("lorentzian", (float(s0), float(tau_c)), 0.0, float(omega_uv))

    @classmethod
    def tabulated(cls, omega: Sequence[float], values: Sequence[float]) -> "PsdSpec":
        omega = np.asarray(omega, dtype=float)
        values = np.asarray(values, dtype=float)
        if omega.ndim != 1 or omega.shape != values.shape or len(omega) < 2:
            raise ValueError("tabulated PSD needs matching 1-d grids")
        if np.any(np.diff(omega) <= 0) or omega[0] < 0:
            raise ValueError("omega grid must be increasing and non-negative")
        if np.any(values < 0):
            raise ValueError("PSD values must be non-negative")
        return cls("tabulated", (tuple(omega), tuple(values)), float(omega[0]), float(omega[-1]))

    @property
    def band(self) -> tuple:
        return self.omega_lo, self.omega_hi

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        inside = (w >= self.omega_lo) & (w <= self.omega_hi)
        if self.kind == "white":
            out = np.full(w.shape, self.params[0])
        elif self.kind == "pink":
            with np.errstate(divide="ignore"):
                out = self.params[0] / np.where(inside, w, 1.0)
        elif self.kind == "lorentzian":
            s0, tau = self.params
            out = 2 * s0 * tau / (1 + (w * tau) ** 2)
        else:
            out = np.interp(w, self.params[0], self.params[1])
        return np.where(inside, out, 0.0)

    def max_value(self) -> float:
        if self.kind == "white":
            return self.params[0]
        if self.kind == "pink":
            return self.params[0] / self.omega_lo
        if self.kind == "lorentzian":
            return 2 * self.params[0] * self.params[1]
        return float(max(self.params[1]))

    def scaled(self, factor: float) -> "PsdSpec":
        """Same shape with the spectral density multiplied by ``factor``."""
        if self.kind == "tabulated":
            params = (self.params[0], tuple(factor * v for v in self.params[1]))
        else:
            params = (factor * self.params[0],) + tuple(self.params[1:])
        return PsdSpec(self.kind, params, self.omega_lo, self.omega_hi)

    def to_dict(self) -> dict:
        if self.kind == "white":
            return {"kind": "white", "s0": self.params[0], "omega_uv": self.omega_hi}
        if self.kind == "pink":
            return {"kind": "pink", "amplitude": self.params[0], "omega_ir": self.omega_lo, "omega_uv": self.omega_hi}
        if self.kind == "lorentzian":
            return {"kind": "lorentzian", "s0": self.params[0], "tau_c": self.params[1], "omega_uv": self.omega_hi}
        return {"kind": "tabulated", "omega": list(self.params[0]), "values": list(self.params[1])}

    @classmethod
    def from_dict(cls, d: dict) -> "PsdSpec":
        kind = d["kind"]
        if kind == "white":
            return cls.white(d["s0"], d["omega_uv"])
        if kind == "pink":
            return cls.pink(d["amplitude"], d["omega_ir"], d["omega_uv"])
        if kind == "lorentzian":
            return cls.lorentzian(d["s0"], d["tau_c"], d.get("omega_uv"))
        if kind == "tabulated":
            return cls.tabulated(d["omega"], d["values"])
        raise ValueError(f"unknown PSD kind {kind!r}")


def _quad_cos(func, lo, hi, t, epsabs=0.0):
    if hi <= lo:
        return 0.0
    if t == 0:
        val, _ = integrate.quad(func, lo, hi, limit=200, epsabs=epsabs, epsrel=1e-9)
    else:
        val, _ = integrate.quad(func, lo, hi, weight="cos", wvar=t, limit=200, epsabs=epsabs, epsrel=1e-9)
    return val / np.pi


def _quad_kernel(func, pts, ts):
    """Cosine transform of ``func`` over the pieces ``pts`` at every lag in ``ts``."""
    pieces = list(zip(pts[:-1], pts[1:]))
    c0 = sum(_quad_cos(func, a, b, 0.0) for a, b in pieces)
    eps = 1e-11 * abs(c0) * np.pi / max(len(pieces), 1)
    return np.array([c0 if tt == 0 else sum(_quad_cos(func, a, b, tt, eps) for a, b in pieces) for tt in ts])


def _breakpoints(psd: PsdSpec):
    """Sub-intervals for quadrature; split where the integrand varies fastest."""
    lo, hi = psd.band
    if psd.kind == "pink":
        pts = np.geomspace(lo, hi, 8)
    elif psd.kind == "lorentzian":
        tau = psd.params[1]
        pts = np.unique(np.clip([lo, 0.5 / tau, 2 / tau, 10 / tau, hi], lo, hi))
    elif psd.kind == "tabulated":
        pts = np.asarray(psd.params[0])
    else:
        pts = np.array([lo, hi])
    return pts


def autocorrelation(psd: PsdSpec, t):
    """``C(t) = (1/pi) int S(w) cos(w t) dw`` by adaptive quadrature; ``t`` scalar or array."""
    ts = np.atleast_1d(np.abs(np.asarray(t, dtype=float)))
    out = _quad_kernel(psd, _breakpoints(psd), ts)
    return out if np.ndim(t) else float(out[0])


def cross_autocorrelation(psd_a: PsdSpec, psd_b: PsdSpec, t):
    """Kernel of ``sqrt(S_a S_b)``, the cross spectrum of unit-correlated channels."""
    if psd_a == psd_b:
        return autocorrelation(psd_a, t)
    lo = max(psd_a.omega_lo, psd_b.omega_lo)
    hi = min(psd_a.omega_hi, psd_b.omega_hi)
    ts = np.atleast_1d(np.abs(np.asarray(t, dtype=float)))
    pts = np.unique(np.concatenate([[lo, hi], np.clip(np.concatenate([_breakpoints(psd_a), _breakpoints(psd_b)]), lo, hi)]))

    def f(w):
        return np.sqrt(psd_a(w) * psd_b(w))

    out = _quad_kernel(f, pts, ts)
    return out if np.ndim(t) else float(out[0])


def mode_grid(lo: float, hi: float, n_modes: int = DEFAULT_MODES):
    """Bin-centre frequencies and bin width of the synthesis grid over ``[lo, hi]``."""
    dw = (hi - lo) / n_modes
    return lo + (np.arange(n_modes) + 0.5) * dw, dw


def synthesis_autocorrelation(psd: PsdSpec, t, n_modes: int = DEFAULT_MODES, band=None):
    """Exact autocorrelation of the harmonic-superposition process."""
    lo, hi = band if band is not None else psd.band
    w, dw = mode_grid(lo, hi, n_modes)
    power = psd(w) * dw / np.pi
    t = np.asarray(t, dtype=float)
    return np.cos(np.multiply.outer(t, w)) @ power


def correlation_length(psd: PsdSpec) -> float:
    """Decay time of an exponential least-squares fit to the autocorrelation.

    The fit ``C(0) exp(-t/tau)`` is taken over ``[0, t*]`` where ``t*`` is the
    first time ``C`` falls below ``C(0)/e^2``.
    """
    if psd.kind == "white":
        raise CorrelationLengthError("no finite correlation length: white noise is delta-correlated")
    c0 = autocorrelation(psd, 0.0)
    if c0 <= 0:
        raise CorrelationLengthError("C(0) must be positive")
    thresh = c0 * np.exp(-2.0)
    lo, hi = psd.band
    t_min = np.pi / (8 * hi)
    t_max = 200 * np.pi / max(lo, hi / 1e4)
    ts = np.concatenate([[0.0], np.geomspace(t_min, t_max, 150)])
    cs = autocorrelation(psd, ts)
    below = np.nonzero(cs < thresh)[0]
    if len(below) == 0:
        raise CorrelationLengthError("no finite correlation length: C(t) never decays below C(0)/e^2")
    k = below[0]
    t_star = optimize.brentq(lambda t: autocorrelation(psd, t) - thresh, ts[k - 1], ts[k], xtol=1e-12 * ts[k])
    grid = np.linspace(0.0, t_star, 100)
    data = autocorrelation(psd, grid)

    def resid(tau):
        return data - c0 * np.exp(-grid / tau)

    fit = optimize.least_squares(resid, x0=[t_star / 2], bounds=([1e-12 * t_star], [np.inf]), xtol=1e-14, ftol=1e-14)
    return float(fit.x[0])


@dataclass(frozen=True)
class NoiseModel:
    """Noise operators ``N_mu`` with their spectra and cross-channel correlation.

    ``correlation`` is symmetric PSD with unit diagonal; the identity matrix
    means independent channels and the all-ones matrix fully correlated ones.
    The cross spectrum of channels ``mu, nu`` is
    ``correlation[mu, nu] * sqrt(S_mu S_nu)``.
    """

    operators: tuple
    psds: tuple
    correlation: np.ndarray
    n_modes: int = DEFAULT_MODES
    _sqrt_corr: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ops = tuple(np.asarray(o, dtype=complex) for o in self.operators)
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "psds", tuple(self.psds))
        corr = np.atleast_2d(np.asarray(self.correlation, dtype=float))
        n = len(ops)
        if len(self.psds) != n:
            raise ValueError("one PSD per channel required")
        if corr.shape != (n, n):
            raise ValueError(f"correlation matrix must be {n}x{n}")
        if not np.allclose(corr, corr.T, atol=1e-12):
            raise ValueError("correlation matrix must be symmetric")
        if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
            raise ValueError("correlation matrix must have unit diagonal")
        evals, evecs = np.linalg.eigh(corr)
        if evals.min(initial=0.0) < -1e-10:
            raise ValueError("correlation matrix is not positive semidefinite")
        object.__setattr__(self, "correlation", corr)
        object.__setattr__(self, "_sqrt_corr", (evecs * np.sqrt(np.clip(evals, 0, None))) @ evecs.T)

    @property
    def n_channels(self) -> int:
        return len(self.operators)

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    @property
    def band(self) -> tuple:
        return min(p.omega_lo for p in self.psds), max(p.omega_hi for p in self.psds)

    def s0(self) -> float:
        """``max_w S_{mu nu}(w)`` over all channel pairs."""
        return max(abs(self.correlation[a, b]) * np.sqrt(self.psds[a].max_value() * self.psds[b].max_value())
                   for a in range(self.n_channels) for b in range(self.n_channels))

    def scaled(self, factor: float) -> "NoiseModel":
        return NoiseModel(self.operators, tuple(p.scaled(factor) for p in self.psds), self.correlation, self.n_modes)

    def cross_psd(self, omega):
        """``S_{mu nu}(w)`` with shape ``(len(w), n, n)``."""
        w = np.asarray(omega, dtype=float)
        s = np.stack([p(w) for p in self.psds], axis=-1)
        return self.correlation * np.sqrt(s[..., :, None] * s[..., None, :])

    def kernel(self, tau, mode: str = "synthesis"):
        """Two-point correlations ``C_{mu nu}(tau)``, shape ``tau.shape + (n, n)``.

        ``mode="synthesis"`` gives the exact covariance of the sampled
        trajectories; ``mode="quadrature"`` the continuum integral.
        """
        tau = np.asarray(tau, dtype=float)
        n = self.n_channels
        out = np.zeros(tau.shape + (n, n))
        cache = {}
        for a in range(n):
            for b in range(a, n):
                if self.correlation[a, b] == 0:
                    continue
                key = (self.psds[a], self.psds[b])
                if key not in cache:
                    if mode == "synthesis":
                        lo, hi = self.band
                        w, dw = mode_grid(lo, hi, self.n_modes)
                        power = np.sqrt(self.psds[a](w) * self.psds[b](w)) * dw / np.pi
                        cache[key] = np.cos(np.multiply.outer(tau, w)) @ power
                    elif mode == "quadrature":
                        flat = cross_autocorrelation(self.psds[a], self.psds[b], tau.ravel())
                        cache[key] = np.asarray(flat).reshape(tau.shape)
                    else:
                        raise ValueError(f"unknown kernel mode {mode!r}")
                out[..., a, b] = self.correlation[a, b] * cache[key]
                out[..., b, a] = out[..., a, b]
        return out

    def check_symmetry_separation(self, basis, tol: float = 1e-9) -> None:
        """Reject correlations between symmetry-preserving and symmetry-breaking channels."""
        from .basis import classify_operator

        kinds = [classify_operator(op, basis, tol).preserving for op in self.operators]
        for a in range(self.n_channels):
            for b in range(self.n_channels):
                if kinds[a] != kinds[b] and abs(self.correlation[a, b]) > tol:
                    raise ValueError(
                        f"channels {a} and {b} mix symmetry-preserving and symmetry-breaking noise "
                        f"with correlation {self.correlation[a, b]:g}"
                    )

    def _amplitudes(self):
        lo, hi = self.band
        w, dw = mode_grid(lo, hi, self.n_modes)
        amp = np.stack([np.sqrt(p(w) * dw / np.pi) for p in self.psds])
        return w, amp


@dataclass(frozen=True)
class Trajectory:
    """Noise samples ``beta_mu`` on a uniform grid and at the step midpoints."""

    times: np.ndarray
    samples: np.ndarray
    midpoints: np.ndarray
    seed: int

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def check_grid(model: NoiseModel, times) -> float:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 3:
        raise ValueError("grid needs at least K=2 steps")
    dt = times[1] - times[0]
    if not np.allclose(np.diff(times), dt, rtol=1e-9, atol=0):
        raise ValueError("grid must be uniform")
    if dt >= np.pi / model.band[1]:
        raise NyquistError(f"dt={dt:g} violates Nyquist for omega_uv={model.band[1]:g} (need dt < {np.pi / model.band[1]:g})")
    return float(dt)


def draw_coefficients(model: NoiseModel, seed) -> np.ndarray:
    """Correlated Gaussian mode coefficients, shape ``(2, n_channels, n_modes)``."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((2, model.n_channels, model.n_modes))
    return np.einsum("ab,kbm->kam", model._sqrt_corr, z)


def synthesize(model: NoiseModel, coefficients, times) -> np.ndarray:
    """Evaluate trajectories for a batch of coefficient sets.

    ``coefficients`` has shape ``(B, 2, n_channels, n_modes)``; returns
    ``(B, len(times), n_channels)``.
    """
    w, amp = model._amplitudes()
    phase = np.multiply.outer(np.asarray(times, dtype=float), w)
    cos, sin = np.cos(phase), np.sin(phase)
    c = np.asarray(coefficients) * amp
    return np.einsum("km,bum->bku", cos, c[:, 0]) + np.einsum("km,bum->bku", sin, c[:, 1])


def trajectory_seed(master_seed: int, index: int) -> int:
    """Counter-based 64-bit seed for trajectory ``index`` of an ensemble."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def sample_trajectory(model: NoiseModel, times, seed: int) -> Trajectory:
    """One noise realization on ``times`` (uniform, ``t_k = k dt``).

    Raises
    ------
    NyquistError
        If ``dt >= pi / omega_uv``.
    """
    times = np.asarray(times, dtype=float)
    dt = check_grid(model, times)
    coef = draw_coefficients(model, seed)[None]
    both = synthesize(model, coef, np.concatenate([times, times[:-1] + dt / 2]))[0]
    k = len(times)
    return Trajectory(times=times, samples=both[:k], midpoints=both[k:], seed=int(seed))


def sample_ensemble(model: NoiseModel, times, master_seed: int, count: int) -> np.ndarray:
    """Samples of ``count`` trajectories on ``times``; shape ``(count, len(times), n_channels)``."""
    check_grid(model, times)
    coef = np.stack([draw_coefficients(model, trajectory_seed(master_seed, m)) for m in range(count)])
    return synthesize(model, coef, times)


@dataclass
class EmpiricalPsd:
    omega: np.ndarray
    spectrum: np.ndarray
    count: int

    def auto(self, channel: int = 0) -> np.ndarray:
        return self.spectrum[:, channel, channel].real


def empirical_psd(samples, dt: float, window: str = "hann") -> EmpiricalPsd:
    """Ensemble-averaged periodogram in the module's one-sided convention.

    ``samples`` has shape ``(n_traj, K)`` or ``(n_traj, K, n_channels)``.
    Returns the cross-spectral matrix at each non-negative frequency; the
    auto-spectra estimate ``S(w)``.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 2:
        x = x[..., None]
    if x.shape[0] < 100:
        raise ValueError("need at least 100 trajectories")
    n_ch = x.shape[-1]
    fs = 1.0 / dt
    out = None
    for a in range(n_ch):
        for b in range(n_ch):
            f, p = signal.csd(x[:, :, a], x[:, :, b], fs=fs, window=window, nperseg=x.shape[1],
                              scaling="density", axis=-1, detrend=False)
            if out is None:
                out = np.zeros((len(f), n_ch, n_ch), dtype=complex)
            # scipy's one-sided per-Hz density P(f) relates to S(w) by S = P/2
            out[:, a, b] = p.mean(axis=0) / 2
    return EmpiricalPsd(omega=2 * np.pi * f, spectrum=out, count=x.shape[0])


def dump_trajectory(traj: Trajectory, path) -> None:
    """Write ``time, beta_0, beta_1, ...`` columns as whitespace-separated text."""
    cols = np.column_stack([traj.times, traj.samples])
    header = "time " + " ".join(f"beta_{k}" for k in range(traj.samples.shape[1]))
    np.savetxt(path, cols, header=header, comments="# ")


def loglog_slope(omega, values, lo: float, hi: float) -> float:
    """Least-squares slope of ``log S`` against ``log w`` over ``[lo, hi]``."""
    omega = np.asarray(omega)
    sel = (omega >= lo) & (omega <= hi) & (np.asarray(values) > 0)
    if sel.sum() < 3:
        raise ValueError("fewer than three frequencies in the fit band")
    return float(np.polyfit(np.log(omega[sel]), np.log(np.asarray(values)[sel]), 1)[0])
