"""Control matrices, coherence parameters and the second-order noise cumulant.

Conventions
-----------
The toggling-frame noise Hamiltonian is ``sum_mu beta_mu(t) sum_i r_{mu i}(t) x_i``
with ``r_{mu i}(t) = Tr(x_i U_0(T, t) N_mu U_0(T, t)^dagger)``. The second
cumulant of its Liouvillian is ``C = -sum_ij Lambda_ij [x_i, [x_j, .]]`` with

    Lambda_ij = sum_{mu nu} int_{t2 <= t1} C_{mu nu}(t1 - t2) r_{mu i}(t1) r_{nu j}(t2),

which splits into ``chi1 = -(Lambda + Lambda^T)/2`` (symmetric, multiplies
``A_ij = [x_i, [x_j, .]]``) and ``chi2 = -(Lambda - Lambda^T)/4``
(antisymmetric, multiplies ``B_ij = [[x_i, x_j], .]``). For white dephasing
of a qubit this reproduces the exact ``exp(-2 S0 T)`` coherence decay.

In the frequency domain ``chi1 = -sum int dw/2pi S Re F`` and
``chi2 = -sum int dw/2pi S G`` with ``F_ij = rt_i conj(rt_j)``,
``rt(w) = int e^{iwt} r(t) dt`` and ``G`` the sign-weighted kernel of the
ordered double integral.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .basis import QBasis, classify_operator, centralizer_dims
from .noise import NoiseModel, NyquistError
from .operators import dagger, from_liouville_vector, to_liouville_vector, trace_norm, trace_distance
from .propagation import PropagatorCache, SymmetryViolation, step_averaged_operators

ZERO_RTOL = 1e-9


@dataclass
class ControlMatrix:
    """Toggling-frame expansion coefficients of the noise operators.

    ``r[k, mu, i]`` is sampled at ``times[k]``; ``rbar[k, mu, i]`` is the
    exact integral over step ``[t_k, t_{k+1}]``. ``support[mu, i]`` marks
    the generator blocks that ``N_mu`` occupies; entries outside are zeroed
    after the block check, whose worst relative residual is ``block_residual``.
    """

    times: np.ndarray
    r: np.ndarray
    rbar: np.ndarray
    support: np.ndarray
    block_residual: float
    block_ids: np.ndarray
    square: Optional[np.ndarray] = None
    square_residual: Optional[float] = None

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @property
    def active(self) -> np.ndarray:
        return np.nonzero(self.support.any(axis=0))[0]


def _block_ids(basis: QBasis) -> np.ndarray:
    keys = {}
    return np.array([keys.setdefault(b, len(keys)) for b in basis.blocks])


def _coefficients(basis: QBasis, ops) -> np.ndarray:
    return np.einsum("iab,...ab->...i", basis.generators.conj(), ops).real


def control_matrix(cache: PropagatorCache, basis: QBasis, model: NoiseModel, square: bool = False,
                   check_symmetry: bool = True) -> ControlMatrix:
    """Control matrix of ``model`` in ``basis`` on the cached grid.

    Raises
    ------
    SymmetryViolation
        If ``[Q, H_0(t_k)] != 0`` for the basis' Q, listing offending steps.
    """
    sched = cache.schedule
    if check_symmetry:
        bad = sched.symmetry_violations(basis.spectrum.Q)
        if bad:
            raise SymmetryViolation(f"[Q, H_0(t_k)] != 0 at steps {bad[:10]}", bad)
    ops = np.stack(model.operators)
    u = cache.anchored
    rotated = u[:, None] @ ops[None] @ dagger(u)[:, None]
    r = _coefficients(basis, rotated)
    rbar = _coefficients(basis, step_averaged_operators(cache, ops))

    blocks = _block_ids(basis)
    coef0 = _coefficients(basis, ops)
    support = np.zeros(coef0.shape, dtype=bool)
    for mu in range(len(ops)):
        scale = max(np.abs(coef0[mu]).max(), 1e-300)
        occupied = np.unique(blocks[np.abs(coef0[mu]) > 1e-12 * scale])
        support[mu] = np.isin(blocks, occupied)
    scale = max(np.abs(r).max(), 1e-300)
    residual = float(np.abs(np.where(support[None], 0.0, r)).max(initial=0.0) / scale)
    r = np.where(support[None], r, 0.0)
    rbar = np.where(support[None], rbar, 0.0)

    sq = sq_res = None
    if square:
        gens = basis.generators
        img = u[:, None] @ gens[None] @ dagger(u)[:, None]
        sq = np.einsum("iab,kjab->kij", gens.conj(), img, optimize=True).real
        cross = blocks[:, None] != blocks[None, :]
        sq_res = float(np.abs(sq[:, cross]).max(initial=0.0) / max(np.abs(sq).max(), 1e-300))
    return ControlMatrix(sched.times.copy(), r, rbar, support, residual, blocks, sq, sq_res)


def block_structure_report(cm: ControlMatrix, basis: QBasis, rtol: float = ZERO_RTOL) -> dict:
    """Worst cross-class residuals of the control matrix relative to its largest entry."""
    out = {"noise_residual": cm.block_residual, "noise_ok": cm.block_residual <= rtol}
    if cm.square is not None:
        out["square_residual"] = cm.square_residual
        out["square_ok"] = cm.square_residual <= rtol
        gram = np.einsum("kij,klj->kil", cm.square, cm.square)
        out["orthogonality_error"] = float(np.abs(gram - np.eye(gram.shape[-1])).max())
    return out


def _channel_mix(model: NoiseModel):
    """Mixing matrix to independent channels.

    When every channel shares one spectrum the cross spectrum factorizes as
    ``K_{mu nu} S(w)`` and ``K = L L^T`` yields ``rank(K)`` independent
    channels; returns ``(L, True)``. Otherwise ``(I, False)``.
    """
    if all(p == model.psds[0] for p in model.psds):
        evals, evecs = np.linalg.eigh(model.correlation)
        keep = evals > 1e-12 * evals.max()
        return evecs[:, keep] * np.sqrt(evals[keep]), True
    return np.eye(model.n_channels), False


def _mixed_samples(cm: ControlMatrix, mix, method: str):
    """Sample times and channel-mixed coefficients restricted to each mixed operator's blocks.

    Returns ``(times, a, active)`` with ``a`` of shape ``(K, p, len(active))``.
    """
    times, a = _sample_points(cm, method)
    a = np.einsum("kui,up->kpi", a, mix)
    # the mixed operator's own expansion is the last grid sample of r
    coef = cm.r[-1].T @ mix
    for p in range(a.shape[1]):
        scale = max(np.abs(coef[:, p]).max(initial=0.0), 1e-300)
        occupied = np.unique(cm.block_ids[np.abs(coef[:, p]) > 1e-12 * scale])
        a[:, p, ~np.isin(cm.block_ids, occupied)] = 0.0
    active = np.nonzero(np.abs(a).max(axis=(0, 1)) > 0)[0]
    return times, a[:, :, active], active


@dataclass
class CoherenceParams:
    chi1: np.ndarray
    chi2: np.ndarray
    Lambda: np.ndarray
    active: np.ndarray
    method: str
    kernel: str


def _sample_points(cm: ControlMatrix, method: str):
    """Sample times, weighted coefficients and diagonal weight for the chosen quadrature."""
    if method == "step":
        return cm.times[:-1] + cm.dt / 2, cm.rbar
    if method == "trapezoid":
        w = np.full(len(cm.times), cm.dt)
        w[0] = w[-1] = cm.dt / 2
        return cm.times, cm.r * w[:, None, None]
    raise ValueError(f"unknown quadrature {method!r}")


def coherence_params(cm: ControlMatrix, model: NoiseModel, method: str = "step",
                     kernel: str = "synthesis") -> CoherenceParams:
    """Coherence parameters from the ordered time-domain double integral.

    ``method="step"`` treats the noise as constant on each step (matching the
    Monte Carlo integrator) and uses exact per-step integrals of ``r``;
    ``method="trapezoid"`` samples ``r`` on the grid. ``kernel`` selects the
    synthesizer's exact covariance or the continuum quadrature.
    """
    if cm.dt >= np.pi / model.band[1]:
        raise NyquistError(f"grid dt={cm.dt:g} too coarse for omega_uv={model.band[1]:g}")
    if cm.r.shape[1] != model.n_channels:
        raise ValueError("control matrix and noise model have different channel counts")
    dim = cm.r.shape[-1]
    mix, shared = _channel_mix(model)
    times, a, active = _mixed_samples(cm, mix, method)
    n = len(times)
    kern = model.kernel(np.arange(n) * cm.dt, mode=kernel)
    lag = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    weight = np.tril(np.ones((n, n)), -1) + 0.5 * np.eye(n)
    lam_act = np.zeros((len(active), len(active)))
    pairs = [(p, p) for p in range(a.shape[1])] if shared else np.ndindex(a.shape[1], a.shape[1])
    for p, q in pairs:
        c = kern[:, 0, 0] if shared else kern[:, p, q]
        if np.any(c):
            lam_act += a[:, p].T @ (c[lag] * weight) @ a[:, q]
    lam = np.zeros((dim, dim))
    lam[np.ix_(active, active)] = lam_act
    chi1 = -(lam + lam.T) / 2
    chi2 = -(lam - lam.T) / 4
    return CoherenceParams(chi1, chi2, lam, active, method, kernel)


def frequency_grid(model: NoiseModel, duration: float, n_omega: int = 4000):
    """Quadrature nodes and weights over the noise band, dense at low frequency."""
    lo, hi = model.band
    lin_hi = min(hi, lo + 200 * 2 * np.pi / duration)
    base = np.linspace(lo, lin_hi, n_omega // 2)
    rest = np.geomspace(max(lin_hi, 1e-12), hi, n_omega - n_omega // 2) if hi > lin_hi else np.array([])
    w = np.unique(np.concatenate([base, rest]))
    weights = np.zeros_like(w)
    d = np.diff(w)
    weights[:-1] += d / 2
    weights[1:] += d / 2
    return w, weights


@dataclass
class FilterFunctions:
    """Filter functions on a frequency grid for the (decorrelated) noise channels.

    ``rt[w, p, i]`` holds ``int e^{iwt} r_{pi}(t) dt``; ``first`` and
    ``second`` are only materialized for the diagonal ``i = j`` unless
    requested, since the full tensors are large.
    """

    omega: np.ndarray
    weights: np.ndarray
    spectra: np.ndarray
    rt: np.ndarray
    active: np.ndarray
    chi1: np.ndarray
    chi2: np.ndarray
    psi: np.ndarray

    def first_diagonal(self) -> np.ndarray:
        """``F^{pp}_{ii}(w)``, shape ``(n_omega, p, n_active)``; non-negative."""
        return np.abs(self.rt) ** 2


def filter_functions(cm: ControlMatrix, model: NoiseModel, method: str = "step",
                     n_omega: int = 4000, with_second: bool = True) -> FilterFunctions:
    """Frequency-domain route to ``chi1``/``chi2`` plus the bound integrands ``psi``.

    Channels are decorrelated first (when all spectra coincide), so ``psi``
    is summed over independent channels. ``psi_ij = 2 int dw/2pi S (|F| + |G|)``
    bounds ``|chi1_ij| + |chi2_ij|`` times the trace-norm prefactor.
    """
    dim = cm.r.shape[-1]
    mix, shared = _channel_mix(model)
    times, a, active = _mixed_samples(cm, mix, method)
    omega, qw = frequency_grid(model, cm.duration, n_omega)
    if shared:
        spectra = model.psds[0](omega)[:, None, None] * np.eye(mix.shape[1])
    else:
        spectra = model.cross_psd(omega)
    p_count = a.shape[1]
    n_act = len(active)
    chi1 = np.zeros((n_act, n_act))
    chi2 = np.zeros((n_act, n_act))
    psi = np.zeros((n_act, n_act))
    rts = []
    chunk = max(1, int(2e7 // max(len(times) * p_count * max(n_act, 1), 1)))
    for s in range(0, len(omega), chunk):
        w = omega[s:s + chunk]
        ph = np.exp(1j * np.multiply.outer(w, times))  # (c, K)
        ua = np.einsum("ck,kpi->cpi", ph, a)  # rt
        rts.append(ua)
        pref = qw[s:s + chunk] / (2 * np.pi)
        for p in range(p_count):
            for q in range(p_count):
                sw = spectra[s:s + chunk, p, q] * pref
                if not np.any(sw):
                    continue
                f = ua[:, p, :, None] * ua[:, q, None, :].conj()
                chi1 -= np.einsum("c,cij->ij", sw, f.real)
                g = None
                if with_second:
                    # X_ij = sum_{k1 > k2} e^{iw t1} a_i(t1) e^{-iw t2} a_j(t2)
                    ea = ph[:, :, None] * a[None, :, p, :]
                    eb = (ph.conj()[:, :, None] * a[None, :, q, :])
                    prefix = np.cumsum(eb, axis=1)
                    prefix = np.concatenate([np.zeros_like(prefix[:, :1]), prefix[:, :-1]], axis=1)
                    x = np.einsum("cki,ckj->cij", ea, prefix)
                    if p == q:
                        g = 0.5 * (x - np.swapaxes(x, 1, 2)).real
                    else:
                        ea2 = ph[:, :, None] * a[None, :, q, :]
                        eb2 = ph.conj()[:, :, None] * a[None, :, p, :]
                        pre2 = np.cumsum(eb2, axis=1)
                        pre2 = np.concatenate([np.zeros_like(pre2[:, :1]), pre2[:, :-1]], axis=1)
                        x2 = np.einsum("cki,ckj->cij", ea2, pre2)
                        g = 0.5 * (x - np.swapaxes(x2, 1, 2)).real
                    chi2 -= np.einsum("c,cij->ij", sw, g)
                mag = np.abs(f) + (np.abs(g) if g is not None else 0.0)
                psi += 2 * np.einsum("c,cij->ij", np.abs(sw), mag)
    # chi2 from the p,q double loop counts each ordered pair; make exact antisymmetry explicit
    chi2 = 0.5 * (chi2 - chi2.T)
    return FilterFunctions(omega, qw, spectra, np.concatenate(rts), active, _embed(chi1, active, dim), _embed(chi2, active, dim),
                           _embed(psi, active, dim))


def _embed(m, active, dim):
    out = np.zeros((dim, dim))
    out[np.ix_(active, active)] = m
    return out


@dataclass
class CumulantSuperoperator:
    """``C(T)`` in the Liouville representation of a :class:`QBasis` (index 0 = identity)."""

    basis: QBasis
    chi1: np.ndarray
    chi2: np.ndarray
    matrix: np.ndarray

    @property
    def sym(self) -> np.ndarray:
        return 0.5 * (self.matrix + self.matrix.T)

    @property
    def asym(self) -> np.ndarray:
        return 0.5 * (self.matrix - self.matrix.T)

    def norm(self) -> float:
        return float(np.abs(self.matrix).max(initial=0.0))

    def apply(self, rho) -> np.ndarray:
        vec = to_liouville_vector(rho, self.basis)
        return from_liouville_vector(self.matrix @ vec, self.basis)

    def spectrum_report(self) -> dict:
        sym_ev = np.linalg.eigvalsh(self.sym)
        asym_ev = np.linalg.eigvals(self.asym)
        scale = max(np.abs(self.sym).max(initial=0.0), 1e-300)
        ident = self.matrix[:, 0]
        return {
            "sym_max_eigenvalue": float(sym_ev.max()),
            "sym_norm": float(np.abs(sym_ev).max()),
            "sym_nsd": bool(sym_ev.max() <= 1e-9 * max(np.abs(sym_ev).max(), 1e-300)),
            "identity_image_norm": float(np.abs(ident).max()),
            "identity_row_norm": float(np.abs(self.matrix[0]).max()),
            "asym_max_real_part": float(np.abs(asym_ev.real).max(initial=0.0)),
            "asym_imaginary": bool(np.abs(asym_ev.real).max(initial=0.0) <= 1e-9 * max(np.abs(self.asym).max(), scale)),
        }


def structure_constants(basis: QBasis, indices=None) -> np.ndarray:
    """Real antisymmetric ``F_i[k, l] = Im Tr(x_k [x_i, x_l])`` in the Liouville basis.

    The Liouville matrix of ``[x_i, .]`` is ``1j * F_i``.
    """
    gens = basis.generators if indices is None else basis.generators[indices]
    elems = basis.liouville
    # x_i x_l and x_l x_i traced against x_k
    prod = np.einsum("iab,lbc->ilac", gens, elems, optimize=True)
    comm = prod - np.einsum("lab,ibc->ilac", elems, gens, optimize=True)
    return np.einsum("kac,ilac->ikl", elems.conj(), comm, optimize=True).imag


def assemble_cumulant(chi1, chi2, basis: QBasis, tol: float = 1e-12) -> CumulantSuperoperator:
    """Liouville matrix of ``sum_ij chi1_ij A_ij + chi2_ij B_ij``.

    Uses ``L(A_ij) = -F_i F_j`` and ``L(B_ij) = -(F_i F_j - F_j F_i)``, so the
    result is ``-sum_ij (chi1 + 2 chi2)_ij F_i F_j``.
    """
    chi1 = np.asarray(chi1, dtype=float)
    chi2 = np.asarray(chi2, dtype=float)
    scale = max(np.abs(chi1).max(initial=0.0), np.abs(chi2).max(initial=0.0), 1e-300)
    if np.abs(chi1 - chi1.T).max(initial=0.0) > 1e-10 * scale:
        raise ValueError("chi1 must be symmetric")
    if np.abs(chi2 + chi2.T).max(initial=0.0) > 1e-10 * scale:
        raise ValueError("chi2 must be antisymmetric")
    chi1 = 0.5 * (chi1 + chi1.T)
    chi2 = 0.5 * (chi2 - chi2.T)
    m = chi1 + 2 * chi2
    active = np.nonzero((np.abs(m) > tol * scale).any(axis=0) | (np.abs(m) > tol * scale).any(axis=1))[0]
    d2 = basis.liouville.shape[0]
    if len(active) == 0:
        return CumulantSuperoperator(basis, chi1, chi2, np.zeros((d2, d2)))
    f = structure_constants(basis, active)
    sub = m[np.ix_(active, active)]
    g = np.einsum("ij,ikl->jkl", sub, f)  # sum_i m_ij F_i
    mat = -np.einsum("jkm,jml->kl", g, f)
    return CumulantSuperoperator(basis, chi1, chi2, mat)


def cumulant_from_lambda(lam, basis: QBasis) -> CumulantSuperoperator:
    lam = np.asarray(lam)
    return assemble_cumulant(-(lam + lam.T) / 2, -(lam - lam.T) / 4, basis)


def predict_average_state(c: CumulantSuperoperator, rho_t, order: str = "exp") -> np.ndarray:
    """``exp(C)[rho_0(T)]`` (``order="exp"``) or ``rho_0(T) + C[rho_0(T)]`` (``"first"``)."""
    vec = to_liouville_vector(rho_t, c.basis)
    if order == "exp":
        out = linalg.expm(c.matrix) @ vec
    elif order == "first":
        out = vec + c.matrix @ vec
    else:
        raise ValueError("order must be 'exp' or 'first'")
    rho = from_liouville_vector(out, c.basis)
    return 0.5 * (rho + rho.conj().T)


@dataclass
class StructureReport:
    noise_class: str
    ok: bool
    residual: float
    offending: list = field(default_factory=list)
    details: dict = field(default_factory=dict)


def _liouville_blocks(basis: QBasis) -> list:
    return [("identity",)] + basis.blocks


def structure_check(c: CumulantSuperoperator, noise_class: str, sector: Optional[int] = None,
                    states=(), rtol: float = ZERO_RTOL) -> StructureReport:
    """Check the block structure of ``C`` implied by the noise class.

    ``preserving``: no Liouville entry couples different label classes.

    ``breaking``: the image of each sector-``q`` state in ``states`` (density
    matrices or Liouville vectors) has weight only on the identity, Cartan
    and ``within(q)`` directions. The operator-level coupling from
    ``within(q)`` into other sectors' ``within`` directions is reported in
    ``details`` but not required to vanish: it is zero only for inputs that
    share the symmetries of the noise and the Hamiltonian.
    """
    basis = c.basis
    mat = c.matrix
    scale = max(np.abs(mat).max(initial=0.0), 1e-300)
    blocks = _liouville_blocks(basis)
    keys = {}
    ids = np.array([keys.setdefault(b, len(keys)) for b in blocks])
    if noise_class == "preserving":
        cross = ids[:, None] != ids[None, :]
        resid = np.where(cross, np.abs(mat), 0.0)
        bad = np.argwhere(resid > rtol * scale)
        offending = [(int(k), int(l)) for k, l in bad[:50]]
        res = float(resid.max(initial=0.0) / scale)
        return StructureReport(noise_class, not len(bad), res, offending)
    if noise_class != "breaking":
        raise ValueError("noise_class must be 'preserving' or 'breaking'")
    if sector is None:
        raise ValueError("breaking-noise check needs the state sector")
    kinds = ["identity"] + [lab.kind for lab in basis.labels]
    sectors = [None] + [lab.sector for lab in basis.labels]
    allowed = np.array([k in ("identity", "cartan") or (k == "within" and s == sector)
                        for k, s in zip(kinds, sectors)])
    within_q = np.array([k == "within" and s == sector for k, s in zip(kinds, sectors)])
    within_other = np.array([k == "within" and s != sector for k, s in zip(kinds, sectors)])
    details = {"within_to_other_within": float(np.abs(mat[np.ix_(within_other, within_q)]).max(initial=0.0) / scale)}
    offending = []
    res = 0.0
    for n_state, st in enumerate(states):
        st = np.asarray(st)
        vec = to_liouville_vector(st, basis) if st.ndim == 2 else st
        img = np.where(allowed, 0.0, np.abs(mat @ vec))
        ref = scale * max(np.abs(vec).max(), 1e-300)
        details[f"state_{n_state}"] = float(img.max(initial=0.0) / ref)
        res = max(res, details[f"state_{n_state}"])
        offending += [(n_state, int(k)) for k in np.nonzero(img > rtol * ref)[0][:50]]
    return StructureReport(noise_class, res <= rtol, res, offending, details)


@dataclass
class BoundReport:
    distance: float
    psi_symmetric: float
    psi_nonsymmetric: float
    psi_mixed: float
    bound_total: float
    s0: float
    white_bound: float
    sector: int
    n_q: int
    n_qq: dict

    def ordered(self) -> bool:
        return self.distance <= self.bound_total <= self.white_bound

    def to_dict(self) -> dict:
        return {
            "distance": self.distance,
            "psi_symmetric": self.psi_symmetric,
            "psi_nonsymmetric": self.psi_nonsymmetric,
            "psi_mixed": self.psi_mixed,
            "bound_total": self.bound_total,
            "s0": self.s0,
            "white_bound": self.white_bound,
            "sector": self.sector,
            "N_q": self.n_q,
            "N_qq": {f"{a:g}->{b:g}": v for (a, b), v in self.n_qq.items()},
            "ordered": self.ordered(),
        }


def distance_and_bounds(c: CumulantSuperoperator, rho_t, ffs: FilterFunctions, model: NoiseModel,
                        sector: int, duration: float) -> BoundReport:
    """Weak-noise distance ``D = ||C[rho_0(T)]||_1 / 2`` and its two upper bounds.

    ``psi`` terms are split by generator class: both indices in the
    centralizer (symmetric), both on ladders (non-symmetric), or one of each
    (mixed, which vanishes when the two kinds of noise are uncorrelated).
    The white-noise bound uses ``S0 = max_w S_{mu nu}(w)``.
    """
    basis = c.basis
    dist = 0.5 * trace_norm(c.apply(rho_t))
    lad = np.array([lab.kind == "ladder" for lab in basis.labels])
    psi = ffs.psi
    sym = float(psi[np.ix_(~lad, ~lad)].sum())
    non = float(psi[np.ix_(lad, lad)].sum())
    mixed = float(psi[np.ix_(lad, ~lad)].sum() + psi[np.ix_(~lad, lad)].sum())
    dims = centralizer_dims(basis)
    qv = list(dims.N_q)[sector]
    n_q = dims.N_q[qv]
    n_qq = {k: v for k, v in dims.N_qq.items() if qv in k}
    s0 = model.s0()
    white = 2 * s0 * duration * (n_q ** 4 + sum(v ** 4 for v in n_qq.values()))
    return BoundReport(dist, sym, non, mixed, sym + non + mixed, s0, white, sector, n_q, n_qq)


@dataclass
class SteadyStateReport:
    state: np.ndarray
    predicted: np.ndarray
    extrapolated: np.ndarray
    distance_to_predicted: float
    kernel_dim: int
    expected_kernel_dim: int
    extra_kernel: bool
    gap: float
    s: float


def steady_state(c: CumulantSuperoperator, sector: int, noise_class: str, rho_t=None,
                 rtol: float = 1e-8) -> SteadyStateReport:
    """Long-time state of ``exp(sC)`` started in sector ``q``.

    The analytic prediction is the maximally mixed state of sector ``q``
    (preserving noise) or of the full space (breaking noise). It is checked
    against the spectral projection of ``rho_t`` onto the kernel of ``C``
    and against ``exp(sC)[rho_t]`` for ``s`` beyond 40 times the slowest rate.
    """
    basis = c.basis
    spec = basis.spectrum
    dim = basis.dim
    if noise_class == "preserving":
        predicted = spec.projector(sector) / spec.multiplicities[sector]
    elif noise_class == "breaking":
        predicted = np.eye(dim) / dim
    else:
        raise ValueError("noise_class must be 'preserving' or 'breaking'")
    if rho_t is None:
        rho_t = spec.projector(sector) @ np.diag(np.arange(1, dim + 1)) @ spec.projector(sector)
        rho_t = rho_t / np.trace(rho_t)
    mat = c.matrix
    sym_ev = np.linalg.eigvalsh(c.sym)
    scale = max(np.abs(sym_ev).max(initial=0.0), 1e-300)
    kernel_dim = int(np.sum(np.abs(sym_ev) <= rtol * scale))
    expected = 1 if noise_class == "breaking" else spec.n_sectors
    nonzero = np.abs(sym_ev[np.abs(sym_ev) > rtol * scale])
    gap = float(nonzero.min()) if len(nonzero) else 0.0
    vec = to_liouville_vector(rho_t, basis)
    if gap == 0.0:
        state = np.asarray(rho_t)
        ext = state
        s = 0.0
    else:
        ev, right = np.linalg.eig(mat)
        keep = np.abs(ev) <= rtol * scale
        left = np.linalg.inv(right)
        proj = (right[:, keep] @ left[keep]).real
        state = from_liouville_vector(proj @ vec, basis)
        rates = np.abs(ev.real[~keep])
        slow = rates[rates > 0].min() if np.any(rates > 0) else gap
        s = 40.0 / slow
        ext = from_liouville_vector(linalg.expm(s * mat) @ vec, basis)
    state = 0.5 * (state + state.conj().T)
    ext = 0.5 * (ext + ext.conj().T)
    return SteadyStateReport(
        state=state,
        predicted=predicted,
        extrapolated=ext,
        distance_to_predicted=trace_distance(ext, predicted),
        kernel_dim=kernel_dim,
        expected_kernel_dim=expected,
        extra_kernel=kernel_dim > expected,
        gap=gap,
        s=s,
    )


def chi_blocks(chi1, chi2, basis: QBasis, rtol: float = 1e-14) -> dict:
    """Non-zero ``(chi1, chi2)`` sub-matrices keyed by the pair of label classes."""
    names = basis.block_names()
    classes = {}
    for i, name in enumerate(names):
        classes.setdefault(name, []).append(i)
    scale = max(np.abs(chi1).max(initial=0.0), np.abs(chi2).max(initial=0.0), 1e-300)
    out = {}
    for a, ia in classes.items():
        for b, ib in classes.items():
            c1 = chi1[np.ix_(ia, ib)]
            c2 = chi2[np.ix_(ia, ib)]
            if max(np.abs(c1).max(), np.abs(c2).max()) <= rtol * scale:
                continue
            out[f"{a}|{b}"] = {
                "rows": [str(basis.labels[i]) for i in ia],
                "cols": [str(basis.labels[i]) for i in ib],
                "chi1": c1.tolist(),
                "chi2": c2.tolist(),
            }
    return out
