"""Eigenspace-adapted generator basis of su(N) for a Hermitian symmetry Q.

The basis is built in the eigenbasis of Q and rotated back. Generators fall
into three kinds:

* ``cartan``: traceless operators diagonal in the Q eigenbasis. They are
  split further into *center* elements (combinations of the sector
  projectors, commuting with every block-diagonal operator) and per-sector
  diagonal elements.
* ``within``: off-diagonal symmetric/antisymmetric pairs inside one sector.
* ``ladder``: symmetric/antisymmetric pairs coupling two sectors q < q'.

A sector's diagonal Cartan elements plus its ``within`` pairs span su(d_q) on
that block, which is the smallest set left invariant by conjugation with
unitaries generated by Q-commuting Hamiltonians. That set is what
:meth:`Label.block` identifies and what the control-matrix block structure
is checked against.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .operators import DimensionError, NotHermitianError, is_hermitian, liouville_basis


class AmbiguousClusteringWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SectorSpectrum:
    """Distinct eigenvalues of Q, their multiplicities and the grouped eigenvectors."""

    eigenvalues: np.ndarray
    multiplicities: np.ndarray
    transform: np.ndarray
    grouping_tol: float
    Q: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.transform.shape[0])

    @property
    def n_sectors(self) -> int:
        return len(self.eigenvalues)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.multiplicities)])

    def sector_slice(self, s: int) -> slice:
        off = self.offsets
        return slice(int(off[s]), int(off[s + 1]))

    def sector_of(self, value: float) -> int:
        """Index of the sector whose eigenvalue is closest to ``value``."""
        return int(np.argmin(np.abs(self.eigenvalues - value)))

    def projector(self, s: int) -> np.ndarray:
        v = self.transform[:, self.sector_slice(s)]
        return v @ v.conj().T

    def to_eigenbasis(self, a) -> np.ndarray:
        return self.transform.conj().T @ np.asarray(a) @ self.transform


@dataclass(frozen=True)
class Label:
    kind: str
    index: int
    sector: Optional[int] = None
    target: Optional[int] = None
    q: Optional[float] = None
    q_target: Optional[float] = None

    def block(self) -> tuple:
        if self.kind == "ladder":
            return ("ladder", self.sector, self.target)
        if self.sector is None:
            return ("center",)
        return ("sector", self.sector)

    def __str__(self) -> str:
        if self.kind == "cartan":
            return f"Cartan({self.index})"
        if self.kind == "within":
            return f"Within({self.q:g}, {self.index})"
        return f"Ladder({self.q:g}->{self.q_target:g}, {self.index})"


def _fmt_block(block: tuple, eigenvalues) -> str:
    if block[0] == "center":
        return "center"
    if block[0] == "sector":
        return f"sector({eigenvalues[block[1]]:g})"
    return f"ladder({eigenvalues[block[1]]:g}->{eigenvalues[block[2]]:g})"


@dataclass(frozen=True)
class QBasis:
    """Orthonormal Hermitian traceless generators with sector labels.

    ``generators`` has shape ``(N^2 - 1, N, N)``; ``liouville`` prepends the
    normalized identity so that Liouville-space indices are shifted by one.
    """

    spectrum: SectorSpectrum
    generators: np.ndarray
    labels: tuple
    root_projection: np.ndarray
    liouville: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.spectrum.dim

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def blocks(self) -> list:
        return [lab.block() for lab in self.labels]

    def block_names(self) -> list:
        return [_fmt_block(b, self.spectrum.eigenvalues) for b in self.blocks]

    def indices(self, kind: Optional[str] = None, block: Optional[tuple] = None) -> np.ndarray:
        """Generator indices (0-based, excluding the identity) matching ``kind``/``block``."""
        sel = [
            i
            for i, lab in enumerate(self.labels)
            if (kind is None or lab.kind == kind) and (block is None or lab.block() == block)
        ]
        return np.array(sel, dtype=int)

    def coefficients(self, x) -> np.ndarray:
        """Expansion coefficients ``Tr(x_i x)`` of ``x`` over the generators."""
        coef = np.einsum("iab,ab->i", self.generators.conj(), np.asarray(x))
        if np.abs(coef.imag).max(initial=0.0) <= 1e-12 * max(1.0, np.abs(coef).max(initial=0.0)):
            return coef.real.copy()
        return coef

    def reconstruct(self, coef, trace: complex = 0.0) -> np.ndarray:
        return np.einsum("i,iab->ab", np.asarray(coef), self.generators) + trace / self.dim * np.eye(self.dim)

    def ladder_pairs(self) -> list:
        """Index pairs ``(i_x, i_y)`` of ladder generators whose ``x + i y`` raises q -> q'."""
        idx = self.indices("ladder")
        return [(int(idx[k]), int(idx[k + 1])) for k in range(0, len(idx), 2)]


def sector_decompose(Q, grouping_tol: Optional[float] = None, refine=None) -> SectorSpectrum:
    """Group the eigenvectors of a Hermitian ``Q`` by (numerically) equal eigenvalue.

    Parameters
    ----------
    Q : (N, N) array_like
        Hermitian symmetry operator.
    grouping_tol : float, optional
        Eigenvalues closer than this are merged into one sector. Defaults to
        ``1e-8 * max|lambda(Q)|``.
    refine : (N, N) array_like, optional
        Hermitian operator commuting with ``Q`` used only to fix the
        eigenvector choice inside degenerate sectors (it is diagonalized on
        each sector). Sector membership is unaffected.

    Warns
    -----
    AmbiguousClusteringWarning
        When two neighbouring eigenvalues lie at a distance in
        ``(0.5 tol, 2 tol)``.
    """
    Q = np.asarray(Q, dtype=complex)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise DimensionError("Q must be square")
    if not is_hermitian(Q):
        raise NotHermitianError("symmetry operator must be Hermitian")
    evals, evecs = np.linalg.eigh(Q)
    scale = np.abs(evals).max(initial=0.0)
    if grouping_tol is None:
        grouping_tol = 1e-8 * max(scale, 1e-300)
    gaps = np.diff(evals)
    ambiguous = (gaps > 0.5 * grouping_tol) & (gaps < 2 * grouping_tol)
    if np.any(ambiguous):
        warnings.warn(
            f"eigenvalue gaps {gaps[ambiguous]} are close to grouping_tol={grouping_tol:g}; "
            "split where gap > tol",
            AmbiguousClusteringWarning,
            stacklevel=2,
        )
    starts = np.concatenate([[0], np.nonzero(gaps > grouping_tol)[0] + 1, [len(evals)]])
    values, mults, cols = [], [], []
    for a, b in zip(starts[:-1], starts[1:]):
        block = evecs[:, a:b]
        if refine is not None and b - a > 1:
            r = block.conj().T @ np.asarray(refine) @ block
            _, w = np.linalg.eigh(0.5 * (r + r.conj().T))
            block = block @ w
        block, _ = np.linalg.qr(block)
        # deterministic phase: largest-magnitude component real positive
        piv = np.argmax(np.abs(block), axis=0)
        phase = block[piv, np.arange(block.shape[1])]
        block = block * (np.abs(phase) / phase)
        values.append(float(evals[a:b].mean()))
        mults.append(b - a)
        cols.append(block)
    return SectorSpectrum(
        eigenvalues=np.array(values),
        multiplicities=np.array(mults, dtype=int),
        transform=np.concatenate(cols, axis=1),
        grouping_tol=float(grouping_tol),
        Q=Q,
    )


def _unit(dim, a, b):
    m = np.zeros((dim, dim), dtype=complex)
    m[a, b] = 1.0
    return m


def _pair(dim, a, b):
    # x + i y = sqrt(2) |b><a|
    x = (_unit(dim, a, b) + _unit(dim, b, a)) / np.sqrt(2)
    y = 1j * (_unit(dim, a, b) - _unit(dim, b, a)) / np.sqrt(2)
    return x, y


def _center_elements(spec: SectorSpectrum) -> list:
    """Orthonormal traceless combinations of the sector projectors (in the eigenbasis)."""
    dim = spec.dim
    vecs = []
    for s in range(spec.n_sectors):
        d = np.zeros(dim)
        d[spec.sector_slice(s)] = 1.0
        vecs.append(d)
    basis = [np.ones(dim) / np.sqrt(dim)]
    out = []
    for v in vecs[:-1]:
        w = v.copy()
        for e in basis:
            w -= (e @ w) * e
        norm = np.linalg.norm(w)
        if norm < 1e-12:
            continue
        w /= norm
        basis.append(w)
        out.append(np.diag(w).astype(complex))
    return out


def _sector_diagonals(d: int, offset: int, dim: int) -> list:
    out = []
    for k in range(1, d):
        w = np.zeros(dim)
        w[offset:offset + k] = 1.0
        w[offset + k] = -k
        out.append(np.diag(w / np.sqrt(k * (k + 1))).astype(complex))
    return out


def build_qbasis(spec: SectorSpectrum) -> QBasis:
    """Construct the labelled Q-adapted basis of su(N) for ``spec``."""
    dim = spec.dim
    q = spec.eigenvalues
    mats, labels, roots = [], [], []

    n_cartan = 0
    for m in _center_elements(spec):
        mats.append(m)
        labels.append(Label("cartan", n_cartan))
        roots.append(0.0)
        n_cartan += 1
    for s in range(spec.n_sectors):
        off = int(spec.offsets[s])
        for m in _sector_diagonals(int(spec.multiplicities[s]), off, dim):
            mats.append(m)
            labels.append(Label("cartan", n_cartan, sector=s, q=float(q[s])))
            roots.append(0.0)
            n_cartan += 1

    for s in range(spec.n_sectors):
        sl = spec.sector_slice(s)
        k = 0
        for a in range(sl.start, sl.stop):
            for b in range(a + 1, sl.stop):
                for m in _pair(dim, a, b):
                    mats.append(m)
                    labels.append(Label("within", k, sector=s, q=float(q[s])))
                    roots.append(0.0)
                    k += 1

    for s in range(spec.n_sectors):
        for t in range(s + 1, spec.n_sectors):
            k = 0
            delta = float(q[t] - q[s])
            for a in range(spec.sector_slice(s).start, spec.sector_slice(s).stop):
                for b in range(spec.sector_slice(t).start, spec.sector_slice(t).stop):
                    for m in _pair(dim, a, b):
                        mats.append(m)
                        labels.append(Label("ladder", k, sector=s, target=t, q=float(q[s]), q_target=float(q[t])))
                        roots.append(delta)
                        k += 1

    v = spec.transform
    gens = np.einsum("ab,kbc,dc->kad", v, np.array(mats), v.conj())
    # exact Hermiticity after rotation
    gens = 0.5 * (gens + np.conj(np.swapaxes(gens, 1, 2)))
    return QBasis(
        spectrum=spec,
        generators=gens,
        labels=tuple(labels),
        root_projection=np.array(roots),
        liouville=liouville_basis(gens),
    )


@dataclass(frozen=True)
class CentralizerDims:
    N_Q: int
    N_q: dict
    N_qq: dict


def centralizer_dims(basis: QBasis) -> CentralizerDims:
    """Centralizer dimension and per-sector / per-transition label counts.

    ``N_q`` maps each eigenvalue q to the number of ``within`` generators of
    that sector and ``N_qq`` maps ``(q, q')`` to the number of ladder
    generators between them. Keys are rounded to 10 decimals.
    """
    q = np.round(basis.spectrum.eigenvalues, 10) + 0.0
    n_q = {float(v): 0 for v in q}
    n_qq = {}
    n_cartan = 0
    for lab in basis.labels:
        if lab.kind == "cartan":
            n_cartan += 1
        elif lab.kind == "within":
            n_q[float(q[lab.sector])] += 1
        else:
            key = (float(q[lab.sector]), float(q[lab.target]))
            n_qq[key] = n_qq.get(key, 0) + 1
    return CentralizerDims(N_Q=n_cartan + sum(n_q.values()), N_q=n_q, N_qq=n_qq)


@dataclass
class SupportReport:
    coefficients: np.ndarray
    identity_weight: float
    kind_weights: dict
    block_weights: dict
    norm: float
    preserving: bool

    @property
    def ladder_weight(self) -> float:
        return self.kind_weights.get("ladder", 0.0)


def classify_operator(x, basis: QBasis, tol: float = 1e-9) -> SupportReport:
    """Project ``x`` on each label class of ``basis``.

    Weights are HS norms of the projections, so a basis element has weight 1
    on its own class. ``x`` is symmetry preserving when its ladder weight is
    at most ``tol * ||x||``.
    """
    x = np.asarray(x)
    coef = basis.coefficients(x)
    weights_kind: dict = {"cartan": 0.0, "within": 0.0, "ladder": 0.0}
    weights_block: dict = {}
    for c, lab in zip(coef, basis.labels):
        w = abs(c) ** 2
        weights_kind[lab.kind] += w
        key = lab.block()
        weights_block[key] = weights_block.get(key, 0.0) + w
    weights_kind = {k: float(np.sqrt(v)) for k, v in weights_kind.items()}
    weights_block = {k: float(np.sqrt(v)) for k, v in weights_block.items()}
    norm = float(np.linalg.norm(x))
    return SupportReport(
        coefficients=coef,
        identity_weight=float(abs(np.trace(x)) / np.sqrt(basis.dim)),
        kind_weights=weights_kind,
        block_weights=weights_block,
        norm=norm,
        preserving=weights_kind["ladder"] <= tol * norm,
    )


@dataclass
class BlockPopulations:
    populations: np.ndarray
    coherence_max: dict
    coherence_total: dict


def block_populations(rho, spec: SectorSpectrum) -> BlockPopulations:
    """Per-sector populations and inter-sector coherence magnitudes of ``rho``."""
    rho = np.asarray(rho)
    tr = np.trace(rho)
    if abs(tr - 1) > 1e-8:
        raise ValueError(f"density matrix trace is {tr}, expected 1")
    r = spec.to_eigenbasis(rho)
    pops = np.array([np.trace(r[spec.sector_slice(s), spec.sector_slice(s)]).real for s in range(spec.n_sectors)])
    cmax, ctot = {}, {}
    for s in range(spec.n_sectors):
        for t in range(s + 1, spec.n_sectors):
            blk = np.abs(r[spec.sector_slice(s), spec.sector_slice(t)])
            cmax[(s, t)] = float(blk.max(initial=0.0))
            ctot[(s, t)] = float(blk.sum())
    return BlockPopulations(populations=pops, coherence_max=cmax, coherence_total=ctot)


def _cplx(a) -> list:
    a = np.asarray(a)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _from_cplx(lst) -> np.ndarray:
    a = np.asarray(lst, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def qbasis_to_json(basis: QBasis) -> str:
    """Serialize ``basis``; complex entries are ``[re, im]`` pairs."""
    spec = basis.spectrum
    doc = {
        "schema": "symnoise.qbasis/1",
        "dim": spec.dim,
        "eigenvalues": spec.eigenvalues.tolist(),
        "multiplicities": spec.multiplicities.tolist(),
        "grouping_tol": spec.grouping_tol,
        "Q": _cplx(spec.Q),
        "transform": _cplx(spec.transform),
        "generators": [
            {
                "label": str(lab),
                "kind": lab.kind,
                "index": lab.index,
                "sector": lab.sector,
                "target": lab.target,
                "root_projection": float(root),
                "matrix": _cplx(g),
            }
            for lab, root, g in zip(basis.labels, basis.root_projection, basis.generators)
        ],
    }
    return json.dumps(doc)


def qbasis_from_json(text: str) -> QBasis:
    doc = json.loads(text)
    spec = SectorSpectrum(
        eigenvalues=np.array(doc["eigenvalues"], dtype=float),
        multiplicities=np.array(doc["multiplicities"], dtype=int),
        transform=_from_cplx(doc["transform"]),
        grouping_tol=float(doc["grouping_tol"]),
        Q=_from_cplx(doc["Q"]),
    )
    q = spec.eigenvalues
    labels, gens, roots = [], [], []
    for g in doc["generators"]:
        s, t = g["sector"], g["target"]
        labels.append(
            Label(
                g["kind"],
                g["index"],
                sector=s,
                target=t,
                q=None if s is None else float(q[s]),
                q_target=None if t is None else float(q[t]),
            )
        )
        gens.append(_from_cplx(g["matrix"]))
        roots.append(g["root_projection"])
    gens = np.array(gens)
    return QBasis(spec, gens, tuple(labels), np.array(roots), liouville_basis(gens))
