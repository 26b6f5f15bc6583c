"""Exact Heisenberg dynamics, commutator-norm profiles and quasi-local splitting."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .errors import InvalidInput
from .krylov import DEFAULT_TOL, expm_krylov_columns
from .lattice import LatticeSpec
from .model import (
    DEFAULT_SITE_CAP,
    DENSE_NORM_MAX_DIM,
    PAULI_KINDS,
    DenseOperator,
    SpinModel,
    assemble_matrix,
    hermitian_norm,
    is_hermitian,
    operator_norm,
    site_operator,
)

METHODS = ("dense_expm", "krylov")

def _check_hamiltonian(h: DenseOperator) -> None:
    if not h.is_hermitian(1e-12 * max(1.0, float(np.abs(h.matrix).max(initial=0.0)))):
        raise InvalidInput("Hamiltonian is not Hermitian")


class Evolver:
    """Heisenberg evolution e^{iHt} A e^{-iHt} for a fixed pair (H, A).

    The dense path diagonalizes H once and keeps A in the eigenbasis, so each
    new time costs two matrix products.
    """

    def __init__(self, h: DenseOperator, a: DenseOperator, method: str = "dense_expm",
                 tol: float = DEFAULT_TOL):
        if method not in METHODS:
            raise InvalidInput(f"unknown evolution method {method!r}; expected one of {METHODS}")
        if h.dim != a.dim:
            raise InvalidInput(f"dimension mismatch: H is {h.dim}, A is {a.dim}")
        _check_hamiltonian(h)
        self.h, self.a, self.method, self.tol = h, a, method, tol
        self.support = frozenset(a.support | h.support)
        if method == "dense_expm":
            evals, vecs = np.linalg.eigh(h.matrix)
            self._evals, self._vecs = evals, vecs
            self._a_eig = vecs.conj().T @ a.matrix @ vecs

    def matrix(self, t: float) -> np.ndarray:
        if t == 0.0:
            return np.array(self.a.matrix, dtype=complex)
        if self.method == "krylov":
            h = self.h.matrix
            left = expm_krylov_columns(h, self.a.matrix, -t, self.tol)
            return expm_krylov_columns(h, left.conj().T, -t, self.tol).conj().T
        phase = np.exp(1j * self._evals * t)
        rotated = self._a_eig * np.outer(phase, phase.conj())
        vecs = self._vecs
        if np.isrealobj(vecs):
            # real eigenvectors: four real products beat two complex ones
            re = vecs @ np.ascontiguousarray(rotated.real) @ vecs.T
            im = vecs @ np.ascontiguousarray(rotated.imag) @ vecs.T
            return re + 1j * im
        return vecs @ rotated @ vecs.conj().T

    def __call__(self, t: float) -> DenseOperator:
        return DenseOperator(self.matrix(t), self.support)


def heisenberg_evolve(h: DenseOperator, a: DenseOperator, t: float,
                      method: str = "dense_expm") -> DenseOperator:
    return Evolver(h, a, method)(float(t))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def _site_blocks(m: np.ndarray, site: int, n_sites: int):
    """The four (half x half) blocks of ``m`` indexed by the state of ``site``."""
    left, right = 1 << site, 1 << (n_sites - site - 1)
    t = m.reshape(left, 2, right, left, 2, right)
    half = left * right
    return [[np.ascontiguousarray(t[:, a, :, :, b, :]).reshape(half, half) for b in (0, 1)]
            for a in (0, 1)]


def pauli_commutator_norm(m: np.ndarray, site: int, kind: str, n_sites: int,
                          hermitian: bool | None = None) -> float:
    """||[m, P_site]|| for a single-site Pauli P.

    In a local basis where P is diagonal, [m, P] only couples the two states
    of ``site`` and is block off-diagonal with blocks -2U and 2L, so its norm
    is 2 max(|U|, |L|).  U and L are formed directly from the blocks of m
    (halves, no 1/sqrt 2 factors), so exact zeros stay exact.  For Hermitian
    ``m`` the two blocks are adjoints; pass ``hermitian`` when already known
    to skip the check.
    """
    if kind not in PAULI_KINDS:
        raise InvalidInput(f"unknown Pauli kind {kind!r}")
    (a, b), (c, d) = _site_blocks(m, site, n_sites)
    if kind == "Z":
        upper, lower = b, c
    elif kind == "X":
        # eigenbasis (1, 1)/sqrt 2, (1, -1)/sqrt 2
        upper, lower = (a - b + c - d) / 2, (a + b - c - d) / 2
    else:
        # eigenbasis (1, i)/sqrt 2, (1, -i)/sqrt 2
        upper, lower = (a - 1j * (b + c) - d) / 2, (a + 1j * (b + c) - d) / 2
    if hermitian is None:
        hermitian = is_hermitian(m, 1e-12 * max(1.0, float(np.abs(m).max(initial=0.0))))
    if hermitian:
        return 2.0 * _spectral_norm(upper)
    return 2.0 * max(_spectral_norm(upper), _spectral_norm(lower))


def _spectral_norm(x: np.ndarray) -> float:
    if not np.any(x):
        return 0.0
    # |X|^2 is the top eigenvalue of the Gram matrix; the smaller side is cheaper
    gram = x @ x.conj().T if x.shape[0] <= x.shape[1] else x.conj().T @ x
    n = gram.shape[0]
    if n > DENSE_NORM_MAX_DIM:
        return math.sqrt(max(hermitian_norm(gram), 0.0))
    top = eigh(gram, eigvals_only=True, subset_by_index=[n - 1, n - 1], driver="evr")
    return math.sqrt(max(float(top[0]), 0.0))


@dataclass(frozen=True)
class CommutatorProfile:
    source_site: int
    probe_sites: tuple[int, ...]
    times: np.ndarray
    values: np.ndarray  # shape (len(probe_sites), len(times))
    distances: np.ndarray  # r = d(source, probe) per probe row
    model_descriptor: dict = field(default_factory=dict)
    a_kind: str = "Z"
    b_kind: str = "Z"

    def rows(self):
        """Yield ``(j, r, t, value)`` in probe-major order."""
        for p, j in enumerate(self.probe_sites):
            for k, t in enumerate(self.times):
                yield j, float(self.distances[p]), float(t), float(self.values[p, k])


def _check_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise InvalidInput("times must be a non-empty 1-D sequence")
    if times[0] < 0 or np.any(np.diff(times) < 0):
        raise InvalidInput("times must be ascending and start at t >= 0")
    return times


def commutator_profile(model: SpinModel, a_kind: str, i: int, b_kind: str, probes, times,
                       method: str = "dense_expm", workers: int = 1,
                       site_cap: int = DEFAULT_SITE_CAP) -> CommutatorProfile:
    """C[j][t] = ||[A_i(t), B_j]|| over a probe x time grid.

    Every time is evaluated independently from t = 0; with ``workers > 1`` times
    are farmed out to threads and reassembled in index order.
    """
    lattice = model.lattice
    i = lattice.check_site(i)
    probes = tuple(lattice.check_site(j) for j in probes)
    if b_kind not in PAULI_KINDS:
        raise InvalidInput(f"unknown operator kind {b_kind!r}")
    times = _check_times(times)
    h = assemble_matrix(model, site_cap)
    evolver = Evolver(h, site_operator(lattice, i, a_kind), method)
    n = lattice.n_sites
    # A(t) of a Hermitian A under Hermitian H stays Hermitian
    hermitian = evolver.a.is_hermitian()

    def column(t: float) -> np.ndarray:
        at = evolver.matrix(t)
        return np.array([pauli_commutator_norm(at, j, b_kind, n, hermitian) for j in probes])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cols = list(pool.map(column, times))
    else:
        cols = [column(t) for t in times]
    values = np.stack(cols, axis=1) if cols else np.zeros((len(probes), 0))
    return CommutatorProfile(
        source_site=i,
        probe_sites=probes,
        times=times,
        values=values,
        distances=np.array([lattice.distances[i, j] for j in probes]),
        model_descriptor=model.descriptor(),
        a_kind=a_kind,
        b_kind=b_kind,
    )


def haar_twirl(a: DenseOperator, complement) -> DenseOperator:
    """Average of U A U^dagger over Haar-random U on ``complement``.

    Closed form: normalized partial trace over the complement, tensored back
    with the identity there.
    """
    n = a.n_sites
    comp = sorted({int(s) for s in complement})
    if any(not 0 <= s < n for s in comp):
        raise InvalidInput(f"complement {comp} not within {n} sites")
    keep = [s for s in range(n) if s not in comp]
    base_support = a.support or frozenset(range(n))
    support = frozenset(base_support - set(comp))
    if not comp:
        return DenseOperator(a.matrix, support)
    dk, dc = 1 << len(keep), 1 << len(comp)
    order = keep + comp
    t = a.matrix.reshape((2,) * (2 * n))
    t = t.transpose(order + [n + s for s in order]).reshape(dk, dc, dk, dc)
    reduced = np.trace(t, axis1=1, axis2=3) / dc
    full = reduced[:, None, :, None] * np.eye(dc)[None, :, None, :]
    inverse = np.argsort(order)
    full = full.reshape((2,) * (2 * n)).transpose(list(inverse) + [n + s for s in inverse])
    return DenseOperator(np.ascontiguousarray(full.reshape(a.matrix.shape)), support)


# c = 2(1 + e): telescoping constant in ||A^l(t)|| <= c ||A|| e^{-l}
QUASILOCAL_C = 2.0 * (1.0 + math.e)


@dataclass
class QuasiLocalDecomposition:
    center: int
    chi: float
    v: float
    t: float
    R: float
    radii: list[float]
    delta_norms: list[float]
    tail_norms: list[float]  # ||A(l,t) - A(t)||
    tail_bounds: list[float]  # 2 ||A|| e^{-l}
    delta_bounds: list[float]  # c ||A|| e^{-l}
    truncated: bool
    projected: list[DenseOperator] | None = None
    deltas: list[DenseOperator] | None = None

    @property
    def lmax(self) -> int:
        return len(self.radii) - 1

    def violations(self) -> list[int]:
        return [l for l, (m, b) in enumerate(zip(self.tail_norms, self.tail_bounds)) if m > b]


def quasilocal_decompose(lattice: LatticeSpec, h_sr: DenseOperator, a: DenseOperator, i: int,
                         t: float, chi: float, v: float, lmax: int,
                         method: str = "dense_expm",
                         keep_operators: bool = True,
                         evolver: Evolver | None = None) -> QuasiLocalDecomposition:
    """Split A(t) (evolved under ``h_sr``) into twirled shells A^l(t).

    Ball l has radius R + l*chi with R = chi*v*t.  The schedule stops at the
    first ball covering the whole lattice; ``truncated`` is set when that
    happens before ``lmax``.  With ``keep_operators=False`` only norms are
    retained, which keeps memory flat for 12-site chains.  Pass an
    ``evolver`` built from ``(h_sr, a)`` to share one diagonalization across
    several times.
    """
    i = lattice.check_site(i)
    if lmax < 0:
        raise InvalidInput("lmax must be >= 0")
    a_norm = operator_norm(a)
    if evolver is None:
        evolver = Evolver(h_sr, a, method)
    elif evolver.h is not h_sr or evolver.a is not a:
        raise InvalidInput("evolver was built for a different (H, A) pair")
    at = evolver(float(t))
    R = chi * v * t
    all_sites = frozenset(range(lattice.n_sites))
    radii, projected, deltas = [], [], []
    delta_norms, tail_norms = [], []
    prev = None
    truncated = False
    for l in range(lmax + 1):
        radius = R + l * chi
        ball = lattice.ball(i, radius)
        proj = haar_twirl(at, all_sites - ball)
        delta = proj.matrix if prev is None else proj.matrix - prev.matrix
        radii.append(radius)
        delta_norms.append(operator_norm(delta))
        tail_norms.append(0.0 if ball == all_sites else operator_norm(proj.matrix - at.matrix))
        if keep_operators:
            projected.append(proj)
            deltas.append(DenseOperator(delta, ball))
        prev = proj
        if ball == all_sites:
            truncated = l < lmax
            break
    ls = range(len(radii))
    return QuasiLocalDecomposition(
        center=i,
        chi=chi,
        v=v,
        t=t,
        R=R,
        radii=radii,
        delta_norms=delta_norms,
        tail_norms=tail_norms,
        tail_bounds=[2.0 * a_norm * math.exp(-l) for l in ls],
        delta_bounds=[QUASILOCAL_C * a_norm * math.exp(-l) for l in ls],
        truncated=truncated,
        projected=projected if keep_operators else None,
        deltas=deltas if keep_operators else None,
    )
