"""Two-body Pauli Hamiltonians on a lattice and dense operator utilities.

Basis convention: site 0 is the most significant qubit, so the matrix of an
operator on site ``k`` of ``n`` sites is ``I x ... x O x ... x I`` with ``O``
in tensor slot ``k`` (same ordering as ``np.kron``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .errors import InvalidInput, ResourceLimit
from .lattice import CouplingSplit, LatticeSpec

PAULI_KINDS = ("X", "Y", "Z")

# kinds entering each interaction, with the weight applied to the pair coupling
# so that the sum over kinds of J_mu(y, z) equals the split's J(y, z)
INTERACTIONS = {
    "XX": (("X", 1.0),),
    "ZZ": (("Z", 1.0),),
    "XY": (("X", 0.5), ("Y", 0.5)),
}

DEFAULT_SITE_CAP = 14
# above this dimension norms use Lanczos instead of a full eigensolve
DENSE_NORM_MAX_DIM = 2048


@dataclass(frozen=True)
class Term:
    kind: str
    y: int
    z: int
    coupling: float


@dataclass(frozen=True)
class SpinModel:
    lattice: LatticeSpec
    terms: tuple[Term, ...]
    interaction: str = "XX"
    part: str = "full"
    alpha: float | None = None
    chi: float | None = None
    j0: float | None = None

    @property
    def n_sites(self) -> int:
        return self.lattice.n_sites

    def descriptor(self) -> dict:
        return {
            "alpha": self.alpha,
            "chi": self.chi,
            "j0": self.j0,
            "interaction": self.interaction,
            "part": self.part,
            "n_sites": self.n_sites,
        }


@dataclass(frozen=True)
class DenseOperator:
    """Operator on ``n_sites`` qubits with its best-known support.

    ``matrix`` is float64 when every entry is real (true for all built-in
    Hamiltonians), complex128 otherwise.
    """

    matrix: np.ndarray
    support: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        dim = self.matrix.shape[0]
        if self.matrix.ndim != 2 or self.matrix.shape[1] != dim or dim & (dim - 1):
            raise InvalidInput(f"operator must be square with power-of-two size, got {self.matrix.shape}")

    @property
    def n_sites(self) -> int:
        return int(self.matrix.shape[0]).bit_length() - 1

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return is_hermitian(self.matrix, atol)


def is_hermitian(m: np.ndarray, atol: float = 1e-12) -> bool:
    return bool(np.allclose(m, m.conj().T, rtol=0.0, atol=atol))


def _bit(n_sites: int, site: int) -> int:
    return 1 << (n_sites - 1 - site)


def pauli_string_action(n_sites: int, ops: dict[int, str]) -> tuple[int, np.ndarray]:
    """Return ``(flip_mask, phases)`` with ``P|a> = phases[a] |a ^ flip_mask>``."""
    states = np.arange(1 << n_sites)
    phases = np.ones(states.size, dtype=complex)
    mask = 0
    for site, kind in ops.items():
        b = (states >> (n_sites - 1 - site)) & 1
        sign = 1 - 2 * b
        if kind == "X":
            mask ^= _bit(n_sites, site)
        elif kind == "Y":
            mask ^= _bit(n_sites, site)
            phases *= 1j * sign
        elif kind == "Z":
            phases *= sign
        else:
            raise InvalidInput(f"unknown Pauli kind {kind!r}; expected one of {PAULI_KINDS}")
    return mask, phases


def _as_real_if_possible(m: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(m) and not np.any(m.imag):
        return np.ascontiguousarray(m.real)
    return m


def pauli_string_matrix(n_sites: int, ops: dict[int, str]) -> np.ndarray:
    mask, phases = pauli_string_action(n_sites, ops)
    dim = 1 << n_sites
    m = np.zeros((dim, dim), dtype=complex)
    cols = np.arange(dim)
    m[cols ^ mask, cols] = phases
    return _as_real_if_possible(m)


def build_model(split: CouplingSplit, part: str = "full", interaction: str = "XX") -> SpinModel:
    if interaction not in INTERACTIONS:
        raise InvalidInput(f"unknown interaction {interaction!r}; expected one of {tuple(INTERACTIONS)}")
    couplings = split.part(part)
    n = split.lattice.n_sites
    terms = []
    for y in range(n):
        for z in range(y + 1, n):
            jyz = float(couplings[y, z])
            if jyz == 0.0:
                continue
            for kind, weight in INTERACTIONS[interaction]:
                terms.append(Term(kind, y, z, weight * jyz))
    return SpinModel(
        split.lattice, tuple(terms), interaction, part, split.alpha, split.chi, split.j0
    )


def assemble_matrix(model: SpinModel, site_cap: int = DEFAULT_SITE_CAP) -> DenseOperator:
    n = model.n_sites
    if n > site_cap:
        raise ResourceLimit(f"{n} sites exceeds the dense cap of {site_cap}")
    dim = 1 << n
    h = np.zeros((dim, dim), dtype=complex)
    cols = np.arange(dim)
    for term in model.terms:
        if term.y == term.z or term.coupling < 0:
            raise InvalidInput(f"invalid term {term}")
        mask, phases = pauli_string_action(n, {term.y: term.kind, term.z: term.kind})
        h[cols ^ mask, cols] += term.coupling * phases
    support = frozenset(s for t in model.terms for s in (t.y, t.z))
    return DenseOperator(_as_real_if_possible(h), support)


def site_operator(lattice: LatticeSpec, site: int, kind: str) -> DenseOperator:
    if kind not in PAULI_KINDS:
        raise InvalidInput(f"unknown operator kind {kind!r}; expected one of {PAULI_KINDS}")
    site = lattice.check_site(site)
    return DenseOperator(pauli_string_matrix(lattice.n_sites, {site: kind}), frozenset({site}))


# relative accuracy requested from ARPACK; machine precision costs ~3x more
LANCZOS_TOL = 1e-12


def _largest_abs_eig(m, dim: int, dtype) -> float:
    v0 = np.ones(dim, dtype=dtype) / np.sqrt(dim)
    w = eigsh(m, k=1, which="LM", tol=LANCZOS_TOL, v0=v0, return_eigenvectors=False)
    return float(abs(w[0]))


def hermitian_norm(m: np.ndarray) -> float:
    """max |eigenvalue| of a Hermitian matrix."""
    dim = m.shape[0]
    if dim <= DENSE_NORM_MAX_DIM:
        w = np.linalg.eigvalsh(m)
        return float(max(abs(w[0]), abs(w[-1])))
    return _largest_abs_eig(m, dim, m.dtype)


def operator_norm(op) -> float:
    """Largest singular value of a square operator (DenseOperator or array)."""
    m = op.matrix if isinstance(op, DenseOperator) else np.asarray(op)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInput(f"operator_norm needs a square matrix, got shape {m.shape}")
    if m.size == 0 or not np.any(m):
        return 0.0
    scale = float(np.abs(m).max())
    tol = 1e-12 * max(1.0, scale)
    if is_hermitian(m, tol):
        return hermitian_norm(m)
    if np.allclose(m, -m.conj().T, rtol=0.0, atol=tol):
        return hermitian_norm(1j * m)
    dim = m.shape[0]
    if dim <= DENSE_NORM_MAX_DIM:
        return float(np.linalg.svd(m, compute_uv=False)[0])
    gram = LinearOperator((dim, dim), matvec=lambda x: m.conj().T @ (m @ x), dtype=complex)
    return float(np.sqrt(_largest_abs_eig(gram, dim, complex)))
