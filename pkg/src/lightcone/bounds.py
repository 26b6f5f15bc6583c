"""Analytic light-cone bounds for power-law spin models and their kernel checks.

The long-range bound is assembled from two kernels on the lattice:

* ``K`` -- flat out to 2R, then decaying as exp(-(d - 2R) / 2chi);
* ``F`` -- flat out to 6R, then decaying as (6R/d)**alpha;

with ``R = chi * v * t`` the short-range light-cone radius.  The constants
``g`` (reproducibility of ``F``) and ``b`` (half-space constant) are fitted on
the lattice instead of assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.special import zeta as hurwitz_zeta

from .errors import InvalidInput, ResourceLimit, UnsupportedRegime
from .lattice import CouplingSplit, LatticeSpec, build_lattice, coupling_split

KAPPA = math.e / (math.e - 1.0)
C_QUASILOCAL = 2.0 * (1.0 + math.e)
SERIES_CAP = 12
VARIANTS = ("short_range", "hastings_koma", "paper_fixed_chi", "paper_optimized", "scaling_form")

_EXP_CAP = 700.0


def lr_velocity(lambda_sr: float) -> float:
    """Short-range Lieb-Robinson velocity 4 e lambda_sr."""
    return 4.0 * math.e * lambda_sr


def _exp(x):
    return np.exp(np.minimum(x, _EXP_CAP))


# --------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class Kernel:
    lattice: LatticeSpec
    kind: str
    values: np.ndarray
    R: float
    chi: float
    alpha: float


def k_profile(d, R: float, chi: float):
    d = np.asarray(d, dtype=float)
    return np.where(d <= 2 * R, 1.0, np.exp(-(d - 2 * R) / (2 * chi)))


def f_profile(d, R: float, alpha: float):
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore"):
        tail = (6 * R / np.where(d > 0, d, 1.0)) ** alpha
    return np.where(d <= 6 * R, 1.0, tail)


def build_kernel(lattice: LatticeSpec, kind: str, R: float, chi: float, alpha: float,
                 j0: float = 1.0, kappa: float = KAPPA) -> Kernel:
    if not R > 0:
        raise InvalidInput(f"R must be > 0, got {R}")
    if not chi >= 1:
        raise InvalidInput(f"chi must be >= 1, got {chi}")
    d = lattice.distances
    if kind == "K":
        values = k_profile(d, R, chi)
    elif kind == "F":
        values = f_profile(d, R, alpha)
    elif kind == "Jlr":
        return replace(jlr_matrix_with_diagonal(coupling_split(lattice, alpha, j0, chi), kappa), R=R)
    else:
        raise InvalidInput(f"unknown kernel kind {kind!r}")
    values.setflags(write=False)
    return Kernel(lattice, kind, values, float(R), float(chi), float(alpha))


def jlr_matrix_with_diagonal(split: CouplingSplit, kappa: float = KAPPA) -> Kernel:
    """Long-range couplings with every diagonal entry set to kappa * lambda_chi."""
    values = np.array(split.long, dtype=float)
    np.fill_diagonal(values, kappa * split.lambda_chi)
    values.setflags(write=False)
    return Kernel(split.lattice, "Jlr", values, float("nan"), split.chi, split.alpha)


# --------------------------------------------------------------------------
# coupling sources: supply lambda_sr, lambda_chi, g and b for any cutoff


class LatticeCouplings:
    """Constants measured on a finite lattice (exact sums, fitted g and b)."""

    def __init__(self, lattice: LatticeSpec, alpha: float, j0: float = 1.0):
        self.lattice, self.alpha, self.j0 = lattice, float(alpha), float(j0)
        self.D = lattice.dimension
        self._distances = np.unique(lattice.distances[lattice.distances > 0])
        self._lambdas: dict[float, tuple[float, float]] = {}
        self._g: dict[float, float] = {}

    def breakpoints(self) -> np.ndarray:
        """Cutoffs at which the short/long partition changes."""
        return self._distances

    def split(self, chi: float) -> CouplingSplit:
        return coupling_split(self.lattice, self.alpha, self.j0, chi)

    def lambdas(self, chi: float) -> tuple[float, float]:
        # the partition only depends on the largest lattice distance <= chi
        key = float(self._distances[self._distances <= chi + 1e-12].max(initial=0.0))
        if key not in self._lambdas:
            s = self.split(max(chi, 1.0))
            self._lambdas[key] = (s.lambda_sr, s.lambda_chi)
        return self._lambdas[key]

    def g(self, R: float) -> float:
        if R not in self._g:
            f = build_kernel(self.lattice, "F", R, 1.0, self.alpha)
            self._g[R] = verify_reproducibility(f, R, self.D).g
        return self._g[R]

    def b(self, R: float, chi: float) -> float:
        k = build_kernel(self.lattice, "K", R, chi, self.alpha)
        return float(k.values.sum(axis=1).max() / R**self.D)


@lru_cache(maxsize=None)
def _reference_chain_g(alpha: float, length: int = 200, R: float = 5.0) -> float:
    lattice = build_lattice([length])
    return verify_reproducibility(build_kernel(lattice, "F", R, 1.0, alpha), R, 1).g


class ChainAsymptotics:
    """Constants for an infinite chain with couplings j0/d**alpha.

    Lambdas come from Hurwitz-zeta tails.  ``F`` depends on d only through d/R,
    so g is R-independent at large R; by default it is fitted once on a
    200-site chain at R = 5.
    """

    D = 1

    def __init__(self, alpha: float, j0: float = 1.0, g: float | None = None):
        if not alpha > 1:
            raise UnsupportedRegime(f"infinite-chain sums need alpha > 1, got {alpha}")
        self.alpha, self.j0 = float(alpha), float(j0)
        self._g_value = g

    def breakpoints(self) -> np.ndarray:
        return np.empty(0)

    def lambdas(self, chi: float) -> tuple[float, float]:
        n = int(math.floor(chi + 1e-12))
        lam_sr = 2.0 * self.j0 * sum(d ** -self.alpha for d in range(1, n + 1))
        lam_chi = 2.0 * self.j0 * float(hurwitz_zeta(self.alpha, n + 1))
        return lam_sr, lam_chi

    def g(self, R: float) -> float:
        if self._g_value is None:
            self._g_value = _reference_chain_g(self.alpha)
        return self._g_value

    def b(self, R: float, chi: float) -> float:
        # sum over d in Z of K(d): flat core plus two geometric tails
        m = math.floor(2 * R)
        first = (m + 1 - 2 * R) / (2 * chi)
        q = math.exp(-1.0 / (2 * chi))
        tail = math.exp(-first) / (1.0 - q)
        return (2 * m + 1 + 2 * tail) / R


# --------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class BoundParams:
    """All constants entering the bounds at one (chi, t).

    Derived quantities are properties, so R and v_chi always track t and chi.
    Use :meth:`at` to move to another (chi, t): it refits lambdas and g from
    the attached coupling source.
    """

    alpha: float
    D: int
    j0: float
    chi: float
    t: float
    lambda_sr: float
    lambda_chi: float
    g: float = 1.0
    b: float = 1.0
    source: object = field(default=None, compare=False, repr=False)

    c = C_QUASILOCAL
    kappa = KAPPA

    @property
    def v(self) -> float:
        return lr_velocity(self.lambda_sr)

    @property
    def R(self) -> float:
        return self.chi * self.v * self.t

    @property
    def vartheta(self) -> float:
        return self.g * 4.0 * self.kappa**3 * self.c**2

    @property
    def v_chi(self) -> float:
        return self.vartheta * self.R**self.D * self.lambda_chi

    @property
    def effective_kappa_sq(self) -> float:
        """kappa**2 with the 2 * 6**alpha factor that the closed form absorbs."""
        return 2.0 * 6.0**self.alpha * self.kappa**2

    @property
    def long_time(self) -> bool:
        """vt > alpha log alpha, needed by the algebraic convolution branch."""
        return self.v * self.t > self.alpha * math.log(self.alpha)

    def at(self, chi: float | None = None, t: float | None = None) -> "BoundParams":
        chi = self.chi if chi is None else float(chi)
        t = self.t if t is None else float(t)
        if self.source is None:
            return replace(self, chi=chi, t=t)
        return make_params(self.source, chi, t)

    def with_R(self, R: float) -> "BoundParams":
        """Same cutoff, with t chosen so that chi * v * t = R."""
        return self.at(t=R / (self.chi * self.v))


def make_params(source, chi: float, t: float) -> BoundParams:
    if not chi >= 1:
        raise InvalidInput(f"chi must be >= 1, got {chi}")
    if t < 0:
        raise InvalidInput(f"t must be >= 0, got {t}")
    lam_sr, lam_chi = source.lambdas(chi)
    R = chi * lr_velocity(lam_sr) * t
    g = source.g(R) if R > 0 else math.nan
    b = source.b(R, chi) if R > 0 else math.nan
    return BoundParams(source.alpha, source.D, source.j0, float(chi), float(t),
                       lam_sr, lam_chi, g, b, source)


def lattice_params(lattice: LatticeSpec, alpha: float, chi: float, t: float,
                   j0: float = 1.0) -> BoundParams:
    return make_params(LatticeCouplings(lattice, alpha, j0), chi, t)


# --------------------------------------------------------------------------
# series and kernel verifiers


def j_a_series(K: Kernel, Jlr: Kernel, a: int, i: int, j: int, params: BoundParams,
               cap: int = SERIES_CAP) -> float:
    """kappa^2 (2 kappa^2 c^2)^a [K (Jlr K)^a]_{ij} by repeated row-vector products."""
    if a < 1:
        raise InvalidInput(f"series order must be >= 1, got {a}")
    if a > cap:
        raise ResourceLimit(f"series order {a} exceeds cap {cap}")
    if K.values.shape != Jlr.values.shape:
        raise InvalidInput("kernels live on different lattices")
    kap, c = params.kappa, params.c
    row = K.values[i]
    for _ in range(a):
        row = (row @ Jlr.values) @ K.values
    return float(kap**2 * (2 * kap**2 * c**2) ** a * row[j])


@dataclass
class ConvolutionReport:
    max_ratio: float
    argmax_pair: tuple[int, int]
    max_ratio_near: float
    max_ratio_far: float
    argmax_far: tuple[int, int] | None
    fitted_b: float
    half_space_max_ratio: float
    in_regime: bool
    degenerate: bool
    near_ok: bool
    far_ok: bool | None  # None: outside vt > alpha log alpha, not asserted

    @property
    def passed(self) -> bool:
        return self.near_ok and self.far_ok is not False

    def as_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()} | {
            "passed": self.passed
        }


def verify_convolution(K: Kernel, Jlr: Kernel, F: Kernel, params: BoundParams,
                       atol: float = 1e-12) -> ConvolutionReport:
    """Scan every pair for sum_y K(z1,y) Jlr(y,z2) <= 2 kappa lambda_chi F(z1,z2).

    Pairs with d <= 6R are always asserted; pairs beyond 6R only when
    vt > alpha log alpha.  Also fits b = max_z sum_y K(z,y) / R^D and checks the
    half-space estimate b R^D j0 (3/d)^alpha + 2 kappa lambda_chi exp(-d/6chi).
    """
    lattice = K.lattice
    d = lattice.distances
    R, chi, alpha, D = K.R, K.chi, params.alpha, lattice.dimension
    lam = params.lambda_chi
    near = d <= 6 * R
    vt = R / chi
    in_regime = vt > alpha * math.log(alpha)
    b = float(K.values.sum(axis=1).max() / R**D)
    if lam == 0.0:
        return ConvolutionReport(0.0, (0, 0), 0.0, 0.0, None, b, 0.0, in_regime, True,
                                 True, True if in_regime else None)
    G = K.values @ Jlr.values
    ratio = G / (2 * params.kappa * lam * F.values)
    flat = int(np.argmax(ratio))
    pair = tuple(int(x) for x in np.unravel_index(flat, ratio.shape))
    near_max = float(ratio[near].max())
    far = ~near
    if far.any():
        far_vals = np.where(far, ratio, -np.inf)
        far_flat = int(np.argmax(far_vals))
        far_pair = tuple(int(x) for x in np.unravel_index(far_flat, ratio.shape))
        far_max = float(far_vals.flat[far_flat])
        dfar = d[far]
        half_space = b * R**D * params.j0 * (3.0 / dfar) ** alpha + 2 * params.kappa * lam * np.exp(
            -dfar / (6 * chi)
        )
        hs_ratio = float((G[far] / half_space).max())
    else:
        far_pair, far_max, hs_ratio = None, 0.0, 0.0
    return ConvolutionReport(
        max_ratio=float(ratio.flat[flat]),
        argmax_pair=pair,
        max_ratio_near=near_max,
        max_ratio_far=far_max,
        argmax_far=far_pair,
        fitted_b=b,
        half_space_max_ratio=hs_ratio,
        in_regime=in_regime,
        degenerate=False,
        near_ok=near_max <= 1.0 + atol,
        far_ok=(far_max <= 1.0 + atol) if in_regime else None,
    )


@dataclass
class ReproducibilityReport:
    g: float
    worst_pair: tuple[int, int]
    worst_intermediate: int

    @property
    def worst_triple(self) -> tuple[int, int, int]:
        z1, z3 = self.worst_pair
        return z1, self.worst_intermediate, z3

    def as_dict(self) -> dict:
        return {"g": self.g, "worst_triple": list(self.worst_triple)}


def verify_reproducibility(F: Kernel, R: float, D: int) -> ReproducibilityReport:
    """Fit g = max_{z1,z3} sum_z2 F(z1,z2) F(z2,z3) / (R^D F(z1,z3))."""
    f = F.values
    ratio = (f @ f) / (R**D * f)
    flat = int(np.argmax(ratio))
    z1, z3 = (int(x) for x in np.unravel_index(flat, ratio.shape))
    z2 = int(np.argmax(f[z1] * f[:, z3]))
    return ReproducibilityReport(float(ratio.flat[flat]), (z1, z3), z2)


# --------------------------------------------------------------------------
# bounds


def bound_short_range(params: BoundParams, r, t):
    """2 exp(v t - r / chi) for unit-norm operators."""
    r, t = np.asarray(r, dtype=float), np.asarray(t, dtype=float)
    if np.any(r < 0) or np.any(t < 0):
        raise InvalidInput("r and t must be >= 0")
    out = 2.0 * _exp(params.v * t - r / params.chi)
    return float(out) if out.ndim == 0 else out


def bound_hastings_koma(params: BoundParams, r, t):
    """Comparison curve exp(v t) / r**alpha, prefactor fixed to 1."""
    r, t = np.asarray(r, dtype=float), np.asarray(t, dtype=float)
    if np.any(r < 1):
        raise InvalidInput("Hastings-Koma curve needs r >= 1")
    out = _exp(params.v * t) / r**params.alpha
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PaperBound:
    value: float
    chi: float
    R: float
    v_chi: float
    far_enough: bool  # r > 6R
    long_time: bool  # vt > alpha log alpha

    @property
    def in_regime(self) -> bool:
        return self.far_enough and self.long_time


def paper_bound_value(p: BoundParams, r: float) -> float:
    """2 c kappa (exp(vt - r/chi) + 2 kappa exp(v_chi t) (R/r)^alpha) at p's (chi, t)."""
    short = math.exp(min(float(p.v * p.t - r / p.chi), _EXP_CAP))
    if p.R > 0:
        # log space: v_chi t and (R/r)^alpha overflow separately at small r
        log_long = math.log(2 * p.kappa) + float(p.v_chi * p.t) + p.alpha * math.log(p.R / r)
        long = math.exp(min(log_long, _EXP_CAP))
    else:
        long = 0.0
    return 2 * p.c * p.kappa * (short + long)


def bound_paper(params: BoundParams, r: float, t: float, chi: float | None = None) -> PaperBound:
    if not r > 0 or not t > 0:
        raise InvalidInput(f"paper bound needs r > 0 and t > 0, got r={r}, t={t}")
    p = params.at(chi=chi, t=t)
    return PaperBound(paper_bound_value(p, r), p.chi, p.R, p.v_chi, r > 6 * p.R, p.long_time)


def light_cone_gamma(alpha: float, D: int) -> float:
    if not alpha > 2 * D:
        raise UnsupportedRegime(f"polynomial light cone needs alpha > 2D, got alpha={alpha}, D={D}")
    return (1 + D) / (alpha - 2 * D)


def zeta_exponent(alpha: float, D: int) -> float:
    """Light-cone exponent zeta with t ~ r**zeta; 1/zeta = 1 + (1+D)/(alpha-2D)."""
    if math.isinf(alpha):
        return 1.0
    return 1.0 / (1.0 + light_cone_gamma(alpha, D))


@dataclass(frozen=True)
class CutoffChoice:
    chi: float
    value: float
    mode: str
    bound: PaperBound


def _golden_section(f, lo: float, hi: float, tol: float) -> float:
    inv_phi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (a + b) / 2


def scaling_chi0(params: BoundParams) -> float:
    """Cutoff at t = 1 for which v_chi * t = 1 (lower-clamped at 1)."""

    def excess(chi):
        return params.at(chi=chi, t=1.0).v_chi - 1.0

    if excess(1.0) <= 0:
        return 1.0
    lo, hi = 1.0, 2.0
    while excess(hi) > 0:
        lo, hi = hi, hi * 2
        if hi > 1e15:
            raise UnsupportedRegime("no cutoff brings v_chi t down to 1")
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1 < 1e-12:
            break
    return hi


def scaling_cutoff(params: BoundParams, t: float) -> float:
    gamma = light_cone_gamma(params.alpha, params.D)
    return max(1.0, scaling_chi0(params) * t**gamma)


def optimize_cutoff(params: BoundParams, r: float, t: float, mode: str = "numeric",
                    tol: float = 1e-6) -> CutoffChoice:
    """Choose chi for the long-range bound at (r, t).

    ``scaling``: chi = max(1, chi0 t^gamma), gamma = (1+D)/(alpha-2D).
    ``numeric``: golden-section over chi in [1, r/(6 v t)] (v taken at chi = 1),
    then the best of that, the interval ends, any lattice breakpoints inside
    it and, when alpha > 2D, the scaling choice.
    """
    if mode == "scaling":
        chi = scaling_cutoff(params, t)
        pb = bound_paper(params, r, t, chi)
        return CutoffChoice(chi, pb.value, mode, pb)
    if mode != "numeric":
        raise InvalidInput(f"unknown cutoff mode {mode!r}")
    v1 = params.at(chi=1.0, t=t).v
    hi = max(1.0, r / (6 * v1 * t))

    def value(chi):
        return bound_paper(params, r, t, chi).value

    candidates = {1.0, hi}
    if hi > 1.0:
        candidates.add(_golden_section(value, 1.0, hi, tol))
        source = params.source
        if source is not None:
            bps = source.breakpoints()
            candidates.update(float(x) for x in bps[(bps >= 1.0) & (bps <= hi)])
    if params.alpha > 2 * params.D:
        candidates.add(scaling_cutoff(params, t))
    best = min(sorted(candidates), key=value)
    pb = bound_paper(params, r, t, best)
    return CutoffChoice(best, pb.value, mode, pb)


def scaling_bound(r, t, alpha: float, D: int, v: float = 1.0):
    """Prefactor-free optimized-cutoff form exp(vt - r/t^gamma) + t^(alpha(1+gamma)) / r^alpha."""
    gamma = light_cone_gamma(alpha, D)
    r, t = np.asarray(r, dtype=float), np.asarray(t, dtype=float)
    with np.errstate(over="ignore"):
        log_long = alpha * (1 + gamma) * np.log(t) - alpha * np.log(r)
        out = _exp(v * t - r / t**gamma) + _exp(log_long)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# curves


@dataclass
class BoundCurve:
    r: np.ndarray
    t: np.ndarray
    values: np.ndarray  # min(2, unclipped), shape (len(r), len(t))
    unclipped: np.ndarray
    variant: str
    params: BoundParams | None = None
    far_enough: np.ndarray | None = None
    long_time: np.ndarray | None = None
    chi: np.ndarray | None = None

    @property
    def distances(self) -> np.ndarray:
        return self.r

    @property
    def times(self) -> np.ndarray:
        return self.t


def evaluate_curve(variant: str, r_values, t_values, params: BoundParams | None = None,
                   alpha: float | None = None, D: int | None = None, v: float = 1.0,
                   chi_mode: str = "numeric") -> BoundCurve:
    """Evaluate a bound variant on the (r, t) grid."""
    if variant not in VARIANTS:
        raise InvalidInput(f"unknown bound variant {variant!r}; expected one of {VARIANTS}")
    r = np.asarray(r_values, dtype=float)
    t = np.asarray(t_values, dtype=float)
    rr, tt = np.meshgrid(r, t, indexing="ij")
    far = longt = chis = None
    if variant == "scaling_form":
        if alpha is None or D is None:
            if params is None:
                raise InvalidInput("scaling_form needs alpha and D (or params)")
            alpha, D = params.alpha, params.D
        raw = scaling_bound(rr, tt, alpha, D, v)
    elif params is None:
        raise InvalidInput(f"variant {variant!r} needs BoundParams")
    elif variant == "short_range":
        raw = bound_short_range(params, rr, tt)
    elif variant == "hastings_koma":
        raw = bound_hastings_koma(params, rr, tt)
    else:
        raw = np.empty(rr.shape)
        far = np.zeros(rr.shape, dtype=bool)
        longt = np.zeros(rr.shape, dtype=bool)
        chis = np.empty(rr.shape)
        for idx in np.ndindex(rr.shape):
            rv, tv = float(rr[idx]), float(tt[idx])
            if variant == "paper_fixed_chi":
                pb = bound_paper(params, rv, tv, params.chi)
            else:
                pb = optimize_cutoff(params, rv, tv, chi_mode).bound
            raw[idx], far[idx], longt[idx], chis[idx] = pb.value, pb.far_enough, pb.long_time, pb.chi
    raw = np.asarray(raw, dtype=float)
    return BoundCurve(r, t, np.minimum(raw, 2.0), raw, variant, params, far, longt, chis)
