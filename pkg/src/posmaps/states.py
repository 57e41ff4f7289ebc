"""Bipartite density matrices used in the experiments, plus random separable states."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt

import numpy as np

from .linalg import ContractViolation, check_hermitian, eigvals_desc, partial_trace, partial_transpose

STATE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class BipartiteState:
    """A density matrix on ``C^dA (x) C^dB``.

    ``validate=False`` skips the trace/positivity checks, which is useful for
    intermediate objects such as filtered or loaded matrices that are checked
    elsewhere.
    """

    matrix: np.ndarray
    d_a: int
    d_b: int
    validate: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        mat = check_hermitian(self.matrix, tol=1e-10)
        if mat.shape[0] != self.d_a * self.d_b:
            raise ContractViolation(
                f"matrix dim {mat.shape[0]} != {self.d_a}*{self.d_b}"
            )
        mat = 0.5 * (mat + mat.conj().T)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        if self.validate:
            tr = np.trace(mat).real
            if abs(tr - 1.0) > 1e-10:
                raise ContractViolation(f"trace is {tr!r}, expected 1")
            lam_min = eigvals_desc(mat)[-1]
            if lam_min < -1e-9:
                raise ContractViolation(f"not positive semidefinite (min eigenvalue {lam_min:.3g})")

    @property
    def dims(self) -> tuple[int, int]:
        return (self.d_a, self.d_b)

    @property
    def dim(self) -> int:
        return self.d_a * self.d_b

    def subsystem_dim(self, side: str) -> int:
        return self.d_a if side == "A" else self.d_b

    def reduced(self, keep: str) -> np.ndarray:
        key = ("reduced", keep)
        if key not in self._cache:
            self._cache[key] = partial_trace(self.matrix, self.dims, keep)
        return self._cache[key]

    def partial_transpose(self, side: str = "B") -> np.ndarray:
        return partial_transpose(self.matrix, self.dims, side)


def other_side(side: str) -> str:
    if side not in ("A", "B"):
        raise ValueError(f"subsystem label must be 'A' or 'B', got {side!r}")
    return "A" if side == "B" else "B"


def max_entangled_projector(d: int) -> np.ndarray:
    """``P_+ = |phi+><phi+|`` with ``|phi+> = sum_i |ii> / sqrt(d)``."""
    if d < 2:
        raise ValueError("d must be at least 2")
    phi = np.zeros(d * d, dtype=complex)
    phi[np.arange(d) * (d + 1)] = 1.0 / np.sqrt(d)
    return np.outer(phi, phi.conj())


def isotropic_state(d: int, p: float) -> BipartiteState:
    """``p P_+ + (1 - p) 1/d^2``; valid for ``-1/(d^2-1) <= p <= 1``."""
    lo = -1.0 / (d * d - 1)
    if not (lo - 1e-12 <= p <= 1.0 + 1e-12):
        raise ValueError(f"p={p} outside the positive range [{lo:.6g}, 1]")
    mat = p * max_entangled_projector(d) + (1 - p) * np.eye(d * d) / (d * d)
    return BipartiteState(mat, d, d)


def two_qubit_family(a: float, q: float) -> BipartiteState:
    """``q|Psi1><Psi1| + (1-q)|Psi2><Psi2|`` with
    ``|Psi1> = a|00> + sqrt(1-a^2)|11>`` and ``|Psi2> = a|10> + sqrt(1-a^2)|01>``."""
    if not (0.0 <= a <= 1.0 and 0.0 <= q <= 1.0):
        raise ValueError("a and q must lie in [0, 1]")
    b = np.sqrt(1.0 - a * a)
    psi1 = np.array([a, 0, 0, b], dtype=complex)
    psi2 = np.array([0, b, a, 0], dtype=complex)
    mat = q * np.outer(psi1, psi1.conj()) + (1 - q) * np.outer(psi2, psi2.conj())
    return BipartiteState(mat, 2, 2)


# -- angular momentum -------------------------------------------------------


def _as_half_integer(j) -> Fraction:
    f = Fraction(j).limit_denominator(2)
    if f < 0 or (2 * f).denominator != 1 or abs(float(f) - float(j)) > 1e-12:
        raise ValueError(f"{j} is not a nonnegative half-integer")
    return f


def clebsch_gordan(j1, m1, j2, m2, j, m) -> float:
    """``<j1 m1; j2 m2 | j m>`` from the closed-form Racah expression."""
    j1, m1, j2, m2, j, m = (Fraction(x).limit_denominator(2) for x in (j1, m1, j2, m2, j, m))
    if m1 + m2 != m:
        return 0.0
    if not (abs(j1 - j2) <= j <= j1 + j2):
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(m) > j:
        return 0.0

    def fact(x: Fraction) -> int:
        assert x.denominator == 1 and x >= 0
        return factorial(int(x))

    pref = (2 * j + 1) * Fraction(
        fact(j + j1 - j2) * fact(j - j1 + j2) * fact(j1 + j2 - j),
        fact(j1 + j2 + j + 1),
    )
    pref *= (
        fact(j + m) * fact(j - m) * fact(j1 - m1) * fact(j1 + m1) * fact(j2 - m2) * fact(j2 + m2)
    )
    total = Fraction(0)
    k = 0
    while True:
        args = (
            k,
            j1 + j2 - j - k,
            j1 - m1 - k,
            j2 + m2 - k,
            j - j2 + m1 + k,
            j - j1 - m2 + k,
        )
        if args[1] < 0 or args[2] < 0 or args[3] < 0:
            break
        if args[4] >= 0 and args[5] >= 0:
            den = 1
            for x in args:
                den *= fact(x)
            total += Fraction((-1) ** k, den)
        k += 1
    return float(np.sign(float(total)) * sqrt(float(pref * total * total)))


def spin_basis(j) -> list[Fraction]:
    """Local magnetic quantum numbers ``m = j, j-1, ..., -j`` (index order)."""
    j = _as_half_integer(j)
    return [j - k for k in range(int(2 * j) + 1)]


@dataclass(frozen=True)
class AngularMomentumProjectors:
    j1: Fraction
    j2: Fraction
    totals: tuple
    projectors: tuple

    def __getitem__(self, total_j) -> np.ndarray:
        return self.projectors[self.totals.index(Fraction(total_j).limit_denominator(2))]


def angular_momentum_projectors(j1, j2) -> AngularMomentumProjectors:
    """Projectors onto the total-``J`` eigenspaces of ``j1 (x) j2``.

    Coupled states ``|J, M>`` are assembled from Clebsch-Gordan coefficients in
    the product basis ordered by :func:`spin_basis`.
    """
    j1, j2 = _as_half_integer(j1), _as_half_integer(j2)
    ms1, ms2 = spin_basis(j1), spin_basis(j2)
    n1, n2 = len(ms1), len(ms2)
    totals = []
    projectors = []
    big_j = abs(j1 - j2)
    while big_j <= j1 + j2:
        proj = np.zeros((n1 * n2, n1 * n2))
        for big_m in spin_basis(big_j):
            vec = np.zeros(n1 * n2)
            for a, m1 in enumerate(ms1):
                for b, m2 in enumerate(ms2):
                    if m1 + m2 == big_m:
                        vec[a * n2 + b] = clebsch_gordan(j1, m1, j2, m2, big_j, big_m)
            proj += np.outer(vec, vec)
        totals.append(big_j)
        projectors.append(proj)
        big_j += 1
    return AngularMomentumProjectors(j1, j2, tuple(totals), tuple(projectors))


@lru_cache(maxsize=None)
def _rot_projectors() -> AngularMomentumProjectors:
    return angular_momentum_projectors(Fraction(3, 2), Fraction(3, 2))


def rot_invariant_state(p: float, q: float, r: float, s: float | None = None) -> BipartiteState:
    """Rotationally invariant 4x4 state ``sum_J w_J P_J / (2J + 1)`` for ``j1 = j2 = 3/2``.

    ``s`` defaults to ``1 - p - q - r``.
    """
    if s is None:
        s = 1.0 - p - q - r
    weights = np.array([p, q, r, s], dtype=float)
    if np.any(weights < -STATE_TOL) or abs(weights.sum() - 1.0) > STATE_TOL:
        raise ValueError(f"weights {tuple(weights)} are not a point of the probability simplex")
    weights = np.clip(weights, 0.0, None)
    projs = _rot_projectors().projectors
    mat = sum(w * proj / (2 * k + 1) for k, (w, proj) in enumerate(zip(weights, projs)))
    return BipartiteState(np.asarray(mat, dtype=complex), 4, 4)


# -- random states ----------------------------------------------------------


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix with phase fixing."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_pure_state(d: int, rng: np.random.Generator) -> np.ndarray:
    return haar_unitary(d, rng)[:, 0]


def random_separable(d_a: int, d_b: int, terms: int, seed=None) -> BipartiteState:
    """Mixture of ``terms`` Haar-random pure product states with flat-Dirichlet weights.

    ``seed`` may be an int or a ``numpy.random.Generator`` (PCG64 stream).
    """
    if terms < 1:
        raise ValueError("terms must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights = rng.dirichlet(np.ones(terms)) if terms > 1 else np.ones(1)
    mat = np.zeros((d_a * d_b, d_a * d_b), dtype=complex)
    for w in weights:
        psi = np.kron(random_pure_state(d_a, rng), random_pure_state(d_b, rng))
        mat += w * np.outer(psi, psi.conj())
    return BipartiteState(mat, d_a, d_b)


def random_state(d_a: int, d_b: int, rank: int | None = None, seed=None) -> BipartiteState:
    """Random mixed state ``G G^dag / Tr`` from a complex Ginibre matrix (Hilbert-Schmidt measure)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = d_a * d_b
    k = rank or n
    g = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    mat = g @ g.conj().T
    return BipartiteState(mat / np.trace(mat).real, d_a, d_b)

