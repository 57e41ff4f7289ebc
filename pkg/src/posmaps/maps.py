"""Positive maps written as differences of two completely positive Kraus maps.

The Choi matrix convention is ``C = sum_ij E_ij (x) L(E_ij) = d [I (x) L](P_+)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from .linalg import RANK_CUTOFF, ContractViolation, eig_hermitian, eigvals_desc, partial_trace
from .states import BipartiteState

CP_TOL = 1e-9


class ConsistencyError(RuntimeError):
    """An internally constructed map failed a complete-positivity check."""


def _unit(d: int, i: int, j: int) -> np.ndarray:
    e = np.zeros((d, d), dtype=complex)
    e[i, j] = 1.0
    return e


@dataclass(frozen=True, eq=False)
class KrausMap:
    """Completely positive map ``X -> sum_i V_i X V_i^dag`` on ``d x d`` matrices."""

    kraus_ops: np.ndarray
    name: str = ""

    def __post_init__(self):
        ops = np.asarray(self.kraus_ops, dtype=complex)
        if ops.ndim == 2:
            ops = ops[None]
        if ops.ndim != 3 or ops.shape[0] < 1 or ops.shape[1] != ops.shape[2]:
            raise ValueError(f"expected a non-empty stack of square matrices, got {ops.shape}")
        ops.setflags(write=False)
        object.__setattr__(self, "kraus_ops", ops)

    @property
    def dim(self) -> int:
        return self.kraus_ops.shape[1]

    @cached_property
    def superoperator(self) -> np.ndarray:
        """Matrix ``S`` with ``vec(L(X)) = S vec(X)`` for row-major ``vec``."""
        v = self.kraus_ops
        return np.einsum("kac,kbe->abce", v, v.conj()).reshape(self.dim**2, self.dim**2)

    @cached_property
    def choi(self) -> np.ndarray:
        return choi_from_superoperator(self.superoperator, self.dim)

    @property
    def length(self) -> int:
        """Minimal Kraus length, i.e. the Choi rank."""
        return choi_rank(self.choi)

    def __call__(self, x) -> np.ndarray:
        return apply_map(self, x)


@dataclass(frozen=True, eq=False)
class DecomposedMap:
    """Positive map ``L = lambda1 - lambda2`` with both parts completely positive.

    ``trace_form = (xi, eta)`` records decompositions with ``lambda1 = xi Tr(.) 1``
    and ``Tr lambda2(X) = eta Tr X``. ``target`` is an optional direct
    definition of ``L`` used to cross-check the Kraus forms.
    """

    lambda1: KrausMap
    lambda2: KrausMap
    name: str = ""
    trace_form: Optional[tuple[float, float]] = None
    target: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    flags: frozenset = frozenset()

    def __post_init__(self):
        if self.lambda1.dim != self.lambda2.dim:
            raise ValueError("lambda1 and lambda2 act on different dimensions")

    @property
    def dim(self) -> int:
        return self.lambda1.dim

    @property
    def kappa(self) -> tuple[int, int]:
        return (self.lambda1.length, self.lambda2.length)

    @cached_property
    def choi(self) -> np.ndarray:
        return self.lambda1.choi - self.lambda2.choi

    def __call__(self, x) -> np.ndarray:
        return apply_map(self.lambda1, x) - apply_map(self.lambda2, x)


# -- core operations --------------------------------------------------------


def choi_from_superoperator(sup: np.ndarray, d: int) -> np.ndarray:
    # C[(i,a),(j,b)] = L(E_ij)[a,b] = S[(a,b),(i,j)]
    return sup.reshape(d, d, d, d).transpose(2, 0, 3, 1).reshape(d * d, d * d)


def superoperator_from_choi(choi: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(choi).reshape(d, d, d, d).transpose(1, 3, 0, 2).reshape(d * d, d * d)


def choi_of_callable(fn: Callable[[np.ndarray], np.ndarray], d: int) -> np.ndarray:
    """Choi matrix of an arbitrary linear map evaluated on matrix units."""
    choi = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            choi[i * d : (i + 1) * d, j * d : (j + 1) * d] = fn(_unit(d, i, j))
    return choi


def choi_rank(choi: np.ndarray, cutoff: float = RANK_CUTOFF) -> int:
    vals = eigvals_desc(choi)
    if vals[0] <= 0:
        return 0
    return int(np.sum(vals > cutoff * vals[0]))


def choi_matrix(m: KrausMap | DecomposedMap) -> np.ndarray:
    return m.choi


def apply_map(m: KrausMap, x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.shape != (m.dim, m.dim):
        raise ContractViolation(f"map acts on {m.dim}x{m.dim} matrices, got {x.shape}")
    v = m.kraus_ops
    return np.einsum("kab,bc,kdc->ad", v, x, v.conj())


def apply_extended_kraus(m: KrausMap, state: BipartiteState, side: str = "B") -> np.ndarray:
    """``[I (x) L](rho)`` for ``side='B'`` or ``[L (x) I](rho)`` for ``side='A'``."""
    d_a, d_b = state.dims
    d = state.subsystem_dim(side)
    if m.dim != d:
        raise ContractViolation(f"map dimension {m.dim} != dimension {d} of subsystem {side}")
    t = np.asarray(state.matrix).reshape(d_a, d_b, d_a, d_b)
    sup = m.superoperator
    if side == "B":
        # rows (iA, jA), cols (c, e)
        flat = t.transpose(0, 2, 1, 3).reshape(d_a * d_a, d_b * d_b)
        out = (flat @ sup.T).reshape(d_a, d_a, d_b, d_b).transpose(0, 2, 1, 3)
    elif side == "A":
        flat = t.transpose(0, 2, 1, 3).reshape(d_a * d_a, d_b * d_b)
        out = (sup @ flat).reshape(d_a, d_a, d_b, d_b).transpose(0, 2, 1, 3)
    else:
        raise ValueError(f"side must be 'A' or 'B', got {side!r}")
    out = out.reshape(d_a * d_b, d_a * d_b)
    return 0.5 * (out + out.conj().T)


def apply_extended(
    dec: DecomposedMap, state: BipartiteState, side: str = "B"
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(Theta1(rho), Theta2(rho))`` with the map acting on ``side``."""
    return (
        apply_extended_kraus(dec.lambda1, state, side),
        apply_extended_kraus(dec.lambda2, state, side),
    )


def is_completely_positive(choi, tol: float = CP_TOL) -> bool:
    return bool(eigvals_desc(choi)[-1] >= -tol)


def kraus_from_choi(choi, cutoff: float = RANK_CUTOFF, tol: float = CP_TOL) -> np.ndarray:
    """Minimal Kraus set ``sqrt(l) * unvec(v)`` from the eigenpairs of a PSD Choi matrix."""
    choi = np.asarray(choi, dtype=complex)
    d = int(round(np.sqrt(choi.shape[0])))
    spec = eig_hermitian(choi, tol=1e-10)
    vals = spec.eigenvalues
    scale = max(1.0, float(np.max(np.abs(vals))))
    if vals[-1] < -tol * scale:
        raise ConsistencyError(f"Choi matrix is not PSD (min eigenvalue {vals[-1]:.3g})")
    if vals[0] <= 0:
        return np.zeros((1, d, d), dtype=complex)
    keep = vals > cutoff * vals[0]
    ops = [
        np.sqrt(lam) * vec.reshape(d, d).T
        for lam, vec in zip(vals[keep], spec.eigenvectors[:, keep].T)
    ]
    return np.array(ops)


def adjoint_map(m: KrausMap) -> KrausMap:
    """Hilbert-Schmidt adjoint: ``Tr A^dag L(B) = Tr [L^dag(A)]^dag B``."""
    return KrausMap(np.conj(np.transpose(m.kraus_ops, (0, 2, 1))), name=f"{m.name}^dag")


def adjoint_decomposed(dec: DecomposedMap) -> DecomposedMap:
    return DecomposedMap(
        adjoint_map(dec.lambda1), adjoint_map(dec.lambda2), name=f"{dec.name}^dag"
    )


def map_from_choi(choi: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """The linear map whose Choi matrix is ``choi``."""
    choi = np.asarray(choi, dtype=complex)
    d = int(round(np.sqrt(choi.shape[0])))
    sup = superoperator_from_choi(choi, d)

    def fn(x):
        return (sup @ np.asarray(x, dtype=complex).reshape(-1)).reshape(d, d)

    return fn


# -- elementary CP maps -----------------------------------------------------


def identity_map(d: int) -> KrausMap:
    return KrausMap(np.eye(d, dtype=complex)[None], name="identity")


def trace_map(d: int, scale: float = 1.0) -> KrausMap:
    """``X -> scale * Tr(X) 1`` with Kraus operators ``sqrt(scale) |i><j|``."""
    ops = [np.sqrt(scale) * _unit(d, i, j) for i in range(d) for j in range(d)]
    return KrausMap(np.array(ops), name="trace" if scale == 1.0 else f"{scale:g}*trace")


def epsilon_map(d: int) -> KrausMap:
    """Complete dephasing ``X -> sum_j <j|X|j> |j><j|``."""
    return KrausMap(np.array([_unit(d, j, j) for j in range(d)]), name="epsilon")


def _antisymmetric_units(d: int) -> list[np.ndarray]:
    return [_unit(d, i, j) - _unit(d, j, i) for i in range(d) for j in range(i + 1, d)]


def _symmetric_units(d: int) -> list[np.ndarray]:
    return [_unit(d, i, j) + _unit(d, j, i) for i in range(d) for j in range(i + 1, d)]


def werner_holevo(d: int) -> KrausMap:
    """``X -> [Tr(X) 1 - X^T] / (d - 1)``."""
    if d < 2:
        raise ValueError("d must be at least 2")
    ops = np.array(_antisymmetric_units(d)) / np.sqrt(d - 1)
    return KrausMap(ops, name="werner_holevo")


# -- direct map definitions (cross-check route) ----------------------------


def _reduction_fn(x):
    return np.trace(x) * np.eye(x.shape[0]) - x


def _transposition_fn(u):
    def fn(x):
        return u @ x.T @ u.conj().T

    return fn


def _breuer_hall_fn(u):
    def fn(x):
        return np.trace(x) * np.eye(x.shape[0]) - x - u @ x.T @ u.conj().T

    return fn


def _epsilon(x):
    return np.diag(np.diag(x))


def _generalized_choi_fn(d: int, k: int):
    shift = np.roll(np.eye(d), 1, axis=0)  # S|i> = |i+1 mod d>

    def fn(x):
        out = (d - k) * _epsilon(x) - x
        for i in range(1, k + 1):
            s = np.linalg.matrix_power(shift, i)
            out = out + _epsilon(s @ x @ s.conj().T)
        return out

    return fn


# -- builtin decompositions -------------------------------------------------


def _check_unitary(u: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol)


def default_breuer_hall_unitary(d: int) -> np.ndarray:
    """Antidiagonal matrix with entries +1, -1, +1, ... from the top row down."""
    if d % 2:
        raise ValueError("Breuer-Hall maps need an even dimension")
    u = np.zeros((d, d), dtype=complex)
    for i in range(d):
        u[i, d - 1 - i] = (-1) ** i
    return u


def reduction(d: int) -> DecomposedMap:
    """``Tr(X) 1 - X`` with ``lambda1 = Tr(.) 1`` and ``lambda2 = I``."""
    return DecomposedMap(
        trace_map(d), identity_map(d), name="reduction", trace_form=(1.0, 1.0), target=_reduction_fn
    )


def transposition(d: int, u=None) -> DecomposedMap:
    """``X -> U X^T U^dag`` as ``Tr(.) 1 - [Tr(.) 1 - U (.)^T U^dag]``."""
    if d < 2:
        raise ValueError("d must be at least 2")
    u = np.eye(d, dtype=complex) if u is None else np.asarray(u, dtype=complex)
    if u.shape != (d, d) or not _check_unitary(u):
        raise ValueError("transposition requires a d x d unitary U")
    ops = np.array([u @ a for a in _antisymmetric_units(d)])
    return DecomposedMap(
        trace_map(d),
        KrausMap(ops, name="Tr(.)1 - tau^U"),
        name="transposition",
        trace_form=(1.0, float(d - 1)),
        target=_transposition_fn(u),
    )


def breuer_hall(d: int, u=None, allow_contraction: bool = False) -> DecomposedMap:
    """``Tr(X) 1 - X - U X^T U^dag`` with an antisymmetric ``U``.

    ``lambda1 = 2 Tr(.) 1`` and ``lambda2 = Tr(.) 1 + I + U(.)^T U^dag``. A
    non-unitary contraction ``U^dag U <= 1`` is accepted only with
    ``allow_contraction=True``; the result then carries no trace form.
    """
    u = default_breuer_hall_unitary(d) if u is None else np.asarray(u, dtype=complex)
    if d % 2:
        raise ValueError("Breuer-Hall maps need an even dimension")
    if u.shape != (d, d):
        raise ValueError("U must be d x d")
    if np.max(np.abs(u.T + u)) > 1e-12:
        raise ValueError("U must be antisymmetric (U^T = -U)")
    flags = frozenset()
    trace_form = (2.0, float(d + 2))
    if not _check_unitary(u):
        if not allow_contraction:
            raise ValueError("U must be unitary (pass allow_contraction=True for U^dag U <= 1)")
        if np.linalg.norm(u, 2) > 1 + 1e-12:
            raise ValueError("U^dag U <= 1 violated")
        flags = frozenset({"non_unitary_U"})
        trace_form = None
    ops = [np.eye(d, dtype=complex)]
    ops += [u @ s for s in _symmetric_units(d)]
    ops += [np.sqrt(2) * u @ _unit(d, i, i) for i in range(d)]
    return DecomposedMap(
        trace_map(d, 2.0),
        KrausMap(np.array(ops), name="Tr(.)1 + I + tau^U"),
        name="breuer_hall",
        trace_form=trace_form,
        target=_breuer_hall_fn(u),
        flags=flags,
    )


def generalized_choi(d: int, k: int) -> DecomposedMap:
    """``(d-k) eps(X) + sum_{i=1..k} eps(S^i X S^i^dag) - X`` with ``S|i> = |i+1>``.

    ``k = d-1`` gives the reduction map and ``(d, k) = (3, 1)`` the Choi map.
    """
    if not 0 <= k <= d - 1:
        raise ValueError("generalized Choi map requires 0 <= k <= d-1")
    fn = _generalized_choi_fn(d, k)
    xi = float(d - k)
    lam2 = KrausMap(kraus_from_choi(xi * np.eye(d * d) - choi_of_callable(fn, d)), name="lambda2")
    return DecomposedMap(
        trace_map(d, xi),
        lam2,
        name=f"generalized_choi_{k}",
        trace_form=(xi, float(d * (d - k) - d + 1)),
        target=fn,
    )


def minimal_transposition_decomposition(d: int) -> DecomposedMap:
    """``T = T1 - T2`` with ``T1 = [Tr(.)1 + (.)^T]/2`` and ``T2 = [Tr(.)1 - (.)^T]/2``.

    Kraus lengths are ``d(d+1)/2`` and ``d(d-1)/2``.
    """
    if d < 2:
        raise ValueError("d must be at least 2")
    sym = [s / np.sqrt(2) for s in _symmetric_units(d)] + [_unit(d, i, i) for i in range(d)]
    anti = [a / np.sqrt(2) for a in _antisymmetric_units(d)]
    return DecomposedMap(
        KrausMap(np.array(sym), name="T1"),
        KrausMap(np.array(anti), name="T2"),
        name="transposition_minimal",
        target=_transposition_fn(np.eye(d)),
    )


def reduction_preset(d: int, which: int) -> DecomposedMap:
    """Three decompositions of the reduction map.

    1. ``Tr(.)1 - I/2`` and ``I/2`` (completely positive only for ``d <= 2``)
    2. ``Tr(.)1`` and ``I``
    3. ``Tr(.)1 + I`` and ``2 I``
    """
    eye = np.eye(d, dtype=complex)
    if which == 1:
        choi1 = choi_of_callable(lambda x: np.trace(x) * np.eye(d) - 0.5 * x, d)
        if not is_completely_positive(choi1):
            raise ValueError("decomposition (1) of the reduction map needs d <= 2")
        lam1 = KrausMap(kraus_from_choi(choi1), name="Tr(.)1 - I/2")
        lam2 = KrausMap(eye[None] / np.sqrt(2), name="I/2")
        return DecomposedMap(lam1, lam2, name="reduction_1", target=_reduction_fn)
    if which == 2:
        return replace(reduction(d), name="reduction_2")
    if which == 3:
        lam1 = KrausMap(np.concatenate([trace_map(d).kraus_ops, eye[None]]), name="Tr(.)1 + I")
        lam2 = KrausMap(np.sqrt(2) * eye[None], name="2I")
        return DecomposedMap(lam1, lam2, name="reduction_3", target=_reduction_fn)
    raise ValueError("reduction preset must be 1, 2 or 3")


def canonical_decomposition(choi, name: str = "canonical", tol: float = CP_TOL) -> DecomposedMap:
    """``L = xi Tr(.) 1 - (xi Tr(.) 1 - L)`` with ``xi`` the largest Choi eigenvalue.

    The second part gets a minimal Kraus set from its Choi matrix. A trace form
    is attached when ``Tr lambda2(X)`` is proportional to ``Tr X``.
    """
    choi = np.asarray(choi, dtype=complex)
    d = int(round(np.sqrt(choi.shape[0])))
    if d * d != choi.shape[0]:
        raise ValueError("Choi matrix dimension is not a perfect square")
    xi = float(eigvals_desc(choi)[0])
    if xi <= 0:
        raise ValueError("map has no positive Choi eigenvalue; it cannot be positive")
    choi2 = xi * np.eye(d * d) - choi
    try:
        ops2 = kraus_from_choi(choi2, tol=tol)
    except ConsistencyError as exc:
        raise ConsistencyError(f"xi*Tr - L is not completely positive: {exc}") from exc
    # Tr_out C2 = (L2^dag(1))^T; proportional to 1 iff Tr L2(X) = eta Tr X
    marg = partial_trace(choi2, (d, d), keep="A")
    eta = float(np.trace(marg).real / d)
    trace_form = None
    if np.max(np.abs(marg - eta * np.eye(d))) <= 1e-10 * max(1.0, abs(eta)):
        trace_form = (xi, eta)
    return DecomposedMap(
        trace_map(d, xi),
        KrausMap(ops2, name="xi*Tr - L"),
        name=name,
        trace_form=trace_form,
        target=map_from_choi(choi),
    )


def shift_kraus(dec: DecomposedMap, v) -> DecomposedMap:
    """Add ``V(.)V^dag`` to both parts; the difference is unchanged."""
    v = np.asarray(v, dtype=complex)
    if v.shape != (dec.dim, dec.dim):
        raise ValueError(f"V must be {dec.dim}x{dec.dim}")
    lam1 = KrausMap(np.concatenate([dec.lambda1.kraus_ops, v[None]]), name=dec.lambda1.name)
    lam2 = KrausMap(np.concatenate([dec.lambda2.kraus_ops, v[None]]), name=dec.lambda2.name)
    return DecomposedMap(lam1, lam2, name=f"{dec.name}+shift", target=dec.target)


def transposition_shift_sequence(d: int, order: Sequence[int] | None = None) -> list[DecomposedMap]:
    """Minimal transposition decomposition followed by successive shifts.

    Step ``n`` has moved the first ``n`` Kraus operators of ``T2`` (in ``order``)
    into ``T1`` as well. The last step equals ``Tr(.)1 - [Tr(.)1 - (.)^T]``.
    """
    dec = minimal_transposition_decomposition(d)
    ops = dec.lambda2.kraus_ops
    order = list(range(len(ops))) if order is None else list(order)
    if sorted(order) != list(range(len(ops))):
        raise ValueError(f"order must be a permutation of range({len(ops)})")
    seq = [dec]
    for n, idx in enumerate(order, start=1):
        dec = shift_kraus(dec, ops[idx])
        seq.append(replace(dec, name=f"transposition_shift_{n}"))
    return seq


BUILTINS = {
    "reduction": reduction,
    "transposition": transposition,
    "breuer_hall": breuer_hall,
    "generalized_choi": generalized_choi,
}


def builtin(name: str, d: int, **params) -> DecomposedMap:
    """Table decomposition of a named positive map."""
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown map {name!r}; choose from {sorted(BUILTINS)}") from None
    return factory(d, **params)
