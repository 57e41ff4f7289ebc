"""Dense Hermitian linear algebra on small bipartite spaces.

Matrices are plain ``numpy.ndarray`` objects. Composite indices follow the
row-major Kronecker convention ``i = i_A * d_B + i_B`` (subsystem A is the
slow index).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-9
RANK_CUTOFF = 1e-12
_DEGENERACY_TOL = 1e-9


class ContractViolation(ValueError):
    """Raised when an input matrix breaks a documented precondition."""


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted in descending order with matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[-1])


def check_hermitian(mat, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``mat`` as a square complex array, raising if it is not Hermitian."""
    mat = np.asarray(mat, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 1:
        raise ContractViolation(f"expected a non-empty square matrix, got shape {mat.shape}")
    scale = max(1.0, float(np.max(np.abs(mat))))
    if np.max(np.abs(mat - mat.conj().T)) > tol * scale:
        raise ContractViolation("matrix is not Hermitian within tolerance")
    return mat


def _canonical_phase(vec: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero(np.abs(vec) > 1e-12)
    if idx.size == 0:
        return vec
    first = vec[idx[0]]
    return vec * (abs(first) / first)


def eig_hermitian(mat, tol: float = HERMITIAN_TOL) -> Spectrum:
    """Eigendecomposition with descending eigenvalues and a reproducible basis.

    Each eigenvector is phase-fixed so that its first non-negligible component
    is real and positive. Inside a degenerate cluster the vectors are ordered
    lexicographically by their phase-fixed components.
    """
    mat = check_hermitian(mat, tol)
    mat = 0.5 * (mat + mat.conj().T)
    vals, vecs = np.linalg.eigh(mat)
    vals = vals[::-1].copy()
    vecs = vecs[:, ::-1].copy()
    for k in range(vecs.shape[1]):
        vecs[:, k] = _canonical_phase(vecs[:, k])

    scale = max(1.0, float(np.max(np.abs(vals))))
    start = 0
    n = vals.size
    while start < n:
        stop = start + 1
        while stop < n and vals[start] - vals[stop] <= _DEGENERACY_TOL * scale:
            stop += 1
        if stop - start > 1:
            block = vecs[:, start:stop]
            keys = [
                tuple(np.round(np.concatenate([col.real, col.imag]), 10))
                for col in block.T
            ]
            order = sorted(range(stop - start), key=lambda j: keys[j], reverse=True)
            vecs[:, start:stop] = block[:, order]
        start = stop
    return Spectrum(vals, vecs)


def eigvals_desc(mat) -> np.ndarray:
    """Eigenvalues only, descending. Cheaper than :func:`eig_hermitian`."""
    mat = np.asarray(mat, dtype=complex)
    return np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[::-1]


def tensor(a, b) -> np.ndarray:
    return np.kron(np.asarray(a), np.asarray(b))


def _split_dims(mat: np.ndarray, dims) -> tuple[int, int]:
    d_a, d_b = (int(x) for x in dims)
    if mat.shape != (d_a * d_b, d_a * d_b):
        raise ContractViolation(
            f"matrix of shape {mat.shape} does not match subsystem dimensions {d_a}x{d_b}"
        )
    return d_a, d_b


def _check_label(label: str) -> str:
    if label not in ("A", "B"):
        raise ValueError(f"subsystem label must be 'A' or 'B', got {label!r}")
    return label


def partial_trace(mat, dims, keep: str = "A") -> np.ndarray:
    """Reduced matrix on subsystem ``keep`` ('A' or 'B')."""
    mat = np.asarray(mat, dtype=complex)
    d_a, d_b = _split_dims(mat, dims)
    t = mat.reshape(d_a, d_b, d_a, d_b)
    if _check_label(keep) == "A":
        return np.einsum("ijkj->ik", t)
    return np.einsum("ijil->jl", t)


def partial_transpose(mat, dims, side: str = "B") -> np.ndarray:
    """Transpose the blocks belonging to subsystem ``side``."""
    mat = np.asarray(mat, dtype=complex)
    d_a, d_b = _split_dims(mat, dims)
    t = mat.reshape(d_a, d_b, d_a, d_b)
    if _check_label(side) == "B":
        t = t.transpose(0, 3, 2, 1)
    else:
        t = t.transpose(2, 1, 0, 3)
    return t.reshape(d_a * d_b, d_a * d_b)


def is_psd(mat, tol: float = PSD_TOL) -> bool:
    vals = eigvals_desc(mat)
    return bool(vals[-1] >= -tol * max(1.0, float(np.max(np.abs(vals)))))


def _rank_mask(vals: np.ndarray, cutoff: float) -> np.ndarray:
    top = float(np.max(vals)) if vals.size else 0.0
    if top <= 0.0:
        return np.zeros(vals.shape, dtype=bool)
    return vals > cutoff * top


def spectral_power(vals: np.ndarray, r: float, cutoff: float = RANK_CUTOFF) -> np.ndarray:
    """Apply ``x -> x**r`` to a nonnegative spectrum with the pseudo-power convention.

    Entries at or below ``cutoff * max`` are mapped to zero for every ``r``
    that is not a positive integer; ``r = 0`` yields the support indicator.
    """
    vals = np.asarray(vals, dtype=float)
    if float(r).is_integer() and r >= 1:
        return vals ** int(r)
    mask = _rank_mask(vals, cutoff)
    out = np.zeros_like(vals)
    out[mask] = vals[mask] ** r
    return out


def matrix_power(
    mat,
    r: float,
    use_pseudoinverse: bool = True,
    psd_tol: float = PSD_TOL,
    cutoff: float = RANK_CUTOFF,
) -> np.ndarray:
    """Spectral power ``M**r`` of a Hermitian matrix.

    Integer ``r >= 1`` works for any Hermitian input. Other exponents need a
    PSD input; tiny negative eigenvalues (within ``psd_tol``) are clipped to
    zero. With ``use_pseudoinverse=False`` a singular input raises for
    ``r < 0`` instead of being inverted on its support.
    """
    spec = eig_hermitian(mat)
    vals = spec.eigenvalues
    if not (float(r).is_integer() and r >= 1):
        scale = max(1.0, float(np.max(np.abs(vals))))
        if vals[-1] < -psd_tol * scale:
            raise ContractViolation(
                f"fractional or negative power {r} of a matrix with eigenvalue {vals[-1]:.3g}"
            )
        vals = np.clip(vals, 0.0, None)
        if r < 0 and not use_pseudoinverse and not np.all(_rank_mask(vals, cutoff)):
            raise ContractViolation("matrix is singular; pass use_pseudoinverse=True")
    powered = spectral_power(vals, r, cutoff)
    v = spec.eigenvectors
    return (v * powered) @ v.conj().T


def operator_norm(mat) -> float:
    vals = eigvals_desc(mat)
    return float(np.max(np.abs(vals)))


def support_projector(mat, cutoff: float = RANK_CUTOFF) -> np.ndarray:
    spec = eig_hermitian(mat)
    v = spec.eigenvectors[:, _rank_mask(spec.eigenvalues, cutoff)]
    return v @ v.conj().T


def write_matrix(path, mat, dims=None) -> None:
    """Write ``mat`` in the plain-text ``dim dA dB`` / ``row col re im`` format."""
    mat = np.asarray(mat, dtype=complex)
    n = mat.shape[0]
    d_a, d_b = dims if dims is not None else (n, 1)
    lines = [f"{n} {d_a} {d_b}"]
    for i in range(n):
        for j in range(n):
            z = mat[i, j]
            lines.append(f"{i} {j} {z.real:.17g} {z.imag:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path) -> tuple[np.ndarray, tuple[int, int]]:
    """Inverse of :func:`write_matrix`; returns ``(matrix, (dA, dB))``."""
    text = Path(path).read_text().split("\n")
    rows = [ln.split() for ln in text if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 3:
        raise ValueError(f"{path}: missing 'dim dA dB' header")
    n, d_a, d_b = (int(x) for x in rows[0])
    if n != d_a * d_b:
        raise ValueError(f"{path}: dim {n} != {d_a}*{d_b}")
    body = rows[1:]
    if len(body) != n * n:
        raise ValueError(f"{path}: expected {n * n} entries, found {len(body)}")
    mat = np.zeros((n, n), dtype=complex)
    seen = np.zeros((n, n), dtype=bool)
    for fields in body:
        if len(fields) != 4:
            raise ValueError(f"{path}: malformed entry line {' '.join(fields)!r}")
        i, j = int(fields[0]), int(fields[1])
        mat[i, j] = complex(float(fields[2]), float(fields[3]))
        seen[i, j] = True
    if not seen.all():
        raise ValueError(f"{path}: some matrix entries are missing")
    return mat, (d_a, d_b)
