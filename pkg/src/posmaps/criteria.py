"""Separability tests built from a decomposed positive map ``L = L1 - L2``.

Every test returns a :class:`CriterionVerdict` whose ``margin`` is the most
negative slack of the inequality family it checks; a negative margin beyond
the tolerance means the state is detected as entangled. ``side`` names the
subsystem the map acts on (``'B'`` is ``I (x) L``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from . import majorization as mj
from .linalg import (
    PSD_TOL,
    ContractViolation,
    Spectrum,
    eig_hermitian,
    eigvals_desc,
    matrix_power,
    spectral_power,
)
from .maps import DecomposedMap, adjoint_decomposed, apply_extended_kraus
from .states import BipartiteState, other_side

VERDICT_TOL = 1e-9
OVERLAP_TOL = 1e-10
DEGENERACY_TOL = 1e-9
MIXEDNESS_TOL = 1e-8


@dataclass(frozen=True)
class CriterionVerdict:
    criterion_id: str
    passed: bool
    margin: float
    side: str = "B"
    alpha: Optional[float] = None
    beta: Optional[float] = None
    flags: frozenset = frozenset()
    info: dict = field(default_factory=dict, compare=False)

    @property
    def violated(self) -> bool:
        return not self.passed

    def row(self) -> dict:
        return {
            "criterion_id": self.criterion_id,
            "side": self.side,
            "alpha": "" if self.alpha is None else self.alpha,
            "beta": "" if self.beta is None else self.beta,
            "margin": self.margin,
            "passed": int(self.passed),
        }


def _verdict(cid, margin, tol, side, alpha=None, beta=None, flags=(), **info) -> CriterionVerdict:
    margin = float(margin)
    if not np.isfinite(margin):
        raise FloatingPointError(f"{cid}: non-finite margin {margin}")
    return CriterionVerdict(
        cid, bool(margin >= -tol), margin, side, alpha, beta, frozenset(flags), info
    )


@dataclass(frozen=True)
class WitnessReport:
    witness: np.ndarray
    mean_value: float
    lambda_minus: float
    approximation_series: list
    normalized_series: list
    detected: bool
    beta0: Optional[float] = None


# -- shared per-(state, map, side) quantities -------------------------------


class _Thetas:
    """``Theta1(rho)``, ``Theta2(rho)`` and their spectra, computed once."""

    def __init__(self, state: BipartiteState, dec: DecomposedMap, side: str):
        if state.subsystem_dim(side) != dec.dim:
            raise ContractViolation(
                f"map of dimension {dec.dim} cannot act on subsystem {side} of "
                f"dimension {state.subsystem_dim(side)}"
            )
        self.state = state
        self.dec = dec
        self.side = side
        self.theta1 = apply_extended_kraus(dec.lambda1, state, side)
        self.theta2 = apply_extended_kraus(dec.lambda2, state, side)

    @cached_property
    def eig1(self) -> Spectrum:
        return eig_hermitian(self.theta1, tol=1e-10)

    @cached_property
    def eig2(self) -> Spectrum:
        return eig_hermitian(self.theta2, tol=1e-10)

    @property
    def vals1(self) -> np.ndarray:
        return self.eig1.eigenvalues

    @property
    def vals2(self) -> np.ndarray:
        return self.eig2.eigenvalues

    @cached_property
    def image(self) -> np.ndarray:
        return self.theta1 - self.theta2

    @cached_property
    def image_eig(self) -> Spectrum:
        return eig_hermitian(self.image, tol=1e-10)

    def psd_defect(self) -> bool:
        """True when either Theta has an eigenvalue below ``-PSD_TOL``."""
        for vals in (self.vals1, self.vals2):
            if vals[-1] < -PSD_TOL * max(1.0, abs(vals[0])):
                return True
        return False

    def power(self, which: int, r: float) -> np.ndarray:
        spec = self.eig1 if which == 1 else self.eig2
        vals = np.clip(spec.eigenvalues, 0.0, None)
        v = spec.eigenvectors
        return (v * spectral_power(vals, r)) @ v.conj().T


def thetas(state: BipartiteState, dec: DecomposedMap, side: str = "B") -> _Thetas:
    key = ("thetas", dec, side)
    cache = state._cache
    if key not in cache:
        cache[key] = _Thetas(state, dec, side)
    return cache[key]


def _deferred(cid, th: _Thetas, tol, alpha=None, beta=None) -> CriterionVerdict:
    base = check_positive_map(th.state, th.dec, th.side, tol=tol)
    return _verdict(
        cid, min(base.margin, -tol * 10), tol, th.side, alpha, beta, flags={"deferred_to_positive_map"}
    )


# -- baseline criteria ------------------------------------------------------


def check_positive_map(state, dec, side="B", tol=VERDICT_TOL) -> CriterionVerdict:
    """``Theta1(rho) >= Theta2(rho)``; margin is the smallest eigenvalue of the difference."""
    th = thetas(state, dec, side)
    return _verdict("positive_map", th.image_eig.lambda_min, tol, side, map=dec.name)


def check_ppt(state: BipartiteState, tol=VERDICT_TOL) -> CriterionVerdict:
    margin = eigvals_desc(state.partial_transpose("B"))[-1]
    return _verdict("ppt", margin, tol, "B")


def check_nielsen_kempe(state: BipartiteState, side="A", tol=VERDICT_TOL) -> CriterionVerdict:
    """``lambda(rho_side)``, zero padded, majorizes ``lambda(rho)``."""
    local = mj.sorted_spectrum(state.reduced(side), state.dim)
    slack = mj.partial_sum_slack(local, mj.sorted_spectrum(state.matrix))
    return _verdict("nielsen_kempe", np.min(slack), tol, side)


def conditional_entropy(state: BipartiteState, side="A") -> float:
    """``S(rho) - S(rho_side)`` (natural log); ``side='A'`` gives ``S(B|A)``."""
    return mj.von_neumann(mj.sorted_spectrum(state.matrix)) - mj.von_neumann(
        mj.sorted_spectrum(state.reduced(side))
    )


# -- criteria from the operator inequality ---------------------------------


def check_weak_majorization(state, dec, side="B", tol=VERDICT_TOL) -> CriterionVerdict:
    th = thetas(state, dec, side)
    slack = mj.partial_sum_slack(th.vals1, th.vals2)
    return _verdict("weak_majorization", np.min(slack), tol, side)


def check_moment_inequality(state, dec, alpha, side="B", tol=VERDICT_TOL) -> CriterionVerdict:
    """``Tr Theta1^alpha >= Tr Theta2^alpha``.

    For ``alpha < 1`` the same direction holds by operator monotonicity; such
    verdicts carry the ``weak_regime`` flag.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    th = thetas(state, dec, side)
    if th.psd_defect():
        return _deferred("moment", th, tol, alpha=alpha)
    margin = mj.moment(np.clip(th.vals1, 0, None), alpha) - mj.moment(np.clip(th.vals2, 0, None), alpha)
    flags = {"weak_regime"} if alpha < 1 else set()
    return _verdict("moment", margin, tol, side, alpha=alpha, flags=flags)


def check_renyi_inequality(
    state, dec, alpha, kind="renyi", side="B", tol=VERDICT_TOL
) -> CriterionVerdict:
    """``S_alpha(Theta1) <= S_alpha(Theta2)`` for Renyi or Tsallis, ``alpha > 1``.

    Both entropies are evaluated on the unnormalized spectra. For
    ``alpha < 1`` both functions are increasing, so the valid inequality is
    ``S_alpha(Theta1) >= S_alpha(Theta2)``; the margin is taken in that
    direction and flagged ``reversed_direction``. ``alpha = 1`` is rejected
    because the unnormalized limit diverges.
    """
    if kind not in ("renyi", "tsallis"):
        raise ValueError("kind must be 'renyi' or 'tsallis'")
    if alpha < 0 or alpha == 1:
        raise ValueError("alpha must be >= 0 and != 1")
    th = thetas(state, dec, side)
    if th.psd_defect():
        return _deferred(kind, th, tol, alpha=alpha)
    v1 = np.clip(th.vals1, 0, None)
    v2 = np.clip(th.vals2, 0, None)
    flags = set()
    if kind == "renyi":
        l1, l2 = mj.log_moment(v1, alpha), mj.log_moment(v2, alpha)
        if l2 == -np.inf:
            return _verdict(kind, 0.0, tol, side, alpha=alpha, flags={"trivial"})
        if l1 == -np.inf:
            return _verdict(kind, -mj.moment(v2, alpha), tol, side, alpha=alpha)
        margin = (l1 - l2) / (alpha - 1.0)
    else:
        margin = (mj.moment(v1, alpha) - mj.moment(v2, alpha)) / (alpha - 1.0)
    if alpha < 1:
        margin = -margin
        flags.add("reversed_direction")
    return _verdict(kind, margin, tol, side, alpha=alpha, flags=flags)


def check_norm_inequality(state, dec, side="B", tol=VERDICT_TOL) -> CriterionVerdict:
    th = thetas(state, dec, side)
    margin = np.max(np.abs(th.vals1)) - np.max(np.abs(th.vals2))
    return _verdict("norm", margin, tol, side)


def check_theorem2(state, dec, alpha, beta, variant="i", side="B", tol=VERDICT_TOL) -> CriterionVerdict:
    """Trace inequalities mixing powers of ``Theta1`` and ``Theta2``.

    * ``'i'``:  ``Tr{Theta1^a Theta2^b} >= Tr Theta2^(a+b)``, ``a, b >= 0``
    * ``'ii'``: ``Tr{Theta1^-a Theta2^b} <= Tr Theta2^(b-a)``, ``0 < a <= 1``, ``b >= 0``

    Negative and fractional powers are pseudo-powers on the support.
    """
    th = thetas(state, dec, side)
    if variant == "i":
        if alpha < 0 or beta < 0:
            raise ValueError("variant i needs alpha, beta >= 0")
        if th.psd_defect():
            return _deferred("theorem2_i", th, tol, alpha, beta)
        lhs = np.trace(th.power(1, alpha) @ th.power(2, beta)).real
        rhs = mj.moment(np.clip(th.vals2, 0, None), alpha + beta)
        return _verdict("theorem2_i", lhs - rhs, tol, side, alpha, beta)
    if variant == "ii":
        if not (0 < alpha <= 1) or beta < 0:
            raise ValueError("variant ii needs 0 < alpha <= 1 and beta >= 0")
        if th.psd_defect():
            return _deferred("theorem2_ii", th, tol, alpha, beta)
        lhs = np.trace(th.power(1, -alpha) @ th.power(2, beta)).real
        rhs = np.sum(spectral_power(np.clip(th.vals2, 0, None), beta - alpha))
        return _verdict("theorem2_ii", rhs - lhs, tol, side, alpha, beta)
    raise ValueError("variant must be 'i' or 'ii'")


def _qmax_at(th: _Thetas, overlap_tol: float) -> float:
    vals = th.vals1
    vecs = th.eig1.eigenvectors
    scale = max(1.0, abs(vals[0]))
    n = vals.size
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and vals[start] - vals[stop] <= DEGENERACY_TOL * scale:
            stop += 1
        block = vecs[:, start:stop]
        overlaps = np.real(np.einsum("ik,ij,jk->k", block.conj(), th.theta2, block))
        # trace of the compression: independent of the basis inside the cluster
        if np.sum(overlaps) > overlap_tol:
            return float(vals[start])
        start = stop
    return float("nan")


def compute_qmax(state, dec, side="B", overlap_tol=OVERLAP_TOL, tol=VERDICT_TOL):
    """Largest eigenvalue of ``Theta1`` whose eigenvectors see ``Theta2``, and the
    verdict of ``q_max >= ||Theta2||``.

    The verdict is flagged ``threshold_sensitive`` if ``q_max`` changes when the
    overlap threshold is scaled by 10 in either direction.
    """
    th = thetas(state, dec, side)
    qmax = _qmax_at(th, overlap_tol)
    norm2 = float(np.max(np.abs(th.vals2)))
    if np.isnan(qmax):
        return qmax, _verdict("qmax", 0.0, tol, side, flags={"inconclusive"}, qmax=qmax)
    flags = set()
    for t in (overlap_tol / 10, overlap_tol * 10):
        other = _qmax_at(th, t)
        if not (np.isnan(other) or abs(other - qmax) <= DEGENERACY_TOL * max(1.0, qmax)):
            flags.add("threshold_sensitive")
    return qmax, _verdict("qmax", qmax - norm2, tol, side, flags=flags, qmax=qmax, norm2=norm2)


# -- trace-form criteria ----------------------------------------------------


def _trace_form(dec: DecomposedMap) -> tuple[float, float]:
    if dec.trace_form is None:
        raise ValueError(
            f"map {dec.name!r} has no trace form (xi, eta); use canonical_decomposition first"
        )
    return dec.trace_form


def channel_output(state, dec, side="B") -> np.ndarray:
    """``[I (x) Phi](rho)`` with the channel ``Phi = lambda2 / eta``."""
    _, eta = _trace_form(dec)
    return thetas(state, dec, side).theta2 / eta


def check_channel_entropy(state, dec, alpha=None, variant="von_neumann", side="B", tol=VERDICT_TOL):
    """Entropic inequalities for ``Phi = lambda2 / eta`` of a trace-form decomposition.

    With ``u`` the unmapped subsystem and ``d`` the mapped dimension:

    * ``renyi_alpha``: ``S_a(Phi(rho)) - S_a(rho_u) >= ln(eta/xi) - ln(d xi/eta)/(a-1)``
    * ``alpha_free``:  ``S_a(Phi(rho)) - S_a(rho_u) >= ln(eta/xi)``
    * ``von_neumann``: ``S(Phi(rho)) - S(rho_u) >= ln(eta/xi)``
    * ``norm``:        ``||rho_u|| >= (eta/xi) ||Phi(rho)||``

    ``renyi_alpha`` with ``alpha < 1`` holds in the opposite direction; the
    margin follows that direction and carries ``reversed_direction``.
    """
    xi, eta = _trace_form(dec)
    d = dec.dim
    out = channel_output(state, dec, side)
    local = state.reduced(other_side(side))
    flags = set()
    if variant == "norm":
        margin = eigvals_desc(local)[0] - (eta / xi) * eigvals_desc(out)[0]
        return _verdict("channel_norm", margin, tol, side)
    if variant == "von_neumann":
        lhs = mj.entropy(out, "von_neumann") - mj.entropy(local, "von_neumann")
        return _verdict("channel_von_neumann", lhs - np.log(eta / xi), tol, side, lhs=lhs)
    if alpha is None or alpha < 0:
        raise ValueError(f"variant {variant!r} needs alpha >= 0")
    lhs = mj.entropy(out, "renyi", alpha) - mj.entropy(local, "renyi", alpha)
    if variant == "alpha_free":
        return _verdict("channel_alpha_free", lhs - np.log(eta / xi), tol, side, alpha=alpha, lhs=lhs)
    if variant == "renyi_alpha":
        if alpha == 1:
            raise ValueError("renyi_alpha needs alpha != 1")
        rhs = np.log(eta / xi) - np.log(d * xi / eta) / (alpha - 1.0)
        margin = lhs - rhs
        if alpha < 1:
            margin = -margin
            flags.add("reversed_direction")
        return _verdict("channel_renyi", margin, tol, side, alpha=alpha, flags=flags, lhs=lhs)
    raise ValueError(f"unknown variant {variant!r}")


def check_channel_majorization(state, dec, side="B", tol=VERDICT_TOL) -> CriterionVerdict:
    """``lambda(rho_u)`` (zero padded) majorizes ``lambda([I (x) Phi](rho))``."""
    xi, eta = _trace_form(dec)
    flags = {"unsupported_eta_below_xi"} if eta < xi else set()
    out = mj.sorted_spectrum(channel_output(state, dec, side))
    local = mj.sorted_spectrum(state.reduced(other_side(side)), state.dim)
    return _verdict("channel_majorization", np.min(mj.partial_sum_slack(local, out)), tol, side, flags=flags)


def _require_maximally_mixed(state: BipartiteState, side: str, mm_tol: float) -> tuple[np.ndarray, int]:
    unmapped = other_side(side)
    local = state.reduced(unmapped)
    d_u = state.subsystem_dim(unmapped)
    if np.max(np.abs(local - np.eye(d_u) / d_u)) > mm_tol:
        raise ContractViolation(
            f"subsystem {unmapped} is not maximally mixed; apply local_filter first"
        )
    return local, d_u


def check_maximally_mixed_equivalence(state, dec, side="B", tol=VERDICT_TOL, mm_tol=MIXEDNESS_TOL):
    """Positive-map, flat-vector weak-majorization and norm verdicts.

    Requires the unmapped marginal to be maximally mixed, so that
    ``Theta1 = (xi/d) 1``; the three verdicts are then equivalent.
    """
    xi, _ = _trace_form(dec)
    _, d_u = _require_maximally_mixed(state, side, mm_tol)
    th = thetas(state, dec, side)
    level = xi / d_u
    v_map = check_positive_map(state, dec, side, tol)
    flat = np.full(th.vals2.size, level)
    v_sub = _verdict("flat_weak_majorization", np.min(mj.partial_sum_slack(flat, th.vals2)), tol, side)
    v_norm = _verdict("flat_norm", level - th.vals2[0], tol, side)
    return v_map, v_sub, v_norm


def check_aeq1_beq1(state, dec, n, side="B", tol=VERDICT_TOL, mm_tol=MIXEDNESS_TOL):
    """Maximally-mixed forms of the Theorem-type inequalities with ``alpha=1`` or ``beta=1``.

    ``v_a``: ``(xi/d) Tr Theta2^(b-1) >= Tr Theta2^b`` for ``b = 2..n`` (worst case);
    ``v_b``: ``(xi/d)^a Tr Theta2 >= Tr Theta2^(a+1)`` at ``a = n-1``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    xi, _ = _trace_form(dec)
    _, d_u = _require_maximally_mixed(state, side, mm_tol)
    vals = np.clip(thetas(state, dec, side).vals2, 0, None)
    level = xi / d_u
    margins = [level * mj.moment(vals, b - 1) - mj.moment(vals, b) for b in range(2, n + 1)]
    worst = int(np.argmin(margins))
    v_a = _verdict("aeq1", margins[worst], tol, side, alpha=1, beta=worst + 2)
    a = n - 1
    v_b = _verdict("beq1", level**a * mj.moment(vals, 1) - mj.moment(vals, a + 1), tol, side, alpha=a, beta=1)
    return v_a, v_b


# -- filtering and witnesses ------------------------------------------------


def local_filter(state: BipartiteState, side="A") -> BipartiteState:
    """``(rho_s^-1/2 (x) 1) rho (rho_s^-1/2 (x) 1)``, renormalized; ``rho_s`` becomes ``1/d``."""
    local = state.reduced(side)
    vals = eigvals_desc(local)
    if vals[-1] <= 1e-12 * vals[0]:
        raise ContractViolation(f"subsystem {side} is not full rank; cannot filter")
    f = matrix_power(local, -0.5)
    if side == "A":
        op = np.kron(f, np.eye(state.d_b))
    else:
        op = np.kron(np.eye(state.d_a), f)
    out = op @ state.matrix @ op.conj().T
    return BipartiteState(out / np.trace(out).real, state.d_a, state.d_b)


def tailor_made_witness(state, dec, side="B", betas=(1, 2, 3, 4, 5, 6, 8, 10, 15, 20)) -> WitnessReport:
    """Witness ``[I (x) L^dag](P_-)`` from the lowest eigenspace of ``[I (x) L](rho)``.

    ``P_-`` is the normalized projector (projector / its rank) onto the
    eigenspace of the smallest eigenvalue, so ``Tr(W rho) = lambda_-``. The
    series holds ``Tr{[I (x) L](rho) Theta2^b}`` for each ``b``; the normalized
    series divides by ``lambda_max(Theta2)^b``. ``beta0`` is the first
    requested ``b`` from which the series stays negative.
    """
    th = thetas(state, dec, side)
    spec = th.image_eig
    lam_minus = spec.lambda_min
    scale = max(1.0, float(np.max(np.abs(spec.eigenvalues))))
    block = spec.eigenvectors[:, spec.eigenvalues - lam_minus <= DEGENERACY_TOL * scale]
    p_minus = block @ block.conj().T / block.shape[1]
    carrier = BipartiteState(p_minus, state.d_a, state.d_b, validate=False)
    adj = adjoint_decomposed(dec)
    witness = apply_extended_kraus(adj.lambda1, carrier, side) - apply_extended_kraus(
        adj.lambda2, carrier, side
    )
    mean = float(np.trace(witness @ state.matrix).real)
    top2 = max(th.vals2[0], 0.0)
    series, normalized = [], []
    for b in betas:
        val = float(np.trace(th.image @ th.power(2, b)).real)
        series.append((b, val))
        normalized.append((b, val / top2**b if top2 > 0 else float("nan")))
    beta0 = None
    for k in range(len(series)):
        if all(v < 0 for _, v in series[k:]):
            beta0 = series[k][0]
            break
    return WitnessReport(
        witness=witness,
        mean_value=mean,
        lambda_minus=lam_minus,
        approximation_series=series,
        normalized_series=normalized,
        detected=bool(lam_minus < -VERDICT_TOL),
        beta0=beta0,
    )
