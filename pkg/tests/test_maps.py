import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from posmaps import maps as mp
from posmaps import states as st
from posmaps.linalg import eigvals_desc


def direct_transpose(x):
    return x.T


@pytest.mark.parametrize("d", [2, 3, 4])
def test_choi_of_identity_is_d_times_p_plus(d):
    np.testing.assert_allclose(mp.identity_map(d).choi, d * st.max_entangled_projector(d), atol=1e-14)


@pytest.mark.parametrize("d", [2, 3])
def test_superoperator_choi_roundtrip(d, rng):
    ops = rng.standard_normal((3, d, d)) + 1j * rng.standard_normal((3, d, d))
    m = mp.KrausMap(ops)
    sup = mp.superoperator_from_choi(m.choi, d)
    np.testing.assert_allclose(sup, m.superoperator, atol=1e-12)
    np.testing.assert_allclose(mp.choi_from_superoperator(sup, d), m.choi, atol=1e-12)
    x = rng.standard_normal((d, d))
    np.testing.assert_allclose(mp.map_from_choi(m.choi)(x), m(x), atol=1e-12)


def test_kraus_from_choi_recovers_channel(rng):
    d = 3
    ops = rng.standard_normal((2, d, d)) + 1j * rng.standard_normal((2, d, d))
    m = mp.KrausMap(ops)
    back = mp.KrausMap(mp.kraus_from_choi(m.choi))
    assert back.length == 2
    np.testing.assert_allclose(back.choi, m.choi, atol=1e-12)
    with pytest.raises(mp.ConsistencyError):
        mp.kraus_from_choi(mp.transposition(3).choi)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_transposition_choi_is_swap(d):
    swap = np.eye(d * d)[[(i % d) * d + i // d for i in range(d * d)]]
    np.testing.assert_allclose(mp.transposition(d).choi, swap, atol=1e-14)
    np.testing.assert_allclose(mp.choi_of_callable(direct_transpose, d), swap, atol=0)


def test_builtins_match_direct_definitions():
    for d in (2, 3, 4, 6):
        decs = [mp.reduction(d), mp.transposition(d), mp.minimal_transposition_decomposition(d)]
        decs += [mp.generalized_choi(d, k) for k in range(0, d)]
        if d % 2 == 0:
            decs.append(mp.breuer_hall(d))
        for dec in decs:
            err = np.max(np.abs(dec.choi - mp.choi_of_callable(dec.target, d)))
            assert err <= 1e-12, (dec.name, d)
            assert mp.is_completely_positive(dec.lambda1.choi)
            assert mp.is_completely_positive(dec.lambda2.choi)


def test_breuer_hall_formula_oracle(rng):
    d = 4
    u = mp.default_breuer_hall_unitary(d)
    np.testing.assert_allclose(u.T, -u)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(d), atol=1e-15)
    x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    want = np.trace(x) * np.eye(d) - x - u @ x.T @ u.conj().T
    np.testing.assert_allclose(mp.breuer_hall(d)(x), want, atol=1e-12)


def test_breuer_hall_input_checks():
    with pytest.raises(ValueError):
        mp.breuer_hall(3)
    with pytest.raises(ValueError):
        mp.breuer_hall(4, u=np.eye(4))
    half = 0.5 * mp.default_breuer_hall_unitary(4)
    with pytest.raises(ValueError):
        mp.breuer_hall(4, u=half)
    dec = mp.breuer_hall(4, u=half, allow_contraction=True)
    assert dec.trace_form is None and "non_unitary_U" in dec.flags


@pytest.mark.parametrize("d", [4, 6])
def test_positive_but_not_cp(d, rng):
    for dec in (mp.transposition(d), mp.breuer_hall(d), mp.generalized_choi(d, 1)):
        assert not mp.is_completely_positive(dec.choi)
        for _ in range(20):
            psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            assert eigvals_desc(dec(np.outer(psi, psi.conj())))[-1] >= -1e-12


def test_choi_map_three_is_classic():
    """``(d, k) = (3, 1)`` is the Choi map ``2 eps(X) + eps(S X S^dag) - X``."""
    x = np.arange(9).reshape(3, 3).astype(complex)
    x = x + x.T
    got = mp.generalized_choi(3, 1)(x)
    diag = np.diag(x).real
    want = np.diag([2 * diag[0] + diag[2], 2 * diag[1] + diag[0], 2 * diag[2] + diag[1]]) - x
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_werner_holevo_and_epsilon_are_channels():
    for d in (2, 3, 4):
        for m in (mp.werner_holevo(d), mp.epsilon_map(d)):
            total = np.einsum("kab,kac->bc", m.kraus_ops.conj(), m.kraus_ops)
            np.testing.assert_allclose(total, np.eye(d), atol=1e-12)


@pytest.mark.parametrize("d", [3, 4])
def test_canonical_decomposition_properties(d):
    for base in (mp.transposition(d), mp.generalized_choi(d, 1)):
        can = mp.canonical_decomposition(base.choi)
        xi = eigvals_desc(base.choi)[0]
        assert can.trace_form[0] == pytest.approx(xi)
        np.testing.assert_allclose(can.choi, base.choi, atol=1e-12)
        assert can.kappa[0] == d * d


def test_transposition_canonical_lengths_at_four():
    can = mp.canonical_decomposition(mp.transposition(4).choi)
    assert can.kappa == (16, 6)
    assert mp.canonical_decomposition(mp.breuer_hall(4).choi).kappa == (16, 11)
    assert mp.canonical_decomposition(mp.generalized_choi(4, 1).choi).kappa == (16, 13)


def test_breuer_hall_two_is_zero_map():
    assert np.max(np.abs(mp.breuer_hall(2).choi)) < 1e-14


def test_reduction_presets():
    for which in (1, 2, 3):
        dec = mp.reduction_preset(2, which)
        np.testing.assert_allclose(dec.choi, mp.reduction(2).choi, atol=1e-12)
    with pytest.raises(ValueError):
        mp.reduction_preset(3, 1)
    with pytest.raises(ValueError):
        mp.reduction_preset(2, 4)


def test_shift_sequence_last_step_is_canonical():
    seq = mp.transposition_shift_sequence(4)
    can = mp.canonical_decomposition(mp.transposition(4).choi)
    np.testing.assert_allclose(seq[-1].lambda1.choi, can.lambda1.choi, atol=1e-12)
    np.testing.assert_allclose(seq[-1].lambda2.choi, can.lambda2.choi, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(d=hst.sampled_from([2, 3, 4]), seed=hst.integers(0, 2**31), side=hst.sampled_from("AB"))
def test_extended_application_matches_kraus_sum(d, seed, side):
    rng = np.random.default_rng(seed)
    rho = st.random_state(2, d, seed=rng) if side == "B" else st.random_state(d, 2, seed=rng)
    ops = rng.standard_normal((2, d, d)) + 1j * rng.standard_normal((2, d, d))
    m = mp.KrausMap(ops)
    lift = [np.kron(np.eye(2), v) if side == "B" else np.kron(v, np.eye(2)) for v in ops]
    want = sum(k @ rho.matrix @ k.conj().T for k in lift)
    np.testing.assert_allclose(mp.apply_extended_kraus(m, rho, side), want, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=hst.integers(0, 2**31))
def test_adjoint_identity(seed):
    rng = np.random.default_rng(seed)
    dec = mp.breuer_hall(4)
    adj = mp.adjoint_decomposed(dec)
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    b = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    assert np.trace(a.conj().T @ dec(b)) == pytest.approx(np.trace(adj(a).conj().T @ b), abs=1e-10)


def test_builtin_dispatch():
    assert mp.builtin("generalized_choi", 4, k=2).trace_form == (2.0, 5.0)
    with pytest.raises(ValueError):
        mp.builtin("nope", 3)
