"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (the lines appear in the terminal
summary) or ``python3 tests/test_acceptance.py`` (lines printed directly).
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from posmaps import criteria as cr
from posmaps import majorization as mj
from posmaps import maps as mp
from posmaps import scan as sc
from posmaps import states as st

try:
    from conftest import ACCEPTANCE_LINES, maps_for_dim
except ImportError:  # pragma: no cover
    from tests.conftest import ACCEPTANCE_LINES, maps_for_dim


def report(number: int, ok: bool, title: str, detail: str) -> None:
    line = f"ACCEPTANCE {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


# -- 1 ----------------------------------------------------------------------


def test_01_table_reproduction():
    rows, bad = 0, []
    for d in (2, 3, 4, 6):
        expected = {"transposition": (1, d - 1), "reduction": (1, 1)}
        if d % 2 == 0:
            expected["breuer_hall"] = (2, d + 2)
        for name, want in expected.items():
            got = sc.build_decomposition(name, d).trace_form
            rows += 1
            if got != (float(want[0]), float(want[1])):
                bad.append((name, d, got))
        for k in range(1, d - 1):
            got = mp.generalized_choi(d, k).trace_form
            rows += 1
            if got != (float(d - k), float(d * (d - k) - d + 1)):
                bad.append(("generalized_choi", d, k, got))
    # the largest Choi eigenvalue reproduces xi wherever the map is non-zero
    for d in (3, 4, 6):
        for dec in [mp.transposition(d)] + [mp.generalized_choi(d, k) for k in range(1, d - 1)]:
            can = mp.canonical_decomposition(dec.choi)
            if not np.allclose(can.trace_form, dec.trace_form, atol=1e-10):
                bad.append(("canonical", dec.name, d, can.trace_form))
    report(1, not bad, "Table 2 (xi, eta_d)", f"{rows} builtin rows exact, mismatches={bad}")
    assert not bad


# -- 2 ----------------------------------------------------------------------

_CHOI_WORST = [0.0]


def _all_decompositions(d):
    decs = [mp.reduction(d), mp.transposition(d), mp.minimal_transposition_decomposition(d)]
    decs += [mp.reduction_preset(d, 2), mp.reduction_preset(d, 3)]
    if d == 2:
        decs.append(mp.reduction_preset(2, 1))
    if d % 2 == 0:
        decs.append(mp.breuer_hall(d))
    decs += [mp.generalized_choi(d, k) for k in range(1, d - 1)]
    decs += [mp.canonical_decomposition(x.choi) for x in list(decs) if np.max(np.abs(x.choi)) > 1e-9]
    decs += mp.transposition_shift_sequence(d)
    return decs


def _choi_error(dec):
    target = mp.choi_of_callable(dec.target, dec.dim)
    return np.max(np.abs(dec.lambda1.choi - dec.lambda2.choi - target))


@settings(max_examples=40, deadline=None)
@given(d=hst.sampled_from([2, 3, 4]), seed=hst.integers(0, 2**32 - 1), data=hst.data())
def _choi_property(d, seed, data):
    decs = _all_decompositions(d)
    dec = decs[data.draw(hst.integers(0, len(decs) - 1))]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    for m in (dec, mp.shift_kraus(dec, v)):
        err = _choi_error(m)
        _CHOI_WORST[0] = max(_CHOI_WORST[0], err)
        assert err <= 1e-12


def test_02_choi_consistency():
    fixed = max(_choi_error(dec) for d in (2, 3, 4, 6) for dec in _all_decompositions(d))
    _CHOI_WORST[0] = fixed
    ok = True
    try:
        _choi_property()
    except AssertionError:
        ok = False
    ok = ok and _CHOI_WORST[0] <= 1e-12
    report(2, ok, "Choi consistency", f"max |C1 - C2 - C| = {_CHOI_WORST[0]:.2e} (bound 1e-12)")
    assert ok


# -- 3 ----------------------------------------------------------------------


def test_03_kraus_lengths():
    seq = mp.transposition_shift_sequence(4)
    kappas = [dec.kappa for dec in seq]
    k1 = [k[0] for k in kappas]
    steps = np.diff(k1)
    ok = kappas[0] == (10, 6) and all(k[1] == 6 for k in kappas) and np.all(steps == 1) and k1[-1] == 16
    report(3, ok, "Kraus lengths", f"kappa sequence {kappas}")
    assert ok


# -- 4 ----------------------------------------------------------------------


def _flip_point(ps, passed):
    passed = np.asarray(passed)
    first = int(np.argmin(passed))
    assert not passed[first], "no violation on the grid"
    assert passed[:first].all() and not passed[first:].any(), "verdict is not monotone in p"
    return ps[first]


def test_04_isotropic_boundary():
    ps = np.round(np.arange(0, 1001) * 0.001, 3)
    red = mp.reduction(4)
    verdicts = {"ppt": [], "reduction": [], "nielsen_kempe": []}
    for p in ps:
        rho = st.isotropic_state(4, p)
        verdicts["ppt"].append(cr.check_ppt(rho).passed)
        verdicts["reduction"].append(cr.check_positive_map(rho, red).passed)
        verdicts["nielsen_kempe"].append(
            cr.check_nielsen_kempe(rho, "A").passed and cr.check_nielsen_kempe(rho, "B").passed
        )
    flips = {k: _flip_point(ps, v) for k, v in verdicts.items()}
    ok = all(abs(f - 0.2) <= 0.001 + 1e-12 for f in flips.values())
    report(4, ok, "isotropic boundary", f"first violated p: {flips}")
    assert ok


# -- 5 ----------------------------------------------------------------------


def test_05_two_qubit_full_detection():
    fractions = {}
    for side in ("A", "B"):
        cfg = sc.ScanConfig(
            family="two_qubit",
            criteria=tuple(f"theorem2:alpha=1,beta={b}" for b in (2, 3, 4)),
            map_name="reduction",
            decomposition="preset:2",
            side=side,
            grid=100,
            reference="ppt",
        )
        rep = sc.run_scan(cfg)
        for label, frac in rep.detection_fraction.items():
            fractions[(side, label.split("beta=")[1])] = round(frac, 6)
    ok = all(f == 1.0 for f in fractions.values())
    report(
        5, ok, "two-qubit full detection",
        f"fractions (side, beta) {fractions}; q=1/2 is PPT (separable) and side A gives "
        "Theta1 = (a^4+b^4) on supp(rho), see decisions ledger",
    )
    assert ok


# -- 6 ----------------------------------------------------------------------


def test_06_sigma_thresholds():
    ps = np.round(np.arange(1, 1000) * 0.001, 3)
    wh = mp.transposition(4)
    assert np.allclose(wh.lambda2.choi / 3, mp.werner_holevo(4).choi, atol=1e-12)
    cond, margins = [], []
    for p in ps:
        sigma = st.rot_invariant_state(p, 1 - p, 0, 0)
        cond.append(cr.conditional_entropy(sigma, "A"))
        margins.append(cr.check_channel_entropy(sigma, wh, variant="von_neumann").margin)
    cond = np.array(cond)
    near = np.abs(ps - 0.25) <= 0.002 + 1e-12
    cond_ok = bool(np.all(cond[~near] < -1e-6) and np.all(np.abs(cond[near]) <= 1e-3))
    passed = np.array(margins) >= -cr.VERDICT_TOL
    p_star = _flip_point(ps, passed)
    ok = cond_ok and abs(p_star - 0.535) <= 0.010
    report(
        6, ok, "sigma thresholds",
        f"S(B|A)<-1e-6 off p=1/4: {cond_ok}, max S(B|A) near 1/4 = {cond[near].max():.2e}, "
        f"niervonN flips at p*={p_star:.3f}",
    )
    assert ok


# -- 7 ----------------------------------------------------------------------


def test_07_maximally_mixed_equivalence():
    rng = np.random.default_rng(7)
    decs = [mp.transposition(4), mp.breuer_hall(4)]
    disagreements, detected = 0, 0
    for _ in range(500):
        w = rng.dirichlet(np.ones(4))
        rho = st.rot_invariant_state(*w)
        for dec in decs:
            flags = {v.passed for v in cr.check_maximally_mixed_equivalence(rho, dec)}
            disagreements += len(flags) > 1
            detected += False in flags
    ok = disagreements == 0
    report(7, ok, "maximally-mixed equivalence", f"1000 verdict triples, {disagreements} disagreements, {detected} detected")
    assert ok


# -- 8 ----------------------------------------------------------------------


def separable_battery(rho, dec, side):
    """Every implemented criterion on one (state, decomposition, side)."""
    yield cr.check_positive_map(rho, dec, side)
    yield cr.check_weak_majorization(rho, dec, side)
    for a in (0, 0.5, 1, 2, 3):
        yield cr.check_moment_inequality(rho, dec, a, side)
    for a in (0.5, 2, 5):
        yield cr.check_renyi_inequality(rho, dec, a, "renyi", side)
        yield cr.check_renyi_inequality(rho, dec, a, "tsallis", side)
    yield cr.check_norm_inequality(rho, dec, side)
    for a, b in ((1, 1), (1, 2), (2, 1), (0.5, 1.5), (0, 2)):
        yield cr.check_theorem2(rho, dec, a, b, "i", side)
    for a, b in ((0.5, 1), (1, 2), (1, 0)):
        yield cr.check_theorem2(rho, dec, a, b, "ii", side)
    yield cr.compute_qmax(rho, dec, side)[1]
    if dec.trace_form is not None:
        yield cr.check_channel_entropy(rho, dec, variant="von_neumann", side=side)
        yield cr.check_channel_entropy(rho, dec, variant="norm", side=side)
        for a in (0.5, 2, 3):
            yield cr.check_channel_entropy(rho, dec, a, "alpha_free", side)
            yield cr.check_channel_entropy(rho, dec, a, "renyi_alpha", side)
        yield cr.check_channel_majorization(rho, dec, side)


def test_08_no_false_positives():
    rng = np.random.default_rng(8)
    worst = (np.inf, None)
    count = 0
    pools = {d: maps_for_dim(d) for d in (2, 3, 4)}
    for k in range(1000):
        d = (2, 3, 4)[k % 3]
        rho = st.random_separable(d, d, int(rng.integers(1, 21)), seed=rng)
        checks = [cr.check_ppt(rho), cr.check_nielsen_kempe(rho, "A"), cr.check_nielsen_kempe(rho, "B")]
        dec = pools[d][int(rng.integers(len(pools[d])))]
        side = "AB"[int(rng.integers(2))]
        checks += list(separable_battery(rho, dec, side))
        try:
            filtered = cr.local_filter(rho, cr.other_side(side))
        except cr.ContractViolation:
            filtered = None
        if filtered is not None and dec.trace_form is not None:
            checks += list(cr.check_maximally_mixed_equivalence(filtered, dec, side))
            checks += list(cr.check_aeq1_beq1(filtered, dec, 4, side))
        for v in checks:
            count += 1
            if v.margin < worst[0]:
                worst = (v.margin, (v.criterion_id, dec.name, d, v.alpha, v.beta))
    ok = worst[0] >= -1e-8
    report(8, ok, "no false positives", f"{count} verdicts on 1000 separable states, worst margin {worst[0]:.2e} at {worst[1]}")
    assert ok


# -- 9 ----------------------------------------------------------------------


def test_09_standard_entropic_recovery():
    rng = np.random.default_rng(9)
    dec = mp.reduction_preset(2, 2)
    worst = 0.0
    for k in range(100):
        rho = st.random_state(2, 2, rank=int(rng.integers(1, 5)), seed=rng)
        vals = mj.sorted_spectrum(rho.matrix)
        local = mj.sorted_spectrum(rho.reduced("A"))
        for a in (1, 2, 3):
            margin = cr.check_theorem2(rho, dec, a, 1).margin
            oracle = np.sum(local ** (a + 1)) - np.sum(np.clip(vals, 0, None) ** (a + 1))
            worst = max(worst, abs(margin - oracle))
    ok = worst <= 1e-10
    report(9, ok, "standard entropic recovery", f"max deviation {worst:.2e} over 300 cases")
    assert ok


# -- 10 ---------------------------------------------------------------------


def test_10_qmax_example():
    rng = np.random.default_rng(10)
    dec = mp.minimal_transposition_decomposition(4)
    worst = 0.0
    for k in range(20):
        psi = np.kron(st.random_pure_state(4, rng), st.random_pure_state(4, rng)) if k else np.eye(16)[1]
        rho = st.BipartiteState(np.outer(psi, psi.conj()), 4, 4)
        th = cr.thetas(rho, dec)
        qmax, verdict = cr.compute_qmax(rho, dec)
        errs = [abs(th.vals1[0] - 1), abs(qmax - 0.5), abs(th.vals2[0] - 0.5), abs(verdict.margin)]
        worst = max(worst, *errs)
    ok = worst <= 1e-12
    report(10, ok, "q_max worked example", f"max error over 20 product states {worst:.2e}")
    assert ok


# -- 11 ---------------------------------------------------------------------


def test_11_region_nesting():
    specs = ["ppt"]
    for n in (2, 3, 4):
        specs += [f"moment:alpha={n}", f"theorem2:alpha={n - 1},beta=1", f"theorem2:alpha=1,beta={n - 1}"]
    cfg = sc.ScanConfig(
        family="rot_invariant",
        family_params=(("p", 0.0),),
        criteria=tuple(dict.fromkeys(specs)),
        map_name="transposition",
        decomposition="canonical",
        grid=200,
        reference="ppt",
    )
    rep = sc.run_scan(cfg)
    s_det = rep.detected("ppt")
    exceptions, sizes = 0, {}
    for n in (2, 3, 4):
        m = rep.detected(sc.CriterionSpec.parse(f"moment:alpha={n}").label)
        nn = rep.detected(sc.CriterionSpec.parse(f"theorem2:alpha={n - 1},beta=1").label)
        r = rep.detected(sc.CriterionSpec.parse(f"theorem2:alpha=1,beta={n - 1}").label)
        exceptions += int((m & ~nn).sum() + (nn & ~r).sum() + (r & ~s_det).sum())
        sizes[n] = (int(m.sum()), int(nn.sum()), int(r.sum()), int(s_det.sum()))
    ok = exceptions == 0
    report(
        11, ok, "region nesting",
        f"{len(rep.records)} points, detected counts (M, N, R, S) by alpha+beta {sizes}, {exceptions} exceptions",
    )
    assert ok


# -- 12 ---------------------------------------------------------------------


def test_12_kappa_trend():
    cfg = sc.ScanConfig(
        family="rot_invariant", family_params=(("p", 0.0),), criteria=("ppt",), grid=200
    )
    points, _ = sc.grid_points(cfg)
    decs = mp.transposition_shift_sequence(4) + [mp.canonical_decomposition(mp.transposition(4).choi)]
    kappas = [dec.kappa[0] for dec in decs]
    counts = {a: np.zeros(len(decs), dtype=int) for a in (2, 3, 4)}
    n_ppt = 0
    for point in points:
        rho = sc.build_state(cfg, point)
        n_ppt += not cr.check_ppt(rho).passed
        for k, dec in enumerate(decs):
            for a in counts:
                counts[a][k] += not cr.check_moment_inequality(rho, dec, a).passed
    fractions = {a: c / n_ppt for a, c in counts.items()}
    ok = bool(np.all(np.diff(kappas) >= 0) and np.all(np.diff(fractions[2]) >= 0))
    detail = f"kappa1 {kappas}; fraction of PPT-detected states at alpha=2 {np.round(fractions[2], 4).tolist()}"
    detail += "".join(f"; alpha={a} (not gated) {np.round(fractions[a], 4).tolist()}" for a in (3, 4))
    report(12, ok, "decomposition-length trend", detail)
    assert ok


# -- 13 ---------------------------------------------------------------------


def test_13_theorem1_submajorization():
    rng = np.random.default_rng(13)
    failures = 0
    for _ in range(500):
        n = int(rng.integers(2, 17))
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        k = int(rng.integers(1, n + 1))
        h = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
        b = g @ g.conj().T
        a = b + h @ h.conj().T
        failures += not mj.weak_majorizes(np.linalg.eigvalsh(a), np.linalg.eigvalsh(b))
    ok = failures == 0
    report(13, ok, "Theorem 1 submajorization", f"500 ordered PSD pairs, {failures} failures")
    assert ok


# -- 14 ---------------------------------------------------------------------


def test_14_renyi_limit():
    rng = np.random.default_rng(14)
    pools = {d: maps_for_dim(d) for d in (2, 3, 4)}
    used, mismatches = 0, []
    while used < 200:
        d = int(rng.choice([2, 3, 4]))
        rho = st.random_state(d, d, rank=int(rng.integers(1, d * d + 1)), seed=rng)
        dec = pools[d][int(rng.integers(len(pools[d])))]
        side = "AB"[int(rng.integers(2))]
        th = cr.thetas(rho, dec, side)
        if th.psd_defect():
            continue
        if abs(np.max(np.abs(th.vals1)) - np.max(np.abs(th.vals2))) <= 1e-3:
            continue
        used += 1
        renyi = cr.check_renyi_inequality(rho, dec, 200, "renyi", side)
        norm = cr.check_norm_inequality(rho, dec, side)
        if renyi.passed != norm.passed:
            mismatches.append((dec.name, d, round(renyi.margin, 5), round(norm.margin, 5)))
    ok = not mismatches
    report(14, ok, "Renyi alpha=200 vs norm", f"{used} cases, mismatches {mismatches}")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
