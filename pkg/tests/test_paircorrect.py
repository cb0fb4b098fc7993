import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from almostcommute import _kernels
from almostcommute import matcore as mc
from almostcommute import paircorrect as pc
from almostcommute.errors import NotHermitian, NotPositive, NotUnitary, OpNormTooLarge, TooFewClasses
from almostcommute.genbench import perturbed_commuting, voiculescu_pair
from almostcommute.spectral import hermitian_eig, normal_eig


# ---------------------------------------------------------------------------
# cut sets
# ---------------------------------------------------------------------------

def _check_cuts(sizes, a, cyclic, cuts):
    sizes = np.asarray(sizes)
    n, L = sizes.sum(), sizes.size
    assert cuts == sorted(cuts) and len(set(cuts)) == len(cuts)
    assert all(sizes[s] <= n / a for s in cuts)
    assert len(cuts) <= L / a
    gaps = np.diff(cuts)
    assert np.all((gaps >= a) & (gaps <= 2 * a))
    if cyclic:
        assert len(cuts) >= 2
        wrap = L - cuts[-1] + cuts[0]
        assert a <= wrap <= 3 * a
    else:
        assert a <= cuts[0] <= 2 * a - 1
        assert L - cuts[-1] <= 2 * a


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 12), st.lists(st.integers(0, 9), min_size=1, max_size=120), st.booleans())
def test_cut_set_properties(a, sizes, cyclic):
    need = 4 * a if cyclic else 2 * a
    if len(sizes) < need:
        with pytest.raises(TooFewClasses):
            pc.select_cut_set(sizes, a, cyclic)
        return
    _check_cuts(sizes, a, cyclic, pc.select_cut_set(sizes, a, cyclic))


def test_cut_set_uniform_sizes():
    a = 5
    cuts = pc.select_cut_set([3] * (8 * a), a, True)
    _check_cuts([3] * (8 * a), a, True, cuts)


def test_cut_set_avoids_huge_class():
    a = 4
    sizes = [1] * 40
    sizes[5] = 100
    cuts = pc.select_cut_set(sizes, a, True)
    assert 5 not in cuts
    _check_cuts(sizes, a, True, cuts)


def test_cut_set_exactly_four_a_gives_two_cuts():
    for a in (1, 2, 3, 7):
        cuts = pc.select_cut_set([2] * (4 * a), a, True)
        assert len(cuts) == 2
        _check_cuts([2] * (4 * a), a, True, cuts)


def test_cut_set_prefers_empty_classes():
    sizes = [5, 5, 0, 5, 5, 5, 0, 5, 5, 5, 5, 5]
    assert pc.select_cut_set(sizes, 2, False)[0] == 2


# ---------------------------------------------------------------------------
# grids and parameters
# ---------------------------------------------------------------------------

def test_circle_labels_semiopen_arcs():
    t = 8
    step = 2 * np.pi / t
    angles = np.array([0.0, 0.5 * step - 1e-9, 0.5 * step + 1e-9, -0.5 * step + 1e-9, 3 * step])
    labels = pc.circle_labels(np.exp(1j * angles), t)
    assert list(labels) == [0, 0, 1, 0, 3]


def test_interval_labels():
    t = 4
    vals = np.array([-1.0, -0.125, -0.125 + 1e-9, 0.0, 1.0, 1.2])
    assert list(pc.interval_labels(vals, t, -t) - t) == [-4, -1, 0, 0, 4, 4]


@pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-6, 1e-9])
def test_parameter_windows(eps):
    t, a = pc.grid_parameters("unitary", eps)
    assert eps ** (-7 / 9) <= t <= 2 * eps ** (-7 / 9)
    assert eps ** (-2 / 3) <= a <= 2 * eps ** (-2 / 3)
    delta = abs(1 - np.exp(2j * np.pi / t))
    assert 6 / t <= delta <= 2 * np.pi / t
    t, a = pc.grid_parameters("hermitian", eps)
    assert 0.5 * eps ** (-5 / 6) <= t <= eps ** (-5 / 6)


# ---------------------------------------------------------------------------
# stage invariants
# ---------------------------------------------------------------------------

def _unitary_stage(eps, seed=0, n=96):
    (u1, u2), e = perturbed_commuting("unitary", n, eps, seed)
    form = normal_eig(u1)
    v = form.basis
    p = v.conj().T @ u2 @ v
    return form.eigenvalues, p, e, pc.run_stage(form.eigenvalues, [p], e, "unitary")


def _hermitian_stage(eps, seed=0, n=96):
    (h1, h2), e = perturbed_commuting("hermitian", n, eps, seed)
    form = hermitian_eig(h1)
    v = form.basis
    p = v.conj().T @ h2 @ v
    vals = form.eigenvalues.astype(complex)
    return vals, p, e, pc.run_stage(vals, [p], e, "hermitian")


@pytest.mark.parametrize("eps", [1e-3, 1e-6])
def test_unitary_stage_invariants(eps):
    vals, p, e, st_ = _unitary_stage(eps)
    prm = st_.params
    th, b, out = st_.thresholded[0], st_.cut[0], st_.corrected[0]
    d = np.diag(vals)
    # three-diagonal structure on the fine grid
    assert _kernels.max_outside(th, prm.fine_labels, prm.n_fine, _kernels.SHAPE_CYCLIC_THREE) == 0.0
    # thresholding can only shrink the commutator
    assert mc.trace_norm(mc.commutator(d, th)) <= mc.trace_norm(mc.commutator(d, p)) + 1e-15
    assert mc.trace_norm(th - p) <= e / prm.delta_grid + 1e-12
    assert mc.trace_norm(th - b) <= 2 * prm.t / prm.a ** 1.5 + 1e-12
    assert mc.op_norm(b) <= 3 + 1e-8
    # scalar blocks and exact block structure
    for idx in prm.coarse_partition.classes:
        assert np.all(st_.scalars[idx] == st_.scalars[idx][0])
    assert mc.conformance(b, mc.BlockSpec(prm.coarse_partition), 0.0)
    assert mc.conformance(out, mc.BlockSpec(prm.coarse_partition), 0.0)
    assert mc.unitarity_residual(out) < 1e-10
    assert np.allclose(np.abs(st_.scalars), 1.0)
    diag = st_.diagnostics
    assert diag["rounding_distance"] <= diag["rounding_bound"] + 1e-12
    if diag["block_value_bound"] is not None:
        assert diag["block_value_distance"] <= diag["block_value_bound"] + 1e-12
    row = diag["partners"][0]
    assert row["gram_defect"] <= 4 * row["gamma"] + 1e-12
    assert row["repair_distance"] <= 12 * np.sqrt(row["gamma"]) + 1e-7


def test_unitary_stage_uses_cuts_at_small_eps():
    # cuts need t >= 4a, i.e. eps below 4^-9
    *_, st_ = _unitary_stage(1e-6)
    prm = st_.params
    assert prm.regime == "grid" and len(prm.cuts) >= 2
    gaps = np.diff(list(prm.cuts) + [prm.cuts[0] + prm.t])
    assert np.all((gaps >= prm.a) & (gaps <= 3 * prm.a))


@pytest.mark.parametrize("eps", [1e-3, 1e-5])
def test_hermitian_stage_invariants(eps):
    vals, p, e, st_ = _hermitian_stage(eps)
    prm = st_.params
    th, b, out = st_.thresholded[0], st_.cut[0], st_.corrected[0]
    d = np.diag(vals)
    assert _kernels.max_outside(th, prm.fine_labels, prm.n_fine, _kernels.SHAPE_THREE) == 0.0
    assert mc.trace_norm(mc.commutator(d, th)) <= mc.trace_norm(mc.commutator(d, p)) + 1e-15
    assert mc.trace_norm(th - p) <= e * prm.t + 1e-12
    assert mc.trace_norm(th - b) <= 2 * (2 * prm.t + 1) / prm.a ** 1.5 + 1e-12
    gaps = np.diff(prm.cuts)
    assert np.all((gaps >= prm.a) & (gaps <= 2 * prm.a))
    for idx in prm.coarse_partition.classes:
        assert np.all(st_.scalars[idx] == st_.scalars[idx][0])
    assert np.all(np.abs(st_.scalars.real) <= 1) and np.all(st_.scalars.imag == 0)
    assert mc.op_norm(out) <= mc.op_norm(p) + 1e-8
    assert mc.trace_norm(out - b) <= mc.trace_norm(b - p) + 1e-8


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------

def _assert_report(report, originals, n):
    assert report.certified
    assert all(d <= report.certified_bound + 1e-7 for d in report.distances)
    assert all(c <= 1e-9 * n for c in report.residual_commutators)
    assert all(c <= 1e-9 * n for c in report.side_commutators)
    for o, c, d in zip(originals, report.corrected, report.distances):
        assert mc.trace_norm(o - c) == pytest.approx(d, abs=1e-14)


def test_unitary_short_circuit(rng):
    (u1, u2), _ = perturbed_commuting("unitary", 12, 0.0, 3)
    r = pc.correct_unitary_pair(u1, u2)
    assert r.params.regime == "exact"
    assert r.distances == [0.0, 0.0]


@pytest.mark.parametrize("n", [16, 64, 256])
def test_unitary_voiculescu(n):
    u1, u2 = voiculescu_pair(n)
    r = pc.correct_unitary_pair(u1, u2)
    assert r.epsilon == pytest.approx(abs(1 - np.exp(2j * np.pi / n)), abs=1e-12)
    _assert_report(r, [u1, u2], n)
    assert all(mc.unitarity_residual(a) < 1e-9 for a in r.corrected)


def test_unitary_fallback_regime():
    u1, u2 = voiculescu_pair(4)
    r = pc.correct_unitary_pair(u1, u2)
    assert r.epsilon > pc.UNITARY_FALLBACK_EPS
    assert r.params.regime == "fallback"
    _assert_report(r, [u1, u2], 4)


@pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-6])
def test_unitary_perturbed(eps):
    (u1, u2), e = perturbed_commuting("unitary", 64, eps, 1)
    r = pc.correct_unitary_pair(u1, u2)
    _assert_report(r, [u1, u2], 64)
    assert r.certified_bound == pytest.approx(30 * e ** (1 / 9))
    a1 = r.conjugator.conj().T @ r.corrected[0] @ r.conjugator
    assert np.allclose(a1, np.diag(np.diag(a1)), atol=1e-12)


def test_hermitian_commuting_diagonal_unchanged():
    h1 = np.diag([0.1, -0.4, 0.9])
    h2 = np.diag([0.5, 0.5, -1.0])
    r = pc.correct_hermitian_pair(h1, h2)
    assert r.distances == [0.0, 0.0]


@pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-6])
def test_hermitian_perturbed(eps):
    (h1, h2), e = perturbed_commuting("hermitian", 64, eps, 2)
    r = pc.correct_hermitian_pair(h1, h2)
    _assert_report(r, [h1, h2], 64)
    for a in r.corrected:
        assert mc.hermiticity_residual(a) < 1e-12
        assert mc.op_norm(a) <= 1 + 1e-8


def test_hermitian_voiculescu_generator():
    from almostcommute.genbench import hermitian_voiculescu

    h1, h2 = hermitian_voiculescu(256)
    r = pc.correct_hermitian_pair(h1, h2)
    _assert_report(r, [h1, h2], 256)


def test_hermitian_large_eps_fallback(rng):
    h1 = np.diag([1.0, -1.0])
    h2 = np.array([[0, 1], [1, 0]], dtype=complex)
    r = pc.correct_hermitian_pair(h1, h2)
    assert r.epsilon > 0.25 and r.params.regime == "fallback"
    _assert_report(r, [h1, h2], 2)


def test_unitary_positive_identity_short_circuit(rng):
    from conftest import random_unitary

    u = random_unitary(rng, 6)
    r = pc.correct_unitary_positive(u, np.eye(6))
    assert r.distances == [0.0, 0.0]


@pytest.mark.parametrize("eps", [1e-2, 1e-4])
def test_unitary_positive_perturbed(eps):
    (u, h), e = perturbed_commuting("unitary-positive", 64, eps, 3)
    r = pc.correct_unitary_positive(u, h)
    _assert_report(r, [u, h], 64)
    v, a = r.corrected
    assert mc.unitarity_residual(v) < 1e-9
    assert np.linalg.eigvalsh(a)[0] >= -1e-12 and mc.op_norm(a) <= 1 + 1e-8


def test_normal_of_normal_is_unchanged(rng):
    from conftest import random_unitary

    q = random_unitary(rng, 5)
    m = (q * np.array([0.5, 0.2j, -0.3, 0.1 + 0.1j, 0.0])) @ q.conj().T
    r = pc.correct_normal(m)
    assert r.distances == [0.0]


def test_normal_nilpotent_example():
    m = np.array([[0, 1], [0, 0]], dtype=complex)
    r = pc.correct_normal(m)
    assert r.epsilon == pytest.approx(1.0)
    assert r.certified_bound == pytest.approx(36.0)
    nn = r.corrected[0]
    assert mc.normality_residual(nn) <= 2e-9
    assert mc.op_norm(nn) <= 1 + 1e-8


@pytest.mark.parametrize("eps", [1e-2, 1e-4])
def test_normal_perturbed(eps):
    (m,), e = perturbed_commuting("normal", 64, eps, 4)
    r = pc.correct_normal(m)
    assert r.certified
    nn = r.corrected[0]
    assert mc.normality_residual(nn) <= 1e-9 * 64
    assert mc.op_norm(nn) <= 1 + 1e-8
    lhs, rhs = r.diagnostics["root_estimate"]
    assert lhs <= rhs + 1e-8


def test_class_checks():
    u1, u2 = voiculescu_pair(4)
    with pytest.raises(NotUnitary):
        pc.correct_unitary_pair(u1, 2 * u2)
    with pytest.raises(NotHermitian):
        pc.correct_hermitian_pair(u2 @ np.diag([1, 2, 3, 4]), np.eye(4))
    with pytest.raises(OpNormTooLarge):
        pc.correct_hermitian_pair(2 * np.eye(4), np.eye(4))
    with pytest.raises(NotPositive):
        pc.correct_unitary_positive(u2, -np.eye(4))
    with pytest.raises(OpNormTooLarge):
        pc.correct_normal(2 * u2)


def test_report_json_roundtrip():
    import json

    u1, u2 = voiculescu_pair(32)
    doc = pc.correct_unitary_pair(u1, u2).to_json()
    assert json.loads(json.dumps(doc)) == doc
    assert doc["class"] == "unitary" and doc["certified"] is True
