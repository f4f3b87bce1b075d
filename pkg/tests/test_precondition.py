import numpy as np
import pytest

from momentbody.errors import InvalidInput, NotASeparator, RankDeficient
from momentbody.instances import example_2_1_map, gen_interval, preconditioning_example_map
from momentbody.moment_map import Instance, MomentMap
from momentbody.oracle import verify_infeasible
from momentbody.precondition import (
    TransformRecord,
    backmap_feasible,
    backmap_infeasible,
    precondition,
    transform_b,
    untransform_point,
    whiten_map,
)
from momentbody.spectral import exp1


def _raw(rng, n=5, m=3):
    G = rng.standard_normal((m, n, n))
    return MomentMap(G + 5.0 * np.eye(n) * rng.standard_normal((m, 1, 1)))


def test_output_is_normalized(rng):
    pmap, rec = whiten_map(_raw(rng))
    assert pmap.traceless and pmap.orthonormal
    assert np.abs(np.trace(pmap.mats, axis1=1, axis2=2)).max() <= 1e-12
    assert np.abs(pmap.gram() - np.eye(3)).max() <= 1e-12
    assert rec.condition_number >= 1.0


def test_whitener_is_inverse_square_root(rng):
    raw = _raw(rng)
    _, rec = whiten_map(raw)
    n = raw.n
    t = np.trace(raw.mats, axis1=1, axis2=2) / n
    C = raw.mats - t[:, None, None] * np.eye(n)
    Gc = np.einsum("ikl,jkl->ij", C, C)
    W = rec.whitener
    assert np.allclose(W, W.T)
    assert np.allclose(W @ Gc @ W, np.eye(3), atol=1e-10)
    assert np.allclose(W @ rec.whitener_inv, np.eye(3), atol=1e-10)


def test_printed_example_centered_gram():
    # Eigenvalues computed directly from the printed matrices.
    _, rec = whiten_map(preconditioning_example_map())
    assert np.sum(rec.gram_centered_eigs) == pytest.approx(42.5)
    assert np.prod(rec.gram_centered_eigs) == pytest.approx(64.0)


def test_identity_on_normalized_map():
    pmap, rec = whiten_map(example_2_1_map())
    assert np.allclose(rec.whitener, np.eye(2), atol=1e-12)
    assert np.allclose(pmap.mats, example_2_1_map().mats, atol=1e-12)


def test_rank_deficient():
    A = np.diag([1.0, -1.0, 0.0])
    with pytest.raises(RankDeficient):
        whiten_map(MomentMap(np.stack([A, 2 * A])))
    with pytest.raises(RankDeficient):
        whiten_map(MomentMap(np.eye(3)[None]))


def test_points_roundtrip(rng):
    raw = _raw(rng)
    _, rec = whiten_map(raw)
    b = rng.standard_normal(3)
    assert np.allclose(untransform_point(rec, transform_b(rec, b)), b)
    with pytest.raises(InvalidInput):
        transform_b(rec, np.ones(2))


def test_body_maps_affinely(rng):
    raw = _raw(rng)
    pre = precondition(Instance(raw, np.zeros(3)))
    G = rng.standard_normal((5, 5))
    X, _ = exp1(G + G.T)
    x_raw = raw.apply(X)
    x_hat = pre.map.apply(X)
    assert np.allclose(transform_b(pre.record, x_raw), x_hat, atol=1e-12)


def test_backmap_feasible_recomputes_residual(rng):
    raw = _raw(rng)
    X, _ = exp1(np.diag(rng.standard_normal(5)))
    inst = Instance(raw, raw.apply(X))
    pre = precondition(inst)
    X2, res = backmap_feasible(pre.record, X, inst)
    assert X2 is not None and res <= 1e-12


def test_backmap_infeasible_checks_gap():
    inst = gen_interval(1.0)
    pre = precondition(inst)
    u, gap = backmap_infeasible(pre.record, np.array([1.0]), inst)
    assert u == pytest.approx([1.0])
    assert gap == pytest.approx(1 - 1 / np.sqrt(2))
    assert verify_infeasible(inst, u).passed
    with pytest.raises(NotASeparator):
        backmap_infeasible(pre.record, np.array([-1.0]), inst)


def test_record_dict_roundtrip(rng):
    _, rec = whiten_map(_raw(rng))
    back = TransformRecord.from_dict(rec.to_dict())
    assert np.array_equal(back.whitener, rec.whitener)
    bad = rec.to_dict()
    bad["whitener"] = [[1.0]]
    with pytest.raises(InvalidInput):
        TransformRecord.from_dict(bad)


def test_ill_conditioned_gram_is_refined():
    # Centered Gram condition number around 1e10: a single whitening pass
    # leaves ||G - I|| near 1e-7.
    rng = np.random.default_rng(46)
    base = rng.standard_normal((3, 4, 4))
    base = base + base.transpose(0, 2, 1)
    mats = base.copy()
    mats[2] = base[0] + 1e-5 * base[2]
    pmap, rec = whiten_map(MomentMap(mats))
    F = pmap.mats.reshape(3, -1)
    assert np.abs(F @ F.T - np.eye(3)).max() <= 1e-12
    assert rec.condition_number > 1e9
    # The record still maps original points to whitened ones.
    X = np.diag([0.1, 0.2, 0.3, 0.4])
    x = MomentMap(mats).apply(X)
    assert np.allclose(transform_b(rec, x), pmap.apply(X), atol=1e-9)
    assert np.allclose(untransform_point(rec, pmap.apply(X)), x, atol=1e-9)
