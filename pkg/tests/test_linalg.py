import numpy as np
import pytest

from geoguide.errors import FullSpaceError, ZeroMatrixError
from geoguide.linalg import (
    SubspaceBasis,
    extract_subspace,
    orthonormal_complement,
    projector_distance,
    svd,
)

from oracles import jacobi_eigh, random_subspace


def test_svd_identity():
    res = svd(np.eye(3))
    np.testing.assert_allclose(res.s, [1.0, 1.0, 1.0], atol=1e-12)


def test_svd_diagonal():
    res = svd(np.diag([3.0, 2.0, 1.0]))
    np.testing.assert_allclose(res.s, [3.0, 2.0, 1.0], atol=1e-12)


def test_svd_reconstruction_and_gram_oracle():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((5, 3))
    res = svd(a)
    recon = res.u @ np.diag(res.s) @ res.vt
    assert np.linalg.norm(recon - a) <= 1e-8 * np.linalg.norm(a)
    # Independent route: eigenvalues of A.T A via Jacobi rotations.
    eigs, _ = jacobi_eigh(a.T @ a)
    np.testing.assert_allclose(res.s**2, eigs, atol=1e-10)


def test_svd_orthonormal_factors():
    rng = np.random.default_rng(3)
    for shape in [(4, 4), (6, 3), (3, 6)]:
        res = svd(rng.standard_normal(shape))
        k = min(shape)
        assert np.linalg.norm(res.u.T @ res.u - np.eye(k)) <= 1e-10
        assert np.linalg.norm(res.vt @ res.vt.T - np.eye(k)) <= 1e-10


def test_svd_descending_nonnegative():
    rng = np.random.default_rng(11)
    for _ in range(20):
        s = svd(rng.standard_normal((6, 4))).s
        assert np.all(s >= 0)
        assert np.all(np.diff(s) <= 1e-14)


def test_svd_sign_convention_deterministic():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((6, 4))
    r1, r2 = svd(a), svd(a.copy())
    assert r1.u.tobytes() == r2.u.tobytes()
    assert r1.vt.tobytes() == r2.vt.tobytes()
    # Largest-magnitude entry of every left singular vector is positive.
    peaks = r1.u[np.argmax(np.abs(r1.u), axis=0), np.arange(r1.u.shape[1])]
    assert np.all(peaks > 0)


def test_svd_rejects_nonfinite():
    with pytest.raises(ValueError):
        svd(np.array([[1.0, np.nan], [0.0, 1.0]]))


def test_complement_coordinate_axis():
    b = SubspaceBasis(np.array([[1.0], [0.0], [0.0]]))
    comp = orthonormal_complement(b)
    assert comp.sub_dim == 2
    expect = np.eye(3) - np.outer([1.0, 0, 0], [1.0, 0, 0])
    assert np.linalg.norm(comp.projector() - expect) <= 1e-10


def test_complement_projector_identity():
    rng = np.random.default_rng(13)
    b = random_subspace(4, 2, rng)
    comp = orthonormal_complement(b)
    assert np.linalg.norm(comp.projector() - (np.eye(4) - b.projector())) <= 1e-10
    stacked = np.hstack([b.basis, comp.basis])
    assert np.linalg.norm(stacked.T @ stacked - np.eye(4)) <= 1e-10
    assert np.linalg.norm(comp.basis.T @ b.basis) <= 1e-10


def test_complement_full_space_errors():
    b = SubspaceBasis(np.eye(3))
    with pytest.raises(FullSpaceError):
        orthonormal_complement(b)


def test_complement_involution():
    rng = np.random.default_rng(17)
    for d, k in [(5, 2), (8, 3), (6, 1)]:
        b = random_subspace(d, k, rng)
        back = orthonormal_complement(orthonormal_complement(b))
        assert projector_distance(back, b) <= 1e-8


def test_extract_rank_one():
    feats = np.zeros((1, 4))
    feats[0, 0] = 1.0
    b = extract_subspace(feats, 2)
    assert b.sub_dim == 1
    assert abs(abs(b.basis[0, 0]) - 1.0) <= 1e-12


def test_extract_two_axes():
    feats = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]])
    b = extract_subspace(feats, 2)
    assert b.sub_dim == 2
    expect = np.diag([1.0, 1.0, 0.0, 0.0])
    assert np.linalg.norm(b.projector() - expect) <= 1e-10


def test_extract_matches_gram_eigs():
    rng = np.random.default_rng(23)
    feats = rng.standard_normal((10, 8))
    b = extract_subspace(feats, 3)
    eigs, vecs = jacobi_eigh(feats.T @ feats)
    oracle = vecs[:, :3]
    assert np.linalg.norm(b.projector() - oracle @ oracle.T) <= 1e-8


def test_extract_zero_matrix():
    with pytest.raises(ZeroMatrixError):
        extract_subspace(np.zeros((3, 5)), 2)


def test_extract_row_permutation_invariant():
    rng = np.random.default_rng(29)
    feats = rng.standard_normal((7, 6))
    b1 = extract_subspace(feats, 3)
    b2 = extract_subspace(feats[::-1], 3)
    assert projector_distance(b1, b2) <= 1e-10


def test_extract_caps_at_numeric_rank():
    rng = np.random.default_rng(31)
    # 16 rows that only span a 4-dim subspace of R^12.
    span = rng.standard_normal((4, 12))
    feats = rng.standard_normal((16, 4)) @ span
    b = extract_subspace(feats, 9)
    assert b.sub_dim == 4


def test_basis_rejects_nonorthonormal():
    with pytest.raises(ValueError):
        SubspaceBasis(np.array([[1.0, 1.0], [0.0, 1.0], [0.0, 0.0]]))
