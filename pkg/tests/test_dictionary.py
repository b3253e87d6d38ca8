import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lcasep.dictionary import (LearnParams, hebbian_update, init_dictionary, load_dictionary,
                               match_atoms, residual_gradient, save_dictionary,
                               train_dictionary)
from lcasep.errors import DataError, FormatError, ShapeError
from lcasep.lca import Dictionary, LcaParams, SparseCode, lca_encode, reconstruct
from lcasep.synthetic import planted_dictionary_data

seeds = st.integers(0, 2**32 - 1)
PLANTED_LCA = LcaParams(lam=0.4, n_steps=200, dt_over_tau=0.05)


def test_init_shapes_norms_determinism():
    d = init_dictionary(64, 2, 256, 8, 2, seed=3)
    assert d.atoms.shape == (64, 2, 256, 8) and d.stride == 2
    assert d.is_unit_norm(1e-6)
    assert np.array_equal(d.atoms, init_dictionary(64, 2, 256, 8, 2, seed=3).atoms)
    assert not np.array_equal(d.atoms, init_dictionary(64, 2, 256, 8, 2, seed=4).atoms)
    with pytest.raises(ShapeError):
        init_dictionary(0, 1, 4, 4, 1, 0)


def test_full_scale_geometry_is_constructible_lazily():
    # only the shape arithmetic; allocating 8192 x 2 x 256 x 8 is avoided
    from lcasep.experiments import FULL_SCALE
    from lcasep.spectral import Kind
    assert FULL_SCALE.n_features == 8192 and FULL_SCALE.stride == 2
    assert FULL_SCALE.patch_frames(Kind.PHASE_RICH) == 8
    assert FULL_SCALE.patch_frames(Kind.MAGNITUDE_DOUBLE) == 4


def test_learn_params_validation():
    for bad in (dict(learning_rate=0), dict(momentum=1.0), dict(epochs=0)):
        with pytest.raises(ValueError):
            LearnParams(**bad)


def test_zero_residual_leaves_dictionary_unchanged():
    d = init_dictionary(4, 1, 3, 2, 2, 0)
    a = np.zeros((4, 3))
    a[1, 0], a[2, 2] = 0.7, -1.1
    code = SparseCode(a, 2, 2)
    img = reconstruct(d, code, 6)
    new, vel = hebbian_update(d, img, code, LearnParams())
    assert np.allclose(new.atoms, d.atoms, rtol=0, atol=1e-15)
    assert not vel.any()


def test_zero_code_is_no_op():
    d = init_dictionary(4, 1, 3, 2, 2, 0)
    img = np.random.default_rng(0).standard_normal((1, 3, 6))
    new, _ = hebbian_update(d, img, SparseCode(np.zeros((4, 3)), 2, 2), LearnParams())
    assert np.array_equal(new.atoms, d.atoms)


def test_single_active_atom_hand_computation():
    atom = np.array([0.5, 0.5, 0.5, 0.5]).reshape(1, 1, 4, 1)
    d = Dictionary(atom, 1)
    img = np.array([1.0, 0.0, 2.0, -1.0]).reshape(1, 4, 1)
    a = 0.8
    code = SparseCode(np.array([[a]]), 1, 1)
    lr = 0.1
    new, _ = hebbian_update(d, img, code, LearnParams(learning_rate=lr))
    residual = img.ravel() - a * atom.ravel()
    expected = atom.ravel() + lr * a * residual
    expected /= np.linalg.norm(expected)
    assert np.allclose(new.atoms.ravel(), expected, rtol=0, atol=1e-15)


def test_gradient_normalization_by_active_count():
    d = init_dictionary(3, 1, 4, 2, 2, 1)
    a = np.zeros((3, 4))
    a[0, [0, 2, 3]] = [1.0, 0.5, -0.2]
    img = np.random.default_rng(1).standard_normal((1, 4, 8))
    code = SparseCode(a, 2, 2)
    raw, active = residual_gradient(d, img, code, normalize_dw=False)
    norm, _ = residual_gradient(d, img, code, normalize_dw=True)
    assert np.allclose(norm[0], raw[0] / 3)
    assert list(active) == [True, False, False]


@given(seeds)
def test_update_locality_and_unit_norm(seed):
    r = np.random.default_rng(seed)
    d = init_dictionary(10, 2, 5, 4, 2, seed % 1000)
    a = np.zeros((10, 5))
    touched = r.choice(10, 3, replace=False)
    a[touched] = r.standard_normal((3, 5))
    img = r.standard_normal((2, 5, 12))
    vel = r.standard_normal(d.atoms.shape)
    new, new_vel = hebbian_update(d, img, SparseCode(a, 2, 4), LearnParams(), vel)
    untouched = np.setdiff1d(np.arange(10), touched)
    assert np.array_equal(new.atoms[untouched], d.atoms[untouched])
    assert np.array_equal(new_vel[untouched], vel[untouched])
    assert new.is_unit_norm(1e-6)


def test_momentum_accumulates():
    d = init_dictionary(2, 1, 3, 1, 1, 2)
    img = np.ones((1, 3, 2))
    code = SparseCode(np.array([[1.0, 0.0], [0.0, 0.0]]), 1, 1)
    p = LearnParams(momentum=0.5)
    _, v1 = hebbian_update(d, img, code, p)
    grad, _ = residual_gradient(d, img, code)
    _, v2 = hebbian_update(d, img, code, p, v1)
    assert np.allclose(v2[0], 0.5 * v1[0] + grad[0])


def test_train_counts_and_guards():
    d = init_dictionary(4, 1, 6, 2, 2, 0)
    img = np.random.default_rng(0).standard_normal((1, 6, 10))
    _, rep = train_dictionary([img], d, LearnParams(epochs=1), LcaParams(lam=0.1, n_steps=20))
    assert len(rep.errors) == len(rep.sparsities) == 1
    with pytest.raises(DataError):
        train_dictionary([], d, LearnParams(), LcaParams())


def test_train_is_deterministic():
    planted, images = planted_dictionary_data(0, n_images=20)
    init = init_dictionary(16, 1, 16, 4, 4, 1)
    runs = [train_dictionary(images, init, LearnParams(epochs=2), PLANTED_LCA)[0].atoms
            for _ in range(2)]
    assert runs[0].tobytes() == runs[1].tobytes()


def test_planted_recovery_and_error_trend():
    planted, images = planted_dictionary_data(0)
    init = init_dictionary(16, 1, 16, 4, 4, 1)
    learned, rep = train_dictionary(images, init, LearnParams(epochs=5), PLANTED_LCA)
    assert np.mean(match_atoms(planted.atoms, learned.atoms) > 0.9) >= 0.8
    e = rep.epoch_mean_error
    assert all(b <= 1.05 * a for a, b in zip(e, e[1:]))
    assert learned.is_unit_norm(1e-6)


def test_match_atoms():
    r = np.random.default_rng(0)
    ref = r.standard_normal((5, 1, 4, 2))
    perm = ref[[3, 1, 4, 0, 2]] * np.array([1, -1, 1, 2, -3])[:, None, None, None]
    assert np.allclose(match_atoms(ref, perm), 1.0)
    assert np.count_nonzero(match_atoms(ref, perm[:3])) == 3


def test_dictionary_file_round_trip(tmp_path):
    d = init_dictionary(6, 2, 5, 4, 2, 0, kind="PhaseRich")
    save_dictionary(d, tmp_path / "d.dict", "vocal", b"abc")
    back, role, tag = load_dictionary(tmp_path / "d.dict")
    assert role == "vocal" and back.kind == "PhaseRich" and tag.rstrip(b"\0") == b"abc"
    assert back.stride == 2 and np.array_equal(back.atoms, d.atoms.astype("<f4"))
    raw = (tmp_path / "d.dict").read_bytes()
    (tmp_path / "bad.dict").write_bytes(b"ABCD" + raw[4:])
    with pytest.raises(FormatError, match="bad.dict"):
        load_dictionary(tmp_path / "bad.dict")
    (tmp_path / "cut.dict").write_bytes(raw[:-1])
    with pytest.raises(FormatError):
        load_dictionary(tmp_path / "cut.dict")


def test_saved_dictionary_still_unit_norm(tmp_path):
    d = init_dictionary(32, 2, 256, 8, 2, 0)
    save_dictionary(d, tmp_path / "d.dict")
    back, _, _ = load_dictionary(tmp_path / "d.dict")
    assert back.is_unit_norm(1e-6)
    lca_encode(np.zeros((2, 256, 16)), back, LcaParams(n_steps=1))
