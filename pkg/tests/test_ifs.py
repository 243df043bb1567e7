import numpy as np
import pytest

from app.errors import CapExceeded, DimensionMismatch, IllConditioned, RealEigenvalue
from app.ifs import (
    atoms,
    attractor_bbox,
    chaos_game_sample,
    complex_diagonal_form,
    diagonal_basis,
    exact_mean,
    normalize_translation,
    rescale_digits,
    validate,
)
from app.schemas import BlockAngles, ExplicitMatrix, HomogeneousIFS
from tests.conftest import line_ifs, tetrahedron


def planar(angle: float, digits, theta: float = 2.5) -> HomogeneousIFS:
    c, s = np.cos(2 * np.pi * angle), np.sin(2 * np.pi * angle)
    return HomogeneousIFS(dim=2, theta=theta, rotation=ExplicitMatrix(matrix=[[c, -s], [s, c]]),
                          digits=digits, probs=[1 / len(digits)] * len(digits))


def test_tetrahedron_is_spanning_and_cyclic():
    report = validate(tetrahedron(0.7))
    assert report.spanning and report.cyclic
    assert report.ok


def test_collinear_digits_fail_spanning():
    ifs = HomogeneousIFS(dim=2, theta=2, rotation=ExplicitMatrix(matrix=[[1, 0], [0, 1]]),
                         digits=[[0, 0], [1, 1], [2, 2]], probs=[1 / 3] * 3)
    report = validate(ifs)
    assert "spanning" in report.failures
    assert "cyclic" in report.failures


def test_rotation_makes_a_single_direction_cyclic():
    report = validate(planar(0.3, [[0, 0], [1, 0]]))
    assert not report.spanning
    assert report.cyclic


def test_validate_reports_bad_probabilities_and_contraction():
    ifs = line_ifs(0.5, [0, 1], probs=[0.7, 0.7])
    report = validate(ifs)
    assert "probabilities" in report.failures
    assert "contraction" in report.failures


def test_validate_rejects_wrong_shapes():
    ifs = HomogeneousIFS(dim=2, theta=2, rotation=ExplicitMatrix(matrix=[[1.0]]),
                         digits=[[0, 0], [1, 0]], probs=[0.5, 0.5])
    with pytest.raises(DimensionMismatch):
        validate(ifs)


def test_block_angles_range_and_distinctness():
    ifs = HomogeneousIFS(dim=4, theta=3, rotation=BlockAngles(angles=[0.2, 0.2]),
                         digits=[[0, 0, 0, 0], [1, 0, 1, 0]], probs=[0.5, 0.5])
    assert "angle_distinct" in validate(ifs, distinct_angles=True).failures
    assert "angle_distinct" not in validate(ifs).failures
    wide = ifs.model_copy(update={"rotation": BlockAngles(angles=[0.7, 0.2])})
    assert "angle_range" in validate(wide).failures


def test_normalize_translation_keeps_the_measure():
    ifs = line_ifs(3, [1, 3])
    moved = normalize_translation(ifs)
    assert moved.digits[0] == [0.0]
    # the original mean equals the normalized mean plus the recorded shift
    assert np.allclose(exact_mean(ifs), exact_mean(moved) + np.asarray(moved.shift))
    assert moved.shift == pytest.approx([1.5])


def test_diagonal_form_of_planar_rotation():
    ifs = planar(0.3, [[0, 0], [1, 0], [0, 1]])
    Q, angles, residual = diagonal_basis(ifs)
    assert angles == pytest.approx([0.3])
    assert residual < 1e-9
    diag = complex_diagonal_form(ifs)
    assert isinstance(diag.rotation, BlockAngles)
    # unitary change of basis keeps digit norms
    assert np.allclose(np.linalg.norm(diag.D, axis=1), np.linalg.norm(ifs.D, axis=1))
    assert np.allclose(diag.D, ifs.D @ Q)


def test_diagonal_form_rejects_real_eigenvalues():
    ifs = HomogeneousIFS(dim=2, theta=2, rotation=ExplicitMatrix(matrix=[[1, 0], [0, 1]]),
                         digits=[[0, 0], [1, 0], [0, 1]], probs=[1 / 3] * 3)
    with pytest.raises(RealEigenvalue):
        diagonal_basis(ifs)


def test_diagonal_form_rejects_non_orthogonal_rotation():
    ifs = planar(0.3, [[0, 0], [1, 0], [0, 1]])
    skewed = ifs.model_copy(update={"rotation": ExplicitMatrix(matrix=[[0.0, -1.0], [1.0, 0.01]])})
    with pytest.raises(IllConditioned):
        complex_diagonal_form(skewed)


def test_rescale_digits_puts_a_two_in_every_coordinate():
    ifs = HomogeneousIFS(dim=2, theta=2.5, rotation=BlockAngles(angles=[0.3]),
                         digits=[[0, 0], [0.5, 0.5], [1, -1]], probs=[1 / 3] * 3)
    scaled = rescale_digits(ifs)
    assert scaled.digits[1] == pytest.approx([2.0, 0.0])


def test_cantor_atoms_level_one():
    cloud = atoms(line_ifs(3, [0, 2]), 1)
    assert cloud.points[:, 0] == pytest.approx([0, 2 / 3, 2, 8 / 3])
    assert cloud.weights == pytest.approx([0.25] * 4)


def test_atoms_respect_the_cap(golden):
    with pytest.raises(CapExceeded):
        atoms(golden, 30, cap=1000)


def test_chaos_game_mean_and_worker_independence(rotation2d):
    one = chaos_game_sample(rotation2d, 150_000, seed=5)
    many = chaos_game_sample(rotation2d, 150_000, seed=5, workers=4)
    assert np.array_equal(one, many)
    assert np.allclose(one.mean(axis=0), exact_mean(rotation2d), atol=0.02)


def test_samples_stay_in_the_bounding_box(golden):
    lo, hi = attractor_bbox(golden)
    assert lo[0] == pytest.approx(0.0, abs=1e-9)
    assert hi[0] == pytest.approx(golden.theta / (golden.theta - 1), abs=1e-9)
    points = chaos_game_sample(golden, 10_000, seed=1)
    assert np.all(points >= lo - 1e-12) and np.all(points <= hi + 1e-12)
