import pytest

from app import config
from app.errors import CapExceeded, DimensionMismatch
from app.separation import (
    convolution_split,
    density_experiment,
    es_check,
    separation_sweep,
    sim_dimensions,
    split_report,
    verify_split,
)
from tests.conftest import line_ifs, tetrahedron


@pytest.mark.parametrize("method", ["brute", "mitm"])
def test_binary_expansions_separate(method):
    report = es_check(line_ifs(2, [0, 1]), 3, method)
    assert report.min_distance == pytest.approx(0.125)
    assert report.epsilon_star == pytest.approx(0.5)
    assert report.colliding_pair is None


def test_golden_collision(golden):
    report = es_check(golden, 2)
    assert report.min_distance <= 1e-12
    assert report.difference == [[-1.0], [1.0], [1.0]]
    left, right = report.colliding_pair
    assert len(left) == len(right) == 3
    # the two words give the same point
    points = [sum(golden.digits[b][0] * golden.theta ** -n for n, b in enumerate(word))
              for word in (left, right)]
    assert points[0] == pytest.approx(points[1], abs=1e-12)


@pytest.mark.parametrize("name", ["cantor", "uniform", "golden"])
def test_meet_in_the_middle_agrees_with_brute_force(name, request):
    ifs = request.getfixturevalue(name)
    for N in range(9):
        brute = es_check(ifs, N, "brute")
        mitm = es_check(ifs, N, "mitm")
        assert mitm.min_distance == pytest.approx(brute.min_distance, abs=1e-12)


def test_level_zero():
    report = es_check(line_ifs(3, [0, 2]), 0)
    assert report.min_distance == pytest.approx(2.0)
    assert report.epsilon_star == report.min_distance


def test_caps_and_dimension(golden, rotation2d):
    with pytest.raises(CapExceeded):
        es_check(golden, 30)
    with pytest.raises(DimensionMismatch):
        es_check(rotation2d, 2, "mitm")
    assert es_check(rotation2d, 2).min_distance > 0


def test_sweep_stops_at_the_cap(golden, monkeypatch):
    monkeypatch.setattr(config, "ATOM_CAP", 3 ** 6)
    reports = separation_sweep(golden, 40)
    assert [r.N for r in reports] == list(range(12))
    assert reports[2].min_distance <= 1e-12


def test_similarity_dimension_of_a_critical_system():
    theta = 4 ** (1 / 3)
    ifs = tetrahedron(1 / theta)
    for q in (1.5, 2.0, 5.0):
        report = sim_dimensions(ifs, q)
        assert report.sim_dim_q == pytest.approx(3.0)
        assert report.attractor_sim_dim == pytest.approx(3.0)
    assert sim_dimensions(tetrahedron(0.7)).supercritical
    assert not sim_dimensions(tetrahedron(0.55)).supercritical


def test_renyi_dimension_decreases_in_q(rotation2d):
    values = [sim_dimensions(rotation2d, q).sim_dim_q for q in (1.1, 1.5, 2, 3, 8)]
    assert all(a >= b for a, b in zip(values, values[1:]))
    with pytest.raises(ValueError):
        sim_dimensions(rotation2d, 1.0)


def test_split_factors(uniform):
    ifs_k, ifs_tilde = convolution_split(uniform, 3)
    assert ifs_k.theta == pytest.approx(8)
    assert ifs_k.digits == uniform.digits
    # sums b_1/2 + b_2/4 are all distinct
    assert sorted(d[0] for d in ifs_tilde.digits) == pytest.approx([0, 0.25, 0.5, 0.75])
    assert sum(ifs_tilde.probs) == pytest.approx(1.0)
    report = split_report(uniform, 3)
    assert report.dims_k.sim_dim_q == pytest.approx(1 / 3)
    assert report.dims_tilde_k.sim_dim_q == pytest.approx(2 / 3)


def test_split_merges_coinciding_sums(golden):
    _, ifs_tilde = convolution_split(golden, 3)
    assert len(ifs_tilde.digits) <= 4
    assert sum(ifs_tilde.probs) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        convolution_split(golden, 1)


@pytest.mark.parametrize("name", ["uniform", "cantor", "golden"])
@pytest.mark.parametrize("k", [2, 3])
def test_split_convolves_back(name, k, request):
    assert verify_split(request.getfixturevalue(name), k, 2) <= 1e-12


def test_split_of_a_rotated_system(rotation2d):
    assert verify_split(rotation2d, 2, 1) <= 1e-12


def test_density_separates_overlap_regimes():
    dense = density_experiment(tetrahedron(0.7), 64, 200_000, seed=9)
    sparse = density_experiment(tetrahedron(0.55), 64, 200_000, seed=9)
    assert dense.occupied_fraction > sparse.occupied_fraction
    assert dense.heuristic and "heuristic" in dense.note


def test_density_trends_on_the_line(uniform):
    assert density_experiment(uniform, 64, 200_000, seed=2).trend == "bounded"
    sparse_cantor = line_ifs(9, [0, 8])
    assert density_experiment(sparse_cantor, 256, 200_000, seed=2).trend == "singular"


def test_density_is_reproducible(cantor):
    first = density_experiment(cantor, 32, 20_000, seed=5)
    assert first == density_experiment(cantor, 32, 20_000, seed=5, workers=2)


def test_density_arguments(uniform):
    with pytest.raises(ValueError):
        density_experiment(uniform, 48, 1000, seed=1)
    wide = line_ifs(2, [0, 1]).model_copy(update={"dim": 5, "digits": [[0] * 5, [1] * 5]})
    with pytest.raises(DimensionMismatch):
        density_experiment(wide, 8, 1000, seed=1)

