import math

import numpy as np
import pytest

from app.errors import FrequencyTooSmall, NonContractive
from app.fourier import (
    decay_fit,
    dist_to_int,
    lemma_elem_check,
    mu_hat,
    one_step_factor_identity_check,
    psi_bound,
    renormalize_frequency,
)
from tests.conftest import line_ifs


def test_transform_at_zero_is_one(rotation2d):
    result = mu_hat(rotation2d, [0.0, 0.0])
    assert result.value == 1
    assert result.truncation_depth == 0


def test_uniform_measure_matches_its_closed_form(uniform):
    for xi in (0.3, 1.7, 12.25):
        result = mu_hat(uniform, [xi])
        exact = math.sin(2 * math.pi * xi) / (2 * math.pi * xi)
        assert abs(result.value) == pytest.approx(abs(exact), abs=1e-9)
        assert result.tail_bound <= 1e-10


def test_conjugate_symmetry(rotation2d):
    xi = np.array([3.3, -1.9])
    assert mu_hat(rotation2d, -xi).value == pytest.approx(mu_hat(rotation2d, xi).value.conjugate(), abs=1e-12)


def test_non_contractive_and_bad_tolerance():
    with pytest.raises(NonContractive):
        mu_hat(line_ifs(0.5, [0, 1]), [1.0])
    with pytest.raises(ValueError):
        mu_hat(line_ifs(2, [0, 1]), [1.0], tol=0)


def test_cantor_transform_is_invariant_under_tripling(cantor):
    base = abs(mu_hat(cantor, [1.0]).value)
    assert base > 0.1
    for k in range(1, 19):
        assert abs(mu_hat(cantor, [3.0 ** k]).value) == pytest.approx(base, abs=1e-9)


def test_golden_transform_does_not_decay_along_powers(golden):
    for k in range(26):
        assert abs(mu_hat(golden, [golden.theta ** k]).value) >= 5e-3


def test_renormalize_frequency(uniform):
    eta, N = renormalize_frequency(uniform, [5.0])
    assert N == 2
    assert eta == pytest.approx([1.25])
    with pytest.raises(FrequencyTooSmall):
        renormalize_frequency(uniform, [0.5])


def test_psi_bounds_the_transform(rotation2d, golden, rng):
    for ifs in (rotation2d, golden):
        for _ in range(500):
            xi = rng.uniform(1, 40, size=ifs.dim) * rng.choice([-1.0, 1.0], size=ifs.dim)
            result = mu_hat(ifs, xi)
            bound = psi_bound(ifs, xi)
            assert 0 <= bound <= 1
            assert abs(result.value) <= bound + result.tail_bound + 1e-10


def test_psi_over_a_digit_subset_is_weaker(rotation2d):
    xi = [17.3, -4.1]
    assert psi_bound(rotation2d, xi) <= psi_bound(rotation2d, xi, digits_subset=[1]) + 1e-15


def test_one_step_factor_identity(rotation2d, golden):
    assert one_step_factor_identity_check(rotation2d, [3.7, -1.2], 20) <= 1e-12
    assert one_step_factor_identity_check(golden, [41.0], 30) <= 1e-12


def test_elementary_inequality_on_random_inputs(rng):
    for _ in range(10_000):
        m = int(rng.integers(2, 6))
        p = rng.dirichlet(np.ones(m))
        alphas = np.concatenate([[0.0], rng.uniform(-2, 2, size=m - 1)])
        k = int(rng.integers(0, m))
        assert lemma_elem_check(p, alphas, k)


def test_elementary_inequality_rejects_bad_input():
    with pytest.raises(ValueError):
        lemma_elem_check([0.5, 0.5], [0.1, 0.2], 1)
    with pytest.raises(ValueError):
        lemma_elem_check([0.5, 0.5], [0.0, 0.2], 2)


def test_dist_to_int():
    assert dist_to_int(np.array([0.2, 0.8, -1.3, 2.5])) == pytest.approx([0.2, 0.2, 0.3, 0.5])


def test_uniform_measure_decays_like_one_over_xi(uniform):
    fit = decay_fit(uniform, shell_count=12, directions_per_shell=256, seed=3)
    assert 0.85 <= fit.gamma <= 1.15
    assert fit.r2 >= 0.9
    assert len(fit.shells) == 12
    assert fit.shells[0][0] == pytest.approx(2.0)


def test_decay_fit_is_reproducible_and_worker_independent(rotation2d):
    one = decay_fit(rotation2d, 4, 64, seed=11)
    many = decay_fit(rotation2d, 4, 64, seed=11, workers=3)
    assert one == many


def test_decay_fit_cone_block_needs_block_angles(uniform, rotation2d):
    with pytest.raises(ValueError):
        decay_fit(uniform, 4, 16, cone_block=0)
    fit = decay_fit(rotation2d, 3, 32, cone_block=0)
    assert len(fit.argmax_directions) == 3
    with pytest.raises(ValueError):
        decay_fit(rotation2d, 2)
