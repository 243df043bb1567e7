import math

import numpy as np
import pytest

from app.errors import BudgetExceeded, CapExceeded, DegenerateTrace, SingularDigits
from app.ek_real import (
    bad_set_witness,
    certified_members,
    cover_enumerate,
    covering_sum,
    decay_exponent_bound,
    ek_constants,
    ek_trace,
    eta_grid,
    fit_cover_growth,
    integer_box,
    k_predictor,
    select_basis,
    theta_estimate,
    theta_scan,
)
from app.ifs_file import load_ifs
from app.schemas import Ambiguous
from tests.conftest import tetrahedron

GOLDEN = (1 + math.sqrt(5)) / 2
ONE = np.eye(1)


def test_golden_trace():
    trace = ek_trace(GOLDEN, ONE, ONE, [1.0], 6)
    assert trace.K[:, 0].tolist() == [1, 2, 3, 4, 7, 11, 18]
    assert np.abs(trace.eps).max() <= 0.5
    assert trace.L[:, 0].tolist() == [1, 2, 3, 4, 7, 11, 18]
    assert theta_estimate(trace, 5) == pytest.approx(18 / 11)
    with pytest.raises(IndexError):
        theta_estimate(trace, 6)


def test_estimates_approach_theta_on_a_rotated_trace():
    c, s = math.cos(0.9), math.sin(0.9)
    O = np.array([[c, -s], [s, c]])
    T_D = np.array([[1.0, 0.0], [0.3, 1.0]])
    trace = ek_trace(2.5, O, T_D, [1.2, -0.7], 30)
    assert theta_estimate(trace, 29) == pytest.approx(2.5, rel=1e-6)


def test_vanishing_norm_is_a_degenerate_trace():
    trace = ek_trace(1.5, ONE, ONE, [0.3], 3)
    assert trace.K[:, 0].tolist() == [0, 0, 1, 1]
    with pytest.raises(DegenerateTrace):
        theta_estimate(trace, 0)
    with pytest.raises(ZeroDivisionError):
        theta_estimate(trace, 1)


def test_singular_digit_matrix():
    with pytest.raises(SingularDigits):
        ek_trace(2.0, np.eye(2), np.array([[1.0, 2.0], [2.0, 4.0]]), [1.0, 1.0], 3)


def test_select_basis(corpus_dir):
    theta, O, T_D = select_basis(tetrahedron(0.7))
    assert theta == pytest.approx(1 / 0.7)
    assert np.allclose(O, np.eye(3))
    assert abs(np.linalg.det(T_D)) == pytest.approx(1.0)
    with pytest.raises(SingularDigits):
        select_basis(load_ifs(corpus_dir / "bad.yaml", allow_invalid=True))


def test_constants_for_the_line():
    constants = ek_constants(ONE, ONE, 1.99, 2.01)
    assert constants.C1 == pytest.approx(2 * 3.01)
    assert constants.n1 == 2
    assert constants.C2 == pytest.approx(1 + 2.01 + 6.02 * 2.01 * 2.51)
    assert constants.rho == pytest.approx(1 / (2 * constants.C2))
    assert constants.M_bound == 2 * math.ceil(constants.C2) + 1


def test_empirical_constants_are_smaller_and_reproducible():
    analytic = ek_constants(ONE, ONE, 1.5, 2.5)
    empirical = ek_constants(ONE, ONE, 1.5, 2.5, mode="empirical", samples=50, seed=4)
    assert empirical.mode == "empirical"
    assert empirical.C2 < analytic.C2
    assert empirical == ek_constants(ONE, ONE, 1.5, 2.5, mode="empirical", samples=50, seed=4)
    with pytest.raises(ValueError):
        ek_constants(ONE, ONE, 1.5, 2.5, mode="guess")


def test_lead_predictor_reproduces_the_golden_trace():
    constants = ek_constants(ONE, ONE, 1.5, 2.0)
    trace = ek_trace(GOLDEN, ONE, ONE, [1.0], 10)
    assert k_predictor(trace, 5, constants) == [18]
    with pytest.raises(ValueError):
        k_predictor(trace, constants.n1 - 1, constants)


def test_predictor_reports_ambiguity():
    constants = ek_constants(ONE, ONE, 1.5, 2.0).model_copy(update={"rho": 1.0})
    trace = ek_trace(GOLDEN, ONE, ONE, [1.0], 10)
    result = k_predictor(trace, 5, constants, lagged=True)
    assert isinstance(result, Ambiguous)
    assert [18] in result.candidates


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.normal(size=(d, d)))
    return Q * np.sign(np.diag(R))


def random_digit_basis(d: int, rng: np.random.Generator) -> np.ndarray:
    while True:
        T_D = np.eye(d) + 0.3 * rng.normal(size=(d, d))
        if np.linalg.cond(T_D, np.inf) <= 10:
            return T_D


def random_eta(d: int, B2: float, rng: np.random.Generator) -> np.ndarray:
    v = rng.uniform(-1, 1, size=d)
    return v * rng.uniform(1, B2) / np.abs(v).max()


def lead_error(trace, n: int) -> float:
    M = trace.T_D @ trace.O @ trace.T_D_inv
    return float(np.abs(trace.K[n + 1] - theta_estimate(trace, n) * (M @ trace.K[n])).max())


def lagged_error(trace, n: int) -> float:
    M = trace.T_D @ trace.O @ trace.T_D_inv
    return float(np.abs(trace.K[n + 1] - theta_estimate(trace, n - 1) * (M @ trace.K[n])).max())


def test_trace_identity_and_error_bounds_on_random_instances(rng):
    B1, B2, N = 1.5, 2.5, 25
    checked = 0
    for _ in range(1000):
        d = int(rng.integers(1, 4))
        O, T_D = random_orthogonal(d, rng), random_digit_basis(d, rng)
        theta, eta = rng.uniform(B1, B2), random_eta(d, B2, rng)
        constants = ek_constants(O, T_D, B1, B2)
        trace = ek_trace(theta, O, T_D, eta, N)
        res = np.abs(trace.eps).max(axis=1)
        assert res.max() <= 0.5
        spread = math.sqrt(d) * np.linalg.norm(trace.T_D_inv, np.inf)
        for n in range(N + 1):
            exact = T_D @ np.linalg.matrix_power(O, n) @ eta * theta ** n
            assert np.abs(trace.K[n] + trace.eps[n] - exact).max() <= 1e-10 * theta ** n
            assert np.abs(trace.L[n] - theta ** n * eta).max() <= spread * res[n] + 1e-10 * theta ** n
        for n in range(constants.n1, N):
            w = res[n:n + 2].max()
            assert abs(theta - theta_estimate(trace, n)) <= constants.C1 * theta ** -n * w + 1e-12
            assert lead_error(trace, n) <= constants.C2 * w + 1e-9
            if n > constants.n1:
                assert lagged_error(trace, n) <= constants.C2 * res[n - 1:n + 2].max() + 1e-9
            checked += 1
    assert checked > 10_000


def near_integer_instance(rng: np.random.Generator):
    """An integer trace (integer ϑ₀, η, T_D and signed-permutation 𝒪) with ϑ₀ nudged."""
    d = int(rng.integers(1, 3))
    O = np.eye(d)[rng.permutation(d)] * rng.choice([-1.0, 1.0], size=d)
    T_D = np.eye(d)
    if d == 2 and rng.random() < 0.5:
        T_D[1, 0] = 1.0
    eta = rng.integers(-3, 4, size=d).astype(float)
    eta[0] = rng.integers(1, 4)
    nudge = rng.choice([-1.0, 1.0]) * 10.0 ** -rng.uniform(6, 13)
    return float(rng.choice([2, 3])) + nudge, O, T_D, eta


def test_predictor_is_exact_once_residuals_drop_below_rho(rng):
    B1, B2, N = 1.5, 3.5, 16
    qualifying = 0
    for _ in range(1000):
        theta, O, T_D, eta = near_integer_instance(rng)
        constants = ek_constants(O, T_D, B1, B2)
        trace = ek_trace(theta, O, T_D, eta, N)
        res = np.abs(trace.eps).max(axis=1)
        for n in range(constants.n1, N):
            if res[n:n + 2].max() < constants.rho:
                assert k_predictor(trace, n, constants) == trace.K[n + 1].tolist()
                qualifying += 1
            if n > constants.n1 and res[n - 1:n + 2].max() < constants.rho:
                assert k_predictor(trace, n, constants, lagged=True) == trace.K[n + 1].tolist()
                qualifying += 1
    assert qualifying >= 1000


def test_integer_box():
    box = integer_box(np.array([0.5, -0.2]), 1.0)
    assert sorted(map(tuple, box.tolist())) == [(0, -1), (0, 0), (1, -1), (1, 0)]
    assert integer_box(np.array([0.5]), 0.1).shape == (0, 1)


def test_grids():
    assert theta_scan(1.0, 2.0, 0.25).tolist() == [1.0, 1.25, 1.5, 1.75, 2.0]
    assert eta_grid(1, 2.0, 0.25)[:, 0].tolist() == [1.0, 1.25, 1.5, 1.75, 2.0]
    plane = eta_grid(2, 1.5, 0.5)
    assert np.all(np.abs(plane).max(axis=1) >= 1)
    keys = {tuple(v) for v in plane.tolist()}
    assert not any(tuple(-v) in keys for v in plane)
    with pytest.raises(CapExceeded):
        eta_grid(3, 2.0, 1e-3)


def test_golden_witness_is_a_member():
    report = bad_set_witness(GOLDEN, ONE, ONE, 40, delta=0.25, rho=0.1,
                             eta_grid_points=np.array([[1.0]]))
    assert report.verdict == "member"
    assert report.best_fraction == pytest.approx(0.9)
    assert report.best_witness == [1.0]


def test_generic_parameter_finds_no_witness():
    report = bad_set_witness(1.8, ONE, ONE, 40, delta=0.5, rho=0.05,
                             eta_grid_points=eta_grid(1, 1.8, 1 / 8))
    assert report.verdict == "non-witness"
    assert report.threshold == 0.5


def test_decay_exponent_bound():
    value = decay_exponent_bound(0.1, 0.05, 0.5, 2.0)
    assert value > 0
    assert value == pytest.approx(-0.1 * math.log(1 - 2 * math.pi * 0.5 * 0.0025) / math.log(2))


class TestLineCover:
    B1, B2, N, DELTA = 1.9, 2.1, 12, 0.25

    @pytest.fixture(scope="class")
    def constants(self):
        return ek_constants(ONE, ONE, self.B1, self.B2)

    @pytest.fixture(scope="class")
    def cover(self, constants):
        return cover_enumerate(ONE, ONE, self.B1, self.B2, self.N, self.DELTA, constants=constants)

    def test_constants(self, constants):
        assert constants.C1 == pytest.approx(6.2)
        assert constants.C2 == pytest.approx(36.95)
        assert constants.rho == pytest.approx(0.01353, abs=1e-5)

    def test_disks_are_sorted_and_unique(self, cover):
        keys = [(disk.center, disk.seq_hash) for disk in cover.disks]
        assert keys == sorted(keys)
        assert len({disk.seq_hash for disk in cover.disks}) == len(cover.disks)
        assert cover.stats.disks == len(cover.disks)
        assert cover.stats.nodes >= cover.stats.seeds

    def test_two_is_covered(self, cover):
        assert any(abs(disk.center - 2.0) <= disk.radius for disk in cover.disks)

    def test_certified_members_are_covered(self, cover, constants):
        thetas = theta_scan(self.B1, self.B2, 1e-5)
        mask = certified_members(thetas, ONE, ONE, self.N, self.DELTA, constants.rho,
                                 eta_grid(1, self.B2, 1 / 64))
        assert mask.any()
        centers = np.array([disk.center for disk in cover.disks])
        radii = np.array([disk.radius for disk in cover.disks])
        for theta in thetas[mask]:
            assert np.any(np.abs(centers - theta) <= radii + 1e-12)

    def test_worker_count_does_not_change_the_cover(self, cover, constants):
        again = cover_enumerate(ONE, ONE, self.B1, self.B2, self.N, self.DELTA,
                                constants=constants, workers=3)
        assert again.disks == cover.disks

    def test_node_budget(self, constants):
        with pytest.raises(BudgetExceeded) as caught:
            cover_enumerate(ONE, ONE, self.B1, self.B2, self.N, self.DELTA,
                            constants=constants, node_cap=10)
        assert caught.value.nodes > 10

    def test_argument_checks(self, constants):
        with pytest.raises(ValueError):
            cover_enumerate(ONE, ONE, self.B1, self.B2, self.N, 0.5, constants=constants)
        with pytest.raises(ValueError):
            cover_enumerate(ONE, ONE, self.B1, self.B2, constants.n1, 0.1, constants=constants)


def test_fit_cover_growth_recovers_the_rate():
    rows = [(N, delta, round(3.0 * math.exp(0.7 * delta * math.log(1 / delta) * N)))
            for N in (40, 80, 160) for delta in (0.1, 0.2)]
    log_C, c = fit_cover_growth(rows)
    assert c == pytest.approx(0.7, abs=0.05)
    assert math.exp(log_C) == pytest.approx(3.0, rel=0.2)


def test_covering_sum():
    terms = covering_sum({10: 4, 5: 2}, 2.0, 0.5)
    assert terms == [(5, 2 * 2 ** -2.5), (10, 4 * 2 ** -5.0)]
