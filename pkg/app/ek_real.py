"""
Erdős–Kahane machinery for spanning digit sets in ℝ^d.

For a parameter ϑ and a renormalized frequency η the vectors
T_D(𝒪ᵗ)^{-n}ϑⁿη are split into nearest integers K_n and residuals ε_n.
Parameters whose residuals are small for most n are the exceptional ones;
they are covered by enumerating the admissible integer sequences (K_n).
"""
import hashlib
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np
from loguru import logger

from app import config
from app.errors import BudgetExceeded, CapExceeded, DegenerateTrace, SingularDigits
from app.fourier import dist_to_int
from app.ifs import normalize_translation
from app.schemas import (
    Ambiguous,
    CoverDisk,
    CoverResult,
    CoverStats,
    EKConstantsReal,
    EKTraceReal,
    HomogeneousIFS,
    WitnessReport,
)

ETA_GRID_CAP = 1 << 22
SCAN_CHUNK = 2048


# ---------------------------------------------------------------- basis and grids

def select_basis(ifs: HomogeneousIFS) -> tuple[float, np.ndarray, np.ndarray]:
    """
    (ϑ, 𝒪, T_D) for the EK machinery.

    Of the normalized digits a_1..a_m, d are chosen greedily by volume;
    bounding Ψ for the sub-family suffices.

    Raises:
        SingularDigits: the digits do not span ℝ^d
    """
    ifs = normalize_translation(ifs)
    D = ifs.D[1:]
    chosen: list[int] = []
    for _ in range(ifs.dim):
        best, best_volume = None, config.RANK_TOL
        for j in range(len(D)):
            if j in chosen:
                continue
            rows = D[chosen + [j]]
            volume = math.sqrt(max(np.linalg.det(rows @ rows.T), 0.0))
            if volume > best_volume:
                best, best_volume = j, volume
        if best is None:
            raise SingularDigits("digits do not span the space")
        chosen.append(best)
    return ifs.theta, ifs.O, D[chosen]


def _inverse(T_D: np.ndarray) -> tuple[np.ndarray, float]:
    if np.linalg.matrix_rank(T_D, tol=config.RANK_TOL) < len(T_D):
        raise SingularDigits("digit matrix has rank below d")
    return np.linalg.inv(T_D), float(np.linalg.cond(T_D))


def theta_scan(B1: float, B2: float, step: float) -> np.ndarray:
    """Uniform scan of [B1, B2] with both endpoints included."""
    return np.linspace(B1, B2, int(round((B2 - B1) / step)) + 1)


def eta_grid(d: int, B2: float, step: Optional[float] = None,
             extra: int = 0, seed: int = 0) -> np.ndarray:
    """
    Lattice of η with 1 ≤ ‖η‖∞ ≤ B2 (step per coordinate), plus seeded random points.

    Only one of ±η is kept (first nonzero coordinate positive): the residuals
    of -η are those of η with the sign flipped.
    """
    step = config.ETA_GRID_STEP if step is None else step
    kmax = int(math.floor(B2 / step + 1e-9))
    if (2 * kmax + 1) ** d > ETA_GRID_CAP:
        raise CapExceeded(f"eta grid of {(2 * kmax + 1) ** d} points; use a coarser step")
    axis = np.arange(-kmax, kmax + 1) * step
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    if extra:
        rng = np.random.default_rng(seed)
        v = rng.uniform(-1, 1, size=(extra, d))
        v *= (rng.uniform(1, B2, size=extra) / np.abs(v).max(axis=1))[:, None]
        grid = np.vstack([grid, v])
    sup = np.abs(grid).max(axis=1)
    grid = grid[(sup >= 1) & (sup <= B2 + 1e-12)]
    first = grid[np.arange(len(grid)), np.argmax(grid != 0, axis=1)]
    return grid[first > 0]


def _orbit_table(thetas: np.ndarray, etas: np.ndarray, O: np.ndarray,
                 T_D: np.ndarray, last: int) -> np.ndarray:
    """X[t, e, n] = T_D·𝒪ⁿ·ϑ_tⁿ·η_e for n = 0..last."""
    d = len(T_D)
    bases = np.empty((last + 1, d, d))
    P = np.eye(d)
    for n in range(last + 1):
        bases[n] = T_D @ P
        P = P @ O
    Y = np.einsum("nij,ej->eni", bases, etas)
    powers = thetas[:, None] ** np.arange(last + 1)[None, :]
    return powers[:, None, :, None] * Y[None, :, :, :]


# ---------------------------------------------------------------- traces

def ek_trace(theta: float, O: np.ndarray, T_D: np.ndarray,
             eta: Sequence[float], N: int) -> EKTraceReal:
    """
    Nearest-integer trace K_n + ε_n = T_D(𝒪ᵗ)^{-n}ϑⁿη, n = 0..N.

    Raises:
        SingularDigits: T_D not invertible
    """
    O, T_D = np.asarray(O, dtype=float), np.asarray(T_D, dtype=float)
    eta = np.asarray(eta, dtype=float).reshape(len(T_D))
    T_inv, condition = _inverse(T_D)
    X = _orbit_table(np.array([theta]), eta[None, :], O, T_D, N)[0, 0]
    K = np.rint(X)
    L = np.empty_like(X)
    P = T_inv
    for n in range(N + 1):
        L[n] = P @ K[n]
        P = O.T @ P
    return EKTraceReal(K=K.astype(np.int64), eps=X - K, L=L, theta=theta, eta=eta,
                       O=O, T_D=T_D, T_D_inv=T_inv, condition=condition)


def theta_estimate(trace: EKTraceReal, n: int) -> float:
    """
    ‖L_{n+1}‖∞ / ‖L_n‖∞.

    Raises:
        DegenerateTrace: ‖L_n‖ = 0
    """
    if not 0 <= n < len(trace.L) - 1:
        raise IndexError(f"estimate at n={n} needs L_{n + 1}")
    low = np.abs(trace.L[n]).max()
    if low == 0:
        raise DegenerateTrace(f"L_{n} vanishes")
    return float(np.abs(trace.L[n + 1]).max() / low)


# ---------------------------------------------------------------- constants

def _first_power(base: float, target: float) -> int:
    n = 0
    while base ** n / 2 < target:
        n += 1
    return n


def _norms(O, T_D):
    T_inv, _ = _inverse(T_D)
    d = len(T_D)
    return d, np.linalg.norm(T_D, np.inf), np.linalg.norm(T_inv, np.inf)


def analytic_C2(d: int, nT: float, nTi: float, C1: float, B2: float) -> float:
    """Prediction error per unit window residual, for the lead and the lagged ratio."""
    spread = math.sqrt(d) * nT * nTi
    return 1 + B2 * spread + C1 * B2 * spread * (math.sqrt(d) * nT * B2 + 0.5)


def _window_ratios(trace: EKTraceReal, start: int) -> list[float]:
    """‖K_{n+1} - prediction‖ / max residual over the window, both predictor forms."""
    ratios = []
    M = trace.T_D @ trace.O @ trace.T_D_inv
    res = np.abs(trace.eps).max(axis=1)
    for n in range(max(start, 1), len(trace.K) - 1):
        lag = np.abs(trace.L[n]).max() / np.abs(trace.L[n - 1]).max()
        err = np.abs(trace.K[n + 1] - lag * (M @ trace.K[n])).max()
        w = res[n - 1:n + 2].max()
        if w > 1e-9:
            ratios.append(err / w)
        lead = np.abs(trace.L[n + 1]).max() / np.abs(trace.L[n]).max()
        err = np.abs(trace.K[n + 1] - lead * (M @ trace.K[n])).max()
        w = res[n:n + 2].max()
        if w > 1e-9:
            ratios.append(err / w)
    return ratios


def ek_constants(O: np.ndarray, T_D: np.ndarray, B1: float, B2: float,
                 mode: str = "analytic", samples: int = 500, seed: int = 0) -> EKConstantsReal:
    """
    C₁, C₂, n₁, ρ = 1/(2C₂) and the branch bound (2⌈C₂⌉+1)^d.

    mode="empirical" replaces C₂ by twice the largest predictor error ratio
    observed over seeded random traces.
    """
    O, T_D = np.asarray(O, dtype=float), np.asarray(T_D, dtype=float)
    d, nT, nTi = _norms(O, T_D)
    C1 = 2 * math.sqrt(d) * nTi * (B2 + 1)
    n1 = _first_power(B1, math.sqrt(d) * nTi)
    if mode == "analytic":
        C2 = analytic_C2(d, nT, nTi, C1, B2)
    elif mode == "empirical":
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(samples):
            theta = rng.uniform(B1, B2)
            v = rng.uniform(-1, 1, size=d)
            eta = v * rng.uniform(1, B2) / np.abs(v).max()
            trace = ek_trace(theta, O, T_D, eta, n1 + 24)
            worst = max([worst, *_window_ratios(trace, n1 + 1)])
        C2 = config.CALIBRATION_SAFETY * max(worst, 0.5)
    else:
        raise ValueError(f"unknown mode {mode}")
    constants = EKConstantsReal(C1=C1, C2=C2, n1=n1, rho=1 / (2 * C2),
                                M_bound=(2 * math.ceil(C2) + 1) ** d,
                                B1=B1, B2=B2, mode=mode)
    logger.debug(f"EK constants: {constants}")
    return constants


def decay_exponent_bound(delta: float, rho: float, eps: float, B2: float) -> float:
    """Power-decay exponent implied outside the exceptional set."""
    return -delta * math.log(1 - 2 * math.pi * eps * rho ** 2) / math.log(B2)


# ---------------------------------------------------------------- predictor

def integer_box(center: np.ndarray, radius: float) -> np.ndarray:
    """All integer vectors within ℓ∞ distance `radius` of center."""
    center = np.atleast_1d(center)
    lo = np.ceil(center - radius - 1e-12).astype(np.int64)
    hi = np.floor(center + radius + 1e-12).astype(np.int64)
    if np.any(hi < lo):
        return np.empty((0, len(center)), dtype=np.int64)
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(center))


def k_predictor(trace: EKTraceReal, n: int, constants: EKConstantsReal,
                lagged: bool = False) -> list[int] | Ambiguous:
    """
    Predict K_{n+1} from the trace up to index n (n+1 with lagged=False).

    The prediction is ratio·T_D𝒪T_D⁻¹K_n with ratio ‖L_{n+1}‖/‖L_n‖, or
    ‖L_n‖/‖L_{n-1}‖ when lagged (usable before K_{n+1} is known).
    """
    if n < constants.n1:
        raise ValueError(f"n={n} below n1={constants.n1}")
    ratio = theta_estimate(trace, n - 1 if lagged else n)
    M = trace.T_D @ trace.O @ trace.T_D_inv
    prediction = ratio * (M @ trace.K[n])
    near = integer_box(prediction, constants.C2 * constants.rho)
    if len(near) == 1:
        return near[0].tolist()
    return Ambiguous(prediction=prediction.tolist(),
                     candidates=integer_box(prediction, constants.C2).tolist())


# ---------------------------------------------------------------- exceptional set

def _good_fractions(thetas: np.ndarray, etas: np.ndarray, O: np.ndarray,
                    T_D: np.ndarray, N: int, rho: float) -> np.ndarray:
    X = _orbit_table(thetas, etas, O, T_D, N)[:, :, 1:, :]
    return (dist_to_int(X).max(axis=-1) < rho).mean(axis=-1)


def bad_set_witness(theta: float, O: np.ndarray, T_D: np.ndarray, N: int,
                    delta: float, rho: float, eta_grid_points: Optional[np.ndarray] = None,
                    B2: Optional[float] = None) -> WitnessReport:
    """
    Search η for a certificate that ϑ lies in the exceptional set E_N(δ, ρ).

    Grid search is one-sided: a member verdict is a certificate, a
    non-witness verdict proves nothing.
    """
    O, T_D = np.asarray(O, dtype=float), np.asarray(T_D, dtype=float)
    etas = eta_grid(len(T_D), theta if B2 is None else B2) \
        if eta_grid_points is None else np.atleast_2d(eta_grid_points)
    fractions = _good_fractions(np.array([theta]), etas, O, T_D, N, rho)[0]
    best = int(np.argmax(fractions))
    return WitnessReport(
        verdict="member" if fractions[best] > 1 - delta else "non-witness",
        best_fraction=float(fractions[best]),
        best_witness=etas[best].tolist(),
        threshold=1 - delta,
        N=N,
        grid_size=len(etas),
    )


def certified_members(thetas: np.ndarray, O: np.ndarray, T_D: np.ndarray, N: int,
                      delta: float, rho: float, etas: np.ndarray) -> np.ndarray:
    """Boolean mask of the scanned ϑ with a witness on the η grid."""
    O, T_D = np.asarray(O, dtype=float), np.asarray(T_D, dtype=float)
    mask = np.zeros(len(thetas), dtype=bool)
    for start in range(0, len(thetas), SCAN_CHUNK):
        chunk = thetas[start:start + SCAN_CHUNK]
        fractions = _good_fractions(chunk, etas, O, T_D, N, rho)
        mask[start:start + SCAN_CHUNK] = fractions.max(axis=1) > 1 - delta
    return mask


# ---------------------------------------------------------------- cover enumeration

class _NodeBudget:
    def __init__(self, cap: int):
        self.cap = cap
        self.used = 0
        self._lock = threading.Lock()

    def spend(self, count: int) -> None:
        with self._lock:
            self.used += count
            if self.used > self.cap:
                raise BudgetExceeded(f"node cap {self.cap} exceeded", nodes=self.used)


class _Strips:
    """
    Feasible region of (t, u) = (log ϑ, log‖η‖₂) given a_n ≤ u + n·t ≤ b_n.

    For fixed t the strips intersect iff they intersect pairwise, so the
    feasible t form an interval cut out by the pairwise constraints.
    """

    def __init__(self, t_lo: float, t_hi: float, u_hi: float):
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.t_lo, self.t_hi, self.u_hi = t_lo, t_hi, u_hi

    def admit(self, R: np.ndarray, r: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized test of the next index for candidate norms R."""
        n = len(self.lower)
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(R > r, np.log(np.maximum(R - r, 1e-300)), -np.inf)
        b = np.log(R + r)
        if n == 0:
            a, b = np.maximum(a, 0.0), np.minimum(b, self.u_hi)
            lo = np.full(len(R), self.t_lo)
            hi = np.full(len(R), self.t_hi)
            return a <= b, a, b, np.vstack([lo, hi])
        gaps = n - np.arange(n)
        lower, upper = np.array(self.lower), np.array(self.upper)
        lo = np.maximum(self.t_lo, ((a[:, None] - upper[None, :]) / gaps).max(axis=1))
        hi = np.minimum(self.t_hi, ((b[:, None] - lower[None, :]) / gaps).min(axis=1))
        return lo <= hi + 1e-12, a, b, np.vstack([lo, hi])

    def extend(self, a: float, b: float, lo: float, hi: float) -> "_Strips":
        child = _Strips(lo, hi, self.u_hi)
        child.lower = self.lower + [a]
        child.upper = self.upper + [b]
        return child


class _CoverSearch:
    def __init__(self, O, T_D, B1, B2, N, delta, constants, budget):
        self.O, self.T_D = O, T_D
        self.T_inv, _ = _inverse(T_D)
        self.d = len(T_D)
        self.N = N
        self.B1, self.B2 = B1, B2
        self.c = constants
        self.marks_allowed = int(math.floor(delta * N + 1e-9))
        self.budget = budget
        self.M = T_D @ O @ self.T_inv
        self.L_maps = []
        P = self.T_inv
        for _ in range(N + 1):
            self.L_maps.append(P)
            P = O.T @ P
        spectral = np.linalg.norm(self.T_inv, 2) * math.sqrt(self.d)
        self.r_marked = spectral * 0.5
        self.r_clean = spectral * constants.rho
        self.root = _Strips(math.log(B1), math.log(B2), math.log(math.sqrt(self.d) * B2))
        self.branch_steps = 0
        self.max_candidates = 0
        self._lock = threading.Lock()

    def _norm_L(self, n, k):
        return np.abs(self.L_maps[n] @ k).max()

    def _R(self, cands):
        return np.linalg.norm(cands @ self.T_inv.T, axis=1)

    def _marked(self, marks: int, index: int) -> bool:
        # index 0 lies outside [N] and is never counted against the budget
        return index == 0 or bool(marks >> index & 1)

    def grow_seed(self, seed: np.ndarray) -> list[tuple]:
        leaves: list[tuple] = []
        s = len(seed) - 1
        strips = self.root
        for n in range(max(s - 1, 0)):
            ok, a, b, t = strips.admit(self._R(seed[n:n + 1]), self.r_marked)
            if not ok[0]:
                return leaves
            strips = strips.extend(a[0], b[0], t[0, 0], t[1, 0])

        tail = [i for i in range(max(s - 1, 0), s + 1)]
        choices = [0]
        for i in tail:
            if 1 <= i <= self.N:
                choices = choices + [m | 1 << i for m in choices]
        for marks in choices:
            if bin(marks).count("1") > self.marks_allowed:
                continue
            state = strips
            for i in tail:
                r = self.r_marked if self._marked(marks, i) else self.r_clean
                ok, a, b, t = state.admit(self._R(seed[i:i + 1]), r)
                if not ok[0]:
                    state = None
                    break
                state = state.extend(a[0], b[0], t[0, 0], t[1, 0])
            if state is not None:
                self._descend(seed, marks, state, 0, leaves)
        return leaves

    def _descend(self, K: np.ndarray, marks: int, strips: _Strips,
                 branches: int, leaves: list) -> None:
        n = len(K) - 1
        if n >= self.N:
            leaves.append((K, marks, branches))
            return
        below = self._norm_L(n - 1, K[n - 1])
        if below == 0:
            return
        prediction = (self._norm_L(n, K[n]) / below) * (self.M @ K[n])
        used = bin(marks).count("1")
        options = [False]
        if n + 1 <= self.N and used < self.marks_allowed:
            options.append(True)
        for mark_next in options:
            window_marked = mark_next or self._marked(marks, n) or self._marked(marks, n - 1)
            radius = self.c.C2 if window_marked else self.c.C2 * self.c.rho
            cands = integer_box(prediction, radius)
            if not len(cands):
                continue
            ok, a, b, t = strips.admit(self._R(cands),
                                       self.r_marked if mark_next else self.r_clean)
            keep = np.flatnonzero(ok)
            if not len(keep):
                continue
            self.budget.spend(len(keep))
            if window_marked:
                with self._lock:
                    self.branch_steps += 1
                    self.max_candidates = max(self.max_candidates, len(keep))
            next_marks = marks | (1 << (n + 1)) if mark_next else marks
            for i in keep:
                child = strips.extend(a[i], b[i], t[0, i], t[1, i])
                self._descend(np.vstack([K, cands[i]]), next_marks, child,
                              branches + int(window_marked), leaves)

    def disk(self, K: np.ndarray, marks: int, branches: int) -> CoverDisk:
        N = self.N
        center = self._norm_L(N, K[N]) / self._norm_L(N - 1, K[N - 1])
        tail_marked = self._marked(marks, N - 1) or self._marked(marks, N)
        w = 0.5 if tail_marked else self.c.rho
        radius = self.c.C1 * self.B1 ** (-N) * max(1.0, self.B2 * w)
        digest = hashlib.sha1(np.ascontiguousarray(K, dtype=np.int64).tobytes()).hexdigest()[:16]
        return CoverDisk(center=float(center), radius=float(radius),
                         branch_count=branches, seq_hash=digest)


def cover_seeds(O: np.ndarray, T_D: np.ndarray, B1: float, B2: float, last: int,
                theta_step: Optional[float] = None, eta_step: Optional[float] = None) -> np.ndarray:
    """Distinct prefixes K_0..K_last over a ϑ-scan of [B1, B2] times the η grid."""
    thetas = theta_scan(B1, B2, config.SEED_THETA_STEP if theta_step is None else theta_step)
    etas = eta_grid(len(T_D), B2, eta_step)
    prefixes = []
    for start in range(0, len(thetas), SCAN_CHUNK):
        X = _orbit_table(thetas[start:start + SCAN_CHUNK], etas, O, T_D, last)
        K = np.rint(X).astype(np.int64).reshape(-1, (last + 1) * len(T_D))
        prefixes.append(np.unique(K, axis=0))
    seeds = np.unique(np.vstack(prefixes), axis=0)
    return seeds.reshape(len(seeds), last + 1, len(T_D))


def cover_enumerate(O: np.ndarray, T_D: np.ndarray, B1: float, B2: float, N: int,
                    delta: float, rho: Optional[float] = None,
                    node_cap: Optional[int] = None, workers: int = 1,
                    constants: Optional[EKConstantsReal] = None,
                    theta_step: Optional[float] = None,
                    eta_step: Optional[float] = None) -> CoverResult:
    """
    Cover the exceptional ϑ in [B1, B2] by disks of radius about C₁B₁^{-N}.

    Sequences start from the seed prefixes K_0..K_{n₁+1}. At most ⌊δN⌋
    indices of [N] are marked as bad; a prediction step whose window
    {n-1, n, n+1} holds a mark branches over all integers within C₂ of the
    prediction, any other step over those within C₂ρ. Branches whose norm
    strips leave no feasible (ϑ, ‖η‖) are dropped.

    Raises:
        BudgetExceeded: more than node_cap nodes visited
    """
    if not 0 <= delta < 0.5:
        raise ValueError("delta must lie in [0, 1/2)")
    O, T_D = np.asarray(O, dtype=float), np.asarray(T_D, dtype=float)
    constants = constants or ek_constants(O, T_D, B1, B2)
    if rho is not None:
        constants = constants.model_copy(update={"rho": rho})
    if N < constants.n1 + 1:
        raise ValueError(f"N={N} must exceed n1={constants.n1}")
    node_cap = config.NODE_CAP if node_cap is None else node_cap

    budget = _NodeBudget(node_cap)
    search = _CoverSearch(O, T_D, B1, B2, N, delta, constants, budget)
    seeds = cover_seeds(O, T_D, B1, B2, min(constants.n1 + 1, N), theta_step, eta_step)
    budget.spend(len(seeds))
    logger.info(f"cover: {len(seeds)} seeds, N={N}, delta={delta}, rho={constants.rho:.4g}")

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            grown = list(pool.map(search.grow_seed, seeds))
    else:
        grown = [search.grow_seed(seed) for seed in seeds]

    unique: dict[str, CoverDisk] = {}
    for leaves in grown:
        for K, marks, branches in leaves:
            disk = search.disk(K, marks, branches)
            kept = unique.get(disk.seq_hash)
            if kept is None or kept.radius < disk.radius:
                unique[disk.seq_hash] = disk
    disks = sorted(unique.values(), key=lambda disk: (disk.center, disk.seq_hash))

    fitted = None
    if delta > 0 and disks:
        fitted = math.log(len(disks)) / (delta * math.log(1 / delta) * N)
    marks_allowed = search.marks_allowed
    stats = CoverStats(
        seeds=len(seeds),
        nodes=budget.used,
        disks=len(disks),
        branch_steps=search.branch_steps,
        max_candidates=search.max_candidates,
        node_cap=node_cap,
        fitted_C0=fitted,
        bound_value=float(len(seeds) * math.comb(N, marks_allowed)
                          * float(constants.M_bound) ** (3 * marks_allowed)),
    )
    logger.info(f"cover done: {stats.disks} disks, {stats.nodes} nodes")
    return CoverResult(disks=disks, stats=stats)


def fit_cover_growth(rows: Sequence[tuple[int, float, int]]) -> tuple[float, float]:
    """Least-squares (log C, c) in log(count) = log C + c·δlog(1/δ)N."""
    x = np.array([delta * math.log(1 / delta) * N for N, delta, _ in rows])
    y = np.log([count for _, _, count in rows])
    c, log_C = np.polyfit(x, y, 1)
    return float(log_C), float(c)


def covering_sum(counts: dict[int, int], base: float, beta: float) -> list[tuple[int, float]]:
    """Terms count_N·base^{-βN} of the β-dimensional covering sum, by N."""
    return [(N, counts[N] * base ** (-beta * N)) for N in sorted(counts)]
