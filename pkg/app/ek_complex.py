"""
Erdős–Kahane machinery in the complex diagonal model (even d).

The trace is x_n = Σ_j τ_jθ_jⁿ with the θ_j and τ_j in conjugate pairs, so
x_n is real. The known part θ_1..θ_{d-2} of the spectrum is eliminated by a
difference scheme, which leaves A_n = 2Re(Wθⁿ) for the unknown θ = θ_{d-1}.
From four consecutive A_n the F/G solver recovers θ and the imaginary part
Y_n, giving B_n = A_n + iY_n with B_{n+1}/B_n ≈ θ.
"""
import hashlib
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
from loguru import logger
from scipy.optimize import least_squares

from app import config
from app.ek_real import _NodeBudget
from app.errors import (
    DegenerateTrace,
    FrequencyTooSmall,
    NoConvergence,
    OutOfDomain,
    ValidationFailed,
)
from app.fourier import dist_to_int
from app.schemas import (
    Ambiguous,
    CoverDisk,
    CoverResult,
    CoverStats,
    DifferenceTable,
    EKConstantsComplex,
    EKTraceComplex,
    FGSolution,
    SolverFG,
    SpectrumH,
    WitnessReport,
)

SOLVE_TOL = 1e-8
DOMAIN_SLACK = 1e-6
MULTI_STARTS = 12
SCAN_CHUNK = 256


# ---------------------------------------------------------------- spectrum and traces

def _paired(values: Sequence[complex], what: str) -> np.ndarray:
    values = np.asarray(values, dtype=complex)
    if len(values) % 2 or not np.allclose(values[1::2], np.conj(values[0::2]),
                                          rtol=1e-12, atol=1e-12):
        raise ValidationFailed([f"{what}_pairing"])
    return values


def spectrum(theta_list: Sequence[complex], b1: Optional[float] = None,
             b2: Optional[float] = None) -> SpectrumH:
    """
    Check θ_1..θ_{2s} against the class H(s, ϑ, b₁, b₂).

    b1 and b2 default to the tightest values the list satisfies.
    """
    thetas = _paired(theta_list, "theta")
    moduli = np.abs(thetas)
    vartheta = float(moduli[0])
    failures = []
    if np.abs(moduli - vartheta).max() > 1e-12 * vartheta:
        failures.append("modulus")
    upper = thetas[0::2].imag
    if np.any(upper <= 0):
        failures.append("half_plane")
    gaps = [abs(a - b) for a, b in combinations(thetas, 2)]
    b1 = float(upper.min()) if b1 is None else b1
    b2 = float(min(gaps)) if b2 is None else b2
    if upper.min() < b1:
        failures.append("b1")
    if gaps and min(gaps) < b2:
        failures.append("b2")
    if failures:
        raise ValidationFailed(failures)
    return SpectrumH(theta_list=thetas.tolist(), vartheta=vartheta, b1=b1, b2=b2)


def _prefix_poly(theta_prefix: Sequence[complex]) -> np.ndarray:
    """Real coefficients of Π(x - θ_k) over a conjugate-closed prefix, high to low."""
    if len(theta_prefix) == 0:
        return np.ones(1)
    poly = np.poly(_paired(theta_prefix, "theta_prefix"))
    return poly.real


def trace_values(theta_list: Sequence[complex], tau: Sequence[complex], N: int) -> np.ndarray:
    """x_n = Σ_j τ_jθ_jⁿ for n = 0..N (real by the pairing)."""
    thetas = _paired(theta_list, "theta")
    tau = _paired(tau, "tau")
    powers = thetas[None, :] ** np.arange(N + 1)[:, None]
    values = powers @ tau
    scale = np.maximum(1.0, np.abs(values))
    if np.any(np.abs(values.imag) > 1e-10 * scale):
        raise ValidationFailed(["conjugate_symmetry"])
    return values.real


def ek_trace_complex(theta_list: Sequence[complex], tau: Sequence[complex], N: int,
                     b1: Optional[float] = None) -> EKTraceComplex:
    """
    Nearest-integer trace K_n + ε_n = Σ_j τ_jθ_jⁿ with its elimination table.

    B[i] holds B_{i+3}; windows where the solver finds nothing in the half
    plane Im θ ≥ b1 are left as nan.
    """
    thetas = _paired(theta_list, "theta")
    tau = _paired(tau, "tau")
    d = len(thetas)
    x = trace_values(thetas, tau, N)
    K = np.rint(x)
    table = _recurrence(K, thetas[:d - 2])
    vartheta = float(abs(thetas[-1]))
    b1 = float(thetas[-2].imag) / 2 if b1 is None else b1
    A = table[-1].real
    B = np.full(max(len(A) - 3, 0), np.nan + 0j)
    for i in range(len(B)):
        try:
            solution = solve_FG(A[i:i + 4], vartheta, b1, strict=False, refine=False)
        except (OutOfDomain, NoConvergence):
            continue
        B[i] = A[i + 3] + 1j * solution.y3
    if abs(tau[-2]) + 1e-12 < np.abs(tau).max() or not 1 <= abs(tau[-2]) <= vartheta:
        logger.debug("tau is not normalized on its last pair")
    return EKTraceComplex(tau=tau, theta_list=thetas, K=K.astype(np.int64), eps=x - K,
                          A_table=table, B=B)


# ---------------------------------------------------------------- Ψ in the complex model

def renormalization_depth(vartheta: float, z_norm: float) -> int:
    """N maximal with ϑ^{-N}‖z‖∞ ≥ 1."""
    if z_norm < 1:
        raise FrequencyTooSmall(f"|z| = {z_norm} below 1")
    N = max(int(math.floor(math.log(z_norm) / math.log(vartheta))), 0)
    while vartheta ** -(N + 1) * z_norm >= 1:
        N += 1
    while N > 0 and vartheta ** -N * z_norm < 1:
        N -= 1
    return N


def psi_complex(theta_list: Sequence[complex], eps_min: float, z: Sequence[complex]) -> float:
    """Π_{n=0}^{N(z)} (1 - 2πε‖Σ_j θ_jⁿτ_j‖²) with τ_j = θ_j^{-N(z)}z_j."""
    thetas = _paired(theta_list, "theta")
    z = _paired(z, "z")
    vartheta = float(abs(thetas[0]))
    N = renormalization_depth(vartheta, float(np.abs(z).max()))
    tau = thetas ** (-N) * z
    sums = (thetas[None, :] ** np.arange(N + 1)[:, None]) @ tau
    return float(np.prod(1 - 2 * np.pi * eps_min * dist_to_int(sums.real) ** 2))


# ---------------------------------------------------------------- difference scheme

def _recurrence(K: np.ndarray, theta_prefix: Sequence[complex]) -> list[np.ndarray]:
    table = [np.asarray(K, dtype=complex)]
    for theta in theta_prefix:
        prev = table[-1]
        table.append(prev[1:] - theta * prev[:-1])
    return table


def _closed_form(K: np.ndarray, theta_prefix: Sequence[complex], j: int) -> np.ndarray:
    poly = np.poly(theta_prefix[:j]) if j else np.ones(1)
    return np.convolve(np.asarray(K, dtype=complex), poly, mode="valid")


def eliminated_tail(theta_list: Sequence[complex], tau: Sequence[complex], N: int) -> np.ndarray:
    """2Re[τ_{d-1}Π_{k≤d-2}(θ_{d-1} - θ_k)θ_{d-1}ⁿ], n = 0..N."""
    thetas = _paired(theta_list, "theta")
    tau = _paired(tau, "tau")
    theta = thetas[-2]
    W = 2 * tau[-2] * np.prod(theta - thetas[:-2])
    return (W * theta ** np.arange(N + 1)).real


def difference_scheme(trace: EKTraceComplex, theta_prefix: Sequence[complex]) -> DifferenceTable:
    """
    A_n^{(j)} = A_{n+1}^{(j-1)} - θ_jA_n^{(j-1)} with A^{(0)} = K, j ≤ d-2.

    Also checks the symmetric-polynomial closed form against the recurrence
    and the bound |Ã^{(j)} - A^{(j)}| ≤ (1+ϑ)^j max|ε| where Ã runs on K + ε.
    """
    d = len(trace.theta_list)
    if len(trace.K) < d + 4:
        raise ValueError(f"trace needs at least {d + 4} terms")
    theta_prefix = list(theta_prefix)
    table = _recurrence(trace.K, theta_prefix)
    residual = 0.0
    for j in range(1, len(table)):
        closed = _closed_form(trace.K, theta_prefix, j)
        scale = np.maximum(1.0, np.abs(closed))
        residual = max(residual, float((np.abs(table[j] - closed) / scale).max()))
    tilde = _recurrence(trace.K + trace.eps, theta_prefix)
    vartheta = float(abs(trace.theta_list[0]))
    worst = float(np.abs(trace.eps).max())
    tilde_ok = all(
        float(np.abs(tilde[j] - table[j]).max()) <= (1 + vartheta) ** j * worst + 1e-9
        for j in range(len(table))
    )
    return DifferenceTable(A_table=table, A_tilde=tilde,
                           closed_form_residual=residual, tilde_bound_ok=tilde_ok)


# ---------------------------------------------------------------- F/G solver

def _fg_residual(phi: float, y3: float, x: np.ndarray, vartheta: float) -> np.ndarray:
    theta = vartheta * np.exp(1j * phi)
    return (theta ** np.array([-3.0, -2.0, -1.0]) * (x[3] + 1j * y3)).real - x[:3]


def _best_y3(phi: float, x: np.ndarray, vartheta: float) -> float:
    P = (vartheta * np.exp(1j * phi)) ** np.array([-3.0, -2.0, -1.0])
    return float(np.sum(P.imag * (P.real * x[3] - x[:3])) / np.sum(P.imag ** 2))


def _seed(x: np.ndarray, vartheta: float) -> Optional[tuple[complex, float]]:
    """θ and y3 read off the recurrence x_{j+2} = 2Reθ·x_{j+1} - ϑ²x_j."""
    x0, x1, x2, x3 = x
    v2 = vartheta * vartheta
    denom = x1 * x1 + x2 * x2
    if denom == 0:
        return None
    re = (x1 * (x2 + v2 * x0) + x2 * (x3 + v2 * x1)) / denom / 2
    im2 = v2 - re * re
    if im2 <= 0:
        return None
    im = math.sqrt(im2)
    return complex(re, im), (v2 * x2 - re * x3) / im


def _phi_bounds(vartheta: float, b1: float) -> tuple[float, float]:
    if b1 >= vartheta:
        raise OutOfDomain(f"b1={b1} leaves no room on the circle of radius {vartheta}")
    low = math.asin(b1 / vartheta)
    return low, math.pi - low


def _refine(x: np.ndarray, vartheta: float, phi0: float, bounds: tuple[float, float]):
    lo, hi = bounds
    phi0 = min(max(phi0, lo + 1e-12), hi - 1e-12)
    start = [phi0, _best_y3(phi0, x, vartheta)]
    result = least_squares(lambda v: _fg_residual(v[0], v[1], x, vartheta), start,
                           bounds=([lo, -np.inf], [hi, np.inf]),
                           xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return float(result.x[0]), float(result.x[1]), float(np.abs(result.fun).max())


def solve_FG(x: Sequence[float], vartheta: float, b1: float, tol: float = SOLVE_TOL,
             strict: bool = True, refine: bool = True, probe: bool = False) -> FGSolution:
    """
    Solve Re(θ^{j-3}(x₃ + iy₃)) = x_j, j = 0, 1, 2, for |θ| = ϑ and real y₃.

    The closed-form seed is exact on exact data. With refine the solution is
    polished by bounded least squares in (arg θ, y₃), falling back to a
    multi-start over arg θ when the seed is degenerate. probe runs the
    multi-start anyway and reports whether all in-tolerance solutions agree.

    Raises:
        OutOfDomain: the solution has Im θ < b1
        NoConvergence: residual above tol·max(1, |x₃ + iy₃|) (strict only)
    """
    x = np.asarray(x, dtype=float)
    scale = max(1.0, float(np.abs(x).max()))
    xs = x / scale
    bounds = _phi_bounds(vartheta, b1)

    def accept(phi, y3s):
        residual = float(np.abs(_fg_residual(phi, y3s, xs, vartheta)).max())
        return residual, residual <= tol * max(1.0, abs(complex(xs[3], y3s)))

    seed = _seed(xs, vartheta)
    if seed is not None:
        phi, y3s = float(np.angle(seed[0])), seed[1]
        if strict and accept(phi, y3s)[1] and seed[0].imag < b1 * (1 - DOMAIN_SLACK):
            raise OutOfDomain(f"Im theta = {seed[0].imag:.6g} below b1 = {b1}")
        if not bounds[0] <= phi <= bounds[1]:
            phi = min(max(phi, bounds[0]), bounds[1])
            y3s = _best_y3(phi, xs, vartheta)
    else:
        phi = (bounds[0] + bounds[1]) / 2
        y3s = _best_y3(phi, xs, vartheta)
    candidates = [(accept(phi, y3s)[0], phi, y3s)]

    if refine and (seed is None or not accept(phi, y3s)[1] or probe):
        for phi0 in [phi, *np.linspace(*bounds, MULTI_STARTS)]:
            refined_phi, refined_y3, residual = _refine(xs, vartheta, phi0, bounds)
            candidates.append((residual, refined_phi, refined_y3))

    residual, phi, y3s = min(candidates)
    _, ok = accept(phi, y3s)
    if strict and not ok:
        raise NoConvergence(f"F/G residual {residual:.3e} above tolerance")
    unique = None
    if probe:
        good = [c for c in candidates if accept(c[1], c[2])[1]]
        unique = all(abs(np.exp(1j * c[1]) - np.exp(1j * phi)) <= 1e-6 for c in good)
    return FGSolution(theta=complex(vartheta * np.exp(1j * phi)), y3=y3s * scale,
                      residual=residual * scale, unique=unique)


def forward_window(theta: complex, w0: complex) -> np.ndarray:
    """x_j = Re(θʲw₀), j = 0..3: the data F/G inverts."""
    return (theta ** np.arange(4) * w0).real


def calibrate_solver(vartheta: float, b1: float, d: int, samples: Optional[int] = None,
                     seed: int = 0, refine: bool = False) -> SolverFG:
    """
    Empirical R₀ and Lipschitz constant of the F/G solver.

    R₀ is twice the smallest |w₀| on a dyadic ladder from which perturbations
    of size r = (1+ϑ)^{d-2}/2 never push the solver onto the wrong branch;
    C1_lem is twice the largest finite-difference slope of G (and of F
    scaled by |w₀|) observed beyond R₀.
    """
    samples = config.SOLVER_SAMPLES if samples is None else samples
    rng = np.random.default_rng(seed)
    bounds = _phi_bounds(vartheta, b1)
    r = (1 + vartheta) ** (d - 2) / 2
    per_level = max(20, samples // 10)

    def draw(radius, count):
        phis = rng.uniform(*bounds, size=count)
        w0 = radius * rng.uniform(1, 2, size=count) * np.exp(1j * rng.uniform(0, 2 * np.pi, count))
        return vartheta * np.exp(1j * phis), w0

    R0 = None
    for k in range(-2, 24):
        radius = 2.0 ** k
        thetas, w0s = draw(radius, per_level)
        good = True
        for theta, w0 in zip(thetas, w0s):
            x = forward_window(theta, w0) + rng.uniform(-r, r, size=4)
            solution = solve_FG(x, vartheta, b1, strict=False, refine=refine)
            if abs(solution.theta - theta) > 0.5 * b1:
                good = False
                break
        if good:
            R0 = 2 * radius
            break
    if R0 is None:
        raise NoConvergence("no radius on the ladder keeps the solver on its branch")

    slope = 0.0
    thetas, w0s = draw(R0, samples)
    for theta, w0 in zip(thetas, w0s):
        x = forward_window(theta, w0)
        base = solve_FG(x, vartheta, b1, strict=False, refine=refine)
        h = 1e-6 * max(1.0, float(np.abs(x).max()))
        dG = dF = 0.0
        for i in range(4):
            bumped = x.copy()
            bumped[i] += h
            moved = solve_FG(bumped, vartheta, b1, strict=False, refine=refine)
            dG += abs(moved.y3 - base.y3) / h
            dF += abs(moved.theta - base.theta) / h
        slope = max(slope, dG, abs(w0) * dF)
    solver = SolverFG(R0=R0, C1_lem=2 * slope, r=r, vartheta=vartheta, b1=b1, d=d)
    logger.info(f"F/G calibration: R0={solver.R0:.4g} C1={solver.C1_lem:.4g}")
    return solver


# ---------------------------------------------------------------- predictors

def _window_B(K_window: np.ndarray, poly: np.ndarray, vartheta: float, b1: float,
              refine: bool) -> tuple[complex, complex]:
    A = np.convolve(np.asarray(K_window, dtype=float), poly, mode="valid")
    first = solve_FG(A[0:4], vartheta, b1, strict=False, refine=refine)
    second = solve_FG(A[1:5], vartheta, b1, strict=False, refine=refine)
    B3 = complex(A[3], first.y3)
    if B3 == 0:
        raise DegenerateTrace("B vanishes on the window")
    return B3, complex(A[4], second.y3)


def _check_window(K_window, theta_prefix) -> tuple[np.ndarray, np.ndarray]:
    K_window = np.asarray(K_window, dtype=float)
    d = len(theta_prefix) + 2
    if len(K_window) != d + 3:
        raise ValueError(f"window must hold d+3 = {d + 3} integers")
    return K_window, _prefix_poly(theta_prefix)


def phi_predictor(K_window: Sequence[int], theta_prefix: Sequence[complex], vartheta: float,
                  b1: float, refine: bool = False) -> complex:
    """B_{n+4}/B_{n+3} from K_n..K_{n+d+2}: the estimate Φ of θ_{d-1}."""
    K_window, poly = _check_window(K_window, theta_prefix)
    B3, B4 = _window_B(K_window, poly, vartheta, b1, refine)
    return B4 / B3


def _xi(K_window: np.ndarray, poly: np.ndarray, B3: complex, B4: complex) -> float:
    d = len(poly) + 1
    correction = poly[1:] @ K_window[d + 2:4:-1] if d > 2 else 0.0
    return float((B4 * B4 / B3).real - correction)


def xi_predictor(K_window: Sequence[int], theta_prefix: Sequence[complex], vartheta: float,
                 b1: float, constants: Optional[EKConstantsComplex] = None,
                 refine: bool = False) -> int | Ambiguous:
    """
    Ξ = Re(B_{n+4}²/B_{n+3}) - Σ_{k=1}^{d-2} (-1)^kσ_kK_{n+d+3-k}, predicting K_{n+d+3}.

    A unique integer within ½ is returned as is; otherwise the candidates
    within C₃ (or 1 without constants) come back as Ambiguous.
    """
    K_window, poly = _check_window(K_window, theta_prefix)
    B3, B4 = _window_B(K_window, poly, vartheta, b1, refine)
    xi = _xi(K_window, poly, B3, B4)
    near = _integers_within(xi, 0.5)
    if len(near) == 1:
        return near[0]
    radius = 1.0 if constants is None else constants.C3
    return Ambiguous(prediction=[xi], candidates=[[k] for k in _integers_within(xi, radius)])


def _integers_within(center: float, radius: float) -> list[int]:
    lo = math.ceil(center - radius - 1e-12)
    hi = math.floor(center + radius + 1e-12)
    return list(range(lo, hi + 1))


# ---------------------------------------------------------------- constants

def _first_window(vartheta: float, b2: float, d: int, target: float) -> int:
    n = 0
    while 2 * b2 ** (d - 2) * vartheta ** n < target:
        n += 1
    return n


def random_instance(theta_prefix: Sequence[complex], vartheta: float, b1: float,
                    rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """(θ_list, τ) with θ_{d-1} uniform on the admissible arc and τ normalized on its last pair."""
    lo, hi = _phi_bounds(vartheta, b1)
    theta = vartheta * np.exp(1j * rng.uniform(lo, hi))
    s = len(theta_prefix) // 2 + 1
    r = rng.uniform(1, vartheta)
    head = rng.uniform(0, r, size=s - 1) * np.exp(1j * rng.uniform(0, 2 * np.pi, s - 1))
    last = r * np.exp(1j * rng.uniform(0, 2 * np.pi))
    odd = np.append(head, last)
    thetas = np.append(np.asarray(theta_prefix, dtype=complex), [theta, np.conj(theta)])
    tau = np.empty(2 * s, dtype=complex)
    tau[0::2], tau[1::2] = odd, np.conj(odd)
    return thetas, tau


def ekc_constants(vartheta: float, b1: float, b2: float, d: int, solver: SolverFG,
                  mode: str = "analytic", theta_prefix: Sequence[complex] = (),
                  samples: int = 200, seed: int = 0) -> EKConstantsComplex:
    """
    C₂, C₃, n₂, n₃ and ρ = 1/(2C₃) for the class H.

    D = (1 + 4C1_lem)(1+ϑ)^{d-2} bounds |ΔB| per unit residual; the empirical
    mode replaces C₂ and C₃ by twice the largest ratios seen on random traces.
    """
    D = (1 + 4 * solver.C1_lem) * (1 + vartheta) ** (d - 2)
    n2 = _first_window(vartheta, b2, d, max(solver.R0, D))
    n3 = n2 + 1
    if mode == "analytic":
        C2 = D * (1 + vartheta) / (b2 ** (d - 2) * vartheta ** 3)
        C3 = C2 * (1 + 1 / vartheta) * (2 * (2 * vartheta) ** (d - 1) * vartheta ** 4 + D / 2)
    elif mode == "empirical":
        if len(theta_prefix) != d - 2:
            raise ValueError("empirical mode needs the d-2 known eigenvalues")
        rng = np.random.default_rng(seed)
        poly = _prefix_poly(theta_prefix)
        worst_phi = worst_xi = 0.0
        for _ in range(samples):
            thetas, tau = random_instance(theta_prefix, vartheta, b1, rng)
            trace = ek_trace_complex(thetas, tau, n3 + d + 24, b1)
            K = trace.K.astype(float)
            res = np.abs(trace.eps)
            for n in range(n2, len(K) - d - 3):
                window = K[n:n + d + 3]
                B3, B4 = _window_B(window, poly, vartheta, b1, refine=False)
                w = res[n:n + d + 3].max()
                if w > 1e-9:
                    worst_phi = max(worst_phi, abs(B4 / B3 - thetas[-2]) * vartheta ** n / w)
                w = res[n:n + d + 4].max()
                if w > 1e-9:
                    worst_xi = max(worst_xi, abs(_xi(window, poly, B3, B4) - K[n + d + 3]) / w)
        C2 = config.CALIBRATION_SAFETY * max(worst_phi, 1e-3)
        C3 = config.CALIBRATION_SAFETY * max(worst_xi, 0.5)
    else:
        raise ValueError(f"unknown mode {mode}")
    return EKConstantsComplex(C2=C2, C3=C3, n2=n2, n3=n3, rho=1 / (2 * C3),
                              M_bound=2 * math.ceil(C3) + 1, D=D, mode=mode)


def decay_exponent_bound_complex(delta: float, rho: float, eps: float, vartheta: float) -> float:
    return -delta * math.log(1 - 2 * math.pi * eps * rho ** 2) / math.log(vartheta)


# ---------------------------------------------------------------- exceptional set

def tau_grid(s: int, vartheta: float, radial_step: float = 1 / 16, angles: int = 64,
             seed: int = 0) -> np.ndarray:
    """
    Grid of (τ_1, τ_3, ..., τ_{2s-1}) with the last entry of modulus in [1, ϑ).

    The last entry runs over a polar grid; for s > 1 each grid point gets
    seeded random companions of smaller modulus.
    """
    radii = np.arange(1.0, vartheta, radial_step)
    phases = np.exp(2j * np.pi * np.arange(angles) / angles)
    last = (radii[:, None] * phases[None, :]).ravel()
    if s == 1:
        return last[:, None]
    rng = np.random.default_rng(seed)
    head = rng.uniform(0, 1, size=(len(last), s - 1)) * np.abs(last)[:, None]
    head = head * np.exp(1j * rng.uniform(0, 2 * np.pi, size=head.shape))
    return np.hstack([head, last[:, None]])


def _grid_traces(theta_odd: np.ndarray, grid: np.ndarray, last: int) -> np.ndarray:
    """x[g, n] = 2Re Σ_j τ_{2j-1}[g]·θ_{2j-1}ⁿ."""
    powers = theta_odd[None, :] ** np.arange(last + 1)[:, None]
    return 2 * (grid @ powers.T).real


def bad_set_witness_complex(theta_list: Sequence[complex], N: int, delta: float, rho: float,
                            grid: Optional[np.ndarray] = None) -> WitnessReport:
    """Search the τ grid for a member certificate of E_{H,N}(δ, ρ). One-sided."""
    thetas = _paired(theta_list, "theta")
    vartheta = float(abs(thetas[0]))
    grid = tau_grid(len(thetas) // 2, vartheta) if grid is None else np.atleast_2d(grid)
    x = _grid_traces(thetas[0::2], grid, N)[:, 1:]
    fractions = (dist_to_int(x) < rho).mean(axis=1)
    best = int(np.argmax(fractions))
    witness = np.column_stack([grid[best].real, grid[best].imag]).ravel()
    return WitnessReport(
        verdict="member" if fractions[best] > 1 - delta else "non-witness",
        best_fraction=float(fractions[best]),
        best_witness=witness.tolist(),
        threshold=1 - delta,
        N=N,
        grid_size=len(grid),
    )


def angle_scan(vartheta: float, b1: float, step: float,
               phi_range: Optional[tuple[float, float]] = None) -> np.ndarray:
    lo, hi = _phi_bounds(vartheta, b1)
    if phi_range is not None:
        lo, hi = max(lo, phi_range[0]), min(hi, phi_range[1])
    return np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)


def certified_members_complex(theta_prefix: Sequence[complex], vartheta: float,
                              phis: np.ndarray, N: int, delta: float, rho: float,
                              grid: np.ndarray) -> np.ndarray:
    """Boolean mask of the scanned angles whose θ = ϑe^{iφ} has a witness on the τ grid."""
    prefix = np.asarray(theta_prefix, dtype=complex)[0::2]
    mask = np.zeros(len(phis), dtype=bool)
    for i, phi in enumerate(phis):
        theta_odd = np.append(prefix, vartheta * np.exp(1j * phi))
        x = _grid_traces(theta_odd, grid, N)[:, 1:]
        mask[i] = (dist_to_int(x) < rho).mean(axis=1).max() > 1 - delta
    return mask


# ---------------------------------------------------------------- cover enumeration

class _ComplexCoverSearch:
    def __init__(self, theta_prefix, vartheta, b1, N, delta, constants, budget, phi_range):
        self.poly = _prefix_poly(theta_prefix)
        self.d = len(theta_prefix) + 2
        self.vartheta, self.b1, self.N = vartheta, b1, N
        self.c = constants
        self.marks_allowed = int(math.floor(delta * N + 1e-9))
        self.budget = budget
        self.phi_range = phi_range
        self.branch_steps = 0
        self.max_candidates = 0
        self._lock = threading.Lock()

    def _marked(self, marks: int, index: int) -> bool:
        return index == 0 or bool(marks >> index & 1)

    def _any_marked(self, marks: int, lo: int, hi: int) -> bool:
        return any(self._marked(marks, i) for i in range(lo, hi + 1))

    def _arc(self, phi_value: complex, slack: float, interval):
        """Angles of ϑe^{iφ} within `slack` of Φ, intersected with interval."""
        r, v = abs(phi_value), self.vartheta
        if abs(r - v) > slack:
            return None
        if r == 0:
            return interval
        cos_beta = (r * r + v * v - slack * slack) / (2 * r * v)
        beta = math.acos(min(1.0, max(-1.0, cos_beta)))
        center = math.atan2(phi_value.imag, phi_value.real)
        lo, hi = max(interval[0], center - beta), min(interval[1], center + beta)
        return (lo, hi) if lo <= hi + 1e-15 else None

    def _window(self, K, n):
        window = K[n:n + self.d + 3].astype(float)
        B3, B4 = _window_B(window, self.poly, self.vartheta, self.b1, refine=False)
        return B4 / B3, _xi(window, self.poly, B3, B4)

    def grow_seed(self, seed: np.ndarray) -> list[tuple]:
        leaves: list[tuple] = []
        S = len(seed) - 1
        n3, n2 = self.c.n3, self.c.n2
        free = [i for i in range(max(1, n3), S + 1) if i <= self.N]
        mark_sets = [0]
        for size in range(1, min(self.marks_allowed, len(free)) + 1):
            mark_sets += [sum(1 << i for i in chosen) for chosen in combinations(free, size)]
        for marks in mark_sets:
            interval = self.phi_range
            for n in range(n2, n3):
                try:
                    phi_value, _ = self._window(seed, n)
                except DegenerateTrace:
                    continue
                interval = self._arc(phi_value, self.c.C2 * self.vartheta ** (-n) * 0.5, interval)
                if interval is None:
                    break
            if interval is not None:
                self._descend(seed, marks, interval, 0, leaves)
        return leaves

    def _descend(self, K, marks, interval, branches, leaves):
        last = len(K) - 1
        n = last - self.d - 2
        try:
            phi_value, xi = self._window(K, n)
        except DegenerateTrace:
            return
        w = 0.5 if self._any_marked(marks, n, last) else self.c.rho
        interval = self._arc(phi_value, self.c.C2 * self.vartheta ** (-n) * w, interval)
        if interval is None:
            return
        if last >= self.N:
            leaves.append((K, phi_value, branches))
            return
        options = [False]
        if bin(marks).count("1") < self.marks_allowed:
            options.append(True)
        for mark_next in options:
            window_marked = mark_next or self._any_marked(marks, n, last)
            radius = self.c.C3 if window_marked else self.c.C3 * self.c.rho
            cands = _integers_within(xi, radius)
            if not cands:
                continue
            self.budget.spend(len(cands))
            if window_marked:
                with self._lock:
                    self.branch_steps += 1
                    self.max_candidates = max(self.max_candidates, len(cands))
            next_marks = marks | (1 << (last + 1)) if mark_next else marks
            for k in cands:
                self._descend(np.append(K, k), next_marks, interval,
                              branches + int(window_marked), leaves)

    def disk(self, K, phi_value, branches) -> CoverDisk:
        radius = self.c.C2 * self.vartheta ** (-(self.N - self.d - 2))
        digest = hashlib.sha1(np.ascontiguousarray(K, dtype=np.int64).tobytes()).hexdigest()[:16]
        return CoverDisk(center=complex(phi_value), radius=float(radius),
                         branch_count=branches, seq_hash=digest)


def complex_seeds(theta_prefix: Sequence[complex], phis: np.ndarray, vartheta: float,
                  grid: np.ndarray, last: int) -> np.ndarray:
    """Distinct K_0..K_last over the angle scan times the τ grid."""
    prefix = np.asarray(theta_prefix, dtype=complex)[0::2]
    n = np.arange(last + 1)
    head = grid[:, :-1] @ (prefix[None, :] ** n[:, None]).T if len(prefix) else 0
    prefixes = []
    for start in range(0, len(phis), SCAN_CHUNK):
        thetas = vartheta * np.exp(1j * phis[start:start + SCAN_CHUNK])
        tail = grid[:, -1][None, :, None] * thetas[:, None, None] ** n[None, None, :]
        K = np.rint(2 * (head + tail).real).astype(np.int64).reshape(-1, last + 1)
        prefixes.append(np.unique(K, axis=0))
    return np.unique(np.vstack(prefixes), axis=0)


def cover_enumerate_complex(theta_prefix: Sequence[complex], vartheta: float, b1: float,
                            b2: float, N: int, delta: float, rho: Optional[float] = None,
                            node_cap: Optional[int] = None, workers: int = 1,
                            constants: Optional[EKConstantsComplex] = None,
                            solver: Optional[SolverFG] = None,
                            phi_range: Optional[tuple[float, float]] = None,
                            angle_step: float = 1e-3,
                            grid: Optional[np.ndarray] = None) -> CoverResult:
    """
    Cover the exceptional θ_{d-1} on the arc ϑ·𝕋⁺ ∩ {Im ≥ b1}.

    Scalar sequences start from the seed prefixes K_0..K_{n₃+d+2}; each step
    predicts K_{n+d+3} by Ξ on the window n..n+d+2 and keeps only the angles
    within C₂ϑ^{-n}·w of Φ. Marks work as in the real cover.

    Raises:
        BudgetExceeded: more than node_cap nodes visited
    """
    if not 0 <= delta < 0.5:
        raise ValueError("delta must lie in [0, 1/2)")
    d = len(theta_prefix) + 2
    if constants is None:
        solver = solver or calibrate_solver(vartheta, b1, d)
        constants = ekc_constants(vartheta, b1, b2, d, solver)
    if rho is not None:
        constants = constants.model_copy(update={"rho": rho})
    last_seed = constants.n3 + d + 2
    if N <= last_seed:
        raise ValueError(f"N={N} must exceed the seed length {last_seed}")
    node_cap = config.NODE_CAP if node_cap is None else node_cap
    grid = tau_grid(d // 2, vartheta) if grid is None else np.atleast_2d(grid)
    phis = angle_scan(vartheta, b1, angle_step, phi_range)

    budget = _NodeBudget(node_cap)
    search = _ComplexCoverSearch(theta_prefix, vartheta, b1, N, delta, constants, budget,
                                 (float(phis[0]), float(phis[-1])))
    seeds = complex_seeds(theta_prefix, phis, vartheta, grid, last_seed)
    budget.spend(len(seeds))
    logger.info(f"complex cover: {len(seeds)} seeds, N={N}, delta={delta}, "
                f"rho={constants.rho:.4g}")

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            grown = list(pool.map(search.grow_seed, seeds))
    else:
        grown = [search.grow_seed(seed) for seed in seeds]

    unique: dict[str, CoverDisk] = {}
    for leaves in grown:
        for K, phi_value, branches in leaves:
            disk = search.disk(K, phi_value, branches)
            unique.setdefault(disk.seq_hash, disk)
    disks = sorted(unique.values(),
                   key=lambda disk: (disk.center.real, disk.center.imag, disk.seq_hash))
    fitted = None
    if delta > 0 and disks:
        fitted = math.log(len(disks)) / (delta * math.log(1 / delta) * N)
    stats = CoverStats(
        seeds=len(seeds),
        nodes=budget.used,
        disks=len(disks),
        branch_steps=search.branch_steps,
        max_candidates=search.max_candidates,
        node_cap=node_cap,
        fitted_C0=fitted,
        bound_value=float(len(seeds) * math.comb(N, search.marks_allowed)
                          * float(constants.M_bound) ** ((d + 4) * search.marks_allowed)),
    )
    logger.info(f"complex cover done: {stats.disks} disks, {stats.nodes} nodes")
    return CoverResult(disks=disks, stats=stats)
