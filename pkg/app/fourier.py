"""
Fourier transform of a homogeneous self-similar measure.

μ̂(ξ) = Π_{n≥0} Σ_j p_j exp(-2πi⟨ξ, Aⁿa_j⟩), evaluated by truncating the
product where an explicit geometric tail bound drops below the tolerance.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Literal, Optional, Sequence

import numpy as np
from loguru import logger

from app import config
from app.errors import DegenerateFit, FrequencyTooSmall, NonContractive
from app.schemas import BlockAngles, DecayFit, HomogeneousIFS, TruncatedTransform

Norm = Literal["max", "complex"]


def dist_to_int(x):
    """‖x‖_{R/Z}, with ties rounded half to even."""
    return np.abs(x - np.rint(x))


def _factor(p: np.ndarray, dots: np.ndarray) -> np.ndarray:
    # cos / sin of the reduced phase keep μ̂(-ξ) = conj μ̂(ξ) exact
    angle = 2 * np.pi * (dots - np.rint(dots))
    return (np.cos(angle) @ p) - 1j * (np.sin(angle) @ p)


def _digit_scale(ifs: HomogeneousIFS) -> float:
    return float(np.linalg.norm(ifs.D, axis=1).max())


def tail_bound(ifs: HomogeneousIFS, xi_norm: float, depth: int) -> float:
    """Bound on the error of truncating the product after n = depth."""
    t = ifs.theta
    return 2 * np.pi * xi_norm * _digit_scale(ifs) * t ** (-depth - 1) * t / (t - 1)


def truncation_depth(ifs: HomogeneousIFS, xi_norm: float, tol: float) -> int:
    depth = 0
    while tail_bound(ifs, xi_norm, depth) > tol:
        depth += 1
    return depth


def transform_many(ifs: HomogeneousIFS, xis: np.ndarray, depth: int) -> np.ndarray:
    """Truncated product at each row of xis, n = 0..depth."""
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    A, p = ifs.A, ifs.p
    layer = ifs.D
    out = np.ones(len(xis), dtype=complex)
    for _ in range(depth + 1):
        out *= _factor(p, xis @ layer.T)
        layer = layer @ A.T
    return out


def mu_hat(ifs: HomogeneousIFS, xi: Sequence[float], tol: float = 1e-10) -> TruncatedTransform:
    """
    Evaluate μ̂(ξ) with |value - μ̂(ξ)| ≤ tail_bound.

    Raises:
        NonContractive: ϑ ≤ 1
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if ifs.theta <= 1:
        raise NonContractive(f"theta={ifs.theta} does not contract")
    xi = np.asarray(xi, dtype=float).reshape(ifs.dim)
    if not np.any(xi):
        return TruncatedTransform(value=1.0 + 0.0j, truncation_depth=0, tail_bound=0.0)
    xi_norm = float(np.linalg.norm(xi))
    depth = truncation_depth(ifs, xi_norm, tol)
    value = transform_many(ifs, xi[None, :], depth)[0]
    return TruncatedTransform(value=complex(value), truncation_depth=depth,
                              tail_bound=tail_bound(ifs, xi_norm, depth))


def frequency_norm(v: np.ndarray, norm: Norm = "max") -> float:
    """‖v‖∞, or the largest modulus of its ℝ² blocks for norm="complex"."""
    if norm == "complex":
        return float(np.hypot(v[0::2], v[1::2]).max())
    return float(np.abs(v).max())


def renormalize_frequency(ifs: HomogeneousIFS, xi: Sequence[float],
                          norm: Norm = "max") -> tuple[np.ndarray, int]:
    """
    η = (Aᵗ)^N ξ with N maximal such that ‖η‖ ≥ 1.

    Raises:
        FrequencyTooSmall: ‖ξ‖ < 1
    """
    xi = np.asarray(xi, dtype=float).reshape(ifs.dim)
    if frequency_norm(xi, norm) < 1:
        raise FrequencyTooSmall(f"frequency norm below 1: {xi.tolist()}")
    # ‖(Aᵗ)ⁿξ‖ ≤ ϑ^{-n}‖ξ‖₂, so no larger n can qualify
    horizon = int(np.floor(np.log(np.linalg.norm(xi)) / np.log(ifs.theta))) + 1
    At = ifs.A.T
    eta, N = xi, 0
    current = xi
    for n in range(1, horizon + 1):
        current = At @ current
        if frequency_norm(current, norm) >= 1:
            eta, N = current, n
    return eta, N


def psi_bound(ifs: HomogeneousIFS, xi: Sequence[float], norm: Norm = "max",
              digits_subset: Optional[Sequence[int]] = None) -> float:
    """
    Ψ(A, 𝒟, ε, ξ) = Π_{n=1}^{N(ξ)} (1 - 2πε max_j ‖⟨η, A^{-n}a_j⟩‖²).

    Phases are taken relative to a_0. With digits_subset the maximum runs over
    that sub-family only, which still bounds |μ̂(ξ)|.
    """
    eta, N = renormalize_frequency(ifs, xi, norm)
    eps = ifs.eps
    D = ifs.D
    chosen = range(1, len(D)) if digits_subset is None else [j for j in digits_subset if j != 0]
    layer = D[list(chosen)] - D[0]
    O = ifs.O
    value = 1.0
    for _ in range(N):
        layer = ifs.theta * (layer @ O)  # rows ϑⁿ(𝒪ᵗ)ⁿ(a_j - a_0)
        worst = float((dist_to_int(layer @ eta) ** 2).max()) if len(layer) else 0.0
        value *= 1 - 2 * np.pi * eps * worst
    return value


def one_step_factor_identity_check(ifs: HomogeneousIFS, xi: Sequence[float], N: int) -> float:
    """Residual of Π_{n≤N} f_n(ξ) = f_0(ξ)·Π_{n<N} f_n(Aᵗξ)."""
    xi = np.asarray(xi, dtype=float).reshape(ifs.dim)
    if N == 0:
        return 0.0
    left = transform_many(ifs, xi[None, :], N)[0]
    first = _factor(ifs.p, (ifs.D @ xi)[None, :])[0]
    right = first * transform_many(ifs, (ifs.A.T @ xi)[None, :], N - 1)[0]
    return float(abs(left - right))


def lemma_elem_check(p: Sequence[float], alphas: Sequence[float], k: int) -> bool:
    """|Σ p_j e^{-2πiα_j}| ≤ 1 - 2πε‖α_k‖² for a probability vector p and α_0 = 0."""
    p = np.asarray(p, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    if alphas[0] != 0:
        raise ValueError("alpha_0 must be 0")
    if not 0 <= k < len(p):
        raise ValueError(f"index {k} out of range")
    lhs = abs(np.sum(p * np.exp(-2j * np.pi * alphas)))
    return bool(lhs <= 1 - 2 * np.pi * p.min() * dist_to_int(alphas[k]) ** 2 + 1e-12)


def _shell_directions(rng: np.random.Generator, d: int, count: int,
                      cone_block: Optional[int]) -> tuple[np.ndarray, np.ndarray]:
    axes = np.vstack([np.eye(d), -np.eye(d)])
    random_dirs = rng.standard_normal((max(count - len(axes), 0), d))
    random_dirs /= np.linalg.norm(random_dirs, axis=1, keepdims=True)
    offsets = np.concatenate([np.zeros(len(axes)), rng.random(len(random_dirs))])
    dirs = np.vstack([axes, random_dirs])
    if cone_block is not None:
        moduli = np.hypot(dirs[:, 0::2], dirs[:, 1::2])
        keep = moduli[:, cone_block] >= moduli.max(axis=1) - 1e-15
        dirs, offsets = dirs[keep], offsets[keep]
    return dirs, offsets


def decay_fit(ifs: HomogeneousIFS, shell_count: int,
              directions_per_shell: Optional[int] = None, seed: int = 0,
              tol: float = 1e-10, k0: int = 1, cone_block: Optional[int] = None,
              workers: int = 1) -> DecayFit:
    """
    Fit |μ̂| ~ |ξ|^{-γ} from sup|μ̂| over the shells ϑ^k ≤ |ξ| < ϑ^{k+1}.

    Each shell samples ξ = ϑ^{k+t}u: axis directions at t = 0 (the exact
    radius) plus seeded uniform directions with uniform t. cone_block keeps
    only directions whose ℓ-th complex coordinate has the largest modulus.

    Raises:
        NonContractive: ϑ ≤ 1
        DegenerateFit: every shell sup is below tol (gamma = +inf)
    """
    if ifs.theta <= 1:
        raise NonContractive(f"theta={ifs.theta} does not contract")
    if shell_count < 3:
        raise ValueError("need at least 3 shells")
    if cone_block is not None and not isinstance(ifs.rotation, BlockAngles):
        raise ValueError("direction cone needs the block-angle form")
    count = config.DIRECTIONS_PER_SHELL if directions_per_shell is None else directions_per_shell
    rng = np.random.default_rng(seed)
    plans = []
    for k in range(k0, k0 + shell_count):
        dirs, offsets = _shell_directions(rng, ifs.dim, count, cone_block)
        plans.append((k, dirs, offsets))

    def evaluate(plan):
        k, dirs, offsets = plan
        radii = ifs.theta ** (k + offsets)
        depth = truncation_depth(ifs, ifs.theta ** (k + 1), tol)
        values = np.abs(transform_many(ifs, radii[:, None] * dirs, depth))
        best = int(np.argmax(values))
        logger.debug(f"shell k={k} sup={values[best]:.3e}")
        return float(ifs.theta ** k), float(values[best]), dirs[best].tolist()

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(evaluate, plans))
    else:
        rows = [evaluate(plan) for plan in plans]

    radii = np.array([r for r, _, _ in rows])
    sups = np.array([s for _, s, _ in rows])
    usable = sups > tol
    if usable.sum() < 2:
        error = DegenerateFit("every shell sup is below tol")
        error.gamma = float("inf")
        raise error

    x, y = np.log(radii[usable]), np.log(sups[usable])
    slope, intercept = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1 - ss_res / ss_tot)
    fit = DecayFit(
        gamma=float(-slope),
        intercept=float(intercept),
        r2=r2,
        shells=[(r, s) for r, s, _ in rows],
        argmax_directions=[u for _, _, u in rows],
    )
    logger.info(f"decay fit over {shell_count} shells: gamma={fit.gamma:.4f} r2={fit.r2:.4f}")
    return fit
