"""
Exponential separation, similarity dimensions, the k-skipping convolution
split and the voxel density experiment.
"""
import math
from typing import Literal, Optional

import numpy as np
from loguru import logger

from app import config
from app.errors import CapExceeded, DimensionMismatch
from app.ifs import atoms, attractor_bbox, chaos_game_sample
from app.schemas import (
    DensityReport,
    DimensionReport,
    ExplicitMatrix,
    HomogeneousIFS,
    SeparationReport,
    SplitReport,
)

COLLISION_TOL = 1e-12
KEY_DECIMALS = 9

Method = Literal["auto", "brute", "mitm"]


# ---------------------------------------------------------------- exponential separation

def _difference_set(ifs: HomogeneousIFS) -> tuple[np.ndarray, list[tuple[int, int]], int]:
    """Sorted distinct a_i - a_j, one (i, j) per difference, and the index of 0."""
    D = ifs.D
    seen: dict[tuple, tuple[np.ndarray, tuple[int, int]]] = {}
    for i in range(len(D)):
        for j in range(len(D)):
            diff = D[i] - D[j]
            seen.setdefault(tuple(np.round(diff, 12)), (diff, (i, j)))
    keys = sorted(seen)
    diffs = np.array([seen[k][0] for k in keys])
    pairs = [seen[k][1] for k in keys]
    zero = keys.index(tuple(np.zeros(ifs.dim)))
    return diffs, pairs, zero


def _word_sums(layers: list[np.ndarray]) -> np.ndarray:
    """Σ_n layers[n][b_n] over all words, first layer most significant."""
    d = layers[0].shape[1] if layers else 1
    sums = np.zeros((1, d))
    for layer in layers:
        sums = (sums[:, None, :] + layer[None, :, :]).reshape(-1, d)
    return sums


def _decode(index: int, base: int, length: int) -> list[int]:
    digits = []
    for _ in range(length):
        index, r = divmod(index, base)
        digits.append(r)
    return digits[::-1]


def _layers(ifs: HomogeneousIFS, diffs: np.ndarray, N: int) -> list[np.ndarray]:
    layers, layer = [], diffs
    for _ in range(N + 1):
        layers.append(layer)
        layer = layer @ ifs.A.T
    return layers


def _brute(layers, zero, base) -> tuple[float, list[int]]:
    sums = _word_sums(layers)
    norms = np.linalg.norm(sums, axis=1)
    all_zero = sum(zero * base ** k for k in range(len(layers)))
    norms[all_zero] = np.inf
    best = int(np.argmin(norms))
    return float(norms[best]), _decode(best, base, len(layers))


def _meet_in_the_middle(layers, zero, base) -> tuple[float, list[int]]:
    half = len(layers) // 2
    low = _word_sums(layers[:half])[:, 0]
    high = _word_sums(layers[half:])[:, 0]
    low_zero = sum(zero * base ** k for k in range(half))
    high_zero = sum(zero * base ** k for k in range(len(layers) - half))

    order = np.argsort(high, kind="stable")
    sorted_high = high[order]
    positions = np.searchsorted(sorted_high, -low)
    best, best_pair = np.inf, (0, 0)
    for offset in (-2, -1, 0, 1):
        idx = positions + offset
        valid = (idx >= 0) & (idx < len(sorted_high))
        idx = np.clip(idx, 0, len(sorted_high) - 1)
        values = np.abs(low + sorted_high[idx])
        excluded = (np.arange(len(low)) == low_zero) & (order[idx] == high_zero)
        values = np.where(valid & ~excluded, values, np.inf)
        i = int(np.argmin(values))
        if values[i] < best:
            best, best_pair = float(values[i]), (i, int(order[idx[i]]))
    word = _decode(best_pair[0], base, half) + _decode(best_pair[1], base, len(layers) - half)
    return best, word


def es_check(ifs: HomogeneousIFS, N: int, method: Method = "auto",
             cap: Optional[int] = None) -> SeparationReport:
    """
    min ‖Σ_{n=0}^N Aⁿb_n‖ over nonzero words b in (𝒟 - 𝒟)^{N+1}.

    method="mitm" (d = 1 only) splits the word in halves and scans sorted
    partial sums; "auto" uses it in dimension 1.

    Raises:
        CapExceeded: too many words to enumerate
    """
    if N < 0:
        raise ValueError("N must be non-negative")
    cap = config.ATOM_CAP if cap is None else cap
    diffs, pairs, zero = _difference_set(ifs)
    base = len(diffs)
    if method == "auto":
        method = "mitm" if ifs.dim == 1 else "brute"
    if method == "mitm" and ifs.dim != 1:
        raise DimensionMismatch("meet-in-the-middle needs d = 1")
    size = base ** (N + 1) if method == "brute" else base ** (N + 1 - (N + 1) // 2)
    if size > cap:
        raise CapExceeded(f"{size} difference words exceed the cap {cap}")

    layers = _layers(ifs, diffs, N)
    if method == "brute":
        distance, word = _brute(layers, zero, base)
    else:
        distance, word = _meet_in_the_middle(layers, zero, base)

    difference = diffs[word]
    first = next(v for v in difference if np.any(np.abs(v) > COLLISION_TOL))
    lead = first[np.flatnonzero(np.abs(first) > COLLISION_TOL)[0]]
    flip = lead > 0
    if flip:
        difference = -difference
    collision = None
    if distance <= COLLISION_TOL:
        left = [pairs[b][1 if flip else 0] for b in word]
        right = [pairs[b][0 if flip else 1] for b in word]
        collision = (left, right)
    epsilon_star = distance ** (1 / N) if N else distance
    logger.debug(f"es_check N={N} method={method} min={distance:.3e}")
    return SeparationReport(N=N, min_distance=distance, epsilon_star=epsilon_star,
                            colliding_pair=collision, difference=difference.tolist())


def separation_sweep(ifs: HomogeneousIFS, N_max: int, method: Method = "auto") -> list[SeparationReport]:
    """es_check for N = 0..N_max; stops early on a cap."""
    reports = []
    for N in range(N_max + 1):
        try:
            reports.append(es_check(ifs, N, method))
        except CapExceeded as error:
            logger.warning(f"separation sweep stopped at N={N}: {error}")
            break
    return reports


# ---------------------------------------------------------------- dimensions

def sim_dimensions(ifs: HomogeneousIFS, q: float = 2.0) -> DimensionReport:
    if q <= 1:
        raise ValueError("q must exceed 1")
    log_theta = math.log(ifs.theta)
    value = -math.log(float(np.sum(ifs.p ** q))) / ((q - 1) * log_theta)
    return DimensionReport(q=q, sim_dim_q=value, supercritical=value > ifs.dim,
                           attractor_sim_dim=math.log(ifs.m + 1) / log_theta)


# ---------------------------------------------------------------- convolution split

def convolution_split(ifs: HomogeneousIFS, k: int,
                      cap: Optional[int] = None) -> tuple[HomogeneousIFS, HomogeneousIFS]:
    """
    μ = μ_k ∗ μ̃_k: μ_k keeps every k-th term of the series, μ̃_k the rest.

    Both factors have linear part A^k. The digits of μ̃_k are the sums
    Σ_{n=1}^{k-1} Aⁿb_n with product weights; coinciding sums are merged.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    cap = config.ATOM_CAP if cap is None else cap
    count = (ifs.m + 1) ** (k - 1)
    if count > cap:
        raise CapExceeded(f"{count} digit sums exceed the cap {cap}")
    rotation = ExplicitMatrix(matrix=np.linalg.matrix_power(ifs.O, k).tolist())
    ifs_k = HomogeneousIFS(dim=ifs.dim, theta=ifs.theta ** k, rotation=rotation,
                           digits=ifs.digits, probs=ifs.probs)

    A, D, p = ifs.A, ifs.D, ifs.p
    sums = np.zeros((1, ifs.dim))
    weights = np.ones(1)
    layer = D @ A.T
    for _ in range(k - 1):
        sums = (sums[:, None, :] + layer[None, :, :]).reshape(-1, ifs.dim)
        weights = (weights[:, None] * p[None, :]).ravel()
        layer = layer @ A.T
    merged: dict[tuple, list] = {}
    for point, weight in zip(sums, weights):
        key = tuple(np.round(point, KEY_DECIMALS) + 0.0)
        if key in merged:
            merged[key][1] += weight
        else:
            merged[key] = [point, weight]
    ifs_tilde = HomogeneousIFS(
        dim=ifs.dim, theta=ifs.theta ** k, rotation=rotation,
        digits=[v[0].tolist() for v in merged.values()],
        probs=[float(v[1]) for v in merged.values()],
    )
    return ifs_k, ifs_tilde


def split_report(ifs: HomogeneousIFS, k: int, q: float = 2.0) -> SplitReport:
    ifs_k, ifs_tilde = convolution_split(ifs, k)
    return SplitReport(ifs_k=ifs_k, ifs_tilde_k=ifs_tilde,
                       dims_k=sim_dimensions(ifs_k, q), dims_tilde_k=sim_dimensions(ifs_tilde, q))


def _weighted_multiset(points: np.ndarray, weights: np.ndarray) -> dict[tuple, float]:
    out: dict[tuple, float] = {}
    for point, weight in zip(np.round(points, KEY_DECIMALS) + 0.0, weights):
        key = tuple(point)
        out[key] = out.get(key, 0.0) + weight
    return out


def verify_split(ifs: HomogeneousIFS, k: int, N: int = 1) -> float:
    """Largest weight discrepancy between atoms(μ, k(N+1)-1) and the atom convolution of the factors."""
    ifs_k, ifs_tilde = convolution_split(ifs, k)
    full = atoms(ifs, k * (N + 1) - 1)
    left, right = atoms(ifs_k, N), atoms(ifs_tilde, N)
    points = (left.points[:, None, :] + right.points[None, :, :]).reshape(-1, ifs.dim)
    weights = (left.weights[:, None] * right.weights[None, :]).ravel()
    a = _weighted_multiset(full.points, full.weights)
    b = _weighted_multiset(points, weights)
    return max(abs(a.get(key, 0.0) - b.get(key, 0.0)) for key in set(a) | set(b))


# ---------------------------------------------------------------- density experiment

def _l2_statistic(counts: np.ndarray, samples: int) -> float:
    # unbiased Σ p_i² times the cell count
    counts = counts.astype(float)
    return float(np.sum(counts * (counts - 1)) * counts.size / (samples * (samples - 1)))


def density_experiment(ifs: HomogeneousIFS, resolution: int, samples: int, seed: int,
                       workers: int = 1, ratio_threshold: float = 1.15) -> DensityReport:
    """
    Voxel histogram of chaos-game samples over the attractor's bounding box.

    The L² statistic at resolution r and r/2 settles for a bounded density
    and grows with r for a singular measure; the report only labels the
    trend and does not decide absolute continuity.
    """
    if ifs.dim > 4:
        raise DimensionMismatch("voxel grids are limited to d <= 4")
    if resolution < 2 or resolution & (resolution - 1):
        raise ValueError("resolution must be a power of 2")
    lo, hi = attractor_bbox(ifs)
    hi = np.where(hi - lo > 0, hi, lo + 1e-12)
    points = chaos_game_sample(ifs, samples, seed, workers=workers)
    ranges = list(zip(lo, hi))
    fine, _ = np.histogramdd(points, bins=[resolution] * ifs.dim, range=ranges)
    coarse, _ = np.histogramdd(points, bins=[resolution // 2] * ifs.dim, range=ranges)
    l2_fine = _l2_statistic(fine, samples)
    l2_coarse = _l2_statistic(coarse, samples)
    ratio = l2_fine / l2_coarse if l2_coarse > 0 else float("inf")
    report = DensityReport(
        resolution=resolution,
        samples=samples,
        occupied_fraction=float(np.count_nonzero(fine) / fine.size),
        occupied_fraction_coarse=float(np.count_nonzero(coarse) / coarse.size),
        l2_fine=l2_fine,
        l2_coarse=l2_coarse,
        l2_ratio=ratio,
        trend="bounded" if ratio <= ratio_threshold else "singular",
    )
    logger.info(f"density r={resolution}: occupied={report.occupied_fraction:.4f} "
                f"ratio={ratio:.3f} ({report.trend})")
    return report
