"""
Homogeneous self-similar IFS: validation, normal forms, atoms and sampling.
"""
from concurrent.futures import ThreadPoolExecutor
from itertools import combinations

import numpy as np
from loguru import logger

from app import config
from app.errors import CapExceeded, DimensionMismatch, IllConditioned, RealEigenvalue
from app.schemas import (
    AtomCloud,
    BlockAngles,
    HomogeneousIFS,
    ValidationReport,
    rotation_matrix,
)

SAMPLE_CHUNK = 1 << 16


def _check_shapes(ifs: HomogeneousIFS) -> None:
    d = ifs.dim
    if any(len(a) != d for a in ifs.digits):
        raise DimensionMismatch(f"every digit must have {d} coordinates")
    if len(ifs.probs) != len(ifs.digits):
        raise DimensionMismatch(
            f"{len(ifs.probs)} probabilities for {len(ifs.digits)} digits")
    if isinstance(ifs.rotation, BlockAngles):
        if 2 * len(ifs.rotation.angles) != d:
            raise DimensionMismatch(
                f"{len(ifs.rotation.angles)} block angles need dim {2 * len(ifs.rotation.angles)}, got {d}")
    elif np.shape(ifs.rotation.matrix) != (d, d):
        raise DimensionMismatch(f"rotation matrix must be {d}x{d}")
    if ifs.shift is not None and len(ifs.shift) != d:
        raise DimensionMismatch("shift has the wrong length")


def _rank(M: np.ndarray) -> int:
    if M.size == 0:
        return 0
    return int(np.linalg.matrix_rank(M, tol=config.RANK_TOL))


def validate(ifs: HomogeneousIFS, distinct_angles: bool = False) -> ValidationReport:
    """
    Check the invariants of a homogeneous IFS.

    Spanning and cyclicity are computed on the differences a_j - a_0, so the
    verdicts do not depend on where the attractor sits.

    Raises:
        DimensionMismatch: digits, probabilities or rotation disagree with dim
    """
    _check_shapes(ifs)
    d = ifs.dim
    failures = []

    if ifs.m < 1:
        failures.append("digit_count")

    diffs = (ifs.D[1:] - ifs.D[0]).T  # columns a_j - a_0
    spanning = _rank(diffs) == d
    if not spanning:
        failures.append("spanning")

    A = ifs.A
    krylov = [diffs]
    for _ in range(d - 1):
        krylov.append(A @ krylov[-1])
    cyclic = _rank(np.hstack(krylov)) == d
    if not cyclic:
        failures.append("cyclic")

    O = ifs.O
    residual = float(np.abs(O.T @ O - np.eye(d)).max())
    if residual > config.ORTHO_TOL:
        failures.append("orthogonality")

    if isinstance(ifs.rotation, BlockAngles):
        angles = ifs.rotation.angles
        if not all(0.0 < a < 0.5 for a in angles):
            failures.append("angle_range")
        if distinct_angles and len(set(angles)) != len(angles):
            failures.append("angle_distinct")

    p = ifs.p
    probs_ok = bool(np.all(p > 0) and abs(p.sum() - 1.0) <= config.PROB_TOL)
    if not probs_ok:
        failures.append("probabilities")

    digits_distinct = len(np.unique(ifs.D, axis=0)) == len(ifs.digits)
    if not digits_distinct:
        failures.append("digits_distinct")

    contractive = ifs.theta > 1
    if not contractive:
        failures.append("contraction")

    return ValidationReport(
        spanning=spanning,
        cyclic=cyclic,
        orthogonality_residual=residual,
        probs_ok=probs_ok,
        digits_distinct=digits_distinct,
        contractive=contractive,
        failures=failures,
    )


def normalize_translation(ifs: HomogeneousIFS) -> HomogeneousIFS:
    """
    Conjugate by a translation so that a_0 = 0.

    With c = (I - A)^{-1} a_0 the new digits are a_j - a_0 and the original
    measure is the new one translated by c; the accumulated translation is
    kept in `shift`.
    """
    D = ifs.D
    if not np.any(D[0]):
        return ifs
    c = np.linalg.solve(np.eye(ifs.dim) - ifs.A, D[0])
    shift = c if ifs.shift is None else np.asarray(ifs.shift) + c
    return ifs.model_copy(update={
        "digits": (D - D[0]).tolist(),
        "shift": shift.tolist(),
    })


def diagonal_basis(ifs: HomogeneousIFS) -> tuple[np.ndarray, list[float], float]:
    """
    Orthogonal Q with Qᵀ𝒪Q block diagonal, the block angles, and the residual.

    Raises:
        RealEigenvalue: odd dimension, real or repeated eigenvalues
    """
    d = ifs.dim
    if d % 2:
        raise RealEigenvalue(f"dimension {d} is odd")
    O = ifs.O
    w, V = np.linalg.eig(O)
    if np.any(np.abs(w.imag) <= config.EIGEN_TOL):
        raise RealEigenvalue("rotation has a real eigenvalue")
    for i, j in combinations(range(d), 2):
        if abs(w[i] - w[j]) <= config.EIGEN_TOL:
            raise RealEigenvalue("rotation has a repeated eigenvalue")

    # eigenvalue e^{-2πiα} with α in (0, 1/2) has negative imaginary part
    lower = [i for i in range(d) if w[i].imag < 0]
    alphas = {i: float(-np.angle(w[i]) / (2 * np.pi)) for i in lower}
    lower.sort(key=alphas.get)

    columns = []
    for i in lower:
        v = V[:, i] / np.linalg.norm(V[:, i])
        columns.append(np.sqrt(2) * v.real)
        columns.append(-np.sqrt(2) * v.imag)
    Q = np.column_stack(columns)
    angles = [alphas[i] for i in lower]
    blocks = rotation_matrix(BlockAngles(angles=angles), d)
    residual = max(float(np.abs(Q.T @ O @ Q - blocks).max()),
                   float(np.abs(Q.T @ Q - np.eye(d)).max()))
    return Q, angles, residual


def complex_diagonal_form(ifs: HomogeneousIFS) -> HomogeneousIFS:
    """Linearly conjugate the IFS so that its rotation is given by block angles."""
    if isinstance(ifs.rotation, BlockAngles):
        return ifs
    Q, angles, residual = diagonal_basis(ifs)
    logger.debug(f"diagonal form angles={angles} eigen-residual={residual:.3e}")
    if residual > config.EIGEN_TOL:
        raise IllConditioned(f"eigen-residual {residual:.3e} above {config.EIGEN_TOL}")
    update = {
        "rotation": BlockAngles(angles=angles),
        "digits": (ifs.D @ Q).tolist(),
    }
    if ifs.shift is not None:
        update["shift"] = (np.asarray(ifs.shift) @ Q).tolist()
    return ifs.model_copy(update=update)


def rescale_digits(ifs: HomogeneousIFS) -> HomogeneousIFS:
    """
    Scale every complex coordinate so that some digit has coordinate 2.

    Complex scalings commute with the block rotation, so this is a linear
    conjugacy of the IFS.
    """
    if not isinstance(ifs.rotation, BlockAngles):
        raise RealEigenvalue("rescaling needs the block-angle form")
    D = ifs.D.copy()
    Z = D[:, 0::2] + 1j * D[:, 1::2]
    scale = np.ones(Z.shape[1], dtype=complex)
    for ell in range(Z.shape[1]):
        nonzero = np.flatnonzero(np.abs(Z[:, ell]) > config.RANK_TOL)
        if len(nonzero):
            scale[ell] = 2.0 / Z[nonzero[0], ell]
    Z = Z * scale
    D[:, 0::2], D[:, 1::2] = Z.real, Z.imag
    update = {"digits": D.tolist()}
    if ifs.shift is not None:
        s = np.asarray(ifs.shift)
        zs = (s[0::2] + 1j * s[1::2]) * scale
        s = s.copy()
        s[0::2], s[1::2] = zs.real, zs.imag
        update["shift"] = s.tolist()
    return ifs.model_copy(update=update)


def bounding_radius(ifs: HomogeneousIFS) -> float:
    """Radius of a ball about the origin containing the attractor."""
    return float(np.linalg.norm(ifs.D, axis=1).max() * ifs.theta / (ifs.theta - 1))


def exact_mean(ifs: HomogeneousIFS) -> np.ndarray:
    return np.linalg.solve(np.eye(ifs.dim) - ifs.A, ifs.p @ ifs.D)


def attractor_bbox(ifs: HomogeneousIFS, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate bounding box of the attractor from its support-function series."""
    A, D = ifs.A, ifs.D
    lo, hi = np.zeros(ifs.dim), np.zeros(ifs.dim)
    layer = D.copy()
    scale = float(np.linalg.norm(D, axis=1).max())
    n = 0
    while scale * ifs.theta ** (-n) * ifs.theta / (ifs.theta - 1) > tol:
        lo += layer.min(axis=0)
        hi += layer.max(axis=0)
        layer = layer @ A.T
        n += 1
    tail = scale * ifs.theta ** (-n) * ifs.theta / (ifs.theta - 1)
    return lo - tail, hi + tail


def atoms(ifs: HomogeneousIFS, N: int, cap: int | None = None) -> AtomCloud:
    """
    Atoms of the truncated convolution Σ_{n=0}^N Aⁿb_n with product weights.

    Points are listed in digit-index lexicographic order with b_0 most
    significant.
    """
    cap = config.ATOM_CAP if cap is None else cap
    count = (ifs.m + 1) ** (N + 1)
    if count > cap:
        raise CapExceeded(f"{count} atoms exceed the cap {cap}")

    A, D, p = ifs.A, ifs.D, ifs.p
    points = np.zeros((1, ifs.dim))
    weights = np.ones(1)
    layer = D
    for _ in range(N + 1):
        points = (points[:, None, :] + layer[None, :, :]).reshape(-1, ifs.dim)
        weights = (weights[:, None] * p[None, :]).ravel()
        layer = layer @ A.T
    return AtomCloud(points=points, weights=weights, level=N)


def _sample_chunk(ifs: HomogeneousIFS, seed_seq: np.random.SeedSequence,
                  size: int, burn_in: int) -> np.ndarray:
    rng = np.random.default_rng(seed_seq)
    A, D = ifs.A, ifs.D
    choices = rng.choice(len(D), size=(burn_in, size), p=ifs.p)
    x = np.zeros((size, ifs.dim))
    for step in range(burn_in):
        x = x @ A.T + D[choices[step]]
    return x


def chaos_game_sample(ifs: HomogeneousIFS, count: int, seed: int,
                      burn_in: int | None = None, workers: int = 1) -> np.ndarray:
    """
    Sample the self-similar measure by random iteration.

    Each sample is an independent chain of `burn_in` random maps started at
    the origin. Chunks draw from children of one SeedSequence, so the output
    depends on the seed only, not on the number of workers.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    burn_in = config.BURN_IN if burn_in is None else burn_in
    sizes = [min(SAMPLE_CHUNK, count - start) for start in range(0, count, SAMPLE_CHUNK)]
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = list(zip(children, sizes))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: _sample_chunk(ifs, job[0], job[1], burn_in), jobs))
    else:
        parts = [_sample_chunk(ifs, s, n, burn_in) for s, n in jobs]
    return np.vstack(parts)
