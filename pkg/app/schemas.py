from typing import Annotated, Literal, NamedTuple, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class FrozenModel(BaseModel):
    model_config = ConfigDict(frozen=True)


class ArrayModel(BaseModel):
    """Immutable container holding numpy arrays (not JSON-serialisable as is)."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


# ---------------------------------------------------------------- ifs-core

class ExplicitMatrix(FrozenModel):
    kind: Literal["matrix"] = "matrix"
    matrix: list[list[float]]


class BlockAngles(FrozenModel):
    """
    Rotation Diag[e^{-2πiα_1}, ..., e^{-2πiα_s}] acting on ℝ^{2s}.

    Each angle acts on its own ℝ² block as multiplication by e^{-2πiα}.
    """
    kind: Literal["angles"] = "angles"
    angles: list[float]


RotationSpec = Annotated[Union[ExplicitMatrix, BlockAngles],
                         Field(discriminator="kind")]


def rotation_matrix(rotation: ExplicitMatrix | BlockAngles, dim: int) -> np.ndarray:
    if isinstance(rotation, ExplicitMatrix):
        return np.asarray(rotation.matrix, dtype=float).reshape(len(rotation.matrix), -1)
    out = np.zeros((dim, dim))
    for j, alpha in enumerate(rotation.angles):
        c, s = np.cos(2 * np.pi * alpha), np.sin(2 * np.pi * alpha)
        out[2 * j:2 * j + 2, 2 * j:2 * j + 2] = [[c, s], [-s, c]]
    return out


class HomogeneousIFS(FrozenModel):
    """
    Homogeneous self-similar IFS f_j(x) = ϑ⁻¹𝒪x + a_j with weights p_j.

    Construction only parses shapes; invariants are checked by
    app.ifs.validate so that invalid definitions can still be loaded.
    """
    dim: int = Field(gt=0)
    theta: float  # expansion factor ϑ, contraction λ = 1/ϑ
    rotation: RotationSpec
    digits: list[list[float]]
    probs: list[float]
    # translation c with μ_original = μ_normalized + c
    shift: Optional[list[float]] = None

    @property
    def lam(self) -> float:
        return 1.0 / self.theta

    @property
    def m(self) -> int:
        return len(self.digits) - 1

    @property
    def eps(self) -> float:
        return min(self.probs)

    @property
    def O(self) -> np.ndarray:
        return rotation_matrix(self.rotation, self.dim)

    @property
    def A(self) -> np.ndarray:
        return self.O / self.theta

    @property
    def D(self) -> np.ndarray:
        return np.asarray(self.digits, dtype=float).reshape(len(self.digits), -1)

    @property
    def p(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


class ValidationReport(FrozenModel):
    spanning: bool
    cyclic: bool
    orthogonality_residual: float
    probs_ok: bool
    digits_distinct: bool
    contractive: bool
    failures: list[str] = []

    @property
    def ok(self) -> bool:
        return not self.failures


class AtomCloud(ArrayModel):
    points: np.ndarray  # shape ((m+1)^(N+1), d)
    weights: np.ndarray
    level: int


# ---------------------------------------------------------------- fourier-eval

class TruncatedTransform(FrozenModel):
    value: complex
    truncation_depth: int
    tail_bound: float


class DecayFit(FrozenModel):
    gamma: float
    intercept: float
    r2: float
    shells: list[tuple[float, float]]  # (radius, sup |μ̂|)
    argmax_directions: list[list[float]] = []


# ---------------------------------------------------------------- ek-real / ek-complex

class EKTraceReal(ArrayModel):
    K: np.ndarray      # (N+1, d) integers
    eps: np.ndarray    # (N+1, d) in [-1/2, 1/2]
    L: np.ndarray      # (N+1, d)
    theta: float
    eta: np.ndarray
    O: np.ndarray
    T_D: np.ndarray
    T_D_inv: np.ndarray
    condition: float


class EKConstantsReal(FrozenModel):
    C1: float
    C2: float
    n1: int
    rho: float
    M_bound: int
    B1: float
    B2: float
    mode: Literal["analytic", "empirical"] = "analytic"


class Ambiguous(FrozenModel):
    """Prediction that does not pin down a unique integer continuation."""
    prediction: list[float]
    candidates: list[list[int]]


class CoverDisk(FrozenModel):
    center: complex | float
    radius: float = Field(gt=0)
    branch_count: int = 0
    seq_hash: str = ""


class CoverStats(FrozenModel):
    seeds: int
    nodes: int
    disks: int
    branch_steps: int
    max_candidates: int
    node_cap: int
    fitted_C0: Optional[float] = None
    bound_value: Optional[float] = None


class CoverResult(FrozenModel):
    disks: list[CoverDisk]
    stats: CoverStats


class WitnessReport(FrozenModel):
    verdict: Literal["member", "non-witness"]
    best_fraction: float
    best_witness: list[float]  # η, or (re, im) pairs of τ_{2j-1} in the complex case
    threshold: float
    N: int
    grid_size: int


class SpectrumH(FrozenModel):
    theta_list: list[complex]
    vartheta: float
    b1: float
    b2: float


class EKTraceComplex(ArrayModel):
    tau: np.ndarray
    theta_list: np.ndarray
    K: np.ndarray
    eps: np.ndarray
    A_table: list[np.ndarray]  # A_table[j][n] = A_n^{(j)}
    B: np.ndarray              # B[i] = B_{i+3}


class DifferenceTable(ArrayModel):
    A_table: list[np.ndarray]
    A_tilde: list[np.ndarray]
    closed_form_residual: float
    tilde_bound_ok: bool


class SolverFG(FrozenModel):
    R0: float
    C1_lem: float
    r: float
    vartheta: float
    b1: float
    d: int


class FGSolution(NamedTuple):
    theta: complex
    y3: float
    residual: float
    unique: Optional[bool]  # None unless multi-start was probed


class EKConstantsComplex(FrozenModel):
    C2: float
    C3: float
    n2: int
    n3: int
    rho: float
    M_bound: int
    D: float
    mode: Literal["analytic", "empirical"] = "analytic"


# ---------------------------------------------------------------- algebraic-numbers

class IntegerPolynomial(FrozenModel):
    coeffs: list[int]  # high to low, monic

    @field_validator("coeffs")
    @classmethod
    def check_monic(cls, coeffs: list[int]) -> list[int]:
        if len(coeffs) < 2:
            raise ValueError("degree must be at least 1")
        if coeffs[0] != 1:
            raise ValueError("polynomial must be monic")
        if coeffs[-1] == 0:
            raise ValueError("constant term must be nonzero")
        return coeffs

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1


class AlgebraicClass(FrozenModel):
    is_pisot: bool
    is_salem: bool
    is_garsia: bool
    dominant_root: float
    root_moduli: list[float]
    roots: list[complex] = []
    irreducible: Optional[bool] = None  # None above the factorization degree cap
    vieta_residual: float = 0.0


# ---------------------------------------------------------------- dims-separation

class SeparationReport(FrozenModel):
    N: int
    min_distance: float
    epsilon_star: float
    colliding_pair: Optional[tuple[list[int], list[int]]] = None
    difference: Optional[list[list[float]]] = None


class DimensionReport(FrozenModel):
    q: float
    sim_dim_q: float
    supercritical: bool
    attractor_sim_dim: float


class SplitReport(FrozenModel):
    ifs_k: HomogeneousIFS
    ifs_tilde_k: HomogeneousIFS
    dims_k: DimensionReport
    dims_tilde_k: DimensionReport


class DensityReport(FrozenModel):
    resolution: int
    samples: int
    occupied_fraction: float
    occupied_fraction_coarse: float
    l2_fine: float
    l2_coarse: float
    l2_ratio: float
    trend: Literal["bounded", "singular"]
    heuristic: bool = True
    note: str = "heuristic two-resolution trend; not a proof of absolute continuity"


# ---------------------------------------------------------------- queued runs

class EkCoverConfig(FrozenModel):
    B1: float = Field(gt=1)
    B2: float
    N: int = Field(gt=0)
    delta: float = Field(ge=0, lt=0.5)
    rho: Optional[float] = None
    mode: Literal["analytic", "empirical"] = "analytic"
    ifs: Optional[HomogeneousIFS] = None  # digits and rotation; d = 1, a_1 = 1 when absent
    theta_step: Optional[float] = None
    eta_step: Optional[float] = None
    node_cap: Optional[int] = None


class EkcCoverConfig(FrozenModel):
    vartheta: float = Field(gt=1)
    b1: float = Field(gt=0)
    b2: float = Field(gt=0)
    N: int = Field(gt=0)
    delta: float = Field(ge=0, lt=0.5)
    theta_prefix: list[tuple[float, float]] = []  # (re, im) of θ_1, θ_3, ...
    rho: Optional[float] = None
    phi_range: Optional[tuple[float, float]] = None
    angle_step: float = 1e-3
    samples: Optional[int] = None
    node_cap: Optional[int] = None


class DecayFitConfig(FrozenModel):
    ifs: HomogeneousIFS
    shells: int = Field(default=12, ge=3)
    directions: Optional[int] = None
    tol: float = 1e-10
    k0: int = 1


class EsSweepConfig(FrozenModel):
    ifs: HomogeneousIFS
    N_max: int = Field(ge=0)
    method: Literal["auto", "brute", "mitm"] = "auto"
