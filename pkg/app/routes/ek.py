from typing import List, Literal, Optional, Tuple

import numpy as np
from fastapi import APIRouter
from pydantic import BaseModel, Field

from app.ek_complex import bad_set_witness_complex, solve_FG, tau_grid
from app.ek_real import bad_set_witness, ek_constants, ek_trace, select_basis, theta_estimate
from app.errors import DegenerateTrace
from app.schemas import EKConstantsReal, HomogeneousIFS, WitnessReport

router = APIRouter()


class TraceInput(BaseModel):
    ifs: HomogeneousIFS
    eta: List[float]
    N: int = Field(gt=0, le=200)


class TraceResponse(BaseModel):
    theta: float
    K: List[List[int]]
    eps: List[List[float]]
    L: List[List[float]]
    estimates: List[Optional[float]]  # ‖L_{n+1}‖/‖L_n‖, None where L_n vanishes
    condition: float


class ConstantsInput(BaseModel):
    ifs: Optional[HomogeneousIFS] = None
    B1: float = Field(gt=1)
    B2: float
    mode: Literal["analytic", "empirical"] = "analytic"
    samples: int = Field(default=500, gt=0)
    seed: int = 0


class WitnessInput(BaseModel):
    ifs: Optional[HomogeneousIFS] = None
    theta: float = Field(gt=1)
    N: int = Field(gt=0)
    delta: float = Field(ge=0, lt=0.5)
    rho: float = Field(gt=0, le=0.5)
    B2: Optional[float] = None


class SolveFGInput(BaseModel):
    x: Tuple[float, float, float, float]
    vartheta: float = Field(gt=1)
    b1: float = Field(gt=0)
    probe: bool = False


class SolveFGResponse(BaseModel):
    theta: List[float]  # [re, im]
    y3: float
    residual: float
    unique: Optional[bool] = None


class ComplexWitnessInput(BaseModel):
    theta_list: List[Tuple[float, float]]  # (re, im) of θ_1, θ_3, ...
    N: int = Field(gt=0)
    delta: float = Field(ge=0, lt=0.5)
    rho: float = Field(gt=0, le=0.5)
    radial_step: float = Field(default=1 / 16, gt=0)
    angles: int = Field(default=64, gt=0)
    seed: int = 0


def _basis(ifs: Optional[HomogeneousIFS]):
    if ifs is None:
        return np.eye(1), np.eye(1)
    _, O, T_D = select_basis(ifs)
    return O, T_D


@router.post("/ek/trace",
             response_model=TraceResponse,
             summary="Nearest-integer trace",
             description="K_n, ε_n and L_n for the IFS in its selected digit basis")
def get_trace(args: TraceInput):
    theta, O, T_D = select_basis(args.ifs)
    trace = ek_trace(theta, O, T_D, args.eta, args.N)
    estimates = []
    for n in range(args.N):
        try:
            estimates.append(theta_estimate(trace, n))
        except DegenerateTrace:
            estimates.append(None)
    return TraceResponse(theta=theta, K=trace.K.tolist(), eps=trace.eps.tolist(),
                         L=trace.L.tolist(), estimates=estimates, condition=trace.condition)


@router.post("/ek/constants",
             response_model=EKConstantsReal,
             summary="Real-model constants",
             description="C₁, C₂, n₁, ρ and the branching bound for ϑ in [B₁, B₂]")
def get_constants(args: ConstantsInput):
    O, T_D = _basis(args.ifs)
    return ek_constants(O, T_D, args.B1, args.B2, mode=args.mode,
                        samples=args.samples, seed=args.seed)


@router.post("/ek/witness",
             response_model=WitnessReport,
             summary="Exceptional-set witness",
             description="Search the η grid for a certificate that ϑ is exceptional at depth N")
def get_witness(args: WitnessInput):
    O, T_D = _basis(args.ifs)
    return bad_set_witness(args.theta, O, T_D, args.N, args.delta, args.rho, B2=args.B2)


@router.post("/ek/complex/solve-fg",
             response_model=SolveFGResponse,
             summary="Solve for θ from four trace values",
             description="Recover θ in the upper half plane and y₃ from x₀..x₃")
def get_solve_fg(args: SolveFGInput):
    solution = solve_FG(args.x, args.vartheta, args.b1, probe=args.probe)
    return SolveFGResponse(theta=[solution.theta.real, solution.theta.imag], y3=solution.y3,
                           residual=solution.residual, unique=solution.unique)


@router.post("/ek/complex/witness",
             response_model=WitnessReport,
             summary="Complex exceptional-set witness",
             description="Search the τ grid for a certificate that the spectrum is exceptional")
def get_complex_witness(args: ComplexWitnessInput):
    odd = [complex(re, im) for re, im in args.theta_list]
    thetas = [z for w in odd for z in (w, w.conjugate())]
    grid = tau_grid(len(odd), abs(odd[-1]), args.radial_step, args.angles, args.seed)
    return bad_set_witness_complex(thetas, args.N, args.delta, args.rho, grid)
