from typing import List, Optional

import numpy as np
from fastapi import APIRouter
from pydantic import BaseModel, Field

from app import config
from app.ifs import atoms, chaos_game_sample, complex_diagonal_form, diagonal_basis, validate
from app.schemas import BlockAngles, HomogeneousIFS, ValidationReport

router = APIRouter()


class ValidateInput(BaseModel):
    ifs: HomogeneousIFS
    distinct_angles: bool = False


class ValidateResponse(BaseModel):
    ok: bool
    report: ValidationReport


class AtomsInput(BaseModel):
    ifs: HomogeneousIFS
    N: int = Field(ge=0)


class AtomsResponse(BaseModel):
    level: int
    points: List[List[float]]
    weights: List[float]


class SampleInput(BaseModel):
    ifs: HomogeneousIFS
    count: int = Field(gt=0, le=1_000_000)
    seed: int
    burn_in: Optional[int] = Field(default=None, ge=1)


class SampleResponse(BaseModel):
    seed: int
    points: List[List[float]]


class DiagonalFormResponse(BaseModel):
    ifs: HomogeneousIFS
    basis: List[List[float]]
    angles: List[float]
    eigen_residual: float


@router.post("/ifs/validate",
             response_model=ValidateResponse,
             summary="Validate an IFS",
             description="Check spanning, cyclicity, orthogonality, probabilities, digit distinctness and contraction")
def validate_ifs(args: ValidateInput):
    report = validate(args.ifs, distinct_angles=args.distinct_angles)
    return ValidateResponse(ok=report.ok, report=report)


@router.post("/ifs/atoms",
             response_model=AtomsResponse,
             summary="Atoms of the level-N truncation",
             description="All (m+1)^(N+1) atoms Σ Aⁿa_{j_n} with their weights")
def get_atoms(args: AtomsInput):
    cloud = atoms(args.ifs, args.N, config.ATOM_CAP)
    return AtomsResponse(level=cloud.level, points=cloud.points.tolist(),
                         weights=cloud.weights.tolist())


@router.post("/ifs/sample",
             response_model=SampleResponse,
             summary="Chaos-game sample",
             description="Seeded samples from the self-similar measure")
def get_sample(args: SampleInput):
    points = chaos_game_sample(args.ifs, args.count, args.seed, burn_in=args.burn_in)
    return SampleResponse(seed=args.seed, points=points.tolist())


@router.post("/ifs/diagonal-form",
             response_model=DiagonalFormResponse,
             summary="Complex-diagonal form",
             description="Conjugate the rotation to block-diagonal form Diag[e^{-2πiα_ℓ}]")
def get_diagonal_form(ifs: HomogeneousIFS):
    if isinstance(ifs.rotation, BlockAngles):
        return DiagonalFormResponse(ifs=ifs, basis=np.eye(ifs.dim).tolist(),
                                    angles=ifs.rotation.angles, eigen_residual=0.0)
    basis, angles, residual = diagonal_basis(ifs)
    return DiagonalFormResponse(ifs=complex_diagonal_form(ifs), basis=basis.tolist(),
                                angles=angles, eigen_residual=residual)
