from typing import Literal, Optional

from fastapi import APIRouter
from pydantic import BaseModel, Field

from app.schemas import (
    DensityReport,
    DimensionReport,
    HomogeneousIFS,
    SeparationReport,
    SplitReport,
)
from app.separation import (
    density_experiment,
    es_check,
    sim_dimensions,
    split_report,
    verify_split,
)

router = APIRouter()


class EsCheckInput(BaseModel):
    ifs: HomogeneousIFS
    N: int = Field(ge=0)
    method: Literal["auto", "brute", "mitm"] = "auto"


class SimilarityInput(BaseModel):
    ifs: HomogeneousIFS
    q: float = Field(default=2.0, gt=1)


class SplitInput(BaseModel):
    ifs: HomogeneousIFS
    k: int = Field(ge=2)
    q: float = Field(default=2.0, gt=1)
    verify_N: Optional[int] = Field(default=None, ge=0)


class SplitResponse(SplitReport):
    discrepancy: Optional[float] = None


class DensityInput(BaseModel):
    ifs: HomogeneousIFS
    resolution: int = Field(default=64, ge=2)
    samples: int = Field(default=100_000, ge=2, le=10_000_000)
    seed: int


@router.post("/dims/es-check",
             response_model=SeparationReport,
             summary="Exponential separation at level N",
             description="Smallest nonzero Σ Aⁿb_n over difference words of length N+1")
def get_es_check(args: EsCheckInput):
    return es_check(args.ifs, args.N, args.method)


@router.post("/dims/similarity",
             response_model=DimensionReport,
             summary="Similarity dimensions",
             description="Rényi-q similarity dimension of the measure and of the attractor")
def get_similarity(args: SimilarityInput):
    return sim_dimensions(args.ifs, args.q)


@router.post("/dims/split",
             response_model=SplitResponse,
             summary="k-skipping convolution split",
             description="Factors μ_k and μ̃_k with their dimensions, optionally checked on atoms")
def get_split(args: SplitInput):
    report = split_report(args.ifs, args.k, args.q)
    discrepancy = None if args.verify_N is None else verify_split(args.ifs, args.k, args.verify_N)
    return SplitResponse(**dict(report), discrepancy=discrepancy)


@router.post("/dims/density",
             response_model=DensityReport,
             summary="Voxel density trend",
             description="Heuristic two-resolution L² trend of chaos-game samples")
def get_density(args: DensityInput):
    return density_experiment(args.ifs, args.resolution, args.samples, args.seed)
