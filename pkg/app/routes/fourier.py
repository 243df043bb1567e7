from typing import List, Literal, Optional

from fastapi import APIRouter
from pydantic import BaseModel, Field

from app.fourier import mu_hat, psi_bound, renormalize_frequency
from app.schemas import HomogeneousIFS

router = APIRouter()


class TransformInput(BaseModel):
    ifs: HomogeneousIFS
    xi: List[float]
    tol: float = Field(default=1e-10, gt=0)


class TransformResponse(BaseModel):
    xi: List[float]
    value: List[float]  # [re, im]
    truncation_depth: int
    tail_bound: float


class PsiInput(BaseModel):
    ifs: HomogeneousIFS
    xi: List[float]
    norm: Literal["max", "complex"] = "max"
    digits_subset: Optional[List[int]] = None


class PsiResponse(BaseModel):
    psi: float
    eta: List[float]
    N: int


@router.post("/fourier/transform",
             response_model=TransformResponse,
             summary="Evaluate the Fourier transform",
             description="Truncated infinite product for μ̂(ξ) with a rigorous tail bound")
def get_transform(args: TransformInput):
    result = mu_hat(args.ifs, args.xi, args.tol)
    return TransformResponse(xi=args.xi, value=[result.value.real, result.value.imag],
                             truncation_depth=result.truncation_depth,
                             tail_bound=result.tail_bound)


@router.post("/fourier/psi",
             response_model=PsiResponse,
             summary="Ψ upper bound",
             description="Upper bound on |μ̂(ξ)| from the renormalized frequency η")
def get_psi(args: PsiInput):
    eta, N = renormalize_frequency(args.ifs, args.xi, args.norm)
    psi = psi_bound(args.ifs, args.xi, args.norm, args.digits_subset)
    return PsiResponse(psi=psi, eta=eta.tolist(), N=N)
