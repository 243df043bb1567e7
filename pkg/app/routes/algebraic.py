from typing import List, Optional

from fastapi import APIRouter
from pydantic import BaseModel, Field

from app.algebraic import classify, label_contraction
from app.schemas import AlgebraicClass, IntegerPolynomial

router = APIRouter()


class ClassifyInput(BaseModel):
    coeffs: List[int]  # high to low
    tol: float = Field(default=1e-9, gt=0)


class ClassResponse(BaseModel):
    is_pisot: bool
    is_salem: bool
    is_garsia: bool
    dominant_root: float
    root_moduli: List[float]
    roots: List[List[float]]  # [re, im]
    irreducible: Optional[bool] = None
    vieta_residual: float


class LabelInput(BaseModel):
    lam: float = Field(gt=0, lt=1)
    candidates: Optional[List[List[int]]] = None


def _response(result: AlgebraicClass) -> ClassResponse:
    data = result.model_dump()
    data["roots"] = [[r.real, r.imag] for r in result.roots]
    return ClassResponse(**data)


@router.post("/algebraic/classify",
             response_model=ClassResponse,
             summary="Classify an integer polynomial",
             description="Pisot, Salem and Garsia flags from refined roots")
def get_classification(args: ClassifyInput):
    return _response(classify(IntegerPolynomial(coeffs=args.coeffs), args.tol))


@router.post("/algebraic/label",
             response_model=Optional[ClassResponse],
             summary="Label a contraction ratio",
             description="Class of the first candidate polynomial with a root at 1/λ, or null")
def get_label(args: LabelInput):
    candidates = None
    if args.candidates is not None:
        candidates = [IntegerPolynomial(coeffs=c) for c in args.candidates]
    result = label_contraction(args.lam, candidates)
    return None if result is None else _response(result)
