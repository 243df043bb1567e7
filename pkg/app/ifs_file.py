"""
YAML definition files for homogeneous IFS.

    name: golden
    dim: 1
    theta_poly: [1, -1, -1]   # or theta: 1.618..., or lambda: 0.618...
    rotation:                 # optional, identity when omitted
      angles: [0.125]         # or matrix: [[...], ...]
    digits: [0, 1]            # scalars allowed when dim = 1
    probs: [0.5, 0.5]         # optional, uniform when omitted
"""
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml
from loguru import logger
from pydantic import ValidationError

from app.algebraic import roots
from app.errors import IfsFileError, ValidationFailed
from app.ifs import validate
from app.schemas import BlockAngles, ExplicitMatrix, HomogeneousIFS, IntegerPolynomial


def _theta(doc: dict[str, Any]) -> float:
    given = [key for key in ("theta", "lambda", "theta_poly") if key in doc]
    if len(given) != 1:
        raise IfsFileError("give exactly one of theta, lambda, theta_poly")
    if "theta" in doc:
        return float(doc["theta"])
    if "lambda" in doc:
        lam = float(doc["lambda"])
        if lam <= 0:
            raise IfsFileError("lambda must be positive")
        return 1 / lam
    poly = IntegerPolynomial(coeffs=[int(c) for c in doc["theta_poly"]])
    real = [r.real for r in roots(poly) if abs(r.imag) < 1e-12]
    if not real:
        raise IfsFileError("theta_poly has no real root")
    return max(real)


def _rotation(doc: dict[str, Any], dim: int):
    raw = doc.get("rotation")
    if raw is None:
        return ExplicitMatrix(matrix=np.eye(dim).tolist())
    if "angles" in raw:
        return BlockAngles(angles=[float(a) for a in raw["angles"]])
    if "matrix" in raw:
        return ExplicitMatrix(matrix=[[float(v) for v in row] for row in raw["matrix"]])
    raise IfsFileError("rotation needs 'angles' or 'matrix'")


def parse_ifs(doc: Any, allow_invalid: bool = False) -> HomogeneousIFS:
    """
    Build an IFS from a parsed YAML mapping.

    Raises:
        IfsFileError: missing or malformed fields
        ValidationFailed: invariants fail and allow_invalid is off
    """
    if not isinstance(doc, dict):
        raise IfsFileError("IFS file must hold a mapping")
    try:
        dim = int(doc["dim"])
        digits = [d if isinstance(d, list) else [d] for d in doc["digits"]]
        probs = doc.get("probs") or [1 / len(digits)] * len(digits)
        ifs = HomogeneousIFS(dim=dim, theta=_theta(doc), rotation=_rotation(doc, dim),
                             digits=digits, probs=probs)
    except KeyError as error:
        raise IfsFileError(f"missing field {error}") from error
    except (TypeError, ValueError, ValidationError) as error:
        raise IfsFileError(f"malformed IFS: {error}") from error

    report = validate(ifs)
    if not report.ok:
        if not allow_invalid:
            raise ValidationFailed(report.failures)
        logger.warning(f"loaded invalid IFS {doc.get('name', '')}: {report.failures}")
    return ifs


def load_ifs(path: str | Path, allow_invalid: bool = False) -> HomogeneousIFS:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except OSError as error:
        raise IfsFileError(f"cannot read {path}: {error}") from error
    except yaml.YAMLError as error:
        raise IfsFileError(f"{path} is not valid YAML: {error}") from error
    return parse_ifs(doc, allow_invalid)


def dump_ifs(ifs: HomogeneousIFS, path: str | Path, name: Optional[str] = None) -> None:
    doc: dict[str, Any] = {"name": name or Path(path).stem, "dim": ifs.dim, "theta": ifs.theta}
    if isinstance(ifs.rotation, BlockAngles):
        doc["rotation"] = {"angles": list(ifs.rotation.angles)}
    else:
        doc["rotation"] = {"matrix": ifs.rotation.matrix}
    doc["digits"] = ifs.digits
    doc["probs"] = ifs.probs
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))
