"""
Pisot / Salem / Garsia classification of integer polynomials.
"""
from typing import Optional, Sequence

import mpmath
import numpy as np
from loguru import logger
from sympy import Poly, symbols

from app import config
from app.errors import IllConditioned, Undecided
from app.schemas import AlgebraicClass, IntegerPolynomial

REFINE_DPS = 50
NEWTON_STEPS = 60
LABEL_TOL = 1e-9

KNOWN_POLYNOMIALS: dict[str, IntegerPolynomial] = {
    "two": IntegerPolynomial(coeffs=[1, -2]),
    "golden": IntegerPolynomial(coeffs=[1, -1, -1]),
    "sqrt2": IntegerPolynomial(coeffs=[1, 0, -2]),
    "plastic": IntegerPolynomial(coeffs=[1, 0, -1, -1]),
    "tribonacci": IntegerPolynomial(coeffs=[1, -1, -1, -1]),
    "salem4": IntegerPolynomial(coeffs=[1, -1, -1, -1, 1]),
    "lehmer": IntegerPolynomial(coeffs=[1, 1, 0, -1, -1, -1, -1, -1, 0, 1, 1]),
}


def parse_coefficients(text: str) -> IntegerPolynomial:
    """"1,-1,-1" (high to low) -> IntegerPolynomial."""
    return IntegerPolynomial(coeffs=[int(c) for c in text.replace(" ", "").split(",") if c])


def _refine(coeffs: Sequence[int], root: complex, tol: float) -> complex:
    with mpmath.workdps(REFINE_DPS):
        z = mpmath.mpc(root)
        for _ in range(NEWTON_STEPS):
            value, slope = mpmath.polyval(list(coeffs), z, derivative=True)
            if slope == 0:
                break
            step = value / slope
            z -= step
            if abs(step) <= mpmath.mpf(10) ** (-REFINE_DPS + 5) * max(1, abs(z)):
                break
        value = mpmath.polyval(list(coeffs), z)
        scale = sum(abs(c) * abs(z) ** k for k, c in enumerate(reversed(coeffs)))
        residual = float(abs(value) / scale)
    if residual > tol:
        raise IllConditioned(f"root {complex(z)} refines only to residual {residual:.3e}")
    return complex(z)


def roots(poly: IntegerPolynomial, tol: float = 1e-9) -> list[complex]:
    """Companion-matrix roots polished by Newton steps at 50 digits, largest modulus first."""
    found = np.roots(poly.coeffs)
    refined = [_refine(poly.coeffs, r, tol) for r in found]
    return sorted(refined, key=lambda r: (-abs(r), -r.real, -r.imag))


def irreducible(poly: IntegerPolynomial) -> Optional[bool]:
    """Irreducibility over ℚ, or None above the factorization degree cap."""
    if poly.degree > config.IRREDUCIBILITY_DEGREE_CAP:
        return None
    x = symbols("x")
    _, factors = Poly(poly.coeffs, x).factor_list()
    return len(factors) == 1 and factors[0][1] == 1


def classify(poly: IntegerPolynomial, tol: float = 1e-9) -> AlgebraicClass:
    """
    Pisot: one real root > 1, all other roots of modulus < 1 - tol.
    Salem: one real root > 1, the others in the closed disk with at least one
    on the circle.
    Garsia: all roots of modulus > 1 + tol and constant term ±2.

    Raises:
        IllConditioned: a root does not refine below tol
        Undecided: outside the Salem shape, some root lies within tol of the circle
    """
    found = roots(poly, tol)
    moduli = [abs(r) for r in found]
    outside = [r for r in found if abs(r) > 1 + tol]
    on_circle = [r for r in found if abs(abs(r) - 1) <= tol]
    is_irreducible = irreducible(poly)
    plausible = is_irreducible is not False

    top = found[0]
    leading_real = abs(top.imag) <= tol * max(1.0, abs(top)) and top.real > 1 + tol
    salem_shape = len(outside) == 1 and leading_real and bool(on_circle)
    if on_circle and not salem_shape:
        raise Undecided(f"{len(on_circle)} roots within {tol} of the unit circle")

    is_pisot = plausible and len(outside) == 1 and leading_real and all(
        m < 1 - tol for m in moduli[1:])
    is_salem = plausible and salem_shape and not is_pisot
    is_garsia = plausible and all(m > 1 + tol for m in moduli) and abs(poly.coeffs[-1]) == 2

    real_roots = [r.real for r in found if abs(r.imag) <= tol * max(1.0, abs(r))]
    dominant = max(real_roots) if real_roots else moduli[0]
    vieta = abs(float(np.prod(moduli)) - abs(poly.coeffs[-1]))
    result = AlgebraicClass(
        is_pisot=is_pisot,
        is_salem=is_salem,
        is_garsia=is_garsia,
        dominant_root=float(dominant),
        root_moduli=moduli,
        roots=found,
        irreducible=is_irreducible,
        vieta_residual=vieta,
    )
    logger.debug(f"classified {poly.coeffs}: pisot={is_pisot} salem={is_salem} garsia={is_garsia}")
    return result


def label_contraction(lam: float, candidates: Optional[Sequence[IntegerPolynomial]] = None,
                      tol: float = 1e-9) -> Optional[AlgebraicClass]:
    """Class of the first candidate having a real root within 1e-9 of 1/λ."""
    if not 0 < lam < 1:
        raise ValueError("contraction ratio must lie in (0, 1)")
    candidates = list(KNOWN_POLYNOMIALS.values()) if candidates is None else candidates
    target = 1 / lam
    for poly in candidates:
        found = np.roots(poly.coeffs)
        if not any(abs(r.imag) <= LABEL_TOL and abs(r.real - target) <= LABEL_TOL for r in found):
            continue
        try:
            return classify(poly, tol)
        except (Undecided, IllConditioned) as error:
            logger.warning(f"candidate {poly.coeffs} matches but cannot be classified: {error}")
    return None
