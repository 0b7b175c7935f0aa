"""Adaptive quadrature helpers built on scipy.integrate.quad."""

import logging
import math
from collections.abc import Callable, Iterable
from typing import Optional

import numpy as np
from scipy import integrate

from ..config.constants import QUAD_LIMIT, QUAD_Z_FLOOR
from ..core.config import get_config_manager
from ..core.models import QuadratureResult


logger = logging.getLogger(__name__)


def _quad_piece(
    fn: Callable[[float], float], lo: float, hi: float, rtol: float
) -> QuadratureResult:
    output = integrate.quad(
        fn, lo, hi, epsabs=0.0, epsrel=rtol, limit=QUAD_LIMIT, full_output=1
    )
    value, error, info = output[0], output[1], output[2]
    converged = len(output) == 3
    if not converged:
        logger.debug(f"quad on ({lo}, {hi}) did not converge: {output[3]}")
    if not math.isfinite(value):
        converged = False
    # Tiny absolute errors on near-zero pieces are not a convergence problem
    if converged and error > max(1e3 * rtol * abs(value), 1e-10):
        converged = False
    return QuadratureResult(
        value=float(value),
        error=float(error),
        converged=converged,
        evaluations=int(info.get("neval", 0)),
    )


def integrate_positive_axis(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    breakpoints: Iterable[float] = (),
    rtol: Optional[float] = None,
) -> QuadratureResult:
    """
    Integrate ``fn`` over (lo, hi] ⊂ [0, ∞].

    The range is split at every breakpoint inside it. A piece starting at 0 is
    integrated in the variable u = log z so that power singularities at the
    origin become exponentially decaying tails. That piece starts at
    ``QUAD_Z_FLOOR`` instead of 0, where Python floats would overflow on
    z^{-1-β}; the mass lost below it is of order QUAD_Z_FLOOR^{2-β}.

    Args:
        fn: Scalar integrand in z
        lo: Lower limit (>= 0)
        hi: Upper limit (may be ``math.inf``)
        breakpoints: Points where the integrand has kinks or support edges
        rtol: Relative tolerance (defaults to the configured quadrature tolerance)

    Returns:
        QuadratureResult summed over all pieces
    """
    if rtol is None:
        rtol = get_config_manager().config.quad_rtol
    if hi <= lo:
        return QuadratureResult(value=0.0)

    cuts = sorted({p for p in breakpoints if lo < p < hi and math.isfinite(p)})
    edges = [lo, *cuts, hi]
    total = QuadratureResult(value=0.0)
    floor = math.log(QUAD_Z_FLOOR)
    for left, right in zip(edges[:-1], edges[1:]):
        if left == 0.0:

            def log_integrand(u: float, _fn=fn) -> float:
                z = math.exp(u)
                try:
                    return _fn(z) * z
                except OverflowError:
                    return math.inf

            upper = math.log(right) if math.isfinite(right) else math.inf
            if math.isinf(upper):
                # Split so that quad sees one infinite end per call
                total = total + _quad_piece(log_integrand, floor, 0.0, rtol)
                total = total + _quad_piece(fn, 1.0, math.inf, rtol)
            elif upper > floor:
                total = total + _quad_piece(log_integrand, floor, upper, rtol)
        else:
            total = total + _quad_piece(fn, left, right, rtol)
    return total


def phi2(x: np.ndarray) -> np.ndarray:
    """Evaluate e^{-x} - 1 + x without cancellation for small x."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    out = np.empty_like(x)
    xs = x[small]
    out[small] = xs * xs * (0.5 - xs / 6.0 + xs * xs / 24.0)
    xl = x[~small]
    out[~small] = np.expm1(-xl) + xl
    return out


def phi1(x: np.ndarray) -> np.ndarray:
    """Evaluate e^{-x} - 1 (as expm1)."""
    return np.expm1(-np.asarray(x, dtype=float))
