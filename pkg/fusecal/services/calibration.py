"""
Fitting of score calibrators.

Two families are supported:

- isotonic_pchip: pool-adjacent-violators on the (score, label) pairs, then a
  monotone cubic Hermite interpolant through the block knots. Knot y-values
  are strictly increasing, so the interpolant is strictly increasing too.
- platt: one-variable logistic regression sigma(a * s + b) fitted by Newton's
  method on the log-loss with an L2 penalty on (a, b).
"""

import logging
from typing import Optional, Union

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import expit
from sklearn.isotonic import isotonic_regression

from fusecal.config import default
from fusecal.core.errors import (
    ConvergenceError,
    InsufficientClassesError,
    InsufficientDataError,
    KindError,
)
from fusecal.core.parallel import run_row_blocks
from fusecal.models.calibrator import CalibrationMethod, Calibrator, IsotonicFit
from fusecal.models.catalog import PairLabelSet
from fusecal.models.scores import ScoreKind, ScoreMatrix

logger = logging.getLogger(__name__)


def _check_trainable(pairs: PairLabelSet) -> None:
    if len(pairs) < 2:
        raise InsufficientDataError(f"calibration needs at least 2 pairs, got {len(pairs)}")
    if pairs.n_positive == 0 or pairs.n_negative == 0:
        raise InsufficientClassesError(
            f"calibration needs both labels, got {pairs.n_positive} positive and {pairs.n_negative} negative pairs"
        )


def fit_isotonic_pav(pairs: PairLabelSet) -> IsotonicFit:
    """
    Least-squares non-decreasing fit of labels against scores.

    Pairs with exactly equal scores are pooled first (weighted by count), so
    the fit is a function of the score. Each resulting block becomes one knot:
    x = mean raw score of the block's pairs, y = block value.
    """
    _check_trainable(pairs)
    scores = pairs.scores
    labels = pairs.labels.astype(np.float64)

    unique_scores, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    means = np.bincount(inverse, weights=labels) / counts
    values = isotonic_regression(means, sample_weight=counts.astype(np.float64), increasing=True)

    # consecutive pooled scores with the same value form one block
    starts = np.flatnonzero(np.r_[True, values[1:] != values[:-1]])
    block_weights = np.add.reduceat(counts.astype(np.float64), starts)
    knots_x = np.add.reduceat(unique_scores * counts, starts) / block_weights
    knots_y = values[starts]

    fit = IsotonicFit(
        knots_x=knots_x,
        knots_y=knots_y,
        fitted=values[inverse],
        x_min=float(scores.min()),
        x_max=float(scores.max()),
        training=pairs,
    )
    logger.debug(f"PAV: {len(pairs)} pairs, {unique_scores.size} distinct scores, {fit.n_blocks} blocks")
    return fit


def pchip_tangents(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Fritsch-Butland tangents of the monotone cubic interpolant through strictly increasing knots."""
    return PchipInterpolator(x, y)(x, nu=1)


def build_pchip(fit: IsotonicFit, tail_slope: Optional[float] = None) -> Calibrator:
    """Strictly increasing calibrator through the PAV knots.

    The outer knots are moved from their block centers to the ends of the
    training score range, so every training score lies between knots and the
    map stays strictly increasing over the whole range. A single-block fit
    cannot be made strictly increasing; it falls back to Platt scaling on the
    same training pairs.
    """
    if fit.n_blocks < 1:
        raise InsufficientDataError("PCHIP needs at least one knot")
    if fit.n_blocks == 1:
        logger.warning("Isotonic fit collapsed to a single block; falling back to Platt scaling")
        return fit_platt(fit.training)
    if tail_slope is None:
        tail_slope = default("calibration", "tail_slope")

    knots_x = fit.knots_x.copy()
    knots_x[0], knots_x[-1] = fit.x_min, fit.x_max
    return Calibrator(
        method=CalibrationMethod.ISOTONIC_PCHIP,
        x_min=fit.x_min,
        x_max=fit.x_max,
        knots_x=knots_x,
        knots_y=fit.knots_y,
        tangents=pchip_tangents(knots_x, fit.knots_y),
        tail_slope=tail_slope,
    )


def _platt_objective(theta: np.ndarray, z: np.ndarray, y: np.ndarray, penalty: np.ndarray) -> float:
    margin = theta[0] * z + theta[1]
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin) + 0.5 * theta @ penalty @ theta)


def fit_platt(
    pairs: PairLabelSet,
    l2: Optional[float] = None,
    max_iterations: Optional[int] = None,
    tolerance: Optional[float] = None,
) -> Calibrator:
    """
    Logistic calibrator sigma(a * s + b) on raw 0/1 targets.

    Minimizes the summed log-loss plus (l2 / 2) * (a^2 + b^2). Newton runs on
    standardized scores z = (s - center) / spread with parameters theta, where
    a = theta_0 / spread and b = theta_1 - theta_0 * center / spread; the
    penalty on (a, b) is carried over exactly. The objective is divided by the
    number of pairs, so ``tolerance`` bounds the per-pair gradient.
    A fitted slope a <= 0 still succeeds but marks the calibrator decreasing.
    """
    _check_trainable(pairs)
    settings = default("calibration", "platt")
    l2 = settings["l2"] if l2 is None else l2
    max_iterations = settings["max_iterations"] if max_iterations is None else max_iterations
    tolerance = settings["tolerance"] if tolerance is None else tolerance

    scores = pairs.scores
    y = pairs.labels.astype(np.float64)
    center = float(scores.mean())
    spread = float(scores.std())
    constant = spread == 0.0
    if constant:
        spread = 1.0
    z = (scores - center) / spread

    # theta -> (a, b)
    to_original = np.array([[1.0 / spread, 0.0], [-center / spread, 1.0]])
    if constant:
        # no slope information: theta_0 stays 0, so b = theta_1
        penalty = (l2 / len(pairs)) * np.eye(2)
    else:
        penalty = (l2 / len(pairs)) * (to_original.T @ to_original)

    theta = np.zeros(2)
    objective = _platt_objective(theta, z, y, penalty)
    for iteration in range(1, max_iterations + 1):
        p = expit(theta[0] * z + theta[1])
        residual = p - y
        gradient = np.array([np.mean(residual * z), np.mean(residual)]) + penalty @ theta
        if np.max(np.abs(gradient)) <= tolerance:
            break

        w = p * (1.0 - p)
        hessian = np.array([
            [np.mean(w * z * z), np.mean(w * z)],
            [np.mean(w * z), np.mean(w)],
        ]) + penalty
        step = np.linalg.solve(hessian, gradient)
        candidate = theta - step
        candidate_objective = _platt_objective(candidate, z, y, penalty)

        # close to the optimum the full Newton step is taken; the objective no
        # longer resolves the Armijo decrease there
        t = 1.0
        while np.max(np.abs(gradient)) > 1e-4 and candidate_objective > objective - 1e-4 * t * float(gradient @ step):
            t *= 0.5
            if t < 1e-12:
                raise ConvergenceError("Platt line search made no progress", iterations=iteration)
            candidate = theta - t * step
            candidate_objective = _platt_objective(candidate, z, y, penalty)

        if np.max(np.abs(candidate - theta)) <= 1e-15 * (1.0 + np.max(np.abs(theta))):
            # step below resolution: the gradient is as small as doubles allow
            break
        theta, objective = candidate, candidate_objective
        logger.debug(f"Platt iteration {iteration}: objective={objective:.17g}")
    else:
        raise ConvergenceError("Platt scaling did not converge", iterations=max_iterations)

    slope, intercept = (float(v) for v in to_original @ theta)
    decreasing = slope <= 0.0
    if decreasing:
        logger.warning(f"Platt slope {slope:.6g} <= 0: scores do not increase with same-identity probability")

    return Calibrator(
        method=CalibrationMethod.PLATT,
        x_min=float(scores.min()),
        x_max=float(scores.max()),
        slope=slope,
        intercept=intercept,
        decreasing=decreasing,
    )


def fit_calibrator(pairs: PairLabelSet, method: Union[CalibrationMethod, str, None] = None) -> Calibrator:
    if method is None:
        method = default("calibration", "method")
    method = CalibrationMethod.parse(method) if isinstance(method, str) else method
    if method is CalibrationMethod.PLATT:
        return fit_platt(pairs)
    return build_pchip(fit_isotonic_pav(pairs))


def apply_calibrator(calibrator: Calibrator, scores: ScoreMatrix, threads: Optional[int] = None) -> ScoreMatrix:
    if not scores.kind.is_raw:
        raise KindError(f"cannot calibrate a {scores.kind.value} score matrix")

    out = np.empty(scores.shape, dtype=np.float64)

    def work(start: int, stop: int) -> None:
        out[start:stop] = calibrator(scores.values[start:stop])

    run_row_blocks(work, scores.n_query, threads)
    return ScoreMatrix(out, ScoreKind.CALIBRATED, flagged=calibrator.decreasing)
