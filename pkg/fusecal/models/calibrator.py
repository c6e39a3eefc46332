from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.special import expit

from fusecal.core.errors import ConfigError, FormatError
from fusecal.models.catalog import PairLabelSet

DOCUMENT_FORMAT = "fusecal-calibrator"
DOCUMENT_VERSION = 1


class CalibrationMethod(str, Enum):
    ISOTONIC_PCHIP = "isotonic_pchip"
    PLATT = "platt"

    @classmethod
    def parse(cls, value: str) -> "CalibrationMethod":
        aliases = {"isotonic": cls.ISOTONIC_PCHIP, "logistic": cls.PLATT}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise ConfigError(f"unknown calibration method {value!r}") from None


@dataclass(frozen=True, eq=False)
class IsotonicFit:
    """Pool-adjacent-violators result.

    ``knots_x``/``knots_y`` hold one (center, value) knot per block, strictly
    increasing in both coordinates. ``fitted`` is the fitted value of every
    training pair, in the order the pairs were given.
    """

    knots_x: np.ndarray
    knots_y: np.ndarray
    fitted: np.ndarray
    x_min: float
    x_max: float
    training: PairLabelSet = field(repr=False)

    @property
    def blocks(self) -> Tuple[Tuple[float, float], ...]:
        return tuple(zip(self.knots_x.tolist(), self.knots_y.tolist()))

    @property
    def n_blocks(self) -> int:
        return int(self.knots_x.size)


@dataclass(frozen=True, eq=False)
class Calibrator:
    """Fitted map from raw score to [0, 1].

    isotonic_pchip: cubic Hermite interpolant through the knots, with linear
    tails of slope ``tail_slope`` beyond the knot span, clamped to [0, 1].
    Fitted calibrators have their outer knots at the training range ends.
    platt: sigmoid(slope * s + intercept).

    ``x_min``/``x_max`` is the raw score range of the training pairs. The map
    is strictly increasing on it unless ``decreasing`` is set.
    """

    method: CalibrationMethod
    x_min: float
    x_max: float
    knots_x: np.ndarray = field(default_factory=lambda: np.empty(0))
    knots_y: np.ndarray = field(default_factory=lambda: np.empty(0))
    tangents: np.ndarray = field(default_factory=lambda: np.empty(0))
    slope: Optional[float] = None
    intercept: Optional[float] = None
    decreasing: bool = False
    tail_slope: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "method", CalibrationMethod(self.method))
        for name in ("knots_x", "knots_y", "tangents"):
            array = np.array(getattr(self, name), dtype=np.float64).reshape(-1)
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @cached_property
    def _spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.knots_x, self.knots_y, self.tangents, extrapolate=False)

    def __call__(self, scores) -> np.ndarray:
        scores = np.asarray(scores, dtype=np.float64)
        if self.method is CalibrationMethod.PLATT:
            return expit(self.slope * scores + self.intercept)
        return self._evaluate_pchip(scores)

    def _evaluate_pchip(self, scores: np.ndarray) -> np.ndarray:
        lo_x, hi_x = self.knots_x[0], self.knots_x[-1]
        lo_y, hi_y = self.knots_y[0], self.knots_y[-1]

        out = np.empty_like(scores)
        below = scores < lo_x
        above = scores > hi_x
        inside = ~(below | above)

        if inside.any():
            out[inside] = self._spline(scores[inside])
            # Horner evaluation at the right end of the last piece is not exact
            out[scores == hi_x] = hi_y
        out[below] = lo_y + self.tail_slope * (scores[below] - lo_x)
        out[above] = hi_y + self.tail_slope * (scores[above] - hi_x)
        return np.clip(out, 0.0, 1.0)

    def evaluate(self, score: float) -> float:
        return float(self(np.array([score]))[0])

    def to_document(self) -> Dict[str, Any]:
        document: Dict[str, Any] = {
            "format": DOCUMENT_FORMAT,
            "version": DOCUMENT_VERSION,
            "method": self.method.value,
            "training_range": [float(self.x_min), float(self.x_max)],
            "decreasing": bool(self.decreasing),
        }
        if self.method is CalibrationMethod.PLATT:
            document["platt"] = {"slope": float(self.slope), "intercept": float(self.intercept)}
        else:
            document["knots"] = {
                "x": self.knots_x.tolist(),
                "y": self.knots_y.tolist(),
                "tangents": self.tangents.tolist(),
            }
            document["tail_slope"] = float(self.tail_slope)
        return document

    @classmethod
    def from_document(cls, document: Dict[str, Any]) -> "Calibrator":
        if document.get("format") != DOCUMENT_FORMAT:
            raise FormatError("format", f"not a calibrator document: {document.get('format')!r}")
        if document.get("version") != DOCUMENT_VERSION:
            raise FormatError("version", f"unsupported calibrator version {document.get('version')!r}")
        try:
            method = CalibrationMethod(document["method"])
            x_min, x_max = (float(v) for v in document["training_range"])
            decreasing = bool(document["decreasing"])
            if method is CalibrationMethod.PLATT:
                platt = document["platt"]
                return cls(method, x_min, x_max, slope=float(platt["slope"]),
                           intercept=float(platt["intercept"]), decreasing=decreasing)
            knots = document["knots"]
            calibrator = cls(
                method, x_min, x_max,
                knots_x=knots["x"], knots_y=knots["y"], tangents=knots["tangents"],
                decreasing=decreasing, tail_slope=float(document["tail_slope"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError("calibrator", str(e))
        if calibrator.knots_x.size < 2 or not (
            calibrator.knots_x.size == calibrator.knots_y.size == calibrator.tangents.size
        ):
            raise FormatError("knots", "need at least two knots with matching values and tangents")
        return calibrator

    def summary(self) -> Dict[str, Any]:
        """Short description for reports."""
        info: Dict[str, Any] = {
            "method": self.method.value,
            "training_range": [float(self.x_min), float(self.x_max)],
            "decreasing": bool(self.decreasing),
        }
        if self.method is CalibrationMethod.PLATT:
            info["slope"] = float(self.slope)
            info["intercept"] = float(self.intercept)
        else:
            info["knots"] = int(self.knots_x.size)
        return info

