"""Two-threshold score classifiers: per-bin calibration, ternary output, persistence.

A classifier for one attribute carries, per environment bin, a pair of score
thresholds: one tuned for high positive predictive value, one for high
negative predictive value. Scores between the thresholds map to "uncertain"
and carry no evidence. A bin is reliable only when both thresholds exist and
do not cross; unreliable bins always classify as uncertain.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Mapping

import numpy as np

from attrfuse.catalog import ObjectCatalog

Orientation = Literal["lower_is_positive", "higher_is_positive"]
Outcome = Literal["positive", "negative", "uncertain"]

DEFAULT_TARGET_PPV = 0.96
DEFAULT_TARGET_NPV = 0.96
DEFAULT_MIN_DETECTION_RATE = 0.09

_ORIENTATIONS = ("lower_is_positive", "higher_is_positive")


class CalibrationError(ValueError):
    """Invalid calibration input (empty samples, bad targets, bad bandwidth)."""


@dataclass(frozen=True)
class BinCalibration:
    """Calibration result for one (attribute, environment bin) pair.

    ``theta_pos``/``theta_neg`` are None when no threshold met its target on
    the calibration sample. All rates are exact counts on the calibration
    sample against the chosen thresholds; rates tied to a missing threshold
    are zero and the corresponding predictive value is None.
    """

    bin_index: int
    theta_pos: float | None
    theta_neg: float | None
    ppv: float | None
    npv: float | None
    detection_rate: float
    true_negative_rate: float
    false_positive_rate: float
    false_negative_rate: float
    reliable: bool

    def __post_init__(self):
        if self.reliable and (self.theta_pos is None or self.theta_neg is None):
            raise ValueError("reliable calibration requires both thresholds")
        if self.reliable and (self.ppv is None or self.npv is None):
            raise ValueError("reliable calibration requires both predictive values")


@dataclass(frozen=True)
class ClassifierModel:
    """One attribute's calibrated classifier across environment bins."""

    attribute_index: int
    orientation: Orientation
    calibrations: Mapping[int, BinCalibration]

    def __post_init__(self):
        if self.orientation not in _ORIENTATIONS:
            raise ValueError(f"unknown orientation {self.orientation!r}")
        for bin_index, cal in self.calibrations.items():
            if cal.bin_index != bin_index:
                raise ValueError("calibration keyed under a different bin index")
            if cal.reliable:
                lo, hi = cal.theta_pos, cal.theta_neg
                if self.orientation == "higher_is_positive":
                    lo, hi = hi, lo
                if lo > hi:
                    raise ValueError("reliable calibration has crossed thresholds")

    @property
    def reliable_region(self) -> frozenset[int]:
        return frozenset(k for k, cal in self.calibrations.items() if cal.reliable)


def _threshold_candidates(values: np.ndarray) -> np.ndarray:
    """Midpoints between consecutive distinct sorted values, plus sentinels beyond both extremes."""
    distinct = np.unique(values)
    mids = 0.5 * (distinct[:-1] + distinct[1:])
    return np.concatenate(([distinct[0] - 1.0], mids, [distinct[-1] + 1.0]))


def _validate_samples(pos_scores, neg_scores) -> tuple[np.ndarray, np.ndarray]:
    pos = np.asarray(pos_scores, dtype=float).ravel()
    neg = np.asarray(neg_scores, dtype=float).ravel()
    if pos.size == 0 or neg.size == 0:
        raise CalibrationError("calibration needs at least one positive and one negative score")
    return pos, neg


def calibrate_bin(
    pos_scores,
    neg_scores,
    orientation: Orientation = "lower_is_positive",
    target_ppv: float = DEFAULT_TARGET_PPV,
    target_npv: float = DEFAULT_TARGET_NPV,
    min_detection_rate: float = DEFAULT_MIN_DETECTION_RATE,
    bin_index: int = 0,
) -> BinCalibration:
    """Sweep thresholds on labeled scores and pick the most permissive qualifying pair.

    The negative threshold is the most permissive candidate whose counted
    NPV reaches ``target_npv`` while classifying at least a
    ``min_detection_rate`` fraction of the negatives; the positive threshold
    is then the most permissive candidate at or inside it whose counted PPV
    reaches ``target_ppv`` with a detection rate of at least
    ``min_detection_rate``. Capping the positive sweep at the negative
    threshold keeps the pair from crossing on strongly separated samples
    (where both unconstrained sweeps would walk deep into the class gap) and
    biases the positive threshold toward the conservative side. Candidates
    are midpoints between consecutive distinct scores plus one sentinel
    beyond each extreme, so the sweep is exhaustive and deterministic. No
    qualifying threshold is not an error: the bin is simply marked
    unreliable.
    """
    pos, neg = _validate_samples(pos_scores, neg_scores)
    if orientation not in _ORIENTATIONS:
        raise CalibrationError(f"unknown orientation {orientation!r}")
    if not 0.0 < target_ppv <= 1.0 or not 0.0 < target_npv <= 1.0:
        raise CalibrationError("predictive value targets must be in (0, 1]")
    if not 0.0 <= min_detection_rate <= 1.0:
        raise CalibrationError("min_detection_rate must be in [0, 1]")

    flip = orientation == "higher_is_positive"
    p = np.sort(-pos if flip else pos)
    n = np.sort(-neg if flip else neg)
    n_pos, n_neg = p.size, n.size
    cands = _threshold_candidates(np.concatenate([p, n]))

    # Negative side: classify negative iff score >= theta.
    tn = (n_neg - np.searchsorted(n, cands, side="left")).astype(float)
    fn = (n_pos - np.searchsorted(p, cands, side="left")).astype(float)
    predicted_neg = tn + fn
    npv_at = np.divide(tn, predicted_neg, out=np.zeros_like(tn), where=predicted_neg > 0)
    qualifies_neg = (predicted_neg >= 1) & (npv_at >= target_npv) & (tn / n_neg >= min_detection_rate)
    theta_neg = float(cands[qualifies_neg].min()) if qualifies_neg.any() else None

    # Positive side: classify positive iff score <= theta, capped at theta_neg.
    tp = np.searchsorted(p, cands, side="right").astype(float)
    fp = np.searchsorted(n, cands, side="right").astype(float)
    predicted_pos = tp + fp
    ppv_at = np.divide(tp, predicted_pos, out=np.zeros_like(tp), where=predicted_pos > 0)
    qualifies_pos = (predicted_pos >= 1) & (ppv_at >= target_ppv) & (tp / n_pos >= min_detection_rate)
    if theta_neg is not None:
        qualifies_pos &= cands <= theta_neg
    theta_pos = float(cands[qualifies_pos].max()) if qualifies_pos.any() else None

    reliable = theta_pos is not None and theta_neg is not None

    detection = false_positive = 0.0
    true_negative = false_negative = 0.0
    ppv = npv = None
    if theta_pos is not None:
        tp1 = float(np.searchsorted(p, theta_pos, side="right"))
        fp1 = float(np.searchsorted(n, theta_pos, side="right"))
        detection = tp1 / n_pos
        false_positive = fp1 / n_neg
        ppv = tp1 / (tp1 + fp1)
    if theta_neg is not None:
        tn1 = float(n_neg - np.searchsorted(n, theta_neg, side="left"))
        fn1 = float(n_pos - np.searchsorted(p, theta_neg, side="left"))
        true_negative = tn1 / n_neg
        false_negative = fn1 / n_pos
        npv = tn1 / (tn1 + fn1)

    if flip:
        theta_pos = None if theta_pos is None else -theta_pos
        theta_neg = None if theta_neg is None else -theta_neg

    return BinCalibration(
        bin_index=bin_index,
        theta_pos=theta_pos,
        theta_neg=theta_neg,
        ppv=ppv,
        npv=npv,
        detection_rate=detection,
        true_negative_rate=true_negative,
        false_positive_rate=false_positive,
        false_negative_rate=false_negative,
        reliable=reliable,
    )


def classify(model: ClassifierModel, bin_index: int, score: float) -> Outcome:
    """Ternary decision for one score; unreliable bins always return uncertain."""
    try:
        cal = model.calibrations[bin_index]
    except KeyError:
        raise ValueError(f"unknown bin index {bin_index}") from None
    if not cal.reliable:
        return "uncertain"
    if model.orientation == "lower_is_positive":
        if score <= cal.theta_pos:
            return "positive"
        if score >= cal.theta_neg:
            return "negative"
    else:
        if score >= cal.theta_pos:
            return "positive"
        if score <= cal.theta_neg:
            return "negative"
    return "uncertain"


def single_threshold_baseline(pos_scores, neg_scores, orientation: Orientation = "lower_is_positive") -> float:
    """Single threshold minimizing total misclassifications on the training sample.

    Ties are broken toward the midpoint of the tied candidate range, taking
    the lower candidate when two are equidistant, so the result is
    deterministic.
    """
    pos, neg = _validate_samples(pos_scores, neg_scores)
    if orientation not in _ORIENTATIONS:
        raise CalibrationError(f"unknown orientation {orientation!r}")
    flip = orientation == "higher_is_positive"
    p = np.sort(-pos if flip else pos)
    n = np.sort(-neg if flip else neg)
    cands = _threshold_candidates(np.concatenate([p, n]))
    missed_pos = p.size - np.searchsorted(p, cands, side="right")
    false_pos = np.searchsorted(n, cands, side="right")
    errors = missed_pos + false_pos
    tied = cands[errors == errors.min()]
    target = 0.5 * (tied[0] + tied[-1])
    theta = float(tied[np.argmin(np.abs(tied - target))])
    return -theta if flip else theta


def kde_density(scores, bandwidth: float, eval_points) -> np.ndarray:
    """Gaussian kernel density estimate with a fixed kernel standard deviation."""
    s = np.asarray(scores, dtype=float).ravel()
    if s.size == 0:
        raise CalibrationError("kde needs at least one score")
    if not bandwidth > 0:
        raise CalibrationError("bandwidth must be positive")
    x = np.atleast_1d(np.asarray(eval_points, dtype=float))
    z = (x[:, None] - s[None, :]) / bandwidth
    return np.exp(-0.5 * z * z).sum(axis=1) / (s.size * bandwidth * math.sqrt(2.0 * math.pi))


def make_synthetic_model(
    attribute_index: int,
    ppv: float,
    npv: float,
    bins: tuple[int, ...] = (0,),
    detection_rate: float = 1.0,
    true_negative_rate: float = 1.0,
    orientation: Orientation = "lower_is_positive",
) -> ClassifierModel:
    """Model with assumed predictive values, for harnesses that draw outcomes directly.

    Thresholds are nominal (0 and 1) and must not be used through
    :func:`classify`; the model exists so that fusion updates can consume the
    stated predictive values.
    """
    fp_rate = 0.0 if ppv >= 1.0 else detection_rate * (1.0 - ppv) / ppv
    fn_rate = 0.0 if npv >= 1.0 else true_negative_rate * (1.0 - npv) / npv
    cals = {
        k: BinCalibration(
            bin_index=k,
            theta_pos=0.0,
            theta_neg=1.0,
            ppv=float(ppv),
            npv=float(npv),
            detection_rate=float(detection_rate),
            true_negative_rate=float(true_negative_rate),
            false_positive_rate=float(fp_rate),
            false_negative_rate=float(fn_rate),
            reliable=True,
        )
        for k in bins
    }
    return ClassifierModel(attribute_index=attribute_index, orientation=orientation, calibrations=cals)


def save_models(models: Mapping[int, ClassifierModel], catalog: ObjectCatalog, path: str | Path) -> None:
    """Persist calibrated models keyed by attribute id."""
    entries = []
    for attribute_index in sorted(models):
        model = models[attribute_index]
        bins = []
        for bin_index in sorted(model.calibrations):
            cal = model.calibrations[bin_index]
            bins.append(
                {
                    "bin": cal.bin_index,
                    "theta_pos": cal.theta_pos,
                    "theta_neg": cal.theta_neg,
                    "ppv": cal.ppv,
                    "npv": cal.npv,
                    "detection_rate": cal.detection_rate,
                    "true_negative_rate": cal.true_negative_rate,
                    "false_positive_rate": cal.false_positive_rate,
                    "false_negative_rate": cal.false_negative_rate,
                    "reliable": cal.reliable,
                }
            )
        entries.append(
            {
                "attribute": catalog.attributes[attribute_index],
                "orientation": model.orientation,
                "bins": bins,
            }
        )
    Path(path).write_text(json.dumps({"models": entries}, indent=2) + "\n")


def load_models(path: str | Path, catalog: ObjectCatalog) -> dict[int, ClassifierModel]:
    """Load models persisted by :func:`save_models`, resolving attribute ids via the catalog."""
    raw = json.loads(Path(path).read_text())
    models: dict[int, ClassifierModel] = {}
    for entry in raw["models"]:
        attribute_index = catalog.attribute_index(entry["attribute"])
        cals = {}
        for rec in entry["bins"]:
            cal = BinCalibration(
                bin_index=int(rec["bin"]),
                theta_pos=rec["theta_pos"],
                theta_neg=rec["theta_neg"],
                ppv=rec["ppv"],
                npv=rec["npv"],
                detection_rate=float(rec["detection_rate"]),
                true_negative_rate=float(rec["true_negative_rate"]),
                false_positive_rate=float(rec["false_positive_rate"]),
                false_negative_rate=float(rec["false_negative_rate"]),
                reliable=bool(rec["reliable"]),
            )
            cals[cal.bin_index] = cal
        models[attribute_index] = ClassifierModel(
            attribute_index=attribute_index,
            orientation=entry["orientation"],
            calibrations=cals,
        )
    return models
