# coding=utf-8
from dataclasses import dataclass, field
from enum import IntEnum
from typing import List, Optional, Tuple

import numpy as np

from kitti_DetectionCore.common.DetectionErrors import ParameterError
from kitti_DetectionCore.models.BoxModels import OrientedBox3D, wrap_angle


class Difficulty(IntEnum):
    """
    ordered from easiest; a ground truth counts for every level at or above its own
    """

    EASY = 0
    MODERATE = 1
    HARD = 2
    EXCLUDED = 3

    @staticmethod
    def fromName(name):
        try:
            return Difficulty[str(name).strip().upper()]
        except KeyError:
            raise ParameterError("unknown difficulty '" + str(name) + "'")

    @property
    def label(self):
        return self.name.lower()


EVALUATED_DIFFICULTIES = [Difficulty.EASY, Difficulty.MODERATE, Difficulty.HARD]


@dataclass(frozen=True)
class Detection:
    class_name: str
    box: OrientedBox3D
    score: float
    orientation: float  # global yaw, radians
    bbox2d: Optional[Tuple[float, float, float, float]] = None

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise ParameterError("detection score must be finite")
        object.__setattr__(self, "orientation", wrap_angle(self.orientation))


@dataclass
class FrameMatching:
    """
    one frame, one class: the evaluated detections as (score, true positive, yaw delta)
    and the number of ground truths that must be found
    """

    scores: List[float] = field(default_factory=list)
    true_positive: List[bool] = field(default_factory=list)
    orientation_deltas: List[float] = field(default_factory=list)  # 0.0 for false positives
    matched_gt: List[int] = field(default_factory=list)  # -1 for false positives
    ignored_detections: List[int] = field(default_factory=list)
    n_gt: int = 0

    def addDetection(self, score, isTruePositive, orientationDelta=0.0, gtIndex=-1):
        self.scores.append(float(score))
        self.true_positive.append(bool(isTruePositive))
        self.orientation_deltas.append(float(orientationDelta))
        self.matched_gt.append(int(gtIndex))

    @property
    def n_true_positive(self):
        return int(sum(self.true_positive))

    @property
    def n_false_positive(self):
        return len(self.true_positive) - self.n_true_positive

    @property
    def n_false_negative(self):
        return self.n_gt - self.n_true_positive


@dataclass(frozen=True, eq=False)
class PrCurve:
    """
    one point per distinct detection score, descending; similarity is the orientation-weighted
    precision used for heading similarity
    """

    recall: np.ndarray
    precision: np.ndarray
    similarity: np.ndarray
    thresholds: np.ndarray
    orientation_deltas: np.ndarray  # of the true positives, in sweep order
    n_gt: int

    def __len__(self):
        return len(self.recall)

    @staticmethod
    def empty(n_gt=0):
        nothing = np.zeros(0)
        return PrCurve(nothing, nothing, nothing, nothing, nothing, n_gt)


@dataclass(frozen=True)
class EvaluationResult:
    class_name: str
    difficulty: Difficulty
    iou_space: str  # "3d" or "bev"
    average_precision: float
    average_heading_similarity: float
    curve: PrCurve = field(repr=False, compare=False, default=None)
