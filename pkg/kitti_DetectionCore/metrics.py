# coding=utf-8
"""
KITTI style evaluation: difficulty levels, greedy matching, precision/recall sweeps,
interpolated AP, average heading similarity and proposal recall.
"""
import logging
import math

import numpy as np

from kitti_DetectionCore.common.DetectionErrors import ParameterError
from kitti_DetectionCore.common.SettingsKeys import SettingsKeys
from kitti_DetectionCore.geom import iou_3d, iou_rotated_bev
from kitti_DetectionCore.kitti_io import class_token, label_to_box
from kitti_DetectionCore.models.BoxModels import wrap_angle
from kitti_DetectionCore.models.EvalModels import (
    Difficulty,
    EvaluationResult,
    FrameMatching,
    PrCurve,
)

_logger = logging.getLogger(__name__)

# easy, moderate, hard
DEFAULT_MIN_HEIGHT = (40.0, 25.0, 25.0)
DEFAULT_MAX_OCCLUSION = (0, 1, 2)
DEFAULT_MAX_TRUNCATION = (0.15, 0.30, 0.50)

EVAL_IOU_THRESHOLDS = {
    SettingsKeys.CLASS_CAR: 0.7,
    SettingsKeys.CLASS_PEDESTRIAN: 0.5,
    SettingsKeys.CLASS_CYCLIST: 0.5,
}
RECALL_IOU = 0.5
DONT_CARE_MIN_OVERLAP = 0.5
RECALL_TOLERANCE = 1e-12

IOU_SPACE_3D = "3d"
IOU_SPACE_BEV = "bev"
IOU_FUNCTIONS = {IOU_SPACE_3D: iou_3d, IOU_SPACE_BEV: iou_rotated_bev}

_GT_VALID = 0
_GT_IGNORED = 1
_GT_DONT_CARE = 2
_GT_OTHER = 3


class DifficultyTable:
    def __init__(
        self,
        minHeight=DEFAULT_MIN_HEIGHT,
        maxOcclusion=DEFAULT_MAX_OCCLUSION,
        maxTruncation=DEFAULT_MAX_TRUNCATION,
    ):
        if not (len(minHeight) == len(maxOcclusion) == len(maxTruncation) == 3):
            raise ParameterError("the difficulty table needs exactly three levels")
        self.minHeight = tuple(float(v) for v in minHeight)
        self.maxOcclusion = tuple(int(v) for v in maxOcclusion)
        self.maxTruncation = tuple(float(v) for v in maxTruncation)

    def levels(self):
        return zip(
            (Difficulty.EASY, Difficulty.MODERATE, Difficulty.HARD),
            self.minHeight,
            self.maxOcclusion,
            self.maxTruncation,
        )


DEFAULT_DIFFICULTY_TABLE = DifficultyTable()


def difficulty_of(obj, table=DEFAULT_DIFFICULTY_TABLE):
    if obj.is_dont_care:
        return Difficulty.EXCLUDED
    for level, minHeight, maxOcclusion, maxTruncation in table.levels():
        if (
            obj.bbox_height >= minHeight
            and obj.occlusion <= maxOcclusion
            and obj.truncation <= maxTruncation
        ):
            return level
    return Difficulty.EXCLUDED


def _gtStates(gts, class_name, difficulty, table):
    token = class_token(class_name) if class_name is not None else None
    neighbours = SettingsKeys.KITTI_NEIGHBOR_CLASSES.get(class_name, [])
    states = []
    for obj in gts:
        if obj.is_dont_care:
            states.append(_GT_DONT_CARE)
        elif token is None or obj.class_name == token:
            if difficulty_of(obj, table) <= difficulty:
                states.append(_GT_VALID)
            else:
                states.append(_GT_IGNORED)
        elif obj.class_name in neighbours:
            states.append(_GT_IGNORED)
        else:
            states.append(_GT_OTHER)
    return states


def _dontCareOverlap(detectionBox, region):
    left = max(detectionBox[0], region[0])
    top = max(detectionBox[1], region[1])
    right = min(detectionBox[2], region[2])
    bottom = min(detectionBox[3], region[3])
    area = (detectionBox[2] - detectionBox[0]) * (detectionBox[3] - detectionBox[1])
    if area <= 0:
        return 0.0
    return max(0.0, right - left) * max(0.0, bottom - top) / area


def match_detections(
    dets,
    gts,
    iou_fn,
    threshold,
    class_name=None,
    difficulty=Difficulty.HARD,
    table=DEFAULT_DIFFICULTY_TABLE,
    calib=None,
):
    """
    Greedy in descending score: each detection takes the unmatched valid ground truth with
    the highest IoU >= threshold. Unmatched detections overlapping an ignored ground truth
    (neighbour class or harder than `difficulty`) or lying half inside a DontCare region are
    dropped; the rest are false positives. With class_name None every non-DontCare ground
    truth counts.
    """
    states = _gtStates(gts, class_name, difficulty, table)
    boxes = [
        label_to_box(obj, calib) if state in (_GT_VALID, _GT_IGNORED) else None
        for obj, state in zip(gts, states)
    ]
    validIndices = [index for index, state in enumerate(states) if state == _GT_VALID]
    ignoredIndices = [index for index, state in enumerate(states) if state == _GT_IGNORED]
    dontCareRegions = [gts[index].bbox2d for index, state in enumerate(states) if state == _GT_DONT_CARE]

    matching = FrameMatching(n_gt=len(validIndices))
    matched = set()
    order = sorted(range(len(dets)), key=lambda index: (-dets[index].score, index))
    for detIndex in order:
        detection = dets[detIndex]
        bestIou = -1.0
        bestGt = -1
        for gtIndex in validIndices:
            if gtIndex in matched:
                continue
            overlap = iou_fn(detection.box, boxes[gtIndex])
            if overlap >= threshold and overlap > bestIou:
                bestIou = overlap
                bestGt = gtIndex
        if bestGt >= 0:
            matched.add(bestGt)
            delta = wrap_angle(detection.orientation - boxes[bestGt].yaw)
            matching.addDetection(detection.score, True, delta, bestGt)
            continue
        if any(iou_fn(detection.box, boxes[index]) >= threshold for index in ignoredIndices):
            matching.ignored_detections.append(detIndex)
            continue
        if detection.bbox2d is not None and any(
            _dontCareOverlap(detection.bbox2d, region) >= DONT_CARE_MIN_OVERLAP
            for region in dontCareRegions
        ):
            matching.ignored_detections.append(detIndex)
            continue
        matching.addDetection(detection.score, False)
    return matching


def pr_curve(matchings):
    """
    one point per distinct score: every detection scoring at least that much is accepted
    """
    n_gt = sum(matching.n_gt for matching in matchings)
    scores = np.array([s for matching in matchings for s in matching.scores], dtype=np.float64)
    if n_gt == 0 or scores.shape[0] == 0:
        return PrCurve.empty(n_gt)
    truePositive = np.array(
        [tp for matching in matchings for tp in matching.true_positive], dtype=bool
    )
    deltas = np.array(
        [d for matching in matchings for d in matching.orientation_deltas], dtype=np.float64
    )

    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    scores = scores[order]
    truePositive = truePositive[order]
    deltas = deltas[order]
    similarityWeight = np.where(truePositive, (1.0 + np.cos(deltas)) / 2.0, 0.0)

    cumulativeTp = np.cumsum(truePositive)
    cumulativeCount = np.arange(1, scores.shape[0] + 1)
    cumulativeSimilarity = np.cumsum(similarityWeight)
    # last detection of every run of equal scores
    groupEnds = np.append(np.nonzero(scores[1:] != scores[:-1])[0], scores.shape[0] - 1)

    return PrCurve(
        recall=cumulativeTp[groupEnds] / float(n_gt),
        precision=cumulativeTp[groupEnds] / cumulativeCount[groupEnds],
        similarity=cumulativeSimilarity[groupEnds] / cumulativeCount[groupEnds],
        thresholds=scores[groupEnds],
        orientation_deltas=deltas[truePositive],
        n_gt=n_gt,
    )


def recall_points(mode):
    if mode == 11:
        return np.linspace(0.0, 1.0, 11)
    if mode == 40:
        return np.linspace(1.0 / 40.0, 1.0, 40)
    raise ParameterError("interpolation must be 11 or 40 points, got " + str(mode))


def _interpolatedMean(recall, values, mode):
    points = recall_points(mode)
    if len(recall) == 0:
        return 0.0
    total = 0.0
    for r in points:
        reached = recall >= r - RECALL_TOLERANCE
        if np.any(reached):
            total += float(values[reached].max())
    return total / len(points)


def average_precision(curve, mode=11):
    return _interpolatedMean(curve.recall, curve.precision, mode)


def average_heading_similarity(curve, mode=11):
    return _interpolatedMean(curve.recall, curve.similarity, mode)


def recall_curve(proposals, gts, n_values, iou_fn=iou_3d, threshold=RECALL_IOU):
    """
    proposals[f]: frame f's boxes ranked best first; gts[f]: the frame's ground truth boxes
    already filtered to the wanted class and difficulty. Returns [(n, recall)].
    """
    if len(proposals) != len(gts):
        raise ParameterError(
            "got proposals for " + str(len(proposals)) + " frames, gt for " + str(len(gts))
        )
    firstCover = []
    for frameProposals, frameGts in zip(proposals, gts):
        for gt in frameGts:
            first = math.inf
            for rank, proposal in enumerate(frameProposals):
                if iou_fn(proposal, gt) >= threshold:
                    first = rank
                    break
            firstCover.append(first)
    firstCover = np.array(firstCover, dtype=np.float64)
    result = []
    for n in n_values:
        if firstCover.shape[0] == 0:
            result.append((int(n), 0.0))
        else:
            result.append((int(n), float(np.count_nonzero(firstCover < n)) / firstCover.shape[0]))
    return result


def recall_ground_truth(labels, class_name, difficulty, table=DEFAULT_DIFFICULTY_TABLE, calib=None):
    """
    boxes of the class's labels at `difficulty` or easier
    """
    token = class_token(class_name)
    return [
        label_to_box(obj, calib)
        for obj in labels
        if obj.class_name == token and difficulty_of(obj, table) <= difficulty
    ]


def evaluate_class(
    frames,
    class_name,
    difficulty,
    iou_space=IOU_SPACE_3D,
    threshold=None,
    mode=11,
    table=DEFAULT_DIFFICULTY_TABLE,
):
    """
    frames: sequence of (detections, labels, calibration or None)
    """
    if iou_space not in IOU_FUNCTIONS:
        raise ParameterError("unknown IoU space '" + str(iou_space) + "'")
    if threshold is None:
        threshold = EVAL_IOU_THRESHOLDS.get(class_name, 0.5)
    token = class_token(class_name)
    matchings = []
    for detections, labels, calib in frames:
        classDetections = [det for det in detections if det.class_name == token]
        matchings.append(
            match_detections(
                classDetections,
                labels,
                IOU_FUNCTIONS[iou_space],
                threshold,
                class_name=class_name,
                difficulty=difficulty,
                table=table,
                calib=calib,
            )
        )
    curve = pr_curve(matchings)
    result = EvaluationResult(
        class_name=class_name,
        difficulty=difficulty,
        iou_space=iou_space,
        average_precision=average_precision(curve, mode),
        average_heading_similarity=average_heading_similarity(curve, mode),
        curve=curve,
    )
    _logger.debug(
        "evaluated "
        + class_name
        + "/"
        + difficulty.label
        + "/"
        + iou_space
        + ": AP "
        + str(result.average_precision)
        + " AHS "
        + str(result.average_heading_similarity)
    )
    return result
