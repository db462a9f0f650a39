# coding=utf-8
"""
3D anchors on a regular BEV grid. Anchor sets are (N, 6) arrays with the columns
tx, ty, tz, dx, dy, dz; single anchors are Anchor3D values.
"""
import logging

import numpy as np
from sklearn.cluster import KMeans

from kitti_DetectionCore import bev
from kitti_DetectionCore.box_codec import axis_aligned_box, corners_3d
from kitti_DetectionCore.common.DetectionErrors import ParameterError
from kitti_DetectionCore.common.SettingsKeys import SettingsKeys
from kitti_DetectionCore.geom import iou_axis_aligned_matrix, iou_rotated_bev, nms_axis_aligned
from kitti_DetectionCore.kitti_io import class_token, project_points_to_image
from kitti_DetectionCore.models.BoxModels import (
    Anchor3D,
    AnchorLabelKind,
    AnchorLabelSet,
    OrientedBox3D,
    Roi,
    RoiView,
)

_logger = logging.getLogger(__name__)

ANCHOR_COLUMNS = ["tx", "ty", "tz", "dx", "dy", "dz"]
DEFAULT_STRIDE = 0.5
CELL_EDGE_EPSILON = 1e-9  # in cells

# class -> (background below, object at or above)
LABEL_IOU_THRESHOLDS = {
    SettingsKeys.CLASS_CAR: (0.3, 0.5),
    SettingsKeys.CLASS_PEDESTRIAN: (0.3, 0.45),
    SettingsKeys.CLASS_CYCLIST: (0.3, 0.45),
}
REGRESSION_MIN_IOU = {
    SettingsKeys.CLASS_CAR: 0.65,
    SettingsKeys.CLASS_PEDESTRIAN: 0.55,
    SettingsKeys.CLASS_CYCLIST: 0.55,
}
PROPOSAL_NMS_IOU = 0.8
PROPOSAL_KEEP_TRAINING = 1024
PROPOSAL_KEEP_INFERENCE = {
    SettingsKeys.CLASS_CAR: 300,
    SettingsKeys.CLASS_PEDESTRIAN: 1024,
    SettingsKeys.CLASS_CYCLIST: 1024,
}
KMEANS_MAX_ITERATIONS = 100
KMEANS_TOLERANCE = 1e-8


################################################################################################ clustering
def _farthestPointSeeds(samples, k):
    mean = samples.mean(axis=0)
    chosen = [int(np.argmin(np.linalg.norm(samples - mean, axis=1)))]
    distances = np.linalg.norm(samples - samples[chosen[0]], axis=1)
    while len(chosen) < k:
        nextIndex = int(np.argmax(distances))
        chosen.append(nextIndex)
        distances = np.minimum(distances, np.linalg.norm(samples - samples[nextIndex], axis=1))
    return samples[chosen]


def cluster_dimensions(labels, class_name, k):
    """
    k (d_x, d_y, d_z) = (l, w, h) centroids of the class's label dimensions, smallest volume first
    """
    if k < 1:
        raise ParameterError("need at least one cluster, got k=" + str(k))
    token = class_token(class_name)
    samples = np.array(
        [
            (obj.dims[2], obj.dims[1], obj.dims[0])
            for obj in labels
            if obj.class_name == token and not obj.is_dont_care
        ],
        dtype=np.float64,
    ).reshape(-1, 3)
    if samples.shape[0] < k:
        raise ParameterError(
            "clustering "
            + str(k)
            + " sizes for '"
            + class_name
            + "' needs at least "
            + str(k)
            + " samples, got "
            + str(samples.shape[0])
        )
    kmeans = KMeans(
        n_clusters=k,
        init=_farthestPointSeeds(samples, k),
        n_init=1,
        max_iter=KMEANS_MAX_ITERATIONS,
        tol=KMEANS_TOLERANCE,
    )
    kmeans.fit(samples)
    centroids = kmeans.cluster_centers_
    order = np.argsort(np.prod(centroids, axis=1), kind="stable")
    _logger.debug(
        "clustered " + str(samples.shape[0]) + " '" + class_name + "' samples into " + str(k)
    )
    return [tuple(float(v) for v in centroids[index]) for index in order]


################################################################################################ grid
def _axisCenters(low, high, stride):
    candidates = low + stride * (np.arange(int(np.ceil((high - low) / stride)) + 1) + 0.5)
    return candidates[candidates < high]


def generate_anchor_grid(bev_extents, stride, sizes, ground_plane):
    """
    centres at extent_min + stride * (k + 1/2) below extent_max; each size as (d_x, d_y) and,
    unless square, (d_y, d_x); boxes rest on `ground_plane` (LIDAR frame)
    """
    if not stride > 0:
        raise ParameterError("anchor stride must be positive, got " + str(stride))
    if len(sizes) == 0:
        raise ParameterError("at least one anchor size is needed")
    xs = _axisCenters(bev_extents.x_min, bev_extents.x_max, stride)
    ys = _axisCenters(bev_extents.y_min, bev_extents.y_max, stride)
    gridX, gridY = np.meshgrid(xs, ys, indexing="ij")
    gridX = gridX.reshape(-1)
    gridY = gridY.reshape(-1)

    variants = []
    for size in sizes:
        d_x, d_y, d_z = [float(v) for v in size]
        if min(d_x, d_y, d_z) <= 0:
            raise ParameterError("anchor sizes must be positive, got " + str(size))
        variants.append((d_x, d_y, d_z))
        if d_x != d_y:
            variants.append((d_y, d_x, d_z))

    blocks = []
    for d_x, d_y, d_z in variants:
        block = np.empty((gridX.shape[0], 6))
        block[:, 0] = gridX
        block[:, 1] = gridY
        block[:, 2] = ground_plane.z_at(gridX, gridY) + d_z / 2.0
        block[:, 3] = d_x
        block[:, 4] = d_y
        block[:, 5] = d_z
        blocks.append(block)
    anchors = np.vstack(blocks)
    _logger.debug(
        "anchor grid "
        + str(len(xs))
        + "x"
        + str(len(ys))
        + " with "
        + str(len(variants))
        + " variants: "
        + str(anchors.shape[0])
    )
    return anchors


def anchor_footprints(anchors):
    """
    (N, 6) anchors -> (N, 4) BEV rectangles (x0, y0, x1, y1)
    """
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 6)
    half = anchors[:, 3:5] / 2.0
    return np.hstack([anchors[:, 0:2] - half, anchors[:, 0:2] + half])


def anchor_cell_cover(anchors, extents, resolution):
    """
    cell rectangles (i0, j0, i1, j1) of the closed footprints, clamped to the grid; i runs
    along y, j along x. Returns (cover, inner): cover holds every cell a footprint touches,
    inner only the cells lying entirely inside it.
    """
    width, height = extents.grid_shape(resolution)
    footprints = anchor_footprints(anchors)
    y0 = (footprints[:, 1] - extents.y_min) / resolution
    x0 = (footprints[:, 0] - extents.x_min) / resolution
    y1 = (footprints[:, 3] - extents.y_min) / resolution
    x1 = (footprints[:, 2] - extents.x_min) / resolution

    def clamp(values, limit):
        return np.clip(values, 0, limit).astype(np.int64)

    cover = np.stack(
        [
            clamp(np.floor(y0 - CELL_EDGE_EPSILON), width),
            clamp(np.floor(x0 - CELL_EDGE_EPSILON), height),
            clamp(np.floor(y1 + CELL_EDGE_EPSILON) + 1, width),
            clamp(np.floor(x1 + CELL_EDGE_EPSILON) + 1, height),
        ],
        axis=1,
    )
    innerI0 = clamp(np.ceil(y0 + CELL_EDGE_EPSILON), width)
    innerJ0 = clamp(np.ceil(x0 + CELL_EDGE_EPSILON), height)
    innerI1 = np.maximum(clamp(np.floor(y1 - CELL_EDGE_EPSILON), width), innerI0)
    innerJ1 = np.maximum(clamp(np.floor(x1 - CELL_EDGE_EPSILON), height), innerJ0)
    inner = np.stack([innerI0, innerJ0, innerI1, innerJ1], axis=1)
    return cover, inner


def _pointsInFootprints(footprints, cover, integral):
    """
    per footprint: does any stored point of its cover cells lie in the closed rectangle
    """
    height = integral.cell_shape[1]
    rowCounts = cover[:, 2] - cover[:, 0]
    owner = np.repeat(np.arange(cover.shape[0]), rowCounts)
    rows = cover[owner, 0] + np.arange(owner.shape[0]) - np.repeat(np.cumsum(rowCounts) - rowCounts, rowCounts)
    starts = integral.cell_starts[rows * height + cover[owner, 1]]
    lengths = integral.cell_starts[rows * height + cover[owner, 3]] - starts
    pointOwner = np.repeat(owner, lengths)
    pointIndex = np.arange(int(lengths.sum())) + np.repeat(starts - (np.cumsum(lengths) - lengths), lengths)

    xy = integral.points[pointIndex]
    bounds = footprints[pointOwner]
    inside = (
        (xy[:, 0] >= bounds[:, 0])
        & (xy[:, 0] <= bounds[:, 2])
        & (xy[:, 1] >= bounds[:, 1])
        & (xy[:, 1] <= bounds[:, 3])
    )
    result = np.zeros(cover.shape[0], dtype=bool)
    result[pointOwner[inside]] = True
    return result


def non_empty_anchor_mask(anchors, integral):
    """
    True for the anchors whose closed BEV footprint contains at least one point of the integral.
    Fully covered cells are answered by the table; only the anchors whose points all sit in
    partly covered edge cells are checked point by point.
    """
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 6)
    if anchors.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    cover, inner = anchor_cell_cover(anchors, integral.extents, integral.resolution)
    mask = bev.area_sums(integral, inner) > 0
    partial = ~mask & (bev.area_sums(integral, cover) > 0)
    if np.any(partial):
        mask[partial] = _pointsInFootprints(anchor_footprints(anchors[partial]), cover[partial], integral)
    return mask


def filter_empty_anchors(anchors, integral):
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 6)
    mask = non_empty_anchor_mask(anchors, integral)
    _logger.debug(
        "non-empty anchors: " + str(int(mask.sum())) + " of " + str(anchors.shape[0])
    )
    return anchors[mask]


################################################################################################ projections
def project_anchor_to_bev(anchor, bev_extents):
    """
    roi x is the forward fraction (feature map columns), roi y the lateral one (rows)
    """
    x0, y0, x1, y1 = anchor.footprint()
    length = bev_extents.x_max - bev_extents.x_min
    span = bev_extents.y_max - bev_extents.y_min
    rect = np.clip(
        [
            (x0 - bev_extents.x_min) / length,
            (y0 - bev_extents.y_min) / span,
            (x1 - bev_extents.x_min) / length,
            (y1 - bev_extents.y_min) / span,
        ],
        0.0,
        1.0,
    )
    degenerate = not (rect[2] > rect[0] and rect[3] > rect[1])
    return Roi(RoiView.BEV, tuple(float(v) for v in rect), degenerate)


def project_anchor_to_image(anchor, calib, image_size):
    width, height = image_size
    uv, valid = project_points_to_image(corners_3d(OrientedBox3D.from_anchor(anchor)), calib)
    if not np.any(valid):
        return Roi(RoiView.IMAGE, (0.0, 0.0, 0.0, 0.0), True)
    low = uv[valid].min(axis=0)
    high = uv[valid].max(axis=0)
    rect = np.clip([low[0] / width, low[1] / height, high[0] / width, high[1] / height], 0.0, 1.0)
    degenerate = not (rect[2] > rect[0] and rect[3] > rect[1])
    return Roi(RoiView.IMAGE, tuple(float(v) for v in rect), degenerate)


################################################################################################ labels
def _gtRects(gt_boxes):
    return np.array(
        [anchor.footprint() for anchor in (axis_aligned_box(box) for box in gt_boxes)],
        dtype=np.float64,
    ).reshape(-1, 4)


def anchor_gt_iou(anchors, gt_boxes, use_rotated_iou=False):
    """
    (N anchors, M gt) BEV IoU; axis aligned against the gt's bounding rectangle by default
    """
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 6)
    if not use_rotated_iou:
        return iou_axis_aligned_matrix(anchor_footprints(anchors), _gtRects(gt_boxes))
    result = np.zeros((anchors.shape[0], len(gt_boxes)))
    for i, row in enumerate(anchors):
        anchorBox = OrientedBox3D.from_anchor(Anchor3D.from_array(row))
        for j, gt in enumerate(gt_boxes):
            result[i, j] = iou_rotated_bev(anchorBox, gt)
    return result


def assign_anchor_labels(
    anchors,
    gt_boxes,
    class_name,
    background_iou=None,
    object_iou=None,
    use_rotated_iou=False,
):
    defaultBackground, defaultObject = LABEL_IOU_THRESHOLDS.get(class_name, (0.3, 0.5))
    background_iou = defaultBackground if background_iou is None else background_iou
    object_iou = defaultObject if object_iou is None else object_iou
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 6)
    count = anchors.shape[0]

    if len(gt_boxes) == 0:
        return AnchorLabelSet(
            kinds=np.full(count, int(AnchorLabelKind.BACKGROUND), dtype=np.int8),
            gt_indices=np.full(count, -1, dtype=np.int64),
            ious=np.zeros(count),
        )
    ious = anchor_gt_iou(anchors, gt_boxes, use_rotated_iou)
    best = ious.argmax(axis=1)
    bestIou = ious[np.arange(count), best]
    kinds = np.full(count, int(AnchorLabelKind.IGNORE), dtype=np.int8)
    kinds[bestIou < background_iou] = int(AnchorLabelKind.BACKGROUND)
    isObject = bestIou >= object_iou
    kinds[isObject] = int(AnchorLabelKind.OBJECT)
    gtIndices = np.where(isObject, best, -1).astype(np.int64)
    return AnchorLabelSet(kinds=kinds, gt_indices=gtIndices, ious=bestIou)


def compute_axis_aligned_offsets(anchor, gt):
    return gt.to_array() - anchor.to_array()


def apply_axis_aligned_offsets(anchor, offsets):
    return Anchor3D.from_array(anchor.to_array() + np.asarray(offsets, dtype=np.float64))


################################################################################################ proposals
def regression_mask(proposals, gt_boxes, class_name, min_iou=None):
    """
    proposals whose best BEV IoU with a ground truth is high enough to train box regression
    """
    min_iou = REGRESSION_MIN_IOU.get(class_name, 0.65) if min_iou is None else min_iou
    proposals = np.asarray(proposals, dtype=np.float64).reshape(-1, 6)
    if len(gt_boxes) == 0:
        return np.zeros(proposals.shape[0], dtype=bool)
    return anchor_gt_iou(proposals, gt_boxes).max(axis=1) >= min_iou


def proposal_keep_count(class_name, training, keep_training=None, keep_inference=None):
    if training:
        return PROPOSAL_KEEP_TRAINING if keep_training is None else int(keep_training)
    table = PROPOSAL_KEEP_INFERENCE if keep_inference is None else keep_inference
    return int(table.get(class_name, PROPOSAL_KEEP_TRAINING))


def select_proposals(
    anchors, scores, class_name, training=False, iou_threshold=PROPOSAL_NMS_IOU, max_keep=None
):
    """
    indices of the proposals kept by axis-aligned BEV NMS, best first
    """
    if max_keep is None:
        max_keep = proposal_keep_count(class_name, training)
    return nms_axis_aligned(anchor_footprints(anchors), scores, iou_threshold, max_keep)
