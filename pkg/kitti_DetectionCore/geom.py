# coding=utf-8
import logging
import math

import numpy as np

from kitti_DetectionCore.box_codec import corners_bev, signed_area
from kitti_DetectionCore.common.DetectionErrors import ParameterError

_logger = logging.getLogger(__name__)

CLIP_EPSILON = 1e-12
MIN_POLYGON_AREA = 1e-12

# second stage output
DETECTION_NMS_IOU = 0.01
DETECTION_KEEP = 100


################################################################################################ IoU
def _rectArea(rect):
    return max(0.0, rect[2] - rect[0]) * max(0.0, rect[3] - rect[1])


def iou_axis_aligned(a, b):
    """
    rectangles as (x0, y0, x1, y1)
    """
    width = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    height = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    intersection = width * height
    union = _rectArea(a) + _rectArea(b) - intersection
    if union <= 0.0:
        return 0.0
    return float(intersection / union)


def iou_axis_aligned_matrix(a, b):
    """
    (N, 4) x (M, 4) -> (N, M)
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    width = np.maximum(
        0.0, np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    )
    height = np.maximum(
        0.0, np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    )
    intersection = width * height
    areaA = np.maximum(0.0, a[:, 2] - a[:, 0]) * np.maximum(0.0, a[:, 3] - a[:, 1])
    areaB = np.maximum(0.0, b[:, 2] - b[:, 0]) * np.maximum(0.0, b[:, 3] - b[:, 1])
    union = areaA[:, None] + areaB[None, :] - intersection
    result = np.zeros_like(intersection)
    np.divide(intersection, union, out=result, where=union > 0.0)
    return result


def polygon_area(polygon):
    if len(polygon) < 3:
        return 0.0
    area = abs(signed_area(np.asarray(polygon, dtype=np.float64)))
    if area < MIN_POLYGON_AREA:
        return 0.0
    return area


def _lineIntersection(p, q, a, b):
    """
    segment p-q against the infinite line through a-b
    """
    r = q - p
    s = b - a
    denominator = r[0] * s[1] - r[1] * s[0]
    if denominator == 0.0:
        return p
    t = ((a[0] - p[0]) * s[1] - (a[1] - p[1]) * s[0]) / denominator
    return p + t * r


def clip_polygon(subject, clip):
    """
    Sutherland-Hodgman: the part of convex `subject` inside convex `clip`
    """
    clip = np.asarray(clip, dtype=np.float64)
    if signed_area(clip) < 0:
        clip = clip[::-1]
    output = [np.asarray(p, dtype=np.float64) for p in subject]
    for k in range(len(clip)):
        if len(output) == 0:
            break
        a = clip[k]
        b = clip[(k + 1) % len(clip)]
        edge = b - a

        def inside(point):
            return edge[0] * (point[1] - a[1]) - edge[1] * (point[0] - a[0]) >= -CLIP_EPSILON

        candidates = output
        output = []
        previous = candidates[-1]
        for current in candidates:
            if inside(current):
                if not inside(previous):
                    output.append(_lineIntersection(previous, current, a, b))
                output.append(current)
            elif inside(previous):
                output.append(_lineIntersection(previous, current, a, b))
            previous = current
    return np.array(output).reshape(-1, 2)


def _intersectionBev(a, b):
    reach = math.hypot(a.d_x, a.d_y) / 2.0 + math.hypot(b.d_x, b.d_y) / 2.0
    if math.hypot(a.x - b.x, a.y - b.y) > reach:
        return 0.0
    return polygon_area(clip_polygon(corners_bev(a), corners_bev(b)))


def iou_rotated_bev(a, b):
    intersection = _intersectionBev(a, b)
    union = a.d_x * a.d_y + b.d_x * b.d_y - intersection
    if union <= 0.0:
        return 0.0
    return float(min(1.0, max(0.0, intersection / union)))


def iou_3d(a, b):
    overlap = min(a.z_top, b.z_top) - max(a.z_bottom, b.z_bottom)
    if overlap <= 0.0:
        return 0.0
    intersection = _intersectionBev(a, b) * overlap
    union = a.d_x * a.d_y * a.d_z + b.d_x * b.d_y * b.d_z - intersection
    if union <= 0.0:
        return 0.0
    return float(min(1.0, max(0.0, intersection / union)))


################################################################################################ NMS
def _checkNmsArguments(boxCount, scores, threshold):
    if boxCount != len(scores):
        raise ParameterError(
            "got " + str(boxCount) + " boxes but " + str(len(scores)) + " scores"
        )
    if not 0.0 <= threshold <= 1.0:
        raise ParameterError("NMS threshold must lie in [0, 1], got " + str(threshold))


def nms(boxes, scores, iou_fn, threshold, max_keep):
    """
    greedy: highest score first (lower index on ties); a box survives when its IoU with every
    kept box is <= threshold
    """
    _checkNmsArguments(len(boxes), scores, threshold)
    order = sorted(range(len(boxes)), key=lambda index: (-scores[index], index))
    kept = []
    for index in order:
        if len(kept) >= max_keep:
            break
        if all(iou_fn(boxes[keptIndex], boxes[index]) <= threshold for keptIndex in kept):
            kept.append(index)
    return kept


def nms_axis_aligned(rects, scores, threshold, max_keep):
    """
    nms with iou_axis_aligned over (x0, y0, x1, y1) rectangles, vectorized per kept box; same
    ordering, tie-break and keep rule as nms. select_proposals runs it over whole anchor grids.
    """
    rects = np.asarray(rects, dtype=np.float64).reshape(-1, 4)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    _checkNmsArguments(rects.shape[0], scores, threshold)
    x0, y0, x1, y1 = rects[:, 0], rects[:, 1], rects[:, 2], rects[:, 3]
    areas = np.maximum(0.0, x1 - x0) * np.maximum(0.0, y1 - y0)
    order = np.lexsort((np.arange(len(scores)), -scores))

    kept = []
    while order.size > 0 and len(kept) < max_keep:
        i = order[0]
        kept.append(int(i))
        rest = order[1:]
        width = np.maximum(0.0, np.minimum(x1[i], x1[rest]) - np.maximum(x0[i], x0[rest]))
        height = np.maximum(0.0, np.minimum(y1[i], y1[rest]) - np.maximum(y0[i], y0[rest]))
        intersection = width * height
        union = areas[i] + areas[rest] - intersection
        overlap = np.zeros_like(intersection)
        np.divide(intersection, union, out=overlap, where=union > 0.0)
        order = rest[overlap <= threshold]
    return kept


################################################################################################ feature crops
def _samplePositions(start, end, cells, count):
    """
    align-corners sampling: first and last sample on the roi edges
    """
    if count == 1:
        return np.array([0.5 * (start + end) * (cells - 1)])
    steps = np.arange(count, dtype=np.float64)
    return start * (cells - 1) + steps * ((end - start) * (cells - 1)) / (count - 1)


def crop_and_resize(feature_map, roi, out_size):
    """
    bilinear (h, w, D) crop of an (H, W, D) map; roi x runs along W, y along H;
    samples outside the map read zero
    """
    feature_map = np.asarray(feature_map, dtype=np.float64)
    if feature_map.ndim != 3:
        raise ParameterError("feature map must be H x W x D, got " + str(feature_map.shape))
    x0, y0, x1, y1 = roi.rect
    if roi.degenerate or not (x1 > x0 and y1 > y0):
        raise ParameterError("cannot crop a degenerate roi " + str(roi.rect))
    outHeight, outWidth = out_size
    if outHeight < 1 or outWidth < 1:
        raise ParameterError("crop size must be positive, got " + str(out_size))

    mapHeight, mapWidth = feature_map.shape[:2]
    ys = _samplePositions(y0, y1, mapHeight, outHeight)
    xs = _samplePositions(x0, x1, mapWidth, outWidth)
    yFloor = np.floor(ys).astype(np.int64)
    xFloor = np.floor(xs).astype(np.int64)
    yWeight = ys - yFloor
    xWeight = xs - xFloor

    crop = np.zeros((outHeight, outWidth, feature_map.shape[2]))
    for dy in (0, 1):
        rows = yFloor + dy
        rowWeight = yWeight if dy else 1.0 - yWeight
        rowValid = (rows >= 0) & (rows < mapHeight)
        for dx in (0, 1):
            columns = xFloor + dx
            columnWeight = xWeight if dx else 1.0 - xWeight
            columnValid = (columns >= 0) & (columns < mapWidth)
            values = feature_map[
                np.clip(rows, 0, mapHeight - 1)[:, None], np.clip(columns, 0, mapWidth - 1)[None, :]
            ]
            weight = (rowWeight * rowValid)[:, None] * (columnWeight * columnValid)[None, :]
            crop += weight[:, :, None] * values
    return crop


def fuse_mean(crops):
    crops = [np.asarray(crop, dtype=np.float64) for crop in crops]
    if len(crops) == 0:
        raise ParameterError("nothing to fuse")
    shape = crops[0].shape
    for crop in crops[1:]:
        if crop.shape != shape:
            raise ParameterError(
                "crop shapes differ: " + str(shape) + " and " + str(crop.shape)
            )
    total = crops[0].copy()
    for crop in crops[1:]:
        total = total + crop
    return total / len(crops)
