# coding=utf-8
"""
Box encodings for the second stage: axis aligned, four corners plus two plane offsets,
and eight 3D corners; box fitting from four corners and orientation resolution.
"""
import logging
import math

import numpy as np

from kitti_DetectionCore.common.DetectionErrors import DegenerateGeometryError, ParameterError
from kitti_DetectionCore.models.BoxModels import (
    EIGHT_CORNER_TARGET_SIZE,
    FOUR_CORNER_TARGET_SIZE,
    Anchor3D,
    CornerRegressionTarget,
    FittedBox,
    FourCornerBox,
    OrientationVector,
    OrientedBox3D,
    wrap_angle,
)

_logger = logging.getLogger(__name__)

assert FOUR_CORNER_TARGET_SIZE == 10
assert EIGHT_CORNER_TARGET_SIZE == 24

MIN_ORIENTATION_NORM = 1e-6
MIN_QUADRILATERAL_AREA = 1e-9

# local corner signs, counter-clockwise from (+, +)
_CORNER_SIGNS = np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])


def _rotation(yaw):
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s], [s, c]])


def corners_bev(box):
    local = _CORNER_SIGNS * np.array([box.d_x / 2.0, box.d_y / 2.0])
    return local @ _rotation(box.yaw).T + np.array([box.x, box.y])


def corners_3d(box):
    """
    (8, 3): bottom ring then top ring, both in corners_bev order
    """
    ring = corners_bev(box)
    bottom = np.hstack([ring, np.full((4, 1), box.z_bottom)])
    top = np.hstack([ring, np.full((4, 1), box.z_top)])
    return np.vstack([bottom, top])


def box_heights(box, plane):
    """
    (h_1, h_2): plane distances of the top and the bottom face at the box centroid
    """
    h1 = float(plane.distance([box.x, box.y, box.z_top]))
    h2 = float(plane.distance([box.x, box.y, box.z_bottom]))
    return h1, h2


def _closestCornerShift(proposalCorners, gtCorners):
    distances = np.linalg.norm(gtCorners - proposalCorners[0], axis=1)
    return int(np.argmin(distances))


def encode_four_corner(proposal, gt, plane):
    proposalCorners = corners_bev(proposal)
    shift = _closestCornerShift(proposalCorners, corners_bev(gt))
    gtCorners = np.roll(corners_bev(gt), -shift, axis=0)
    delta = gtCorners - proposalCorners
    proposalH1, proposalH2 = box_heights(proposal, plane)
    gtH1, gtH2 = box_heights(gt, plane)
    return CornerRegressionTarget(
        np.concatenate([delta[:, 0], delta[:, 1], [gtH1 - proposalH1, gtH2 - proposalH2]])
    )


def decode_four_corner(proposal, target, plane):
    corners = corners_bev(proposal) + np.stack([target.delta_x, target.delta_y], axis=1)
    proposalH1, proposalH2 = box_heights(proposal, plane)
    return FourCornerBox(
        corners=corners,
        h_1=proposalH1 + float(target.delta_h[0]),
        h_2=proposalH2 + float(target.delta_h[1]),
        plane=plane,
    )


def encode_eight_corner(proposal, gt):
    proposalCorners = corners_3d(proposal)
    shift = _closestCornerShift(proposalCorners[:4, :2], corners_bev(gt))
    gtCorners = corners_3d(gt)
    gtCorners = np.vstack(
        [np.roll(gtCorners[:4], -shift, axis=0), np.roll(gtCorners[4:], -shift, axis=0)]
    )
    return (gtCorners - proposalCorners).reshape(-1)


def decode_eight_corner(proposal, target):
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if target.shape != (EIGHT_CORNER_TARGET_SIZE,):
        raise ParameterError("eight corner target must have 24 values, got " + str(target.shape))
    return corners_3d(proposal) + target.reshape(8, 3)


def signed_area(polygon):
    x = polygon[:, 0]
    y = polygon[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def fit_oriented_box(fc):
    """
    Best-fit rectangle of four cyclic corners. Opposite edges point in opposite directions,
    so (e0 - e2) and the quarter-turned (e1 - e3) all point along one side; their sum is a
    length-weighted average direction theta*. The four candidate yaws cover the rectangle's
    symmetry, see FittedBox.box_for.
    """
    if fc.plane is None:
        raise ParameterError("four corner box carries no ground plane")
    corners = fc.corners
    area = signed_area(corners)
    if abs(area) < MIN_QUADRILATERAL_AREA:
        raise DegenerateGeometryError("corners are collinear (area " + str(area) + ")")
    if not fc.h_1 > fc.h_2:
        raise DegenerateGeometryError(
            "top offset " + str(fc.h_1) + " is not above bottom offset " + str(fc.h_2)
        )

    edges = np.roll(corners, -1, axis=0) - corners
    along = edges[0] - edges[2]
    across = edges[1] - edges[3]
    if area > 0:
        across = np.array([across[1], -across[0]])
    else:
        across = np.array([-across[1], across[0]])
    direction = along + across
    principal = math.atan2(direction[1], direction[0])

    u = np.array([math.cos(principal), math.sin(principal)])
    n = np.array([-u[1], u[0]])
    d_x = 0.5 * (abs(edges[0] @ u) + abs(edges[2] @ u))
    d_y = 0.5 * (abs(edges[1] @ n) + abs(edges[3] @ n))

    cx, cy = corners.mean(axis=0)
    zBottom = float(fc.plane.z_at(cx, cy, fc.h_2))
    zTop = float(fc.plane.z_at(cx, cy, fc.h_1))
    box = OrientedBox3D(
        float(cx), float(cy), 0.5 * (zBottom + zTop), d_x, d_y, zTop - zBottom, principal
    )
    candidates = tuple(
        wrap_angle(principal + offset)
        for offset in (0.0, math.pi / 2.0, math.pi, -math.pi / 2.0)
    )
    return FittedBox(box=box, candidates=candidates)


def orientation_to_vector(theta):
    return OrientationVector(math.cos(theta), math.sin(theta))


def vector_to_angle(vector):
    if not vector.norm > MIN_ORIENTATION_NORM:
        raise DegenerateGeometryError(
            "orientation vector is too short to decode (norm " + str(vector.norm) + ")"
        )
    return math.atan2(vector.y_theta, vector.x_theta)


def resolve_orientation(candidates, regressed):
    target = vector_to_angle(regressed)
    distances = np.abs(wrap_angle(np.asarray(candidates, dtype=np.float64) - target))
    return float(candidates[int(np.argmin(distances))])


def resolve_orientation_without_vector(fitted):
    """
    picks the heading along the longer side that is closest to zero yaw; without a regressed
    direction this is wrong by pi for about half of all headings
    """
    if fitted.box.d_x >= fitted.box.d_y:
        indices = (0, 2)
    else:
        indices = (1, 3)
    best = min(indices, key=lambda index: (abs(fitted.candidates[index]), index))
    return float(fitted.candidates[best])


def axis_aligned_box(box):
    ring = corners_bev(box)
    low = ring.min(axis=0)
    high = ring.max(axis=0)
    center = 0.5 * (low + high)
    size = high - low
    return Anchor3D(
        float(center[0]), float(center[1]), box.z, float(size[0]), float(size[1]), box.d_z
    )
