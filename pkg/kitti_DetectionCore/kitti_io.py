# coding=utf-8
"""
KITTI object devkit formats: velodyne scans, calibration, labels, detections and road planes,
plus the camera projection and the conversions between camera-frame labels and z-up boxes.
"""
import logging
import math

import numpy as np

from kitti_DetectionCore.common.DetectionErrors import (
    MalformedInputError,
    ParameterError,
    lineError,
)
from kitti_DetectionCore.common.SettingsKeys import SettingsKeys
from kitti_DetectionCore.models.BoxModels import OrientedBox3D, wrap_angle
from kitti_DetectionCore.models.EvalModels import Detection
from kitti_DetectionCore.models.KittiModels import (
    CalibrationSet,
    GroundPlane,
    LabeledObject,
    PointCloud,
)

_logger = logging.getLogger(__name__)

POINT_RECORD_BYTES = 16
DEFAULT_SENSOR_HEIGHT = 1.73
LABEL_FIELD_COUNT = 15

# key -> number of row-major values
CALIBRATION_KEYS = {"P2": 12, "R0_rect": 9, "Tr_velo_to_cam": 12}


def _asLines(text):
    if text is None:
        return []
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    if isinstance(text, str):
        return text.splitlines()
    return list(text)


################################################################################################ point clouds
def load_point_cloud(data):
    if len(data) % POINT_RECORD_BYTES != 0:
        raise MalformedInputError(
            "point cloud length "
            + str(len(data))
            + " is not a multiple of "
            + str(POINT_RECORD_BYTES)
            + " bytes"
        )
    points = np.frombuffer(bytes(data), dtype="<f4").reshape(-1, 4)
    return PointCloud(points.astype(np.float32))


def serialize_point_cloud(cloud):
    return np.ascontiguousarray(cloud.points, dtype="<f4").tobytes()


################################################################################################ calibration
def load_calibration(text):
    values = {}
    for lineNumber, line in enumerate(_asLines(text), start=1):
        if ":" not in line:
            continue
        key, _, rest = line.partition(":")
        key = key.strip()
        if key not in CALIBRATION_KEYS:
            continue
        try:
            numbers = [float(token) for token in rest.split()]
        except ValueError:
            raise MalformedInputError(lineError(lineNumber, "non-numeric value for '" + key + "'"))
        if len(numbers) != CALIBRATION_KEYS[key]:
            raise MalformedInputError(
                lineError(
                    lineNumber,
                    "'"
                    + key
                    + "' expects "
                    + str(CALIBRATION_KEYS[key])
                    + " values, got "
                    + str(len(numbers)),
                )
            )
        values[key] = numbers

    missing = [key for key in CALIBRATION_KEYS if key not in values]
    if len(missing) > 0:
        raise MalformedInputError("calibration is missing " + ", ".join(missing))
    return CalibrationSet(
        p2=np.array(values["P2"]).reshape(3, 4),
        r0=np.array(values["R0_rect"]).reshape(3, 3),
        tr_velo_to_cam=np.array(values["Tr_velo_to_cam"]).reshape(3, 4),
    )


def velo_to_camera(points, calib):
    """
    (N, 3) LIDAR points -> (N, 3) rectified camera coordinates
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    transform = calib.velo_to_rect()
    return points @ transform[:3, :3].T + transform[:3, 3]


def camera_to_velo(points, calib):
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    transform = np.linalg.inv(calib.velo_to_rect())
    return points @ transform[:3, :3].T + transform[:3, 3]


def project_points_to_image(points, calib):
    """
    (N, 3) LIDAR points -> ((N, 2) pixel coordinates, (N,) valid flags). Points with
    camera depth <= 0 are flagged invalid and get NaN coordinates.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    rect = velo_to_camera(points, calib)
    homogeneous = np.hstack([rect, np.ones((rect.shape[0], 1))]) @ calib.p2.T
    valid = (rect[:, 2] > 0) & (homogeneous[:, 2] > 0)
    uv = np.full((points.shape[0], 2), np.nan)
    uv[valid] = homogeneous[valid, :2] / homogeneous[valid, 2:3]
    return uv, valid


def project_to_image(cloud, calib):
    return project_points_to_image(cloud.xyz, calib)


def filter_fov(cloud, calib, image_size, bev_extents):
    if len(cloud) == 0:
        return cloud
    width, height = image_size
    uv, valid = project_to_image(cloud, calib)
    inImage = np.zeros(len(cloud), dtype=bool)
    inImage[valid] = (
        (uv[valid, 0] >= 0) & (uv[valid, 0] < width) & (uv[valid, 1] >= 0) & (uv[valid, 1] < height)
    )
    xyz = cloud.xyz
    keep = inImage & bev_extents.contains(xyz[:, 0], xyz[:, 1])
    _logger.debug("FOV crop kept " + str(int(keep.sum())) + " of " + str(len(cloud)) + " points")
    return cloud.subset(keep)


################################################################################################ labels
def _parseLabelFields(parts, lineNumber):
    try:
        return LabeledObject(
            class_name=parts[0],
            truncation=float(parts[1]),
            occlusion=int(float(parts[2])),
            alpha=float(parts[3]),
            bbox2d=tuple(float(v) for v in parts[4:8]),
            dims=tuple(float(v) for v in parts[8:11]),
            location=tuple(float(v) for v in parts[11:14]),
            rotation_y=float(parts[14]),
        )
    except ValueError as error:
        raise MalformedInputError(lineError(lineNumber, "bad label field: " + str(error)))


def load_labels(text):
    result = []
    for lineNumber, line in enumerate(_asLines(text), start=1):
        parts = line.split()
        if len(parts) == 0:
            continue
        if len(parts) < LABEL_FIELD_COUNT:
            raise MalformedInputError(
                lineError(
                    lineNumber,
                    "expected at least "
                    + str(LABEL_FIELD_COUNT)
                    + " fields, got "
                    + str(len(parts)),
                )
            )
        labeledObject = _parseLabelFields(parts, lineNumber)
        left, top, right, bottom = labeledObject.bbox2d
        if not (right > left and bottom > top):
            raise MalformedInputError(lineError(lineNumber, "2D box is not well-ordered"))
        if not labeledObject.is_dont_care and min(labeledObject.dims) <= 0:
            raise MalformedInputError(lineError(lineNumber, "dimensions must be positive"))
        result.append(labeledObject)
    return result


def load_detections(text, calib=None):
    """
    label lines with a 16th score field (1.0 when absent); DontCare lines are skipped
    """
    result = []
    for lineNumber, line in enumerate(_asLines(text), start=1):
        parts = line.split()
        if len(parts) == 0:
            continue
        if len(parts) < LABEL_FIELD_COUNT:
            raise MalformedInputError(
                lineError(lineNumber, "expected at least 15 fields, got " + str(len(parts)))
            )
        labeledObject = _parseLabelFields(parts, lineNumber)
        if labeledObject.is_dont_care:
            continue
        score = 1.0
        if len(parts) > LABEL_FIELD_COUNT:
            try:
                score = float(parts[LABEL_FIELD_COUNT])
            except ValueError:
                raise MalformedInputError(lineError(lineNumber, "bad score '" + parts[15] + "'"))
        try:
            box = label_to_box(labeledObject, calib)
        except ParameterError as error:
            raise MalformedInputError(lineError(lineNumber, str(error)))
        result.append(
            Detection(
                class_name=labeledObject.class_name,
                box=box,
                score=score,
                orientation=box.yaw,
                bbox2d=labeledObject.bbox2d,
            )
        )
    return result


def label_to_box(labeledObject, calib=None):
    """
    camera-frame label (bottom centre, rotation_y about y-down) -> z-up OrientedBox3D in the
    LIDAR frame. Without calibration the nominal axis permutation X = z, Y = -x, Z = -y is used.
    """
    if labeledObject.is_dont_care:
        raise ParameterError("DontCare regions have no 3D box")
    h, w, l = labeledObject.dims
    ry = labeledObject.rotation_y
    location = np.array(labeledObject.location, dtype=np.float64)
    if calib is None:
        x, y, z = location[2], -location[0], -location[1] + h / 2.0
        yaw = -ry - math.pi / 2.0
    else:
        bottomAndTop = camera_to_velo(
            np.vstack([location, location + np.array([0.0, -h, 0.0])]), calib
        )
        x, y, z = bottomAndTop.mean(axis=0)
        rotation = np.linalg.inv(calib.velo_to_rect())[:3, :3]
        heading = rotation @ np.array([math.cos(ry), 0.0, -math.sin(ry)])
        yaw = math.atan2(heading[1], heading[0])
    return OrientedBox3D(float(x), float(y), float(z), l, w, h, yaw)


def box_to_label(box, class_name, calib=None, bbox2d=(0.0, 0.0, 0.0, 0.0)):
    """
    inverse of label_to_box; rotation_y is the yaw converted to the camera frame
    """
    if calib is None:
        location = (-box.y, -(box.z - box.d_z / 2.0), box.x)
        ry = wrap_angle(-box.yaw - math.pi / 2.0)
    else:
        bottom = velo_to_camera([[box.x, box.y, box.z - box.d_z / 2.0]], calib)[0]
        location = tuple(float(v) for v in bottom)
        rotation = calib.velo_to_rect()[:3, :3]
        heading = rotation @ np.array([math.cos(box.yaw), math.sin(box.yaw), 0.0])
        ry = wrap_angle(math.atan2(-heading[2], heading[0]))
    alpha = wrap_angle(ry - math.atan2(location[0], location[2]))
    return LabeledObject(
        class_name=class_name,
        truncation=0.0,
        occlusion=0,
        alpha=alpha,
        bbox2d=tuple(float(v) for v in bbox2d),
        dims=(box.d_z, box.d_y, box.d_x),
        location=tuple(float(v) for v in location),
        rotation_y=ry,
    )


################################################################################################ ground planes
def load_ground_plane(text):
    """
    KITTI planes layout: header lines, then one line with the four coefficients
    """
    coefficients = None
    for line in _asLines(text):
        parts = line.split()
        if len(parts) != 4:
            continue
        try:
            coefficients = [float(v) for v in parts]
        except ValueError:
            continue
    if coefficients is None:
        raise MalformedInputError("no line with four plane coefficients found")
    return GroundPlane.from_coefficients(*coefficients)


def default_ground_plane(sensor_height=DEFAULT_SENSOR_HEIGHT):
    """
    camera frame, y down: the road lies sensor_height below the camera
    """
    return GroundPlane(0.0, -1.0, 0.0, float(sensor_height))


def ground_plane_in_lidar(plane, calib):
    transform = calib.velo_to_rect()
    rotation = transform[:3, :3]
    translation = transform[:3, 3]
    normal = rotation.T @ plane.normal
    offset = float(plane.normal @ translation + plane.d)
    if normal[2] < 0:
        normal = -normal
        offset = -offset
    return GroundPlane.from_coefficients(normal[0], normal[1], normal[2], offset)


def to_ground_relative(cloud, plane):
    """
    replaces z by the signed height above `plane` (LIDAR frame)
    """
    if len(cloud) == 0:
        return cloud
    points = np.array(cloud.points, dtype=np.float32)
    points[:, 2] = plane.distance(cloud.xyz.astype(np.float64))
    return PointCloud(points)


def class_token(class_name):
    """
    config class name -> KITTI label token; KITTI tokens pass through
    """
    return SettingsKeys.KITTI_CLASS_NAMES.get(class_name, class_name)
