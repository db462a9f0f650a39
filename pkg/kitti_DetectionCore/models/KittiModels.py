# coding=utf-8
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from kitti_DetectionCore.common.DetectionErrors import ParameterError
from kitti_DetectionCore.common.SettingsKeys import SettingsKeys

ORTHONORMAL_TOLERANCE = 1e-4
PLANE_NORM_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class PointCloud:
    """
    LIDAR points as an (N, 4) float32 array: x, y, z in meters (LIDAR frame: x forward,
    y left, z up) and reflectance r in [0, 1].
    """

    points: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float32)
        if points.size == 0:
            points = points.reshape(0, 4)
        if points.ndim != 2 or points.shape[1] != 4:
            raise ParameterError("point array must have shape (N, 4), got " + str(points.shape))
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def __len__(self):
        return self.points.shape[0]

    @property
    def xyz(self):
        return self.points[:, :3]

    def subset(self, mask):
        return PointCloud(self.points[mask])

    @staticmethod
    def empty():
        return PointCloud(np.zeros((0, 4), dtype=np.float32))


@dataclass(frozen=True, eq=False)
class CalibrationSet:
    p2: np.ndarray  # 3x4 camera projection, pixels
    r0: np.ndarray  # 3x3 rectification
    tr_velo_to_cam: np.ndarray  # 3x4 rigid transform, meters

    def __post_init__(self):
        p2 = np.asarray(self.p2, dtype=np.float64).reshape(3, 4)
        r0 = np.asarray(self.r0, dtype=np.float64).reshape(3, 3)
        tr = np.asarray(self.tr_velo_to_cam, dtype=np.float64).reshape(3, 4)
        for name, rotation in (("R0_rect", r0), ("Tr_velo_to_cam", tr[:, :3])):
            deviation = np.abs(rotation @ rotation.T - np.eye(3)).max()
            if deviation > ORTHONORMAL_TOLERANCE:
                raise ParameterError(
                    name + " is not orthonormal (deviation " + str(deviation) + ")"
                )
        for array in (p2, r0, tr):
            array.setflags(write=False)
        object.__setattr__(self, "p2", p2)
        object.__setattr__(self, "r0", r0)
        object.__setattr__(self, "tr_velo_to_cam", tr)

    def velo_to_rect(self):
        """
        4x4 homogeneous transform from LIDAR to rectified camera coordinates
        """
        r0 = np.eye(4)
        r0[:3, :3] = self.r0
        tr = np.eye(4)
        tr[:3, :] = self.tr_velo_to_cam
        return r0 @ tr

    @staticmethod
    def identity():
        eye34 = np.hstack([np.eye(3), np.zeros((3, 1))])
        return CalibrationSet(p2=eye34, r0=np.eye(3), tr_velo_to_cam=eye34)


@dataclass(frozen=True)
class LabeledObject:
    class_name: str
    truncation: float
    occlusion: int
    alpha: float
    bbox2d: Tuple[float, float, float, float]  # left, top, right, bottom in pixels
    dims: Tuple[float, float, float]  # h, w, l in meters
    location: Tuple[float, float, float]  # bottom centre, camera frame
    rotation_y: float

    @property
    def is_dont_care(self):
        return self.class_name == SettingsKeys.KITTI_DONT_CARE

    @property
    def bbox_height(self):
        return self.bbox2d[3] - self.bbox2d[1]


@dataclass(frozen=True)
class GroundPlane:
    """
    Plane a*x + b*y + c*z + d = 0 with a unit normal. Signed distance n.p + d is the height
    above the plane on the side the normal points to.
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        norm = float(np.sqrt(self.a * self.a + self.b * self.b + self.c * self.c))
        if abs(norm - 1.0) > PLANE_NORM_TOLERANCE:
            raise ParameterError("ground plane normal must have unit length, got " + str(norm))

    @staticmethod
    def from_coefficients(a, b, c, d):
        norm = float(np.sqrt(a * a + b * b + c * c))
        if norm == 0.0:
            raise ParameterError("ground plane normal is zero")
        return GroundPlane(a / norm, b / norm, c / norm, d / norm)

    @property
    def normal(self):
        return np.array([self.a, self.b, self.c])

    def distance(self, points):
        """
        signed height of (..., 3) points above the plane
        """
        points = np.asarray(points, dtype=np.float64)
        return points @ self.normal + self.d

    def z_at(self, x, y, height=0.0):
        """
        z coordinate of the point above (x, y) whose signed distance to the plane is `height`
        """
        if abs(self.c) < 1e-9:
            raise ParameterError("plane is vertical in z, cannot solve for height")
        return (height - self.d - self.a * np.asarray(x) - self.b * np.asarray(y)) / self.c

    def coefficients(self):
        return (self.a, self.b, self.c, self.d)


@dataclass(frozen=True, eq=False)
class KittiFrame:
    """
    one frame of the object devkit layout; plane is in the camera frame
    """

    frame_id: str
    cloud: PointCloud
    calib: CalibrationSet
    labels: Tuple[LabeledObject, ...]
    plane: GroundPlane
    plane_from_file: bool = False
