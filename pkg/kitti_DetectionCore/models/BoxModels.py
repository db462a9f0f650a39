# coding=utf-8
import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Optional, Tuple

import numpy as np

from kitti_DetectionCore.common.DetectionErrors import ParameterError

FOUR_CORNER_TARGET_SIZE = 10
EIGHT_CORNER_TARGET_SIZE = 24
AXIS_ALIGNED_TARGET_SIZE = 6


def wrap_angle(theta):
    """
    wraps into the half-open [-pi, pi): +pi comes back as -pi, never as +pi. Works on scalars
    and arrays.
    """
    wrapped = np.mod(np.asarray(theta, dtype=np.float64) + np.pi, 2.0 * np.pi) - np.pi
    # mod rounds up to 2 pi for inputs a hair below -pi
    wrapped = np.where(wrapped >= np.pi, wrapped - 2.0 * np.pi, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class Anchor3D:
    """
    axis aligned box: centroid (t_x, t_y, t_z), dimensions (d_x, d_y, d_z), meters
    """

    t_x: float
    t_y: float
    t_z: float
    d_x: float
    d_y: float
    d_z: float

    def __post_init__(self):
        if not (self.d_x > 0 and self.d_y > 0 and self.d_z > 0):
            raise ParameterError("anchor dimensions must be positive: " + str(self))

    def to_array(self):
        return np.array([self.t_x, self.t_y, self.t_z, self.d_x, self.d_y, self.d_z])

    @staticmethod
    def from_array(row):
        return Anchor3D(*[float(v) for v in row[:6]])

    def footprint(self):
        """
        BEV rectangle (x0, y0, x1, y1)
        """
        return (
            self.t_x - self.d_x / 2.0,
            self.t_y - self.d_y / 2.0,
            self.t_x + self.d_x / 2.0,
            self.t_y + self.d_y / 2.0,
        )


class RoiView(Enum):
    BEV = "bev"
    IMAGE = "image"


@dataclass(frozen=True)
class Roi:
    """
    rect (x0, y0, x1, y1) in normalized view coordinates; x runs along feature map columns,
    y along rows
    """

    view: RoiView
    rect: Tuple[float, float, float, float]
    degenerate: bool = False

    def __post_init__(self):
        x0, y0, x1, y1 = self.rect
        if x1 < x0 or y1 < y0:
            raise ParameterError("roi must be well-ordered: " + str(self.rect))


class AnchorLabelKind(IntEnum):
    BACKGROUND = 0
    OBJECT = 1
    IGNORE = -1


@dataclass(frozen=True)
class AnchorLabel:
    kind: AnchorLabelKind
    gt_index: Optional[int] = None
    iou: float = 0.0

    def __post_init__(self):
        if self.kind == AnchorLabelKind.OBJECT and (self.gt_index is None or self.gt_index < 0):
            raise ParameterError("object labels need a ground truth index")


@dataclass(frozen=True, eq=False)
class AnchorLabelSet:
    """
    labels of a whole anchor array; gt_indices is -1 where no object was matched
    """

    kinds: np.ndarray  # AnchorLabelKind values
    gt_indices: np.ndarray
    ious: np.ndarray  # best IoU per anchor

    def __len__(self):
        return len(self.kinds)

    def __getitem__(self, index):
        kind = AnchorLabelKind(int(self.kinds[index]))
        gtIndex = int(self.gt_indices[index]) if kind == AnchorLabelKind.OBJECT else None
        return AnchorLabel(kind, gtIndex, float(self.ious[index]))

    def count(self, kind):
        return int(np.count_nonzero(self.kinds == int(kind)))


@dataclass(frozen=True)
class OrientedBox3D:
    """
    z-up box: centroid (x, y, z), dims (d_x along the heading, d_y across, d_z vertical),
    yaw in radians measured from +x towards +y
    """

    x: float
    y: float
    z: float
    d_x: float
    d_y: float
    d_z: float
    yaw: float = 0.0

    def __post_init__(self):
        if not (self.d_x > 0 and self.d_y > 0 and self.d_z > 0):
            raise ParameterError("box dimensions must be positive: " + str(self))
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    @property
    def centroid(self):
        return np.array([self.x, self.y, self.z])

    @property
    def z_bottom(self):
        return self.z - self.d_z / 2.0

    @property
    def z_top(self):
        return self.z + self.d_z / 2.0

    def to_array(self):
        return np.array([self.x, self.y, self.z, self.d_x, self.d_y, self.d_z, self.yaw])

    @staticmethod
    def from_array(row):
        return OrientedBox3D(*[float(v) for v in row[:7]])

    @staticmethod
    def from_anchor(anchor):
        return OrientedBox3D(
            anchor.t_x, anchor.t_y, anchor.t_z, anchor.d_x, anchor.d_y, anchor.d_z, 0.0
        )


@dataclass(frozen=True, eq=False)
class FourCornerBox:
    """
    four BEV corners in cyclic order plus top (h_1) and bottom (h_2) offsets from the plane
    """

    corners: np.ndarray  # (4, 2)
    h_1: float
    h_2: float
    plane: object = None  # GroundPlane the heights refer to

    def __post_init__(self):
        corners = np.asarray(self.corners, dtype=np.float64).reshape(4, 2)
        object.__setattr__(self, "corners", corners)


@dataclass(frozen=True)
class OrientationVector:
    x_theta: float
    y_theta: float

    @property
    def norm(self):
        return math.hypot(self.x_theta, self.y_theta)


@dataclass(frozen=True, eq=False)
class CornerRegressionTarget:
    """
    (dx_1..dx_4, dy_1..dy_4, dh_1, dh_2), meters
    """

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if values.shape != (FOUR_CORNER_TARGET_SIZE,):
            raise ParameterError(
                "corner target must have " + str(FOUR_CORNER_TARGET_SIZE) + " values"
            )
        if not np.all(np.isfinite(values)):
            raise ParameterError("corner target must be finite")
        object.__setattr__(self, "values", values)

    @property
    def delta_x(self):
        return self.values[0:4]

    @property
    def delta_y(self):
        return self.values[4:8]

    @property
    def delta_h(self):
        return self.values[8:10]


@dataclass(frozen=True)
class FittedBox:
    """
    best-fit rectangle of a FourCornerBox with its four candidate yaws
    (theta*, theta* + pi/2, theta* + pi, theta* - pi/2)
    """

    box: OrientedBox3D
    candidates: Tuple[float, float, float, float] = field(default=(0.0, 0.0, 0.0, 0.0))

    def box_for(self, candidate_index):
        yaw = self.candidates[candidate_index]
        d_x, d_y = self.box.d_x, self.box.d_y
        if candidate_index % 2 == 1:
            d_x, d_y = d_y, d_x
        return OrientedBox3D(self.box.x, self.box.y, self.box.z, d_x, d_y, self.box.d_z, yaw)
