# coding=utf-8
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from kitti_DetectionCore.common.DetectionErrors import ParameterError


def _round_half_up(value):
    return int(math.floor(value + 0.5))


@dataclass(frozen=True)
class BevExtents:
    """
    LIDAR-frame crop: x forward in [x_min, x_max), y lateral in [y_min, y_max).
    Grid axis 0 runs along y (W cells), axis 1 along x (H cells).
    """

    x_min: float = 0.0
    x_max: float = 70.0
    y_min: float = -40.0
    y_max: float = 40.0

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ParameterError("BEV extents must be well-ordered: " + str(self))

    def grid_shape(self, resolution):
        """
        (W, H) = (cells along y, cells along x), round-half-up
        """
        if not resolution > 0:
            raise ParameterError("resolution must be positive, got " + str(resolution))
        width = _round_half_up((self.y_max - self.y_min) / resolution)
        height = _round_half_up((self.x_max - self.x_min) / resolution)
        return width, height

    def contains(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        return (x >= self.x_min) & (x < self.x_max) & (y >= self.y_min) & (y < self.y_max)

    def cell_indices(self, x, y, resolution):
        """
        floor cell indices (i along y, j along x); points on a cell edge belong to the cell
        that starts at that edge
        """
        i = np.floor((np.asarray(y, dtype=np.float64) - self.y_min) / resolution).astype(np.int64)
        j = np.floor((np.asarray(x, dtype=np.float64) - self.x_min) / resolution).astype(np.int64)
        return i, j


@dataclass(frozen=True, eq=False)
class BevMap:
    grid: np.ndarray  # (W, H, n_slices + 1)
    extents: BevExtents
    resolution: float
    slice_bounds: Tuple[float, ...]

    @property
    def shape(self):
        return self.grid.shape

    @property
    def n_slices(self):
        return len(self.slice_bounds) - 1

    def height_channel(self, k):
        return self.grid[:, :, k]

    @property
    def density_channel(self):
        return self.grid[:, :, self.n_slices]


@dataclass(frozen=True, eq=False)
class OccupancyIntegral:
    """
    (W+1, H+1) summed-area table: table[i, j] counts the points whose cell indices are
    below (i, j) on both axes.

    points holds the xy of the counted points ordered by flat cell index i * H + j;
    the points of cell c are points[cell_starts[c]:cell_starts[c + 1]].
    """

    table: np.ndarray
    extents: BevExtents
    resolution: float
    points: np.ndarray
    cell_starts: np.ndarray

    @property
    def cell_shape(self):
        return self.table.shape[0] - 1, self.table.shape[1] - 1

    @property
    def total(self):
        return int(self.table[-1, -1])


@dataclass(frozen=True, eq=False)
class PreparedFrame:
    """
    FOV-cropped cloud with heights above ground, its BEV map and occupancy integral;
    lidar_plane is the ground plane in the LIDAR frame
    """

    frame_id: str
    point_count: int
    fov_cloud: object  # PointCloud, LIDAR frame
    ground_cloud: object  # PointCloud, z = height above lidar_plane
    lidar_plane: object  # GroundPlane
    bev_map: BevMap
    integral: OccupancyIntegral
