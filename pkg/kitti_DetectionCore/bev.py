# coding=utf-8
import logging
import math
import os

import numpy as np
from PIL import Image

from kitti_DetectionCore.common.DetectionErrors import ParameterError
from kitti_DetectionCore.common.StringUtils import formatFloat
from kitti_DetectionCore.models.BevModels import BevExtents, BevMap, OccupancyIntegral

_logger = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 0.1
DEFAULT_SLICE_RANGE = (0.0, 2.5)
DEFAULT_SLICES = 5
DENSITY_SATURATION = 16  # density reaches 1.0 at 15 points
PGM_MAX_VALUE = 65535
SCALE_FILE_NAME = "scale.txt"


def density_value(n):
    """
    min(1, log(n + 1) / log 16); base 2 keeps powers of two exact
    """
    if n < 0:
        raise ParameterError("point count must be non-negative, got " + str(n))
    return min(1.0, math.log2(n + 1) / math.log2(DENSITY_SATURATION))


def _cellsInGrid(xyz, extents, resolution):
    """
    cell indices of the points inside the extents and inside the rounded grid
    """
    width, height = extents.grid_shape(resolution)
    inside = extents.contains(xyz[:, 0], xyz[:, 1])
    i, j = extents.cell_indices(xyz[:, 0], xyz[:, 1], resolution)
    inside &= (i >= 0) & (i < width) & (j >= 0) & (j < height)
    return inside, i, j, width, height


def build_bev_map(
    cloud,
    extents=BevExtents(),
    resolution=DEFAULT_RESOLUTION,
    slice_range=DEFAULT_SLICE_RANGE,
    n_slices=DEFAULT_SLICES,
):
    z_lo, z_hi = float(slice_range[0]), float(slice_range[1])
    if not z_hi > z_lo:
        raise ParameterError("slice range must be well-ordered: " + str(slice_range))
    if n_slices < 1:
        raise ParameterError("at least one slice is needed, got " + str(n_slices))
    width, height = extents.grid_shape(resolution)
    bounds = np.linspace(z_lo, z_hi, n_slices + 1)
    grid = np.zeros((width, height, n_slices + 1), dtype=np.float64)

    xyz = cloud.xyz.astype(np.float64)
    if xyz.shape[0] > 0:
        inside, i, j, _, _ = _cellsInGrid(xyz, extents, resolution)
        z = xyz[:, 2]
        inside &= (z >= z_lo) & (z <= z_hi)
        i, j, z = i[inside], j[inside], z[inside]

        # the top bound closes the last slice
        k = np.clip(np.searchsorted(bounds, z, side="right") - 1, 0, n_slices - 1)
        cell = i * height + j
        flatHeights = grid.reshape(-1)
        np.maximum.at(flatHeights, cell * (n_slices + 1) + k, z - bounds[k])

        counts = np.bincount(cell, minlength=width * height).reshape(width, height)
        grid[:, :, n_slices] = np.minimum(
            1.0, np.log2(counts + 1.0) / math.log2(DENSITY_SATURATION)
        )
        _logger.debug(
            "BEV map from "
            + str(int(inside.sum()))
            + " of "
            + str(xyz.shape[0])
            + " points, grid "
            + str(grid.shape)
        )

    return BevMap(
        grid=grid,
        extents=extents,
        resolution=float(resolution),
        slice_bounds=tuple(float(v) for v in bounds),
    )


def build_occupancy_integral(cloud, extents=BevExtents(), resolution=DEFAULT_RESOLUTION):
    width, height = extents.grid_shape(resolution)
    flatCounts = np.zeros(width * height, dtype=np.int64)
    points = np.zeros((0, 2), dtype=np.float64)
    xyz = cloud.xyz.astype(np.float64)
    if xyz.shape[0] > 0:
        inside, i, j, _, _ = _cellsInGrid(xyz, extents, resolution)
        cell = i[inside] * height + j[inside]
        flatCounts = np.bincount(cell, minlength=width * height)
        order = np.argsort(cell, kind="stable")
        points = xyz[inside][order, 0:2]
    cellStarts = np.zeros(width * height + 1, dtype=np.int64)
    cellStarts[1:] = np.cumsum(flatCounts)
    table = np.zeros((width + 1, height + 1), dtype=np.int64)
    table[1:, 1:] = np.cumsum(np.cumsum(flatCounts.reshape(width, height), axis=0), axis=1)
    return OccupancyIntegral(
        table=table,
        extents=extents,
        resolution=float(resolution),
        points=points,
        cell_starts=cellStarts,
    )


def _checkRects(integral, i0, j0, i1, j1):
    width, height = integral.cell_shape
    valid = (i0 >= 0) & (j0 >= 0) & (i0 <= i1) & (j0 <= j1) & (i1 <= width) & (j1 <= height)
    if not np.all(valid):
        raise ParameterError(
            "cell rectangle outside the table or not well-ordered (table "
            + str(width)
            + "x"
            + str(height)
            + ")"
        )


def area_sum(integral, rect):
    """
    points in cells [i0, i1) x [j0, j1)
    """
    i0, j0, i1, j1 = [int(v) for v in rect]
    _checkRects(integral, i0, j0, i1, j1)
    table = integral.table
    return int(table[i1, j1] - table[i0, j1] - table[i1, j0] + table[i0, j0])


def area_sums(integral, rects):
    rects = np.asarray(rects, dtype=np.int64).reshape(-1, 4)
    i0, j0, i1, j1 = rects[:, 0], rects[:, 1], rects[:, 2], rects[:, 3]
    _checkRects(integral, i0, j0, i1, j1)
    table = integral.table
    return table[i1, j1] - table[i0, j1] - table[i1, j0] + table[i0, j0]


def write_bev_channels(bev_map, directory):
    """
    one 16-bit binary PGM per channel, forward up and left on the left, plus a scale file
    with "channel max_value scale" lines; value = pixel / scale
    """
    if not os.path.isdir(directory):
        os.makedirs(directory)
    scaleLines = []
    writtenFiles = []
    for channel in range(bev_map.grid.shape[2]):
        values = bev_map.grid[:, :, channel]
        maxValue = float(values.max()) if values.size > 0 else 0.0
        scale = PGM_MAX_VALUE / maxValue if maxValue > 0 else 0.0
        pixels = np.round(values * scale).astype(np.int32)
        image = Image.fromarray(np.ascontiguousarray(pixels.T[::-1, ::-1]))
        fileName = os.path.join(directory, "ch" + str(channel) + ".pgm")
        image.save(fileName, format="PPM")
        writtenFiles.append(fileName)
        scaleLines.append(
            str(channel) + " " + formatFloat(maxValue, 9) + " " + formatFloat(scale, 9)
        )
    with open(os.path.join(directory, SCALE_FILE_NAME), "w") as scaleFile:
        scaleFile.write("\n".join(scaleLines) + "\n")
    _logger.debug("wrote " + str(len(writtenFiles)) + " channel images to '" + directory + "'")
    return writtenFiles
