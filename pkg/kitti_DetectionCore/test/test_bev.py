import logging
import math
import os
import tempfile
import unittest

import numpy as np

from kitti_DetectionCore import bev
from kitti_DetectionCore.common.DetectionErrors import ParameterError
from kitti_DetectionCore.models.BevModels import BevExtents
from kitti_DetectionCore.models.KittiModels import PointCloud
from kitti_DetectionCore.test.testData import randomCloud

SMALL_EXTENTS = BevExtents(x_min=0.0, x_max=2.0, y_min=-1.0, y_max=1.0)


def _cloud(rows):
    points = [(x, y, z, 0.5) for x, y, z in rows]
    return PointCloud(np.array(points, dtype=np.float32))


def _naiveBevMap(cloud, extents, resolution, sliceRange, nSlices):
    width, height = extents.grid_shape(resolution)
    bounds = np.linspace(sliceRange[0], sliceRange[1], nSlices + 1)
    heights = np.zeros((width, height, nSlices))
    counts = np.zeros((width, height), dtype=np.int64)
    for x, y, z in cloud.xyz.astype(np.float64):
        if not (extents.x_min <= x < extents.x_max and extents.y_min <= y < extents.y_max):
            continue
        i = int(math.floor((y - extents.y_min) / resolution))
        j = int(math.floor((x - extents.x_min) / resolution))
        if i >= width or j >= height:
            continue
        if z < sliceRange[0] or z > sliceRange[1]:
            continue
        counts[i, j] += 1
        for k in range(nSlices):
            last = k == nSlices - 1
            if bounds[k] <= z < bounds[k + 1] or (last and z == bounds[k + 1]):
                heights[i, j, k] = max(heights[i, j, k], z - bounds[k])
                break
    return heights, counts


def _readPgm(fileName):
    with open(fileName, "rb") as pgmFile:
        data = pgmFile.read()
    fields = data.split(maxsplit=4)
    width, height = int(fields[1]), int(fields[2])
    pixels = np.frombuffer(data[-width * height * 2 :], dtype=">u2").reshape(height, width)
    return fields[0], int(fields[3]), pixels


class TestDensity(unittest.TestCase):
    def test_knownValues(self):
        self.assertEqual(0.0, bev.density_value(0))
        self.assertEqual(0.5, bev.density_value(3))
        self.assertEqual(1.0, bev.density_value(15))
        self.assertEqual(1.0, bev.density_value(100))

    def test_monotone(self):
        values = [bev.density_value(n) for n in range(40)]
        self.assertEqual(sorted(values), values)

    def test_negativeCount(self):
        with self.assertRaises(ParameterError):
            bev.density_value(-1)


class TestBevMap(unittest.TestCase):
    def setUp(self):
        logging.basicConfig(level=logging.DEBUG)
        self.testLogger = logging.getLogger("testLogger")

    def test_defaultShape(self):
        bevMap = bev.build_bev_map(PointCloud.empty())
        self.assertEqual((800, 700, 6), bevMap.shape)
        self.assertEqual(0.0, float(np.abs(bevMap.grid).max()))
        self.assertEqual(5, bevMap.n_slices)
        self.assertEqual((0.0, 0.5, 1.0, 1.5, 2.0, 2.5), bevMap.slice_bounds)

    def test_singleCell(self):
        # three points in the cell at x in [0, 0.5), y in [-1, -0.5)
        cloud = _cloud([(0.1, -0.9, 0.25), (0.2, -0.8, 0.4), (0.3, -0.7, 1.75)])
        bevMap = bev.build_bev_map(cloud, SMALL_EXTENTS, 0.5, (0.0, 2.5), 5)
        self.assertEqual((4, 4, 6), bevMap.shape)
        self.assertAlmostEqual(0.4, bevMap.height_channel(0)[0, 0], places=6)
        self.assertAlmostEqual(0.25, bevMap.height_channel(3)[0, 0], places=6)
        self.assertEqual(0.5, bevMap.density_channel[0, 0])
        self.assertEqual(1, int(np.count_nonzero(bevMap.density_channel)))

    def test_topBoundClosed(self):
        cloud = _cloud([(0.1, 0.1, 2.5), (0.6, 0.1, 2.5001)])
        bevMap = bev.build_bev_map(cloud, SMALL_EXTENTS, 0.5, (0.0, 2.5), 5)
        self.assertAlmostEqual(0.5, bevMap.height_channel(4)[2, 0], places=6)
        # above the slice range: neither height nor density
        self.assertEqual(0.0, bevMap.density_channel[2, 1])

    def test_outsideExtentsDropped(self):
        cloud = _cloud([(2.0, 0.0, 1.0), (-0.01, 0.0, 1.0), (1.0, 1.0, 1.0), (1.0, -1.01, 1.0)])
        bevMap = bev.build_bev_map(cloud, SMALL_EXTENTS, 0.5, (0.0, 2.5), 5)
        self.assertEqual(0.0, float(np.abs(bevMap.grid).max()))

    def test_randomCloudAgainstNestedLoops(self):
        rng = np.random.default_rng(3)
        extents = BevExtents(x_min=0.0, x_max=10.0, y_min=-5.0, y_max=5.0)
        cloud = randomCloud(rng, 3000, xRange=(-1.0, 11.0), yRange=(-6.0, 6.0), zRange=(-0.5, 3.0))
        bevMap = bev.build_bev_map(cloud, extents, 0.5, (0.0, 2.5), 5)
        heights, counts = _naiveBevMap(cloud, extents, 0.5, (0.0, 2.5), 5)

        self.assertEqual((20, 20, 6), bevMap.shape)
        self.assertTrue(np.allclose(heights, bevMap.grid[:, :, :5], atol=1e-9))
        expectedDensity = np.vectorize(bev.density_value)(counts)
        self.assertTrue(np.allclose(expectedDensity, bevMap.density_channel, atol=1e-12))

        # every value in its channel range
        self.assertTrue(np.all(bevMap.grid >= 0.0))
        self.assertTrue(np.all(bevMap.grid[:, :, :5] <= 0.5 + 1e-9))
        self.assertTrue(np.all(bevMap.density_channel <= 1.0))

    def test_badSliceRange(self):
        with self.assertRaises(ParameterError):
            bev.build_bev_map(PointCloud.empty(), SMALL_EXTENTS, 0.5, (1.0, 1.0), 5)
        with self.assertRaises(ParameterError):
            bev.build_bev_map(PointCloud.empty(), SMALL_EXTENTS, 0.5, (0.0, 2.5), 0)

    def test_badResolution(self):
        with self.assertRaises(ParameterError):
            bev.build_bev_map(PointCloud.empty(), SMALL_EXTENTS, 0.0)


class TestOccupancyIntegral(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(5)
        self.extents = BevExtents(x_min=0.0, x_max=10.0, y_min=-5.0, y_max=5.0)
        self.cloud = randomCloud(rng, 2000, xRange=(-1.0, 11.0), yRange=(-6.0, 6.0))
        self.integral = bev.build_occupancy_integral(self.cloud, self.extents, 0.5)
        self.counts = np.zeros((20, 20), dtype=np.int64)
        for x, y, _ in self.cloud.xyz.astype(np.float64):
            if 0.0 <= x < 10.0 and -5.0 <= y < 5.0:
                self.counts[int(math.floor((y + 5.0) / 0.5)), int(math.floor(x / 0.5))] += 1

    def test_pointsGroupedByCell(self):
        starts = self.integral.cell_starts
        self.assertEqual((401,), starts.shape)
        self.assertEqual(self.integral.total, int(starts[-1]))
        self.assertEqual((self.integral.total, 2), self.integral.points.shape)
        for cell in [0, 17, 210, 399]:
            i, j = divmod(cell, 20)
            self.assertEqual(int(self.counts[i, j]), int(starts[cell + 1] - starts[cell]))
            for x, y in self.integral.points[starts[cell] : starts[cell + 1]]:
                self.assertEqual((i, j), (int(math.floor((y + 5.0) / 0.5)), int(math.floor(x / 0.5))))

    def test_tableAgainstCounts(self):
        self.assertEqual((21, 21), self.integral.table.shape)
        self.assertEqual((20, 20), self.integral.cell_shape)
        self.assertEqual(int(self.counts.sum()), self.integral.total)
        for i in range(21):
            for j in range(21):
                self.assertEqual(int(self.counts[:i, :j].sum()), int(self.integral.table[i, j]))

    def test_areaSumMatchesDirectSum(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            i0, i1 = sorted(rng.integers(0, 21, 2))
            j0, j1 = sorted(rng.integers(0, 21, 2))
            expected = int(self.counts[i0:i1, j0:j1].sum())
            self.assertEqual(expected, bev.area_sum(self.integral, (i0, j0, i1, j1)))

    def test_partitionAddsUp(self):
        whole = bev.area_sum(self.integral, (0, 0, 20, 20))
        parts = bev.area_sums(
            self.integral,
            [(0, 0, 7, 13), (7, 0, 20, 13), (0, 13, 7, 20), (7, 13, 20, 20)],
        )
        self.assertEqual(whole, int(parts.sum()))
        self.assertEqual(self.integral.total, whole)

    def test_emptyRectangle(self):
        self.assertEqual(0, bev.area_sum(self.integral, (4, 4, 4, 9)))

    def test_rectangleOutsideTable(self):
        with self.assertRaises(ParameterError):
            bev.area_sum(self.integral, (0, 0, 21, 5))
        with self.assertRaises(ParameterError):
            bev.area_sum(self.integral, (5, 0, 4, 5))

    def test_emptyCloud(self):
        integral = bev.build_occupancy_integral(PointCloud.empty(), self.extents, 0.5)
        self.assertEqual(0, integral.total)
        self.assertEqual(0, int(np.abs(integral.table).max()))


class TestChannelImages(unittest.TestCase):
    def test_writeChannels(self):
        cloud = _cloud([(0.1, -0.9, 0.25), (0.2, -0.8, 0.4), (1.8, 0.8, 2.0)])
        bevMap = bev.build_bev_map(cloud, SMALL_EXTENTS, 0.5, (0.0, 2.5), 5)
        with tempfile.TemporaryDirectory() as directory:
            target = os.path.join(directory, "000001")
            files = bev.write_bev_channels(bevMap, target)
            self.assertEqual(6, len(files))
            for fileName in files:
                self.assertTrue(os.path.exists(fileName))

            with open(os.path.join(target, bev.SCALE_FILE_NAME)) as scaleFile:
                scaleLines = scaleFile.read().splitlines()
            self.assertEqual(6, len(scaleLines))
            channels = [line.split() for line in scaleLines]
            self.assertEqual([str(k) for k in range(6)], [fields[0] for fields in channels])

            magic, maxValue, pixels = _readPgm(files[0])
            self.assertEqual(b"P5", magic)
            self.assertEqual(bev.PGM_MAX_VALUE, maxValue)
            self.assertEqual((4, 4), pixels.shape)
            scale = float(channels[0][2])
            recovered = pixels.astype(np.float64) / scale
            # forward is up and left is on the left
            expected = bevMap.height_channel(0).T[::-1, ::-1]
            self.assertTrue(np.allclose(expected, recovered, atol=1.0 / scale))

            # a channel without data keeps scale 0
            _, _, emptyPixels = _readPgm(files[2])
            self.assertEqual(0, int(emptyPixels.max()))
            self.assertEqual(0.0, float(channels[2][2]))


if __name__ == "__main__":
    unittest.main()
