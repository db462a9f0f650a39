import contextlib
import csv
import io
import logging
import os
import tempfile
import unittest
import warnings

import numpy as np

from kitti_DetectionCore import cli
from kitti_DetectionCore.common import CSVExportImporter
from kitti_DetectionCore.common.DetectionErrors import ParameterError
from kitti_DetectionCore.FrameProcessor import parseFrameSpec
from kitti_DetectionCore.test import testData
from kitti_DetectionCore.WrappedLoggingHandler import captureWarnings, releaseWarnings

FIRST_CAR = dict(dims=(1.5, 1.6, 3.9), location=(1.0, 1.7, 20.0), rotationY=-1.5)
SECOND_CAR = dict(dims=(1.4, 1.5, 3.5), location=(-4.0, 1.7, 30.0), rotationY=0.3)
# FIRST_CAR moved 10 cm forward
FIRST_CAR_AGAIN = dict(dims=(1.5, 1.6, 3.9), location=(1.0, 1.7, 20.1), rotationY=-1.5)


def _readRows(fileName):
    with open(fileName, newline="") as csvFile:
        return list(csv.DictReader(csvFile))


class TestCommandLine(unittest.TestCase):
    def setUp(self):
        logging.basicConfig(level=logging.DEBUG)
        self.testLogger = logging.getLogger("testLogger")
        self.tempDir = tempfile.TemporaryDirectory()
        self.root = os.path.join(self.tempDir.name, "kitti")
        self.output = os.path.join(self.tempDir.name, "out")
        rng = np.random.default_rng(7)
        labelText = "\n".join([testData.labelLine(**FIRST_CAR), testData.labelLine(**SECOND_CAR)]) + "\n"
        testData.writeFrame(self.root, "000000", testData.randomCloud(rng, 2000), labelText=labelText)

    def tearDown(self):
        self.tempDir.cleanup()

    def _run(self, *arguments):
        stdout = io.StringIO()
        with contextlib.redirect_stdout(stdout):
            exitCode = cli.main(list(arguments) + ["--data-root", self.root, "--output", self.output])
        return exitCode, stdout.getvalue()

    def _writeScoredLabels(self, directoryName):
        directory = os.path.join(self.tempDir.name, directoryName)
        os.makedirs(directory)
        with open(os.path.join(directory, "000000.txt"), "w") as detectionFile:
            detectionFile.write(testData.labelLine(score=0.9, **FIRST_CAR) + "\n")
            detectionFile.write(testData.labelLine(score=0.8, **SECOND_CAR) + "\n")
        return directory

    def _writeDuplicatedLabels(self, directoryName):
        directory = os.path.join(self.tempDir.name, directoryName)
        os.makedirs(directory)
        with open(os.path.join(directory, "000000.txt"), "w") as detectionFile:
            detectionFile.write(testData.labelLine(score=0.9, **FIRST_CAR) + "\n")
            detectionFile.write(testData.labelLine(score=0.85, **FIRST_CAR_AGAIN) + "\n")
            detectionFile.write(testData.labelLine(score=0.8, **SECOND_CAR) + "\n")
        return directory

    def test_bev(self):
        exitCode, stdout = self._run("bev")
        self.assertEqual(cli.EXIT_OK, exitCode)
        self.assertIn("000000 points=2000", stdout)
        frameDir = os.path.join(self.output, "bev", "000000")
        for channel in range(6):
            self.assertTrue(os.path.exists(os.path.join(frameDir, "ch" + str(channel) + ".pgm")))
        with open(os.path.join(frameDir, "scale.txt")) as scaleFile:
            self.assertEqual(6, len(scaleFile.read().splitlines()))
        rows = _readRows(os.path.join(self.output, "bev_stats.csv"))
        self.assertEqual(1, len(rows))
        self.assertEqual("2000", rows[0][CSVExportImporter.COLUMN_POINTS])
        self.assertLessEqual(int(rows[0][CSVExportImporter.COLUMN_POINTS_FOV]), 2000)

    def test_anchors(self):
        exitCode, stdout = self._run("anchors")
        self.assertEqual(cli.EXIT_OK, exitCode)
        rows = _readRows(os.path.join(self.output, "anchor_counts.csv"))
        self.assertEqual(1, len(rows))
        self.assertEqual("car", rows[0][CSVExportImporter.COLUMN_CLASS])
        self.assertEqual("44800", rows[0][CSVExportImporter.COLUMN_ANCHORS])
        nonEmpty = CSVExportImporter.readAnchors(
            os.path.join(self.output, "anchors", "000000_car.csv"), self.testLogger
        )
        self.assertEqual(int(rows[0][CSVExportImporter.COLUMN_NON_EMPTY]), nonEmpty.shape[0])
        labelled = [
            int(rows[0][column])
            for column in (
                CSVExportImporter.COLUMN_OBJECT_ANCHORS,
                CSVExportImporter.COLUMN_BACKGROUND_ANCHORS,
                CSVExportImporter.COLUMN_IGNORED_ANCHORS,
            )
        ]
        self.assertEqual(nonEmpty.shape[0], sum(labelled))
        self.assertIn("000000 car anchors=44800", stdout)

    def test_anchorLabelsAroundCar(self):
        # dense points under FIRST_CAR, which sits near x 20.3, y -1.0 in the LIDAR frame
        rng = np.random.default_rng(8)
        cloud = testData.randomCloud(rng, 2000, xRange=(18.0, 22.5), yRange=(-2.0, 0.0), zRange=(-1.5, 0.0))
        testData.writeFrame(self.root, "000001", cloud, labelText=testData.labelLine(**FIRST_CAR) + "\n")
        exitCode, stdout = self._run("anchors", "--frames", "1")
        self.assertEqual(cli.EXIT_OK, exitCode)
        row = _readRows(os.path.join(self.output, "anchor_counts.csv"))[0]
        objects = int(row[CSVExportImporter.COLUMN_OBJECT_ANCHORS])
        regression = int(row[CSVExportImporter.COLUMN_REGRESSION_ANCHORS])
        self.assertGreaterEqual(objects, 1)
        # 0.65 regression gate over the 0.5 object threshold, both axis aligned
        self.assertGreaterEqual(regression, 1)
        self.assertLessEqual(regression, objects)
        self.assertIn("objects=" + str(objects), stdout)

        stricter = self._run("anchors", "--frames", "1", "--set", "labels.object_iou.car=0.99")
        self.assertEqual(cli.EXIT_OK, stricter[0])
        row = _readRows(os.path.join(self.output, "anchor_counts.csv"))[0]
        self.assertEqual("0", row[CSVExportImporter.COLUMN_OBJECT_ANCHORS])

    def test_anchorsWithClusters(self):
        clusterFile = os.path.join(self.tempDir.name, "clusters.csv")
        exitCode, _ = self._run("anchors", "--write-clusters", clusterFile)
        self.assertEqual(cli.EXIT_OK, exitCode)
        clusters = CSVExportImporter.readClusters(clusterFile, self.testLogger)
        self.assertEqual(["car"], list(clusters.keys()))
        # two labels, two clusters: each centroid is one label's (l, w, h)
        self.assertTrue(np.allclose([(3.5, 1.5, 1.4), (3.9, 1.6, 1.5)], clusters["car"]))
        rows = _readRows(os.path.join(self.output, "anchor_counts.csv"))
        self.assertEqual("89600", rows[0][CSVExportImporter.COLUMN_ANCHORS])

    def test_clusteringNeedsSamples(self):
        clusterFile = os.path.join(self.tempDir.name, "clusters.csv")
        exitCode, _ = self._run("anchors", "--write-clusters", clusterFile, "--set", "anchors.clusters.car=3")
        self.assertEqual(cli.EXIT_ERROR, exitCode)

    def test_encode(self):
        exitCode, _ = self._run("encode")
        self.assertEqual(cli.EXIT_OK, exitCode)
        rows = _readRows(os.path.join(self.output, "encode.csv"))
        self.assertEqual(["0", "1"], [row[CSVExportImporter.COLUMN_OBJECT] for row in rows])
        for row in rows:
            self.assertEqual("Car", row[CSVExportImporter.COLUMN_CLASS])
            self.assertLess(float(row[CSVExportImporter.COLUMN_FOUR_CORNER_ERROR]), 1e-4)
            self.assertLess(float(row[CSVExportImporter.COLUMN_EIGHT_CORNER_ERROR]), 1e-4)
            self.assertLess(float(row[CSVExportImporter.COLUMN_FIT_CENTER_ERROR]), 1e-4)
            self.assertLess(float(row[CSVExportImporter.COLUMN_YAW_ERROR]), 1e-4)

    def test_evalOfLabelsAgainstThemselves(self):
        detectionDir = self._writeScoredLabels("detections")
        exitCode, stdout = self._run("eval", "--detections", detectionDir)
        self.assertEqual(cli.EXIT_OK, exitCode)
        lines = stdout.splitlines()
        # header plus 2 IoU spaces x 3 difficulties
        self.assertEqual(7, len(lines))
        for line in lines[1:]:
            self.assertTrue(line.startswith("car"))
            self.assertEqual(["100.00", "100.00"], line.split()[-2:])
        evalDir = os.path.join(self.output, "eval")
        with open(os.path.join(evalDir, "summary.txt")) as summaryFile:
            self.assertEqual(stdout, summaryFile.read())
        prRows = _readRows(os.path.join(evalDir, "pr_car_moderate_3d.csv"))
        self.assertEqual(2, len(prRows))
        self.assertEqual("1.000000", prRows[-1][CSVExportImporter.COLUMN_RECALL])

    def test_evalWithFinalNms(self):
        detectionDir = self._writeDuplicatedLabels("duplicated")
        exitCode, stdout = self._run("eval", "--detections", detectionDir)
        self.assertEqual(cli.EXIT_OK, exitCode)
        # the duplicate is a false positive ranked between the two true positives
        self.assertNotEqual("100.00", stdout.splitlines()[1].split()[-2])

        exitCode, stdout = self._run("eval", "--detections", detectionDir, "--nms")
        self.assertEqual(cli.EXIT_OK, exitCode)
        for line in stdout.splitlines()[1:]:
            self.assertEqual(["100.00", "100.00"], line.split()[-2:])
        with open(os.path.join(self.output, "eval", "detections", "000000.txt")) as keptFile:
            keptLines = keptFile.read().splitlines()
        self.assertEqual(2, len(keptLines))
        self.assertTrue(keptLines[0].startswith("Car "))
        self.assertEqual(["0.900000", "0.800000"], [line.split()[-1] for line in keptLines])

    def test_evalWithoutDetections(self):
        detectionDir = os.path.join(self.tempDir.name, "empty")
        os.makedirs(detectionDir)
        exitCode, stdout = self._run("eval", "--detections", detectionDir)
        self.assertEqual(cli.EXIT_OK, exitCode)
        self.assertEqual(["0.00", "0.00"], stdout.splitlines()[1].split()[-2:])

    def test_recall(self):
        proposalDir = self._writeScoredLabels("proposals")
        exitCode, stdout = self._run("recall", "--proposals", proposalDir, "--set", "eval.recall_n=1 2 300")
        self.assertEqual(cli.EXIT_OK, exitCode)
        with open(os.path.join(self.output, "recall_car.csv")) as recallFile:
            self.assertEqual(
                ["n,recall", "1,0.500000", "2,1.000000", "300,1.000000"], recallFile.read().splitlines()
            )
        self.assertIn("car n=2 recall=100.00", stdout)

    def test_recallWithProposalNms(self):
        proposalDir = self._writeDuplicatedLabels("proposals")
        exitCode, _ = self._run("recall", "--proposals", proposalDir, "--set", "eval.recall_n=2")
        self.assertEqual(cli.EXIT_OK, exitCode)
        with open(os.path.join(self.output, "recall_car.csv")) as recallFile:
            self.assertEqual(["n,recall", "2,0.500000"], recallFile.read().splitlines())

        exitCode, _ = self._run("recall", "--proposals", proposalDir, "--set", "eval.recall_n=2", "--nms")
        self.assertEqual(cli.EXIT_OK, exitCode)
        with open(os.path.join(self.output, "recall_car.csv")) as recallFile:
            self.assertEqual(["n,recall", "2,1.000000"], recallFile.read().splitlines())

    def test_netinfo(self):
        exitCode, stdout = self._run("netinfo")
        self.assertEqual(cli.EXIT_OK, exitCode)
        self.assertIn("total parameters: ", stdout)
        self.assertIn("crop memory: 100000 x 7x7 x 256 x 4 bytes = 5017600000", stdout)
        self.assertIn("loss weights: box 5.00 orientation 1.00 classification 1.00", stdout)
        with open(os.path.join(self.output, "netinfo.txt")) as netinfoFile:
            self.assertEqual(stdout, netinfoFile.read())

    def test_configFileAndFlags(self):
        configFile = os.path.join(self.tempDir.name, "run.cfg")
        with open(configFile, "w") as file:
            file.write("netinfo.rois = 10\nloss.box_weight = 2\n")
        exitCode, stdout = self._run("netinfo", "--config", configFile)
        self.assertEqual(cli.EXIT_OK, exitCode)
        self.assertIn("crop memory: 10 x 7x7 x 256 x 4 bytes = 501760", stdout)
        self.assertIn("loss weights: box 2.00 ", stdout)

    def test_errorsExitWithOne(self):
        stdout = io.StringIO()
        with contextlib.redirect_stdout(stdout):
            self.assertEqual(
                cli.EXIT_ERROR, cli.main(["bev", "--data-root", os.path.join(self.tempDir.name, "missing")])
            )
        self.assertEqual(cli.EXIT_ERROR, self._run("bev", "--set", "bev.resolutoin=0.2")[0])
        self.assertEqual(cli.EXIT_ERROR, self._run("bev", "--classes", "truck")[0])
        self.assertEqual(cli.EXIT_ERROR, self._run("bev", "--frames", "x")[0])

    def test_usageErrors(self):
        with contextlib.redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit) as context:
                cli.main([])
            self.assertEqual(cli.EXIT_USAGE, context.exception.code)
            with self.assertRaises(SystemExit):
                cli.main(["eval"])


class TestHelpers(unittest.TestCase):
    def setUp(self):
        logging.basicConfig(level=logging.DEBUG)
        self.testLogger = logging.getLogger("testLogger")

    def test_frameSpec(self):
        self.assertEqual(["000003", "000007", "000008", "000009"], parseFrameSpec("7-9, 3"))
        self.assertEqual(["000001"], parseFrameSpec("1,1"))
        with self.assertRaises(ParameterError):
            parseFrameSpec("a-3")

    def test_warningsAreCaptured(self):
        records = []

        class ListHandler(logging.Handler):
            def emit(self, record):
                records.append(record.getMessage())

        targetLogger = logging.getLogger("testLogger.captured")
        targetLogger.setLevel(logging.DEBUG)
        listHandler = ListHandler()
        targetLogger.addHandler(listHandler)
        handler = captureWarnings(targetLogger)
        try:
            warnings.warn("overflow in\n   exp", RuntimeWarning)
        finally:
            releaseWarnings(handler)
            targetLogger.removeHandler(listHandler)
        self.assertEqual(1, len(records))
        self.assertTrue(records[0].startswith("[py.warnings] "))
        self.assertIn("overflow in exp", records[0])


if __name__ == "__main__":
    unittest.main()
