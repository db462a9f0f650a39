import logging
import os
import tempfile
import unittest

from kitti_DetectionCore import run_settings
from kitti_DetectionCore.common import CSVExportImporter
from kitti_DetectionCore.common.DetectionErrors import ConfigError, ParameterError
from kitti_DetectionCore.common.SettingsKeys import SettingsKeys
from kitti_DetectionCore.models.BevModels import BevExtents
from kitti_DetectionCore.models.EvalModels import Difficulty


class TestRunSettings(unittest.TestCase):
    def setUp(self):
        logging.basicConfig(level=logging.DEBUG)
        self.testLogger = logging.getLogger("testLogger")
        self.settings = run_settings.RunSettings(self.testLogger)

    def test_defaults(self):
        settings = self.settings.validate()
        self.assertIs(self.settings, settings)
        self.assertEqual(BevExtents(), settings.extents())
        self.assertEqual(0.1, settings.resolution)
        self.assertEqual((0.0, 2.5), settings.sliceRange())
        self.assertEqual(5, settings.nSlices)
        self.assertEqual(["car"], settings.classes)
        self.assertEqual(1, settings.jobs)
        self.assertEqual((1242, 375), settings.imageSize())
        self.assertEqual([(3.9, 1.6, 1.56)], settings.anchorSizes("car"))
        self.assertEqual((0.3, 0.5), settings.labelThresholds("car"))
        self.assertEqual(0.7, settings.evalIou("car"))
        self.assertEqual(0.5, settings.evalIou("pedestrian"))
        self.assertEqual(300, settings.proposalKeep("car", training=False))
        self.assertEqual(1024, settings.proposalKeep("car", training=True))
        self.assertEqual(0.01, settings.detectionNmsIou)
        self.assertEqual(100, settings.detectionKeep)
        self.assertEqual(Difficulty.MODERATE, settings.recallDifficulty())
        self.assertEqual(11, settings.interpolation)
        self.assertEqual((800, 704, 6), settings.networkInput())
        self.assertEqual((100000, (7, 7), 256, 4), settings.memoryArguments())
        self.assertEqual(0.65, settings.regressionMinIou("car"))
        self.assertEqual(0.8, settings.proposalNmsIou)
        self.assertEqual((5.0, 1.0, 1.0), settings.lossWeights())
        self.assertEqual("INFO", settings.loggingLevel)

    def test_textWithComments(self):
        self.settings.applyText(
            "\n".join(
                [
                    "# coarse grid",
                    "bev.resolution = 0.2  # meters",
                    "",
                    "classes = car, pedestrian",
                    "anchors.size.car = 3.9 1.6 1.56; 4.5 1.8 1.6",
                    "anchors.label_use_rotated_iou = yes",
                    "eval.recall_n = 10 50",
                    "difficulty.min_height = 40 30 20",
                    "logging.level = debug",
                ]
            )
        )
        self.settings.validate()
        self.assertEqual(0.2, self.settings.resolution)
        self.assertEqual(["car", "pedestrian"], self.settings.classes)
        self.assertEqual([(3.9, 1.6, 1.56), (4.5, 1.8, 1.6)], self.settings.anchorSizes("car"))
        self.assertTrue(self.settings.useRotatedLabelIou)
        self.assertEqual([10, 50], self.settings.recallNValues)
        self.assertEqual((40.0, 30.0, 20.0), self.settings.difficultyTable().minHeight)
        self.assertEqual("DEBUG", self.settings.loggingLevel)

    def test_unknownKey(self):
        with self.assertRaises(ConfigError) as context:
            self.settings.applyText("bev.resolution = 0.2\nbev.resolutoin = 0.3\n")
        self.assertTrue(str(context.exception).startswith("[line 2]"))
        self.assertIn("bev.resolutoin", str(context.exception))
        self.assertTrue(issubclass(ConfigError, ParameterError))

    def test_badValue(self):
        with self.assertRaises(ConfigError) as context:
            self.settings.applyText("jobs = many")
        self.assertTrue(str(context.exception).startswith("[line 1]"))
        with self.assertRaises(ConfigError):
            self.settings.applyText("anchors.size.car = 3.9 1.6")
        with self.assertRaises(ConfigError):
            self.settings.applyText("anchors.label_use_rotated_iou = perhaps")

    def test_lineWithoutEquals(self):
        with self.assertRaises(ConfigError) as context:
            self.settings.applyText("\n\nbev.resolution 0.2")
        self.assertTrue(str(context.exception).startswith("[line 3]"))

    def test_overrides(self):
        self.settings.applyOverrides(["jobs=4", "eval.interpolation = 40"])
        self.assertEqual(4, self.settings.jobs)
        self.assertEqual(40, self.settings.interpolation)
        with self.assertRaises(ConfigError):
            self.settings.applyOverrides(["jobs"])
        self.settings.applyOverrides(None)

    def test_setValue(self):
        self.settings.setValue(SettingsKeys.SETTINGS_KEY_CLASSES, ["cyclist"])
        self.assertEqual(["cyclist"], self.settings.classes)
        with self.assertRaises(ConfigError):
            self.settings.setValue("no.such.key", 1)
        with self.assertRaises(ConfigError):
            self.settings.get("no.such.key")

    def _assertInvalid(self, line):
        settings = run_settings.RunSettings(self.testLogger)
        settings.applyText(line)
        with self.assertRaises(ConfigError):
            settings.validate()

    def test_validationFailures(self):
        self._assertInvalid("bev.z_hi = 0")
        self._assertInvalid("bev.x_max = -1")
        self._assertInvalid("bev.resolution = 0")
        self._assertInvalid("bev.n_slices = 0")
        self._assertInvalid("anchors.stride = 0")
        self._assertInvalid("jobs = 0")
        self._assertInvalid("classes = truck")
        self._assertInvalid("labels.background_iou.car = 0.6")
        self._assertInvalid("eval.iou.cyclist = 1.5")
        self._assertInvalid("eval.interpolation = 20")
        self._assertInvalid("eval.recall_difficulty = impossible")
        self._assertInvalid("eval.recall_difficulty = excluded")
        self._assertInvalid("eval.recall_n = 0 10")
        self._assertInvalid("difficulty.min_height = 40 50 25")
        self._assertInvalid("difficulty.max_occlusion = 0 1")
        self._assertInvalid("anchors.size.pedestrian = 0.8 0.0 1.73")
        self._assertInvalid("network.input = 800 704")
        self._assertInvalid("loss.box_weight = -1")
        self._assertInvalid("logging.level = chatty")


class TestClusterFile(unittest.TestCase):
    def setUp(self):
        logging.basicConfig(level=logging.DEBUG)
        self.testLogger = logging.getLogger("testLogger")
        self.tempDir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tempDir.cleanup()

    def test_clusterFileWins(self):
        fileName = os.path.join(self.tempDir.name, "clusters.csv")
        CSVExportImporter.writeClusters({"car": [(3.5, 1.5, 1.5), (4.2, 1.7, 1.6)]}, fileName)
        settings = run_settings.RunSettings(self.testLogger)
        settings.applyOverrides(["anchors.cluster_file=" + fileName])
        self.assertEqual([(3.5, 1.5, 1.5), (4.2, 1.7, 1.6)], settings.anchorSizes("car"))
        # classes missing from the file keep their configured sizes
        self.assertEqual([(0.8, 0.6, 1.73)], settings.anchorSizes("pedestrian"))

    def test_loadFromFileWithOverrides(self):
        configFile = os.path.join(self.tempDir.name, "run.cfg")
        with open(configFile, "w") as file:
            file.write("jobs = 2\nbev.resolution = 0.2\n")
        settings = run_settings.load_run_settings(configFile, ["jobs=3"], self.testLogger)
        self.assertEqual(3, settings.jobs)
        self.assertEqual(0.2, settings.resolution)

    def test_defaultsDictIsFresh(self):
        first = run_settings.get_settings_defaults()
        first[SettingsKeys.SETTINGS_KEY_CLASSES].append("pedestrian")
        self.assertEqual(["car"], run_settings.get_settings_defaults()[SettingsKeys.SETTINGS_KEY_CLASSES])


if __name__ == "__main__":
    unittest.main()
