# coding=utf-8
"""
Flat key = value run configuration. Every key is a SettingsKeys constant; value types are
taken from the defaults.
"""
import logging

from kitti_DetectionCore import anchor_grid, bev, geom, metrics, net_shapes
from kitti_DetectionCore.common import StringUtils
from kitti_DetectionCore.common.CSVExportImporter import readClusters
from kitti_DetectionCore.common.DetectionErrors import ConfigError, lineError
from kitti_DetectionCore.common.SettingsKeys import SettingsKeys
from kitti_DetectionCore.kitti_io import DEFAULT_SENSOR_HEIGHT
from kitti_DetectionCore.models.BevModels import BevExtents
from kitti_DetectionCore.models.EvalModels import Difficulty

DEFAULT_ANCHOR_SIZES = {
    SettingsKeys.CLASS_CAR: [(3.9, 1.6, 1.56)],
    SettingsKeys.CLASS_PEDESTRIAN: [(0.8, 0.6, 1.73)],
    SettingsKeys.CLASS_CYCLIST: [(1.76, 0.6, 1.73)],
}
DEFAULT_CLUSTER_COUNTS = {
    SettingsKeys.CLASS_CAR: 2,
    SettingsKeys.CLASS_PEDESTRIAN: 1,
    SettingsKeys.CLASS_CYCLIST: 1,
}
DEFAULT_IMAGE_SIZE = (1242, 375)
DEFAULT_RECALL_N_VALUES = [1, 2, 5, 10, 20, 50, 100, 300, 1024]
DEFAULT_NETWORK_INPUT = [800, 704, 6]
DEFAULT_NETINFO_ROIS = 100000
DEFAULT_BYTES_PER_ELEMENT = 4


def get_settings_defaults():
    extents = BevExtents()
    settings = dict()

    ## Paths
    settings[SettingsKeys.SETTINGS_KEY_DATA_ROOT] = "."
    settings[SettingsKeys.SETTINGS_KEY_OUTPUT_DIR] = "output"
    settings[SettingsKeys.SETTINGS_KEY_CLASSES] = [SettingsKeys.CLASS_CAR]
    settings[SettingsKeys.SETTINGS_KEY_JOBS] = 1

    ## BEV map
    settings[SettingsKeys.SETTINGS_KEY_BEV_X_MIN] = extents.x_min
    settings[SettingsKeys.SETTINGS_KEY_BEV_X_MAX] = extents.x_max
    settings[SettingsKeys.SETTINGS_KEY_BEV_Y_MIN] = extents.y_min
    settings[SettingsKeys.SETTINGS_KEY_BEV_Y_MAX] = extents.y_max
    settings[SettingsKeys.SETTINGS_KEY_BEV_RESOLUTION] = bev.DEFAULT_RESOLUTION
    settings[SettingsKeys.SETTINGS_KEY_BEV_Z_LO] = bev.DEFAULT_SLICE_RANGE[0]
    settings[SettingsKeys.SETTINGS_KEY_BEV_Z_HI] = bev.DEFAULT_SLICE_RANGE[1]
    settings[SettingsKeys.SETTINGS_KEY_BEV_SLICES] = bev.DEFAULT_SLICES

    ## Camera / ground
    settings[SettingsKeys.SETTINGS_KEY_IMAGE_WIDTH] = DEFAULT_IMAGE_SIZE[0]
    settings[SettingsKeys.SETTINGS_KEY_IMAGE_HEIGHT] = DEFAULT_IMAGE_SIZE[1]
    settings[SettingsKeys.SETTINGS_KEY_SENSOR_HEIGHT] = DEFAULT_SENSOR_HEIGHT

    ## Anchors
    settings[SettingsKeys.SETTINGS_KEY_ANCHOR_STRIDE] = anchor_grid.DEFAULT_STRIDE
    settings[SettingsKeys.SETTINGS_KEY_ANCHOR_CLUSTER_FILE] = ""
    settings[SettingsKeys.SETTINGS_KEY_ANCHOR_LABEL_ROTATED_IOU] = False
    for className in SettingsKeys.ALL_CLASSES:
        background, objectIou = anchor_grid.LABEL_IOU_THRESHOLDS[className]
        settings[SettingsKeys.SETTINGS_KEY_ANCHOR_SIZES_PREFIX + className] = list(
            DEFAULT_ANCHOR_SIZES[className]
        )
        settings[SettingsKeys.SETTINGS_KEY_ANCHOR_CLUSTERS_PREFIX + className] = DEFAULT_CLUSTER_COUNTS[
            className
        ]
        settings[SettingsKeys.SETTINGS_KEY_LABEL_BACKGROUND_IOU_PREFIX + className] = background
        settings[SettingsKeys.SETTINGS_KEY_LABEL_OBJECT_IOU_PREFIX + className] = objectIou
        settings[SettingsKeys.SETTINGS_KEY_REGRESSION_IOU_PREFIX + className] = anchor_grid.REGRESSION_MIN_IOU[
            className
        ]
        settings[SettingsKeys.SETTINGS_KEY_NMS_PROPOSAL_KEEP_PREFIX + className] = anchor_grid.PROPOSAL_KEEP_INFERENCE[
            className
        ]
        settings[SettingsKeys.SETTINGS_KEY_EVAL_IOU_PREFIX + className] = metrics.EVAL_IOU_THRESHOLDS[className]

    ## NMS
    settings[SettingsKeys.SETTINGS_KEY_NMS_PROPOSAL_IOU] = anchor_grid.PROPOSAL_NMS_IOU
    settings[SettingsKeys.SETTINGS_KEY_NMS_PROPOSAL_KEEP_TRAIN] = anchor_grid.PROPOSAL_KEEP_TRAINING
    settings[SettingsKeys.SETTINGS_KEY_NMS_DETECTION_IOU] = geom.DETECTION_NMS_IOU
    settings[SettingsKeys.SETTINGS_KEY_NMS_DETECTION_KEEP] = geom.DETECTION_KEEP

    ## Evaluation
    settings[SettingsKeys.SETTINGS_KEY_EVAL_INTERPOLATION] = 11
    settings[SettingsKeys.SETTINGS_KEY_DIFFICULTY_MIN_HEIGHT] = list(metrics.DEFAULT_MIN_HEIGHT)
    settings[SettingsKeys.SETTINGS_KEY_DIFFICULTY_MAX_OCCLUSION] = list(metrics.DEFAULT_MAX_OCCLUSION)
    settings[SettingsKeys.SETTINGS_KEY_DIFFICULTY_MAX_TRUNCATION] = list(metrics.DEFAULT_MAX_TRUNCATION)
    settings[SettingsKeys.SETTINGS_KEY_RECALL_IOU] = metrics.RECALL_IOU
    settings[SettingsKeys.SETTINGS_KEY_RECALL_DIFFICULTY] = Difficulty.MODERATE.label
    settings[SettingsKeys.SETTINGS_KEY_RECALL_N_VALUES] = list(DEFAULT_RECALL_N_VALUES)

    ## Network
    settings[SettingsKeys.SETTINGS_KEY_NETWORK_CONFIG_FILE] = ""
    settings[SettingsKeys.SETTINGS_KEY_NETWORK_INPUT] = list(DEFAULT_NETWORK_INPUT)
    settings[SettingsKeys.SETTINGS_KEY_NETWORK_NUM_CLASSES] = 2
    settings[SettingsKeys.SETTINGS_KEY_NETINFO_ROIS] = DEFAULT_NETINFO_ROIS
    settings[SettingsKeys.SETTINGS_KEY_NETINFO_CROP] = list(net_shapes.SECOND_STAGE_CROP_SIZE)
    settings[SettingsKeys.SETTINGS_KEY_NETINFO_DEPTH] = net_shapes.DEFAULT_ENCODER_DEPTH
    settings[SettingsKeys.SETTINGS_KEY_NETINFO_BYTES] = DEFAULT_BYTES_PER_ELEMENT

    ## Loss weights
    settings[SettingsKeys.SETTINGS_KEY_LOSS_BOX_WEIGHT] = net_shapes.DEFAULT_BOX_WEIGHT
    settings[SettingsKeys.SETTINGS_KEY_LOSS_ORIENTATION_WEIGHT] = net_shapes.DEFAULT_ORIENTATION_WEIGHT
    settings[SettingsKeys.SETTINGS_KEY_LOSS_CLASS_WEIGHT] = net_shapes.DEFAULT_CLASS_WEIGHT

    ## Debugging
    settings[SettingsKeys.SETTINGS_KEY_LOGGING_LEVEL] = "INFO"
    return settings


def _parseValue(default, text):
    text = text.strip()
    if isinstance(default, bool):
        return StringUtils.parseBool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, list):
        if len(default) > 0 and isinstance(default[0], tuple):
            return StringUtils.parseTripleList(text)
        if len(default) > 0 and isinstance(default[0], int):
            return StringUtils.parseIntList(text)
        if len(default) > 0 and isinstance(default[0], float):
            return StringUtils.parseFloatList(text)
        return text.replace(",", " ").split()
    return text


def _isProbability(value):
    return 0.0 <= value <= 1.0


class RunSettings:
    def __init__(self, parentLogger=None):
        parentName = parentLogger.name if parentLogger is not None else "kitti_DetectionCore"
        self._logger = logging.getLogger(parentName + "." + self.__class__.__name__)
        self._values = get_settings_defaults()
        self._clusterCache = None

    def get(self, key):
        if key not in self._values:
            raise ConfigError("unknown configuration key '" + str(key) + "'")
        return self._values[key]

    def set(self, key, text, lineNumber=None):
        key = key.strip()
        if key not in self._values:
            message = "unknown configuration key '" + key + "'"
            raise ConfigError(lineError(lineNumber, message) if lineNumber is not None else message)
        try:
            self._values[key] = _parseValue(self._values[key], text)
        except ValueError as e:
            message = "invalid value '" + text.strip() + "' for '" + key + "': " + str(e)
            raise ConfigError(lineError(lineNumber, message) if lineNumber is not None else message)
        self._clusterCache = None

    def setValue(self, key, value):
        """
        typed assignment used for command line flags
        """
        if key not in self._values:
            raise ConfigError("unknown configuration key '" + str(key) + "'")
        self._values[key] = value
        self._clusterCache = None

    def applyText(self, text):
        for lineNumber, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if len(line) == 0:
                continue
            key, separator, value = line.partition("=")
            if separator != "=":
                raise ConfigError(lineError(lineNumber, "expected 'key = value', got '" + line + "'"))
            self.set(key, value, lineNumber)

    def applyOverrides(self, overrides):
        for override in overrides or []:
            key, separator, value = override.partition("=")
            if separator != "=":
                raise ConfigError("override must look like key=value, got '" + override + "'")
            self.set(key, value)

    def validate(self):
        def fail(message):
            raise ConfigError(message)

        try:
            self.extents()
        except Exception as e:
            fail(str(e))
        if not self.resolution > 0:
            fail("bev.resolution must be positive")
        zLo, zHi = self.sliceRange()
        if not zHi > zLo:
            fail("bev.z_hi must be above bev.z_lo")
        if self.nSlices < 1:
            fail("bev.n_slices must be at least 1")
        if not self.stride > 0:
            fail("anchors.stride must be positive")
        if self.jobs < 1:
            fail("jobs must be at least 1")
        if self.sensorHeight <= 0:
            fail("ground_plane.sensor_height must be positive")
        width, height = self.imageSize()
        if width <= 0 or height <= 0:
            fail("image size must be positive")
        for className in self.classes:
            if className not in SettingsKeys.ALL_CLASSES:
                fail("unknown class '" + className + "'")
        for className in SettingsKeys.ALL_CLASSES:
            background, objectIou = self.labelThresholds(className)
            for value in (background, objectIou, self.regressionMinIou(className), self.evalIou(className)):
                if not _isProbability(value):
                    fail("threshold out of [0, 1] for class '" + className + "': " + str(value))
            if background > objectIou:
                fail("background threshold above object threshold for '" + className + "'")
            if len(self.get(SettingsKeys.SETTINGS_KEY_ANCHOR_SIZES_PREFIX + className)) == 0:
                fail("no anchor size for '" + className + "'")
            for size in self.get(SettingsKeys.SETTINGS_KEY_ANCHOR_SIZES_PREFIX + className):
                if min(size) <= 0:
                    fail("anchor sizes must be positive: " + str(size))
            if self.clusterCount(className) < 1:
                fail("cluster count must be at least 1 for '" + className + "'")
            if self.proposalKeep(className, training=False) < 1:
                fail("proposal keep count must be at least 1 for '" + className + "'")
        for key in (
            SettingsKeys.SETTINGS_KEY_NMS_PROPOSAL_IOU,
            SettingsKeys.SETTINGS_KEY_NMS_DETECTION_IOU,
            SettingsKeys.SETTINGS_KEY_RECALL_IOU,
        ):
            if not _isProbability(self.get(key)):
                fail(key + " must lie in [0, 1]")
        if self.interpolation not in (11, 40):
            fail("eval.interpolation must be 11 or 40")

        minHeight = self.get(SettingsKeys.SETTINGS_KEY_DIFFICULTY_MIN_HEIGHT)
        maxOcclusion = self.get(SettingsKeys.SETTINGS_KEY_DIFFICULTY_MAX_OCCLUSION)
        maxTruncation = self.get(SettingsKeys.SETTINGS_KEY_DIFFICULTY_MAX_TRUNCATION)
        if not (len(minHeight) == len(maxOcclusion) == len(maxTruncation) == 3):
            fail("the difficulty table needs exactly three levels")
        for easier, harder in ((0, 1), (1, 2)):
            if (
                minHeight[harder] > minHeight[easier]
                or maxOcclusion[harder] < maxOcclusion[easier]
                or maxTruncation[harder] < maxTruncation[easier]
            ):
                fail("difficulty levels must get monotonically harder")
        try:
            self.recallDifficulty()
        except Exception as e:
            fail(str(e))
        if len(self.recallNValues) == 0 or min(self.recallNValues) < 1:
            fail("eval.recall_n needs positive proposal counts")
        if len(self.get(SettingsKeys.SETTINGS_KEY_NETWORK_INPUT)) != 3:
            fail("network.input must be 'height width depth'")
        if len(self.get(SettingsKeys.SETTINGS_KEY_NETINFO_CROP)) != 2:
            fail("netinfo.crop must be 'height width'")
        if min(self.lossWeights()) < 0:
            fail("loss weights must not be negative")
        if self.detectionKeep < 1:
            fail("nms.detection_keep must be at least 1")
        if self.proposalKeep(None, training=True) < 1:
            fail("nms.proposal_keep_train must be at least 1")
        if self.loggingLevel not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            fail("unknown logging level '" + self.loggingLevel + "'")
        return self

    ################################################################################################ typed access
    @property
    def dataRoot(self):
        return self.get(SettingsKeys.SETTINGS_KEY_DATA_ROOT)

    @property
    def outputDir(self):
        return self.get(SettingsKeys.SETTINGS_KEY_OUTPUT_DIR)

    @property
    def classes(self):
        return list(self.get(SettingsKeys.SETTINGS_KEY_CLASSES))

    @property
    def jobs(self):
        return self.get(SettingsKeys.SETTINGS_KEY_JOBS)

    def extents(self):
        return BevExtents(
            self.get(SettingsKeys.SETTINGS_KEY_BEV_X_MIN),
            self.get(SettingsKeys.SETTINGS_KEY_BEV_X_MAX),
            self.get(SettingsKeys.SETTINGS_KEY_BEV_Y_MIN),
            self.get(SettingsKeys.SETTINGS_KEY_BEV_Y_MAX),
        )

    @property
    def resolution(self):
        return self.get(SettingsKeys.SETTINGS_KEY_BEV_RESOLUTION)

    def sliceRange(self):
        return (self.get(SettingsKeys.SETTINGS_KEY_BEV_Z_LO), self.get(SettingsKeys.SETTINGS_KEY_BEV_Z_HI))

    @property
    def nSlices(self):
        return self.get(SettingsKeys.SETTINGS_KEY_BEV_SLICES)

    def imageSize(self):
        return (self.get(SettingsKeys.SETTINGS_KEY_IMAGE_WIDTH), self.get(SettingsKeys.SETTINGS_KEY_IMAGE_HEIGHT))

    @property
    def sensorHeight(self):
        return self.get(SettingsKeys.SETTINGS_KEY_SENSOR_HEIGHT)

    @property
    def stride(self):
        return self.get(SettingsKeys.SETTINGS_KEY_ANCHOR_STRIDE)

    @property
    def useRotatedLabelIou(self):
        return self.get(SettingsKeys.SETTINGS_KEY_ANCHOR_LABEL_ROTATED_IOU)

    def clusterCount(self, className):
        return self.get(SettingsKeys.SETTINGS_KEY_ANCHOR_CLUSTERS_PREFIX + className)

    def anchorSizes(self, className):
        """
        sizes from the cluster file when one is configured and lists the class, else the
        configured anchors.size.<class>
        """
        clusterFile = self.get(SettingsKeys.SETTINGS_KEY_ANCHOR_CLUSTER_FILE)
        if StringUtils.isNotEmpty(clusterFile):
            if self._clusterCache is None:
                self._clusterCache = readClusters(clusterFile, self._logger)
            if className in self._clusterCache:
                return list(self._clusterCache[className])
            self._logger.warning(
                "Cluster file '" + clusterFile + "' has no entry for '" + className + "', using configured sizes"
            )
        return list(self.get(SettingsKeys.SETTINGS_KEY_ANCHOR_SIZES_PREFIX + className))

    def labelThresholds(self, className):
        return (
            self.get(SettingsKeys.SETTINGS_KEY_LABEL_BACKGROUND_IOU_PREFIX + className),
            self.get(SettingsKeys.SETTINGS_KEY_LABEL_OBJECT_IOU_PREFIX + className),
        )

    def regressionMinIou(self, className):
        return self.get(SettingsKeys.SETTINGS_KEY_REGRESSION_IOU_PREFIX + className)

    @property
    def proposalNmsIou(self):
        return self.get(SettingsKeys.SETTINGS_KEY_NMS_PROPOSAL_IOU)

    def proposalKeep(self, className, training):
        if training:
            return self.get(SettingsKeys.SETTINGS_KEY_NMS_PROPOSAL_KEEP_TRAIN)
        return self.get(SettingsKeys.SETTINGS_KEY_NMS_PROPOSAL_KEEP_PREFIX + className)

    @property
    def detectionNmsIou(self):
        return self.get(SettingsKeys.SETTINGS_KEY_NMS_DETECTION_IOU)

    @property
    def detectionKeep(self):
        return self.get(SettingsKeys.SETTINGS_KEY_NMS_DETECTION_KEEP)

    def evalIou(self, className):
        return self.get(SettingsKeys.SETTINGS_KEY_EVAL_IOU_PREFIX + className)

    @property
    def interpolation(self):
        return self.get(SettingsKeys.SETTINGS_KEY_EVAL_INTERPOLATION)

    def difficultyTable(self):
        return metrics.DifficultyTable(
            self.get(SettingsKeys.SETTINGS_KEY_DIFFICULTY_MIN_HEIGHT),
            self.get(SettingsKeys.SETTINGS_KEY_DIFFICULTY_MAX_OCCLUSION),
            self.get(SettingsKeys.SETTINGS_KEY_DIFFICULTY_MAX_TRUNCATION),
        )

    @property
    def recallIou(self):
        return self.get(SettingsKeys.SETTINGS_KEY_RECALL_IOU)

    def recallDifficulty(self):
        difficulty = Difficulty.fromName(self.get(SettingsKeys.SETTINGS_KEY_RECALL_DIFFICULTY))
        if difficulty == Difficulty.EXCLUDED:
            raise ConfigError("eval.recall_difficulty must be easy, moderate or hard")
        return difficulty

    @property
    def recallNValues(self):
        return list(self.get(SettingsKeys.SETTINGS_KEY_RECALL_N_VALUES))

    @property
    def networkConfigFile(self):
        return self.get(SettingsKeys.SETTINGS_KEY_NETWORK_CONFIG_FILE)

    def networkInput(self):
        return tuple(self.get(SettingsKeys.SETTINGS_KEY_NETWORK_INPUT))

    @property
    def numClasses(self):
        return self.get(SettingsKeys.SETTINGS_KEY_NETWORK_NUM_CLASSES)

    def memoryArguments(self):
        """
        (n_rois, crop, depth, bytes_per_element) of the netinfo memory row
        """
        return (
            self.get(SettingsKeys.SETTINGS_KEY_NETINFO_ROIS),
            tuple(self.get(SettingsKeys.SETTINGS_KEY_NETINFO_CROP)),
            self.get(SettingsKeys.SETTINGS_KEY_NETINFO_DEPTH),
            self.get(SettingsKeys.SETTINGS_KEY_NETINFO_BYTES),
        )

    def lossWeights(self):
        """
        (box, orientation, classification) weights of the multi-task loss
        """
        return (
            self.get(SettingsKeys.SETTINGS_KEY_LOSS_BOX_WEIGHT),
            self.get(SettingsKeys.SETTINGS_KEY_LOSS_ORIENTATION_WEIGHT),
            self.get(SettingsKeys.SETTINGS_KEY_LOSS_CLASS_WEIGHT),
        )

    @property
    def loggingLevel(self):
        return str(self.get(SettingsKeys.SETTINGS_KEY_LOGGING_LEVEL)).upper()


def load_run_settings(configFile=None, overrides=None, parentLogger=None):
    settings = RunSettings(parentLogger)
    if configFile is not None:
        with open(configFile, "r") as file:
            settings.applyText(file.read())
    settings.applyOverrides(overrides)
    return settings
