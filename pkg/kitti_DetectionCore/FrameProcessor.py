# coding=utf-8
import logging
import math
import os

import numpy as np

from kitti_DetectionCore import anchor_grid, bev, box_codec, geom, kitti_io, metrics
from kitti_DetectionCore.api import Transformer
from kitti_DetectionCore.common import CSVExportImporter, StringUtils
from kitti_DetectionCore.common.DetectionErrors import (
    DegenerateGeometryError,
    ParameterError,
)
from kitti_DetectionCore.models.BevModels import PreparedFrame
from kitti_DetectionCore.models.BoxModels import AnchorLabelKind, OrientedBox3D, wrap_angle
from kitti_DetectionCore.models.KittiModels import KittiFrame

DIR_VELODYNE = "velodyne"
DIR_CALIB = "calib"
DIR_LABELS = "label_2"
DIR_PLANES = "planes"

EXTENSION_BY_DIR = {DIR_VELODYNE: ".bin", DIR_CALIB: ".txt", DIR_LABELS: ".txt", DIR_PLANES: ".txt"}
FRAMES_ALL = "all"


def parseFrameSpec(frameSpec):
    """
    "3, 7-9" -> ["000003", "000007", "000008", "000009"]
    """
    frameIds = set()
    for token in frameSpec.replace(",", " ").split():
        first, separator, last = token.partition("-")
        try:
            if separator == "-":
                frameIds.update(range(int(first), int(last) + 1))
            else:
                frameIds.add(int(token))
        except ValueError:
            raise ParameterError("bad frame id '" + token + "'")
    return [StringUtils.formatFrameId(frameId) for frameId in sorted(frameIds)]


def _ringError(decoded, expected):
    """
    largest corner distance after the best cyclic alignment of two corner rings; an (8, 3)
    ring pair shifts bottom and top together
    """
    decoded = np.asarray(decoded, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    best = math.inf
    for shift in range(4):
        if decoded.shape[0] == 8:
            rolled = np.vstack([np.roll(expected[:4], -shift, axis=0), np.roll(expected[4:], -shift, axis=0)])
        else:
            rolled = np.roll(expected, -shift, axis=0)
        best = min(best, float(np.linalg.norm(decoded - rolled, axis=1).max()))
    return best


class FrameProcessor:
    def __init__(self, parentLogger, settings):
        self._logger = logging.getLogger(parentLogger.name + "." + self.__class__.__name__)
        self._settings = settings

    def framePath(self, kind, frameId, root=None):
        root = self._settings.dataRoot if root is None else root
        return os.path.join(root, kind, frameId + EXTENSION_BY_DIR.get(kind, ".txt"))

    def discoverFrameIds(self, frameSpec=FRAMES_ALL, directory=None):
        """
        sorted 6-digit stems; "all" lists the directory (velodyne scans by default)
        """
        if StringUtils.isNotEmpty(frameSpec) and frameSpec.strip().lower() != FRAMES_ALL:
            return parseFrameSpec(frameSpec)
        directory = os.path.join(self._settings.dataRoot, DIR_VELODYNE) if directory is None else directory
        frameIds = []
        for fileName in os.listdir(directory):
            stem, extension = os.path.splitext(fileName)
            if stem.isdigit() and len(stem) == 6:
                frameIds.append(stem)
        frameIds.sort()
        self._logger.debug("Found " + str(len(frameIds)) + " frames in '" + directory + "'")
        return frameIds

    ################################################################################################ loading
    def _readText(self, fileName):
        with open(fileName, "r") as textFile:
            return textFile.read()

    def loadCalibration(self, frameId, required=True):
        fileName = self.framePath(DIR_CALIB, frameId)
        if not required and not os.path.exists(fileName):
            return None
        return kitti_io.load_calibration(self._readText(fileName))

    def loadLabels(self, frameId, labelDir=None):
        if labelDir is None:
            fileName = self.framePath(DIR_LABELS, frameId)
        else:
            fileName = os.path.join(labelDir, frameId + ".txt")
        return kitti_io.load_labels(self._readText(fileName))

    def loadDetections(self, frameId, detectionDir, calib=None):
        """
        a frame without a detection file has no detections
        """
        fileName = os.path.join(detectionDir, frameId + ".txt")
        if not os.path.exists(fileName):
            self._logger.debug("No detections for frame " + frameId)
            return []
        return kitti_io.load_detections(self._readText(fileName), calib)

    def loadFrame(self, frameId, withLabels=False):
        with open(self.framePath(DIR_VELODYNE, frameId), "rb") as cloudFile:
            cloud = kitti_io.load_point_cloud(cloudFile.read())
        calib = self.loadCalibration(frameId)
        labels = tuple(self.loadLabels(frameId)) if withLabels else tuple()

        planeFile = self.framePath(DIR_PLANES, frameId)
        if os.path.exists(planeFile):
            plane = kitti_io.load_ground_plane(self._readText(planeFile))
            planeFromFile = True
        else:
            plane = kitti_io.default_ground_plane(self._settings.sensorHeight)
            planeFromFile = False
        return KittiFrame(
            frame_id=frameId,
            cloud=cloud,
            calib=calib,
            labels=labels,
            plane=plane,
            plane_from_file=planeFromFile,
        )

    ################################################################################################ pipeline
    def prepareFrame(self, frame):
        """
        FOV crop first, then heights above the ground plane, then BEV map and integral
        """
        extents = self._settings.extents()
        resolution = self._settings.resolution
        fovCloud = kitti_io.filter_fov(frame.cloud, frame.calib, self._settings.imageSize(), extents)
        lidarPlane = kitti_io.ground_plane_in_lidar(frame.plane, frame.calib)
        groundCloud = kitti_io.to_ground_relative(fovCloud, lidarPlane)
        bevMap = bev.build_bev_map(
            groundCloud,
            extents,
            resolution,
            self._settings.sliceRange(),
            self._settings.nSlices,
        )
        integral = bev.build_occupancy_integral(fovCloud, extents, resolution)
        self._logger.debug(
            "Frame " + frame.frame_id + ": " + str(len(frame.cloud)) + " points, " + str(len(fovCloud)) + " in view"
        )
        return PreparedFrame(
            frame_id=frame.frame_id,
            point_count=len(frame.cloud),
            fov_cloud=fovCloud,
            ground_cloud=groundCloud,
            lidar_plane=lidarPlane,
            bev_map=bevMap,
            integral=integral,
        )

    def writeBevDump(self, prepared, outputDir):
        directory = os.path.join(outputDir, "bev", prepared.frame_id)
        bev.write_bev_channels(prepared.bev_map, directory)
        return {
            CSVExportImporter.COLUMN_FRAME: prepared.frame_id,
            CSVExportImporter.COLUMN_POINTS: prepared.point_count,
            CSVExportImporter.COLUMN_POINTS_FOV: len(prepared.fov_cloud),
        }

    def anchorsForClass(self, prepared, className):
        """
        (all anchors, non-empty anchors) as (N, 6) arrays
        """
        anchors = anchor_grid.generate_anchor_grid(
            self._settings.extents(),
            self._settings.stride,
            self._settings.anchorSizes(className),
            prepared.lidar_plane,
        )
        return anchors, anchor_grid.filter_empty_anchors(anchors, prepared.integral)

    def labelAnchors(self, frame, anchors, className):
        """
        object / background / ignore counts of the anchors against the frame's labels of the
        class, plus the anchors overlapping a ground truth enough to train box regression
        """
        token = kitti_io.class_token(className)
        gts = [
            kitti_io.label_to_box(labeledObject, frame.calib)
            for labeledObject in frame.labels
            if labeledObject.class_name == token
        ]
        background, objectIou = self._settings.labelThresholds(className)
        labels = anchor_grid.assign_anchor_labels(
            anchors, gts, className, background, objectIou, self._settings.useRotatedLabelIou
        )
        regression = anchor_grid.regression_mask(anchors, gts, className, self._settings.regressionMinIou(className))
        return {
            CSVExportImporter.COLUMN_OBJECT_ANCHORS: labels.count(AnchorLabelKind.OBJECT),
            CSVExportImporter.COLUMN_BACKGROUND_ANCHORS: labels.count(AnchorLabelKind.BACKGROUND),
            CSVExportImporter.COLUMN_IGNORED_ANCHORS: labels.count(AnchorLabelKind.IGNORE),
            CSVExportImporter.COLUMN_REGRESSION_ANCHORS: int(np.count_nonzero(regression)),
        }

    def encodeObjects(self, frame):
        """
        every labelled object against its own axis-aligned box as the proposal: corner codec
        round trips, box fit and orientation resolution errors
        """
        lidarPlane = kitti_io.ground_plane_in_lidar(frame.plane, frame.calib)
        classTokens = [kitti_io.class_token(className) for className in self._settings.classes]
        rows = []
        for objectIndex, labeledObject in enumerate(frame.labels):
            if labeledObject.is_dont_care or labeledObject.class_name not in classTokens:
                continue
            gt = kitti_io.label_to_box(labeledObject, frame.calib)
            proposal = OrientedBox3D.from_anchor(box_codec.axis_aligned_box(gt))
            row = {
                CSVExportImporter.COLUMN_FRAME: frame.frame_id,
                CSVExportImporter.COLUMN_OBJECT: objectIndex,
                CSVExportImporter.COLUMN_CLASS: labeledObject.class_name,
            }

            target = box_codec.encode_four_corner(proposal, gt, lidarPlane)
            decoded = box_codec.decode_four_corner(proposal, target, lidarPlane)
            gtH1, gtH2 = box_codec.box_heights(gt, lidarPlane)
            row[CSVExportImporter.COLUMN_FOUR_CORNER_ERROR] = max(
                _ringError(decoded.corners, box_codec.corners_bev(gt)),
                abs(decoded.h_1 - gtH1),
                abs(decoded.h_2 - gtH2),
            )
            eightCorners = box_codec.decode_eight_corner(proposal, box_codec.encode_eight_corner(proposal, gt))
            row[CSVExportImporter.COLUMN_EIGHT_CORNER_ERROR] = _ringError(eightCorners, box_codec.corners_3d(gt))

            try:
                fitted = box_codec.fit_oriented_box(decoded)
            except DegenerateGeometryError as e:
                self._logger.warning(
                    "Frame " + frame.frame_id + " object " + str(objectIndex) + " could not be fitted: " + str(e)
                )
                rows.append(row)
                continue
            row[CSVExportImporter.COLUMN_FIT_CENTER_ERROR] = float(
                np.linalg.norm(fitted.box.centroid - gt.centroid)
            )
            resolved = box_codec.resolve_orientation(fitted.candidates, box_codec.orientation_to_vector(gt.yaw))
            row[CSVExportImporter.COLUMN_YAW_ERROR] = abs(wrap_angle(resolved - gt.yaw))
            baseline = box_codec.resolve_orientation_without_vector(fitted)
            row[CSVExportImporter.COLUMN_YAW_ERROR_BASELINE] = abs(wrap_angle(baseline - gt.yaw))
            rows.append(row)
        return rows

    def suppressProposals(self, boxes, scores, className):
        """
        indices of the proposals surviving axis-aligned BEV NMS, best first, capped at the
        class's inference keep count
        """
        rows = np.array([box_codec.axis_aligned_box(box).to_array() for box in boxes], dtype=np.float64)
        return anchor_grid.select_proposals(
            rows,
            scores,
            className,
            training=False,
            iou_threshold=self._settings.proposalNmsIou,
            max_keep=self._settings.proposalKeep(className, training=False),
        )

    def suppressDetections(self, detections):
        """
        final rotated BEV NMS per class; kept detections grouped by class, best first
        """
        kept = []
        for token in sorted(set(detection.class_name for detection in detections)):
            indices = [index for index, detection in enumerate(detections) if detection.class_name == token]
            keep = geom.nms(
                [detections[index].box for index in indices],
                [detections[index].score for index in indices],
                geom.iou_rotated_bev,
                self._settings.detectionNmsIou,
                self._settings.detectionKeep,
            )
            kept.extend(detections[indices[k]] for k in keep)
        if len(kept) < len(detections):
            self._logger.debug("NMS kept " + str(len(kept)) + " of " + str(len(detections)) + " detections")
        return kept

    def writeDetections(self, frameId, detections, calib, directory):
        fileName = os.path.join(directory, frameId + ".txt")
        with open(fileName, "w") as detectionFile:
            for detection in detections:
                detectionFile.write(Transformer.transformDetectionToKittiLine(detection, calib) + "\n")
        return fileName

    def recallInputs(self, frameId, proposalDir, className, labelDir=None, suppress=False):
        """
        (proposal boxes ranked best first, ground truth boxes of the class at the configured
        recall difficulty); suppress runs proposal NMS over the ranked boxes first
        """
        calib = self.loadCalibration(frameId, required=False)
        detections = self.loadDetections(frameId, proposalDir, calib)
        token = kitti_io.class_token(className)
        ranked = sorted(
            (index for index, detection in enumerate(detections) if detection.class_name == token),
            key=lambda index: (-detections[index].score, index),
        )
        if suppress:
            keep = self.suppressProposals(
                [detections[index].box for index in ranked], [detections[index].score for index in ranked], className
            )
            ranked = [ranked[k] for k in keep]
        gts = metrics.recall_ground_truth(
            self.loadLabels(frameId, labelDir),
            className,
            self._settings.recallDifficulty(),
            self._settings.difficultyTable(),
            calib,
        )
        return [detections[index].box for index in ranked], gts

    def evaluationInputs(self, frameId, detectionDir, labelDir=None, suppressedDir=None):
        """
        (detections, labels, calibration or None) of one frame. With suppressedDir the
        detections go through the final NMS and the kept ones are written there.
        """
        calib = self.loadCalibration(frameId, required=False)
        detections = self.loadDetections(frameId, detectionDir, calib)
        if suppressedDir is not None:
            detections = self.suppressDetections(detections)
            self.writeDetections(frameId, detections, calib, suppressedDir)
        return (
            detections,
            self.loadLabels(frameId, labelDir),
            calib,
        )
