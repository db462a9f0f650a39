# coding=utf-8
"""
Batch commands over a KITTI object devkit tree: BEV dumps, anchor grids, proposal recall,
AP / AHS evaluation, box codec checks and network accounting.
"""
import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from itertools import repeat

from tqdm import tqdm

from kitti_DetectionCore import anchor_grid, metrics, net_shapes
from kitti_DetectionCore.api import Transformer
from kitti_DetectionCore.common import CSVExportImporter, StringUtils
from kitti_DetectionCore.common.DetectionErrors import DetectionCoreError
from kitti_DetectionCore.common.SettingsKeys import SettingsKeys
from kitti_DetectionCore.FrameProcessor import DIR_LABELS, FRAMES_ALL, FrameProcessor
from kitti_DetectionCore.geom import iou_3d
from kitti_DetectionCore.models.EvalModels import EVALUATED_DIFFICULTIES
from kitti_DetectionCore.run_settings import load_run_settings
from kitti_DetectionCore.WrappedLoggingHandler import captureWarnings, releaseWarnings

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2

LOGGER_NAME = "kitti_DetectionCore"

_logger = logging.getLogger(LOGGER_NAME)


def _frameProcessor(settings):
    return FrameProcessor(logging.getLogger(LOGGER_NAME), settings)


def _runPerFrame(worker, settings, extra, frameIds, description):
    """
    results in frameIds order whatever the number of jobs
    """
    progress = dict(total=len(frameIds), desc=description, unit="frame", file=sys.stderr, disable=None)
    if settings.jobs <= 1 or len(frameIds) <= 1:
        return [worker(settings, extra, frameId) for frameId in tqdm(frameIds, **progress)]
    with ProcessPoolExecutor(max_workers=settings.jobs) as executor:
        return list(tqdm(executor.map(worker, repeat(settings), repeat(extra), frameIds), **progress))


def _ensureDirectory(directory):
    if not os.path.isdir(directory):
        os.makedirs(directory)
    return directory


############################################################################################## WORKERS
def _bevWorker(settings, extra, frameId):
    processor = _frameProcessor(settings)
    prepared = processor.prepareFrame(processor.loadFrame(frameId))
    return processor.writeBevDump(prepared, settings.outputDir)


def _anchorWorker(settings, extra, frameId):
    processor = _frameProcessor(settings)
    # anchor labels only where the frame has a label file
    withLabels = os.path.exists(processor.framePath(DIR_LABELS, frameId))
    frame = processor.loadFrame(frameId, withLabels=withLabels)
    prepared = processor.prepareFrame(frame)
    anchorDir = os.path.join(settings.outputDir, "anchors")
    rows = []
    for className in settings.classes:
        anchors, nonEmpty = processor.anchorsForClass(prepared, className)
        CSVExportImporter.writeAnchors(nonEmpty, os.path.join(anchorDir, frameId + "_" + className + ".csv"))
        row = {
            CSVExportImporter.COLUMN_FRAME: frameId,
            CSVExportImporter.COLUMN_CLASS: className,
            CSVExportImporter.COLUMN_ANCHORS: anchors.shape[0],
            CSVExportImporter.COLUMN_NON_EMPTY: nonEmpty.shape[0],
        }
        if withLabels:
            row.update(processor.labelAnchors(frame, nonEmpty, className))
        rows.append(row)
    return rows


def _encodeWorker(settings, extra, frameId):
    processor = _frameProcessor(settings)
    return processor.encodeObjects(processor.loadFrame(frameId, withLabels=True))


def _recallWorker(settings, extra, frameId):
    proposalDir, labelDir, className, suppress = extra
    return _frameProcessor(settings).recallInputs(frameId, proposalDir, className, labelDir, suppress)


def _evalWorker(settings, extra, frameId):
    detectionDir, labelDir, suppressedDir = extra
    return _frameProcessor(settings).evaluationInputs(frameId, detectionDir, labelDir, suppressedDir)


############################################################################################## COMMANDS
def cmd_bev(args, settings):
    processor = _frameProcessor(settings)
    frameIds = processor.discoverFrameIds(args.frames)
    rows = _runPerFrame(_bevWorker, settings, None, frameIds, "bev")
    statsFile = os.path.join(_ensureDirectory(settings.outputDir), "bev_stats.csv")
    CSVExportImporter.writeCSV(CSVExportImporter.BEV_STATS_TABLE, rows, statsFile)
    for row in rows:
        print(
            row[CSVExportImporter.COLUMN_FRAME]
            + " points="
            + str(row[CSVExportImporter.COLUMN_POINTS])
            + " in_view="
            + str(row[CSVExportImporter.COLUMN_POINTS_FOV])
        )
    _logger.info("Wrote BEV dumps of " + str(len(rows)) + " frames to '" + settings.outputDir + "'")
    return EXIT_OK


def _writeClusterFile(processor, settings, frameIds, clusterFile):
    labels = []
    for frameId in frameIds:
        labels.extend(processor.loadLabels(frameId))
    clusters = dict(
        (className, anchor_grid.cluster_dimensions(labels, className, settings.clusterCount(className)))
        for className in settings.classes
    )
    CSVExportImporter.writeClusters(clusters, clusterFile)
    settings.setValue(SettingsKeys.SETTINGS_KEY_ANCHOR_CLUSTER_FILE, clusterFile)
    _logger.info("Wrote anchor clusters of " + str(len(labels)) + " labels to '" + clusterFile + "'")


def cmd_anchors(args, settings):
    processor = _frameProcessor(settings)
    frameIds = processor.discoverFrameIds(args.frames)
    _ensureDirectory(os.path.join(settings.outputDir, "anchors"))
    if args.write_clusters is not None:
        _writeClusterFile(processor, settings, frameIds, args.write_clusters)
    perFrame = _runPerFrame(_anchorWorker, settings, None, frameIds, "anchors")
    rows = [row for frameRows in perFrame for row in frameRows]
    CSVExportImporter.writeCSV(
        CSVExportImporter.ANCHOR_COUNT_TABLE, rows, os.path.join(settings.outputDir, "anchor_counts.csv")
    )
    for row in rows:
        print(
            row[CSVExportImporter.COLUMN_FRAME]
            + " "
            + row[CSVExportImporter.COLUMN_CLASS]
            + " anchors="
            + str(row[CSVExportImporter.COLUMN_ANCHORS])
            + " non_empty="
            + str(row[CSVExportImporter.COLUMN_NON_EMPTY])
            + " objects="
            + str(row.get(CSVExportImporter.COLUMN_OBJECT_ANCHORS, "-"))
        )
    return EXIT_OK


def _labelFrameIds(processor, settings, args):
    labelDir = args.labels if args.labels is not None else os.path.join(settings.dataRoot, DIR_LABELS)
    return labelDir, processor.discoverFrameIds(args.frames, labelDir)


def cmd_recall(args, settings):
    processor = _frameProcessor(settings)
    labelDir, frameIds = _labelFrameIds(processor, settings, args)
    _ensureDirectory(settings.outputDir)
    for className in settings.classes:
        inputs = _runPerFrame(
            _recallWorker, settings, (args.proposals, labelDir, className, args.nms), frameIds, "recall " + className
        )
        curve = metrics.recall_curve(
            [proposals for proposals, _ in inputs],
            [gts for _, gts in inputs],
            settings.recallNValues,
            iou_3d,
            settings.recallIou,
        )
        CSVExportImporter.writeCSV(
            CSVExportImporter.RECALL_TABLE,
            Transformer.transformRecallCurveToRows(curve),
            os.path.join(settings.outputDir, "recall_" + className + ".csv"),
        )
        for n, recall in curve:
            print(className + " n=" + str(n) + " recall=" + StringUtils.formatPercent(recall))
    return EXIT_OK


def cmd_eval(args, settings):
    processor = _frameProcessor(settings)
    labelDir, frameIds = _labelFrameIds(processor, settings, args)
    evalDir = _ensureDirectory(os.path.join(settings.outputDir, "eval"))
    suppressedDir = _ensureDirectory(os.path.join(evalDir, "detections")) if args.nms else None
    frames = _runPerFrame(_evalWorker, settings, (args.detections, labelDir, suppressedDir), frameIds, "eval")
    table = settings.difficultyTable()
    results = []
    for className in settings.classes:
        for iouSpace in (metrics.IOU_SPACE_3D, metrics.IOU_SPACE_BEV):
            for difficulty in EVALUATED_DIFFICULTIES:
                result = metrics.evaluate_class(
                    frames,
                    className,
                    difficulty,
                    iouSpace,
                    settings.evalIou(className),
                    settings.interpolation,
                    table,
                )
                results.append(result)
                CSVExportImporter.writeCSV(
                    CSVExportImporter.PR_TABLE,
                    Transformer.transformPrCurveToRows(result.curve),
                    os.path.join(evalDir, "pr_" + className + "_" + difficulty.label + "_" + iouSpace + ".csv"),
                )
    summary = Transformer.transformEvaluationSummary(results)
    with open(os.path.join(evalDir, "summary.txt"), "w") as summaryFile:
        summaryFile.write(summary)
    sys.stdout.write(summary)
    return EXIT_OK


def cmd_encode(args, settings):
    processor = _frameProcessor(settings)
    frameIds = processor.discoverFrameIds(args.frames)
    perFrame = _runPerFrame(_encodeWorker, settings, None, frameIds, "encode")
    rows = [row for frameRows in perFrame for row in frameRows]
    encodeFile = os.path.join(_ensureDirectory(settings.outputDir), "encode.csv")
    CSVExportImporter.writeCSV(CSVExportImporter.ENCODE_TABLE, rows, encodeFile)
    _logger.info("Wrote codec errors of " + str(len(rows)) + " objects to '" + encodeFile + "'")
    return EXIT_OK


def cmd_netinfo(args, settings):
    if StringUtils.isNotEmpty(settings.networkConfigFile):
        with open(settings.networkConfigFile, "r") as configFile:
            config = net_shapes.load_network_config(configFile.read())
    else:
        config = net_shapes.default_network_config(settings.numClasses, settings.networkInput()[2])
    shapes = net_shapes.propagate_shapes(config, settings.networkInput())
    memoryArguments = settings.memoryArguments()
    memoryBytes = net_shapes.memory_estimate(*memoryArguments)
    text = Transformer.transformNetworkTable(shapes, memoryBytes, memoryArguments, settings.lossWeights())
    with open(os.path.join(_ensureDirectory(settings.outputDir), "netinfo.txt"), "w") as netinfoFile:
        netinfoFile.write(text)
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "bev": cmd_bev,
    "anchors": cmd_anchors,
    "recall": cmd_recall,
    "eval": cmd_eval,
    "encode": cmd_encode,
    "netinfo": cmd_netinfo,
}


############################################################################################## PARSER
def buildParser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--frames", default=FRAMES_ALL, help="'all' or ids like '0,3,7-9'")
    common.add_argument("--classes", help="comma separated: car, pedestrian, cyclist")
    common.add_argument("--jobs", type=int, help="worker processes")
    common.add_argument("--output", help="output directory")
    common.add_argument("--data-root", dest="data_root", help="KITTI object tree (velodyne/, calib/, ...)")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="override a setting"
    )
    common.add_argument("--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="kitti-detection-core", description=__doc__.strip())
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True

    subparsers.add_parser("bev", parents=[common], help="BEV channel dumps and point counts")
    anchors = subparsers.add_parser("anchors", parents=[common], help="non-empty anchor grids")
    anchors.add_argument("--write-clusters", dest="write_clusters", metavar="CSV", help="cluster label sizes first")
    recall = subparsers.add_parser("recall", parents=[common], help="3D recall vs. number of proposals")
    recall.add_argument("--proposals", required=True, help="directory of ranked proposals, KITTI format")
    recall.add_argument("--labels", help="ground truth directory (default <data-root>/label_2)")
    recall.add_argument("--nms", action="store_true", help="proposal NMS (nms.proposal_iou, nms.proposal_keep.*) first")
    evaluation = subparsers.add_parser("eval", parents=[common], help="AP and AHS per class and difficulty")
    evaluation.add_argument("--detections", required=True, help="directory of scored detections, KITTI format")
    evaluation.add_argument("--labels", help="ground truth directory (default <data-root>/label_2)")
    evaluation.add_argument(
        "--nms", action="store_true", help="final NMS (nms.detection_iou, nms.detection_keep) into eval/detections"
    )
    subparsers.add_parser("encode", parents=[common], help="box codec round trip errors per object")
    subparsers.add_parser("netinfo", parents=[common], help="layer shapes, parameters, FLOPs and memory")
    return parser


def _settingsFromArguments(args):
    settings = load_run_settings(args.config, args.overrides, _logger)
    if args.data_root is not None:
        settings.setValue(SettingsKeys.SETTINGS_KEY_DATA_ROOT, args.data_root)
    if args.output is not None:
        settings.setValue(SettingsKeys.SETTINGS_KEY_OUTPUT_DIR, args.output)
    if args.jobs is not None:
        settings.setValue(SettingsKeys.SETTINGS_KEY_JOBS, args.jobs)
    if args.classes is not None:
        settings.setValue(SettingsKeys.SETTINGS_KEY_CLASSES, args.classes.replace(",", " ").split())
    return settings.validate()


def main(argv=None):
    args = buildParser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    warningHandler = captureWarnings(_logger)
    try:
        settings = _settingsFromArguments(args)
        _logger.setLevel(logging.DEBUG if args.verbose else settings.loggingLevel)
        return COMMANDS[args.command](args, settings)
    except (DetectionCoreError, OSError) as e:
        sys.stderr.write("error: " + str(e) + "\n")
        return EXIT_ERROR
    finally:
        releaseWarnings(warningHandler)


if __name__ == "__main__":
    sys.exit(main())
