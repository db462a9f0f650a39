# coding=utf-8
import dataclasses

from kitti_DetectionCore.common import CSVExportImporter, StringUtils
from kitti_DetectionCore.kitti_io import box_to_label

_NETWORK_ROW = "{:<18} {:<26} {:<16} {:<16} {:>12} {:>16}"


def transformLabelToKittiLine(labeledObject, score=None):
    fields = [
        labeledObject.class_name,
        StringUtils.formatFloat(labeledObject.truncation, 2),
        str(int(labeledObject.occlusion)),
        StringUtils.formatFloat(labeledObject.alpha, 6),
    ]
    fields += [StringUtils.formatFloat(v, 2) for v in labeledObject.bbox2d]
    fields += [StringUtils.formatFloat(v, 6) for v in labeledObject.dims]
    fields += [StringUtils.formatFloat(v, 6) for v in labeledObject.location]
    fields.append(StringUtils.formatFloat(labeledObject.rotation_y, 6))
    if score != None:
        fields.append(StringUtils.formatFloat(score, 6))
    return " ".join(fields)


def transformDetectionToKittiLine(detection, calib=None):
    # the detection's own heading wins over the yaw stored in its box
    box = dataclasses.replace(detection.box, yaw=detection.orientation)
    bbox2d = detection.bbox2d if detection.bbox2d != None else (0.0, 0.0, 0.0, 0.0)
    labeledObject = box_to_label(box, detection.class_name, calib, bbox2d)
    return transformLabelToKittiLine(labeledObject, detection.score)


def transformEvaluationResultToDict(result):
    return {
        "class": result.class_name,
        "difficulty": result.difficulty.label,
        "iouSpace": result.iou_space,
        "ap": StringUtils.formatPercent(result.average_precision),
        "ahs": StringUtils.formatPercent(result.average_heading_similarity),
        "gtCount": result.curve.n_gt if result.curve != None else 0,
    }


def transformEvaluationSummary(results):
    """
    one line per evaluated class, IoU space and difficulty; AP and AHS in percent
    """
    lines = ["class      iou  difficulty    AP      AHS"]
    for result in results:
        resultDict = transformEvaluationResultToDict(result)
        lines.append(
            "{:<10} {:<4} {:<10} {:>7} {:>7}".format(
                resultDict["class"],
                resultDict["iouSpace"],
                resultDict["difficulty"],
                resultDict["ap"],
                resultDict["ahs"],
            )
        )
    return "\n".join(lines) + "\n"


def transformPrCurveToRows(curve):
    return [
        {
            CSVExportImporter.COLUMN_RECALL: float(recall),
            CSVExportImporter.COLUMN_PRECISION: float(precision),
            CSVExportImporter.COLUMN_SIMILARITY: float(similarity),
            CSVExportImporter.COLUMN_SCORE: float(score),
        }
        for recall, precision, similarity, score in zip(
            curve.recall, curve.precision, curve.similarity, curve.thresholds
        )
    ]


def transformRecallCurveToRows(recallCurve):
    return [
        {CSVExportImporter.COLUMN_N: n, CSVExportImporter.COLUMN_RECALL: recall}
        for n, recall in recallCurve
    ]


def transformLayerShapeToDict(layerShape):
    return {
        "branch": layerShape.branch,
        "name": layerShape.name,
        "kind": layerShape.kind.value,
        "shape": StringUtils.formatShape(layerShape.shape),
        "parameters": layerShape.parameters,
        "flops": layerShape.flops,
    }


def transformNetworkTable(layerShapes, memoryBytes, memoryArguments, lossWeights=None):
    """
    per-layer table, totals, the crop memory row and the loss weights as text
    """
    lines = [_NETWORK_ROW.format("branch", "layer", "kind", "shape", "params", "flops")]
    totalParameters = 0
    totalFlops = 0
    for layerShape in layerShapes:
        layerDict = transformLayerShapeToDict(layerShape)
        totalParameters += layerDict["parameters"]
        totalFlops += layerDict["flops"]
        lines.append(
            _NETWORK_ROW.format(
                layerDict["branch"],
                layerDict["name"],
                layerDict["kind"],
                layerDict["shape"],
                layerDict["parameters"],
                layerDict["flops"],
            )
        )
    lines.append("total parameters: " + str(totalParameters))
    lines.append("total flops: " + str(totalFlops))
    nRois, crop, depth, bytesPerElement = memoryArguments
    lines.append(
        "crop memory: "
        + str(nRois)
        + " x "
        + StringUtils.formatShape(crop)
        + " x "
        + str(depth)
        + " x "
        + str(bytesPerElement)
        + " bytes = "
        + str(memoryBytes)
    )
    if lossWeights != None:
        boxWeight, orientationWeight, classWeight = lossWeights
        lines.append(
            "loss weights: box "
            + StringUtils.formatFloat(boxWeight, 2)
            + " orientation "
            + StringUtils.formatFloat(orientationWeight, 2)
            + " classification "
            + StringUtils.formatFloat(classWeight, 2)
        )
    return "\n".join(lines) + "\n"
