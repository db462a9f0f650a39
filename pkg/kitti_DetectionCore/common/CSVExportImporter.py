# coding=utf-8

import csv
import re
from io import StringIO

import numpy as np

from kitti_DetectionCore.common import StringUtils
from kitti_DetectionCore.common.DetectionErrors import MalformedInputError

COLUMN_TX = "tx"
COLUMN_TY = "ty"
COLUMN_TZ = "tz"
COLUMN_DX = "dx"
COLUMN_DY = "dy"
COLUMN_DZ = "dz"
COLUMN_CLASS = "class"
COLUMN_K_INDEX = "k_index"
COLUMN_RECALL = "recall"
COLUMN_PRECISION = "precision"
COLUMN_SIMILARITY = "similarity"
COLUMN_SCORE = "score"
COLUMN_N = "n"
COLUMN_FRAME = "frame"
COLUMN_POINTS = "points"
COLUMN_POINTS_FOV = "points_fov"
COLUMN_ANCHORS = "anchors"
COLUMN_NON_EMPTY = "non_empty"
COLUMN_OBJECT_ANCHORS = "object_anchors"
COLUMN_BACKGROUND_ANCHORS = "background_anchors"
COLUMN_IGNORED_ANCHORS = "ignored_anchors"
COLUMN_REGRESSION_ANCHORS = "regression_anchors"
COLUMN_OBJECT = "object"
COLUMN_FOUR_CORNER_ERROR = "four_corner_error"
COLUMN_EIGHT_CORNER_ERROR = "eight_corner_error"
COLUMN_FIT_CENTER_ERROR = "fit_center_error"
COLUMN_YAW_ERROR = "yaw_error"
COLUMN_YAW_ERROR_BASELINE = "yaw_error_without_vector"


#############################################################################################################
class CSVColumn:
    fieldName = ""
    columnLabel = ""
    description = ""
    formattorParser = None

    def __init__(self, fieldName, columnLabel, description, formattorParser):
        self.fieldName = fieldName
        self.columnLabel = columnLabel
        self.description = description
        self.formattorParser = formattorParser

    def getCSV(self, row):
        return self.formattorParser.formatValue(row, self.fieldName)

    def parseAndAssignFieldValue(self, fieldValue, row, errorCollection, lineNumber):
        try:
            self.formattorParser.parseAndAssignFieldValue(
                self.columnLabel, self.fieldName, fieldValue, row, errorCollection, lineNumber
            )
        except Exception as e:
            errorMessage = re.sub(r"[^a-zA-Z0-9()._ ]", " ", str(e))
            errorCollection.append(
                "["
                + str(lineNumber)
                + "] "
                + "Error parsing value '"
                + fieldValue
                + "' for field '"
                + self.columnLabel
                + "': "
                + errorMessage
            )


class DefaultCSVFormattorParser:
    def formatValue(self, row, fieldName):
        value = row.get(fieldName)
        if value is None:
            return "-"
        return str(value).replace("\n", " ").replace("\r", "")

    def parseAndAssignFieldValue(
        self, fieldLabel, fieldName, fieldValue, row, errorCollection, lineNumber
    ):
        row[fieldName] = fieldValue


class FloatCSVFormattorParser:
    """
    digits=None writes the shortest text that reads back to the same float
    """

    def __init__(self, digits=6):
        self.digits = digits

    def formatValue(self, row, fieldName):
        value = row.get(fieldName)
        if value is None:
            return "-"
        if self.digits is None:
            return repr(float(value))
        return StringUtils.formatFloat(value, self.digits)

    def parseAndAssignFieldValue(
        self, fieldLabel, fieldName, fieldValue, row, errorCollection, lineNumber
    ):
        value = float(fieldValue)
        if not np.isfinite(value):
            raise ValueError("value is not finite")
        row[fieldName] = value


class IntCSVFormattorParser:
    def formatValue(self, row, fieldName):
        value = row.get(fieldName)
        if value is None:
            return "-"
        return StringUtils.formatInt(value)

    def parseAndAssignFieldValue(
        self, fieldLabel, fieldName, fieldValue, row, errorCollection, lineNumber
    ):
        row[fieldName] = int(fieldValue)


class CSVTable:
    """
    ordered columns of one file layout; every column is mandatory on import
    """

    def __init__(self, columns):
        self.columns = list(columns)
        self.columnsByLabel = dict((column.columnLabel, column) for column in self.columns)

    @property
    def header(self):
        return [column.columnLabel for column in self.columns]


def _floatColumn(label, digits=6):
    return CSVColumn(label, label, "", FloatCSVFormattorParser(digits))


def _intColumn(label):
    return CSVColumn(label, label, "", IntCSVFormattorParser())


def _textColumn(label):
    return CSVColumn(label, label, "", DefaultCSVFormattorParser())


######################################################################################################################
## FILE LAYOUTS
ANCHOR_TABLE = CSVTable(
    [_floatColumn(label, None) for label in (COLUMN_TX, COLUMN_TY, COLUMN_TZ, COLUMN_DX, COLUMN_DY, COLUMN_DZ)]
)
CLUSTER_TABLE = CSVTable(
    [
        _textColumn(COLUMN_CLASS),
        _intColumn(COLUMN_K_INDEX),
        _floatColumn(COLUMN_DX, None),
        _floatColumn(COLUMN_DY, None),
        _floatColumn(COLUMN_DZ, None),
    ]
)
PR_TABLE = CSVTable(
    [
        _floatColumn(COLUMN_RECALL),
        _floatColumn(COLUMN_PRECISION),
        _floatColumn(COLUMN_SIMILARITY),
        _floatColumn(COLUMN_SCORE),
    ]
)
RECALL_TABLE = CSVTable([_intColumn(COLUMN_N), _floatColumn(COLUMN_RECALL)])
BEV_STATS_TABLE = CSVTable(
    [_textColumn(COLUMN_FRAME), _intColumn(COLUMN_POINTS), _intColumn(COLUMN_POINTS_FOV)]
)
ANCHOR_COUNT_TABLE = CSVTable(
    [
        _textColumn(COLUMN_FRAME),
        _textColumn(COLUMN_CLASS),
        _intColumn(COLUMN_ANCHORS),
        _intColumn(COLUMN_NON_EMPTY),
        _intColumn(COLUMN_OBJECT_ANCHORS),
        _intColumn(COLUMN_BACKGROUND_ANCHORS),
        _intColumn(COLUMN_IGNORED_ANCHORS),
        _intColumn(COLUMN_REGRESSION_ANCHORS),
    ]
)
ENCODE_TABLE = CSVTable(
    [
        _textColumn(COLUMN_FRAME),
        _intColumn(COLUMN_OBJECT),
        _textColumn(COLUMN_CLASS),
        _floatColumn(COLUMN_FOUR_CORNER_ERROR, 9),
        _floatColumn(COLUMN_EIGHT_CORNER_ERROR, 9),
        _floatColumn(COLUMN_FIT_CENTER_ERROR, 9),
        _floatColumn(COLUMN_YAW_ERROR, 9),
        _floatColumn(COLUMN_YAW_ERROR_BASELINE, 9),
    ]
)


def _csvLine(values):
    buffer = StringIO()
    csv.writer(buffer, lineterminator="\n").writerow(values)
    return buffer.getvalue()


def transform2CSV(table, rows):
    yield _csvLine(table.header)
    if rows != None:
        for row in rows:
            yield _csvLine([column.getCSV(row) for column in table.columns])


def writeCSV(table, rows, fileName):
    with open(fileName, "w", newline="") as csvFile:
        for line in transform2CSV(table, rows):
            csvFile.write(line)


########################################################################################################## -> IMPORT CSV
def parseCSV(table, csvFile4Import, errorCollection, logger):
    """
    rows as dicts keyed by column label; problems are appended to errorCollection as
    "[lineNumber] ..." and the offending rows skipped
    """
    result = list()
    lineNumber = 0
    columnOrderInFile = dict()
    try:
        with open(csvFile4Import, newline="") as csv_file:
            csv_reader = csv.reader(csv_file, delimiter=",")
            for row in csv_reader:
                lineNumber += 1
                if lineNumber == 1:
                    for columnIndex, column in enumerate(row):
                        column = column.strip()
                        if column in table.columnsByLabel:
                            columnOrderInFile[columnIndex] = table.columnsByLabel[column]
                    available = set(c.columnLabel for c in columnOrderInFile.values())
                    missing = [label for label in table.header if label not in available]
                    if len(missing) > 0:
                        errorCollection.append(
                            "[1] Mandatory column is missing! '" + "', '".join(missing) + "'"
                        )
                        break
                    continue
                if len(row) == 0 or all(len(value.strip()) == 0 for value in row):
                    continue

                errorCountBefore = len(errorCollection)
                parsedRow = dict()
                for columnIndex, csvColumn in columnOrderInFile.items():
                    if columnIndex >= len(row) or len(row[columnIndex].strip()) == 0:
                        errorCollection.append(
                            "["
                            + str(lineNumber)
                            + "] Mandatory value for column '"
                            + csvColumn.columnLabel
                            + "' is missing!"
                        )
                        continue
                    csvColumn.parseAndAssignFieldValue(
                        row[columnIndex].strip(), parsedRow, errorCollection, lineNumber
                    )
                if len(errorCollection) != errorCountBefore:
                    logger.error("Reading error line '" + str(lineNumber) + "'")
                else:
                    result.append(parsedRow)
    except (OSError, csv.Error) as e:
        errorMessage = (
            "CSV Parsing error. Line:'"
            + str(lineNumber)
            + "' Error:'"
            + str(e)
            + "' File:'"
            + str(csvFile4Import)
            + "'"
        )
        errorCollection.append(errorMessage)
        logger.error(errorMessage)
    return result


def _raiseCollected(errorCollection, fileName):
    if len(errorCollection) > 0:
        raise MalformedInputError(
            "could not read '" + str(fileName) + "': " + "; ".join(errorCollection[:5])
        )


######################################################################################################################
## ANCHORS / CLUSTERS
def writeAnchors(anchors, fileName):
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 6)
    labels = ANCHOR_TABLE.header
    writeCSV(ANCHOR_TABLE, (dict(zip(labels, row)) for row in anchors), fileName)


def readAnchors(fileName, logger):
    errorCollection = list()
    rows = parseCSV(ANCHOR_TABLE, fileName, errorCollection, logger)
    _raiseCollected(errorCollection, fileName)
    labels = ANCHOR_TABLE.header
    return np.array([[row[label] for label in labels] for row in rows], dtype=np.float64).reshape(-1, 6)


def writeClusters(clustersByClass, fileName):
    rows = []
    for className in sorted(clustersByClass):
        for kIndex, (dx, dy, dz) in enumerate(clustersByClass[className]):
            rows.append(
                {COLUMN_CLASS: className, COLUMN_K_INDEX: kIndex, COLUMN_DX: dx, COLUMN_DY: dy, COLUMN_DZ: dz}
            )
    writeCSV(CLUSTER_TABLE, rows, fileName)


def readClusters(fileName, logger):
    """
    class -> [(dx, dy, dz), ...] in k_index order
    """
    errorCollection = list()
    rows = parseCSV(CLUSTER_TABLE, fileName, errorCollection, logger)
    _raiseCollected(errorCollection, fileName)
    indexed = dict()
    for row in rows:
        indexed.setdefault(row[COLUMN_CLASS], []).append(
            (row[COLUMN_K_INDEX], (row[COLUMN_DX], row[COLUMN_DY], row[COLUMN_DZ]))
        )
    return dict(
        (className, [size for _, size in sorted(entries, key=lambda item: item[0])])
        for className, entries in indexed.items()
    )
