# coding=utf-8


def formatFloat(floatValue, digits=6):
    """
    result is a string with a fixed number of decimals or "" for None
    """
    result = ""
    if floatValue != None:
        try:
            result = "{:.{}f}".format(float(floatValue), digits)
        except ValueError:
            pass  # do nothing
    return result


def formatInt(intValue):
    result = ""
    if intValue != None:
        try:
            result = "{:.0f}".format(float(intValue))
        except ValueError:
            pass  # do nothing
    return result


def formatPercent(ratio):
    """
    0.8123 -> "81.23"
    """
    if ratio == None:
        return ""
    return "{:.2f}".format(100.0 * float(ratio))


def formatShape(shape):
    """
    (800, 704, 32) -> "800x704x32"
    """
    return "x".join(str(int(v)) for v in shape)


def parseFloatList(text):
    """
    "3.9 1.6 1.56" -> [3.9, 1.6, 1.56]; commas are accepted as separators too
    """
    if isEmpty(text):
        return []
    return [float(token) for token in text.replace(",", " ").split()]


def parseIntList(text):
    if isEmpty(text):
        return []
    return [int(token) for token in text.replace(",", " ").split()]


def parseTripleList(text):
    """
    "3.9 1.6 1.56; 4.2 1.7 1.6" -> [(3.9, 1.6, 1.56), (4.2, 1.7, 1.6)]
    """
    result = []
    if isEmpty(text):
        return result
    for part in text.split(";"):
        if isEmpty(part):
            continue
        values = parseFloatList(part)
        if len(values) != 3:
            raise ValueError("expected three values, got '" + part.strip() + "'")
        result.append(tuple(values))
    return result


def parseBool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean: '" + str(text) + "'")


def formatFrameId(frameId):
    """
    KITTI frame file stem: 7 -> "000007"
    """
    return "{:06d}".format(int(frameId))


def isEmpty(value):
    if value == None or len(str(value).strip()) == 0:
        return True
    return False


def isNotEmpty(value):
    return isEmpty(value) == False
