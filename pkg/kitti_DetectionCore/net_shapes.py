# coding=utf-8
"""
Shape and cost calculus of the two-stage detector network, reference forward passes of the
decoder fusion and the fully connected heads, and the training losses.
"""
import logging
import math

import numpy as np

from kitti_DetectionCore.common.DetectionErrors import (
    MalformedInputError,
    ParameterError,
    lineError,
)
from kitti_DetectionCore.common.StringUtils import isEmpty
from kitti_DetectionCore.models.NetworkModels import (
    ALL_BRANCHES,
    BRANCH_DECODER,
    BRANCH_ENCODER,
    BRANCH_RPN_HEAD,
    BRANCH_SECOND_STAGE,
    LayerKind,
    LayerShape,
    LayerSpec,
    NetworkConfig,
)

_logger = logging.getLogger(__name__)

DEFAULT_FEATURE_DEPTH = 32
DEFAULT_ENCODER_DEPTH = 256
RPN_CROP_SIZE = (3, 3)
SECOND_STAGE_CROP_SIZE = (7, 7)
RPN_FC_SIZE = 256
SECOND_STAGE_FC_SIZE = 2048
# multiply + add
FLOPS_PER_MAC = 2
# reference figures of the published network, not reproducible without its exact layers
REFERENCE_PARAMETERS = 38073000
REFERENCE_FLOPS_PER_FRAME = 231263000000

DEFAULT_BOX_WEIGHT = 5.0
DEFAULT_ORIENTATION_WEIGHT = 1.0
DEFAULT_CLASS_WEIGHT = 1.0
SIMPLEX_TOLERANCE = 1e-6


################################################################################################ configs
def _conv(inChannels, outChannels, name, source=None):
    return LayerSpec(LayerKind.CONV3X3, inChannels, outChannels, 1, name, source)


def default_network_config(num_classes=2, input_depth=6):
    """
    VGG-16 cut after conv-4 with halved channels, a three step upsampling decoder back to
    the input resolution at depth 32, and the two detection heads
    """
    encoder = (
        _conv(input_depth, 32, "conv1_1"),
        _conv(32, 32, "conv1_2"),
        LayerSpec(LayerKind.MAXPOOL2X, 32, 32, 2, "pool1"),
        _conv(32, 64, "conv2_1"),
        _conv(64, 64, "conv2_2"),
        LayerSpec(LayerKind.MAXPOOL2X, 64, 64, 2, "pool2"),
        _conv(64, 128, "conv3_1"),
        _conv(128, 128, "conv3_2"),
        _conv(128, 128, "conv3_3"),
        LayerSpec(LayerKind.MAXPOOL2X, 128, 128, 2, "pool3"),
        _conv(128, 256, "conv4_1"),
        _conv(256, 256, "conv4_2"),
        _conv(256, DEFAULT_ENCODER_DEPTH, "conv4_3"),
    )
    decoder = (
        LayerSpec(LayerKind.CONV_TRANSPOSE2X, DEFAULT_ENCODER_DEPTH, 128, 2, "upconv3"),
        LayerSpec(LayerKind.CONCAT, 128, 256, 1, "concat3", skip="conv3_3"),
        _conv(256, 64, "fuse3"),
        LayerSpec(LayerKind.CONV_TRANSPOSE2X, 64, 64, 2, "upconv2"),
        LayerSpec(LayerKind.CONCAT, 64, 128, 1, "concat2", skip="conv2_2"),
        _conv(128, 32, "fuse2"),
        LayerSpec(LayerKind.CONV_TRANSPOSE2X, 32, 32, 2, "upconv1"),
        LayerSpec(LayerKind.CONCAT, 32, 64, 1, "concat1", skip="conv1_2"),
        _conv(64, DEFAULT_FEATURE_DEPTH, "fuse1"),
    )
    rpnInputs = RPN_CROP_SIZE[0] * RPN_CROP_SIZE[1]
    rpnHead = (
        LayerSpec(LayerKind.CONV1X1, DEFAULT_FEATURE_DEPTH, 1, 1, "rpn_bottleneck", "fuse1"),
        LayerSpec(LayerKind.CROP_RESIZE, 1, 1, 1, "rpn_crop", size=RPN_CROP_SIZE),
        LayerSpec(LayerKind.FUSE_MEAN, 1, 1, 1, "rpn_fused"),
        LayerSpec(LayerKind.FC, rpnInputs, RPN_FC_SIZE, 1, "rpn_cls_fc", "rpn_fused"),
        LayerSpec(LayerKind.FC, RPN_FC_SIZE, 2, 1, "rpn_objectness"),
        LayerSpec(LayerKind.FC, rpnInputs, RPN_FC_SIZE, 1, "rpn_reg_fc", "rpn_fused"),
        LayerSpec(LayerKind.FC, RPN_FC_SIZE, 6, 1, "rpn_offsets"),
    )
    cropInputs = SECOND_STAGE_CROP_SIZE[0] * SECOND_STAGE_CROP_SIZE[1] * DEFAULT_FEATURE_DEPTH
    secondStage = (
        LayerSpec(
            LayerKind.CROP_RESIZE,
            DEFAULT_FEATURE_DEPTH,
            DEFAULT_FEATURE_DEPTH,
            1,
            "ss_crop",
            "fuse1",
            size=SECOND_STAGE_CROP_SIZE,
        ),
        LayerSpec(LayerKind.FUSE_MEAN, DEFAULT_FEATURE_DEPTH, DEFAULT_FEATURE_DEPTH, 1, "ss_fused"),
        LayerSpec(LayerKind.FC, cropInputs, SECOND_STAGE_FC_SIZE, 1, "ss_fc1"),
        LayerSpec(LayerKind.FC, SECOND_STAGE_FC_SIZE, SECOND_STAGE_FC_SIZE, 1, "ss_fc2"),
        LayerSpec(LayerKind.FC, SECOND_STAGE_FC_SIZE, SECOND_STAGE_FC_SIZE, 1, "ss_fc3"),
        LayerSpec(LayerKind.FC, SECOND_STAGE_FC_SIZE, 10, 1, "ss_box", "ss_fc3"),
        LayerSpec(LayerKind.FC, SECOND_STAGE_FC_SIZE, 2, 1, "ss_orientation", "ss_fc3"),
        LayerSpec(LayerKind.FC, SECOND_STAGE_FC_SIZE, num_classes, 1, "ss_class", "ss_fc3"),
    )
    return NetworkConfig(
        {
            BRANCH_ENCODER: encoder,
            BRANCH_DECODER: decoder,
            BRANCH_RPN_HEAD: rpnHead,
            BRANCH_SECOND_STAGE: secondStage,
        }
    )


def layer_name(branchName, index, layer):
    if isEmpty(layer.name):
        return branchName + "." + "{:02d}".format(index)
    return layer.name


def encoder_stride(config):
    stride = 1
    for layer in config.branch(BRANCH_ENCODER):
        if layer.kind == LayerKind.MAXPOOL2X:
            stride *= 2
        elif layer.kind in (LayerKind.CONV3X3, LayerKind.CONV1X1):
            stride *= layer.stride
    return stride


def downsampled_footprint(footprint, config):
    """
    size in encoder output pixels of an object covering `footprint` (h, w) input pixels
    """
    stride = encoder_stride(config)
    return tuple(float(v) / stride for v in footprint)


################################################################################################ shapes and costs
def layer_parameters(layer):
    kernel = layer.kind.kernel_size
    if kernel > 0:
        return kernel * kernel * layer.in_channels * layer.out_channels + layer.out_channels
    if layer.kind == LayerKind.FC:
        return layer.in_channels * layer.out_channels + layer.out_channels
    return 0


def _layerFlops(layer, inputShape, outputShape):
    if layer.kind == LayerKind.CONV_TRANSPOSE2X:
        # every input pixel feeds a 2x2 output block
        return FLOPS_PER_MAC * 4 * layer.in_channels * layer.out_channels * inputShape[0] * inputShape[1]
    kernel = layer.kind.kernel_size
    if kernel > 0:
        return (
            FLOPS_PER_MAC
            * kernel
            * kernel
            * layer.in_channels
            * layer.out_channels
            * outputShape[0]
            * outputShape[1]
        )
    if layer.kind == LayerKind.FC:
        return FLOPS_PER_MAC * layer.in_channels * layer.out_channels
    return 0


def _expectChannels(name, layer, shape):
    if layer.in_channels != shape[2]:
        raise ParameterError(
            "layer '"
            + name
            + "' expects "
            + str(layer.in_channels)
            + " input channels, got "
            + str(shape[2])
        )


def _outputShape(name, layer, shape, known):
    height, width, channels = shape
    kind = layer.kind
    if kind == LayerKind.FC:
        flat = height * width * channels
        if flat != layer.in_channels:
            raise ParameterError(
                "layer '" + name + "' expects " + str(layer.in_channels) + " inputs, got " + str(flat)
            )
        return (1, 1, layer.out_channels)

    _expectChannels(name, layer, shape)
    if kind in (LayerKind.CONV3X3, LayerKind.CONV1X1, LayerKind.MAXPOOL2X):
        stride = 2 if kind == LayerKind.MAXPOOL2X else layer.stride
        if height % stride != 0 or width % stride != 0:
            raise ParameterError(
                "layer '"
                + name
                + "' cannot downsample "
                + str(height)
                + "x"
                + str(width)
                + " by "
                + str(stride)
            )
        if kind == LayerKind.MAXPOOL2X and layer.out_channels != channels:
            raise ParameterError("pooling layer '" + name + "' cannot change the depth")
        return (height // stride, width // stride, layer.out_channels)
    if kind == LayerKind.CONV_TRANSPOSE2X:
        return (height * 2, width * 2, layer.out_channels)
    if kind == LayerKind.CONCAT:
        if layer.skip not in known:
            raise ParameterError("layer '" + name + "' concatenates unknown layer '" + str(layer.skip) + "'")
        skipShape = known[layer.skip]
        if skipShape[:2] != (height, width):
            raise ParameterError(
                "layer '"
                + name
                + "' concatenates "
                + str(skipShape)
                + " with "
                + str(shape)
            )
        if layer.out_channels != channels + skipShape[2]:
            raise ParameterError(
                "layer '" + name + "' must output " + str(channels + skipShape[2]) + " channels"
            )
        return (height, width, layer.out_channels)
    if kind == LayerKind.CROP_RESIZE:
        return (int(layer.size[0]), int(layer.size[1]), channels)
    if kind == LayerKind.FUSE_MEAN:
        return shape
    raise ParameterError("unsupported layer kind " + str(kind))


def propagate_shapes(config, input_shape):
    """
    Per-layer output shapes in evaluation order. A layer reads its `source` or the previous
    layer of its branch; a branch's first layer defaults to the last output of the previous
    non-empty branch, and the encoder to the input. Head costs are per region of interest.
    """
    height, width, depth = [int(v) for v in input_shape]
    stride = encoder_stride(config)
    if height % stride != 0 or width % stride != 0:
        raise ParameterError(
            "input " + str(height) + "x" + str(width) + " is not divisible by " + str(stride)
        )
    known = {}
    result = []
    current = (height, width, depth)
    for branchName in ALL_BRANCHES:
        for index, layer in enumerate(config.branch(branchName)):
            name = layer_name(branchName, index, layer)
            if layer.source is not None:
                if layer.source not in known:
                    raise ParameterError(
                        "layer '" + name + "' reads unknown layer '" + layer.source + "'"
                    )
                inputShape = known[layer.source]
            else:
                inputShape = current
            outputShape = _outputShape(name, layer, inputShape, known)
            if name in known:
                raise ParameterError("duplicate layer name '" + name + "'")
            known[name] = outputShape
            result.append(
                LayerShape(
                    branch=branchName,
                    name=name,
                    kind=layer.kind,
                    shape=outputShape,
                    parameters=layer_parameters(layer),
                    flops=_layerFlops(layer, inputShape, outputShape),
                )
            )
            current = outputShape
    return result


def branch_output(shapes, branchName):
    branchShapes = [shape for shape in shapes if shape.branch == branchName]
    if len(branchShapes) == 0:
        return None
    return branchShapes[-1].shape


def count_parameters(config):
    return sum(layer_parameters(layer) for _, _, layer in config.layers())


def count_flops(config, input_shape):
    return sum(shape.flops for shape in propagate_shapes(config, input_shape))


def memory_estimate(n_rois, crop, depth, bytes_per_element):
    cropHeight, cropWidth = crop
    values = [n_rois, cropHeight, cropWidth, depth, bytes_per_element]
    if min(values) <= 0:
        raise ParameterError("memory estimate needs positive arguments, got " + str(values))
    return int(n_rois) * int(cropHeight) * int(cropWidth) * int(depth) * int(bytes_per_element)


################################################################################################ config text
def dump_network_config(config):
    lines = []
    for branchName, index, layer in config.layers():
        fields = [
            layer.kind.value,
            "in=" + str(layer.in_channels),
            "out=" + str(layer.out_channels),
            "stride=" + str(layer.stride),
        ]
        if not isEmpty(layer.name):
            fields.append("name=" + layer.name)
        if layer.source is not None:
            fields.append("source=" + layer.source)
        if layer.skip is not None:
            fields.append("skip=" + layer.skip)
        if layer.size is not None:
            fields.append("size=" + str(layer.size[0]) + "x" + str(layer.size[1]))
        lines.append(branchName + "." + "{:02d}".format(index) + " = " + " ".join(fields))
    return "\n".join(lines) + ("\n" if len(lines) > 0 else "")


def _parseLayer(text, lineNumber):
    tokens = text.split()
    if len(tokens) == 0:
        raise MalformedInputError(lineError(lineNumber, "missing layer kind"))
    options = {}
    for token in tokens[1:]:
        key, separator, value = token.partition("=")
        if separator == "":
            raise MalformedInputError(lineError(lineNumber, "expected key=value, got '" + token + "'"))
        options[key] = value
    try:
        size = None
        if "size" in options:
            size = tuple(int(v) for v in options["size"].lower().split("x"))
            if len(size) != 2:
                raise ValueError("size must look like HxW")
        return LayerSpec(
            kind=LayerKind.fromText(tokens[0]),
            in_channels=int(options.get("in", 0)),
            out_channels=int(options.get("out", 0)),
            stride=int(options.get("stride", 1)),
            name=options.get("name", ""),
            source=options.get("source"),
            skip=options.get("skip"),
            size=size,
        )
    except (ValueError, ParameterError) as error:
        raise MalformedInputError(lineError(lineNumber, str(error)))


def load_network_config(text):
    entries = {}
    for lineNumber, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if len(line) == 0:
            continue
        key, separator, value = line.partition("=")
        if separator == "":
            raise MalformedInputError(lineError(lineNumber, "expected 'branch.NN = kind ...'"))
        branchName, _, position = key.strip().rpartition(".")
        if branchName not in ALL_BRANCHES or not position.isdigit():
            raise MalformedInputError(lineError(lineNumber, "unknown layer key '" + key.strip() + "'"))
        entries.setdefault(branchName, []).append((int(position), _parseLayer(value, lineNumber)))
    branches = {}
    for branchName, layers in entries.items():
        branches[branchName] = tuple(layer for _, layer in sorted(layers, key=lambda item: item[0]))
    return NetworkConfig(branches)


################################################################################################ forward passes
def _relu(values):
    return np.maximum(values, 0.0)


def _dense(values, layer):
    if values.shape[-1] != layer.n_in:
        raise ParameterError(
            "dense layer expects " + str(layer.n_in) + " inputs, got " + str(values.shape[-1])
        )
    return values @ layer.weight + layer.bias


def conv3x3_same(values, kernel, bias):
    """
    zero padded 3x3 cross-correlation: out[y, x] = sum in[y + a - 1, x + b - 1] . kernel[a, b]
    """
    height, width = values.shape[:2]
    padded = np.pad(values, ((1, 1), (1, 1), (0, 0)))
    result = np.zeros((height, width, kernel.shape[3]))
    for a in range(3):
        for b in range(3):
            result += padded[a : a + height, b : b + width] @ kernel[a, b]
    return result + bias


def conv_transpose2x(values, kernel, bias):
    """
    2x2 kernel at stride 2: out[2i + a, 2j + b] = in[i, j] . kernel[a, b]
    """
    height, width = values.shape[:2]
    blocks = np.einsum("ijc,abco->iajbo", values, kernel)
    return blocks.reshape(height * 2, width * 2, kernel.shape[3]) + bias


def decoder_fuse_forward(low, skip, weights):
    low = np.asarray(low, dtype=np.float64)
    skip = np.asarray(skip, dtype=np.float64)
    transposeKernel = np.asarray(weights.transpose_kernel, dtype=np.float64)
    convKernel = np.asarray(weights.conv_kernel, dtype=np.float64)
    if low.ndim != 3 or skip.ndim != 3:
        raise ParameterError("decoder inputs must be H x W x D maps")
    if skip.shape[:2] != (2 * low.shape[0], 2 * low.shape[1]):
        raise ParameterError(
            "skip map " + str(skip.shape) + " is not twice the size of " + str(low.shape)
        )
    if transposeKernel.shape[:3] != (2, 2, low.shape[2]):
        raise ParameterError("transpose kernel " + str(transposeKernel.shape) + " does not fit " + str(low.shape))
    upChannels = transposeKernel.shape[3]
    if convKernel.shape[:3] != (3, 3, upChannels + skip.shape[2]):
        raise ParameterError(
            "fusion kernel " + str(convKernel.shape) + " does not fit "
            + str(upChannels + skip.shape[2])
            + " channels"
        )
    upsampled = conv_transpose2x(low, transposeKernel, np.asarray(weights.transpose_bias))
    stacked = np.concatenate([upsampled, skip], axis=2)
    return conv3x3_same(stacked, convKernel, np.asarray(weights.conv_bias))


def rpn_head_forward(fused, weights):
    values = np.asarray(fused, dtype=np.float64).reshape(-1)
    objectness = _dense(_relu(_dense(values, weights.objectness_hidden)), weights.objectness_out)
    offsets = _dense(_relu(_dense(values, weights.offsets_hidden)), weights.offsets_out)
    if objectness.shape != (2,) or offsets.shape != (6,):
        raise ParameterError(
            "RPN head must output 2 and 6 values, got "
            + str(objectness.shape[0])
            + " and "
            + str(offsets.shape[0])
        )
    return objectness, offsets


def second_stage_head_forward(fused, weights):
    values = np.asarray(fused, dtype=np.float64).reshape(-1)
    for layer in weights.hidden:
        values = _relu(_dense(values, layer))
    box = _dense(values, weights.box)
    orientation = _dense(values, weights.orientation)
    classes = _dense(values, weights.classification)
    if box.shape != (10,) or orientation.shape != (2,):
        raise ParameterError(
            "second stage must output 10 box and 2 orientation values, got "
            + str(box.shape[0])
            + " and "
            + str(orientation.shape[0])
        )
    return box, orientation, classes


################################################################################################ losses
def smooth_l1(x):
    values = np.abs(np.asarray(x, dtype=np.float64))
    losses = np.where(values < 1.0, 0.5 * values * values, values - 0.5)
    return float(losses.sum())


def cross_entropy(probabilities, target):
    probabilities = np.asarray(probabilities, dtype=np.float64).reshape(-1)
    if probabilities.shape[0] == 0 or not np.all(probabilities > 0):
        raise ParameterError("probabilities must all be positive")
    if abs(float(probabilities.sum()) - 1.0) > SIMPLEX_TOLERANCE:
        raise ParameterError("probabilities must sum to 1, got " + str(probabilities.sum()))
    if not 0 <= int(target) < probabilities.shape[0]:
        raise ParameterError("target class " + str(target) + " out of range")
    return -math.log(probabilities[int(target)])


def multitask_loss(
    box_residuals,
    orientation_residuals,
    class_probabilities,
    class_target,
    box_weight=DEFAULT_BOX_WEIGHT,
    orientation_weight=DEFAULT_ORIENTATION_WEIGHT,
    class_weight=DEFAULT_CLASS_WEIGHT,
):
    return (
        box_weight * smooth_l1(box_residuals)
        + orientation_weight * smooth_l1(orientation_residuals)
        + class_weight * cross_entropy(class_probabilities, class_target)
    )
