# coding=utf-8
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from kitti_DetectionCore.common.DetectionErrors import ParameterError


class LayerKind(Enum):
    CONV3X3 = "conv3x3"
    CONV1X1 = "conv1x1"
    CONV_TRANSPOSE2X = "conv_transpose2x"
    CONCAT = "concat"
    FC = "fc"
    CROP_RESIZE = "crop_resize"
    FUSE_MEAN = "fuse_mean"
    MAXPOOL2X = "maxpool2x"

    @staticmethod
    def fromText(text):
        for kind in LayerKind:
            if kind.value == text:
                return kind
        raise ParameterError("unknown layer kind '" + str(text) + "'")

    @property
    def kernel_size(self):
        if self == LayerKind.CONV3X3:
            return 3
        if self == LayerKind.CONV1X1:
            return 1
        if self == LayerKind.CONV_TRANSPOSE2X:
            return 2
        return 0


# branches in evaluation order
BRANCH_ENCODER = "encoder"
BRANCH_DECODER = "decoder"
BRANCH_RPN_HEAD = "rpn_head"
BRANCH_SECOND_STAGE = "second_stage_head"
ALL_BRANCHES = [BRANCH_ENCODER, BRANCH_DECODER, BRANCH_RPN_HEAD, BRANCH_SECOND_STAGE]


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    in_channels: int
    out_channels: int
    stride: int = 1
    name: str = ""
    source: Optional[str] = None  # input layer name, default: previous layer of the branch
    skip: Optional[str] = None  # second input of a concat
    size: Optional[Tuple[int, int]] = None  # crop_resize output (h, w)

    def __post_init__(self):
        if not isinstance(self.kind, LayerKind):
            object.__setattr__(self, "kind", LayerKind.fromText(self.kind))
        if self.in_channels <= 0 or self.out_channels <= 0:
            raise ParameterError("layer channels must be positive: " + str(self))
        if self.stride <= 0:
            raise ParameterError("layer stride must be positive: " + str(self))
        if self.kind == LayerKind.CROP_RESIZE and self.size is None:
            raise ParameterError("crop_resize layers need an output size: " + str(self))
        if self.kind == LayerKind.CONCAT and self.skip is None:
            raise ParameterError("concat layers need a skip input: " + str(self))


@dataclass(frozen=True)
class NetworkConfig:
    branches: Dict[str, Tuple[LayerSpec, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for branchName in self.branches:
            if branchName not in ALL_BRANCHES:
                raise ParameterError("unknown branch '" + branchName + "'")

    def branch(self, branchName):
        return tuple(self.branches.get(branchName, ()))

    def layers(self):
        """
        (branch, index, layer) in evaluation order
        """
        for branchName in ALL_BRANCHES:
            for index, layer in enumerate(self.branch(branchName)):
                yield branchName, index, layer

    def __len__(self):
        return sum(len(self.branch(name)) for name in ALL_BRANCHES)

    def concat(self, other):
        merged = {}
        for branchName in ALL_BRANCHES:
            layers = self.branch(branchName) + other.branch(branchName)
            if len(layers) > 0:
                merged[branchName] = layers
        return NetworkConfig(merged)

    @staticmethod
    def empty():
        return NetworkConfig({})


@dataclass(frozen=True)
class LayerShape:
    branch: str
    name: str
    kind: LayerKind
    shape: Tuple[int, int, int]  # (h, w, channels); fc outputs are (1, 1, n)
    parameters: int
    flops: int


@dataclass(frozen=True, eq=False)
class DenseLayer:
    weight: np.ndarray  # (n_in, n_out)
    bias: np.ndarray  # (n_out,)

    def __post_init__(self):
        weight = np.asarray(self.weight, dtype=np.float64)
        bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if weight.ndim != 2 or weight.shape[1] != bias.shape[0]:
            raise ParameterError(
                "dense weight " + str(weight.shape) + " does not match bias " + str(bias.shape)
            )
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)

    @property
    def n_in(self):
        return self.weight.shape[0]

    @property
    def n_out(self):
        return self.weight.shape[1]

    @staticmethod
    def zeros(nIn, nOut):
        return DenseLayer(np.zeros((nIn, nOut)), np.zeros(nOut))


@dataclass(frozen=True, eq=False)
class DecoderFuseWeights:
    transpose_kernel: np.ndarray  # (2, 2, C_low, C_up)
    transpose_bias: np.ndarray  # (C_up,)
    conv_kernel: np.ndarray  # (3, 3, C_up + C_skip, C_out)
    conv_bias: np.ndarray  # (C_out,)


@dataclass(frozen=True, eq=False)
class RpnHeadWeights:
    objectness_hidden: DenseLayer
    objectness_out: DenseLayer  # -> 2
    offsets_hidden: DenseLayer
    offsets_out: DenseLayer  # -> 6


@dataclass(frozen=True, eq=False)
class SecondStageWeights:
    hidden: List[DenseLayer]
    box: DenseLayer  # -> 10
    orientation: DenseLayer  # -> 2
    classification: DenseLayer  # -> C
