# coding=utf-8
from __future__ import absolute_import


class SettingsKeys:

    ## Paths
    SETTINGS_KEY_DATA_ROOT = "data_root"
    SETTINGS_KEY_OUTPUT_DIR = "output_dir"
    SETTINGS_KEY_CLASSES = "classes"
    SETTINGS_KEY_JOBS = "jobs"

    ## BEV map
    SETTINGS_KEY_BEV_X_MIN = "bev.x_min"
    SETTINGS_KEY_BEV_X_MAX = "bev.x_max"
    SETTINGS_KEY_BEV_Y_MIN = "bev.y_min"
    SETTINGS_KEY_BEV_Y_MAX = "bev.y_max"
    SETTINGS_KEY_BEV_RESOLUTION = "bev.resolution"  # meters per cell
    SETTINGS_KEY_BEV_Z_LO = "bev.z_lo"
    SETTINGS_KEY_BEV_Z_HI = "bev.z_hi"
    SETTINGS_KEY_BEV_SLICES = "bev.n_slices"

    ## Camera / ground
    SETTINGS_KEY_IMAGE_WIDTH = "image.width"
    SETTINGS_KEY_IMAGE_HEIGHT = "image.height"
    SETTINGS_KEY_SENSOR_HEIGHT = "ground_plane.sensor_height"

    ## Anchors
    SETTINGS_KEY_ANCHOR_STRIDE = "anchors.stride"
    SETTINGS_KEY_ANCHOR_SIZES_PREFIX = "anchors.size."  # + class name
    SETTINGS_KEY_ANCHOR_CLUSTER_FILE = "anchors.cluster_file"
    SETTINGS_KEY_ANCHOR_CLUSTERS_PREFIX = "anchors.clusters."  # + class name
    SETTINGS_KEY_ANCHOR_LABEL_ROTATED_IOU = "anchors.label_use_rotated_iou"
    SETTINGS_KEY_LABEL_BACKGROUND_IOU_PREFIX = "labels.background_iou."
    SETTINGS_KEY_LABEL_OBJECT_IOU_PREFIX = "labels.object_iou."
    SETTINGS_KEY_REGRESSION_IOU_PREFIX = "regression.min_iou."

    ## NMS
    SETTINGS_KEY_NMS_PROPOSAL_IOU = "nms.proposal_iou"
    SETTINGS_KEY_NMS_PROPOSAL_KEEP_TRAIN = "nms.proposal_keep_train"
    SETTINGS_KEY_NMS_PROPOSAL_KEEP_PREFIX = "nms.proposal_keep."
    SETTINGS_KEY_NMS_DETECTION_IOU = "nms.detection_iou"
    SETTINGS_KEY_NMS_DETECTION_KEEP = "nms.detection_keep"

    ## Evaluation
    SETTINGS_KEY_EVAL_IOU_PREFIX = "eval.iou."
    SETTINGS_KEY_EVAL_INTERPOLATION = "eval.interpolation"
    SETTINGS_KEY_DIFFICULTY_MIN_HEIGHT = "difficulty.min_height"
    SETTINGS_KEY_DIFFICULTY_MAX_OCCLUSION = "difficulty.max_occlusion"
    SETTINGS_KEY_DIFFICULTY_MAX_TRUNCATION = "difficulty.max_truncation"
    SETTINGS_KEY_RECALL_IOU = "eval.recall_iou"
    SETTINGS_KEY_RECALL_DIFFICULTY = "eval.recall_difficulty"
    SETTINGS_KEY_RECALL_N_VALUES = "eval.recall_n"

    ## Network
    SETTINGS_KEY_NETWORK_CONFIG_FILE = "network.config_file"
    SETTINGS_KEY_NETWORK_INPUT = "network.input"
    SETTINGS_KEY_NETWORK_NUM_CLASSES = "network.num_classes"
    SETTINGS_KEY_NETINFO_ROIS = "netinfo.rois"
    SETTINGS_KEY_NETINFO_CROP = "netinfo.crop"
    SETTINGS_KEY_NETINFO_DEPTH = "netinfo.depth"
    SETTINGS_KEY_NETINFO_BYTES = "netinfo.bytes_per_element"

    ## Loss weights
    SETTINGS_KEY_LOSS_BOX_WEIGHT = "loss.box_weight"
    SETTINGS_KEY_LOSS_ORIENTATION_WEIGHT = "loss.orientation_weight"
    SETTINGS_KEY_LOSS_CLASS_WEIGHT = "loss.class_weight"

    ## Debugging
    SETTINGS_KEY_LOGGING_LEVEL = "logging.level"

    ## Class names
    CLASS_CAR = "car"
    CLASS_PEDESTRIAN = "pedestrian"
    CLASS_CYCLIST = "cyclist"
    ALL_CLASSES = [CLASS_CAR, CLASS_PEDESTRIAN, CLASS_CYCLIST]

    # config name -> KITTI label token
    KITTI_CLASS_NAMES = {
        CLASS_CAR: "Car",
        CLASS_PEDESTRIAN: "Pedestrian",
        CLASS_CYCLIST: "Cyclist",
    }
    # evaluated as "don't penalize" for the class
    KITTI_NEIGHBOR_CLASSES = {
        CLASS_CAR: ["Van"],
        CLASS_PEDESTRIAN: ["Person_sitting"],
        CLASS_CYCLIST: [],
    }
    KITTI_DONT_CARE = "DontCare"
