"""Tabletop object sorting: segmentation, Color-CVFH descriptors, SVM recognition, UR5 kinematics."""

from .pcloud import ColorPointCloud, NormalSet, estimate_normals, load_pcd, save_pcd
from .descriptor import Descriptor, color_cvfh, cvfh, hsv_histogram
from .segmentation import SegmentationConfig, segment_scene
from .classifier import ClassifierModel, TrainingSet, predict, train
from .kinematics import DHParameters, JointConfig, forward_kinematics, inverse_kinematics

__version__ = "0.1.0"

__all__ = [
    "ColorPointCloud", "NormalSet", "estimate_normals", "load_pcd", "save_pcd",
    "Descriptor", "color_cvfh", "cvfh", "hsv_histogram",
    "SegmentationConfig", "segment_scene",
    "ClassifierModel", "TrainingSet", "predict", "train",
    "DHParameters", "JointConfig", "forward_kinematics", "inverse_kinematics",
]
