# coding=utf-8

########################################################################################################################
### Project metadata

# The distribution name
project_name = "kitti-detection-core"

# The python package, has to be unique
project_package = "kitti_DetectionCore"

# The version
project_version = "0.1.0"

# The description
project_description = """BEV encoding, 3D anchors, box encodings, rotated IoU / NMS and KITTI evaluation
for LIDAR object detection"""

# The license
project_license = "AGPLv3"

# Requirements of the package itself
project_requires = [
    "numpy>=1.21",
    "pillow>=9.3.0",
    "scikit-learn>=1.1",
    "tqdm>=4.64",
]

# Needed to run the tests and format the code, see requirements-dev.txt
project_extras = {"dev": ["black", "pytest", "isort", "shapely>=2.0"]}

# Command line entry point
project_console_scripts = ["kitti-detection-core=kitti_DetectionCore.cli:main"]

# Any python packages within <project_package>.* you do NOT want to install
project_ignored_packages = ["kitti_DetectionCore.test"]

########################################################################################################################

from setuptools import find_packages, setup

setup_parameters = dict(
    name=project_name,
    version=project_version,
    description=project_description,
    license=project_license,
    packages=find_packages(include=[project_package, project_package + ".*"], exclude=project_ignored_packages),
    install_requires=project_requires,
    extras_require=project_extras,
    entry_points={"console_scripts": project_console_scripts},
    python_requires=">=3.8",
)

setup(**setup_parameters)
