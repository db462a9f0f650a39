# coding=utf-8
import sys

from kitti_DetectionCore.cli import main

sys.exit(main())
