import itertools
import logging
import math
import unittest

import numpy as np

from kitti_DetectionCore import kitti_io, metrics
from kitti_DetectionCore.common.DetectionErrors import ParameterError
from kitti_DetectionCore.geom import iou_3d, iou_rotated_bev
from kitti_DetectionCore.models.BoxModels import OrientedBox3D
from kitti_DetectionCore.models.EvalModels import Detection, Difficulty, FrameMatching
from kitti_DetectionCore.test.testData import labelLine

DONT_CARE_LINE = "DontCare -1 -1 -10 500.00 100.00 600.00 200.00 -1 -1 -1 -1000 -1000 -1000 -10"


def _label(**kwargs):
    return kitti_io.load_labels(labelLine(**kwargs))[0]


def _detection(box, score, className="Car", bbox2d=None, orientation=None):
    return Detection(className, box, score, box.yaw if orientation is None else orientation, bbox2d)


def _matching(entries, nGt):
    matching = FrameMatching(n_gt=nGt)
    for entry in entries:
        matching.addDetection(*entry)
    return matching


def _jittered(rng, box, spread):
    return OrientedBox3D(
        box.x + rng.normal(0.0, spread),
        box.y + rng.normal(0.0, spread),
        box.z + rng.normal(0.0, spread / 4.0),
        box.d_x,
        box.d_y,
        box.d_z,
        box.yaw + rng.normal(0.0, 0.2),
    )


def _coveredByFirst(proposals, gts, n, iouFn, threshold):
    """
    all pairs, no early exit
    """
    covered = 0
    total = 0
    for frameProposals, frameGts in zip(proposals, gts):
        for gt in frameGts:
            total += 1
            overlaps = [iouFn(proposal, gt) for proposal in frameProposals]
            if any(overlap >= threshold for overlap in overlaps[:n]):
                covered += 1
    return covered / total if total > 0 else 0.0


def _greedyByTable(overlap, scores, threshold):
    """
    matched gt per detection (-1 for none) from a detection x ground truth IoU table
    """
    taken = np.zeros(overlap.shape[1], dtype=bool)
    matched = [-1] * overlap.shape[0]
    for detIndex in sorted(range(len(scores)), key=lambda index: (-scores[index], index)):
        candidates = np.where(taken | (overlap[detIndex] < threshold), -np.inf, overlap[detIndex])
        if np.isfinite(candidates.max()):
            gtIndex = int(np.argmax(candidates))
            taken[gtIndex] = True
            matched[detIndex] = gtIndex
    return matched


class TestDifficulty(unittest.TestCase):
    def test_levels(self):
        self.assertEqual(Difficulty.EASY, metrics.difficulty_of(_label(bbox2d=(0.0, 0.0, 10.0, 50.0))))
        self.assertEqual(Difficulty.MODERATE, metrics.difficulty_of(_label(bbox2d=(0.0, 0.0, 10.0, 30.0))))
        self.assertEqual(Difficulty.MODERATE, metrics.difficulty_of(_label(truncation=0.2)))
        self.assertEqual(Difficulty.MODERATE, metrics.difficulty_of(_label(occlusion=1)))
        self.assertEqual(Difficulty.HARD, metrics.difficulty_of(_label(occlusion=2)))
        self.assertEqual(Difficulty.HARD, metrics.difficulty_of(_label(truncation=0.45)))
        self.assertEqual(Difficulty.EXCLUDED, metrics.difficulty_of(_label(bbox2d=(0.0, 0.0, 10.0, 20.0))))
        self.assertEqual(Difficulty.EXCLUDED, metrics.difficulty_of(_label(occlusion=3)))
        self.assertEqual(Difficulty.EXCLUDED, metrics.difficulty_of(kitti_io.load_labels(DONT_CARE_LINE)[0]))

    def test_boundariesInclusive(self):
        self.assertEqual(Difficulty.EASY, metrics.difficulty_of(_label(bbox2d=(0.0, 0.0, 10.0, 40.0), truncation=0.15)))

    def test_customTable(self):
        table = metrics.DifficultyTable(minHeight=(60.0, 40.0, 10.0))
        self.assertEqual(Difficulty.MODERATE, metrics.difficulty_of(_label(bbox2d=(0.0, 0.0, 10.0, 50.0)), table))
        with self.assertRaises(ParameterError):
            metrics.DifficultyTable(minHeight=(40.0, 25.0))

    def test_fromName(self):
        self.assertEqual(Difficulty.MODERATE, Difficulty.fromName(" Moderate "))
        with self.assertRaises(ParameterError):
            Difficulty.fromName("impossible")


class TestMatching(unittest.TestCase):
    def setUp(self):
        logging.basicConfig(level=logging.DEBUG)
        self.testLogger = logging.getLogger("testLogger")
        self.car = _label(location=(1.0, 1.7, 20.0))
        self.van = _label(className="Van", location=(-5.0, 1.7, 30.0), dims=(2.2, 1.9, 5.0))
        self.dontCare = kitti_io.load_labels(DONT_CARE_LINE)[0]
        self.carBox = kitti_io.label_to_box(self.car)
        self.vanBox = kitti_io.label_to_box(self.van)
        self.farBox = OrientedBox3D(60.0, 20.0, -1.0, 4.0, 1.6, 1.5, 0.0)

    def test_mixedFrame(self):
        dets = [
            _detection(self.carBox, 0.5),  # duplicate, scored lower
            _detection(self.vanBox, 0.8),
            _detection(self.farBox, 0.7, bbox2d=(510.0, 110.0, 590.0, 190.0)),
            _detection(self.farBox, 0.6),
            _detection(self.carBox, 0.9),
        ]
        matching = metrics.match_detections(
            dets, [self.car, self.van, self.dontCare], iou_3d, 0.7, class_name="car"
        )
        self.assertEqual(1, matching.n_gt)
        self.assertEqual([0.9, 0.6, 0.5], matching.scores)
        self.assertEqual([True, False, False], matching.true_positive)
        self.assertEqual([0, -1, -1], matching.matched_gt)
        self.assertEqual([1, 2], matching.ignored_detections)
        self.assertEqual(1, matching.n_true_positive)
        self.assertEqual(2, matching.n_false_positive)
        self.assertEqual(0, matching.n_false_negative)

    def test_orientationDelta(self):
        turned = _detection(self.carBox, 0.9, orientation=self.carBox.yaw + math.pi)
        matching = metrics.match_detections([turned], [self.car], iou_3d, 0.7, class_name="car")
        self.assertEqual([True], matching.true_positive)
        self.assertAlmostEqual(math.pi, abs(matching.orientation_deltas[0]), places=9)

    def test_tooHardGroundTruthIsIgnored(self):
        hard = _label(occlusion=2)
        matching = metrics.match_detections(
            [_detection(kitti_io.label_to_box(hard), 0.9)],
            [hard],
            iou_3d,
            0.7,
            class_name="car",
            difficulty=Difficulty.MODERATE,
        )
        self.assertEqual(0, matching.n_gt)
        self.assertEqual([], matching.scores)
        self.assertEqual([0], matching.ignored_detections)

    def test_missedGroundTruth(self):
        matching = metrics.match_detections([_detection(self.farBox, 0.9)], [self.car], iou_3d, 0.7, class_name="car")
        self.assertEqual([False], matching.true_positive)
        self.assertEqual(1, matching.n_false_negative)

    def test_bevIgnoresHeight(self):
        lifted = OrientedBox3D(
            self.carBox.x,
            self.carBox.y,
            self.carBox.z + 2.0,
            self.carBox.d_x,
            self.carBox.d_y,
            self.carBox.d_z,
            self.carBox.yaw,
        )
        bevMatching = metrics.match_detections(
            [_detection(lifted, 0.9)], [self.car], iou_rotated_bev, 0.7, class_name="car"
        )
        matching3d = metrics.match_detections([_detection(lifted, 0.9)], [self.car], iou_3d, 0.7, class_name="car")
        self.assertEqual([True], bevMatching.true_positive)
        self.assertEqual([False], matching3d.true_positive)

    def test_classAgnostic(self):
        dets = [_detection(self.carBox, 0.9), _detection(self.vanBox, 0.8)]
        matching = metrics.match_detections(dets, [self.car, self.van, self.dontCare], iou_3d, 0.7)
        self.assertEqual(2, matching.n_gt)
        self.assertEqual([True, True], matching.true_positive)

    def _tableMatching(self, overlap, scores):
        gts = [self.car, _label(location=(-6.0, 1.6, 35.0))]
        gtIndex = {kitti_io.label_to_box(gt).x: index for index, gt in enumerate(gts)}
        dets = [_detection(OrientedBox3D(100.0 + k, 0.0, -1.0, 3.9, 1.6, 1.5, 0.0), s) for k, s in enumerate(scores)]

        def tableIou(box, gtBox):
            return float(overlap[int(round(box.x)) - 100, gtIndex[gtBox.x]])

        return metrics.match_detections(dets, gts, tableIou, 0.5, class_name="car")

    def test_greedyTakesHighestOverlap(self):
        overlap = np.array([[0.6, 0.8], [0.75, 0.9], [0.9, 0.0]])
        matching = self._tableMatching(overlap, [0.9, 0.8, 0.7])
        # the first detection takes the second gt, leaving the first for the runner-up
        self.assertEqual([1, 0, -1], matching.matched_gt)
        self.assertEqual([True, True, False], matching.true_positive)
        self.assertEqual(0, matching.n_false_negative)

    def test_everyOverlapTableAgainstGreedy(self):
        orders = [list(p) for p in itertools.permutations([0.9, 0.8, 0.7])] + [[0.5, 0.5, 0.5]]
        for values in itertools.product((0.3, 0.6, 0.8), repeat=6):
            overlap = np.array(values).reshape(3, 2)
            for scores in orders:
                matching = self._tableMatching(overlap, scores)
                expected = _greedyByTable(overlap, scores, 0.5)
                order = sorted(range(3), key=lambda index: (-scores[index], index))
                self.assertEqual([expected[index] for index in order], matching.matched_gt)
                self.assertEqual([expected[index] >= 0 for index in order], matching.true_positive)


class TestPrCurve(unittest.TestCase):
    def setUp(self):
        # recall 0.5, 0.5, 1.0 and precision 1, 1/2, 2/3
        self.curve = metrics.pr_curve(
            [_matching([(0.9, True, 0.0, 0), (0.8, False)], 1), _matching([(0.7, True, math.pi, 0)], 1)]
        )

    def test_points(self):
        self.assertEqual(3, len(self.curve))
        self.assertEqual(2, self.curve.n_gt)
        self.assertTrue(np.allclose([0.5, 0.5, 1.0], self.curve.recall))
        self.assertTrue(np.allclose([1.0, 0.5, 2.0 / 3.0], self.curve.precision))
        self.assertTrue(np.allclose([1.0, 0.5, 1.0 / 3.0], self.curve.similarity))
        self.assertEqual([0.9, 0.8, 0.7], self.curve.thresholds.tolist())
        self.assertEqual(2, len(self.curve.orientation_deltas))

    def test_elevenPointAp(self):
        self.assertAlmostEqual(28.0 / 33.0, metrics.average_precision(self.curve, 11), places=12)
        self.assertAlmostEqual(23.0 / 33.0, metrics.average_heading_similarity(self.curve, 11), places=12)

    def test_fortyPointAp(self):
        self.assertAlmostEqual(5.0 / 6.0, metrics.average_precision(self.curve, 40), places=12)

    def test_tiedScoresShareOnePoint(self):
        curve = metrics.pr_curve([_matching([(0.9, True, 0.0, 0), (0.9, False)], 2)])
        self.assertEqual(1, len(curve))
        self.assertEqual([0.5], curve.recall.tolist())
        self.assertEqual([0.5], curve.precision.tolist())

    def test_perfectDetector(self):
        curve = metrics.pr_curve([_matching([(0.9, True, 0.0, 0), (0.4, True, 0.0, 1)], 2)])
        self.assertAlmostEqual(1.0, metrics.average_precision(curve, 11))
        self.assertAlmostEqual(1.0, metrics.average_precision(curve, 40))
        self.assertAlmostEqual(1.0, metrics.average_heading_similarity(curve, 40))

    def test_noGroundTruthOrNoDetections(self):
        self.assertEqual(0, len(metrics.pr_curve([_matching([(0.9, False)], 0)])))
        empty = metrics.pr_curve([_matching([], 3)])
        self.assertEqual(3, empty.n_gt)
        self.assertEqual(0.0, metrics.average_precision(empty, 11))

    def test_recallPoints(self):
        self.assertEqual(11, len(metrics.recall_points(11)))
        points = metrics.recall_points(40)
        self.assertEqual(40, len(points))
        self.assertAlmostEqual(0.025, points[0])
        self.assertEqual(1.0, points[-1])
        with self.assertRaises(ParameterError):
            metrics.recall_points(5)


class TestRecall(unittest.TestCase):
    def test_recallCurve(self):
        g1 = OrientedBox3D(10.0, 0.0, -1.0, 4.0, 2.0, 1.5, 0.0)
        g2 = OrientedBox3D(20.0, 5.0, -1.0, 4.0, 2.0, 1.5, 0.0)
        g3 = OrientedBox3D(30.0, -5.0, -1.0, 4.0, 2.0, 1.5, 0.0)
        far = OrientedBox3D(60.0, 0.0, -1.0, 4.0, 2.0, 1.5, 0.0)
        curve = metrics.recall_curve([[far, g1, g2], []], [[g1, g2], [g3]], [1, 2, 3, 10])
        self.assertEqual([1, 2, 3, 10], [n for n, _ in curve])
        self.assertEqual(0.0, curve[0][1])
        self.assertAlmostEqual(1.0 / 3.0, curve[1][1])
        self.assertAlmostEqual(2.0 / 3.0, curve[2][1])
        self.assertAlmostEqual(2.0 / 3.0, curve[3][1])

    def test_jitteredAgainstAllPairs(self):
        rng = np.random.default_rng(73)
        proposals = []
        gts = []
        for _ in range(25):
            frameGts = []
            for k in range(int(rng.integers(0, 5))):
                yaw = rng.uniform(-math.pi, math.pi)
                frameGts.append(OrientedBox3D(10.0 + 12.0 * k, rng.uniform(-5.0, 5.0), -1.0, 3.9, 1.6, 1.5, yaw))
            frameProposals = [_jittered(rng, gt, 0.4) for gt in frameGts for _ in range(int(rng.integers(0, 3)))]
            frameProposals += [
                OrientedBox3D(rng.uniform(0.0, 70.0), rng.uniform(-20.0, 20.0), -1.0, 3.9, 1.6, 1.5, 0.0)
                for _ in range(int(rng.integers(0, 4)))
            ]
            proposals.append([frameProposals[index] for index in rng.permutation(len(frameProposals))])
            gts.append(frameGts)

        nValues = [1, 2, 3, 5, 8, 13, 50]
        curve = metrics.recall_curve(proposals, gts, nValues)
        self.assertEqual(nValues, [n for n, _ in curve])
        for n, recall in curve:
            self.assertAlmostEqual(_coveredByFirst(proposals, gts, n, iou_3d, 0.5), recall, places=12)
        recalls = [recall for _, recall in curve]
        self.assertEqual(sorted(recalls), recalls)
        self.assertGreater(recalls[-1], 0.0)

    def test_noGroundTruth(self):
        self.assertEqual([(1, 0.0), (5, 0.0)], metrics.recall_curve([[]], [[]], [1, 5]))

    def test_frameCountMismatch(self):
        with self.assertRaises(ParameterError):
            metrics.recall_curve([[]], [[], []], [1])

    def test_groundTruthSelection(self):
        labels = [
            _label(),
            _label(occlusion=2),
            _label(className="Pedestrian", dims=(1.7, 0.6, 0.8)),
            kitti_io.load_labels(DONT_CARE_LINE)[0],
        ]
        self.assertEqual(1, len(metrics.recall_ground_truth(labels, "car", Difficulty.MODERATE)))
        self.assertEqual(2, len(metrics.recall_ground_truth(labels, "car", Difficulty.HARD)))
        self.assertEqual(1, len(metrics.recall_ground_truth(labels, "pedestrian", Difficulty.HARD)))


class TestEvaluateClass(unittest.TestCase):
    def setUp(self):
        logging.basicConfig(level=logging.DEBUG)
        self.labelText = "\n".join(
            [
                labelLine(location=(1.0, 1.7, 20.0)),
                labelLine(location=(-6.0, 1.6, 35.0), rotationY=0.4),
                labelLine(className="Pedestrian", dims=(1.7, 0.6, 0.8), location=(4.0, 1.7, 12.0)),
                DONT_CARE_LINE,
            ]
        )

    def test_groundTruthAsDetections(self):
        labels = kitti_io.load_labels(self.labelText)
        detections = kitti_io.load_detections(self.labelText)
        for space in (metrics.IOU_SPACE_3D, metrics.IOU_SPACE_BEV):
            for mode in (11, 40):
                result = metrics.evaluate_class(
                    [(detections, labels, None)], "car", Difficulty.MODERATE, space, mode=mode
                )
                self.assertAlmostEqual(1.0, result.average_precision)
                self.assertAlmostEqual(1.0, result.average_heading_similarity)
                self.assertEqual("car", result.class_name)
                self.assertEqual(space, result.iou_space)
                self.assertEqual(2, result.curve.n_gt)

    def test_otherClassDetectionsDoNotCount(self):
        labels = kitti_io.load_labels(self.labelText)
        detections = [det for det in kitti_io.load_detections(self.labelText) if det.class_name == "Pedestrian"]
        result = metrics.evaluate_class([(detections, labels, None)], "car", Difficulty.HARD)
        self.assertEqual(0.0, result.average_precision)

    def test_halfFound(self):
        labels = kitti_io.load_labels(self.labelText)
        detections = kitti_io.load_detections(self.labelText)[:1]
        result = metrics.evaluate_class([(detections, labels, None)], "car", Difficulty.MODERATE)
        # recall reaches 0.5 only: six of eleven points at precision 1
        self.assertAlmostEqual(6.0 / 11.0, result.average_precision)

    def test_unknownSpace(self):
        with self.assertRaises(ParameterError):
            metrics.evaluate_class([], "car", Difficulty.EASY, "2d")

    def test_turnedAroundKeepsPrecisionLosesHeading(self):
        labels = kitti_io.load_labels(self.labelText)
        detections = kitti_io.load_detections(self.labelText)
        turned = [Detection(d.class_name, d.box, d.score, d.orientation + math.pi, d.bbox2d) for d in detections]
        for mode in (11, 40):
            straight = metrics.evaluate_class([(detections, labels, None)], "car", Difficulty.MODERATE, mode=mode)
            flipped = metrics.evaluate_class([(turned, labels, None)], "car", Difficulty.MODERATE, mode=mode)
            self.assertEqual(straight.average_precision, flipped.average_precision)
            self.assertAlmostEqual(1.0, straight.average_heading_similarity)
            self.assertAlmostEqual(0.0, flipped.average_heading_similarity, places=12)

    def test_headingSimilarityNeverAbovePrecision(self):
        rng = np.random.default_rng(79)
        labels = kitti_io.load_labels(self.labelText)
        cars = [det for det in kitti_io.load_detections(self.labelText) if det.class_name == "Car"]
        for _ in range(60):
            detections = [
                Detection("Car", _jittered(rng, car.box, 0.5), rng.integers(1, 9) / 8.0, rng.uniform(-math.pi, math.pi))
                for car in cars
                for _ in range(int(rng.integers(0, 3)))
            ]
            detections += [
                Detection(
                    "Car",
                    OrientedBox3D(rng.uniform(5.0, 60.0), rng.uniform(-20.0, 20.0), -1.0, 3.9, 1.6, 1.5, 0.0),
                    rng.integers(1, 9) / 8.0,
                    0.0,
                )
                for _ in range(int(rng.integers(0, 3)))
            ]
            for space in (metrics.IOU_SPACE_3D, metrics.IOU_SPACE_BEV):
                result = metrics.evaluate_class([(detections, labels, None)], "car", Difficulty.HARD, space, mode=40)
                self.assertGreaterEqual(result.average_heading_similarity, 0.0)
                self.assertLessEqual(result.average_heading_similarity, result.average_precision + 1e-12)
                self.assertLessEqual(result.average_precision, 1.0 + 1e-12)


if __name__ == "__main__":
    unittest.main()
