"""
A weak baseline detector for demonstrations without a trained network

Ink components of the window are grouped into horizontal runs and every run is reported with its
ink density as confidence. The detector finds text line fragments, it does not tell math from text.
"""
import typing

import numpy

import geometry
import postprocess
from models.detections import WindowDetections
from models.geometry import Rect, ScoredRect
from models.windowing import WindowSpec

from . import Detector


def group_horizontally(rects: typing.Sequence[Rect], gap: int) -> typing.List[typing.List[int]]:
    """
    Group boxes that overlap vertically and are at most gap pixels apart horizontally

    :return: The groups as ascending index lists, ordered by their smallest index
    """
    parent = list(range(len(rects)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    if len(rects) > 1:
        boxes = geometry.as_array(rects)
        left, top, right, bottom = (boxes[:, k] for k in range(4))
        vertical = (top[:, None] < bottom[None, :]) & (top[None, :] < bottom[:, None])
        distance = numpy.maximum(left[:, None] - right[None, :], left[None, :] - right[:, None])
        for i, j in zip(*numpy.nonzero(numpy.triu(vertical & (distance <= gap), k=1))):
            root_i, root_j = find(int(i)), find(int(j))
            if root_i != root_j:
                parent[max(root_i, root_j)] = min(root_i, root_j)
    groups: typing.Dict[int, typing.List[int]] = {}
    for i in range(len(rects)):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda group: group[0])


class HeuristicDetector(Detector):
    """Connected components of the binarized window merged into horizontal runs"""

    def __init__(self, gap: int = 12, min_area: int = 4):
        """
        :param gap: The largest horizontal distance in input pixels between merged components
        :param min_area: Components with fewer ink pixels are treated as noise
        """
        self.gap = gap
        self.min_area = min_area

    def detect(self, raster: typing.Optional[numpy.ndarray], w: WindowSpec) -> WindowDetections:
        ink = postprocess.binarize_raster(raster)
        components = [rect for rect, area in postprocess.component_stats(ink) if area >= self.min_area]
        detections = []
        for group in group_horizontally(components, self.gap):
            box = geometry.union_box(components[i] for i in group)
            density = float(ink[box.top : box.bottom, box.left : box.right].mean())
            detections.append(ScoredRect.of(box, min(1.0, density)))
        return WindowDetections(window_id=w.window_id, detections=detections)
