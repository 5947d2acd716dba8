"""Road centerline geometry and two-point preview errors.

Sign conventions used throughout the package:

* ``e_y`` is the signed lateral offset of the preview point from the
  centerline, positive when the point lies left of the road tangent.
* ``e_theta`` is road tangent heading minus vehicle heading, wrapped to
  (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from sharedsteer import _geometry as geo

CORRIDOR_M = 50.0
JOINT_TOL = 1e-9


class CourseError(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    kind: str  # "straight" or "arc"
    length: float
    curvature: float = 0.0

    def __post_init__(self):
        if self.kind not in ("straight", "arc"):
            raise CourseError(f"unknown segment kind {self.kind!r}")
        if not self.length > 0:
            raise CourseError("segment length must be positive")
        if self.kind == "straight" and self.curvature != 0.0:
            raise CourseError("straight segment with nonzero curvature")
        if self.kind == "arc" and self.curvature == 0.0:
            raise CourseError("arc segment needs nonzero curvature")

    @classmethod
    def straight(cls, length):
        return cls("straight", float(length))

    @classmethod
    def arc(cls, length, radius):
        """Arc of signed ``radius`` (positive turns left)."""
        return cls("arc", float(length), 1.0 / float(radius))


class Course:
    """Piecewise straight/arc centerline.

    By default the course starts at the origin heading along +x; ``origin``
    places the start at ``(x, y, heading)`` instead.
    """

    def __init__(self, segments, lane_width, origin=(0.0, 0.0, 0.0)):
        segments = list(segments)
        if not segments:
            raise CourseError("course needs at least one segment")
        if not lane_width > 0:
            raise CourseError("lane_width must be positive")
        self.segments = tuple(segments)
        self.lane_width = float(lane_width)

        table = np.zeros((len(segments), 6))
        s = 0.0
        x, y, h = (float(v) for v in origin)
        self.origin = (x, y, h)
        for k, seg in enumerate(segments):
            table[k] = (s, seg.length, x, y, h, seg.curvature)
            x, y, h = geo.seg_pose(table, k, seg.length)
            s += seg.length
        table.setflags(write=False)
        self.table = table
        self.total_length = s

    @property
    def junctions(self):
        """Arc lengths of interior joints."""
        return [float(v) for v in self.table[1:, geo.S0]]

    def segment_at(self, s):
        return int(geo.segment_index(self.table, float(s)))

    def __eq__(self, other):
        if not isinstance(other, Course):
            return NotImplemented
        return (self.segments, self.lane_width, self.origin) == (other.segments, other.lane_width, other.origin)

    def __hash__(self):
        return hash((self.segments, self.lane_width, self.origin))

    def __repr__(self):
        return f"Course({len(self.segments)} segments, {self.total_length:g} m, lane {self.lane_width:g} m)"


@dataclass(frozen=True)
class PreviewErrors:
    e_y: float
    e_theta: float


def build_thesis_course(arc_length=314.0, exit_length=500.0):
    """1000 m straight, 200 m radius left turn, exit straight; 3.6 m lane."""
    return Course(
        [
            Segment.straight(1000.0),
            Segment.arc(arc_length, 200.0),
            Segment.straight(exit_length),
        ],
        lane_width=3.6,
    )


def straight_course(length, lane_width=3.6):
    return Course([Segment.straight(length)], lane_width)


def centerline_at(course, s):
    """Position, heading and curvature of the centerline at arc length ``s``."""
    s = float(s)
    if not (0.0 <= s <= course.total_length):
        raise CourseError(f"s={s} outside [0, {course.total_length}]")
    k = course.segment_at(s)
    u = s - course.table[k, geo.S0]
    x, y, h = geo.seg_pose(course.table, k, u)
    return np.array([x, y]), h, float(course.table[k, geo.KAPPA])


def foot_point(course, p):
    """Arc length of the closest centerline point to ``p``."""
    s, dist, _ = geo.closest_point(course.table, float(p[0]), float(p[1]))
    if dist > CORRIDOR_M:
        raise CourseError(f"point {tuple(p)} is {dist:.1f} m from the centerline")
    return s


def lateral_offset(course, p):
    """Signed distance of ``p`` from the centerline (left positive)."""
    s = foot_point(course, p)
    c, h, _ = centerline_at(course, s)
    return -(p[0] - c[0]) * math.sin(h) + (p[1] - c[1]) * math.cos(h)


def road_heading(course, s):
    """Tangent heading at ``s``; clamped to the end tangent past the course."""
    s = min(max(float(s), 0.0), course.total_length)
    k = course.segment_at(s)
    return geo.heading_at(course.table, k, s)


def preview_errors(course, position, heading, v, t_near, t_far=None):
    """Near-point lateral error and far-point yaw error.

    The near point is projected ``v * t_near`` ahead along the heading. The
    far point sits ``v * t_far`` further along the road from the vehicle's
    own foot point. ``t_far=None`` disables the far point (``e_theta = 0``).
    """
    if not v > 0:
        raise ValueError("speed must be positive")
    px = position[0] + v * t_near * math.cos(heading)
    py = position[1] + v * t_near * math.sin(heading)
    e_y = lateral_offset(course, (px, py))
    if t_far is None:
        return PreviewErrors(e_y, 0.0)
    s_vehicle = foot_point(course, position)
    theta = road_heading(course, s_vehicle + v * t_far)
    return PreviewErrors(e_y, float(geo.wrap_angle(theta - heading)))
