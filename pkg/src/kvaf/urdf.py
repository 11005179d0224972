"""URDF parsing into validated kinematic chains.

Only the kinematic subset is read: revolute, prismatic and fixed joints
(continuous is accepted as revolute without limits); visual, collision and
inertial tags are ignored.  Gripper joints are identified by a configurable
name pattern and must hang off the terminal link of an arm.

Canonical chain serialization is JSON with a fixed key order, so that
parse -> serialize -> parse is a fixpoint (see ``chain_to_json``).
"""

from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import numpy as np

from .errors import StructureError, UrdfParseError, ValidationError
from . import transforms

GRIPPER_NAME_DEFAULT = r"gripper|finger"
D_MAX_DEFAULT = 0.08

_KINDS = ("revolute", "prismatic", "fixed")


@dataclass(frozen=True, eq=False)
class JointSpec:
    """One joint edge of the kinematic tree.

    ``origin`` is the static parent-to-joint transform, ``axis`` the unit
    motion axis in the joint frame (zero for fixed joints).  ``d_max`` is
    set only on gripper joints: the displacement at a fully open gripper.
    """

    name: str
    kind: str
    origin: np.ndarray
    axis: np.ndarray
    limits: tuple[float, float] | None
    parent_link: str
    child_link: str
    d_max: float | None = None

    def __post_init__(self):
        origin = np.array(self.origin, dtype=float).reshape(4, 4)
        axis = np.array(self.axis, dtype=float).reshape(3)
        origin.flags.writeable = False
        axis.flags.writeable = False
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "axis", axis)
        if self.kind not in _KINDS:
            raise ValidationError(f"joint {self.name!r}: unsupported kind {self.kind!r}")
        if self.kind != "fixed" and abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise ValidationError(f"joint {self.name!r}: axis must have unit norm")
        if not transforms.is_rotation(origin[:3, :3]):
            raise ValidationError(f"joint {self.name!r}: origin rotation is not orthonormal")
        if self.limits is not None:
            lo, hi = self.limits
            if lo > hi:
                raise ValidationError(f"joint {self.name!r}: limits lower > upper")
            object.__setattr__(self, "limits", (float(lo), float(hi)))
        if self.d_max is not None and self.d_max < 0:
            raise ValidationError(f"joint {self.name!r}: d_max must be >= 0")

    @property
    def actuated(self) -> bool:
        return self.kind != "fixed"


@dataclass(frozen=True, eq=False)
class ArmChain:
    """An unbranched base-to-tip joint sequence plus terminal gripper joints."""

    joints: tuple[JointSpec, ...]
    gripper_joints: tuple[JointSpec, ...] = ()
    base_transform: np.ndarray = field(default_factory=transforms.identity)

    def __post_init__(self):
        base = np.array(self.base_transform, dtype=float).reshape(4, 4)
        base.flags.writeable = False
        object.__setattr__(self, "base_transform", base)
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "gripper_joints", tuple(self.gripper_joints))
        for prev, nxt in zip(self.joints, self.joints[1:]):
            if nxt.parent_link != prev.child_link:
                raise StructureError(
                    f"joint {nxt.name!r} does not continue the chain at {prev.child_link!r}"
                )

    @property
    def actuated_joints(self) -> tuple[JointSpec, ...]:
        return tuple(j for j in self.joints if j.actuated)

    @property
    def link_names(self) -> tuple[str, ...]:
        if not self.joints:
            return ()
        return (self.joints[0].parent_link,) + tuple(j.child_link for j in self.joints)


@dataclass(frozen=True, eq=False)
class KinematicChain:
    """Parsed robot structure: one or two arms, each with optional gripper."""

    left: ArmChain
    right: ArmChain | None = None

    ARMS = ("left", "right")

    def arm(self, side: str) -> ArmChain:
        if side == "left":
            return self.left
        if side == "right":
            if self.right is None:
                raise ValidationError("chain has no right arm")
            return self.right
        raise ValidationError(f"unknown arm {side!r}")

    @property
    def arms(self) -> tuple[str, ...]:
        return ("left",) if self.right is None else ("left", "right")


def _urdf_rpy_matrix(rpy: np.ndarray) -> np.ndarray:
    # URDF origins use fixed-axis x-y-z rotations: R = Rz(y) @ Ry(p) @ Rx(r).
    r, p, y = rpy
    return (
        transforms.axis_angle_matrix(np.array([0.0, 0.0, 1.0]), y)
        @ transforms.axis_angle_matrix(np.array([0.0, 1.0, 0.0]), p)
        @ transforms.axis_angle_matrix(np.array([1.0, 0.0, 0.0]), r)
    )


def _parse_floats(text: str, n: int, what: str) -> np.ndarray:
    parts = text.split()
    if len(parts) != n:
        raise ValidationError(f"{what}: expected {n} numbers, got {text!r}")
    return np.array([float(p) for p in parts])


def _origin_from_element(elem: ET.Element | None) -> np.ndarray:
    if elem is None:
        return transforms.identity()
    xyz = _parse_floats(elem.get("xyz", "0 0 0"), 3, "origin xyz")
    rpy = _parse_floats(elem.get("rpy", "0 0 0"), 3, "origin rpy")
    return transforms.rigid(_urdf_rpy_matrix(rpy), xyz)


def _joint_from_element(elem: ET.Element, gripper_re: re.Pattern, d_max_default: float) -> JointSpec:
    name = elem.get("name")
    if not name:
        raise ValidationError("joint element without a name attribute")
    kind = elem.get("type")
    if kind == "continuous":
        kind = "revolute"
    if kind not in _KINDS:
        raise ValidationError(f"joint {name!r}: unsupported type {kind!r}")
    parent = elem.find("parent")
    child = elem.find("child")
    if parent is None or child is None:
        raise ValidationError(f"joint {name!r}: missing parent or child element")

    axis_elem = elem.find("axis")
    if kind == "fixed":
        axis = np.zeros(3)
    else:
        if axis_elem is None:
            raise ValidationError(f"joint {name!r}: non-fixed joint without an axis")
        axis = _parse_floats(axis_elem.get("xyz", ""), 3, f"joint {name!r} axis")
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise ValidationError(f"joint {name!r}: zero axis")
        axis = axis / norm

    limit_elem = elem.find("limit")
    limits = None
    if limit_elem is not None and limit_elem.get("lower") is not None:
        limits = (float(limit_elem.get("lower")), float(limit_elem.get("upper")))

    is_gripper = bool(gripper_re.search(name))
    d_max = None
    if is_gripper:
        d_max = limits[1] if limits is not None else d_max_default

    return JointSpec(
        name=name,
        kind=kind,
        origin=_origin_from_element(elem.find("origin")),
        axis=axis,
        limits=limits,
        parent_link=parent.get("link"),
        child_link=child.get("link"),
        d_max=d_max,
    )


def _walk_arm(start_joint: JointSpec, by_parent: dict, gripper_re: re.Pattern) -> ArmChain:
    joints = [start_joint]
    grippers: list[JointSpec] = []
    current = start_joint.child_link
    while True:
        children = by_parent.get(current, [])
        regular = [j for j in children if not gripper_re.search(j.name)]
        finger = [j for j in children if gripper_re.search(j.name)]
        if finger and regular:
            raise StructureError(
                f"gripper joints attach at non-terminal link {current!r}"
            )
        if finger:
            for j in finger:
                if by_parent.get(j.child_link):
                    raise StructureError(f"gripper joint {j.name!r} is not a leaf")
            grippers = finger
            break
        if not regular:
            break
        if len(regular) > 1:
            raise StructureError(
                f"link {current!r} branches into {len(regular)} non-gripper joints"
            )
        joints.append(regular[0])
        current = regular[0].child_link
    return ArmChain(joints=tuple(joints), gripper_joints=tuple(grippers))


_LEFT_RE = re.compile(r"(^|[^a-z])l(eft)?([^a-z]|$)", re.IGNORECASE)


def parse_urdf(
    xml_text: str,
    gripper_pattern: str = GRIPPER_NAME_DEFAULT,
    d_max_default: float = D_MAX_DEFAULT,
) -> KinematicChain:
    """Parse URDF XML text into a kinematic chain.

    The joint tree must be a single unbranched chain per arm, except that
    the terminal link may carry gripper-finger joints (matched by
    ``gripper_pattern``).  A root link with two non-gripper subtrees yields
    a bimanual chain; left/right assignment prefers joint names matching
    "left"/"l_", falling back to document order.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        line, col = exc.position
        raise UrdfParseError(f"malformed URDF XML at line {line}, column {col}: {exc.msg}") from exc

    gripper_re = re.compile(gripper_pattern)
    joint_elems = root.findall("joint")
    if not joint_elems:
        raise ValidationError("URDF contains no joints")
    joints = [_joint_from_element(e, gripper_re, d_max_default) for e in joint_elems]

    children_links = [j.child_link for j in joints]
    seen: set[str] = set()
    for link in children_links:
        if link in seen:
            raise StructureError(f"link {link!r} has more than one parent joint")
        seen.add(link)

    by_parent: dict[str, list[JointSpec]] = {}
    for j in joints:
        by_parent.setdefault(j.parent_link, []).append(j)

    roots = [j for j in joints if j.parent_link not in seen]
    if not roots:
        raise StructureError("joint graph is cyclic (no root link)")
    root_links = {j.parent_link for j in roots}
    if len(root_links) > 1:
        raise StructureError(f"multiple root links: {sorted(root_links)}")

    arm_starts = [j for j in roots if not gripper_re.search(j.name)]
    if len(arm_starts) == 0:
        raise StructureError("no non-gripper joint at the root link")
    if len(arm_starts) > 2:
        raise StructureError(f"root link branches into {len(arm_starts)} arms (max 2)")

    arms = [_walk_arm(j, by_parent, gripper_re) for j in arm_starts]
    total = sum(len(a.joints) + len(a.gripper_joints) for a in arms)
    if total != len(joints):
        raise StructureError("joints unreachable from the root link (cycle or island)")

    if len(arms) == 1:
        return KinematicChain(left=arms[0])
    scores = [1 if any(_LEFT_RE.search(j.name) for j in a.joints) else 0 for a in arms]
    if scores[1] > scores[0]:
        arms = [arms[1], arms[0]]
    return KinematicChain(left=arms[0], right=arms[1])


# ---------------------------------------------------------------------------
# Canonical JSON serialization (stable key order, lossless floats).


def _joint_dict(j: JointSpec) -> dict:
    return {
        "name": j.name,
        "kind": j.kind,
        "origin": [float(v) for v in j.origin.ravel()],
        "axis": [float(v) for v in j.axis],
        "limits": None if j.limits is None else [j.limits[0], j.limits[1]],
        "parent_link": j.parent_link,
        "child_link": j.child_link,
        "d_max": j.d_max,
    }


def _joint_from_dict(d: dict) -> JointSpec:
    return JointSpec(
        name=d["name"],
        kind=d["kind"],
        origin=np.array(d["origin"], dtype=float).reshape(4, 4),
        axis=np.array(d["axis"], dtype=float),
        limits=None if d["limits"] is None else (d["limits"][0], d["limits"][1]),
        parent_link=d["parent_link"],
        child_link=d["child_link"],
        d_max=d["d_max"],
    )


def _arm_dict(a: ArmChain) -> dict:
    return {
        "base_transform": [float(v) for v in a.base_transform.ravel()],
        "joints": [_joint_dict(j) for j in a.joints],
        "gripper_joints": [_joint_dict(j) for j in a.gripper_joints],
    }


def _arm_from_dict(d: dict) -> ArmChain:
    return ArmChain(
        joints=tuple(_joint_from_dict(j) for j in d["joints"]),
        gripper_joints=tuple(_joint_from_dict(j) for j in d["gripper_joints"]),
        base_transform=np.array(d["base_transform"], dtype=float).reshape(4, 4),
    )


def chain_to_json(chain: KinematicChain) -> str:
    """Serialize a chain to its canonical JSON form.

    Schema (key order as listed):
      {"format": "kvaf-chain/1",
       "arms": {"left": ARM, "right": ARM | null}}
      ARM   = {"base_transform": [16 row-major], "joints": [JOINT...],
               "gripper_joints": [JOINT...]}
      JOINT = {"name", "kind", "origin": [16 row-major], "axis": [3],
               "limits": [lo, hi] | null, "parent_link", "child_link",
               "d_max": float | null}
    """
    doc = {
        "format": "kvaf-chain/1",
        "arms": {
            "left": _arm_dict(chain.left),
            "right": None if chain.right is None else _arm_dict(chain.right),
        },
    }
    return json.dumps(doc, indent=2)


def chain_from_json(text: str) -> KinematicChain:
    doc = json.loads(text)
    if doc.get("format") != "kvaf-chain/1":
        raise ValidationError(f"unsupported chain format {doc.get('format')!r}")
    right = doc["arms"]["right"]
    return KinematicChain(
        left=_arm_from_dict(doc["arms"]["left"]),
        right=None if right is None else _arm_from_dict(right),
    )


def chains_equal(a: KinematicChain, b: KinematicChain) -> bool:
    """Exact field-wise equality (used by serialization fixpoint tests)."""
    return chain_to_json(a) == chain_to_json(b)
