"""Result container and the JSON schemas shared by CLI, serve and UI."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .geom import CameraModel, Pose, Rotation


def pose_to_json(pose: Pose) -> dict:
    """Extrinsic schema: matrix + quaternion + Euler carried together so no
    consumer has to guess the convention."""
    y, p, r = pose.rotation.as_euler_zyx()
    return {
        "rotation_matrix": [[float(v) for v in row] for row in pose.rotation.matrix],
        "quaternion_wxyz": [float(v) for v in pose.rotation.as_quat()],
        "euler_zyx_deg": [math.degrees(y), math.degrees(p), math.degrees(r)],
        "translation_m": [float(v) for v in pose.translation],
    }


def pose_from_json(d: dict) -> Pose:
    """Accepts any subset of the extrinsic schema; matrix wins over
    quaternion, quaternion over Euler."""
    if "rotation_matrix" in d:
        rot = Rotation(np.asarray(d["rotation_matrix"], dtype=float))
    elif "quaternion_wxyz" in d:
        rot = Rotation.from_quat(d["quaternion_wxyz"])
    elif "euler_zyx_deg" in d:
        y, p, r = (math.radians(v) for v in d["euler_zyx_deg"])
        rot = Rotation.from_euler_zyx(y, p, r)
    else:
        raise ValueError("extrinsic JSON carries no rotation")
    t = np.asarray(d.get("translation_m", [0.0, 0.0, 0.0]), dtype=float)
    return Pose(rot, t)


def camera_to_json(cam: CameraModel) -> dict:
    return {
        "fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
        "k1": cam.k1, "k2": cam.k2, "p1": cam.p1, "p2": cam.p2, "k3": cam.k3,
        "width": cam.width, "height": cam.height,
    }


def camera_from_json(d: dict) -> CameraModel:
    return CameraModel(
        fx=float(d["fx"]), fy=float(d["fy"]),
        cx=float(d["cx"]), cy=float(d["cy"]),
        k1=float(d.get("k1", 0.0)), k2=float(d.get("k2", 0.0)),
        p1=float(d.get("p1", 0.0)), p2=float(d.get("p2", 0.0)),
        k3=float(d.get("k3", 0.0)),
        width=int(d.get("width", 1920)), height=int(d.get("height", 1080)),
    )


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class CalibResult:
    """Outcome of one calibration run, serializable to JSON."""

    tool: str
    pose: Pose | None = None
    camera: CameraModel | None = None
    residuals: dict = field(default_factory=dict)
    iterations: int = 0
    converged: bool = True
    seed: int | None = None
    input_digests: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    timestamp: str = ""

    def __post_init__(self):
        if not self.timestamp:
            self.timestamp = datetime.now(timezone.utc).isoformat()
        for k, v in self.residuals.items():
            if isinstance(v, float) and not math.isfinite(v):
                raise ValueError(f"non-finite residual {k}={v}")

    def to_json(self) -> dict:
        out = {
            "tool": self.tool,
            "timestamp": self.timestamp,
            "iterations": self.iterations,
            "converged": self.converged,
            "residuals": self.residuals,
        }
        if self.pose is not None:
            out["extrinsic"] = pose_to_json(self.pose)
        if self.camera is not None:
            out["intrinsics"] = camera_to_json(self.camera)
        if self.seed is not None:
            out["seed"] = self.seed
        if self.input_digests:
            out["input_digests"] = self.input_digests
        if self.extra:
            out["extra"] = self.extra
        return out

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def from_json(cls, d: dict) -> "CalibResult":
        return cls(
            tool=d["tool"],
            pose=pose_from_json(d["extrinsic"]) if "extrinsic" in d else None,
            camera=camera_from_json(d["intrinsics"]) if "intrinsics" in d else None,
            residuals=d.get("residuals", {}),
            iterations=d.get("iterations", 0),
            converged=d.get("converged", True),
            seed=d.get("seed"),
            input_digests=d.get("input_digests", {}),
            extra=d.get("extra", {}),
            timestamp=d.get("timestamp", ""),
        )
