"""HTTP backend for the manual-calibration UI: serves the session image and
cloud, projects the cloud through caller-supplied parameters (with the
0.4 m overlap filter), and persists saved extrinsics.

The core stays dependency-free; PNG re-encoding happens only here, with a
minimal stdlib encoder."""

from __future__ import annotations

import json
import struct
import threading
import zlib
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from .cloud import PointCloud, load_cloud
from .geom import CameraModel, project_valid
from .imaging import Image, load_image
from .result import (CalibResult, camera_from_json, camera_to_json,
                     pose_from_json, pose_to_json)

OVERLAP_FILTER_DEPTH_M = 0.4
MAX_UI_POINTS = 200_000

# Table I / Table II bindings, served so the UI never hardcodes them
KEYMAP_EXTRINSIC = {
    "q": "+x_deg", "a": "-x_deg",
    "w": "+y_deg", "s": "-y_deg",
    "e": "+z_deg", "d": "-z_deg",
    "r": "+x_m", "f": "-x_m",
    "t": "+y_m", "g": "-y_m",
    "y": "+z_m", "h": "-z_m",
}
KEYMAP_INTRINSIC = {"u": "+fx", "j": "-fx", "i": "+fy", "k": "-fy"}


def encode_png(img: Image) -> bytes:
    """Minimal PNG (8-bit gray or RGB, no filtering)."""
    data = img.data
    if data.ndim == 2:
        color_type = 0
        raw = data
    else:
        color_type = 2
        raw = data
    h, w = data.shape[:2]
    stream = b"".join(b"\x00" + raw[y].tobytes() for y in range(h))

    def chunk(tag, payload):
        body = tag + payload
        return struct.pack(">I", len(payload)) + body + \
            struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)

    ihdr = struct.pack(">IIBBBBB", w, h, 8, color_type, 0, 0, 0)
    return (b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr)
            + chunk(b"IDAT", zlib.compress(stream, 6))
            + chunk(b"IEND", b""))


def project_cloud(cloud: PointCloud, cam: CameraModel, extrinsic,
                  overlap_filter: bool = False) -> list[dict]:
    """Pixels of the cloud through (extrinsic, cam); (u, v) are integer
    bins. With the overlap filter, within one pixel any two surviving
    points are at least OVERLAP_FILTER_DEPTH_M apart in depth."""
    p_cam = extrinsic.transform(cloud.xyz)
    uv, ok = project_valid(cam, p_cam)
    depth = p_cam[:, 2]
    ui = np.round(uv[:, 0]).astype(int)
    vi = np.round(uv[:, 1]).astype(int)
    ok &= (ui >= 0) & (ui < cam.width) & (vi >= 0) & (vi < cam.height)
    idx = np.nonzero(ok)[0]
    order = idx[np.argsort(depth[idx], kind="stable")]
    out = []
    last_kept: dict[tuple, float] = {}
    for i in order:
        key = (int(ui[i]), int(vi[i]))
        if overlap_filter:
            prev = last_kept.get(key)
            if prev is not None and depth[i] - prev < OVERLAP_FILTER_DEPTH_M:
                continue
            last_kept[key] = float(depth[i])
        out.append({"u": int(ui[i]), "v": int(vi[i]),
                    "depth": float(depth[i]),
                    "intensity": float(cloud.intensity[i])})
    return out


@dataclass
class Session:
    mode: str
    image: Image | None
    clouds: dict
    camera: CameraModel | None
    extrinsic_json: dict
    output: str
    stride: int = 1

    @classmethod
    def load(cls, path) -> "Session":
        base = Path(path).parent
        cfg = json.loads(Path(path).read_text())

        def resolve(p):
            q = Path(p)
            return q if q.is_absolute() else base / q

        image = None
        camera = None
        if cfg.get("image"):
            image = load_image(resolve(cfg["image"]))
        if cfg.get("intrinsics"):
            camera = camera_from_json(
                json.loads(resolve(cfg["intrinsics"]).read_text()))
        clouds = {}
        for key in ("cloud", "cloud2"):
            if cfg.get(key):
                clouds[key] = load_cloud(resolve(cfg[key]))
        if not clouds:
            raise ValueError("session has no point cloud")
        extrinsic_json = {"euler_zyx_deg": [0.0, 0.0, 0.0],
                          "translation_m": [0.0, 0.0, 0.0]}
        if cfg.get("extrinsic"):
            extrinsic_json = json.loads(resolve(cfg["extrinsic"]).read_text())
        stride = max(1, (len(clouds["cloud"]) + MAX_UI_POINTS - 1)
                     // MAX_UI_POINTS)
        return cls(mode=cfg.get("mode", "lidar2camera"), image=image,
                   clouds=clouds, camera=camera,
                   extrinsic_json=extrinsic_json,
                   output=str(resolve(cfg.get("output",
                                              "manual_result.json"))),
                   stride=stride)

    def info(self) -> dict:
        out = {
            "mode": self.mode,
            "keymap": {"extrinsic": KEYMAP_EXTRINSIC,
                       "intrinsic": KEYMAP_INTRINSIC},
            "overlap_filter_depth_m": OVERLAP_FILTER_DEPTH_M,
            "extrinsic": self.extrinsic_json,
            "output": self.output,
            "clouds": {name: {"count": len(c), "stride": self.stride}
                       for name, c in self.clouds.items()},
        }
        if self.image is not None:
            out["image"] = {"width": self.image.width,
                            "height": self.image.height, "url": "/image"}
        if self.camera is not None:
            out["intrinsics"] = camera_to_json(self.camera)
        return out


class _Handler(BaseHTTPRequestHandler):
    session: Session = None
    save_lock = threading.Lock()

    def log_message(self, fmt, *args):
        pass

    def _reply(self, code, payload, content_type="application/json"):
        body = payload if isinstance(payload, bytes) \
            else json.dumps(payload).encode()
        self.send_response(code)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        s = self.session
        path = self.path.split("?")[0]
        if path == "/session":
            self._reply(200, s.info())
        elif path == "/image":
            if s.image is None:
                self._reply(404, {"error": "session has no image"})
            else:
                self._reply(200, encode_png(s.image), "image/png")
        elif path == "/cloud":
            which = "cloud2" if "which=slave" in self.path else "cloud"
            cloud = s.clouds.get(which)
            if cloud is None:
                self._reply(404, {"error": f"no {which} in session"})
                return
            pts = np.column_stack([cloud.xyz, cloud.intensity])[::s.stride]
            self._reply(200, {"points": pts.tolist(), "stride": s.stride,
                              "count": len(pts)})
        elif path == "/result":
            try:
                self._reply(200, json.loads(Path(s.output).read_text()))
            except FileNotFoundError:
                self._reply(404, {"error": "nothing saved yet"})
        else:
            self._reply(404, {"error": f"unknown route {path}"})

    def do_POST(self):
        s = self.session
        try:
            n = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(n) or b"{}")
        except (ValueError, json.JSONDecodeError):
            self._reply(422, {"error": "malformed JSON body"})
            return
        if self.path == "/project":
            try:
                extrinsic = pose_from_json(body["extrinsic"])
                cam = camera_from_json(body["intrinsics"]) \
                    if "intrinsics" in body else s.camera
                if cam is None:
                    raise ValueError("no intrinsics available")
                pixels = project_cloud(
                    s.clouds["cloud"], cam, extrinsic,
                    overlap_filter=bool(body.get("overlap_filter", False)))
            except (KeyError, ValueError, TypeError) as e:
                self._reply(422, {"error": str(e)})
                return
            self._reply(200, {
                "pixels": pixels,
                "intensity_color": bool(body.get("intensity_color", False)),
            })
        elif self.path == "/save":
            if "extrinsic" not in body:
                self._reply(422, {"error": "missing extrinsic"})
                return
            try:
                pose = pose_from_json(body["extrinsic"])
            except (ValueError, TypeError) as e:
                self._reply(422, {"error": str(e)})
                return
            result = CalibResult(tool="manual", pose=pose)
            payload = result.to_json()
            # echo the submitted JSON verbatim so saving round-trips
            payload["extrinsic"] = body["extrinsic"]
            if "intrinsics" in body:
                payload["intrinsics"] = body["intrinsics"]
            with self.save_lock:
                Path(s.output).write_text(json.dumps(payload, indent=2)
                                          + "\n")
            self._reply(200, {"ok": True, "path": s.output})
        else:
            self._reply(404, {"error": f"unknown route {self.path}"})


def make_server(session: Session, port: int = 0) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"session": session})
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve(session_path, port: int = 8787) -> None:
    session = Session.load(session_path)
    server = make_server(session, port)
    host, bound_port = server.server_address
    print(f"serving manual-calibration session on http://{host}:{bound_port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
