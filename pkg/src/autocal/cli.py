"""`autocal` command line: every tool as a subcommand plus the serve mode.

Exit codes: 0 success, 1 calibration failure (CalibrationError), 2 usage
error. With --json, failures are printed as structured JSON on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import board_detect as bd
from . import distortion_eval as de
from . import factory_camera as fc
from . import imaging as im
from . import lidar_imu, multi_lidar, online, synth, targetless_road
from .cloud import PointCloud, load_cloud, save_cloud, save_cloud_csv
from .errors import CalibrationError
from .geom import CameraModel, Pose, Rotation
from .lidar_imu import StampedPose
from .result import (CalibResult, camera_from_json, camera_to_json,
                     file_digest, pose_from_json, pose_to_json)


def _read_json(path):
    return json.loads(Path(path).read_text())


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def _board_spec(d: dict) -> bd.BoardSpec:
    return bd.BoardSpec(
        kind=d["kind"], rows=d.get("rows", 0), cols=d.get("cols", 0),
        pitch=d.get("pitch", 0.0), black_radius=d.get("black_radius", 0.0),
        white_radius=d.get("white_radius", 0.0),
        black_cols=tuple(d.get("black_cols", ())),
        hole_radius=d.get("hole_radius", 0.0),
        hole_centers=tuple(map(tuple, d.get("hole_centers", ()))),
        width=d.get("width", 0.0), height=d.get("height", 0.0))


def _spec_json(spec: bd.BoardSpec) -> dict:
    return {"kind": spec.kind, "rows": spec.rows, "cols": spec.cols,
            "pitch": spec.pitch, "black_radius": spec.black_radius,
            "white_radius": spec.white_radius,
            "black_cols": list(spec.black_cols),
            "hole_radius": spec.hole_radius,
            "hole_centers": [list(h) for h in spec.hole_centers],
            "width": spec.width, "height": spec.height}


def save_pose_track_csv(path, track) -> None:
    with open(path, "w") as f:
        f.write("t,x,y,z,qw,qx,qy,qz\n")
        for s in track:
            q = s.pose.rotation.as_quat()
            t = s.pose.translation
            f.write(",".join(repr(float(v))
                             for v in (s.stamp, *t, *q)) + "\n")


def load_pose_track_csv(path) -> list:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    out = []
    for r in rows:
        out.append(StampedPose(float(r[0]),
                               Pose(Rotation.from_quat(r[4:8]), r[1:4])))
    return out


def save_rates_csv(path, track: online.AngularRateTrack) -> None:
    with open(path, "w") as f:
        f.write("t,wx,wy,wz\n")
        for t, w in zip(track.stamps, track.rates):
            f.write(",".join(repr(float(v)) for v in (t, *w)) + "\n")


def load_rates_csv(path) -> online.AngularRateTrack:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return online.AngularRateTrack(rows[:, 0], rows[:, 1:4])


def _result_with_digests(result: CalibResult, inputs: dict,
                         seed=None) -> CalibResult:
    result.input_digests = {k: file_digest(v) for k, v in inputs.items()}
    if seed is not None:
        result.seed = seed
    return result


# -- synth bundles ------------------------------------------------------------------


def _synth_board(outdir: Path, seed: int):
    rng = np.random.default_rng(seed)
    cam = CameraModel(fx=1200, fy=1200, cx=480, cy=300,
                      width=960, height=600)
    checker = bd.BoardSpec(kind="checkerboard", rows=5, cols=7, pitch=0.08)
    circle = bd.BoardSpec(kind="circle", rows=5, cols=7, pitch=0.09,
                          black_radius=0.030, white_radius=0.024,
                          black_cols=(2, 4))
    rot = Rotation.from_euler_zyx(rng.uniform(-0.25, 0.25),
                                  rng.uniform(-0.05, 0.05),
                                  rng.uniform(-0.05, 0.05))
    pose = Pose(rot, [rng.uniform(-0.05, 0.05), rng.uniform(-0.04, 0.04),
                      rng.uniform(1.45, 1.7)])
    truth = {"pose": pose_to_json(pose), "camera": camera_to_json(cam)}
    for name, spec in (("checker", checker), ("circle", circle)):
        img, corners = synth.render_board_image(spec, cam, pose)
        im.save_image(img, outdir / f"{name}.pgm")
        _write_json(outdir / f"{name}_spec.json", _spec_json(spec))
        truth[f"{name}_corners"] = corners.points.tolist()
    holes = ((-0.35, -0.2), (0.35, -0.2), (-0.35, 0.2), (0.35, 0.2))
    hole_spec = bd.BoardSpec(kind="round_hole", hole_radius=0.10,
                             hole_centers=holes, width=1.2, height=0.9)
    board_rot = Rotation(np.array([[0.0, 0, -1], [1, 0, 0], [0, -1, 0]]))
    board_pose = Pose(board_rot, [4.0, 0.0, 1.2])
    scene = synth.board_rig_scene(hole_spec, board_pose)
    sensor = Pose(Rotation.identity(), [0, 0, 1.0])
    beam = synth.LidarBeamModel(rings=160, azimuth_steps=3600,
                                fov_up_deg=12, fov_down_deg=-12)
    cloud = synth.sample_lidar(scene, sensor, beam, noise_sigma=0.003,
                               seed=seed)
    save_cloud(cloud, outdir / "hole_board.pcd")
    _write_json(outdir / "hole_spec.json", _spec_json(hole_spec))
    prior = sensor.inverse() @ board_pose
    truth["hole_board"] = {
        "prior_pose": pose_to_json(prior),
        "roi": [[3.0, -1.5, -0.5], [5.0, 1.5, 2.5]],
        "hole_centers_sensor":
            prior.transform(hole_spec.hole_centers_3d()).tolist(),
    }
    _write_json(outdir / "intrinsics.json", camera_to_json(cam))
    _write_json(outdir / "truth.json", truth)


def _synth_road(outdir: Path, seed: int):
    cam = CameraModel(fx=1000, fy=1000, cx=480, cy=270,
                      width=960, height=540)
    cam_mount = synth.camera_mount(t=(1.2, 0.0, 1.5))
    lidar_mount = Pose(Rotation.identity(), [0.8, 0.0, 1.9])
    x_true = cam_mount.inverse() @ lidar_mount
    scene = synth.road_scene()
    masks = synth.render_scene_masks(scene, cam, cam_mount)
    for cls, mask in masks.items():
        im.save_image(mask, outdir / f"mask_{cls}.pgm")
    beam = synth.LidarBeamModel(rings=96, azimuth_steps=1000,
                                fov_up_deg=5, fov_down_deg=-24)
    cloud, cls_ids = synth.sample_lidar(scene, lidar_mount, beam,
                                        seed=seed, return_classes=True)
    save_cloud(cloud, outdir / "cloud.pcd")
    classes = np.where(cls_ids == synth.CLASS_LANE, "lane",
                       np.where(cls_ids == synth.CLASS_POLE, "pole",
                                "other"))
    _write_json(outdir / "cloud_classes.json", classes.tolist())
    # a gray road image for the manual tool
    gray = np.full((cam.height, cam.width), 70, dtype=np.uint8)
    gray[masks["lane"].data > 0] = 220
    gray[masks["pole"].data > 0] = 160
    im.save_image(im.Image(gray), outdir / "camera.pgm")
    _write_json(outdir / "intrinsics.json", camera_to_json(cam))
    _write_json(outdir / "extrinsic_true.json", pose_to_json(x_true))
    rng = np.random.default_rng(seed)
    ax = rng.normal(size=3)
    ax /= np.linalg.norm(ax)
    init = Pose(x_true.rotation
                @ Rotation.from_rotvec(ax * math.radians(2.0)),
                x_true.translation + rng.choice([-1.0, 1.0], 3) * 0.115)
    _write_json(outdir / "extrinsic_init.json", pose_to_json(init))
    _write_json(outdir / "session.json", {
        "mode": "lidar2camera", "image": "camera.pgm", "cloud": "cloud.pcd",
        "intrinsics": "intrinsics.json", "extrinsic": "extrinsic_init.json",
        "output": "manual_result.json"})
    _write_json(outdir / "truth.json", {"extrinsic": pose_to_json(x_true)})


def _synth_room(outdir: Path, seed: int):
    x_true = Pose(Rotation.from_euler_zyx(math.radians(5), math.radians(-2),
                                          math.radians(3)), [0.9, -0.2, 0.4])
    tr = synth.gen_trajectory("figure_eight", duration=24.0, scale=10.0,
                              bank_gain=0.7)
    save_pose_track_csv(outdir / "imu_track.csv", tr.poses)
    save_pose_track_csv(outdir / "lidar_track.csv", tr.sensor_track(x_true))
    scene = synth.room_scene()
    beam = synth.LidarBeamModel(rings=14, azimuth_steps=110, fov_up_deg=8,
                                fov_down_deg=-20)
    rng = np.random.default_rng(seed)
    index = []
    frames_dir = outdir / "frames"
    frames_dir.mkdir(exist_ok=True)
    for k in range(0, len(tr.poses), 10):
        sp = tr.poses[k]
        cloud = synth.sample_lidar(scene, sp.pose @ x_true, beam, seed=k)
        if len(cloud) > 400:
            cloud = cloud.select(rng.choice(len(cloud), 400, replace=False))
        name = f"frames/{len(index):05d}.pcd"
        save_cloud(cloud, outdir / name)
        index.append({"stamp": sp.stamp, "file": name})
    _write_json(outdir / "frames_index.json", index)
    init = Pose(x_true.rotation
                @ Rotation.from_rotvec([0.02, -0.02, 0.015]),
                x_true.translation + [0.05, -0.06, 0.05])
    _write_json(outdir / "extrinsic_init.json", pose_to_json(init))
    _write_json(outdir / "truth.json", {"extrinsic": pose_to_json(x_true)})


def _synth_radar(outdir: Path, seed: int):
    rng = np.random.default_rng(seed)
    yaw = math.radians(2.0)
    statics = np.column_stack([rng.uniform(20, 90, 25),
                               rng.uniform(-30, 30, 25)])
    tr = synth.gen_trajectory("straight", duration=8.0, speed=6.0)
    dets, (ts, vs) = synth.simulate_radar(statics, tr, yaw, seed=seed)
    with open(outdir / "radar.csv", "w") as f:
        f.write("t,v,angle,distance\n")
        for d in dets:
            f.write(",".join(repr(float(v))
                             for v in (d.stamp, d.v, d.angle,
                                       d.distance)) + "\n")
    with open(outdir / "speed.csv", "w") as f:
        f.write("t,v\n")
        for t, v in zip(ts, vs):
            f.write(f"{float(t)!r},{float(v)!r}\n")
    # online hand-eye bundle from a figure-eight drive
    x_cam = Pose(Rotation.from_euler_zyx(0.3, -0.1, 0.2), [0.8, -0.3, 0.5])
    tr8 = synth.gen_trajectory("figure_eight", duration=25.0)
    save_rates_csv(outdir / "imu_rates.csv", tr8.rates)
    save_pose_track_csv(outdir / "imu_track.csv", tr8.poses)
    # camera odometry at the camera rate (10 Hz vs the IMU's 100 Hz)
    save_pose_track_csv(outdir / "cam_odometry.csv",
                        tr8.sensor_track(x_cam)[::10])
    _write_json(outdir / "truth.json", {
        "radar_yaw_rad": yaw, "cam_extrinsic": pose_to_json(x_cam)})


# -- command handlers ------------------------------------------------------------------


def cmd_synth(args):
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    {"board": _synth_board, "road": _synth_road,
     "room": _synth_room, "radar": _synth_radar}[args.scenario](
        outdir, args.seed)
    print(f"wrote {args.scenario} bundle to {outdir}")
    return 0


def cmd_distortion_eval(args):
    img = im.load_image(args.image)
    cam = camera_from_json(_read_json(args.intrinsics))
    rep = de.evaluate(img, cam)
    _write_json(args.out, {
        "s_total": rep.s_total, "rms": rep.rms, "d_max": rep.d_max,
        "max_abs_residual": rep.max_abs_residual,
        "line_count": rep.line_count,
        "line_rms": rep.line_rms.tolist(),
        "sample_counts": rep.sample_counts.tolist(),
    })
    print(f"lines={rep.line_count} rms={rep.rms:.4f}px "
          f"d_max={rep.d_max:.4f}px -> {args.out}")
    return 0


def cmd_detect_board(args):
    spec = _board_spec(_read_json(args.spec))
    if args.kind == "hole":
        cloud = load_cloud(args.input)
        meta = _read_json(args.meta) if args.meta else {}
        prior = pose_from_json(meta["prior_pose"])
        roi = meta["roi"]
        corners = bd.detect_round_hole_board(cloud, spec, roi, prior)
    else:
        img = im.load_image(args.input)
        if args.kind == "checker":
            corners = bd.detect_checkerboard(img, spec)
        else:
            corners = bd.detect_circle_board(img, spec)
    _write_json(args.out, {
        "points": corners.points.tolist(),
        "rows": corners.rows, "cols": corners.cols,
        "predicted": corners.predicted.tolist(),
        "score": corners.score.tolist(),
    })
    print(f"detected {len(corners)} points -> {args.out}")
    return 0


def cmd_calib_board_lidar_camera(args):
    from .target_lidar_camera import (JointObservation, JointWeights,
                                      ViewObservation, calibrate_joint,
                                      estimate_intrinsics_zhang)
    raw = _read_json(args.obs)
    views = [ViewObservation(
        corners_px=np.asarray(v["corners_px"], dtype=float),
        board_corners=np.asarray(v["board_corners"], dtype=float),
        circle_centers_lidar=np.asarray(v["circle_centers_lidar"],
                                        dtype=float),
        circle_centers_board=np.asarray(v["circle_centers_board"],
                                        dtype=float))
        for v in raw["views"]]
    obs = JointObservation(views=views)
    width = int(raw.get("width", 1280))
    height = int(raw.get("height", 720))
    if args.intrinsics:
        init_cam = camera_from_json(_read_json(args.intrinsics))
    else:
        init_cam = estimate_intrinsics_zhang(
            [v.corners_px for v in views], views[0].board_corners,
            width, height)
    init_ext = pose_from_json(_read_json(args.init)) if args.init \
        else Pose.identity()
    result = calibrate_joint(obs, JointWeights(args.alpha, args.beta),
                             init_cam, init_ext)
    _result_with_digests(result, {"obs": args.obs})
    result.write(args.out)
    print(f"J_board={result.residuals['j_board']:.3f} "
          f"J_lidar={result.residuals['j_lidar']:.3f} -> {args.out}")
    return 0


def cmd_calib_road(args):
    cam = camera_from_json(_read_json(args.intrinsics))
    init = pose_from_json(_read_json(args.init))
    cloud = load_cloud(args.cloud)
    classes = np.asarray(_read_json(args.classes))
    clouds = {c: cloud.xyz[classes == c] for c in ("lane", "pole")}
    masks = {c: im.load_image(getattr(args, f"mask_{c}"))
             for c in ("lane", "pole")}
    result = targetless_road.calibrate_road(clouds, masks, init, cam)
    _result_with_digests(result, {"cloud": args.cloud})
    result.write(args.out)
    print(f"j_proj={result.residuals['j_proj']:.4f} -> {args.out}")
    return 0


def cmd_calib_lidar2lidar(args):
    master = load_cloud(args.master)
    slave = load_cloud(args.slave)
    result = multi_lidar.calibrate_pair(master, slave, eps=args.eps,
                                        seed=args.seed)
    _result_with_digests(result, {"master": args.master,
                                  "slave": args.slave}, seed=args.seed)
    result.write(args.out)
    r = result.residuals
    print(f"icp rms {r['icp_rms_before']:.4f}->{r['icp_rms_after']:.4f}, "
          f"octree vol {r['octree_volume_before']:.3f}->"
          f"{r['octree_volume_after']:.3f} -> {args.out}")
    return 0


def cmd_calib_lidar2imu(args):
    imu_track = load_pose_track_csv(args.imu)
    base = Path(args.frames).parent
    index = _read_json(args.frames)
    frames = [(e["stamp"], load_cloud(base / e["file"])) for e in index]
    if args.init:
        init = pose_from_json(_read_json(args.init))
    else:
        lidar_track = load_pose_track_csv(args.lidar_odometry)
        init = lidar_imu.handeye_init(imu_track, lidar_track)
    result = lidar_imu.calibrate(imu_track, frames, init)
    _result_with_digests(result, {"imu": args.imu})
    result.write(args.out)
    print(f"windows={len(result.residuals['window_costs'])} -> {args.out}")
    return 0


def cmd_imu_heading(args):
    track = load_pose_track_csv(args.track)
    samples = [targetless_road.TrajectorySample(
        s.stamp, s.pose.translation, s.pose.rotation.as_euler_zyx()[0])
        for s in track]
    offset = targetless_road.imu_heading_offset(samples)
    _write_json(args.out, {"yaw_offset_rad": offset,
                           "yaw_offset_deg": math.degrees(offset)})
    print(f"yaw offset {math.degrees(offset):.4f} deg -> {args.out}")
    return 0


def cmd_online(args):
    if args.tool == "radar-yaw":
        rows = np.loadtxt(args.radar, delimiter=",", skiprows=1, ndmin=2)
        dets = [online.RadarDetection(v=r[1], angle=r[2], distance=r[3],
                                      stamp=r[0]) for r in rows]
        speed = np.loadtxt(args.speed, delimiter=",", skiprows=1, ndmin=2)
        yaw = online.radar_yaw(dets, (speed[:, 0], speed[:, 1]))
        _write_json(args.out, {"yaw_rad": yaw, "yaw_deg": math.degrees(yaw)})
        print(f"radar yaw {math.degrees(yaw):.4f} deg -> {args.out}")
        return 0
    imu_rates = load_rates_csv(args.imu)
    odom = load_pose_track_csv(args.odom)
    poses = [s.pose for s in odom]
    cam_rates = online.rates_from_poses([s.stamp for s in odom],
                                        [p.rotation for p in poses])
    search = np.arange(-0.1, 0.1001, 0.01)
    td = online.temporal_offset(imu_rates, cam_rates, search)
    # pair IMU poses to the sensor stamps (post temporal alignment)
    imu_track = load_pose_track_csv(args.imu_track)
    imu_stamps = np.array([s.stamp for s in imu_track])
    paired = []
    for s in odom:
        i = int(np.argmin(np.abs(imu_stamps - (s.stamp + td))))
        if abs(imu_stamps[i] - (s.stamp + td)) <= 0.01:
            paired.append((imu_track[i].pose, s.pose))
    rots, trans = online.relative_motions([a for a, _ in paired],
                                          [b for _, b in paired])
    x = online.handeye_rotation(rots)
    t = online.handeye_translation(trans, x)
    result = CalibResult(tool=f"online-{args.tool}", pose=Pose(x, t),
                         residuals={"temporal_offset_s": td})
    result.write(args.out)
    print(f"td={td * 1000:.1f} ms -> {args.out}")
    return 0


def cmd_factory_camera(args):
    if args.mode == "vp":
        h = _read_json(args.homography)
        from .geom import Homography
        vp = fc.vanishing_point(Homography(np.asarray(h["matrix"])),
                                tuple(h["offsets"]))
        _write_json(args.out, {"vp": vp.tolist()})
        print(f"vp = {vp.tolist()} -> {args.out}")
        return 0
    cam = camera_from_json(_read_json(args.intrinsics))
    cfg = _read_json(args.points)
    if args.mode == "ground-h":
        model = fc.RangingModel(cam=cam, height=cfg["camera_height_m"],
                                vp=np.asarray(cfg["vp"]))
        h, fitted = fc.ground_homography(model, cfg["a_px"], cfg["b_px"],
                                         cfg["gap_m"])
        _write_json(args.out, {"homography": h.matrix.tolist(),
                               "fx_corrected": fitted.cam.fx})
    else:
        h, roll = fc.after_sale_homography(
            cfg["picked_px"], cam, cfg["camera_height_m"],
            roll_line=cfg.get("roll_line_px"))
        _write_json(args.out, {"homography": h.matrix.tolist(),
                               "roll_rad": roll})
    print(f"wrote {args.out}")
    return 0


def cmd_factory_lidar2car(args):
    pairs = _read_json(args.pairs)
    prior = _read_json(args.prior)
    constraint = fc.MountConstraint(a=np.asarray(prior["translation_m"]),
                                    lam=float(prior["tolerance_m"]))
    result = fc.lidar_to_car(np.asarray(pairs["lidar"]),
                             np.asarray(pairs["car"]), constraint)
    _result_with_digests(result, {"pairs": args.pairs})
    result.write(args.out)
    print(f"rms={result.residuals['rms_m']:.4f} m, constraint_active="
          f"{result.extra['constraint_active']} -> {args.out}")
    return 0


def cmd_serve(args):
    from .serve import serve
    serve(args.session, args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="autocal",
        description="Multi-sensor calibration toolbox: target-based, "
                    "targetless, factory and online calibration with a "
                    "built-in synthetic-scene generator.")
    p.add_argument("--json", action="store_true",
                   help="print failures as JSON on stderr")
    default_seed = int(os.environ.get("AUTOCAL_SEED", "0"))
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic data bundle")
    sp.add_argument("scenario", choices=["board", "road", "room", "radar"])
    sp.add_argument("--seed", type=int, default=default_seed)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_synth)

    sp = sub.add_parser("distortion-eval",
                        help="evaluate camera distortion on a line target")
    sp.add_argument("--image", required=True)
    sp.add_argument("--intrinsics", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_distortion_eval)

    sp = sub.add_parser("detect-board", help="detect a calibration target")
    sp.add_argument("--kind", choices=["checker", "circle", "hole"],
                    required=True)
    sp.add_argument("--spec", required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--meta", help="ROI/prior JSON for the hole board")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_detect_board)

    calib = sub.add_parser("calib", help="run a calibration")
    csub = calib.add_subparsers(dest="tool", required=True)

    sp = csub.add_parser("board-lidar-camera")
    sp.add_argument("--obs", required=True)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--beta", type=float, default=60.0)
    sp.add_argument("--intrinsics")
    sp.add_argument("--init")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_calib_board_lidar_camera)

    sp = csub.add_parser("road-lidar2camera")
    sp.add_argument("--cloud", required=True)
    sp.add_argument("--classes", required=True)
    sp.add_argument("--mask-lane", dest="mask_lane", required=True)
    sp.add_argument("--mask-pole", dest="mask_pole", required=True)
    sp.add_argument("--intrinsics", required=True)
    sp.add_argument("--init", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_calib_road)

    sp = csub.add_parser("lidar2lidar")
    sp.add_argument("--master", required=True)
    sp.add_argument("--slave", required=True)
    sp.add_argument("--eps", type=float, default=0.05)
    sp.add_argument("--seed", type=int, default=default_seed)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_calib_lidar2lidar)

    sp = csub.add_parser("lidar2imu")
    sp.add_argument("--imu", required=True, help="IMU pose track CSV")
    sp.add_argument("--frames", required=True, help="frame index JSON")
    sp.add_argument("--init", help="initial extrinsic JSON")
    sp.add_argument("--lidar-odometry", dest="lidar_odometry",
                    help="LiDAR odometry CSV for hand-eye initialization")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_calib_lidar2imu)

    sp = sub.add_parser("imu-heading", help="IMU yaw offset from driving")
    sp.add_argument("--track", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_imu_heading)

    sp = sub.add_parser("online", help="online calibration while driving")
    osub = sp.add_subparsers(dest="tool", required=True)
    for tool in ("cam-imu", "lidar-imu"):
        op = osub.add_parser(tool)
        op.add_argument("--imu", required=True, help="IMU rates CSV")
        op.add_argument("--imu-track", dest="imu_track", required=True)
        op.add_argument("--odom", required=True,
                        help="sensor odometry CSV")
        op.add_argument("--out", required=True)
        op.set_defaults(fn=cmd_online)
    op = osub.add_parser("radar-yaw")
    op.add_argument("--radar", required=True)
    op.add_argument("--speed", required=True)
    op.add_argument("--out", required=True)
    op.set_defaults(fn=cmd_online)

    factory = sub.add_parser("factory", help="factory calibration tools")
    fsub = factory.add_subparsers(dest="tool", required=True)
    sp = fsub.add_parser("camera")
    sp.add_argument("--mode", choices=["vp", "ground-h", "after-sale"],
                    required=True)
    sp.add_argument("--homography", help="board homography JSON (vp mode)")
    sp.add_argument("--intrinsics")
    sp.add_argument("--points", help="picked points / setup JSON")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_factory_camera)
    sp = fsub.add_parser("lidar2car")
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--prior", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_factory_lidar2car)

    sp = sub.add_parser("serve", help="serve a manual-calibration session")
    sp.add_argument("--session", required=True)
    sp.add_argument("--port", type=int, default=8787)
    sp.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.fn(args)
    except CalibrationError as e:
        if args.json:
            print(json.dumps({"error": type(e).__name__,
                              "message": str(e)}), file=sys.stderr)
        else:
            print(f"calibration failed: {type(e).__name__}: {e}",
                  file=sys.stderr)
        return 1
    return code


if __name__ == "__main__":
    sys.exit(main())
