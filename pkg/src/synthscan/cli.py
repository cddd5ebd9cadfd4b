"""synthscan command line: scene-gen, scan, merge, blocks, stats, compare.

Exit codes: 0 success, 1 usage error, 2 input/domain error, 3 internal error.
The default seed is 42; the SYNTHSCAN_SEED environment variable overrides it,
and an explicit --seed overrides both.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

from .errors import SynthscanError

log = logging.getLogger("synthscan")

DEFAULT_SEED = 42
ENV_SEED = "SYNTHSCAN_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems, not argparse's 2
        raise UsageError(f"{self.prog}: {message}")


def _resolve_seed(explicit: int | None, fallback: int = DEFAULT_SEED) -> int:
    if explicit is not None:
        return explicit
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise SynthscanError(f"{ENV_SEED} must be an integer, got {env!r}") from None
    return fallback


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="synthscan",
                     description="Virtual laser scanning of labeled mesh scenes")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="increase log verbosity (-v, -vv)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scene-gen", parents=[], description=(
        "Assemble a labeled scene from OBJ assets and emit the scene and "
        "survey XML files."))
    p.add_argument("--objects-dir", required=True, help="directory of class .obj files")
    p.add_argument("--ground-plane", required=True, help="ground plane .obj")
    p.add_argument("--name", required=True, help="scene name")
    p.add_argument("--num-objects", required=True, type=int,
                   help="objects to distribute on the grid")
    p.add_argument("--segments", required=True, type=int,
                   help="circular segments (scan positions)")
    p.add_argument("--radius", required=True, type=float,
                   help="scan-position radius around the scene center, m")
    p.add_argument("--spacing", type=float, default=10.0,
                   help="object grid pitch, m (default 10)")
    p.add_argument("--height", type=float, default=1.7,
                   help="scanner height above scene center, m (default 1.7)")
    p.add_argument("--preset", default="tls-default",
                   help="scanner settings preset for the survey (default tls-default)")
    p.add_argument("--scatter", action="store_true",
                   help="seeded uniform-random placement instead of the grid")
    p.add_argument("--seed", type=int, default=None, help="survey seed")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_scene_gen)

    p = sub.add_parser("scan", description=(
        "Execute a survey against a scene; one labeled .xyz per leg plus "
        "scan.log."))
    p.add_argument("--survey", required=True, help="survey XML")
    p.add_argument("--scene", required=True, help="scene XML")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="override the survey file's seed")
    p.add_argument("--threads", type=int, default=None,
                   help="simulation worker threads")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("merge", description="Concatenate .xyz clouds into one.")
    p.add_argument("inputs", nargs="+", help=".xyz files in leg order")
    p.add_argument("--out", required=True, help="merged .xyz path")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("blocks", description=(
        "Partition a cloud into sliding-window training blocks (4-field .txt)."))
    p.add_argument("--in", dest="input", required=True, help="input .xyz (or .txt)")
    p.add_argument("--window", type=float, default=1.0, help="window size, m")
    p.add_argument("--stride", type=float, default=1.0, help="window stride, m")
    p.add_argument("--min-points", type=int, default=100,
                   help="drop blocks below this size")
    p.add_argument("--sample-to", type=int, default=None,
                   help="resample every block to exactly N points")
    p.add_argument("--seed", type=int, default=None, help="sampling seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_blocks)

    p = sub.add_parser("stats", description="Cloud statistics.")
    p.add_argument("--in", dest="input", required=True, help="input .xyz (or .txt)")
    p.add_argument("--csv", default=None, help="also write stats as CSV")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("compare", description=(
        "Nearest-neighbor distances from cloud A to cloud B."))
    p.add_argument("--a", required=True, help="query cloud")
    p.add_argument("--b", required=True, help="reference cloud")
    p.add_argument("--csv", default=None, help="also write the table as CSV")
    p.set_defaults(func=cmd_compare)
    return parser


def _read_cloud(path: str):
    from .errors import MissingFile
    from .pointcloud import read_training_txt, read_xyz

    p = Path(path)
    if not p.is_file():
        raise MissingFile(str(p))
    data = p.read_bytes()
    if p.suffix == ".txt":
        return read_training_txt(data)
    return read_xyz(data)


def cmd_scene_gen(args) -> int:
    from .assets import LabelRegistry, load_assets_dir, load_ground_plane
    from .scene import build_scene, generate_scan_positions, write_scene_xml
    from .survey import Leg, Survey, preset, write_survey_xml

    if args.num_objects < 1:
        raise UsageError("synthscan scene-gen: --num-objects must be >= 1")
    if args.segments < 1:
        raise UsageError("synthscan scene-gen: --segments must be >= 1")
    if args.radius <= 0:
        raise UsageError("synthscan scene-gen: --radius must be > 0")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    registry = LabelRegistry()
    ground = load_ground_plane(args.ground_plane)
    assets = load_assets_dir(args.objects_dir, registry)
    seed = _resolve_seed(args.seed)
    scene = build_scene(assets, ground, args.num_objects, args.spacing,
                        args.name, registry,
                        scatter_seed=seed if args.scatter else None)
    positions = generate_scan_positions(scene.center, args.radius,
                                        args.segments, args.height)
    settings = preset(args.preset)
    legs = [Leg(position=p.position, index=p.index) for p in positions]
    survey = Survey(name=args.name, scene_path="scene.xml", scene_id=args.name,
                    settings=settings, legs=legs, seed=seed)

    # reference assets relative to the scene file so the pair relocates
    for part in scene.parts:
        part.asset.source = os.path.relpath(part.asset.source, out)
    (out / "scene.xml").write_bytes(write_scene_xml(scene))
    (out / "survey.xml").write_bytes(write_survey_xml(survey))
    print(f"scene {args.name!r}: {args.num_objects} objects placed, "
          f"{len(legs)} legs generated")
    print(f"wrote {out / 'scene.xml'} and {out / 'survey.xml'}")
    return 0


def _describe_settings(s) -> str:
    return (f"horiz {s.horiz_start}..{s.horiz_end} deg @ {s.horiz_res}, "
            f"vert {s.vert_start}..{s.vert_end} deg @ {s.vert_res}, "
            f"max_range {s.max_range} m, sigma {s.range_noise_sigma} m, "
            f"divergence {s.beam_divergence} mrad, q {s.beam_sample_quality}")


def cmd_scan(args) -> int:
    from .errors import MissingFile
    from .pointcloud import write_xyz
    from .scanner import simulate_survey
    from .scene import file_asset_loader, parse_scene_xml
    from .survey import parse_survey_xml

    survey_path = Path(args.survey)
    scene_path = Path(args.scene)
    for p in (survey_path, scene_path):
        if not p.is_file():
            raise MissingFile(str(p))
    survey = parse_survey_xml(survey_path.read_bytes())
    scene = parse_scene_xml(scene_path.read_bytes(),
                            file_asset_loader(scene_path.parent))
    if survey.scene_id and survey.scene_id != scene.name:
        log.warning("survey references scene id %r but %r contains %r",
                    survey.scene_id, str(scene_path), scene.name)
    survey.seed = _resolve_seed(args.seed, fallback=survey.seed)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    clouds = simulate_survey(scene, survey, threads=args.threads)
    elapsed = time.perf_counter() - t0

    lines = [f"survey: {survey.name}",
             f"scene: {scene_path} (id {scene.name})",
             f"seed: {survey.seed}",
             f"threads: {args.threads if args.threads else 'default'}",
             f"settings: {_describe_settings(survey.settings)}",
             f"legs: {len(survey.legs)}"]
    total = 0
    for leg, cloud in zip(survey.legs, clouds):
        name = f"leg_{leg.index:03d}.xyz"
        (out / name).write_bytes(write_xyz(cloud))
        if leg.settings is not None:
            lines.append(f"leg {leg.index:03d} settings: "
                         f"{_describe_settings(leg.settings)}")
        lines.append(f"leg {leg.index:03d}: {len(cloud)} points -> {name}")
        total += len(cloud)
    lines.append(f"total points: {total}")
    lines.append(f"wall time: {elapsed:.3f} s")
    (out / "scan.log").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"scanned {len(clouds)} legs, {total} points, {elapsed:.3f} s "
          f"-> {out}")
    return 0


def cmd_merge(args) -> int:
    from .pointcloud import merge, write_xyz

    clouds = [_read_cloud(p) for p in args.inputs]
    merged = merge(clouds)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(write_xyz(merged))
    print(f"merged {len(clouds)} clouds, {len(merged)} points -> {out}")
    return 0


def cmd_blocks(args) -> int:
    from .blocks import BlockSpec, partition_blocks, write_blocks

    cloud = _read_cloud(args.input)
    spec = BlockSpec(window_x=args.window, window_y=args.window,
                     stride_x=args.stride, stride_y=args.stride,
                     min_points=args.min_points, sample_to=args.sample_to)
    blocks = partition_blocks(cloud, spec, seed=_resolve_seed(args.seed))
    base = Path(args.input).stem
    entries = write_blocks(blocks, args.out, base)
    print(f"wrote {len(entries)} blocks and {base}_manifest.csv -> {args.out}")
    return 0


def cmd_stats(args) -> int:
    from .pointcloud import stats

    s = stats(_read_cloud(args.input))
    rows = [("points", str(s.count))]
    if s.bbox is not None:
        lo, hi = s.bbox.min, s.bbox.max
        rows.append(("bbox min", f"{lo[0]:.6g} {lo[1]:.6g} {lo[2]:.6g}"))
        rows.append(("bbox max", f"{hi[0]:.6g} {hi[1]:.6g} {hi[2]:.6g}"))
    spacing = f"{s.mean_nn_spacing:.6g}" if s.nn_spacing_defined else "undefined"
    rows.append(("mean NN spacing [m]", spacing))
    for label, count in sorted(s.label_counts.items()):
        rows.append((f"label {label}", str(count)))
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"{k:<{width}}  {v}")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write("metric,value\n")
            for k, v in rows:
                fh.write(f"{k},{v}\n")
    return 0


def cmd_compare(args) -> int:
    from .pointcloud import compare

    result = compare(_read_cloud(args.a), _read_cloud(args.b))
    header = f"{'label':>8}  {'count':>8}  {'mean [m]':>12}  {'rms [m]':>12}  {'max [m]':>12}"
    print(header)
    print(f"{'all':>8}  {sum(v.count for v in result.per_label.values()):>8}  "
          f"{result.mean:>12.6g}  {result.rms:>12.6g}  {result.max:>12.6g}")
    for label, d in sorted(result.per_label.items()):
        print(f"{label:>8}  {d.count:>8}  {d.mean:>12.6g}  {d.rms:>12.6g}  "
              f"{d.max:>12.6g}")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write("label,count,mean,rms,max\n")
            fh.write(f"all,{sum(v.count for v in result.per_label.values())},"
                     f"{result.mean!r},{result.rms!r},{result.max!r}\n")
            for label, d in sorted(result.per_label.items()):
                fh.write(f"{label},{d.count},{d.mean!r},{d.rms!r},{d.max!r}\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (SynthscanError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"synthscan: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"synthscan: internal error: {exc!r}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
