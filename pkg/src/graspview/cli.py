"""``graspview`` command line: run, sweep, export, make-scene.

Exit codes: 0 done (grasp failures included), 2 configuration error,
3 file error, 4 external scorer unreachable with fallback disabled.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import re
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import ply, sim
from .config import ConfigError, RunConfig
from .errors import PlacementFailure, ScorerUnavailable
from .pipeline import STAGES
from .renderer import RenderedView, save_color_png
from .scoring import ExternalScorer, HeuristicScorer

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_SCORER = 0, 2, 3, 4
ENV_SCORER_URL = "GRASPVIEW_SCORER_URL"
SWEEP_AXES = ("nbv_budget", "difficulty", "noise_sigma")
CSV_FIELDS = ("axis", "value", "level", "seed", "success", "scale_error", "rot_deg", "trans_m",
              "coverage", "visibility", "rank_used", "reperceptions")
RENDER_NAME = re.compile(r"^(grasp-view|capture-[\w.]+|(step\d+-)?candidate-\d+)$")

log = logging.getLogger("graspview")


class CliError(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


# ---- configuration -------------------------------------------------------

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON run config; flags override its values")
    p.add_argument("--nbv-budget", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--scorer", choices=("heuristic", "external"))
    p.add_argument("--scorer-url")
    p.add_argument("--no-fallback", action="store_true", default=None,
                   help="fail (exit 4) instead of using the heuristic when the scorer is down")
    p.add_argument("--weights", help="w_v,w_g,w_o")
    p.add_argument("--out", help="output directory")


def build_config(args) -> RunConfig:
    base = {}
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot read config: {exc}")
        base = RunConfig.from_json(text).to_dict()
    flags = {"nbv_budget": args.nbv_budget, "seed": args.seed, "scorer": args.scorer,
             "scorer_url": args.scorer_url, "out_dir": args.out,
             "scene_path": getattr(args, "scene", None),
             "difficulty": getattr(args, "difficulty", None)}
    base.update({k: v for k, v in flags.items() if v is not None})
    if args.no_fallback:
        base["fallback"] = False
    if args.weights is not None:
        base["weights"] = args.weights
    if not base.get("scorer_url") and os.environ.get(ENV_SCORER_URL):
        base["scorer_url"] = os.environ[ENV_SCORER_URL]
    return RunConfig.from_dict(base)


def make_scorer(cfg: RunConfig):
    if cfg.scorer == "external":
        return ExternalScorer(cfg.scorer_url, fallback=cfg.fallback)
    return HeuristicScorer()


def load_scene_spec(cfg: RunConfig) -> sim.SceneSpec:
    if cfg.scene_path:
        try:
            text = Path(cfg.scene_path).read_text()
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot read scene: {exc}")
        try:
            return sim.SceneSpec.from_json(text)
        except (ValueError, KeyError, TypeError) as exc:
            raise CliError(EXIT_CONFIG, f"invalid scene file: {exc}")
    if cfg.difficulty:
        return sim.make_scene_spec(cfg.difficulty, cfg.seed)
    raise CliError(EXIT_CONFIG, "need --scene or --difficulty")


def _report_config(cfg: RunConfig) -> dict:
    d = cfg.to_dict()
    d.pop("out_dir")    # reports must not depend on where they are written
    return d


def _episode(cfg: RunConfig, spec: sim.SceneSpec, keep: bool = False) -> sim.EpisodeReport:
    try:
        return sim.run_episode(spec, cfg.pipeline_config(keep_renders=keep),
                               true_scale=cfg.true_scale, sigma=cfg.noise_sigma, seed=cfg.seed,
                               scorer=make_scorer(cfg))
    except PlacementFailure as exc:
        raise CliError(EXIT_CONFIG, str(exc))
    except ScorerUnavailable as exc:
        raise CliError(EXIT_SCORER, f"scorer unavailable: {exc}")


def _ensure_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot create {path}: {exc}")
    return path


def _write(path: Path, text: str):
    try:
        path.write_text(text)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc}")


# ---- commands ------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = build_config(args)
    spec = load_scene_spec(cfg)
    report = _episode(cfg, spec, keep=True)
    out = _ensure_dir(Path(cfg.out_dir))
    res = report.artifacts
    doc = report.to_dict()
    doc["config"] = _report_config(cfg)
    _write(out / "report.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _write(out / "config.json", cfg.to_json() + "\n")
    if res is not None:
        clouds, renders = _ensure_dir(out / "clouds"), _ensure_dir(out / "renders")
        try:
            for stage, cloud in res.stage_clouds.items():
                ply.write_ply(clouds / f"{stage}.ply", cloud)
            for name, view in res.renders.items():
                save_color_png(view, renders / f"{_render_file(name, cfg)}.png")
            for cap in res.captures:
                save_color_png(RenderedView(cap.image, cap.depth, None, cap.pose),
                               renders / f"capture-{cap.view_id}.png")
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot write artifacts: {exc}")
    print(f"success={report.success} visibility={report.visibility} "
          f"scale={report.scale_hat} -> {out / 'report.json'}")
    return EXIT_OK


def _render_file(name: str, cfg: RunConfig) -> str:
    """``step0-cand1_3`` -> ``step0-candidate-04`` (index in generation order)."""
    m = re.match(r"^step(\d+)-cand(\d+)_(\d+)$", name)
    if not m:
        return name
    step, ring, az = map(int, m.groups())
    n = 0 if ring == 0 else 1 + (ring - 1) * cfg.sampler.n_beta + az
    return f"step{step}-candidate-{n:02d}"


def _sweep_task(task):
    cfg_dict, axis, value, level, seed = task
    cfg = RunConfig.from_dict(cfg_dict)
    cfg.seed = seed
    spec = sim.make_scene_spec(level, seed)
    try:
        rep = _episode(cfg, spec)
    except CliError as exc:
        return {"error": (exc.code, str(exc))}
    pe = rep.pose_errors or {}
    row = {"axis": axis, "value": value, "level": level, "seed": seed,
           "success": int(rep.success), "scale_error": rep.scale_error,
           "rot_deg": pe.get("rot_deg", ""), "trans_m": pe.get("trans_m", ""),
           "coverage": rep.coverage, "visibility": rep.visibility,
           "rank_used": "" if rep.rank_used is None else rep.rank_used,
           "reperceptions": rep.reperceptions}
    doc = rep.to_dict()
    doc["axis_value"] = value
    return {"row": row, "report": doc}


def _parse_values(axis: str, text: str) -> list:
    raw = [v.strip() for v in (text or "").split(",") if v.strip()]
    if not raw:
        raise CliError(EXIT_CONFIG, "--sweep-values is empty")
    try:
        if axis == "nbv_budget":
            return [int(v) for v in raw]
        if axis == "noise_sigma":
            return [float(v) for v in raw]
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, f"bad sweep value: {exc}")
    bad = [v for v in raw if v not in sim.LEVELS]
    if bad:
        raise CliError(EXIT_CONFIG, f"unknown difficulty {bad}; choose from {sim.LEVELS}")
    return raw


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    axis = args.sweep_axis
    values = _parse_values(axis, args.sweep_values)
    level = cfg.difficulty or "hard"
    tasks = []
    for value in values:
        c = RunConfig.from_dict(cfg.to_dict())
        lvl = level
        if axis == "nbv_budget":
            c.nbv_budget = value
        elif axis == "noise_sigma":
            c.noise_sigma = value
        else:
            lvl = value
        c.validate()
        seeds = sim.reference_seeds(lvl)
        if args.max_seeds is not None:
            seeds = seeds[:args.max_seeds]
        tasks += [(c.to_dict(), axis, value, lvl, s) for s in seeds]
    if args.jobs is not None and args.jobs < 1:
        raise CliError(EXIT_CONFIG, "--jobs must be >= 1")
    jobs = args.jobs or 1
    if jobs == 1:
        results = [_sweep_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_task, tasks))    # map keeps task order
    for r in results:
        if "error" in r:
            raise CliError(*r["error"])
    out = _ensure_dir(Path(cfg.out_dir))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in results:
        w.writerow(r["row"])
    _write(out / "sweep.csv", buf.getvalue())
    doc = {"axis": axis, "values": values, "config": _report_config(cfg),
           "episodes": [r["report"] for r in results]}
    _write(out / "report.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"{len(results)} episodes -> {out / 'sweep.csv'}")
    return EXIT_OK


def _valid_renders(run_dir: Path) -> list:
    return sorted(p.stem for p in (run_dir / "renders").glob("*.png"))


def cmd_export(args) -> int:
    run_dir = Path(args.run_dir)
    out = Path(args.out)
    if args.artifact == "report":
        src = run_dir / "report.json"
    elif args.artifact == "cloud":
        if args.stage not in STAGES:
            raise CliError(EXIT_CONFIG, f"unknown stage {args.stage!r}; valid stages: {', '.join(STAGES)}")
        src = run_dir / "clouds" / f"{args.stage}.ply"
    else:
        stage = args.stage or ""
        if not RENDER_NAME.match(stage):
            raise CliError(EXIT_CONFIG, f"unknown render {stage!r}; valid: grasp-view, capture-<view>, "
                                        f"candidate-<n>, step<s>-candidate-<n>; present: "
                                        f"{', '.join(_valid_renders(run_dir)) or 'none'}")
        m = re.match(r"^candidate-(\d+)$", stage)
        if m:
            stage = f"step0-candidate-{int(m.group(1)):02d}"
        else:
            stage = re.sub(r"candidate-(\d+)$", lambda g: f"candidate-{int(g.group(1)):02d}", stage)
        src = run_dir / "renders" / f"{stage}.png"
    if not src.is_file():
        raise CliError(EXIT_IO, f"missing artifact {src}")
    try:
        if out.parent != Path(""):
            out.parent.mkdir(parents=True, exist_ok=True)
        if args.artifact == "cloud":
            ply.write_ply(out, ply.read_ply(src))     # re-encode: validates the file
        else:
            shutil.copyfile(src, out)
    except (OSError, ply.PlyError) as exc:
        raise CliError(EXIT_IO, f"export failed: {exc}")
    print(out)
    return EXIT_OK


def cmd_make_scene(args) -> int:
    try:
        spec = sim.make_scene_spec(args.difficulty, args.seed)
        scene = sim.build_scene(spec)
    except PlacementFailure as exc:
        raise CliError(EXIT_CONFIG, str(exc))
    out = Path(args.out)
    try:
        if out.parent != Path(""):
            out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(scene.spec.to_json() + "\n")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {out}: {exc}")
    print(f"{out} (initial visibility {scene.truth.initial_visibility:.3f})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="graspview", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one episode")
    p.add_argument("--scene", help="scene JSON file")
    p.add_argument("--difficulty", choices=sim.LEVELS, help="generate a scene instead of --scene")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="episodes over the reference seeds for several values")
    p.add_argument("--sweep-axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--sweep-values", required=True, help="comma-separated values")
    p.add_argument("--difficulty", choices=sim.LEVELS, help="level for non-difficulty axes [hard]")
    p.add_argument("--jobs", type=int, help="parallel episodes [1]")
    p.add_argument("--max-seeds", type=int, help="use only the first N reference seeds")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export", help="copy an artifact out of a run directory")
    p.add_argument("artifact", choices=("cloud", "render", "report"))
    p.add_argument("--stage", help=f"cloud stage ({', '.join(STAGES)}) or render name")
    p.add_argument("--run-dir", default="out")
    p.add_argument("--out", required=True, help="destination file")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("make-scene", help="write a generated scene as JSON")
    p.add_argument("--difficulty", choices=sim.LEVELS, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_scene)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)     # argparse exits with 2 on bad flags
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"graspview: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"graspview: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
