"""Command line: ``cornav run | eval | render``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import bench
from .agent import AgentConfig, EpisodeTrace, replay, run_episode, run_fbe_baseline
from .experts import RemoteBackend, ScriptedBackend, build_expert
from .geometry import LowLevelAction, Pose
from .perception import NoiseConfig, load_lexicon
from .world import EpisodeSpec, SceneError, SceneMap, load_episodes, load_scene, step

log = logging.getLogger("cornav")

PIXELS_PER_CELL = 4

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- inputs


def _read_source(arg: str, kind: str) -> bytes:
    """A file path, or the name of a bundled scene / episode set."""
    p = Path(arg)
    if p.is_file():
        return p.read_bytes()
    if p.suffix == "" and "/" not in arg:
        bundled = resources.files("cornav.data").joinpath(kind, f"{arg}.json")
        if bundled.is_file():
            return bundled.read_bytes()
    raise FileNotFoundError(f"{kind[:-1]} not found: {arg}")


def load_scenes(args: list[str]) -> dict[str, SceneMap]:
    scenes = {}
    for a in args:
        scene = load_scene(_read_source(a, "scenes"))
        scenes[scene.name or Path(a).stem] = scene
    return scenes


def scene_for(episode: EpisodeSpec, scenes: dict[str, SceneMap]) -> SceneMap:
    if episode.scene in scenes:
        return scenes[episode.scene]
    if len(scenes) == 1 and not episode.scene:
        return next(iter(scenes.values()))
    raise SceneError(f"episode {episode.id} needs scene {episode.scene!r}, loaded: {sorted(scenes)}")


# ---------------------------------------------------------------- run


@dataclass(frozen=True)
class RunConfig:
    scenes: tuple[str, ...]
    episodes: str
    agent: str
    backend: str
    seed: int
    out: Path
    jobs: int
    agent_config: AgentConfig
    remote: RemoteBackend | None = None


def _run_one(job):
    scene, episode, cfg, lexicon = job
    if cfg.remote is not None:
        expert = build_expert(cfg.remote, lexicon, seed=cfg.seed)
    else:
        expert = build_expert(ScriptedBackend(cfg.seed), lexicon)
    runner = run_fbe_baseline if cfg.agent == "fbe" else run_episode
    try:
        return runner(scene, episode, expert, cfg.agent_config, lexicon=lexicon, seed=cfg.seed)
    finally:
        close = getattr(expert, "close", None)
        if close is not None:
            close()


def run_suite(cfg: RunConfig) -> tuple[list[bench.EpisodeResult], list[EpisodeTrace], list[str]]:
    scenes = load_scenes(list(cfg.scenes))
    episodes = load_episodes(_read_source(cfg.episodes, "episodes"))
    lexicon = load_lexicon()
    jobs = [(scene_for(e, scenes), e, cfg, lexicon) for e in episodes]
    if cfg.jobs > 1:
        pool_cls = ThreadPoolExecutor if cfg.remote is not None else ProcessPoolExecutor
        with pool_cls(max_workers=cfg.jobs) as pool:
            traces = list(pool.map(_run_one, jobs))
    else:
        traces = [_run_one(j) for j in jobs]

    oracles = {id(s): bench.GeodesicOracle(s) for s in scenes.values()}
    results, invalid = [], []
    for (scene, episode, _, _), trace in zip(jobs, traces):
        try:
            results.append(bench.score_episode(trace, scene, episode, oracles[id(scene)]))
        except bench.InvalidEpisode as exc:
            log.warning("not scored: %s", exc)
            invalid.append(episode.id)
    order = sorted(range(len(traces)), key=lambda i: traces[i].episode_id)
    return sorted(results, key=lambda r: r.id), [traces[i] for i in order], sorted(invalid)


def cmd_run(ns: argparse.Namespace) -> int:
    noise = NoiseConfig(ns.tag_fn_rate, ns.tag_distractor_rate, ns.detect_fn_rate, ns.seed)
    agent_cfg = AgentConfig(
        use_feedback=not ns.no_feedback,
        use_history=not ns.no_history,
        use_decision_expert=not ns.no_decision_expert,
        use_instruction_expert=not ns.no_instruction_expert,
        max_global_actions=ns.max_global_actions,
        max_replans=ns.max_replans,
        step_budget=ns.step_budget,
        noise=noise,
        threshold=ns.threshold,
    )
    remote = None
    if ns.backend == "remote":
        remote = RemoteBackend.from_env(
            base_url=ns.llm_base_url,
            model=ns.llm_model,
            api_key=ns.llm_api_key,
            temperature=ns.temperature,
            max_retries=ns.llm_retries,
            timeout=ns.llm_timeout,
        )
    cfg = RunConfig(tuple(ns.scene), ns.episodes, ns.agent, ns.backend, ns.seed, Path(ns.out), ns.jobs, agent_cfg, remote)
    results, traces, invalid = run_suite(cfg)

    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "traces").mkdir(exist_ok=True)
    for t in traces:
        (cfg.out / "traces" / f"{t.episode_id}.jsonl").write_text(t.to_jsonl())
    meta = {
        "agent": ns.agent,
        "backend": ns.backend,
        "seed": ns.seed,
        "episodes": ns.episodes,
        "not_scored": invalid,
        "config": {
            "use_feedback": agent_cfg.use_feedback,
            "use_history": agent_cfg.use_history,
            "use_decision_expert": agent_cfg.use_decision_expert,
            "use_instruction_expert": agent_cfg.use_instruction_expert,
            "max_global_actions": agent_cfg.max_global_actions,
            "max_replans": agent_cfg.max_replans,
            "step_budget": agent_cfg.step_budget,
            "threshold": agent_cfg.threshold,
            "noise": [noise.tag_false_negative_rate, noise.tag_distractor_rate, noise.detect_false_negative_rate],
        },
    }
    if not results:
        raise ValueError("no episode could be scored")
    (cfg.out / "results.json").write_text(bench.dumps_results(results, meta))
    (cfg.out / "results.csv").write_text(bench.to_csv(results))
    print(bench.summarize(results).table())
    return EXIT_OK


# ---------------------------------------------------------------- eval


def cmd_eval(ns: argparse.Namespace) -> int:
    path = Path(ns.results)
    if path.is_dir():
        path = path / "results.json"
    results = bench.loads_results(path.read_text())
    print(bench.summarize(results).table())
    return EXIT_OK


# ---------------------------------------------------------------- render

_COLORS = {
    "free": (255, 255, 255),
    "occupied": (40, 40, 40),
    "path": (30, 100, 230),
    "start": (20, 170, 60),
    "target": (220, 30, 30),
    "final": (250, 150, 0),
}


def trajectory(scene: SceneMap, start: Pose, low_level: str) -> list[Pose]:
    poses = [start]
    for code in low_level:
        poses.append(step(scene, poses[-1], LowLevelAction.from_short(code))[0])
    return poses


def render_image(scene: SceneMap, trace: EpisodeTrace, scale: int = PIXELS_PER_CELL) -> np.ndarray:
    """RGB raster, one ``scale`` x ``scale`` block per cell, +y pointing up."""
    h, w = scene.height, scene.width
    img = np.empty((h * scale, w * scale, 3), dtype=np.uint8)
    img[:] = _COLORS["free"]
    occ = np.kron(scene.occupied, np.ones((scale, scale), dtype=bool))
    img[occ] = _COLORS["occupied"]

    def px(x: float, y: float) -> tuple[int, int]:
        r = int(np.clip(y / scene.resolution * scale, 0, h * scale - 1))
        c = int(np.clip(x / scene.resolution * scale, 0, w * scale - 1))
        return r, c

    def dot(x: float, y: float, color, radius: int) -> None:
        r0, c0 = px(x, y)
        img[max(0, r0 - radius) : r0 + radius + 1, max(0, c0 - radius) : c0 + radius + 1] = color

    poses = trajectory(scene, trace.start, trace.low_level)
    for a, b in zip(poses, poses[1:]):
        n = max(2, int(np.hypot(b.x - a.x, b.y - a.y) / scene.resolution * scale) + 1)
        for t in np.linspace(0.0, 1.0, n):
            r, c = px(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
            img[r, c] = _COLORS["path"]
    for o in scene.objects:
        if o.category in trace.targets:
            dot(o.position.x, o.position.y, _COLORS["target"], scale)
    dot(trace.start.x, trace.start.y, _COLORS["start"], scale)
    final = trace.final_pose or poses[-1]
    dot(final.x, final.y, _COLORS["final"], scale)
    return img[::-1]  # +y up


def write_ppm(path: Path, img: np.ndarray) -> None:
    h, w, _ = img.shape
    path.write_bytes(f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img).tobytes())


def cmd_render(ns: argparse.Namespace) -> int:
    scene = load_scene(_read_source(ns.scene, "scenes"))
    trace = EpisodeTrace.from_jsonl(Path(ns.trace).read_text())
    final = replay(scene, trace.start, trace.low_level)
    if trace.final_pose is not None and final != trace.final_pose:
        log.warning("trace replay ends at %s, trace records %s", final, trace.final_pose)
    img = render_image(scene, trace, ns.scale)
    write_ppm(Path(ns.out), img)
    print(f"wrote {ns.out} ({img.shape[1]}x{img.shape[0]})")
    return EXIT_OK


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _rate(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"rate must be in [0, 1], got {text}")
    return v


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cornav", description="Grid-world navigation agent benchmark.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run episodes and write traces plus results")
    r.add_argument("--scene", action="append", required=True, help="scene file or bundled name; repeatable")
    r.add_argument("--episodes", required=True, help="episode file or bundled name")
    r.add_argument("--agent", choices=("cornav", "fbe"), default="cornav")
    r.add_argument("--backend", choices=("scripted", "remote"), default="scripted")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--jobs", type=_positive, default=1)
    r.add_argument("--no-feedback", action="store_true")
    r.add_argument("--no-history", action="store_true")
    r.add_argument("--no-decision-expert", action="store_true")
    r.add_argument("--no-instruction-expert", action="store_true")
    r.add_argument("--max-global-actions", type=_nonneg, default=20)
    r.add_argument("--max-replans", type=_nonneg, default=10)
    r.add_argument("--step-budget", type=_positive, default=300)
    r.add_argument("--threshold", type=float, default=1.5)
    r.add_argument("--tag-fn-rate", type=_rate, default=0.0)
    r.add_argument("--tag-distractor-rate", type=_rate, default=0.0)
    r.add_argument("--detect-fn-rate", type=_rate, default=0.0)
    r.add_argument("--llm-base-url")
    r.add_argument("--llm-model")
    r.add_argument("--llm-api-key")
    r.add_argument("--llm-timeout", type=float, default=30.0)
    r.add_argument("--llm-retries", type=_nonneg, default=3)
    r.add_argument("--temperature", type=float, default=0.0)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("eval", help="print metrics for a results file")
    e.add_argument("--results", required=True, help="results.json or the run output directory")
    e.set_defaults(func=cmd_eval)

    d = sub.add_parser("render", help="draw a trace onto its scene as a PPM image")
    d.add_argument("--scene", required=True)
    d.add_argument("--trace", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--scale", type=_positive, default=PIXELS_PER_CELL, help="pixels per grid cell")
    d.set_defaults(func=cmd_render)
    return p


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return ns.func(ns)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"cornav: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main(argv: list[str] | None = None) -> int:
    return dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
