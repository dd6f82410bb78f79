"""Acceptance criteria 1-9, each timed, each printing one PASS/FAIL line."""

import math
import random
import time

import numpy as np
import pytest

from cornav import bench
from cornav.actions import MoveToDirection, MoveToObject, MoveToRoom, Plan, Stop, parse_action, parse_plan, serialize
from cornav.agent import STOPPED, AgentConfig, run_episode, run_fbe_baseline
from cornav.experts import ChatClient, ChatMessage, ChatTimeout, ChatTransportError, RemoteBackend, RemoteExpert, ScriptedExpert
from cornav.feedback import compose_refined_plan, evaluate_action
from cornav.geometry import DIRECTIONS, CameraIntrinsics, Pose, WorldPoint, pixel_to_world, world_to_pixel
from cornav.local_policy.fmm import fmm_arrival
from cornav.perception import NoiseConfig

from conftest import bundled_episodes, dijkstra8, u_obstacle
from mockchat import MockChat, planner_responder, sequence


@pytest.fixture
def report(capsys):
    def emit(n, ok, elapsed, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} ({elapsed:.2f}s) {detail}")
        assert ok, detail

    return emit


WORDS = ["mug", "living room", "soft drink", "kitchen", "tv", "coffee table", "plant", "bed"]
FILLER = ["Okay,", "I think", "we should", "next", "then", "because the scene shows a door.", "Finally", "\n", "so"]


def _random_action(rng):
    k = rng.randrange(4)
    if k == 0:
        return MoveToObject(rng.choice(WORDS))
    if k == 1:
        return MoveToRoom(rng.choice(WORDS))
    if k == 2:
        return MoveToDirection(rng.choice(DIRECTIONS))
    return Stop()


def test_criterion_1_grammar_round_trip(report):
    rng = random.Random(1)
    t0 = time.perf_counter()
    bad = sum(parse_action(serialize(a)) != a for a in (_random_action(rng) for _ in range(10_000)))
    for _ in range(1_000):
        acts = [_random_action(rng) for _ in range(rng.randint(1, 6))]
        if Stop() in acts:
            acts = acts[: acts.index(Stop()) + 1]
        text = " ".join(f"{rng.choice(FILLER)} {serialize(a)} {rng.choice(FILLER)}" for a in acts)
        bad += parse_plan(text).actions != tuple(acts)
    elapsed = time.perf_counter() - t0
    report(1, bad == 0 and elapsed < 5.0, elapsed, f"mismatches={bad}")


def test_criterion_2_fmm_vs_oracle(report):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    violations = 0
    for _ in range(200):
        free = rng.random((100, 100)) >= rng.uniform(0.0, 0.35)
        goal = tuple(int(v) for v in rng.integers(0, 100, 2))
        free[goal] = True
        t = fmm_arrival(free, [goal])
        d = dijkstra8(free, [goal])
        rr, cc = np.indices(free.shape)
        eu = np.hypot(rr - goal[0], cc - goal[1])
        fin = np.isfinite(t)
        violations += int(np.count_nonzero(fin != np.isfinite(d)))
        violations += int(np.count_nonzero(t[fin] < eu[fin] - 1e-9))
        violations += int(np.count_nonzero(t[fin] > d[fin] + 1e-9))
    free = u_obstacle()
    t_u = fmm_arrival(free, [(50, 80)])[50, 20]
    d_u = dijkstra8(free, [(50, 80)])[50, 20]
    gap = abs(t_u - d_u) / d_u
    elapsed = time.perf_counter() - t0
    report(2, violations == 0 and gap <= 0.08 and elapsed < 60, elapsed, f"violations={violations} detour_gap={gap:.4f}")


def test_criterion_3_projection_round_trip(report):
    rng = random.Random(3)
    intr = CameraIntrinsics()
    t0 = time.perf_counter()
    worst, n = 0.0, 0
    while n < 1000:
        pose = Pose(rng.uniform(0, 20), rng.uniform(0, 20), rng.uniform(0, 360))
        p = WorldPoint(pose.x + rng.uniform(-9, 9), pose.y + rng.uniform(-9, 9))
        proj = world_to_pixel(p, pose, intr)
        if proj is None:
            continue
        view, u, r = proj
        q = pixel_to_world(u, r, pose, view, intr)
        worst = max(worst, math.hypot(q.x - p.x, q.y - p.y))
        n += 1
    elapsed = time.perf_counter() - t0
    report(3, worst <= 0.05 and elapsed < 1.0, elapsed, f"max_error={worst:.2e}m")


class _Outcome:
    def __init__(self, grounded=None, traveled=0.0):
        self.final_pose = Pose(0, 0, 0)
        self.grounded = grounded
        self.traveled = traveled
        self.requested_distance = 1.5


def test_criterion_4_feedback_machinery(report):
    t0 = time.perf_counter()
    messages = [
        evaluate_action(MoveToObject("chair"), _Outcome(WorldPoint(0.8, 0)), 1.5).message,
        evaluate_action(MoveToObject("chair"), _Outcome(WorldPoint(3.0, 0)), 1.5).message,
        evaluate_action(MoveToDirection("left"), _Outcome(traveled=1.5)).message,
        evaluate_action(MoveToDirection("left"), _Outcome(traveled=0.3)).message,
    ]
    expected = [
        "successfully move to chair",
        "move to chair failed",
        "successfully turn to direction left",
        "turn to direction left failed",
    ]
    rng = random.Random(4)
    broken = 0
    for _ in range(1000):
        orig = Plan(tuple(MoveToObject(rng.choice(WORDS)) for _ in range(rng.randint(0, 8))))
        acts = [_random_action(rng) for _ in range(rng.randint(0, 4))]
        if Stop() in acts:
            acts = acts[: acts.index(Stop()) + 1]
        tail = Plan(tuple(acts))
        i = rng.randint(0, len(orig))
        out = compose_refined_plan(orig, i, i, tail)
        broken += out.actions[:i] != orig.actions[:i] or out.actions[i:] != tail.actions
    elapsed = time.perf_counter() - t0
    report(4, messages == expected and broken == 0, elapsed, f"templates_ok={messages == expected} splice_failures={broken}")


def test_criterion_5_metrics(report):
    t0 = time.perf_counter()
    ok = True
    for d, s, x in ((1.2, True, 0.0), (1.5, True, 0.0), (2.0, False, 0.5)):
        got = bench.success_and_dts(d)
        ok &= got[0] is s and abs(got[1] - x) <= 1e-9
    m = bench.summarize([
        bench.EpisodeResult("a", "ObjectNav", True, 10.0, 5.0, 1.0, 0.0),
        bench.EpisodeResult("b", "ObjectNav", False, 3.0, 4.0, 2.0, 0.5),
    ])
    ok &= abs(m.sr - 0.5) <= 1e-9 and abs(m.spl - 0.25) <= 1e-9 and abs(m.dts - 0.25) <= 1e-9
    rng = random.Random(5)
    viol = 0
    for _ in range(1000):
        rs = [
            bench.EpisodeResult(str(i), "Simple", rng.random() < 0.5, rng.uniform(0, 30), rng.uniform(0.1, 30), 0.0, 0.0)
            for i in range(rng.randint(1, 30))
        ]
        s = bench.summarize(rs)
        viol += s.spl > s.sr + 1e-12
    elapsed = time.perf_counter() - t0
    report(5, ok and viol == 0, elapsed, f"hand_cases_ok={ok} spl_gt_sr={viol}")


def _suite(scenes, lexicon, episodes, config, seed, runner=run_episode):
    traces = [runner(scenes[ep.scene], ep, ScriptedExpert(lexicon), config, seed=seed) for ep in episodes]
    return traces


def test_criterion_6_scripted_suite(report, scenes, lexicon):
    episodes = bundled_episodes("solvable")
    oracles = {k: bench.GeodesicOracle(v) for k, v in scenes.items()}
    t0 = time.perf_counter()
    traces = _suite(scenes, lexicon, episodes, AgentConfig(), seed=0)
    elapsed = time.perf_counter() - t0
    again = _suite(scenes, lexicon, episodes, AgentConfig(), seed=0)
    results = [bench.score_episode(t, scenes[e.scene], e, oracles[e.scene]) for t, e in zip(traces, episodes)]
    sr = bench.summarize(results).sr
    max_steps = max(t.total_steps for t in traces)
    identical = all(a.to_jsonl() == b.to_jsonl() for a, b in zip(traces, again))
    ok = len(episodes) == 10 and sr == 1.0 and max_steps <= 300 and elapsed < 10.0 and identical
    report(6, ok, elapsed, f"SR={sr:.2f} max_steps={max_steps} identical={identical}")


def test_criterion_7_ablation_direction(report, scenes, lexicon):
    episodes = bundled_episodes("noisy")
    oracles = {k: bench.GeodesicOracle(v) for k, v in scenes.items()}
    configs = {
        "full": dict(),
        "no_feedback": dict(use_feedback=False),
        "baseline": dict(use_feedback=False, use_history=False, use_decision_expert=False),
    }
    t0 = time.perf_counter()
    wins_fb = wins_all = 0
    rows = []
    for seed in range(5):
        noise = NoiseConfig(detect_false_negative_rate=0.3, seed=seed)
        sr = {}
        for name, kw in configs.items():
            traces = _suite(scenes, lexicon, episodes, AgentConfig(noise=noise, **kw), seed=seed)
            rs = [bench.score_episode(t, scenes[e.scene], e, oracles[e.scene]) for t, e in zip(traces, episodes)]
            sr[name] = bench.summarize(rs).sr
        wins_fb += sr["full"] >= sr["no_feedback"]
        wins_all += sr["full"] >= sr["baseline"]
        rows.append(f"s{seed}:{sr['full']:.2f}/{sr['no_feedback']:.2f}/{sr['baseline']:.2f}")
    elapsed = time.perf_counter() - t0
    ok = len(episodes) == 30 and wins_fb >= 4 and wins_all >= 4 and elapsed < 120
    report(7, ok, elapsed, f"full/no_fb/base {' '.join(rows)}")


def test_criterion_8_fbe(report, scenes, lexicon):
    t0 = time.perf_counter()
    (side,) = bundled_episodes("fbe_side_room")
    (unsat,) = bundled_episodes("unsatisfiable")
    tr = run_fbe_baseline(scenes[side.scene], side, ScriptedExpert(lexicon))
    r = bench.score_episode(tr, scenes[side.scene], side)
    tu = run_fbe_baseline(scenes[unsat.scene], unsat, ScriptedExpert(lexicon))
    cats = set(unsat.target_categories)
    absent = not any(o.category in cats for o in scenes[unsat.scene].objects)
    elapsed = time.perf_counter() - t0
    ok = r.success and tr.frontier_visits >= 1 and absent and tu.termination in (STOPPED, "BudgetExhausted")
    report(8, ok, elapsed, f"side_room success={r.success} frontiers={tr.frontier_visits}; unsat={tu.termination} ({tu.detail})")


def test_criterion_9_remote_conformance(report, scenes, lexicon):
    t0 = time.perf_counter()
    ep = next(e for e in bundled_episodes("solvable") if e.id == "home-on-01")
    scene = scenes[ep.scene]
    with MockChat(planner_responder(ep.instruction)) as srv:
        expert = RemoteExpert(RemoteBackend(srv.base_url, "mock", max_retries=0), lexicon, strict=True)
        trace = run_episode(scene, ep, expert, AgentConfig())
        expert.close()
        calls = len(srv.requests)
    result = bench.score_episode(trace, scene, ep)
    episode_ok = trace.termination == STOPPED and result.success and expert.fallbacks == 0 and calls == expert.calls > 0

    sleeps = []
    with MockChat(sequence((500, b"e", 0), (500, b"e", 0), "stop()")) as srv:
        with ChatClient(RemoteBackend(srv.base_url, "m", max_retries=3, backoff_base=0.25), sleep=sleeps.append) as c:
            retry_ok = c.complete([ChatMessage("user", "x")]) == "stop()" and c.requests == 3 and sleeps == [0.25, 0.5]
    with MockChat(sequence((200, "stop()", 0.4))) as srv:
        with ChatClient(RemoteBackend(srv.base_url, "m", max_retries=2, timeout=0.1), sleep=lambda s: None) as c:
            try:
                c.complete([ChatMessage("user", "x")])
                timeout_ok = False
            except ChatTimeout:
                timeout_ok = c.requests == 3
    with MockChat(sequence((400, b"bad", 0))) as srv:
        with ChatClient(RemoteBackend(srv.base_url, "m", max_retries=3), sleep=lambda s: None) as c:
            try:
                c.complete([ChatMessage("user", "x")])
                client_err_ok = False
            except ChatTransportError:
                client_err_ok = c.requests == 1
    elapsed = time.perf_counter() - t0
    ok = episode_ok and retry_ok and timeout_ok and client_err_ok
    report(9, ok, elapsed, f"episode={trace.termination} requests={calls} retry={retry_ok} timeout={timeout_ok} 4xx={client_err_ok}")
