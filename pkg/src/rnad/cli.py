"""Command-line entry points: solve-nfg, train, eval, play, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import nfg
from .approximator import ConvApproximator, TabularApproximator
from .efg import kuhn_poker
from .envs import EfgEnv, StrategoEnv, stratego_value_input, tabular_efg_policy
from .harness import MetricsWriter, evaluate, run_training
from .learner import Learner, LearnerConfig, desk_preset, load_config, paper_preset
from .postprocess import TestTimeConfig
from .service import MatchServer, TcpMatchServer, serve_lines, snapshot_from_checkpoint


def cmd_solve_nfg(args) -> int:
    game = nfg.load_game(args.game)
    config = nfg.RNaDConfig(
        eta=args.eta,
        outer_iterations=args.iterations,
        integrator_step=args.step,
        fixed_point_tolerance=args.tolerance,
    )
    n1, n2 = game.actions_p1, game.actions_p2
    reg = nfg.JointPolicy(
        _skewed(n1) if args.skewed_start else np.full(n1, 1.0 / n1),
        _skewed(n2) if args.skewed_start else np.full(n2, 1.0 / n2),
    )
    trace_lines = []
    for iteration in range(config.outer_iterations):
        result = nfg.integrate_replicator(game, reg, reg, config, record_trajectory=True)
        fp = result.policy
        h0 = nfg.lyapunov(fp, result.trajectory[0][1])
        expl = nfg.exploitability(game, fp)
        print(
            f"iteration {iteration}: p1={np.round(fp.p1, 4).tolist()} "
            f"p2={np.round(fp.p2, 4).tolist()} "
            f"log10_H_start={np.log10(max(h0, 1e-300)):.2f} "
            f"tau={result.tau:.1f} exploitability={expl:.6f}"
        )
        if args.trace:
            for tau, pi in result.trajectory:
                trace_lines.append(
                    json.dumps(
                        {
                            "iteration": iteration,
                            "tau": tau,
                            "p1": pi.p1.tolist(),
                            "p2": pi.p2.tolist(),
                            "lyapunov": nfg.lyapunov(fp, pi),
                        }
                    )
                )
        reg = fp
    if args.trace:
        Path(args.trace).write_text("\n".join(trace_lines) + "\n")
    return 0


def _skewed(n: int) -> np.ndarray:
    p = np.array([0.999] + [0.001 / (n - 1)] * (n - 1))
    return p / p.sum()


def _build_learner(cfg: LearnerConfig, env_name: str) -> tuple[Learner, object]:
    if env_name == "stratego":
        env = StrategoEnv()
        approx = ConvApproximator(value_input_fn=stratego_value_input)
    elif env_name == "kuhn":
        env = EfgEnv(kuhn_poker())
        approx = TabularApproximator(env.num_actions)
    else:
        raise ValueError(f"unknown environment {env_name!r}")
    return Learner(approx, cfg), env


def cmd_train(args) -> int:
    if args.config:
        cfg, _ = load_config(args.config)
    elif args.preset == "paper":
        cfg = paper_preset()
    else:
        cfg = desk_preset() if args.env == "stratego" else kuhn_desk_preset()
    if args.steps is not None:
        from dataclasses import replace

        cfg = replace(cfg, total_steps=args.steps)
    learner, env = _build_learner(cfg, args.env)
    stream = open(args.metrics, "w") if args.metrics else sys.stderr
    metrics = MetricsWriter(stream=stream)
    try:
        if cfg.total_steps > 0:
            run_training(
                env,
                learner,
                metrics,
                num_actor_threads=args.actors,
                seed=args.seed,
            )
    finally:
        learner.save(args.out)
        if args.metrics:
            stream.close()
    print(f"checkpoint written to {args.out}")
    return 0


def kuhn_desk_preset() -> LearnerConfig:
    """Settings that solve three-card one-bet poker on a laptop.

    Tabular per-state parameters need long inner phases (the replicator flow
    integrates roughly lr/mean-length per step), batch-averaged gradients
    with a large adam_eps (faithful gradient flow instead of per-entry sign
    steps), a short-horizon target average (long averaging delays the
    evaluated policy and the rotational dynamics spiral outward), and a
    relaxed logit bound so near-pure equilibrium states keep headroom.
    """
    return LearnerConfig(
        eta=0.2,
        delta_m=32_000,
        learning_rate=0.08,
        lr_decay_per_iteration=0.85,
        adam_eps=1.0,
        neurd_beta=4.0,
        batch_size=32,
        t_max=8,
        total_steps=96_000,
        chunk_length=8,
        gamma_averaging=0.01,
    )


def _test_time_from_args(args) -> TestTimeConfig:
    return TestTimeConfig(
        use_threshold=not args.no_threshold,
        use_discretize=not args.no_discretize,
        use_eagerness=not args.no_eagerness,
        use_threat_filter=not args.no_threat_filter,
        use_memory=not args.no_memory,
        use_value_bounds=not args.no_value_bounds,
    )


def cmd_eval(args) -> int:
    if args.games == 0:
        print(json.dumps({"games": 0, "wins": 0, "draws": 0, "losses": 0}))
        return 0
    snapshot = snapshot_from_checkpoint(args.checkpoint)
    report = evaluate(
        snapshot,
        args.opponent,
        games=args.games,
        seed=args.seed,
        test_time=_test_time_from_args(args),
    )
    print(json.dumps(report.to_dict()))
    return 0


def cmd_play(args) -> int:
    snapshot = snapshot_from_checkpoint(args.checkpoint)
    server = MatchServer(snapshot, _test_time_from_args(args), seed=args.seed)
    out = sys.stdout

    def read_line():
        return sys.stdin.readline()

    def write_line(text: str):
        out.write(text + "\n")
        out.flush()

    if not args.raw:
        write_line(json.dumps({"type": "banner", "text": "send {\"type\": \"hello\", \"side\": ...} to begin"}))
    serve_lines(server, read_line, write_line)
    return 0


def cmd_serve(args) -> int:
    snapshot = snapshot_from_checkpoint(args.checkpoint)
    match_server = MatchServer(snapshot, _test_time_from_args(args), seed=args.seed)
    host, _, port = args.listen.rpartition(":")
    server = TcpMatchServer((host or "127.0.0.1", int(port)), match_server)
    print(f"serving on {args.listen}", flush=True)
    if args.ws_listen:
        import threading

        import uvicorn

        from .service import create_ws_app

        ws_host, _, ws_port = args.ws_listen.rpartition(":")
        tcp_thread = threading.Thread(target=server.serve_forever, daemon=True)
        tcp_thread.start()
        print(f"websocket on {args.ws_listen}", flush=True)
        uvicorn.run(
            create_ws_app(match_server),
            host=ws_host or "127.0.0.1",
            port=int(ws_port),
            log_level="warning",
        )
        return 0
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def _add_test_time_flags(parser: argparse.ArgumentParser) -> None:
    for name in ("threshold", "discretize", "eagerness", "threat-filter", "memory", "value-bounds"):
        parser.add_argument(
            f"--no-{name}", action="store_true", dest=f"no_{name.replace('-', '_')}"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rnad",
        description="Regularized Nash dynamics: solvers, self-play training, Stratego matches.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-nfg", help="exact solver on a matrix game")
    p.add_argument("--game", required=True, help="named game or matrix file")
    p.add_argument("--eta", type=float, default=0.2)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--tolerance", type=float, default=1e-8)
    p.add_argument("--trace", default=None, help="write the inner trajectories here")
    p.add_argument(
        "--skewed-start",
        action="store_true",
        default=True,
        help="start from the near-deterministic policy (default)",
    )
    p.add_argument("--uniform-start", dest="skewed_start", action="store_false")
    p.set_defaults(func=cmd_solve_nfg)

    p = sub.add_parser("train", help="run the self-play learner")
    p.add_argument("--config", default=None)
    p.add_argument("--preset", choices=("desk", "paper"), default="desk")
    p.add_argument("--env", choices=("stratego", "kuhn"), default="stratego")
    p.add_argument("--steps", type=int, default=None, help="override total_steps")
    p.add_argument("--out", default="checkpoint.pkl")
    p.add_argument("--metrics", default=None, help="JSONL metrics file")
    p.add_argument("--actors", type=int, default=0, help="actor threads (0 = in-line)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="play a checkpoint against a baseline")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--opponent", choices=("random", "greedy", "self"), default="random")
    p.add_argument("--games", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    _add_test_time_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("play", help="text-mode match over stdin/stdout")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--side", choices=("red", "blue"), default="red")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--raw", action="store_true", help="suppress the banner line")
    _add_test_time_flags(p)
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("serve", help="TCP match service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--listen", default="127.0.0.1:7771")
    p.add_argument("--ws-listen", default=None,
                   help="also serve the browser WebSocket bridge here")
    p.add_argument("--seed", type=int, default=0)
    _add_test_time_flags(p)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
