"""Command-line tool: single runs, exhaustive model checks, trace replay.

Exit codes: 0 all checks pass, 1 a property failed, 2 usage or input error,
3 model check inconclusive (budget exhausted).
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional, Tuple

from . import adversary as adv
from .engine import (
    DEFAULT_OPTIONS,
    all_detected_or_max,
    first_detection,
    initial_state,
    max_rounds,
    run_until,
)
from .protocols import make_protocol, required_agents
from .ring import (
    ConfigError,
    PROTOCOL_COMM,
    PROTOCOLS,
    RingConfig,
    colocated_placement,
    spread_placement,
)
from .trace import (
    TraceHeader,
    TraceIntegrityError,
    TraceParseError,
    read_trace,
    validate_events,
    write_trace,
)
from .verifier import (
    build_timeline,
    initial_timeline_info,
    parse_checks,
    timeline_from_run,
)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_INCONCLUSIVE = 3

DEFAULT_AGENTS = {"pbl-coloc": 3, "wb-coloc": 3, "pbl-scat": 4, "wb-scat": 3}


def default_placement(protocol: str, n: int, bh: int) -> Tuple[Tuple[int, int], ...]:
    if protocol in ("f2f", "pbl-coloc", "wb-coloc"):
        k = required_agents(n) if protocol == "f2f" else DEFAULT_AGENTS[protocol]
        node = 0 if bh != 0 else 1
        return colocated_placement(k, node)
    return spread_placement(n, DEFAULT_AGENTS[protocol], bh)


def parse_placement(spec: str) -> Tuple[Tuple[int, int], ...]:
    nodes = [int(tok) for tok in spec.split(",") if tok != ""]
    return tuple((i + 1, node) for i, node in enumerate(nodes))


def build_config(args) -> RingConfig:
    bh = args.bh if args.bh is not None else args.n // 2
    if args.placement:
        placement = parse_placement(args.placement)
    else:
        placement = default_placement(args.protocol, args.n, bh)
    return RingConfig(n=args.n, bh_index=bh, placement=placement, protocol=args.protocol)


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--protocol", required=True, choices=PROTOCOLS)
    p.add_argument("--n", type=int, required=True, help="ring size (>= 4)")
    p.add_argument("--bh", type=int, default=None, help="black hole node (default n//2)")
    p.add_argument(
        "--placement",
        default=None,
        help="comma-separated start nodes for agents 1..k, e.g. 0,0,5"
        " (default: co-located at 0, or maximally spread)",
    )
    p.add_argument(
        "--mutation",
        default=None,
        help="deliberate protocol bug for falsifiability testing"
        " (f2f: skip-wait1; wb-scat: drop-visited)",
    )


def cmd_run(args) -> int:
    config = build_config(args)
    protocol = make_protocol(config, mutation=args.mutation)
    strategy = adv.parse_adversary(args.adversary, seed=args.seed)
    checks = parse_checks(args.check, protocol) if args.check else []

    if args.stop == "first-detection":
        stop = first_detection(args.max_rounds)
    elif args.stop == "all-detected":
        stop = all_detected_or_max(args.max_rounds)
    else:
        stop = max_rounds(args.max_rounds)

    state = initial_state(config, protocol)
    final, events = run_until(state, config, protocol, strategy, stop)

    if args.trace_out:
        header = TraceHeader(
            n=config.n,
            bh=config.bh_index,
            protocol=config.protocol,
            comm=config.comm_model.value,
            placement=config.placement,
            adversary=args.adversary,
            seed=args.seed,
            rounds=final.round,
        )
        write_trace(args.trace_out, header, events)

    tl = timeline_from_run(config, protocol, events, final.round)
    verdicts = [c.check(tl) for c in checks]

    if not args.quiet:
        survivors = len(final.live_agents())
        print(f"rounds={final.round} survivors={survivors}")
        if tl.deaths:
            print(f"first_destruction={tl.deaths[0][0]}")
        first_claim = tl.first_true_claim_round()
        if tl.claims:
            rnd, agent, node = tl.claims[0]
            print(f"first_claim=round {rnd} agent {agent} node {node}")
        if tl.deaths and first_claim is not None:
            print(f"empirical_latency={first_claim - tl.deaths[0][0]}")
        for v in verdicts:
            print(v)
    return EXIT_PASS if all(v.ok for v in verdicts) else EXIT_FAIL


def cmd_modelcheck(args) -> int:
    config = build_config(args)
    protocol = make_protocol(config, mutation=args.mutation)
    horizon = args.horizon_iterations * protocol.period
    verdict = adv.explore_all(
        config,
        protocol,
        horizon=horizon,
        budget=args.budget,
    )
    if not args.quiet:
        print(f"modelcheck={verdict.status}")
        stats = " ".join(f"{k}={v}" for k, v in sorted(verdict.stats.items()))
        print(f"stats: {stats}")
    if verdict.status == "PASS":
        return EXIT_PASS
    if verdict.status == "INCONCLUSIVE":
        return EXIT_INCONCLUSIVE
    print(f"violation at round {verdict.violation_round}: {verdict.violation}")
    if args.cex_out:
        with open(args.cex_out, "w") as fh:
            fh.write(verdict.schedule.dump())
        print(f"counterexample written to {args.cex_out}")
        print(f"replay with: ringbh run --protocol {config.protocol} --n {config.n}"
              f" --bh {config.bh_index} --adversary script:{args.cex_out}")
    return EXIT_FAIL


def cmd_replay(args) -> int:
    try:
        header, events = read_trace(args.trace)
    except TraceParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        validate_events(header, events)
    except TraceIntegrityError as exc:
        print(f"integrity: FAIL ({exc})")
        return EXIT_FAIL
    try:
        config = RingConfig(
            n=header.n,
            bh_index=header.bh,
            placement=header.placement,
            protocol=header.protocol,
        )
    except ConfigError as exc:
        print(f"bad header config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    protocol = make_protocol(config, mutation=args.mutation)
    rounds = header.rounds
    if rounds is None:
        rounds = max((ev.round for ev in events), default=-1) + 1
    machines, regions = initial_timeline_info(config, protocol)
    tl = build_timeline(
        config.n,
        config.bh_index,
        config.placement,
        machines,
        events,
        rounds,
        initial_regions=regions,
    )
    checks = parse_checks(args.check, protocol) if args.check else []
    verdicts = [c.check(tl) for c in checks]
    if not args.quiet:
        print("integrity: PASS")
        for v in verdicts:
            print(v)
    return EXIT_PASS if all(v.ok for v in verdicts) else EXIT_FAIL


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ringbh",
        description="Simulate and model-check perpetual ring exploration"
        " against an adversarial byzantine black hole.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one simulation")
    _add_config_flags(p_run)
    p_run.add_argument("--adversary", default="never", help="never | always[:destroy]"
                       " | kill-nth-visit:N[:destroy] | kill-agent:ID[:destroy]"
                       " | script:<path> | random:pa,pd")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--max-rounds", type=int, default=None)
    p_run.add_argument("--stop", choices=["max-rounds", "first-detection", "all-detected"],
                       default="max-rounds")
    p_run.add_argument("--check", default="", help="comma list: survival,true-detection,"
                       "coverage[:W],latency:B,periodicity[:P],shrinkage")
    p_run.add_argument("--trace-out", default=None)
    p_run.add_argument("--quiet", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_mc = sub.add_parser("modelcheck", help="exhaustive adversary search")
    _add_config_flags(p_mc)
    p_mc.add_argument("--horizon-iterations", type=int, default=6,
                      help="search depth in protocol periods (default 6)")
    p_mc.add_argument("--budget", type=int, default=5_000_000,
                      help="max explored round-steps before INCONCLUSIVE")
    p_mc.add_argument("--cex-out", default="counterexample.script")
    p_mc.add_argument("--quiet", action="store_true")
    p_mc.set_defaults(func=cmd_modelcheck)

    p_rp = sub.add_parser("replay", help="re-validate and re-check a trace file")
    p_rp.add_argument("trace")
    p_rp.add_argument("--check", default="", help="same syntax as run --check")
    p_rp.add_argument("--mutation", default=None)
    p_rp.add_argument("--quiet", action="store_true")
    p_rp.set_defaults(func=cmd_replay)

    args = parser.parse_args(argv)
    if getattr(args, "max_rounds", None) is None and args.command == "run":
        protocol_period = {"f2f": 2 * args.n + 4, "pbl-coloc": 4 * args.n + 1,
                           "wb-coloc": 4 * args.n + 1, "pbl-scat": 3 * args.n + 2,
                           "wb-scat": 4 * args.n + 1}[args.protocol]
        args.max_rounds = 10 * protocol_period
    if getattr(args, "max_rounds", None) is not None and args.max_rounds < 1:
        parser.error("--max-rounds must be >= 1")
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
