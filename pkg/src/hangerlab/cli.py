"""``hangerlab`` command line.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__, bayes, persistence
from .core import EpisodeType, InvalidArgument, Outcome, SimConfig

log = logging.getLogger("hangerlab")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def _counts(text: str) -> tuple[int, int]:
    try:
        s, n = (int(v) for v in text.split("/"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected s/N, got {text!r}") from None
    return s, n


def _sim_config(args) -> SimConfig:
    if args.sim_config is None:
        return SimConfig()
    return SimConfig.from_dict(persistence.read_json(args.sim_config))


def _snapshot(path: Path, args, cfg: SimConfig, extra: dict | None = None) -> None:
    """Resolved configuration next to an output, enough to rerun the command."""
    data = {
        "hangerlab_version": __version__,
        "command": args.command,
        "args": {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())
                 if k not in ("func",)},
        "sim_config": cfg.to_dict(),
    }
    if extra:
        data.update(extra)
    persistence.write_json(path, data)


def _sidecar(out: Path) -> Path:
    return out.with_name(out.name + ".config.json")


# --------------------------------------------------------------- commands


def cmd_collect(args) -> int:
    from .expert import DatasetSpec, build_dataset

    cfg = _sim_config(args)
    if args.preset:
        spec = DatasetSpec.preset(args.preset, noise=args.noise)
    else:
        if not args.counts:
            raise UsageError("collect needs --preset or --counts")
        pairs = []
        for item in args.counts.split(","):
            kind, n = item.split("=")
            pairs.append((EpisodeType(kind.strip()), int(n)))
        spec = DatasetSpec(tuple(pairs), noise=args.noise, seed=args.seed, name="custom")
    out = Path(args.out)
    if out.exists() and not args.overwrite:
        raise FileExistsError(f"{out} exists; pass --overwrite to replace it")
    ds = build_dataset(cfg, spec)
    manifest = persistence.save_dataset(out, ds, encoding=args.encoding, overwrite=args.overwrite)
    _snapshot(out / "resolved_config.json", args, cfg)
    print(json.dumps({"out": str(out), "counts": ds.counts_by_type(), "total": len(ds),
                      "manifest_sha256": persistence.manifest_hash(out)}))
    log.info("wrote %s", manifest)
    return EXIT_OK


def cmd_train(args) -> int:
    from .learner.diffusion import DiffusionPolicy, PolicyConfig, TrainingSet, train

    out = Path(args.out)
    if args.resume:
        policy = persistence.load_checkpoint(args.resume)
        cfg = policy.sim
        if policy.instrumented != args.instrumented:
            raise InvalidArgument("--instrumented disagrees with the resumed checkpoint")
    else:
        cfg = _sim_config(args)
        pc = PolicyConfig.for_sim(cfg, args.instrumented, train_steps=args.steps, seed=args.seed, lr=args.lr,
                                  batch_size=args.batch_size, widths=tuple(args.widths),
                                  diffusion_steps=args.diffusion_steps)
        policy = DiffusionPolicy.create(pc, cfg, tag=args.tag)
    ds = persistence.load_dataset(args.dataset)
    data = TrainingSet.from_episodes(ds.episodes, cfg, policy.instrumented)
    log.info("training on %d frames from %d episodes, input length %d", len(data), len(ds), policy.config.obs_dim)
    t0 = time.perf_counter()
    window: list[float] = []

    def on_step(pol, loss):
        window.append(loss)
        if args.log_every and pol.step % args.log_every == 0:
            log.info("step %d loss %.5f (%.0fs)", pol.step, sum(window) / len(window), time.perf_counter() - t0)
            window.clear()
        if args.checkpoint_every and pol.step % args.checkpoint_every == 0 and pol.step < pol.config.train_steps:
            persistence.save_checkpoint(out.with_name(f"{out.stem}.step{pol.step}{out.suffix}"), pol)

    train(policy, data, callback=on_step)
    persistence.save_checkpoint(out, policy)
    _snapshot(_sidecar(out), args, cfg, {"policy_config": policy.config.to_dict(), "dataset_manifest_sha256":
                                         persistence.manifest_hash(args.dataset)})
    print(json.dumps({"out": str(out), "steps": policy.step, "obs_length": policy.config.obs_dim,
                      "instrumented": policy.instrumented}))
    return EXIT_OK


def _load_policy(spec: str, cfg: SimConfig, noise: float):
    from .expert import ExpertPolicy

    if spec == "scripted":
        return ExpertPolicy(cfg, noise=noise), cfg
    policy = persistence.load_checkpoint(spec)
    return policy, policy.sim


def cmd_eval(args) -> int:
    from .harness import RolloutConfig, evaluate

    policy, cfg = _load_policy(args.checkpoint, _sim_config(args), args.expert_noise)
    rc = RolloutConfig(n_rollouts=args.n, seed_base=args.seed_base)
    tag = args.tag or Path(args.checkpoint).stem
    record = evaluate(policy, cfg, rollout_config=rc, tag=tag, keep_episodes=False)
    out = Path(args.out)
    persistence.save_eval_record(out, record)
    traces = persistence.traces_to_dict(record)
    persistence.write_json(args.traces or out.with_name(out.stem + ".traces.json"), traces)
    if args.svg:
        persistence.atomic_write(args.svg, persistence.traces_svg(traces))
    _snapshot(_sidecar(out), args, cfg)
    print(json.dumps({"tag": record.tag, "N": record.N, "s": record.s,
                      "failures": {k: v for k, v in record.failure_counts.items() if v}}))
    return EXIT_OK


def cmd_enhance(args) -> int:
    from .harness import enhance_dataset, init_from_rollout

    policy, cfg = _load_policy(args.expert, _sim_config(args), args.expert_noise)
    if not policy.instrumented:
        raise InvalidArgument("the enhancement expert checkpoint must be instrumented")
    base = persistence.load_dataset(args.base)
    expert_record = persistence.load_eval_record(args.expert_record)
    student = persistence.load_eval_record(args.student_record)
    inits = [init_from_rollout(r) for r in student.rollouts if Outcome.from_str(r["outcome"]).is_failure]
    out = Path(args.out)
    if out.exists() and not args.overwrite:
        raise FileExistsError(f"{out} exists; pass --overwrite to replace it")
    ds = enhance_dataset(base, policy, expert_record, inits, cfg)
    persistence.save_dataset(out, ds, overwrite=args.overwrite)
    _snapshot(out / "resolved_config.json", args, cfg)
    print(json.dumps(ds.manifest["counts"]))
    return EXIT_OK


def cmd_compare(args) -> int:
    def counts(rec_path, pair, label):
        if rec_path:
            r = persistence.load_eval_record(rec_path)
            return r, r.s, r.N
        if pair:
            return None, pair[0], pair[1]
        raise UsageError(f"compare needs --{label} or --counts-{label}")

    ra, sa, na = counts(args.a, args.counts_a, "a")
    rb, sb, nb = counts(args.b, args.counts_b, "b")
    report = bayes.compare(sa, na, sb, nb, n_samples=args.n_samples, seed=args.seed, mass=args.mass)
    records = [r for r in (ra, rb) if r is not None]
    if records:
        report["failure_table"] = bayes.failure_table(records)
    if args.out:
        persistence.write_json(args.out, report)
    print(json.dumps(report, indent=2, sort_keys=True))
    if records:
        print(bayes.format_failure_table(report["failure_table"]))
    return EXIT_OK


def cmd_export_traces(args) -> int:
    record = persistence.load_eval_record(args.record)
    traces = persistence.traces_to_dict(record)
    persistence.write_json(args.out, traces)
    if args.svg:
        persistence.atomic_write(args.svg, persistence.traces_svg(traces))
    print(json.dumps({"traces": len(traces["traces"]),
                      "successes": sum(t["success"] for t in traces["traces"])}))
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hangerlab", description="Instrumented hanger-insertion imitation-learning testbed.")
    p.add_argument("--version", action="version", version=f"hangerlab {__version__}")
    p.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    p.add_argument("--sim-config", type=Path, help="JSON file with SimConfig overrides")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("collect", help="generate a scripted demonstration dataset")
    c.add_argument("--preset", choices=["train180", "train100", "train50"])
    c.add_argument("--counts", help="custom composition such as I=5,II=3")
    c.add_argument("--seed", type=int, default=0, help="seed base for --counts")
    c.add_argument("--noise", type=float, default=1.0, help="demonstrator jitter multiplier")
    c.add_argument("--encoding", choices=persistence.ENCODINGS, default="base64")
    c.add_argument("--out", required=True, type=Path)
    c.add_argument("--overwrite", action="store_true")
    c.set_defaults(func=cmd_collect)

    t = sub.add_parser("train", help="train a diffusion policy")
    t.add_argument("--dataset", required=True, type=Path)
    t.add_argument("--instrumented", required=True, type=_bool)
    t.add_argument("--out", required=True, type=Path)
    t.add_argument("--steps", type=int, default=20_000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--lr", type=float, default=3e-4)
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--widths", type=int, nargs="+", default=[512, 512])
    t.add_argument("--diffusion-steps", type=int, default=50)
    t.add_argument("--tag", default="")
    t.add_argument("--log-every", type=int, default=500)
    t.add_argument("--checkpoint-every", type=int, default=5000)
    t.add_argument("--resume", type=Path)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on Type-I rollouts")
    e.add_argument("--checkpoint", required=True, help="checkpoint path, or 'scripted' for the demonstrator")
    e.add_argument("--n", type=int, default=30)
    e.add_argument("--seed-base", type=int, default=9_000_000)
    e.add_argument("--tag", default="")
    e.add_argument("--expert-noise", type=float, default=1.0)
    e.add_argument("--out", required=True, type=Path)
    e.add_argument("--traces", type=Path)
    e.add_argument("--svg", type=Path)
    e.set_defaults(func=cmd_eval)

    n = sub.add_parser("enhance", help="expert-to-student dataset enhancement")
    n.add_argument("--base", required=True, type=Path)
    n.add_argument("--expert", required=True, help="instrumented checkpoint, or 'scripted'")
    n.add_argument("--expert-noise", type=float, default=1.0)
    n.add_argument("--expert-record", required=True, type=Path)
    n.add_argument("--student-record", required=True, type=Path)
    n.add_argument("--out", required=True, type=Path)
    n.add_argument("--overwrite", action="store_true")
    n.set_defaults(func=cmd_enhance)

    m = sub.add_parser("compare", help="Bayesian comparison of two success counts")
    m.add_argument("--a", type=Path, help="eval record A")
    m.add_argument("--b", type=Path, help="eval record B")
    m.add_argument("--counts-a", type=_counts, help="s/N for A")
    m.add_argument("--counts-b", type=_counts, help="s/N for B")
    m.add_argument("--n-samples", type=int, default=1_000_000)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--mass", type=float, default=0.95)
    m.add_argument("--out", type=Path)
    m.set_defaults(func=cmd_compare)

    x = sub.add_parser("export-traces", help="collar traces of an eval record")
    x.add_argument("--record", required=True, type=Path)
    x.add_argument("--out", required=True, type=Path)
    x.add_argument("--svg", type=Path)
    x.set_defaults(func=cmd_export_traces)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, InvalidArgument, FileExistsError) as exc:
        print(f"hangerlab {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        log.debug("failure", exc_info=True)
        print(f"hangerlab {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
