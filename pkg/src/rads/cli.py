"""Command-line entry points.

Subcommands: score, select, experiment, sweep, corpusgap, validate.
Parameters resolve as: explicit flag > RADS_SEED (seed only) > JSON config
file (--config) > built-in default. Outputs are written to a temp file and
atomically renamed, so validation failures never leave partial files.

Exit codes: 0 success, 2 usage or validation error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from pathlib import Path

from . import baselines, corpusgap, harness, rlsampler
from .acquisition import UtilityParams, class_weights
from .errors import ParameterError, RadsError, ValidationError
from .harness import LearnerConfig, SyntheticDomainSpec, TransferConfig
from .rlsampler import AgentConfig, EnvConfig
from .signals import build_signals, dump_score_file, estimate_priors, load_score_file

_AGENT_DEFAULTS = AgentConfig()


def _atomic_write_text(path: str, text: str) -> None:
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fp:
            cfg = json.load(fp)
    except OSError as e:
        raise ValidationError(f"cannot read config file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ValidationError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise ValidationError(f"config file {path} must hold a JSON object")
    return cfg


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge defaults < config file < explicit flags."""
    file_cfg = _load_config_file(getattr(args, "config", None))
    merged = dict(defaults)
    for key, value in file_cfg.items():
        if key in ("source", "target"):
            merged[key] = value
        elif key in merged:
            merged[key] = value
        else:
            raise ValidationError(f"config file: unknown field {key!r}")
    for key in defaults:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            merged[key] = flag_val
    if merged.get("seed") is None:
        env_seed = os.environ.get("RADS_SEED")
        merged["seed"] = int(env_seed) if env_seed is not None else 0
    return merged


def _domain_spec(overrides: dict | None, base: SyntheticDomainSpec) -> SyntheticDomainSpec:
    if not overrides:
        return base
    fields = {f: getattr(base, f) for f in
              ("n_train", "n_dev", "n_test", "positive_rate", "mean_shift",
               "class_separation", "noise_scale", "seed")}
    for key, value in overrides.items():
        if key not in fields:
            raise ValidationError(f"config file: unknown domain field {key!r}")
        fields[key] = tuple(value) if key == "mean_shift" else value
    return SyntheticDomainSpec(**fields)


def _transfer_config(merged: dict) -> TransferConfig:
    return TransferConfig(
        learner=LearnerConfig(
            hidden_dim=merged["hidden_dim"], dropout_rate=merged["dropout_rate"],
            learning_rate=merged["learner_lr"], epochs=merged["epochs"],
            batch_size=merged["batch_size"], patience=merged["patience"]),
        passes=merged["passes"],
        utility=UtilityParams(rho=merged["rho"], clip_lo=merged["clip_lo"]),
        lam=merged["lam"],
        agent=AgentConfig(
            episodes=merged["episodes"], eps_start=merged["eps_start"],
            eps_end=merged["eps_end"], eps_decay=merged["eps_decay"],
            buffer_capacity=merged["buffer_capacity"],
            batch_size=merged["agent_batch_size"], learning_rate=merged["agent_lr"],
            gamma=merged["gamma"], target_sync_every=merged["target_sync_every"]),
        n_resamples=merged["resamples"])


_EXPERIMENT_DEFAULTS = {
    "seed": None, "passes": 10, "rho": 0.9, "clip_lo": 0.01, "lam": 0.01,
    "hidden_dim": 16, "dropout_rate": 0.3, "learner_lr": 5e-3, "epochs": 200,
    "batch_size": 8, "patience": 3,
    "episodes": _AGENT_DEFAULTS.episodes, "eps_start": _AGENT_DEFAULTS.eps_start,
    "eps_end": _AGENT_DEFAULTS.eps_end, "eps_decay": _AGENT_DEFAULTS.eps_decay,
    "buffer_capacity": _AGENT_DEFAULTS.buffer_capacity,
    "agent_batch_size": _AGENT_DEFAULTS.batch_size,
    "agent_lr": _AGENT_DEFAULTS.learning_rate, "gamma": _AGENT_DEFAULTS.gamma,
    "target_sync_every": _AGENT_DEFAULTS.target_sync_every,
    "resamples": 1000, "source": None, "target": None,
}


def _add_experiment_flags(p: argparse.ArgumentParser, with_agent: bool = True) -> None:
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--seed", type=int, help="global seed (default: RADS_SEED or 0)")
    p.add_argument("--passes", type=int, help="stochastic forward passes per sample (default 10)")
    p.add_argument("--rho", type=float, help="target positive share for class weighting (default 0.9)")
    p.add_argument("--clip-lo", dest="clip_lo", type=float,
                   help="lower clip for the estimated prior (default 0.01)")
    p.add_argument("--lam", type=float, help="redundancy penalty weight (default 0.01)")
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int,
                   help="classifier hidden units (default 16)")
    p.add_argument("--dropout-rate", dest="dropout_rate", type=float,
                   help="classifier dropout rate (default 0.3)")
    p.add_argument("--learner-lr", dest="learner_lr", type=float,
                   help="classifier Adam learning rate (default 0.005)")
    p.add_argument("--epochs", type=int, help="max classifier epochs (default 200)")
    p.add_argument("--batch-size", dest="batch_size", type=int,
                   help="classifier minibatch size (default 8)")
    p.add_argument("--patience", type=int, help="early-stopping patience in epochs (default 3)")
    p.add_argument("--resamples", type=int, help="bootstrap resamples (default 1000)")
    if with_agent:
        p.add_argument("--episodes", type=int, help="RL training episodes (default 300)")
        p.add_argument("--eps-start", dest="eps_start", type=float,
                       help="initial exploration rate (default 1.0)")
        p.add_argument("--eps-end", dest="eps_end", type=float,
                       help="exploration floor (default 0.05)")
        p.add_argument("--eps-decay", dest="eps_decay", type=float,
                       help="per-episode exploration decay (default 0.995)")
        p.add_argument("--buffer-capacity", dest="buffer_capacity", type=int,
                       help="replay buffer capacity (default 10000)")
        p.add_argument("--agent-batch-size", dest="agent_batch_size", type=int,
                       help="replay minibatch size (default 64)")
        p.add_argument("--agent-lr", dest="agent_lr", type=float,
                       help="Q-network Adam learning rate (default 0.0001)")
        p.add_argument("--gamma", type=float, help="discount factor (default 0.95)")
        p.add_argument("--target-sync-every", dest="target_sync_every", type=int,
                       help="episodes between target-network syncs (default 10)")


def _domains_from(merged: dict):
    src = _domain_spec(merged.get("source"), harness.DEFAULT_SOURCE_SPEC)
    tgt = _domain_spec(merged.get("target"), harness.DEFAULT_TARGET_SPEC)
    return harness.generate_domains(src, tgt)


def _parse_int_list(text: str, what: str) -> list[int]:
    items = [t for t in text.split(",") if t.strip()]
    if not items:
        raise ValidationError(f"{what} list is empty")
    try:
        return [int(t) for t in items]
    except ValueError as e:
        raise ValidationError(f"{what} list must hold integers, got {text!r}") from e


# ---------------------------------------------------------------------------
# Subcommands


def cmd_score(args: argparse.Namespace) -> int:
    merged = _resolve(args, _EXPERIMENT_DEFAULTS)
    domains = _domains_from(merged)
    cfg = _transfer_config(merged)
    seed = merged["seed"]
    learner = harness.train_learner(domains[0].train, domains[0].dev, cfg.learner, seed=seed)
    pool = harness.score_pool(learner, domains[1].train.features, domains[1].train.ids,
                              cfg.passes, seed=seed)
    buf = io.StringIO()
    dump_score_file(pool, buf)
    _atomic_write_text(args.out, buf.getvalue())
    print(f"wrote {pool.n_samples} samples x {pool.n_passes} passes to {args.out}")
    return 0


def cmd_select(args: argparse.Namespace) -> int:
    merged = _resolve(args, _EXPERIMENT_DEFAULTS)
    seed = merged["seed"]
    with open(args.scores, encoding="utf-8") as fp:
        pool = load_score_file(fp)
    if args.budget < 1 or args.budget > pool.n_samples:
        raise ParameterError(f"budget must lie in [1, {pool.n_samples}], got {args.budget}")
    records = build_signals(pool)
    weights = class_weights(estimate_priors(records),
                            UtilityParams(rho=merged["rho"], clip_lo=merged["clip_lo"]))
    env_cfg = EnvConfig(budget=args.budget, lam=merged["lam"], shuffle_seed=seed)
    if args.policy == "rads":
        cfg = _transfer_config(merged)
        trained = rlsampler.train(records, weights, env_cfg, cfg.agent, seed=seed)
        result = rlsampler.select(trained.net, records, weights, env_cfg)
        result.episodes_return = trained.episode_returns
    else:
        spec = baselines.BaselineSpec(kind=args.policy, budget=args.budget, seed=seed)
        result = baselines.run_baseline(spec, records, weights, merged["lam"])
    _atomic_write_text(args.out, _json_text(result.to_json_dict()))
    print(f"selected {result.budget_used}/{result.budget} -> {args.out}")
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    merged = _resolve(args, _EXPERIMENT_DEFAULTS)
    seeds = _parse_int_list(args.seeds, "seed") if args.seeds else [merged["seed"]]
    domains = _domains_from(merged)
    cfg = _transfer_config(merged)
    reports = [harness.run_transfer(domains, args.policy, args.budget, cfg, seed=s)
               for s in seeds]
    payload = {"reports": [r.to_json_dict() for r in reports],
               "mean": harness.aggregate_reports(reports)}
    _atomic_write_text(args.out, _json_text(payload))
    if args.csv:
        buf = io.StringIO()
        harness.write_reports_csv(reports, buf)
        _atomic_write_text(args.csv, buf.getvalue())
    mean = payload["mean"]
    print(f"{args.policy} budget={args.budget}: "
          f"tgt_f1={mean['tgt_f1']:.3f} src_f1={mean['src_f1']:.3f} over {len(reports)} run(s)")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    merged = _resolve(args, _EXPERIMENT_DEFAULTS)
    budgets = _parse_int_list(args.budgets, "budget")
    seeds = _parse_int_list(args.seeds, "seed") if args.seeds else [merged["seed"]]
    domains = _domains_from(merged)
    cfg = _transfer_config(merged)
    reports = harness.sweep(domains, args.policy, budgets, seeds, cfg)
    buf = io.StringIO()
    harness.write_reports_csv(reports, buf)
    _atomic_write_text(args.out_csv, buf.getvalue())
    if args.out_json:
        _atomic_write_text(args.out_json,
                           _json_text([r.to_json_dict() for r in reports]))
    print(f"wrote {len(reports)} sweep rows to {args.out_csv}")
    return 0


def _read_corpus(path: str) -> list[str]:
    p = Path(path)
    if p.is_dir():
        files = sorted(f for f in p.iterdir() if f.is_file())
        if not files:
            raise ValidationError(f"corpus directory {path} holds no files")
        return [f.read_text(encoding="utf-8") for f in files]
    docs = []
    with open(p, encoding="utf-8") as fp:
        for lineno, raw in enumerate(fp, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as e:
                raise ValidationError(f"invalid JSON ({e.msg})", line=lineno) from e
            if not isinstance(obj, dict) or "text" not in obj:
                raise ValidationError("each record needs a 'text' field", line=lineno)
            docs.append(str(obj["text"]))
    if not docs:
        raise ValidationError(f"corpus file {path} holds no documents")
    return docs


def cmd_corpusgap(args: argparse.Namespace) -> int:
    corpus_a = _read_corpus(args.corpus_a)
    corpus_b = _read_corpus(args.corpus_b)
    report = corpusgap.gap_report(corpus_a, corpus_b, epsilon=args.epsilon, top_k=args.top_k)
    _atomic_write_text(args.out, _json_text(report))
    print(f"jaccard={report['jaccard']:.4f} "
          f"coverage_ab={report['coverage_ab']:.4f} coverage_ba={report['coverage_ba']:.4f}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    with open(args.scores, encoding="utf-8") as fp:
        pool = load_score_file(fp)
    print(f"OK: {pool.n_samples} samples, {pool.n_passes} passes, "
          f"{pool.n_classes} classes")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rads",
        description="Budgeted active sampling for transfer learning over "
                    "MC-dropout score files.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="train the source classifier on a synthetic "
                                     "scenario and write the target pool score file")
    _add_experiment_flags(p, with_agent=False)
    p.add_argument("--out", required=True, help="output JSON-lines score file")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("select", help="run a selection policy over a score file")
    _add_experiment_flags(p)
    p.add_argument("--scores", required=True, help="input JSON-lines score file")
    p.add_argument("--policy", required=True, choices=("rads",) + baselines.BASELINE_KINDS)
    p.add_argument("--budget", type=int, required=True, help="selection budget (>= 1)")
    p.add_argument("--out", required=True, help="output selection JSON")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("experiment", help="run one transfer experiment end to end")
    _add_experiment_flags(p)
    p.add_argument("--policy", required=True, choices=harness.POLICIES)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--seeds", help="comma-separated seeds for repeated runs")
    p.add_argument("--out", required=True, help="output report JSON")
    p.add_argument("--csv", help="optional CSV of per-run rows")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("sweep", help="budget sweep over seeds")
    _add_experiment_flags(p)
    p.add_argument("--policy", required=True, choices=harness.POLICIES)
    p.add_argument("--budgets", required=True, help="comma-separated ascending budgets")
    p.add_argument("--seeds", help="comma-separated seeds")
    p.add_argument("--out-csv", dest="out_csv", required=True)
    p.add_argument("--out-json", dest="out_json")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("corpusgap", help="lexical gap report between two corpora")
    p.add_argument("--corpus-a", dest="corpus_a", required=True,
                   help="directory of text files or JSON-lines with id/text")
    p.add_argument("--corpus-b", dest="corpus_b", required=True)
    p.add_argument("--epsilon", type=float, default=corpusgap.DEFAULT_EPSILON,
                   help="KL smoothing constant (default 1e-9)")
    p.add_argument("--top-k", dest="top_k", type=int, default=10,
                   help="terms in each TF-IDF profile (default 10)")
    p.add_argument("--out", required=True, help="output report JSON")
    p.set_defaults(func=cmd_corpusgap)

    p = sub.add_parser("validate", help="validate a score file")
    p.add_argument("scores", help="JSON-lines score file")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ParameterError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except RadsError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
