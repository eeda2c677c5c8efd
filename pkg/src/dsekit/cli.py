"""Command-line pipeline: synthesize suites, run portfolios, train, infer, report.

Five subcommands cover the whole workflow. `synth` writes a benchmark suite,
`run` executes the ten-explorer portfolio over it and labels every benchmark,
`train` fits the two-stage selector on the train split, `infer` recommends an
explorer per held-out benchmark and re-executes the pick with a fresh seed,
and `report` turns the data files into three CSV tables. Exit codes follow
the usual convention: 0 success, 1 runtime failure, 2 usage error. Every
command is deterministic: identical flags and inputs give byte-identical
outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .benchmarks import Family, extract_features
from .dataset import (
    INSTANCES_FILE,
    RUNS_FILE,
    DatasetConfig,
    dataset_fingerprint,
    instance_master_seed,
    load,
    persist_instances,
    persist_results,
    read_instances,
    reconstruct_front,
    run_suite,
    synth_suite,
    write_jsonl,
)
from .explorers import Budget, ExplorerId, explore, portfolio_seed
from .hashing import fnv1a64_hex, mix64
from .pareto import adrs, pareto_filter
from .selector import PpoAgent, load_selector, pretrain_supervised, recommend, save_selector, train_rl
from .surrogate import SurrogateModel, exhaustive_front

CHECKPOINT_FILE = "checkpoint.txt"
SUPERVISED_CURVE_FILE = "supervised_loss.csv"
RL_CURVE_FILE = "rl_reward.csv"
REPORT_FILE = "report.jsonl"
ADRS_MATRIX_FILE = "adrs_matrix.csv"
ACCURACY_FILE = "accuracy.csv"
RUNTIME_FILE = "runtime.csv"

EXPLORER_NAMES = tuple(e.name.lower() for e in ExplorerId)
N_EXPLORERS = len(ExplorerId)

# Matches the scoring stage: spaces at most this large get the true front as
# the ADRS reference, larger ones the non-dominated union of stored fronts.
_EXHAUSTIVE_LIMIT = 4096

# Salt so the re-execution seed in `infer` never collides with the seed the
# same (benchmark, explorer) cell used during `run`.
_FRESH_RUN_TAG = 0x1F3B


@dataclass(frozen=True)
class ReportRow:
    """One held-out benchmark: the full ADRS row, the pick, and its regret."""

    benchmark_id: str
    adrs_row: tuple[float, ...]
    selected: ExplorerId
    selected_adrs: float
    fresh_adrs: float
    best: ExplorerId
    regret: float

    def __post_init__(self) -> None:
        if len(self.adrs_row) != N_EXPLORERS:
            raise ValueError(f"adrs_row needs {N_EXPLORERS} entries, got {len(self.adrs_row)}")
        best_adrs = min(self.adrs_row)
        if self.selected_adrs != self.adrs_row[self.selected.value]:
            raise ValueError("selected_adrs disagrees with the selected column")
        if self.adrs_row[self.best.value] != best_adrs:
            raise ValueError("best explorer is not a row minimizer")
        if self.regret != self.selected_adrs - best_adrs or self.regret < 0.0:
            raise ValueError("regret must equal selected_adrs - best row ADRS (>= 0)")

    def to_record(self) -> dict:
        return {
            "benchmark_id": self.benchmark_id,
            "adrs_row": list(self.adrs_row),
            "selected_code": self.selected.value,
            "selected_name": self.selected.name.lower(),
            "selected_adrs": self.selected_adrs,
            "fresh_adrs": self.fresh_adrs,
            "best_code": self.best.value,
            "best_name": self.best.name.lower(),
            "regret": self.regret,
        }


# -- flag parsing --------------------------------------------------------------------


def _families_arg(text: str) -> tuple[Family, ...]:
    names = [token.strip() for token in text.split(",") if token.strip()]
    if not names:
        raise argparse.ArgumentTypeError("no families given")
    families = []
    for name in names:
        try:
            families.append(Family[name.upper()])
        except KeyError:
            raise argparse.ArgumentTypeError(f"unknown family {name!r}") from None
    if len(set(families)) != len(families):
        raise argparse.ArgumentTypeError("duplicate family names")
    return tuple(families)


def _seeds_arg(text: str) -> tuple[int, ...]:
    seeds: list[int] = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        lo, sep, hi = token.partition("..")
        try:
            if sep:
                start, stop = int(lo), int(hi)
                if start > stop:
                    raise ValueError
                seeds.extend(range(start, stop + 1))
            else:
                seeds.append(int(token))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad seed token {token!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds given")
    if any(s < 0 for s in seeds):
        raise argparse.ArgumentTypeError("seeds must be non-negative")
    if len(set(seeds)) != len(seeds):
        raise argparse.ArgumentTypeError("duplicate seeds")
    return tuple(seeds)


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _fraction_arg(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {value}")
    return value


# -- output helpers ------------------------------------------------------------------


def _fmt(value: float) -> str:
    return format(float(value), ".6g")


def _write_csv(path: Path, header: tuple[str, ...], rows: list[tuple[str, ...]]) -> None:
    text = ",".join(header) + "\n" + "".join(",".join(row) + "\n" for row in rows)
    path.write_text(text, encoding="utf-8")


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        raise FileNotFoundError(f"input file missing: {path}")
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]


# -- commands ------------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    config = DatasetConfig(families=args.families, seeds=args.seeds, size_class=args.size)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    instances = synth_suite(config)
    feature_map = {
        inst.id: tuple(float(v) for v in extract_features(inst)) for inst in instances
    }
    digest = persist_instances(out, instances, config.size_class, feature_map)
    print(f"wrote {len(instances)} instances to {out / INSTANCES_FILE} (hash {digest})")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    dataset = Path(args.dataset)
    instances_path = dataset / INSTANCES_FILE
    instances, feature_map, records = read_instances(instances_path)
    if not records:
        raise ValueError(f"no instances in {instances_path}")
    families: list[str] = []
    for record in records:
        if record["family"] not in families:
            families.append(record["family"])
    seeds = tuple(sorted({int(record["seed"]) for record in records}))
    portfolios = run_suite(instances, args.budget, args.master_seed, args.workers)
    ds = persist_results(
        dataset,
        instances,
        portfolios,
        feature_map,
        instances_hash=fnv1a64_hex(instances_path.read_bytes()),
        master_seed=args.master_seed,
        budget=args.budget,
        size_class=records[0]["size_class"],
        families=tuple(families),
        seeds=seeds,
        split_fraction=args.split_fraction,
    )
    print(
        f"ran {N_EXPLORERS} explorers on {len(instances)} benchmarks "
        f"(budget {args.budget}); split {len(ds.manifest.train_ids)} train / "
        f"{len(ds.manifest.inference_ids)} inference"
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    ds = load(args.dataset)
    features, labels, scores = ds.matrices("train")
    head, supervised_curve = pretrain_supervised(features, labels, seed=args.seed)
    agent = PpoAgent.init(head, seed=args.seed)
    agent, reward_curve = train_rl(agent, features, scores, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / CHECKPOINT_FILE).open("w", encoding="utf-8") as fh:
        save_selector(
            fh, head, agent, fingerprint=dataset_fingerprint(ds.manifest), seed=args.seed
        )
    _write_csv(
        out / SUPERVISED_CURVE_FILE,
        ("epoch", "loss"),
        [(str(i), _fmt(v)) for i, v in enumerate(supervised_curve)],
    )
    _write_csv(
        out / RL_CURVE_FILE,
        ("epoch", "mean_reward"),
        [(str(i), _fmt(v)) for i, v in enumerate(reward_curve)],
    )
    print(
        f"trained on {len(labels)} benchmarks: supervised loss "
        f"{supervised_curve[0]:.4f} -> {supervised_curve[-1]:.4f}, "
        f"mean reward {reward_curve[0]:.4f} -> {reward_curve[-1]:.4f}; "
        f"checkpoint in {out}"
    )
    return 0


def cmd_infer(args: argparse.Namespace) -> int:
    ds = load(args.dataset)
    checkpoint = Path(args.checkpoints)
    if checkpoint.is_dir():
        checkpoint = checkpoint / CHECKPOINT_FILE
    if not checkpoint.exists():
        raise FileNotFoundError(f"checkpoint missing: {checkpoint}")
    with checkpoint.open("r", encoding="utf-8") as fh:
        head, agent, settings = load_selector(fh)
    fingerprint = dataset_fingerprint(ds.manifest)
    if settings.get("fingerprint") != fingerprint:
        raise ValueError(
            "checkpoint was trained on a different dataset "
            f"(checkpoint fingerprint {settings.get('fingerprint')}, dataset {fingerprint})"
        )

    fronts_by_id: dict[str, list] = {}
    for record in _read_jsonl(Path(args.dataset) / RUNS_FILE):
        fronts_by_id.setdefault(record["benchmark_id"], []).append(reconstruct_front(record))
    samples = {s.benchmark_id: s for s in ds.samples}
    instances = {inst.id: inst for inst in ds.instances}

    rows: list[ReportRow] = []
    for benchmark_id in ds.manifest.inference_ids:
        sample = samples[benchmark_id]
        instance = instances[benchmark_id]
        choice, _ = recommend(head, agent, np.array(sample.features))
        adrs_row = sample.adrs_row
        best = ExplorerId(min(range(N_EXPLORERS), key=lambda k: (adrs_row[k], k)))

        model = SurrogateModel.from_instance(instance)
        fresh_seed = portfolio_seed(
            mix64(instance_master_seed(ds.manifest.master_seed, instance), _FRESH_RUN_TAG),
            choice,
        )
        fresh = explore(choice, instance, model, Budget(args.budget), fresh_seed)
        if instance.schema.space_size() <= _EXHAUSTIVE_LIMIT:
            reference = exhaustive_front(model, instance.schema, _EXHAUSTIVE_LIMIT)
        else:
            reference = pareto_filter(
                [p for front in fronts_by_id[benchmark_id] for p in front.points]
            )
        rows.append(
            ReportRow(
                benchmark_id=benchmark_id,
                adrs_row=adrs_row,
                selected=choice,
                selected_adrs=adrs_row[choice.value],
                fresh_adrs=adrs(reference, fresh.front),
                best=best,
                regret=adrs_row[choice.value] - adrs_row[best.value],
            )
        )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(out / REPORT_FILE, (row.to_record() for row in rows))

    matrix = np.array([row.adrs_row for row in rows])
    mean_selected = float(np.mean([row.selected_adrs for row in rows]))
    best_fixed = int(np.argmin(matrix.mean(axis=0)))
    print(
        f"recommended on {len(rows)} held-out benchmarks: mean selected ADRS "
        f"{mean_selected:.6f} vs best fixed explorer {EXPLORER_NAMES[best_fixed]} "
        f"{float(matrix.mean(axis=0)[best_fixed]):.6f}; report in {out / REPORT_FILE}"
    )
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    labels_rows = _read_jsonl(Path(args.labels))
    runs_rows = _read_jsonl(Path(args.runs))
    report_rows = _read_jsonl(Path(args.report))
    if not labels_rows or not report_rows:
        raise ValueError("labels and report files must be non-empty")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    matrix_rows = [
        (
            record["benchmark_id"],
            *(_fmt(v) for v in record["adrs_row"]),
            EXPLORER_NAMES[int(record["label_code"])],
        )
        for record in labels_rows
    ]
    _write_csv(out / ADRS_MATRIX_FILE, ("benchmark_id", *EXPLORER_NAMES, "best"), matrix_rows)

    known = {record["benchmark_id"] for record in labels_rows}
    counts: dict[str, list[int]] = {"overall": [0, 0]}
    for record in report_rows:
        benchmark_id = record["benchmark_id"]
        if benchmark_id not in known:
            raise ValueError(f"report references unknown benchmark {benchmark_id}")
        correct = int(float(record["regret"]) == 0.0)
        for scope in ("overall", benchmark_id.split("-")[0]):
            counts.setdefault(scope, [0, 0])
            counts[scope][0] += correct
            counts[scope][1] += 1
    accuracy_rows = [
        (scope, str(c), str(t), _fmt(c / t))
        for scope, (c, t) in sorted(counts.items(), key=lambda kv: (kv[0] != "overall", kv[0]))
    ]
    _write_csv(out / ACCURACY_FILE, ("scope", "correct", "total", "accuracy"), accuracy_rows)

    totals = [0.0] * N_EXPLORERS
    for record in runs_rows:
        totals[int(record["explorer_code"])] += float(record["wall_seconds"])
    _write_csv(
        out / RUNTIME_FILE,
        ("explorer", "total_wall_seconds"),
        [(name, _fmt(t)) for name, t in zip(EXPLORER_NAMES, totals)],
    )
    print(f"wrote {ADRS_MATRIX_FILE}, {ACCURACY_FILE}, {RUNTIME_FILE} to {out}")
    return 0


# -- wiring --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dsekit",
        description="Design-space exploration portfolio with a learned per-benchmark selector.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str, func) -> argparse.ArgumentParser:
        p = sub.add_parser(
            name,
            help=help_text,
            description=help_text,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )
        p.set_defaults(func=func)
        return p

    p = add("synth", "Synthesize a benchmark suite into instances.jsonl.", cmd_synth)
    p.add_argument(
        "--families",
        type=_families_arg,
        default="smooth,rugged,deceptive,plateau,clustered",
        metavar="LIST",
        help="comma-separated family names",
    )
    p.add_argument(
        "--seeds",
        type=_seeds_arg,
        default="0..5",
        metavar="LIST",
        help="comma-separated seeds; a..b spans are inclusive",
    )
    p.add_argument(
        "--size",
        choices=("small", "medium", "large"),
        default="medium",
        help="design-space size class",
    )
    p.add_argument("--out", required=True, metavar="DIR", help="dataset directory to create")

    p = add("run", "Run the ten-explorer portfolio and label every benchmark.", cmd_run)
    p.add_argument("--dataset", required=True, metavar="DIR", help="directory with instances.jsonl")
    p.add_argument("--budget", type=_positive_int, default=500, help="evaluations per explorer")
    p.add_argument("--master-seed", type=int, default=0, help="seed all run seeds derive from")
    p.add_argument("--workers", type=_positive_int, default=1, help="parallel worker processes")
    p.add_argument(
        "--split-fraction",
        type=_fraction_arg,
        default=0.69,
        help="fraction of benchmarks assigned to the train split",
    )

    p = add("train", "Train the supervised head and the PPO refinement.", cmd_train)
    p.add_argument("--dataset", required=True, metavar="DIR", help="directory with a complete dataset")
    p.add_argument("--seed", type=int, default=0, help="training seed")
    p.add_argument("--out", required=True, metavar="DIR", help="directory for checkpoint and curves")

    p = add("infer", "Recommend an explorer per held-out benchmark and re-run the pick.", cmd_infer)
    p.add_argument("--dataset", required=True, metavar="DIR", help="directory with a complete dataset")
    p.add_argument(
        "--checkpoints",
        required=True,
        metavar="PATH",
        help="checkpoint file or the train output directory",
    )
    p.add_argument("--budget", type=_positive_int, default=500, help="evaluations for the re-run")
    p.add_argument("--out", required=True, metavar="DIR", help="directory for report.jsonl")

    p = add("report", "Summarize data files into three CSV tables.", cmd_report)
    p.add_argument("--runs", required=True, metavar="FILE", help="runs.jsonl path")
    p.add_argument("--labels", required=True, metavar="FILE", help="labels.jsonl path")
    p.add_argument("--report", required=True, metavar="FILE", help="report.jsonl path from infer")
    p.add_argument("--out", required=True, metavar="DIR", help="directory for the CSV tables")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the usage message
        return int(exc.code or 0)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()


__all__ = [
    "ACCURACY_FILE",
    "ADRS_MATRIX_FILE",
    "CHECKPOINT_FILE",
    "EXPLORER_NAMES",
    "REPORT_FILE",
    "RL_CURVE_FILE",
    "RUNTIME_FILE",
    "SUPERVISED_CURVE_FILE",
    "ReportRow",
    "build_parser",
    "cmd_infer",
    "cmd_report",
    "cmd_run",
    "cmd_synth",
    "cmd_train",
    "entry",
    "main",
]
