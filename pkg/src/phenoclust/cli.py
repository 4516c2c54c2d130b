"""Command-line front end.

Exit status: 0 on success, 1 on usage errors, 2 on data errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import DEFAULT_K_MAX, DEFAULT_MIN_SIZE, ClusteringResult, FeatureMatrix, cluster_dataset
from .core import FeatureSetKind, Partition
from .errors import KOutOfRange, MismatchedElements, PhenoclustError
from .evaluation import (
    DEFAULT_ALPHA,
    DEFAULT_REPLICATES,
    AssignmentPolicy,
    compare_partitions,
    observations_to_partition,
    rediscovery_report,
    select_feature_set,
)
from .goldstandard import gold_standard_report, read_gold_standard
from .ingest import format_meals, read_meals
from .synth import SynthSpec, generate_dataset
from .viz import ch_curve_svg, heatmap_dendrogram_svg, parallel_coordinates_svg

SEED_ENV = "PHENOCLUST_SEED"
DEFAULT_OUT = "phenoclust_out"
DEFAULT_FEATURE_SET = FeatureSetKind.BG_WITH_GRAMS


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    inputs: dict = field(default_factory=dict)
    feature_sets: list = field(default_factory=list)
    k: int | None = None
    k_max: int = DEFAULT_K_MAX
    min_cluster_size: int = DEFAULT_MIN_SIZE
    replicates: int = DEFAULT_REPLICATES
    alpha: float = DEFAULT_ALPHA
    seed: int = 0
    assignment_policy: str = AssignmentPolicy.MOST_SPECIFIC.value
    exclude_unmatched: bool = False
    output_dir: str = DEFAULT_OUT

    def to_json(self) -> dict:
        data = asdict(self)
        data["k"] = "auto" if self.k is None else self.k
        return data


# ---------------------------------------------------------------- output helpers


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return x
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text, encoding="utf-8")
    print(path)
    return path


# ---------------------------------------------------------------- shared pieces


def _config(args, **overrides) -> RunConfig:
    cfg = RunConfig(
        command=args.command,
        k=getattr(args, "k", None),
        k_max=getattr(args, "k_max", DEFAULT_K_MAX),
        min_cluster_size=getattr(args, "min_cluster_size", DEFAULT_MIN_SIZE),
        replicates=getattr(args, "replicates", DEFAULT_REPLICATES),
        alpha=getattr(args, "alpha", DEFAULT_ALPHA),
        seed=args.seed,
        assignment_policy=getattr(args, "assignment_policy", AssignmentPolicy.MOST_SPECIFIC.value),
        exclude_unmatched=getattr(args, "exclude_unmatched", False),
        output_dir=args.out,
    )
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


def _clustering_json(result: ClusteringResult, meal_ids) -> dict:
    return {
        "feature_set": result.kind.value,
        "feature_names": list(result.raw.feature_names),
        "k": result.k,
        "surviving_clusters": result.filtered.n_clusters,
        "meal_ids": list(meal_ids),
        "labels": result.partition.to_json(),
        "filtered_labels": result.filtered.to_json(),
    }


def _means_json(result: ClusteringResult) -> list:
    return result.means.to_json() if result.filtered.n_clusters else []


def _cluster_svgs(result: ClusteringResult, participant: str) -> dict[str, str]:
    svgs = {
        "heatmap.svg": heatmap_dendrogram_svg(
            result.scaled, result.tree, result.k, title=f"{participant}: {result.kind.label}"
        )
    }
    if result.ch is not None and len(result.ch.ks) >= 2:
        svgs["ch_curve.svg"] = ch_curve_svg(result.ch, title=f"{participant}: CH criterion")
    if result.filtered.n_clusters:
        means = result.means
        table = FeatureMatrix(means.feature_names, means.means)
        if "bg_change" in means.feature_names:
            color = table.column("bg_change")
        else:
            color = np.arange(len(means.labels), dtype=float)
        svgs["cluster_means.svg"] = parallel_coordinates_svg(
            table, color, title=f"{participant}: cluster means"
        )
    return svgs


def _compare_payload(dataset, gs, clustering: ClusteringResult, cfg: RunConfig, reference=None) -> dict:
    """ARI, alignment and rediscovery for one clustering.

    With a *reference* partition (for example planted synthetic labels) the
    headline ARI is taken against it; the gold-standard ARI is kept alongside.
    """
    report = gold_standard_report(gs, dataset)
    policy = AssignmentPolicy(cfg.assignment_policy)
    observed = observations_to_partition(gs, dataset, policy, report.observations)
    ari = compare_partitions(
        clustering.filtered, observed, cfg.exclude_unmatched, cfg.replicates, cfg.alpha, cfg.seed
    )
    payload = {
        "clustering": _clustering_json(clustering, [m.meal_id for m in dataset.meals]),
        "cluster_means": _means_json(clustering),
        "ari": ari.to_json(),
        "ari_target": "gold_standard",
        "assignment_policy": policy.value,
        "gold_standard_partition": observed.to_json(),
    }
    if reference is not None:
        payload["gold_standard_ari"] = payload["ari"]
        payload["ari"] = compare_partitions(
            clustering.filtered, reference, cfg.exclude_unmatched, cfg.replicates, cfg.alpha, cfg.seed
        ).to_json()
        payload["ari_target"] = "reference"
    other = next(p for p in AssignmentPolicy if p is not policy)
    alt = observations_to_partition(gs, dataset, other, report.observations)
    if alt != observed:
        payload["alternate_policy"] = {
            "assignment_policy": other.value,
            "ari": compare_partitions(
                clustering.filtered, alt, cfg.exclude_unmatched, cfg.replicates, cfg.alpha, cfg.seed
            ).to_json(),
        }
    if clustering.filtered.n_clusters:
        payload["rediscovery"] = rediscovery_report(clustering.filtered, gs, dataset, report.observations).to_json()
    else:
        payload["rediscovery"] = None
    return payload


def _load(args):
    dataset, ingest_report = read_meals(args.meals)
    return dataset, ingest_report


# ---------------------------------------------------------------- commands


def cmd_ingest(args) -> int:
    dataset, report = _load(args)
    sys.stdout.write(dumps({"config": _config(args, inputs={"meals": args.meals}).to_json(), **report.to_json()}))
    return 0


def cmd_cluster(args) -> int:
    if args.k is not None and args.k < 1:
        raise KOutOfRange(f"k must be at least 1, got {args.k}")
    dataset, _ = _load(args)
    kind = FeatureSetKind(args.feature_set)
    cfg = _config(args, inputs={"meals": args.meals}, feature_sets=[kind.value])
    result = cluster_dataset(dataset, kind, k=args.k, k_max=args.k_max, min_size=args.min_cluster_size)
    out = Path(args.out)
    header = {"config": cfg.to_json()}
    _write(out, "partition.json", dumps({**header, **_clustering_json(result, [m.meal_id for m in dataset.meals])}))
    _write(out, "cluster_means.json", dumps({**header, "cluster_means": _means_json(result)}))
    _write(out, "ch_curve.json", dumps({**header, "ch_curve": result.ch.to_json() if result.ch else None}))
    for name, svg in _cluster_svgs(result, dataset.participant_id).items():
        _write(out, name, svg)
    return 0


def cmd_evaluate_gs(args) -> int:
    dataset, _ = _load(args)
    gs = read_gold_standard(args.gold_standard, dataset.participant_id)
    cfg = _config(args, inputs={"meals": args.meals, "gold_standard": args.gold_standard})
    report = gold_standard_report(gs, dataset, overfit_max=args.overfit_max)
    _write(Path(args.out), "gold_standard.json", dumps({"config": cfg.to_json(), **report.to_json()}))
    return 0


def _read_partition(path, dataset) -> Partition:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    labels = data.get("filtered_labels", data.get("labels"))
    if labels is None:
        raise PhenoclustError(f"{path} has no labels")
    ids = data.get("meal_ids")
    if ids is not None and list(ids) != [m.meal_id for m in dataset.meals]:
        raise MismatchedElements(f"{path} lists different meals than the dataset")
    p = Partition.from_json(labels)
    if len(p) != len(dataset):
        raise MismatchedElements("partition file does not match the dataset size")
    return p


def cmd_compare(args) -> int:
    dataset, _ = _load(args)
    gs = read_gold_standard(args.gold_standard, dataset.participant_id)
    kind = FeatureSetKind(args.feature_set)
    inputs = {"meals": args.meals, "gold_standard": args.gold_standard}
    if args.reference:
        inputs["reference"] = args.reference
    cfg = _config(args, inputs=inputs, feature_sets=[kind.value])
    reference = _read_partition(args.reference, dataset) if args.reference else None
    clustering = cluster_dataset(dataset, kind, k=args.k, k_max=args.k_max, min_size=args.min_cluster_size)
    payload = _compare_payload(dataset, gs, clustering, cfg, reference)
    _write(Path(args.out), "compare.json", dumps({"config": cfg.to_json(), **payload}))
    return 0


def _feature_select(dataset, gs, cfg: RunConfig):
    return select_feature_set(
        dataset,
        gs,
        AssignmentPolicy(cfg.assignment_policy),
        k_max=cfg.k_max,
        min_size=cfg.min_cluster_size,
        replicates=cfg.replicates,
        alpha=cfg.alpha,
        seed=cfg.seed,
        exclude_unmatched=cfg.exclude_unmatched,
    )


def cmd_feature_select(args) -> int:
    dataset, _ = _load(args)
    gs = read_gold_standard(args.gold_standard, dataset.participant_id)
    cfg = _config(
        args,
        inputs={"meals": args.meals, "gold_standard": args.gold_standard},
        feature_sets=[k.value for k in FeatureSetKind],
    )
    ranked = _feature_select(dataset, gs, cfg)
    for row in ranked:
        cell = row.ari.formatted() if row.ari else f"failed ({row.error})"
        sys.stderr.write(f"{'*' if row.best else ' '} {row.kind.value:<22} {cell}\n")
    _write(Path(args.out), "feature_select.json", dumps({"config": cfg.to_json(), "ranking": [r.to_json() for r in ranked]}))
    return 0


def cmd_plot(args) -> int:
    dataset, _ = _load(args)
    kind = FeatureSetKind(args.feature_set)
    cfg = _config(args, inputs={"meals": args.meals, "clusters": args.clusters}, feature_sets=[kind.value])
    result = cluster_dataset(dataset, kind, k=args.k, k_max=args.k_max, min_size=args.min_cluster_size)
    if args.clusters:
        with open(args.clusters, encoding="utf-8") as fh:
            k = int(json.load(fh).get("k", result.k))
        filtered = _read_partition(args.clusters, dataset)
        result = ClusteringResult(
            result.kind, result.raw, result.scaled, result.tree, k, result.ch,
            result.partition, filtered, result.config,
        )
    out = Path(args.out)
    bg = dataset.column("bg_change")
    _write(
        out,
        "parallel_meals.svg",
        parallel_coordinates_svg(result.raw, bg, title=f"{dataset.participant_id}: meals"),
    )
    for name, svg in _cluster_svgs(result, dataset.participant_id).items():
        _write(out, name, svg)
    _write(out, "plot_config.json", dumps({"config": cfg.to_json()}))
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec.load(args.spec)
    dataset, planted, gs = generate_dataset(spec)
    out = Path(args.out)
    cfg = _config(args, inputs={"spec": args.spec})
    _write(out, "meals.csv", format_meals(dataset))
    _write(
        out,
        "planted_partition.json",
        dumps(
            {
                "config": cfg.to_json(),
                "spec": spec.to_json(),
                "meal_ids": [m.meal_id for m in dataset.meals],
                "labels": planted.to_json(),
            }
        ),
    )
    _write(out, "planted_gs.txt", gs.to_text())
    return 0


def cmd_report(args) -> int:
    dataset, ingest_report = _load(args)
    gs = read_gold_standard(args.gold_standard, dataset.participant_id)
    cfg = _config(
        args,
        inputs={"meals": args.meals, "gold_standard": args.gold_standard},
        feature_sets=[k.value for k in FeatureSetKind],
    )
    gs_report = gold_standard_report(gs, dataset)
    ranked = _feature_select(dataset, gs, cfg)
    if args.feature_set:
        chosen = FeatureSetKind(args.feature_set)
    else:
        best = [r for r in ranked if r.best]
        chosen = best[0].kind if best else DEFAULT_FEATURE_SET
    clustering = cluster_dataset(dataset, chosen, k=args.k, k_max=args.k_max, min_size=args.min_cluster_size)
    bundle = {
        "config": cfg.to_json(),
        "version": __version__,
        "ingest": ingest_report.to_json(),
        "gold_standard": gs_report.to_json(),
        "feature_selection": [r.to_json() for r in ranked],
        "chosen_feature_set": chosen.value,
        "ch_curve": clustering.ch.to_json() if clustering.ch else None,
        **_compare_payload(dataset, gs, clustering, cfg),
    }
    _write(Path(args.out), "report.json", dumps(bundle))
    return 0


# ---------------------------------------------------------------- parser


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _alpha(text):
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return value


def _replicates(text):
    value = int(text)
    if value < 100:
        raise argparse.ArgumentTypeError(f"need at least 100 replicates, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phenoclust", description="Behavioral-clinical phenotype discovery.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    common = _Parser(add_help=False)
    common.add_argument("--out", default=DEFAULT_OUT, help="output directory (default: %(default)s)")
    common.add_argument("--seed", type=int, default=None, help=f"random seed (overrides ${SEED_ENV})")

    clustering = _Parser(add_help=False)
    group = clustering.add_mutually_exclusive_group()
    group.add_argument("--k", type=int, default=None, help="fixed number of clusters")
    group.add_argument("--auto-k", dest="k", action="store_const", const=None, help="pick k by CH (default)")
    clustering.add_argument("--k-max", type=_positive_int, default=DEFAULT_K_MAX)
    clustering.add_argument("--min-cluster-size", type=_positive_int, default=DEFAULT_MIN_SIZE)

    feature = _Parser(add_help=False)
    feature.add_argument(
        "--feature-set",
        choices=[k.value for k in FeatureSetKind],
        default=DEFAULT_FEATURE_SET.value,
    )

    comparing = _Parser(add_help=False)
    comparing.add_argument("--replicates", type=_replicates, default=DEFAULT_REPLICATES)
    comparing.add_argument("--alpha", type=_alpha, default=DEFAULT_ALPHA)
    comparing.add_argument(
        "--assignment-policy",
        choices=[p.value for p in AssignmentPolicy],
        default=AssignmentPolicy.MOST_SPECIFIC.value,
    )
    comparing.add_argument(
        "--exclude-unmatched",
        action="store_true",
        help="drop unmatched and discarded meals from both partitions before ARI",
    )

    p = sub.add_parser("ingest", parents=[common], help="validate a meals CSV")
    p.add_argument("meals")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("cluster", parents=[common, clustering, feature], help="cluster one feature set")
    p.add_argument("meals")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("evaluate-gs", parents=[common], help="gold-standard quality metrics")
    p.add_argument("meals")
    p.add_argument("gold_standard")
    p.add_argument("--overfit-max", type=_positive_int, default=2)
    p.set_defaults(func=cmd_evaluate_gs)

    p = sub.add_parser("compare", parents=[common, clustering, feature, comparing], help="ARI and rediscovery")
    p.add_argument("meals")
    p.add_argument("gold_standard")
    p.add_argument(
        "--reference",
        default=None,
        help="partition JSON (e.g. planted_partition.json from 'synth') to take the headline ARI against",
    )
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("feature-select", parents=[common, clustering, comparing], help="rank the four feature sets")
    p.add_argument("meals")
    p.add_argument("gold_standard")
    p.set_defaults(func=cmd_feature_select)

    p = sub.add_parser("plot", parents=[common, clustering, feature], help="render all figures")
    p.add_argument("meals")
    p.add_argument("--clusters", default=None, help="partition.json written by 'cluster'")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("spec")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", parents=[common, clustering, comparing], help="full pipeline in one JSON bundle")
    p.add_argument("meals")
    p.add_argument("gold_standard")
    p.add_argument(
        "--feature-set",
        choices=[k.value for k in FeatureSetKind],
        default=None,
        help="feature set for the detailed comparison (default: best by ARI)",
    )
    p.set_defaults(func=cmd_report)
    return parser


def _resolve_seed(args, parser):
    if args.seed is not None:
        return
    env = os.environ.get(SEED_ENV)
    if env is None or env.strip() == "":
        args.seed = 0
        return
    try:
        args.seed = int(env)
    except ValueError:
        parser.error(f"${SEED_ENV} must be an integer, got {env!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_help(sys.stderr)
        return 1
    _resolve_seed(args, parser)
    try:
        return args.func(args)
    except PhenoclustError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return exc.exit_status
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
