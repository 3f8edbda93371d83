"""Command-line pipeline over a document tree.

Subcommands:
  audit     load -> group -> leakage report against the origin split
  group     load -> template groups (groups.json)
  tune      score grouping thresholds against a ground-truth grouping (tuning.csv)
  resample  group-atomic train/val/test manifest plus CV fold manifests
  eval      memorizer F1 gap between a leaky and the resampled split (metrics.json)
  report    human-readable summary of the artifacts (summary.md, histogram.csv)

Exit codes: 0 success (for audit: no leakage), 1 runtime or IO failure,
2 usage or configuration error, 3 leakage detected (audit only).

Outputs are deterministic for a fixed configuration and input tree. Every
artifact carries provenance (tool version, configuration digest, seed) and
never a timestamp, so identical reruns are byte-identical.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import METRICS, RunConfig, build_config, coerce_value, parse_config_file
from .errors import InfeasibleRatios, InvalidParameter, TempleakError, UnassignedDocument
from .evaluation import GapResult, leakage_gap_experiment
from .grouping import (
    GroundTruthGrouping,
    GroupingResult,
    TemplateGroup,
    group_corpus,
    group_size_histogram,
    grouping_digest,
    grouping_from_dict,
    grouping_to_dict,
    rebin_histogram,
    tune_threshold,
)
from .ingest import LoadReport, load_corpus
from .model import Corpus, Dataset, Split
from .resampling import (
    Ratios,
    derived_ratios,
    leakage_report,
    make_cv_folds,
    origin_manifest,
    render_manifest,
    resample_splits,
    verify_manifest,
)
from .version import TOOL_NAME, __version__

GROUPS_FILE = "groups.json"
LEAKAGE_FILE = "leakage.json"
LOAD_REPORT_FILE = "load_report.json"
MANIFEST_FILE = "manifest.tsv"
HISTOGRAM_FILE = "histogram.csv"
HISTOGRAM_REBINNED_FILE = "histogram_rebinned.csv"
TUNING_FILE = "tuning.csv"
METRICS_FILE = "metrics.json"
SUMMARY_FILE = "summary.md"


def fold_file(i: int) -> str:
    return f"fold_{i}.tsv"


# --- shared plumbing ----------------------------------------------------------


def _provenance(config: RunConfig) -> dict:
    return {
        "tool": TOOL_NAME,
        "version": __version__,
        "config_digest": config.digest(),
        "seed": config.seed,
    }


def _provenance_header(config: RunConfig) -> list[tuple[str, str]]:
    return [("tool", f"{TOOL_NAME} {__version__}"), ("config_digest", config.digest())]


def _csv_provenance(config: RunConfig) -> list[str]:
    return [f"# {key}={value}" for key, value in _provenance_header(config)] + [f"# seed={config.seed}"]


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _write_json(path: Path, payload: dict) -> None:
    _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise TempleakError(f"{path}: invalid JSON: {exc}") from None


def _load(config: RunConfig) -> tuple[Corpus, LoadReport]:
    """Load the corpus, write load_report.json, surface warnings on stderr."""
    if config.data_root is None:
        raise InvalidParameter("data_root is required; pass --data-root or set it in the config file")
    report = LoadReport()
    corpus = load_corpus(config.data_root, config.dataset, report)
    payload = report.to_dict()
    payload["provenance"] = _provenance(config)
    _write_json(config.output_dir / LOAD_REPORT_FILE, payload)
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    for error in report.errors:
        print(f"warning: skipped {error.path}: {error.detail}", file=sys.stderr)
    return corpus, report


def _compute_groups(config: RunConfig, corpus: Corpus) -> GroupingResult:
    return group_corpus(corpus, config.resolved_metric(), config.threshold, config.shingle_k)


def _write_groups(config: RunConfig, groups: GroupingResult) -> None:
    payload = grouping_to_dict(groups)
    payload["digest"] = grouping_digest(groups)
    payload["provenance"] = _provenance(config)
    _write_json(config.output_dir / GROUPS_FILE, payload)


def _resolve_ratios(config: RunConfig, corpus: Corpus) -> Ratios:
    if config.ratios is not None:
        return config.ratios
    return derived_ratios(corpus, train_share=config.train_fraction)


def _groups_for(config: RunConfig, corpus: Corpus) -> GroupingResult:
    """Reuse groups.json when it covers exactly the loaded corpus, else recompute."""
    path = config.output_dir / GROUPS_FILE
    if path.is_file():
        groups = grouping_from_dict(_read_json(path))
        if groups.doc_ids() == set(corpus.doc_ids()):
            return groups
    groups = _compute_groups(config, corpus)
    _write_groups(config, groups)
    return groups


def load_ground_truth(path: Path) -> GroundTruthGrouping:
    """Ground-truth grouping from JSON: {"groups": [[...], ...]} or {"pairs": [[a, b], ...]}."""
    data = _read_json(Path(path))
    if isinstance(data, dict) and isinstance(data.get("groups"), list):
        return GroundTruthGrouping.from_groups(data["groups"])
    if isinstance(data, dict) and isinstance(data.get("pairs"), list):
        return GroundTruthGrouping.from_pairs([(pair[0], pair[1]) for pair in data["pairs"]])
    raise InvalidParameter(f'{path}: expected a JSON object with a "groups" or "pairs" list')


# --- subcommands --------------------------------------------------------------


def cmd_audit(config: RunConfig) -> int:
    corpus, _ = _load(config)
    groups = _compute_groups(config, corpus)
    _write_groups(config, groups)
    report = leakage_report(groups, corpus)
    payload = report.to_dict()
    payload["provenance"] = _provenance(config)
    _write_json(config.output_dir / LEAKAGE_FILE, payload)
    print(
        f"{report.n_leaked_test}/{report.n_test} test documents share a template "
        f"with a training document (leak fraction {report.leak_fraction:.2%})"
    )
    return 3 if report.n_leaked_test > 0 else 0


def cmd_group(config: RunConfig) -> int:
    corpus, _ = _load(config)
    groups = _compute_groups(config, corpus)
    _write_groups(config, groups)
    print(f"{len(corpus)} documents in {len(groups.groups)} template groups")
    return 0


def cmd_tune(config: RunConfig) -> int:
    if config.ground_truth is None:
        raise InvalidParameter('tune needs --ground-truth (JSON object with "groups" or "pairs")')
    corpus, _ = _load(config)
    gt = load_ground_truth(config.ground_truth)
    rows = tune_threshold(corpus, gt, config.thresholds, config.resolved_metric(), config.shingle_k)
    lines = _csv_provenance(config)
    lines.append("threshold,precision,recall,f1,selected")
    for row in rows:
        lines.append(f"{row.threshold!r},{row.precision!r},{row.recall!r},{row.f1!r},{int(row.selected)}")
    _write_text(config.output_dir / TUNING_FILE, "\n".join(lines) + "\n")
    best = next(row for row in rows if row.selected)
    print(f"best threshold {best.threshold!r} (pairwise f1 {best.f1:.4f})")
    return 0


def cmd_resample(config: RunConfig) -> int:
    corpus, _ = _load(config)
    groups = _groups_for(config, corpus)
    manifest = resample_splits(groups, _resolve_ratios(config, corpus), config.seed)
    extra = _provenance_header(config)
    _write_text(config.output_dir / MANIFEST_FILE, render_manifest(manifest, groups, extra))
    if config.k_folds > 0:
        folds = make_cv_folds(
            manifest, config.k_folds, config.train_fraction, config.seed,
            group_atomic=True, groups=groups,
        )
        for i, fold in enumerate(folds.folds):
            _write_text(
                config.output_dir / fold_file(i),
                render_manifest(fold, groups, extra + [("fold", str(i))]),
            )
    violations = verify_manifest(manifest, groups)
    if violations:
        for violation in violations:
            print(f"violation: {violation.detail}", file=sys.stderr)
        return 1
    counts = {split: len(manifest.members(split)) for split in (Split.TRAIN, Split.VAL, Split.TEST)}
    print(
        f"wrote {MANIFEST_FILE} ({counts[Split.TRAIN]} train / {counts[Split.VAL]} val / "
        f"{counts[Split.TEST]} test) and {config.k_folds} fold manifests"
    )
    return 0


def _leaky_manifest(config: RunConfig, corpus: Corpus):
    """The split being audited: origin tags when present, else a seeded
    document-level shuffle that ignores template groups."""
    try:
        return origin_manifest(corpus)
    except UnassignedDocument:
        singletons = GroupingResult(
            groups=[TemplateGroup(group_id=i, members=(doc_id,)) for i, doc_id in enumerate(sorted(corpus.doc_ids()))],
            threshold=1.0,
            metric="singleton",
        )
        return resample_splits(singletons, _resolve_ratios(config, corpus), config.seed)


def cmd_eval(config: RunConfig) -> int:
    corpus, _ = _load(config)
    groups = _groups_for(config, corpus)
    clean = resample_splits(groups, _resolve_ratios(config, corpus), config.seed)
    leaky = _leaky_manifest(config, corpus)
    result: GapResult = leakage_gap_experiment(corpus, groups, leaky, clean)
    payload = {
        "leaky": result.leaky_metrics.to_dict(),
        "clean": result.clean_metrics.to_dict(),
        "gap": result.to_dict(),
        "provenance": _provenance(config),
    }
    _write_json(config.output_dir / METRICS_FILE, payload)
    print(
        f"memorizer F1: leaky {result.f1_leaky:.4f}, clean {result.f1_clean:.4f}, "
        f"gap {result.gap:.4f}"
    )
    return 0


def _histogram_csv(config: RunConfig, histogram: dict[int, int]) -> str:
    lines = _csv_provenance(config)
    lines.append("size,count")
    for size in sorted(histogram):
        lines.append(f"{size},{histogram[size]}")
    return "\n".join(lines) + "\n"


def _tuning_table(tuning_text: str) -> list[str]:
    rows = []
    for line in tuning_text.splitlines():
        if not line or line.startswith("#") or line.startswith("threshold,"):
            continue
        parts = line.split(",")
        if len(parts) != 5:
            continue
        t, p, r, f, selected = parts
        mark = " (selected)" if selected.strip() == "1" else ""
        rows.append(
            f"| {float(t):g}{mark} | {float(p):.4f} | {float(r):.4f} | {float(f):.4f} |"
        )
    return rows


def _render_summary(
    config: RunConfig,
    groups: GroupingResult,
    leakage: dict,
    tuning_text: str | None,
    metrics: dict | None,
) -> str:
    histogram = group_size_histogram(groups)
    n_docs = sum(size * count for size, count in histogram.items())
    lines = ["# Template redundancy summary", ""]

    lines.append("## Group-size distribution")
    lines.append("")
    if n_docs == 0:
        lines.append("The corpus contains 0 documents (0 template groups).")
    else:
        lines.append(
            f"{n_docs} documents in {len(groups.groups)} template groups "
            f"(metric `{groups.metric}`, threshold {groups.threshold:g})."
        )
        lines.append("")
        lines.append("| group size | groups | documents |")
        lines.append("|---:|---:|---:|")
        for size in sorted(histogram):
            lines.append(f"| {size} | {histogram[size]} | {size * histogram[size]} |")
        largest = max(histogram)
        lines.append("")
        lines.append(f"Largest group: {largest} documents.")
    lines.append("")

    lines.append("## Leakage")
    lines.append("")
    n_test = int(leakage.get("n_test", 0))
    if n_test == 0:
        lines.append("0 documents in the test split; nothing can leak.")
    else:
        n_leaked = int(leakage.get("n_leaked_test", 0))
        fraction = float(leakage.get("leak_fraction", 0.0))
        lines.append(
            f"{n_leaked} of {n_test} test documents ({fraction:.2%}) share a "
            f"template group with a training document."
        )
        offending = leakage.get("offending_groups", [])
        lines.append(f"Offending groups: {len(offending)}.")
    lines.append("")

    lines.append("## Threshold tuning")
    lines.append("")
    tuning_rows = _tuning_table(tuning_text) if tuning_text else []
    if tuning_rows:
        lines.append("| threshold | precision | recall | f1 |")
        lines.append("|---:|---:|---:|---:|")
        lines.extend(tuning_rows)
    else:
        lines.append(f"Not run (`{TUNING_FILE}` absent); `templeak tune` produces it.")
    lines.append("")

    lines.append("## Memorizer gap")
    lines.append("")
    if metrics and "gap" in metrics:
        gap = metrics["gap"]
        lines.append("| split | memorizer F1 |")
        lines.append("|---|---:|")
        lines.append(f"| leaky | {float(gap['f1_leaky']):.4f} |")
        lines.append(f"| clean | {float(gap['f1_clean']):.4f} |")
        lines.append("")
        lines.append(f"Gap: {float(gap['gap']):.4f}.")
    else:
        lines.append(f"Not run (`{METRICS_FILE}` absent); `templeak eval` produces it.")
    lines.append("")

    lines.append("## Provenance")
    lines.append("")
    lines.append(f"- tool: {TOOL_NAME} {__version__}")
    lines.append(f"- config digest: {config.digest()}")
    lines.append(f"- seed: {config.seed}")
    lines.append("")
    return "\n".join(lines)


def cmd_report(config: RunConfig) -> int:
    out = config.output_dir
    missing = [name for name in (GROUPS_FILE, LEAKAGE_FILE) if not (out / name).is_file()]
    if missing:
        print(
            f"error: missing artifacts in {out}: {', '.join(missing)}; run audit first",
            file=sys.stderr,
        )
        return 1
    groups = grouping_from_dict(_read_json(out / GROUPS_FILE))
    leakage = _read_json(out / LEAKAGE_FILE)

    histogram = group_size_histogram(groups)
    _write_text(out / HISTOGRAM_FILE, _histogram_csv(config, histogram))
    if config.dataset == Dataset.SROIE:
        _write_text(out / HISTOGRAM_REBINNED_FILE, _histogram_csv(config, rebin_histogram(histogram)))

    tuning_path = out / TUNING_FILE
    tuning_text = tuning_path.read_text(encoding="utf-8") if tuning_path.is_file() else None
    metrics_path = out / METRICS_FILE
    metrics = _read_json(metrics_path) if metrics_path.is_file() else None

    _write_text(out / SUMMARY_FILE, _render_summary(config, groups, leakage, tuning_text, metrics))
    print(f"wrote {out / SUMMARY_FILE}")
    return 0


# --- argument parsing ----------------------------------------------------------

_FLAG_KEYS = (
    "dataset",
    "data_root",
    "output_dir",
    "metric",
    "threshold",
    "ratios",
    "seed",
    "k_folds",
    "train_fraction",
    "shingle_k",
    "ground_truth",
    "thresholds",
)

_HANDLERS = {
    "audit": cmd_audit,
    "group": cmd_group,
    "tune": cmd_tune,
    "resample": cmd_resample,
    "eval": cmd_eval,
    "report": cmd_report,
}

_COMMAND_HELP = {
    "audit": "report template leakage between the origin train and test splits",
    "group": "write the template grouping of the corpus",
    "tune": "score grouping thresholds against a ground-truth grouping",
    "resample": "write a group-atomic split manifest and CV fold manifests",
    "eval": "measure the memorizer F1 gap between leaky and resampled splits",
    "report": "write histogram CSVs and a markdown summary of prior artifacts",
}


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, metavar="FILE", help="key=value configuration file")
    parser.add_argument("--dataset", choices=[d.value for d in Dataset])
    parser.add_argument("--data-root", dest="data_root", metavar="DIR")
    parser.add_argument("--output-dir", dest="output_dir", metavar="DIR")
    parser.add_argument("--metric", choices=("auto",) + METRICS)
    parser.add_argument("--threshold", metavar="T", help="grouping threshold in (0, 1]")
    parser.add_argument("--ratios", metavar="R", help="train,val,test (or train,test) fractions")
    parser.add_argument("--seed", metavar="N")
    parser.add_argument("--k-folds", dest="k_folds", metavar="K")
    parser.add_argument("--train-fraction", dest="train_fraction", metavar="F")
    parser.add_argument("--shingle-k", dest="shingle_k", metavar="K")
    parser.add_argument("--ground-truth", dest="ground_truth", metavar="FILE")
    parser.add_argument("--thresholds", metavar="T1,T2,...", help="tuning grid")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOL_NAME,
        description="Detect template-level redundancy in document IE datasets, "
        "quantify train/test leakage, and produce leakage-free resampled splits.",
    )
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {__version__}")
    subparsers = parser.add_subparsers(dest="command", metavar="command", required=True)
    for name, handler in _HANDLERS.items():
        sub = subparsers.add_parser(name, help=_COMMAND_HELP[name])
        _add_common_flags(sub)
        sub.set_defaults(handler=handler)
    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    file_values = parse_config_file(args.config) if args.config else {}
    flag_values = {}
    for key in _FLAG_KEYS:
        raw = getattr(args, key, None)
        if raw is not None:
            flag_values[key] = coerce_value(key, raw)
    return build_config(file_values, flag_values)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits itself on usage errors and --help
        return exc.code if isinstance(exc.code, int) else 2
    try:
        config = _resolve_config(args)
        return args.handler(config)
    except (InvalidParameter, InfeasibleRatios) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TempleakError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    console_main()
