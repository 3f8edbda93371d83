from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

from templeak.cli import main
from templeak.version import __version__

from tests.helpers import write_funsd_tree, write_sroie_tree

TEMPLATE_A = ["name:", "date:", "phone:"]
ANSWERS_A = ["alice", "jan 1", "555"]


def unique_doc(tag: str) -> tuple[list[str], list[str]]:
    return ([f"{tag} one:", f"{tag} two:", f"{tag} three:"], [f"{tag} value"])


@pytest.fixture
def leaky_tree(tmp_path) -> Path:
    """Template A straddles train and test; 1 of 2 test docs leaks."""
    return write_funsd_tree(
        tmp_path / "leaky",
        train={
            "a1": (TEMPLATE_A, ANSWERS_A),
            "a2": (TEMPLATE_A, ["bob", "feb 2", "556"]),
            "b1": unique_doc("b1"),
        },
        test={
            "a3": (TEMPLATE_A, ["carol", "mar 3", "557"]),
            "c1": unique_doc("c1"),
        },
    )


@pytest.fixture
def clean_tree(tmp_path) -> Path:
    """Every template lives wholly inside one origin split."""
    return write_funsd_tree(
        tmp_path / "clean",
        train={
            "a1": (TEMPLATE_A, ANSWERS_A),
            "a2": (TEMPLATE_A, ["bob", "feb 2", "556"]),
            "b1": unique_doc("b1"),
        },
        test={"c1": unique_doc("c1"), "c2": unique_doc("c2")},
    )


@pytest.fixture
def wide_tree(tmp_path) -> Path:
    """10 docs, one leaked 3-doc template, enough singletons to resample."""
    train = {
        "a1": (TEMPLATE_A, ANSWERS_A),
        "a2": (TEMPLATE_A, ["bob", "feb 2", "556"]),
    }
    for i in range(1, 7):
        train[f"b{i}"] = unique_doc(f"b{i}")
    test = {
        "c1": (TEMPLATE_A, ANSWERS_A),  # same values as a1: replay is exact
        "c2": unique_doc("c2"),
    }
    return write_funsd_tree(tmp_path / "wide", train=train, test=test)


def run(*args: str) -> int:
    return main(list(args))


def audit_args(tree: Path, out: Path, *extra: str) -> list[str]:
    return ["audit", "--dataset", "funsd", "--data-root", str(tree), "--output-dir", str(out), *extra]


# --- audit ---------------------------------------------------------------------


def test_audit_leaky_exits_3(leaky_tree, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(audit_args(leaky_tree, out))
    assert code == 3
    stdout = capsys.readouterr().out
    assert "1/2 test documents" in stdout
    assert (out / "groups.json").is_file()
    assert (out / "load_report.json").is_file()
    leakage = json.loads((out / "leakage.json").read_text())
    assert leakage["n_leaked_test"] == 1
    assert leakage["leaked_doc_ids"] == ["a3"]
    assert "provenance" in leakage


def test_audit_clean_exits_0(clean_tree, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(audit_args(clean_tree, out)) == 0
    assert "0/2 test documents" in capsys.readouterr().out
    leakage = json.loads((out / "leakage.json").read_text())
    assert leakage["n_leaked_test"] == 0


def test_audit_missing_root_exits_1(tmp_path, capsys):
    missing = tmp_path / "no_such_dir"
    code = main(audit_args(missing, tmp_path / "out"))
    assert code == 1
    assert str(missing) in capsys.readouterr().err


def test_audit_skips_malformed_file_with_warning(leaky_tree, tmp_path, capsys):
    bad = leaky_tree / "training_data" / "annotations" / "zz_bad.json"
    bad.write_text("{not json", encoding="utf-8")
    code = main(audit_args(leaky_tree, tmp_path / "out"))
    assert code == 3  # leak still detected from the well-formed files
    assert "zz_bad" in capsys.readouterr().err


def test_missing_data_root_flag_exits_2(capsys):
    assert main(["audit", "--dataset", "funsd"]) == 2
    assert "data_root" in capsys.readouterr().err


def test_threshold_zero_exits_2(leaky_tree, tmp_path, capsys):
    code = main(audit_args(leaky_tree, tmp_path / "out", "--threshold", "0"))
    assert code == 2
    assert "threshold" in capsys.readouterr().err


def test_unknown_command_exits_2(capsys):
    assert main(["frobnicate"]) == 2


def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert f"templeak {__version__}" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "templeak", "--version"],
        capture_output=True,
        text=True,
        cwd=tmp_path,
    )
    assert proc.returncode == 0
    assert "templeak" in proc.stdout


# --- resample -------------------------------------------------------------------


def resample_args(tree: Path, out: Path, *extra: str) -> list[str]:
    return [
        "resample", "--dataset", "funsd", "--data-root", str(tree),
        "--output-dir", str(out), *extra,
    ]


def test_resample_writes_manifest_and_folds(wide_tree, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(resample_args(wide_tree, out)) == 0
    assert "wrote manifest.tsv" in capsys.readouterr().out
    manifest = (out / "manifest.tsv").read_text()
    rows = [line for line in manifest.splitlines() if not line.startswith("#")]
    assert len(rows) == 10
    for i in range(4):  # default k_folds
        assert (out / f"fold_{i}.tsv").is_file()
    # group atomicity in the main manifest: template A stays together
    splits = dict(row.split("\t") for row in rows)
    assert splits["a1"] == splits["a2"] == splits["c1"]


def test_resample_byte_identical_between_runs(wide_tree, tmp_path):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(resample_args(wide_tree, out1, "--seed", "5")) == 0
    assert main(resample_args(wide_tree, out2, "--seed", "5")) == 0
    for name in ["manifest.tsv"] + [f"fold_{i}.tsv" for i in range(4)]:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_resample_seed_changes_output(wide_tree, tmp_path):
    distinct = set()
    for seed in range(6):
        out = tmp_path / f"r{seed}"
        assert main(resample_args(wide_tree, out, "--seed", str(seed), "--k-folds", "0")) == 0
        rows = [
            l for l in (out / "manifest.tsv").read_text().splitlines() if not l.startswith("#")
        ]
        distinct.add(tuple(rows))
    assert len(distinct) >= 2  # singleton-rich corpus: seeds must move docs around


def test_resample_explicit_ratios(leaky_tree, tmp_path):
    out = tmp_path / "out"
    code = main(resample_args(leaky_tree, out, "--ratios", "0.6,0.4", "--k-folds", "0"))
    assert code == 0
    rows = [l for l in (out / "manifest.tsv").read_text().splitlines() if not l.startswith("#")]
    splits = dict(row.split("\t") for row in rows)
    assert sorted(splits) == ["a1", "a2", "a3", "b1", "c1"]
    assert splits["a1"] == splits["a2"] == splits["a3"]


def test_resample_infeasible_ratios_exits_2(leaky_tree, tmp_path, capsys):
    out = tmp_path / "out"
    # the 3-doc template exceeds every split share of 5 docs
    code = main(resample_args(leaky_tree, out, "--ratios", "0.4,0.2,0.4", "--k-folds", "0"))
    assert code == 2
    assert "group" in capsys.readouterr().err
    assert not (out / "manifest.tsv").exists()


def test_resample_reuses_matching_groups_file(wide_tree, tmp_path):
    out = tmp_path / "out"
    assert main(["group", "--dataset", "funsd", "--data-root", str(wide_tree), "--output-dir", str(out)]) == 0
    groups_path = out / "groups.json"
    data = json.loads(groups_path.read_text())
    # merge b1 into the template-A group by hand; doc ids stay identical
    a_group = next(g for g in data["groups"] if "a1" in g["members"])
    b_group = next(g for g in data["groups"] if g["members"] == ["b1"])
    a_group["members"] = sorted(a_group["members"] + b_group["members"])
    data["groups"] = [g for g in data["groups"] if g is not b_group]
    groups_path.write_text(json.dumps(data), encoding="utf-8")

    assert main(resample_args(wide_tree, out, "--k-folds", "0")) == 0
    rows = [l for l in (out / "manifest.tsv").read_text().splitlines() if not l.startswith("#")]
    splits = dict(row.split("\t") for row in rows)
    # reused doctored grouping: b1 now rides with template A
    assert splits["b1"] == splits["a1"]


def test_resample_recomputes_stale_groups_file(wide_tree, tmp_path):
    out = tmp_path / "out"
    assert main(["group", "--dataset", "funsd", "--data-root", str(wide_tree), "--output-dir", str(out)]) == 0
    # corpus changes under the artifact: one annotation disappears
    (wide_tree / "training_data" / "annotations" / "b6.json").unlink()
    assert main(resample_args(wide_tree, out, "--k-folds", "0")) == 0
    data = json.loads((out / "groups.json").read_text())
    members = {m for g in data["groups"] for m in g["members"]}
    assert "b6" not in members  # recomputed for the smaller corpus
    rows = [l for l in (out / "manifest.tsv").read_text().splitlines() if not l.startswith("#")]
    assert len(rows) == 9


# --- tune ------------------------------------------------------------------------


def test_tune_with_groups_ground_truth(leaky_tree, tmp_path, capsys):
    gt_path = tmp_path / "gt.json"
    gt_path.write_text(json.dumps({"groups": [["a1", "a2", "a3"], ["b1"], ["c1"]]}))
    out = tmp_path / "out"
    code = main(
        [
            "tune", "--dataset", "funsd", "--data-root", str(leaky_tree),
            "--output-dir", str(out), "--ground-truth", str(gt_path),
            "--thresholds", "0.5,0.7,0.9",
        ]
    )
    assert code == 0
    assert "best threshold" in capsys.readouterr().out
    lines = (out / "tuning.csv").read_text().splitlines()
    assert "threshold,precision,recall,f1,selected" in lines
    data_rows = [l for l in lines if l and not l.startswith("#") and not l.startswith("threshold,")]
    assert len(data_rows) == 3
    assert sum(1 for row in data_rows if row.endswith(",1")) == 1


def test_tune_with_pairs_ground_truth(leaky_tree, tmp_path):
    gt_path = tmp_path / "gt.json"
    gt_path.write_text(json.dumps({"pairs": [["a1", "a2"], ["a2", "a3"]]}))
    out = tmp_path / "out"
    code = main(
        [
            "tune", "--dataset", "funsd", "--data-root", str(leaky_tree),
            "--output-dir", str(out), "--ground-truth", str(gt_path),
        ]
    )
    assert code == 0
    assert (out / "tuning.csv").is_file()


def test_tune_requires_ground_truth(leaky_tree, tmp_path, capsys):
    code = main(
        ["tune", "--dataset", "funsd", "--data-root", str(leaky_tree), "--output-dir", str(tmp_path / "out")]
    )
    assert code == 2
    assert "ground-truth" in capsys.readouterr().err


def test_tune_rejects_malformed_ground_truth(leaky_tree, tmp_path):
    gt_path = tmp_path / "gt.json"
    gt_path.write_text(json.dumps({"clusters": []}))
    code = main(
        [
            "tune", "--dataset", "funsd", "--data-root", str(leaky_tree),
            "--output-dir", str(tmp_path / "out"), "--ground-truth", str(gt_path),
        ]
    )
    assert code == 2


# --- eval ------------------------------------------------------------------------


def test_eval_writes_gap_metrics(wide_tree, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(
        ["eval", "--dataset", "funsd", "--data-root", str(wide_tree), "--output-dir", str(out)]
    )
    assert code == 0
    assert "memorizer F1" in capsys.readouterr().out
    metrics = json.loads((out / "metrics.json").read_text())
    assert set(metrics) == {"leaky", "clean", "gap", "provenance"}
    assert metrics["gap"]["f1_leaky"] > 0.0  # c1 replays a1's values verbatim
    assert metrics["gap"]["f1_clean"] == 0.0
    assert metrics["gap"]["gap"] == pytest.approx(metrics["gap"]["f1_leaky"])
    for side in ("leaky", "clean"):
        assert set(metrics[side]) == {"precision", "recall", "f1", "tp", "fp", "fn"}


def test_eval_deterministic(wide_tree, tmp_path):
    out1, out2 = tmp_path / "e1", tmp_path / "e2"
    for out in (out1, out2):
        assert main(
            ["eval", "--dataset", "funsd", "--data-root", str(wide_tree), "--output-dir", str(out)]
        ) == 0
    assert (out1 / "metrics.json").read_bytes() == (out2 / "metrics.json").read_bytes()


# --- report -----------------------------------------------------------------------


def test_report_requires_artifacts(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["report", "--output-dir", str(out)])
    assert code == 1
    err = capsys.readouterr().err
    assert "groups.json" in err
    assert "leakage.json" in err


def test_report_full_pipeline(wide_tree, tmp_path, capsys):
    out = tmp_path / "out"
    gt_path = tmp_path / "gt.json"
    gt_path.write_text(json.dumps({"groups": [["a1", "a2", "c1"]]}))
    base = ["--dataset", "funsd", "--data-root", str(wide_tree), "--output-dir", str(out)]
    assert main(["audit", *base]) == 3
    assert main(["tune", *base, "--ground-truth", str(gt_path)]) == 0
    assert main(["eval", *base]) == 0
    assert main(["report", *base]) == 0
    capsys.readouterr()

    summary = (out / "summary.md").read_text()
    for section in ("## Group-size distribution", "## Leakage", "## Threshold tuning", "## Memorizer gap", "## Provenance"):
        assert section in summary
    assert "(selected)" in summary
    assert "Gap:" in summary

    histogram = (out / "histogram.csv").read_text().splitlines()
    assert "size,count" in histogram
    data_rows = [l for l in histogram if l and not l.startswith("#") and l != "size,count"]
    assert "3,1" in data_rows  # one 3-doc template
    assert "1,7" in data_rows  # seven singletons


def test_report_empty_corpus(tmp_path, capsys):
    tree = write_funsd_tree(tmp_path / "empty", train={}, test={})
    out = tmp_path / "out"
    assert main(audit_args(tree, out)) == 0
    assert main(["report", "--dataset", "funsd", "--output-dir", str(out)]) == 0
    capsys.readouterr()
    summary = (out / "summary.md").read_text()
    assert "0 documents (0 template groups)" in summary
    assert "0 documents in the test split" in summary


def test_report_sroie_writes_rebinned_histogram(tmp_path, capsys):
    tree = write_sroie_tree(
        tmp_path / "sroie",
        train={
            "r1": {"company": "ABC STORE", "address": "1 Main St", "date": "01/02/2020", "total": "9.00"},
            "r2": {"company": "abc store", "address": "1 Main St", "date": "02/02/2020", "total": "8.00"},
        },
        test={
            "r3": {"company": "ABC STORE", "address": "1 Main St", "date": "03/02/2020", "total": "7.00"},
            "r4": {"company": "Other Shop", "address": "9 Side Rd", "date": "03/02/2020", "total": "6.00"},
        },
    )
    out = tmp_path / "out"
    code = main(["audit", "--dataset", "sroie", "--data-root", str(tree), "--output-dir", str(out)])
    assert code == 3  # r3 shares the business key with training receipts
    assert main(["report", "--dataset", "sroie", "--output-dir", str(out)]) == 0
    capsys.readouterr()
    assert (out / "histogram.csv").is_file()
    assert (out / "histogram_rebinned.csv").is_file()


def test_report_generic_skips_rebinned(tmp_path, leaky_tree, capsys):
    out = tmp_path / "out"
    assert main(audit_args(leaky_tree, out)) == 3
    assert main(["report", "--dataset", "funsd", "--output-dir", str(out)]) == 0
    capsys.readouterr()
    assert not (out / "histogram_rebinned.csv").exists()


# --- configuration plumbing ----------------------------------------------------------


def test_config_file_with_flag_override(leaky_tree, tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("dataset=funsd\nthreshold=0.5\nseed=9\n", encoding="utf-8")
    out = tmp_path / "out"
    code = main(
        [
            "group", "--config", str(conf), "--data-root", str(leaky_tree),
            "--output-dir", str(out), "--threshold", "0.9",
        ]
    )
    assert code == 0
    data = json.loads((out / "groups.json").read_text())
    assert data["threshold"] == 0.9  # flag beat the file

    from templeak.config import build_config
    from templeak.model import Dataset

    expected = build_config(flag_values={"dataset": Dataset.FUNSD, "threshold": 0.9, "seed": 9})
    assert data["provenance"]["config_digest"] == expected.digest()


def test_unknown_config_key_exits_2(leaky_tree, tmp_path, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text("not_a_key=1\n", encoding="utf-8")
    code = main(
        ["group", "--config", str(conf), "--data-root", str(leaky_tree), "--output-dir", str(tmp_path / "out")]
    )
    assert code == 2
    assert "not_a_key" in capsys.readouterr().err
