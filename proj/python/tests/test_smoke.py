import math
import os
import pathlib
import subprocess

import pytest

import evidencedesk

DATA = pathlib.Path(os.environ.get("EVIDENCEDESK_TEST_DATA", pathlib.Path(__file__).parents[2] / "tests" / "data"))


def test_statistics():
    assert evidencedesk.binomial_test(10, 10) == pytest.approx(0.0009765625, abs=1e-15)
    assert evidencedesk.bh_adjust([0.01, 0.04, 0.03, 0.002]) == [0.02, 0.04, 0.04, 0.008]
    kw = evidencedesk.kruskal_wallis([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
    assert kw["statistic"] == pytest.approx(7.2)
    assert kw["p_value"] == pytest.approx(math.exp(-3.6))
    assert evidencedesk.friedman([[1, 2, 3]] * 3)["statistic"] == pytest.approx(6.0)
    assert evidencedesk.spearman_brown(0.83486) == pytest.approx(0.91, abs=2e-4)


def test_errors_surface_as_exceptions():
    with pytest.raises(evidencedesk.EvidenceDeskError):
        evidencedesk.binomial_test(11, 10)


def test_format_and_dataset():
    text = (DATA / "myocardial_bridge_answer.md").read_text()
    report = evidencedesk.validate_format(text)
    assert report["passed"] and report["grade"] == "Moderate"
    total, counts = evidencedesk.benchmark_counts(str(DATA / "benchmark_80.json"))
    assert total == 80 and set(counts.values()) == {20}


def test_golden_question(tmp_path):
    cli = os.environ.get("EVIDENCEDESK_CLI")
    if not cli:
        pytest.skip("EVIDENCEDESK_CLI not set")
    golden = DATA / "golden"
    subprocess.run([cli, "ingest", "--input", str(golden / "corpus"), "--store", str(tmp_path / "store")], check=True)
    subprocess.run(
        [cli, "index-build", "--store", str(tmp_path / "store"), "--index", str(tmp_path / "index.bin"),
         "--models", "hash:384:1,hash:1024:2,hash:1536:3"],
        check=True,
    )
    question = (golden / "question.txt").read_text().strip()
    out = evidencedesk.ask(tmp_path / "store", tmp_path / "index.bin", golden / "transcript.jsonl", question)
    assert out["status"] == "done"
    assert out["stages"] == 5
    assert out["response"]["evidence_grade"] == "Moderate"
