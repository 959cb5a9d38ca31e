import json
import os
import subprocess

import jsonschema
import numpy as np
import pytest

import atesa

FIGURE = "I liked the pizza and the open kitchen"


def test_tokenize_offsets():
    assert atesa.tokenize("Good food!") == [("Good", 0, 4), ("food", 5, 9), ("!", 9, 10)]
    assert atesa.tokenize("") == []


def test_iob_round_trip():
    assert atesa.spans_to_iob([(3, 3), (6, 7)], 8) == [0, 0, 0, 1, 0, 0, 1, 2]
    assert atesa.iob_to_spans([2, 2, 0]) == [(0, 1)]
    with pytest.raises(atesa.AtesaError):
        atesa.spans_to_iob([(0, 2), (2, 3)], 5)
    with pytest.raises(ValueError):
        atesa.iob_to_spans([0, 5])


def test_fuse():
    a = np.array([[0.6, 0.4]])
    b = np.array([[0.1, 0.9]])
    assert atesa.fuse([a, b]) == [1]
    assert atesa.fuse([np.array([[0.5, 0.5]])] * 2) == [0]
    assert atesa.fuse([a, a, b], rule="hard") == [0]


def test_metrics_micro_equals_accuracy():
    m = atesa.compute_metrics([[0, 1, 1, 2]], [[0, 1, 2, 2]], 3)
    assert m["accuracy"] == pytest.approx(0.75)
    assert m["micro_f1"] == m["accuracy"]


def test_corpus_split_and_stats(data_dir):
    xml = data_dir / "toy_mams.xml"
    examples = atesa.load_corpus(xml, "mams")
    assert len(examples) == 10
    assert examples[0]["iob_aspect_tags"] == [0, 0, 0, 1, 0, 0, 1, 2]
    stats = atesa.corpus_stats(xml, "mams")
    assert stats["sentence_count"] == 10
    assert sum(stats["polarity_counts"].values()) == stats["opinion_count"]
    train, val, test = atesa.split(examples)
    assert sorted(train + val + test) == list(range(10))
    assert len(test) == 2


def test_train_and_analyze(tmp_path, data_dir):
    examples = atesa.load_corpus(data_dir / "toy_mams.xml", "mams")
    for branch in ("ate", "atsa"):
        history = atesa.train_head(examples, tmp_path / branch, branch=branch, hidden_size=16,
                                   epochs=3, learning_rate=1e-2)
        assert [h["epoch"] for h in history] == [1, 2, 3]
        atesa.write_ensemble(branch, [("m", str(tmp_path / branch))],
                             str(tmp_path / f"{branch}.json"))
    analyzer = atesa.Analyzer(tmp_path / "ate.json", tmp_path / "atsa.json")
    result = analyzer.analyze(FIGURE)
    assert len(result["tokens"]) == 8
    with pytest.raises(atesa.AtesaError):
        atesa.write_ensemble("ate", [("ghost", str(tmp_path / "missing"))],
                             str(tmp_path / "x.json"))


def test_service_contract(fixture_models, data_dir, schema):
    service = atesa.Service(fixture_models / "ate.json", fixture_models / "atsa.json")
    assert service.ready

    status, body = service.analyze({"text": FIGURE})
    assert status == 200
    jsonschema.validate(body, schema)
    assert [o["term"] for o in body["opinions"]] == ["pizza", "open kitchen"]
    golden = json.loads((data_dir / "golden" / "analyze_figure.json").read_text())
    assert body == golden

    status, body = service.analyze({"text": ""})
    assert status == 400
    assert body["error"]["code"] == "empty_text"
    jsonschema.validate(body, schema["$defs"]["error"])

    status, records = service.analyze_file("Great pasta\n\nSlow service\n")
    assert status == 200
    assert [r["line"] for r in records] == [1, 2, 3]
    jsonschema.validate(records[1], schema["$defs"]["skip"])
    for r in (records[0], records[2]):
        jsonschema.validate(r, schema)

    status, _ = atesa.Service().analyze({"text": "pizza"})
    assert status == 503


def test_schema_holds_for_fixture_inputs(fixture_models, schema):
    service = atesa.Service(fixture_models / "ate.json", fixture_models / "atsa.json")
    for text in [FIGURE, "the", "Rude waiters and an ordinary view", "pizza , kitchen !"]:
        status, body = service.analyze({"text": text})
        assert status == 200
        jsonschema.validate(body, schema)
        for o in body["opinions"]:
            assert 0 <= o["start"] <= o["end"] < len(body["tokens"])
            assert o["term"] == " ".join(body["tokens"][o["start"]:o["end"] + 1])


def test_cli_exit_codes():
    cli = os.environ.get("ATESA_CLI")
    if not cli:
        pytest.skip("command-line tool path not provided")
    assert subprocess.run([cli, "nonsense"], capture_output=True).returncode == 2
    assert subprocess.run([cli], capture_output=True).returncode == 2
