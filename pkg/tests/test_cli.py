import io
import json

import jsonschema
import pytest

from zsc.cli import EXIT_CONFIG, EXIT_DOMAIN, csv_text, dumps, load_schema, run

OUTPUT = jsonschema.Draft202012Validator(load_schema("output.schema.json"))
MODEL = jsonschema.Draft202012Validator(load_schema("model.schema.json"))


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def check_doc(text):
    doc = json.loads(text)
    OUTPUT.validate(doc)
    return doc


COMMANDS = [
    ("invariants", "--eigenvalues", "2,2,-1"),
    ("constants", "--q", "0.01"),
    ("constants", "--q", "0.01", "--c0", "16", "--delta", "1e-8"),
    ("surface", "--samples", "20"),
    ("surface", "--model", "cylinder", "--samples", "20", "--radii", "1,2,3,4"),
    ("surface", "--model-json", '{"kind": "graph", "params": {"F": "hyperbolic", "a": 0.5}}', "--samples", "10"),
    ("stability", "--test", "bump", "--center", "3", "--width", "1"),
    ("stability", "--model", "cylinder", "--test", "linear", "--knots", "0,1,2", "--values", "1,0.5,0"),
    ("stability", "--search", "ssy", "--budget", "200"),
    ("sobolev",),
    ("tube", "--model", "circle", "--r", "3", "--mc-samples", "20000"),
    ("tube", "--model", "circle", "--radius-function", "constant", "--h0", "1.5", "--r", "3", "--mc-samples", "0"),
    ("tube", "--radius-function", "theoremC", "--r", "3", "--mc-samples", "0", "--ball-bound", "0.5"),
]


@pytest.mark.parametrize("argv", COMMANDS, ids=lambda a: " ".join(a)[:60])
def test_every_document_validates(argv):
    code, out, err = call(*argv)
    assert code == 0, err
    doc = check_doc(out)
    assert doc["command"] == argv[0]
    model = doc["result"].get("model") or doc["result"].get("spec", {}).get("model")
    if model is not None:
        MODEL.validate(model)


@pytest.mark.parametrize("argv", COMMANDS[:4] + COMMANDS[6:8], ids=lambda a: " ".join(a)[:60])
def test_byte_identical(argv):
    assert call(*argv)[1] == call(*argv)[1]


def test_report_document(tmp_path):
    code, out, _ = call("report", "--model", "cylinder", "--budget", "200", "--samples", "40",
                        "--csv-dir", str(tmp_path))
    assert code == 0
    doc = check_doc(out)
    assert {c["name"] for c in doc["result"]["checks"]} >= {"chart_identities", "stability_scan", "tubes"}
    assert (tmp_path / "volume.csv").read_text().startswith("r,volume\n")


def test_csv_forms():
    code, out, _ = call("surface", "--samples", "5", "--format", "csv")
    lines = out.strip().split("\n")
    assert code == 0 and lines[0].startswith("x0,x1,x2,lambda1") and len(lines) == 6
    code, out, _ = call("invariants", "--eigenvalues", "1,-1,0", "--format", "csv")
    assert "pinching," in out  # null pinching prints as an empty cell
    assert call("report", "--format", "csv")[0] == EXIT_CONFIG


def test_invalid_kind_is_config_error():
    code, out, err = call("surface", "--model-json", '{"kind": "torus"}')
    assert code == EXIT_CONFIG and out == "" and "kind" in err


@pytest.mark.parametrize("argv", [
    ("surface", "--model", "sphere"),
    ("surface", "--model-json", '{"kind": "rotational", "params": {"m": -1}}'),
    ("surface", "--model-json", '{"kind": "graph", "extra": 1}'),
    ("surface", "--model-json", "{not json"),
    ("surface", "--model-json", "/nonexistent/model.json"),
    ("invariants", "--eigenvalues", "1,2"),
    ("constants",),
    ("nonsense",),
    ("stability", "--bound", "width=1,2"),
    ("stability", "--search", "bump", "--bound", "width=1"),
    ("stability", "--search", "bump", "--bound", "height=1,2"),
])
def test_config_errors(argv):
    assert call(*argv)[0] == EXIT_CONFIG


@pytest.mark.parametrize("argv", [
    ("constants", "--q", "0.5"),
    ("constants", "--c", "0.2", "--q", "0.01"),
    ("stability", "--test", "ssy", "--r", "1e4"),
    ("tube", "--model", "graph", "--F", "zero", "--mc-samples", "0"),
    ("tube", "--sampling", "8", "--mc-samples", "0"),
])
def test_domain_errors(argv):
    code, out, err = call(*argv)
    assert code == EXIT_DOMAIN and out == "" and err.startswith("zsc: domain error")


def test_serializer():
    text = dumps({"a": float("nan"), "b": [1.0, 0.1], "c": True, "d": None})
    assert json.loads(text) == {"a": None, "b": [1, 0.1], "c": True, "d": None}
    assert "0.10000000000000001" in text
    assert csv_text(("x", "y"), [(float("inf"), 2.5)]) == "x,y\n,2.5\n"


def test_model_file(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"kind": "cylinder", "params": {"curve": "circle", "radius": 2.0}}))
    code, out, _ = call("surface", "--model-json", str(path), "--samples", "10")
    assert code == 0
    assert check_doc(out)["result"]["model"]["params"]["radius"] == 2
