import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import numpy as np
import pytest
from referencing import Registry, Resource

from ctables import io as cio
from ctables.cli import (
    EXIT_CHECK,
    EXIT_OK,
    EXIT_RESOURCE,
    EXIT_USAGE,
    ExperimentConfig,
    UsageError,
    main,
    run,
    suite,
)

DOCS = Path(__file__).resolve().parents[1] / "docs"


def schema(name):
    return json.loads((DOCS / name).read_text())


def registry():
    resources = [(p.name, Resource.from_contents(json.loads(p.read_text()))) for p in DOCS.glob("*.schema.json")]
    return Registry().with_resources(resources)


def validate(doc, name):
    jsonschema.Draft202012Validator(schema(name), registry=registry()).validate(doc)


def load_report(out, cmd, n=2, C=2, seed=0):
    return json.loads((Path(out) / f"{cmd}_n{n}_C{C}_seed{seed}.json").read_text())


def test_count_report(tmp_path):
    assert main(["count", "--n", "2", "--C", "2", "--out", str(tmp_path)]) == EXIT_OK
    rep = load_report(tmp_path, "count")
    assert rep["value"] == "5"
    validate(rep, "report.schema.json")
    validate(rep["config"] | {"command": "count"}, "config.schema.json")


def test_typical_report(tmp_path):
    assert main(["typical", "--n", "4", "--C", "2", "--out", str(tmp_path)]) == EXIT_OK
    rep = load_report(tmp_path, "typical", n=4)
    doc = json.loads((tmp_path / rep["artifacts"][0]).read_text())
    validate(doc, "typical-table.schema.json")
    assert np.allclose(doc["Z"], 2) and doc["residual"] < 1e-10


def test_env_sets_default_out(tmp_path, monkeypatch):
    monkeypatch.setenv("CTABLES_OUT", str(tmp_path / "env"))
    assert main(["count", "--n", "2"]) == EXIT_OK
    assert (tmp_path / "env" / "count_n2_C2_seed0.json").exists()


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 3, "C": 1, "seed": 7}))
    assert main(["count", "--config", str(cfg), "--C", "2", "--out", str(tmp_path)]) == EXIT_OK
    rep = load_report(tmp_path, "count", n=3, C=2, seed=7)
    assert rep["value"] == "406"


@pytest.mark.parametrize(
    "argv",
    [
        ["count", "--n", "0"],
        ["rn-ratio", "--n", "3", "--r", "3"],
        ["sample", "--format", "xml"],
        ["sample", "--seed", "-1"],
        ["sample", "--seed", str(2**64)],
        ["nonsense"],
        ["suite"],
        ["verify-joint", "--n", "4", "--k", "5"],
    ],
)
def test_usage_errors(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)] if argv != ["nonsense"] else argv) == EXIT_USAGE


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"colour": "red"}))
    assert main(["count", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_USAGE
    with pytest.raises(UsageError):
        ExperimentConfig.from_dict({"command": "count", "tolerances": {"nope": 1}})


def test_resource_exit_code(tmp_path):
    # 4x4 margins of 10 give far more tables than the enumeration cap
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"row": [10, 10, 10, 10], "col": [10, 10, 10, 10]}))
    assert main(["enumerate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_RESOURCE


def test_check_failure_exit_code(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"tolerances": {"max_exceedance": 0.0}}))
    code = main(["verify-max", "--n", "10", "--samples", "50", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == EXIT_CHECK


@pytest.mark.parametrize("fmt", ["csv", "json", "bin"])
def test_sample_formats(tmp_path, fmt):
    assert main(["sample", "--n", "3", "--C", "2", "--samples", "4", "--format", fmt, "--out", str(tmp_path)]) == 0
    path = tmp_path / f"sample_n3_C2_seed0_samples.{fmt}"
    if fmt == "csv":
        arr = cio.read_stream_csv(path, (3, 3))
    elif fmt == "bin":
        arr = np.array(cio.read_stream_bin(path))
    else:
        docs = json.loads(path.read_text())
        for d in docs:
            validate(d, "table.schema.json")
        arr = np.array([d["entries"] for d in docs])
    assert arr.shape == (4, 3, 3) and np.all(arr.sum(axis=2) == 6)


def test_every_command_runs(tmp_path):
    quick = {
        "count": [],
        "enumerate": [],
        "compositions": ["--r", "2"],
        "margin-max": [],
        "typical": [],
        "bounds": [],
        "cm-estimate": ["--n", "3"],
        "rn-ratio": ["--n", "3", "--r", "1"],
        "sample": ["--sampler", "rejection"],
        "verify-marginal": ["--n", "6", "--samples", "2000"],
        "verify-joint": ["--n", "6", "--samples", "20"],
        "verify-moments": ["--n", "6", "--samples", "100"],
        "verify-max": ["--n", "6", "--samples", "50"],
        "verify-esd": ["--n", "20"],
    }
    for cmd, extra in quick.items():
        code = main([cmd, "--out", str(tmp_path / cmd)] + extra)
        assert code in (EXIT_OK, EXIT_CHECK), cmd
        (report,) = [p for p in (tmp_path / cmd).glob("*.json") if p.stem.count("_") == 3]
        validate(json.loads(report.read_text()), "report.schema.json")


def test_suite_examples(tmp_path):
    empty = suite([], 0, tmp_path / "empty")
    assert empty["pass"] and empty["count"] == 0
    ok = [{"command": "count", "n": 2}, {"command": "typical", "n": 3}, {"command": "bounds", "n": 2}]
    agg = suite(ok, 0, tmp_path / "ok")
    assert agg["pass"] and agg["count"] == 3
    validate(agg, "suite-report.schema.json")
    bad = ok + [{"command": "count", "n": -4}]
    agg = suite(bad, 0, tmp_path / "bad")
    assert not agg["pass"] and agg["failed"] == [3]
    assert agg["members"][3]["status"] == "usage"


def test_suite_cli_and_member_seeds(tmp_path):
    cfg = tmp_path / "suite.json"
    doc = {"seed": 5, "configs": [{"command": "sample", "n": 3}, {"command": "sample", "n": 3}]}
    validate(doc, "suite.schema.json")
    cfg.write_text(json.dumps(doc))
    assert main(["suite", "--config", str(cfg), "--out", str(tmp_path / "s")]) == EXIT_OK
    agg = json.loads((tmp_path / "s" / "suite.json").read_text())
    seeds = [json.loads((tmp_path / "s" / m["report"]).read_text())["seed"] for m in agg["members"]]
    assert seeds[0] != seeds[1]
    cfg.write_text(json.dumps([{"command": "count"}, {"command": "verify-max", "n": 6, "samples": 20, "tolerances": {"max_exceedance": 0.0}}]))
    assert main(["suite", "--config", str(cfg), "--out", str(tmp_path / "t")]) == EXIT_CHECK


def test_run_api(tmp_path):
    rep = run(ExperimentConfig.from_dict({"command": "count", "n": 2, "C": 2}), tmp_path)
    assert rep.value == "5" and rep.passed


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "ctables", "count", "--n", "2", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0 and "value 5" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "ctables", "count", "--n", "x"], capture_output=True, text=True)
    assert proc.returncode == 2
