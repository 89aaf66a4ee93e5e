import json

import numpy as np
import pytest

from softrelu_newton.cli import main
from softrelu_newton.instance import load_instance, save_instance


@pytest.fixture
def inst_file(tmp_path):
    path = tmp_path / "inst.json"
    assert main(["gen", "--n", "24", "--m", "8", "--d", "6", "--radius", "1.0", "--l", "1.0",
                 "--seed", "7", "-o", str(path)]) == 0
    return path


@pytest.fixture
def ref_file(tmp_path, inst_file):
    path = tmp_path / "ref.json"
    assert main(["ref", str(inst_file), "-o", str(path)]) == 0
    return path


def test_gen_writes_instance_and_report(inst_file, capsys):
    inst = load_instance(inst_file)
    assert (inst.n, inst.m, inst.d) == (24, 8, 6)
    assert inst.norm_violations() == []


def test_gen_is_byte_identical(tmp_path, inst_file):
    again = tmp_path / "again.json"
    main(["gen", "--n", "24", "--m", "8", "--d", "6", "--radius", "1.0", "--l", "1.0",
          "--seed", "7", "-o", str(again)])
    assert again.read_bytes() == inst_file.read_bytes()


def test_gen_without_planting(tmp_path, capsys):
    path = tmp_path / "plain.json"
    assert main(["gen", "--n", "24", "--m", "8", "--d", "6", "--no-plant", "-o", str(path)]) == 0
    report = json.loads(capsys.readouterr().err)
    assert report["weights_ok"] and report["xi"] == 3


def test_gen_dimension_error(capsys):
    assert main(["gen", "--n", "4", "--m", "8", "--d", "6"]) == 2
    assert "DimensionError" in capsys.readouterr().err


def test_solve_with_reference_has_distances(tmp_path, inst_file, ref_file):
    out = tmp_path / "trace.csv"
    assert main(["solve", str(inst_file), "--x0", "random:3", "--max-iters", "3",
                 "--ref-optimum", str(ref_file), "-o", str(out)]) == 0
    rows = [line.split(",") for line in out.read_text().splitlines()[1:]]
    assert all(r[3] != "" and r[4] != "" for r in rows)


def test_solve_from_reference_takes_no_steps(tmp_path, inst_file, ref_file, capsys):
    out = tmp_path / "trace.csv"
    assert main(["solve", str(inst_file), "--x0", f"file:{ref_file}", "--ref-optimum", str(ref_file),
                 "-o", str(out)]) == 0
    summary = json.loads(capsys.readouterr().err)
    assert summary["converged"] and summary["iterations_used"] == 0


def test_sketched_and_exact_both_converge(tmp_path, inst_file, ref_file, capsys):
    x = np.array(json.loads(ref_file.read_text())["x"]) * 1.001
    start = tmp_path / "x0.json"
    start.write_text(json.dumps(x.tolist()))
    kinds = {}
    for label, extra in (("exact", []), ("sketched", ["--sketch-eps0", "0.1"])):
        out = tmp_path / f"{label}.csv"
        assert main(["solve", str(inst_file), "--x0", f"file:{start}", "--seed", "1",
                     "-o", str(out), *extra]) == 0
        assert json.loads(capsys.readouterr().err)["converged"]
        kinds[label] = {line.split(",")[-1] for line in out.read_text().splitlines()[1:]}
    assert kinds == {"exact": {"Exact"}, "sketched": {"Sketched"}}


def test_solve_config_errors(inst_file):
    assert main(["solve", str(inst_file), "--x0", "bogus"]) == 2
    assert main(["solve", str(inst_file), "--max-iters", "0"]) == 2
    assert main(["solve", str(inst_file), "--mode", "loss", "--sketch-eps0", "0.1"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["solve", str(inst_file), "--mode", "other"])
    assert exc.value.code == 2


def test_solve_not_pd_exit_code(tmp_path, inst_file):
    bad = load_instance(inst_file)
    bad = bad.replace(w=np.full(bad.m, 1e-3))
    path = tmp_path / "bad.json"
    save_instance(bad, path)
    assert main(["solve", str(path), "--x0", "random:0", "--max-iters", "1"]) == 3


def test_verify_passes(tmp_path, inst_file):
    out = tmp_path / "report.json"
    assert main(["verify", "--samples", "100", "--seed", "0", str(inst_file), "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    names = [c["name"] for c in doc["checks"]]
    assert names == sorted(names) and doc["ok"]


def test_verify_single_sample(inst_file, capsys):
    assert main(["verify", "--samples", "1", str(inst_file)]) == 0
    assert json.loads(capsys.readouterr().out)["ok"]


def test_verify_flags_large_target(tmp_path, inst_file, capsys):
    bad = load_instance(inst_file)
    bad = bad.replace(b=bad.b / np.linalg.norm(bad.b) * 3.0)
    path = tmp_path / "bad.json"
    save_instance(bad, path)
    assert main(["verify", "--samples", "100", str(path)]) == 1
    doc = json.loads(capsys.readouterr().out)
    c_norm = next(c for c in doc["checks"] if c["name"] == "c_norm")
    assert c_norm["passes"] < c_norm["samples"]
    assert "b_norm" in doc["instance_violations"]
