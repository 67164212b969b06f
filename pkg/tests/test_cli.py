import json

import numpy as np
import pytest

from loopspace.cli import ExperimentConfig, generate_corpus, main, run
from loopspace.errors import ConfigError
from loopspace.loops import loads_loop


def test_generate_corpus_is_deterministic(tmp_path):
    a = generate_corpus("fourier", 5, 3, tmp_path / "a")
    b = generate_corpus("fourier", 5, 3, tmp_path / "b")
    assert [p.read_bytes() for p in a] == [p.read_bytes() for p in b]


def test_triangle_corpus_file(tmp_path):
    (path,) = generate_corpus("triangle", 0, 1, tmp_path)
    loop = loads_loop(path.read_text())
    assert loop.samples[0, 0] == 1.0 and loop.samples[128, 0] == 0.0


def test_great_circles_are_on_sphere(tmp_path):
    for path in generate_corpus("great-circle", 1, 4, tmp_path):
        loop = loads_loop(path.read_text())
        r = np.linalg.norm(loop(np.linspace(0, 1, 101)), axis=1)
        assert np.max(np.abs(r - 1)) < 1e-12


def test_mollify_suite_on_triangle(tmp_path, capsys):
    generate_corpus("triangle", 0, 1, tmp_path)
    code = main(["mollify", "--corpus", str(tmp_path), "--epsilon", "0.05"])
    report = json.loads(capsys.readouterr().out)
    assert code == 0
    assert report["summary"]["failed"] == 0
    assert any(c["check"].startswith("mollify.closeness") for c in report["checks"])


def test_actions_suite_reports_witness(capsys):
    code = main(["actions", "--space", "c0", "--delta", "0.3"])
    report = json.loads(capsys.readouterr().out)
    assert code == 0
    level_i = report["continuity"]["levels"][0]
    assert level_i["status"] == "refuted" and level_i["detail"]["lower_bound"] == 2.0


def test_malformed_loop_file_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "grid", "dim": 1}')
    assert main(["mollify", "--loops", str(bad)]) == 2


def test_bad_config_exits_2(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"suites": []}))
    assert main(["run", "--config", str(cfg)]) == 2
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"suites": ["mollify"], "bogus": 1})


def test_failing_check_exits_1(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"suites": ["mollify"], "tolerances": {"kernel": -1.0}}))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "r.json")]) == 1
    assert json.loads((tmp_path / "r.json").read_text())["summary"]["failed"] > 0


def test_run_is_deterministic_and_writes_csv(tmp_path):
    cfg = ExperimentConfig(manifold="flat-torus2", suites=["charts", "homotopy", "fibration"], seed=3)
    assert run(cfg) == run(cfg)
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps(cfg.echo()))
    code = main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "r.json"),
                 "--csv", str(tmp_path / "r.csv")])
    assert code == 0
    assert (tmp_path / "r.csv").read_text().startswith("check,anchor,residual,tolerance,pass")
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["seed"] == 3 and report["config"]["manifold"] == "flat-torus2"
