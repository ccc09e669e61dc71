import csv
import json
import os
import re
from pathlib import Path

import pytest

from expsynth import cli

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def load(name):
    return json.loads((CONFIGS / name).read_text())


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def break_outputs(tmp_path_factory):
    d = tmp_path_factory.mktemp("break")
    runs = []
    for i in range(2):
        out, csvp = d / f"r{i}.json", d / f"r{i}.csv"
        rc = cli.main(["break", "--config", str(CONFIGS / "simple_break.json"), "--out", str(out), "--csv", str(csvp)])
        runs.append((rc, out, csvp))
    return runs


def test_break_exit_and_header(break_outputs):
    rc, out, csvp = break_outputs[0]
    assert rc == cli.EXIT_OK
    rows = read_csv(csvp)
    assert rows[0] == cli.BREAKER_HEADER
    assert len(rows) > 1
    assert json.loads(out.read_text())["status"] == "ok"


def test_break_is_deterministic(break_outputs):
    (_, o1, c1), (_, o2, c2) = break_outputs
    assert o1.read_bytes() == o2.read_bytes()
    assert c1.read_bytes() == c2.read_bytes()


def test_floats_carry_17_digits(break_outputs):
    text = break_outputs[0][1].read_text()
    json.loads(text)
    floats = re.findall(r"-?\d+\.\d+(?:e[-+]?\d+)?", text)
    assert floats
    for f in floats:
        mant = re.sub(r"e.*", "", f).lstrip("-").replace(".", "").lstrip("0")
        assert len(mant) <= 17
        assert float(format(float(f), ".17g")) == float(f)


def test_fmt_float_round_trips():
    for x in (0.1, 1 / 3, 2.0**-1074, 1e308, -19.737248416636184):
        assert float(cli.fmt_float(x)) == x
    assert cli.fmt_float(float("nan")) == "null"
    assert cli.to_json({"a": float("inf")}) == '{\n  "a": null\n}'


def test_non_convergence_exit(tmp_path):
    cfg = load("simple_break.json")
    cfg["breaker"]["fp_max_iter"] = 1
    out = tmp_path / "o.json"
    assert cli.main(["break", "--config", write_cfg(tmp_path, cfg), "--out", str(out)]) == cli.EXIT_CONVERGENCE
    assert json.loads(out.read_text())["status"] == "non_convergence"


def test_validate_reports_integer_centres(tmp_path):
    out = tmp_path / "v.json"
    rc = cli.main(["validate", "--config", str(CONFIGS / "simple_hypotheses.json"), "--out", str(out)])
    assert rc == cli.EXIT_CHECK
    assert json.loads(out.read_text())["failed"] == ["center_distance_to_integers"]


@pytest.mark.parametrize("mutate", [
    lambda c: c.pop("model"),
    lambda c: c["truncation"].update(window=1000),
    lambda c: c["breaker"].update(eta=2.0),
    lambda c: c["model"].update(kind="nope"),
])
def test_bad_config_exit(tmp_path, mutate):
    cfg = load("simple_break.json")
    mutate(cfg)
    assert cli.main(["validate", "--config", write_cfg(tmp_path, cfg)]) == cli.EXIT_CONFIG


def test_unreadable_config_and_bad_arguments(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{")
    assert cli.main(["validate", "--config", str(p)]) == cli.EXIT_CONFIG
    assert cli.main(["validate", "--config", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG
    assert cli.main(["frobnicate"]) == cli.EXIT_CONFIG


def test_certify_outputs(tmp_path):
    out, csvp = tmp_path / "c.json", tmp_path / "c.csv"
    rc = cli.main(["certify", "--config", str(CONFIGS / "certify_uniform.json"), "--out", str(out), "--csv", str(csvp)])
    assert rc == cli.EXIT_OK
    assert read_csv(csvp)[0] == cli.ROOTS_HEADER
    per_k = read_csv(cli.sibling(csvp, "_per_k"))
    assert per_k[0] == cli.PER_K_HEADER
    assert [int(r[0]) for r in per_k[1:]] == list(range(4, 13))


def test_partition_parsing():
    assert cli.parse_partition(None) is None
    assert cli.parse_partition("breaker") is None
    assert cli.parse_partition("t=1.5,2.5") == [1.5, 2.5]
    with pytest.raises(cli.ConfigError):
        cli.parse_partition("t=")
    with pytest.raises(cli.ConfigError):
        cli.parse_partition("every")


def test_example_files(tmp_path):
    base = tmp_path / "g.csv"
    rc = cli.main(["example", "simple_example", "--csv", str(base), "--range", "-5", "5",
                   "--points", "101", "--out", str(tmp_path / "e.json")])
    assert rc == cli.EXIT_OK
    rows = read_csv(base)
    assert rows[0] == cli.EXAMPLE_HEADER and len(rows) == 102
    assert len(read_csv(cli.sibling(base, "_integers"))) == 12
    zeros = [float(r[0]) for r in read_csv(cli.sibling(base, "_zeros"))[1:]]
    assert 1.5 in zeros and 0.5 not in zeros


def test_write_atomic_leaves_no_temp_files(tmp_path, monkeypatch):
    target = tmp_path / "out.json"
    cli.write_atomic(target, "old")
    real = os.replace

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        cli.write_atomic(target, "new")
    monkeypatch.setattr(os, "replace", real)
    assert target.read_text() == "old"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["out.json"]
