import json
import subprocess
import sys

import pytest

from clusterentropy.cli import build_parser, main


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("CLUSTERENTROPY_RUNS", str(tmp_path / "runs"))
    return tmp_path


def run_dir(workdir):
    (d,) = list((workdir / "runs").iterdir())
    return str(d)


SCHEDULE = ",".join(str(800 * m) for m in range(1, 13))


def test_ingest_and_sample(workdir, capsys):
    (workdir / "t.csv").write_text("time,price\n" + "".join(f"{1514764800 + 86400 * 20 * i},{100 + i % 7}\n" for i in range(40)))
    assert main(["ingest", "t.csv", "--out", "s.csv", "--monthly"]) == 0
    side = json.loads((workdir / "s.json").read_text())
    assert side["length"] == 40 and side["schedule"]["unit"] == "month"
    assert main(["sample", "s.csv", "--target-length", "20", "--out", "s20.csv"]) == 0
    assert json.loads((workdir / "s20.json").read_text())["origin"] == {"kind": "sampled", "step": 2}
    (workdir / "bad.csv").write_text("1,100\n2,-3\n")
    assert main(["ingest", "bad.csv", "--out", "b.csv"]) == 1
    assert "line 2" in capsys.readouterr().err


def test_entropy_command(workdir, capsys):
    assert main(["generate-fbm", "--length", "20000", "--seed", "1", "--out", "fbm05.csv"]) == 0
    assert main(["entropy", "fbm05.csv", "--window-grid", "default:200", "--horizon", "1", "--out", "curves"]) == 0
    names = sorted(p.name for p in (workdir / "curves").iterdir())
    assert names == sorted(f"entropy_n{n}.csv" for n in (30, 50, 100, 150, 200))
    head = json.loads((workdir / "curves" / "entropy_n30.csv").read_text().splitlines()[0][2:])
    assert head["M"] == 1 and head["variant"] == "backward" and head["symbol"] == "fbm_H0.5_s1"
    first = (workdir / "curves" / "entropy_n50.csv").read_bytes()
    assert main(["entropy", "fbm05.csv", "--window-grid", "default:200", "--out", "curves"]) == 0
    assert (workdir / "curves" / "entropy_n50.csv").read_bytes() == first


def test_entropy_errors(workdir, capsys):
    assert main(["entropy", "missing.csv", "--out", "x"]) == 1
    assert "missing.csv" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["entropy", "whatever.csv", "--horizon", "0", "--out", "x"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["entropy", "whatever.csv", "--bogus", "--out", "x"])
    assert exc.value.code == 2


def test_full_workflow(workdir, capsys):
    assert main(["generate-fbm", "--schedule", SCHEDULE, "--seed", "5", "--out", "fbm.csv"]) == 0
    capsys.readouterr()
    assert main(["mdi", "fbm.csv", "--window-grid", "10,20", "--jobs", "2", "--format", "json"]) == 0
    grid = json.loads(capsys.readouterr().out)
    assert len(grid) == 24
    rd = run_dir(workdir)

    assert main(["horizon", rd, "--format", "json"]) == 0
    table = json.loads(capsys.readouterr().out)
    assert table["horizon"] == 12 and "models" not in table["blocks"][0]
    (workdir / "refs.json").write_text('{"power_utility": 0.0049}')
    assert main(["horizon", rd, "--references", "refs.json", "--out", "hz"]) == 0
    capsys.readouterr()
    table = json.loads((workdir / "hz" / "table.json").read_text())
    block = table["blocks"][0]
    assert block["models"]["power_utility"]["H(12)"] == pytest.approx(block["h_rel"] * 0.0049)

    assert main(["benchmark", rd, "--seeds", "1", "--seed-base", "5", "--format", "csv", "--out", "b"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert rows[0] == "M,t,dof,p,h,pairs" and len(rows) == 13
    assert all(r.split(",")[3] == "1.0" for r in rows[1:])
    assert (workdir / "b" / "table5.json").exists()

    for what in ("entropy", "distribution", "mdi", "horizon"):
        assert main(["export", rd, "--what", what, "--out", f"{what}.csv"]) == 0
    assert (workdir / "horizon.csv").read_text().startswith("M,n,I,H,h_rel")


def test_incomplete_run(workdir, capsys):
    assert main(["generate-fbm", "--length", "3000", "--out", "f.csv"]) == 0
    assert main(["mdi", "f.csv", "--window-grid", "10,20"]) == 0
    rd = run_dir(workdir)
    (workdir / rd / "mdi" / "1_20.csv").unlink()
    assert main(["horizon", rd]) == 1
    assert "M=1 n=20" in capsys.readouterr().err


def test_help_documents_flags():
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    for name, p in sub.choices.items():
        text = p.format_help()
        for action in p._actions:
            for flag in action.option_strings:
                assert flag in text, (name, flag)


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "clusterentropy", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "benchmark" in out.stdout
    bad = subprocess.run([sys.executable, "-m", "clusterentropy", "frobnicate"], capture_output=True, text=True)
    assert bad.returncode == 2
