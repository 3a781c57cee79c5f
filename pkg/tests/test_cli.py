import json
import subprocess
import sys

import numpy as np
import pytest

from sigtrade.backtest import PriceSeries, load_prices, write_prices
from sigtrade.cli import main
from sigtrade.experiments import write_synthetic_pair


@pytest.fixture(scope="module")
def pair(tmp_path_factory):
    return write_synthetic_pair(tmp_path_factory.mktemp("pair"))


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def body(text):
    return [ln for ln in text.splitlines() if not ln.startswith("#")]


class TestSig:
    def test_segment_example(self, tmp_path, capsys):
        (tmp_path / "p.csv").write_text("time,x\n0,0\n1,1\n")
        code, out, _ = run(["sig", tmp_path / "p.csv", "--order", "2"], capsys)
        assert code == 0
        assert json.loads(out) == {"dimension": 2, "order": 2, "levels": [[1.0], [1.0, 1.0], [0.5, 0.5, 0.5, 0.5]]}

    def test_order_one_is_increment(self, tmp_path, capsys):
        (tmp_path / "p.csv").write_text("0,1.5\n0.5,0.25\n2,3.0\n")
        code, out, _ = run(["sig", tmp_path / "p.csv", "--order", "1", "--no-rescale"], capsys)
        assert json.loads(out)["levels"][1] == [2.0, 1.5]

    def test_missing_file(self, tmp_path, capsys):
        missing = tmp_path / "nope.csv"
        code, _, err = run(["sig", missing], capsys)
        assert code == 2
        assert str(missing) in err

    def test_bad_order(self, tmp_path, capsys):
        (tmp_path / "p.csv").write_text("0,0\n1,1\n")
        assert run(["sig", tmp_path / "p.csv", "--order", "9"], capsys)[0] == 2


class TestModelCommands:
    def test_simulate_then_fit(self, tmp_path, capsys):
        out = tmp_path / "ou.csv"
        assert run(["simulate", "--n", "2000", "--horizon", "20", "--seed", "3", "--out", out], capsys)[0] == 0
        text = out.read_text()
        assert text.startswith("# {")
        assert body(text)[0] == "time,x" and len(body(text)) == 2002
        code, stdout, _ = run(["fit", out], capsys)
        fitted = json.loads(stdout)["fitted"]
        assert fitted["mean_level"] == pytest.approx(10.0, rel=0.05)

    def test_simulate_deterministic(self, capsys):
        a = run(["simulate", "--seed", "5"], capsys)[1]
        b = run(["simulate", "--seed", "5"], capsys)[1]
        c = run(["simulate", "--seed", "6"], capsys)[1]
        assert a == b != c

    def test_fit_constant_path_fails(self, tmp_path, capsys):
        (tmp_path / "c.csv").write_text("".join(f"{i},2.0\n" for i in range(10)))
        code, _, err = run(["fit", tmp_path / "c.csv"], capsys)
        assert code == 1 and "constant" in err

    def test_train(self, capsys):
        code, out, _ = run(["train", "--iterations", "5", "--train-count", "10", "--n", "20"], capsys)
        data = json.loads(out)
        assert code == 0
        assert data["policy"]["order"] == 3 and data["policy"]["threshold"] == 0.05
        assert data["config"]["seed"] == 0

    def test_table1_single_row(self, capsys):
        code, out, _ = run(["table1", "--single-row", "--seeds", "1", "--iterations", "20", "--format", "json"], capsys)
        rows = json.loads(out)["rows"]
        assert code == 0 and len(rows) == 1
        assert (rows[0]["mean_level"], rows[0]["vol"]) == (10.0, 1.0)

    def test_table1_zero_vol(self, capsys):
        code, out, _ = run(["table1", "--single-row", "--vol", "0", "--x0", "12", "--seeds", "1",
                            "--iterations", "20", "--format", "json"], capsys)
        value = json.loads(out)["rows"][0]["stopped_value"]
        path = 10.0 + 2.0 * np.exp(-10.0 * np.linspace(0, 1, 101))
        assert code == 0
        assert path.min() - 1e-12 <= value <= path.max() + 1e-12
        assert np.min(np.abs(path - value)) < 1e-9


class TestConfig:
    def test_unknown_key(self, tmp_path, capsys):
        (tmp_path / "c.json").write_text(json.dumps({"config_version": 1, "strategy": {"bogus": 1}}))
        assert run(["simulate", "--config", tmp_path / "c.json"], capsys)[0] == 2

    def test_version(self, tmp_path, capsys):
        (tmp_path / "c.json").write_text(json.dumps({"config_version": 2}))
        assert run(["simulate", "--config", tmp_path / "c.json"], capsys)[0] == 2

    def test_flags_override_file(self, tmp_path, capsys):
        (tmp_path / "c.json").write_text(json.dumps({"config_version": 1, "seed": 4, "ou": {"vol": 0.5}}))
        _, out, _ = run(["simulate", "--config", tmp_path / "c.json", "--vol", "0.25"], capsys)
        cfg = json.loads("\n".join(ln[2:] for ln in out.splitlines() if ln.startswith("# ")))["config"]
        assert cfg["seed"] == 4 and cfg["ou"]["vol"] == 0.25


class TestPairCommands:
    def test_compare_artifacts_and_defaults(self, pair, tmp_path, capsys):
        out = tmp_path / "run"
        code, stdout, _ = run(["compare", pair, "--out", out], capsys)
        assert code == 0
        assert {p.name for p in out.iterdir()} == {"schedule.json", "equity.csv", "report.json"}
        report = json.loads((out / "report.json").read_text())
        assert report["config"]["baseline"] == {"band_mult": 0.1, "window": 100}
        assert report["config"]["strategy"]["threshold"] == 0.05
        assert set(report) >= {"strategy", "baseline"}
        assert "Baseline" in stdout and "Signature" in stdout
        equity = (out / "equity.csv").read_text()
        assert equity.startswith("# ")
        assert body(equity)[0] == "index,date,equity_strategy,equity_baseline"
        schedule = json.loads((out / "schedule.json").read_text())
        assert schedule["side"] == "long" and "config" in schedule

    def test_trade_is_byte_identical(self, pair, tmp_path, capsys):
        for name in ("a", "b"):
            assert run(["trade", pair, "--out", tmp_path / name, "--seed", "2"], capsys)[0] == 0
        for f in ("schedule.json", "equity.csv", "report.json"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_empty_trading_window(self, pair, tmp_path, capsys):
        m = json.loads(pair.read_text())
        m["formation"] = 504
        manifest = pair.parent / "short.json"
        manifest.write_text(json.dumps(m))
        code, _, err = run(["trade", manifest, "--out", tmp_path / "x"], capsys)
        assert code == 2 and "empty trading window" in err
        assert not (tmp_path / "x").exists()

    def test_identical_symbols(self, pair, tmp_path, capsys):
        a = load_prices(pair.parent / "SYNA.csv")
        write_prices(tmp_path / "A.csv", a)
        write_prices(tmp_path / "B.csv", PriceSeries("B", a.dates, a.closes))
        (tmp_path / "pair.json").write_text(json.dumps({"file_a": "A.csv", "file_b": "B.csv"}))
        code, _, err = run(["trade", tmp_path / "pair.json", "--out", tmp_path / "x"], capsys)
        assert code == 1 and "identical" in err
        assert not (tmp_path / "x").exists()

    def test_missing_manifest(self, tmp_path, capsys):
        assert run(["trade", tmp_path / "none.json", "--out", tmp_path / "x"], capsys)[0] == 2


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "sigtrade.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("sig", "simulate", "fit", "train", "table1", "trade", "compare"):
        assert cmd in out.stdout
