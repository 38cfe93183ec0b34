"""End-to-end pipeline through the command-line interface."""
import csv
import json
import math
import pytest

from cutbench import cli


def run(*argv):
    return cli.main(list(argv))


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture()
def instance_dir(tmp_path):
    out = tmp_path / "instances"
    assert run("gen", "--out", str(out), "--n-list", "4,6", "--per-n", "2",
               "--seed", "11") == 0
    return out


class TestGen:
    def test_file_count_and_index(self, instance_dir):
        files = sorted(p.name for p in instance_dir.glob("*.json"))
        assert len(files) == 4
        rows = read_rows(instance_dir / "index.csv")
        assert [r["instance_id"] for r in rows] == [p[:-5] for p in files]

    def test_rerun_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            run("gen", "--out", str(out), "--n-list", "5", "--per-n", "3", "--seed", "2")
        for name in ("index.csv", "inst_n005_i000.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_bad_size_rejected(self, tmp_path):
        with pytest.raises(SystemExit):
            run("gen", "--out", str(tmp_path / "x"), "--n-list", "1", "--per-n", "1")


class TestSolve:
    def test_cim_cont_campaign(self, instance_dir, tmp_path):
        out = tmp_path / "cim.csv"
        assert run("solve", "--instances", str(instance_dir), "--solver", "cim-cont",
                   "--out", str(out), "--trials", "20", "--tmax-grid", "5,10",
                   "--seed", "3") == 0
        rows = read_rows(out)
        assert len(rows) == 4
        assert set(r["mode"] for r in rows) == {"closed"}
        for row in rows:
            assert float(row["ps"]) >= 0.0
            assert float(row["tts_norm"]) >= 5.0

    def test_resume_skips_done(self, instance_dir, tmp_path, capsys):
        out = tmp_path / "cim.csv"
        args = ("solve", "--instances", str(instance_dir), "--solver", "cim-cont",
                "--out", str(out), "--trials", "10", "--tmax-grid", "5", "--seed", "3")
        assert run(*args) == 0
        first = out.read_bytes()
        assert run(*args) == 0
        assert "nothing to do" in capsys.readouterr().out
        assert out.read_bytes() == first

    def test_worker_count_does_not_change_results(self, instance_dir, tmp_path):
        outs = []
        for tag, workers in (("w1", "1"), ("w2", "2")):
            out = tmp_path / f"cim_{tag}.csv"
            assert run("solve", "--instances", str(instance_dir), "--solver",
                       "cim-cont", "--out", str(out), "--trials", "10",
                       "--tmax-grid", "5", "--seed", "3", "--workers", workers) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_cim_disc_campaign(self, instance_dir, tmp_path):
        out = tmp_path / "disc.csv"
        assert run("solve", "--instances", str(instance_dir), "--solver", "cim-disc",
                   "--out", str(out), "--trials", "10", "--tmax-grid", "5,10",
                   "--loss-per-rt", "0.1", "--seed", "3") == 0
        rows = read_rows(out)
        assert len(rows) == 4
        assert all(row["loss_per_rt"] == "0.1" for row in rows)
        assert all(int(row["round_trips"]) in (50, 100) for row in rows)

    def test_daqc_campaign(self, instance_dir, tmp_path):
        out = tmp_path / "daqc.csv"
        assert run("solve", "--instances", str(instance_dir), "--solver", "daqc",
                   "--out", str(out), "--layers", "8", "--seed", "3") == 0
        rows = read_rows(out)
        assert len(rows) == 4
        assert all(row["p"] == "8" for row in rows)
        assert all(float(row["tts_s"]) > 0 for row in rows)

    def test_dhqmf_campaign(self, instance_dir, tmp_path):
        out = tmp_path / "qmf.csv"
        assert run("solve", "--instances", str(instance_dir), "--solver", "dhqmf",
                   "--out", str(out), "--trajectories", "50", "--p-target", "0.99",
                   "--seed", "3") == 0
        rows = read_rows(out)
        assert len(rows) == 4
        for row in rows:
            assert float(row["sum_Km"]) >= 0.0
            assert float(row["depth"]) > 0
            assert float(row["single_qubit_gates"]) >= 0.0

    def test_ground_energy_override(self, instance_dir, tmp_path):
        table = tmp_path / "grounds.csv"
        rows = read_rows(instance_dir / "index.csv")
        with open(table, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["instance_id", "ground_energy"])
            for row in rows:
                writer.writerow([row["instance_id"], "-1000.0"])
        out = tmp_path / "hopeless.csv"
        assert run("solve", "--instances", str(instance_dir), "--solver", "cim-cont",
                   "--out", str(out), "--trials", "5", "--tmax-grid", "5",
                   "--ground-energies", str(table), "--seed", "3") == 0
        assert all(float(r["ps"]) == 0.0 for r in read_rows(out))

    def test_trajectory_dump(self, instance_dir, tmp_path):
        out = tmp_path / "cim.csv"
        dump = tmp_path / "traj"
        assert run("solve", "--instances", str(instance_dir), "--solver", "cim-cont",
                   "--out", str(out), "--trials", "5", "--tmax-grid", "5",
                   "--seed", "3", "--dump-trajectory", str(dump)) == 0
        assert len(list(dump.glob("*.csv"))) == 4
        assert len(list(dump.glob("*.png"))) == 4


class TestFitCompare:
    @staticmethod
    def planted_results(path, base=2.0):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["instance_id", "n", "mode", "t_max", "trials", "ps",
                            "r99", "tts_norm", "tts_wallclock_s"])
            for n in (4, 9, 16, 25):
                for i in range(3):
                    tts = 0.5 * base ** math.sqrt(n)
                    writer.writerow([f"i{n}_{i}", n, "closed", 5, 10, 0.5, 6.6,
                                     repr(tts), repr(tts / 2.5e6)])

    def test_fit_recovers_planted(self, tmp_path):
        results = tmp_path / "res.csv"
        self.planted_results(results)
        out = tmp_path / "fit.json"
        assert run("fit", "--results", str(results), "--family", "sqrt_exp",
                   "--out", str(out)) == 0
        doc = json.loads(out.read_text())
        assert doc["params"]["B"] == pytest.approx(2.0, rel=1e-9)
        assert (tmp_path / "fit.png").exists()

    def test_fit_rejects_bad_family(self, tmp_path):
        results = tmp_path / "res.csv"
        self.planted_results(results)
        with pytest.raises(SystemExit):
            run("fit", "--results", str(results), "--family", "cubic")

    def test_compare_report_files(self, tmp_path):
        a, b = tmp_path / "cim.csv", tmp_path / "cim2.csv"
        self.planted_results(a, base=2.0)
        self.planted_results(b, base=3.0)
        report = tmp_path / "report"
        assert run("compare", "--inputs", f"closed={a}", f"open={b}",
                   "--out", str(report), "--extrapolate", "4:40") == 0
        assert (report / "summary.csv").exists()
        assert (report / "series_closed.csv").exists()
        assert (report / "fit_open.json").exists()
        assert (report / "extrapolation.csv").exists()
        assert (report / "tts_comparison.png").exists()

    def test_compare_needs_input(self):
        with pytest.raises(SystemExit):
            run("compare", "--out", "nowhere")


class TestConfig:
    def test_config_file_supplies_defaults(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps(
            {"gen": {"out": str(tmp_path / "inst"), "n-list": "4", "per-n": "2",
                     "weight-class": "sk"}, "seed": 5}))
        assert run("--config", str(config), "gen") == 0
        rows = read_rows(tmp_path / "inst" / "index.csv")
        assert len(rows) == 2
        assert all(r["weight_class"] == "sk" for r in rows)

    def test_flags_override_config(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"gen": {"per-n": "9"}}))
        out = tmp_path / "inst"
        assert run("--config", str(config), "gen", "--out", str(out),
                   "--n-list", "4", "--per-n", "1") == 0
        assert len(read_rows(out / "index.csv")) == 1


class TestVerify:
    def test_verify_passes(self, capsys):
        assert run("verify") == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out
        assert out.count("ok") >= 6
