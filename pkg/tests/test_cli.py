import json

import pytest

from socmob.cli import main
from socmob.ingestion import save_edges
from socmob.synthgen import GenConfig, generate, write_corpus


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    cfg = GenConfig(
        n_users=24,
        days=14,
        seed=11,
        p_cositu=0.9,
        p_meetup=0.9,
        p_follow=0.5,
        activity_threshold=5,
    )
    ds, truth = generate(cfg)
    write_corpus(ds, truth, out)
    return out


def run(argv):
    return main([str(a) for a in argv])


class TestSynthAndEvaluate:
    def test_synth_deterministic(self, tmp_path):
        d1, d2 = tmp_path / "one", tmp_path / "two"
        for d in (d1, d2):
            code = run(
                ["synth", "--seed", 1, "--users", 16, "--days", 7,
                 "--activity-threshold", 3, "--out", d]
            )
            assert code == 0
        assert (d1 / "checkins.csv").read_bytes() == (d2 / "checkins.csv").read_bytes()

    def test_evaluate_report(self, corpus_dir, tmp_path):
        out = tmp_path / "report.json"
        code = run(
            [
                "evaluate",
                "--checkins", corpus_dir / "checkins.csv",
                "--edges", corpus_dir / "edges.csv",
                "--activity-threshold", 5,
                "--out", out,
            ]
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert 0.0 <= report["accuracy_sost"] <= 1.0

    def test_evaluate_deterministic(self, corpus_dir, tmp_path):
        reports = []
        for name in ("r1.json", "r2.json"):
            out = tmp_path / name
            assert run(
                [
                    "evaluate",
                    "--checkins", corpus_dir / "checkins.csv",
                    "--edges", corpus_dir / "edges.csv",
                    "--activity-threshold", 5,
                    "--out", out,
                ]
            ) == 0
            reports.append(out.read_text())
        assert reports[0] == reports[1]

    def test_report_expansion(self, corpus_dir, tmp_path):
        rep = tmp_path / "report.json"
        assert run(
            [
                "evaluate",
                "--checkins", corpus_dir / "checkins.csv",
                "--edges", corpus_dir / "edges.csv",
                "--activity-threshold", 5,
                "--out", rep,
            ]
        ) == 0
        outdir = tmp_path / "expanded"
        assert run(["report", "--eval", rep, "--out", outdir]) == 0
        assert (outdir / "per_user.csv").exists()
        assert (outdir / "per_hour.csv").exists()
        assert json.loads((outdir / "summary.json").read_text())["n_scored"] > 0


class TestBounds:
    def test_reference_numbers(self, capsys):
        assert run(["bounds", "--entropy", 3.48, "--locations", 62]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["lower"] == pytest.approx(0.0308, abs=1e-3)
        assert payload["fano"] < 0.31
        assert payload["upper"] is None

    def test_infeasible_inputs(self, capsys):
        assert run(["bounds", "--entropy", 1.0, "--locations", 1]) == 5
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "ValueError"


class TestCohesion:
    def test_k5_clique(self, tmp_path, capsys):
        edges = [(f"n{i}", f"n{j}") for i in range(5) for j in range(i + 1, 5)]
        path = tmp_path / "k5.csv"
        save_edges(edges, path)
        assert run(["cohesion", "--graph", path, "--cliques"]) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert len(lines) == 1
        record = json.loads(lines[0])
        assert record["members"] == [f"n{i}" for i in range(5)]
        assert record["cohesion"] is None  # +inf sentinel

    def test_plexes(self, tmp_path, capsys):
        edges = [("a", "b"), ("b", "c"), ("c", "d"), ("d", "e"), ("e", "a")]
        path = tmp_path / "c5.csv"
        save_edges(edges, path)
        assert run(["cohesion", "--graph", path, "--plexes", "--min-size", 3]) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert all(len(json.loads(line)["members"]) >= 3 for line in lines)


class TestStatsHomophilyCorrelate:
    def test_stats(self, corpus_dir, capsys):
        assert run(
            ["stats", "--checkins", corpus_dir / "checkins.csv",
             "--edges", corpus_dir / "edges.csv", "--activity-threshold", 5]
        ) == 0
        stats = json.loads(capsys.readouterr().out)
        assert stats["n_users"] == 24
        assert "avg_user_entropy" in stats

    def test_homophily_pairs(self, corpus_dir, tmp_path, capsys):
        pairs = tmp_path / "pairs.csv"
        pairs.write_text("u0000,u0001\nu0002,u0003\n")
        assert run(
            [
                "homophily",
                "--checkins", corpus_dir / "checkins.csv",
                "--edges", corpus_dir / "edges.csv",
                "--activity-threshold", 5,
                "--pairs", pairs,
                "--measure", "scos",
            ]
        ) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[0] == "user_a,user_b,value"
        assert len(lines) == 3

    @pytest.mark.parametrize("source", ["global", "home_city", "two_plex"])
    def test_correlate(self, corpus_dir, capsys, source):
        assert run(
            [
                "correlate",
                "--checkins", corpus_dir / "checkins.csv",
                "--edges", corpus_dir / "edges.csv",
                "--activity-threshold", 5,
                "--sample-size", 500,
                "--seed", 7,
                "--source", source,
            ]
        ) == 0
        out = capsys.readouterr().out
        assert out.startswith("measure,")

    def test_train_dump(self, corpus_dir, capsys):
        assert run(
            [
                "train",
                "--checkins", corpus_dir / "checkins.csv",
                "--edges", corpus_dir / "edges.csv",
                "--activity-threshold", 5,
                "--user", "u0000",
            ]
        ) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["format"] == "socmob-context-tree"

    def test_ingest_normalizes(self, corpus_dir, tmp_path, capsys):
        outdir = tmp_path / "norm"
        assert run(
            [
                "ingest",
                "--checkins", corpus_dir / "checkins.csv",
                "--edges", corpus_dir / "edges.csv",
                "--activity-threshold", 5,
                "--out", outdir,
            ]
        ) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["n_active_users"] == 24
        assert (outdir / "checkins.csv").read_bytes() == (
            corpus_dir / "checkins.csv"
        ).read_bytes()


class TestErrorsAndConfig:
    def test_missing_file_exit_code(self, capsys):
        code = run(
            ["stats", "--checkins", "/nonexistent.csv", "--edges", "/nonexistent2.csv"]
        )
        assert code == 2
        assert json.loads(capsys.readouterr().err)["error"] in ("FileNotFoundError", "OSError")

    def test_parse_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("user_id,venue_id,timestamp,lat,lon\nu,v,NOPE,0,0\n")
        edges = tmp_path / "e.csv"
        edges.write_text("user_a,user_b\n")
        code = run(["stats", "--checkins", bad, "--edges", edges])
        assert code == 3

    def test_unknown_flag_exit_code(self):
        assert run(["bounds", "--entropy", 1.0, "--locations", 5, "--bogus"]) == 2

    def test_no_data_exit_code(self, tmp_path, capsys):
        c = tmp_path / "c.csv"
        c.write_text("user_id,venue_id,timestamp,lat,lon\n")
        e = tmp_path / "e.csv"
        e.write_text("user_a,user_b\n")
        code = run(["evaluate", "--checkins", c, "--edges", e])
        assert code == 5

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        conf = tmp_path / "run.conf"
        conf.write_text("entropy = 3.48\nlocations = 62\n")
        assert run(["--config", conf, "bounds", "--locations", "10"]) == 0
        payload = json.loads(capsys.readouterr().out)
        # flag wins over the file value
        assert payload["fano"] == pytest.approx(
            __import__("socmob.evaluation", fromlist=["fano_predictability"])
            .fano_predictability(3.48, 10.0)[0],
            abs=1e-9,
        )

    def test_config_file_parse_error(self, tmp_path):
        conf = tmp_path / "run.conf"
        conf.write_text("not a valid line\n")
        assert run(["--config", conf, "bounds", "--entropy", 1, "--locations", 5]) == 3
