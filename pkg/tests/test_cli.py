"""CLI behavior: commands, output, exit codes."""

import json

from hygieia.cli import EXIT_CONFIG, EXIT_OK, EXIT_PIPELINE, EXIT_USAGE, main

RARE_SCRIPT = [
    {"role": "KnowledgeExtractor", "response": "```\ncontractures\n```", "times": "inf"},
    {"role": "KnowledgeManager", "response": "CONTEXT: evidence", "times": "inf"},
    {
        "role": "Summary",
        "response": "ANSWER: Distal arthrogryposis, type 10 | CONFIDENCE: 90",
        "times": "inf",
        "prompt_tokens": 12,
        "completion_tokens": 9,
    },
    {"role": "Verifier", "response": "VERDICT: ACCEPT", "times": "inf"},
]


def write_script(tmp_path, rules=None, name="script.json"):
    path = tmp_path / name
    path.write_text(json.dumps(RARE_SCRIPT if rules is None else rules))
    return str(path)


def run(argv):
    return main(argv)


class TestDiagnoseCommand:
    def test_scripted_run_prints_winner_and_cf(self, tmp_path, capsys):
        code = run(["diagnose", "--phenotypes", "toe walking; contractures",
                    "--script", write_script(tmp_path)])
        out = capsys.readouterr().out
        assert code == EXIT_OK
        assert "Distal arthrogryposis, type 10" in out
        assert "c_f: 90" in out
        assert "route: Rare" in out

    def test_missing_phenotypes_usage_error(self, tmp_path, capsys):
        code = run(["diagnose", "--script", write_script(tmp_path)])
        assert code == EXIT_USAGE

    def test_trace_flag_prints_ordered_stages(self, tmp_path, capsys):
        code = run(["diagnose", "--phenotypes", "toe walking", "--trace",
                    "--script", write_script(tmp_path)])
        out = capsys.readouterr().out
        assert code == EXIT_OK
        stages = [line.strip().split("]")[0].strip("[ ") for line in out.splitlines() if line.strip().startswith("[")]
        # Default config samples the summary agent 3 times.
        assert stages == ["Route", "Extract", "Manage",
                          "Summarize", "Summarize", "Summarize", "Aggregate", "Verify"]

    def test_pipeline_error_exit_2(self, tmp_path, capsys):
        code = run(["diagnose", "--phenotypes", "toe walking",
                    "--script", write_script(tmp_path, rules=[])])
        assert code == EXIT_PIPELINE


class TestGenesCommand:
    def test_scripted_gene_run(self, tmp_path, capsys):
        script = write_script(
            tmp_path,
            rules=[
                {"role": "KnowledgeExtractor", "response": "```\nnalcn\n```", "times": "inf"},
                {"role": "KnowledgeManager", "response": "CONTEXT: x", "times": "inf"},
                {
                    "role": "Summary",
                    "response": "ANSWER: NALCN | CONFIDENCE: 90\nALT: MYH3 | CONFIDENCE: 60",
                    "times": "inf",
                },
                {"role": "Verifier", "response": "VERDICT: ACCEPT", "times": "inf"},
            ],
        )
        code = run(["genes", "--phenotypes", "hypotonia; contractures", "--top", "2",
                    "--script", script])
        out = capsys.readouterr().out
        assert code == EXIT_OK
        assert "1. NALCN" in out
        assert "2. MYH3" in out

    def test_missing_phenotypes(self, tmp_path):
        assert run(["genes", "--script", write_script(tmp_path)]) == EXIT_USAGE


def write_router_data(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")


class TestRouterCommands:
    def test_fit_eval_round_trip_perfect_separation(self, tmp_path, capsys):
        train = tmp_path / "train.jsonl"
        test = tmp_path / "test.jsonl"
        common = [{"phenotypes": ["cough", "fever", "sore throat"], "label": "Common"}] * 6
        rare = [{"phenotypes": ["arthrogryposis", "contracture", "hypotonia"], "label": "Rare"}] * 6
        write_router_data(train, common + rare)
        write_router_data(test, common[:2] + rare[:2])
        model_path = tmp_path / "router.json"

        assert run(["router", "fit", "--train", str(train), "--out", str(model_path), "--k", "3"]) == EXIT_OK
        assert model_path.exists()
        assert run(["router", "eval", "--model", str(model_path), "--test", str(test)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "accuracy: 1.0000" in out

    def test_fit_twice_stable(self, tmp_path):
        train = tmp_path / "train.jsonl"
        write_router_data(train, [{"phenotypes": ["a b"], "label": "Common"},
                                  {"phenotypes": ["c d"], "label": "Rare"}])
        one = tmp_path / "m1.json"
        two = tmp_path / "m2.json"
        run(["router", "fit", "--train", str(train), "--out", str(one), "--k", "1"])
        run(["router", "fit", "--train", str(train), "--out", str(two), "--k", "1"])
        assert one.read_text() == two.read_text()

    def test_eval_dimension_mismatch_errors(self, tmp_path, capsys):
        train = tmp_path / "train.jsonl"
        write_router_data(train, [{"phenotypes": ["a"], "label": "Common"},
                                  {"phenotypes": ["b"], "label": "Rare"}])
        model_path = tmp_path / "router.json"
        run(["router", "fit", "--train", str(train), "--out", str(model_path), "--k", "1", "--dim", "16"])
        # Corrupt the model dimension so stored vectors disagree with it.
        doc = json.loads(model_path.read_text())
        doc["points"][0]["v"] = doc["points"][0]["v"][:8]
        model_path.write_text(json.dumps(doc))
        test = tmp_path / "test.jsonl"
        write_router_data(test, [{"phenotypes": ["a"], "label": "Common"}])
        code = run(["router", "eval", "--model", str(model_path), "--test", str(test)])
        assert code == EXIT_PIPELINE


def write_dataset(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")


class TestBenchCommand:
    def test_perfect_oracle_all_ones(self, tmp_path, capsys):
        dataset = tmp_path / "data.jsonl"
        write_dataset(dataset, [
            {"id": f"c{i}", "phenotypes": ["toe walking"], "gold_diseases": ["Distal arthrogryposis, type 10"]}
            for i in range(4)
        ])
        report_path = tmp_path / "out" / "report.json"
        code = run(["bench", "--dataset", str(dataset), "--task", "diagnose",
                    "--k", "1,5,10", "--script", write_script(tmp_path),
                    "--report", str(report_path)])
        out = capsys.readouterr().out
        assert code == EXIT_OK
        assert report_path.exists()
        assert report_path.with_suffix(".tsv").exists()
        assert report_path.with_suffix(".png").exists()
        report = json.loads(report_path.read_text())
        assert report["per_k"] == {"1": 1.0, "5": 1.0, "10": 1.0}
        assert "1\t1.0000" in out

    def test_never_match_all_zero(self, tmp_path):
        dataset = tmp_path / "data.jsonl"
        write_dataset(dataset, [
            {"id": "c0", "phenotypes": ["toe walking"], "gold_diseases": ["something else"]}
        ])
        report_path = tmp_path / "report.json"
        code = run(["bench", "--dataset", str(dataset), "--task", "diagnose",
                    "--k", "1,5", "--script", write_script(tmp_path),
                    "--report", str(report_path)])
        assert code == EXIT_OK
        report = json.loads(report_path.read_text())
        assert report["per_k"] == {"1": 0.0, "5": 0.0}

    def test_report_round_trips_losslessly(self, tmp_path):
        dataset = tmp_path / "data.jsonl"
        write_dataset(dataset, [
            {"id": "c0", "phenotypes": ["toe walking"], "gold_diseases": ["Distal arthrogryposis, type 10"]}
        ])
        report_path = tmp_path / "report.json"
        run(["bench", "--dataset", str(dataset), "--task", "diagnose", "--k", "1",
             "--script", write_script(tmp_path), "--report", str(report_path)])
        doc = json.loads(report_path.read_text())
        assert json.loads(json.dumps(doc)) == doc

    def test_bad_k_list_usage_error(self, tmp_path):
        dataset = tmp_path / "data.jsonl"
        write_dataset(dataset, [{"id": "c0", "phenotypes": ["x"], "gold_diseases": ["y"]}])
        code = run(["bench", "--dataset", str(dataset), "--task", "diagnose",
                    "--k", "zero", "--script", write_script(tmp_path),
                    "--report", str(tmp_path / "r.json")])
        assert code == EXIT_USAGE


class TestServeCommand:
    def test_bad_config_exit_78(self, tmp_path, capsys):
        bad = tmp_path / "config.json"
        bad.write_text("{not json")
        assert run(["serve", "--config", str(bad)]) == EXIT_CONFIG

    def test_missing_config_file_exit_78(self, tmp_path):
        assert run(["serve", "--config", str(tmp_path / "absent.json")]) == EXIT_CONFIG
