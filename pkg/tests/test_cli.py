import json
from pathlib import Path

import pytest

from toy import ARTIFACTS, TOY, run_toy
from neon.cli import EXIT_CONFIG, EXIT_MISSING, EXIT_OK, EXIT_PROVIDER, main
from neon.config import PipelineConfig, config_from_dict, load_config
from neon.errors import ConfigError

GOLDEN = Path(__file__).parent / "golden"


# -- config ---------------------------------------------------------------------

def test_defaults_validate():
    cfg = load_config(None)
    assert cfg == PipelineConfig()
    assert (cfg.chunking.m, cfg.chunking.stride, cfg.dedup.threshold) == (5, 3, 0.8)
    assert (cfg.retrieval.r, cfg.extraction.k_batch, cfg.extraction.top_p) == (3, 4, 20)


@pytest.mark.parametrize("data", [
    {"chunking": {"m": 5, "stride": 6}},
    {"chunking": {"stride": 0}},
    {"dedup": {"threshold": 1.2}},
    {"extraction": {"variant": "m3"}},
    {"retrieval": {"strategy": "fuzzy"}},
    {"retrieval": {"k": 0}},
    {"chunking": {"window": 4}},
    {"surprise": {}},
    {"chunking": {"m": "5"}},
    {"chunking": {"m": 5.5}},
    {"providers": {"mock": "yes"}},
    {"retrieval": {"k": "ten"}},
    {"eval": []},
])
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(bad)
    assert load_config(TOY / "config.json").providers.mock is True


# -- exit codes -----------------------------------------------------------------

def _stderr_report(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_stride_above_m_is_config_error(tmp_path, capsys):
    code = main(["ingest", "--input", str(TOY / "articles.jsonl"), "--output", str(tmp_path / "c.jsonl"),
                 "--m", "3", "--stride", "4"])
    assert code == EXIT_CONFIG
    rep = _stderr_report(capsys)
    assert rep["error"] == "ConfigError" and rep["stage"] == "ingest" and "stride" in rep["message"]
    assert not (tmp_path / "c.jsonl").exists()


def test_bad_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"chunking": {"stride": 9}}), encoding="utf-8")
    assert main(["--config", str(cfg), "ingest", "--input", "x", "--output", "y"]) == EXIT_CONFIG


def test_missing_input(tmp_path, capsys):
    code = main(["ingest", "--input", str(tmp_path / "none.jsonl"), "--output", str(tmp_path / "c.jsonl")])
    assert code == EXIT_MISSING
    assert _stderr_report(capsys)["error"] == "MissingInput"


def test_live_provider_without_endpoint(tmp_path, capsys):
    chunks = tmp_path / "c.jsonl"
    assert main(["ingest", "--input", str(TOY / "articles.jsonl"), "--output", str(chunks)]) == EXIT_OK
    assert main(["extract", "--chunks", str(chunks), "--output", str(tmp_path / "g.jsonl")]) == EXIT_CONFIG


def test_live_provider_without_credential(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("NEON_CLI_TEST_KEY", raising=False)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"providers": {"llm_endpoint": "http://127.0.0.1:9", "llm_model": "m",
                                             "api_key_env": "NEON_CLI_TEST_KEY"}}), encoding="utf-8")
    chunks = tmp_path / "c.jsonl"
    main(["ingest", "--input", str(TOY / "articles.jsonl"), "--output", str(chunks)])
    code = main(["--config", str(cfg), "extract", "--chunks", str(chunks), "--output", str(tmp_path / "g.jsonl")])
    assert code == EXIT_PROVIDER
    assert not (tmp_path / "g.jsonl").exists()


# -- toy pipeline ---------------------------------------------------------------

@pytest.fixture(scope="module")
def toy_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("toy")
    return out, run_toy(out)


def test_toy_pipeline_emits_every_artifact(toy_run):
    out, codes = toy_run
    assert codes == [EXIT_OK] * 5
    for name in ARTIFACTS:
        assert (out / name).is_file(), name
    answers = [json.loads(l) for l in (out / "answers.jsonl").read_text("utf-8").splitlines()]
    queries = (TOY / "queries.jsonl").read_text("utf-8").splitlines()
    assert len(answers) == len(queries)
    ratings = (out / "eval" / "ratings.jsonl").read_text("utf-8").splitlines()
    assert len(ratings) == 3 * len(answers)


def test_toy_answers_match_golden(toy_run):
    out, _ = toy_run
    assert (out / "answers.jsonl").read_bytes() == (GOLDEN / "toy_answers.jsonl").read_bytes()
    assert (out / "eval" / "report.txt").read_bytes() == (GOLDEN / "toy_report.txt").read_bytes()


def test_toy_pipeline_is_byte_identical(toy_run, tmp_path):
    first, _ = toy_run
    assert run_toy(tmp_path) == [EXIT_OK] * 5
    for name in ARTIFACTS:
        assert (tmp_path / name).read_bytes() == (first / name).read_bytes(), name


def test_unsupported_query_abstains(toy_run):
    out, _ = toy_run
    answers = {a["id"]: a for a in map(json.loads, (out / "answers.jsonl").read_text("utf-8").splitlines())}
    assert answers["q6"]["support"] == []
    assert "not available" in answers["q6"]["answer"]


def test_single_query_to_stdout(toy_run, capsys):
    out, _ = toy_run
    capsys.readouterr()
    code = main(["--mock-providers", "query", "--store", str(out / "store"), "--text", "tessa ruiz",
                 "--date", "20230901", "--k", "2", "--strategy", "generic"])
    assert code == EXIT_OK
    rec = json.loads(capsys.readouterr().out)
    assert rec["reformulated"] == "(Date: September 1, 2023) tessa ruiz"
    assert len(rec["support"]) >= 2 and rec["strategy"] == "generic"


def test_index_chunks_as_baseline(toy_run, tmp_path):
    out, _ = toy_run
    assert main(["--mock-providers", "index", "--input", str(out / "chunks.jsonl"),
                 "--output", str(tmp_path / "s")]) == EXIT_OK
    manifest = json.loads((tmp_path / "s" / "manifest.json").read_text("utf-8"))
    assert manifest["label"] == "newsrag"


def test_m1_extraction(toy_run, tmp_path):
    out, _ = toy_run
    assert main(["--mock-providers", "extract", "--variant", "m1", "--subject", "Q1",
                 "--chunks", str(out / "chunks.jsonl"), "--output", str(tmp_path / "g.jsonl")]) == EXIT_OK
    rows = [json.loads(l) for l in (tmp_path / "g.jsonl").read_text("utf-8").splitlines()]
    assert rows and all(r["subject"] == "Q1" and r["variant"] == "M1" for r in rows)


def test_spikes_subcommand(tmp_path, capsys):
    log = tmp_path / "log.csv"
    rows = ["entity,date,count,distinct_users"]
    for i, c in enumerate([0, 0, 0, 0, 30, 0, 0]):
        rows.append(f"E,202308{i + 1:02d},{c},9")
    rows.append("Short,20230801,4,9")
    log.write_text("\n".join(rows) + "\n", encoding="utf-8")
    assert main(["spikes", "--input", str(log), "--output", str(tmp_path / "s.json")]) == EXIT_OK
    assert json.loads((tmp_path / "s.json").read_text("utf-8")) == {"E": ["20230805", "20230806", "20230807"]}
