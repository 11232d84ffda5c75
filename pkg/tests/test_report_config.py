import configparser

import pytest

from interprompt.config import ConfigError, dump_template, load_settings
from interprompt.corpus import Post
from interprompt.losslab import LossConfig
from interprompt.prompts import PromptTemplate, build_finetune_record
from interprompt.report import (
    EvaluationReport,
    MissingIdsError,
    append_manifest,
    evaluate,
    read_manifest,
    render_markdown,
    run_id,
    write_csv,
)

T = PromptTemplate()
GOLD = [
    Post("a", "I feel alone", 1, 0, tbe_cue="feel alone"),
    Post("b", "I am a burden", 0, 1, pbu_cue="a burden"),
    Post("c", "Sunny day", 0, 0),
]


def gold_rows():
    return [{"id": p.id, "completion": build_finetune_record(p, T).completion} for p in GOLD]


def test_evaluate_counts_transport_errors_as_unparseable():
    rows = gold_rows()
    rows[0]["completion"] = None
    rows[1]["completion"] = "???"
    report = evaluate(rows, GOLD, T)
    assert report.counts == {"exact": 1, "repaired": 0, "unparseable": 2, "transport_errors": 1}
    assert report.classification["tbe"].recall == 0.0


def test_evaluate_subset_of_gold_is_allowed():
    report = evaluate(gold_rows()[:2], GOLD, T)
    assert report.n_predictions == 2


def test_missing_ids_listed():
    with pytest.raises(MissingIdsError) as info:
        evaluate([{"id": "zz", "completion": ""}], GOLD, T)
    assert info.value.missing == ["zz"]
    with pytest.raises(ValueError):
        evaluate([], GOLD, T)


def test_generation_undefined_without_gold_cues():
    gold = [Post("x", "plain", 0, 0)]
    report = evaluate([{"id": "x", "completion": " " + T.rho1_prefix + "neither belong nor burden"}], gold, T)
    assert report.generation == {"tbe": None, "pbu": None}
    text = render_markdown(report)
    assert "no gold cues" in text


def test_report_serialization_round_trip(tmp_path):
    report = evaluate(gold_rows(), GOLD, T, run="r1")
    again = EvaluationReport.from_dict(report.to_dict())
    assert render_markdown(again) == render_markdown(report)
    write_csv(report, tmp_path / "r.csv")
    rows = (tmp_path / "r.csv").read_text().splitlines()
    assert rows[1].startswith("r1,classification,tbe,precision,")
    assert all(0.0 <= v <= 1.0 for s in report.classification.values()
               for v in (s.precision, s.recall, s.f1, s.accuracy))


def test_manifest_is_append_only_and_run_id_deterministic(tmp_path):
    path = tmp_path / "m.jsonl"
    first = append_manifest(path, "evaluate", {"x": 1})
    line = path.read_text()
    second = append_manifest(path, "evaluate", {"x": 1})
    assert path.read_text().startswith(line)
    assert first["run_id"] == second["run_id"] == run_id("evaluate", {"x": 1})
    assert run_id("evaluate", {"x": 2}) != first["run_id"]
    assert len(read_manifest(path)) == 2


def write_ini(tmp_path, text):
    path = tmp_path / "c.ini"
    path.write_text(text)
    return path


def test_settings_defaults():
    settings = load_settings(None)
    assert settings.template == T and settings.loss == LossConfig() and settings.backend == {}


def test_settings_full(tmp_path):
    path = write_ini(tmp_path, '[template]\nempty_cue_token = "n/a"\nlabel_11 = "both"\n\n'
                               '[backend]\nbase_url = http://h/v1\ntemperature = 0.7\nstop = ["\\n###\\n", "END"]\n\n'
                               '[loss]\nlambda2 = 0.5\n')
    s = load_settings(path)
    assert s.template.empty_cue_token == "n/a" and s.template.label_lexicon[1, 1] == "both"
    assert s.backend == {"base_url": "http://h/v1", "temperature": 0.7, "stop": ("\n###\n", "END")}
    assert s.loss == LossConfig(1.0, 0.5, 1.0)


@pytest.mark.parametrize(
    "text",
    [
        "[backend]\napi_key = sk-123\n",
        "[backend]\nflavour = x\n",
        "[backend]\nmax_parallel = many\n",
        "[loss]\nlambda9 = 1\n",
        "[loss]\nlambda1 = 0\nlambda2 = 0\nlambda3 = 0\n",
        "[template]\nstop_sequence = \"\\n\"\n",
        "[other]\n",
        "not an ini file",
    ],
)
def test_settings_errors(tmp_path, text):
    with pytest.raises(ConfigError):
        load_settings(write_ini(tmp_path, text))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_settings(tmp_path / "none.ini")


def test_dump_template_round_trip(tmp_path):
    custom = PromptTemplate(separator="\n\nAnswer:\n\n")
    path = write_ini(tmp_path, dump_template(custom))
    assert load_settings(path).template == custom
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string(dump_template(custom))
    assert parser["template"]["separator"] == '"\\n\\nAnswer:\\n\\n"'
