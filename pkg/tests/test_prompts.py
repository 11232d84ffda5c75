import json
import warnings

import pytest
from hypothesis import given

from interprompt.corpus import Post
from interprompt.prompts import (
    LABEL_PAIRS,
    ExemplarLeakError,
    NonCanonicalShotsWarning,
    PromptError,
    PromptTemplate,
    build_completion,
    build_finetune_record,
    build_finetune_records,
    build_nshot_prompt,
    count_exemplar_blocks,
    inference_prompt,
    read_finetune_jsonl,
    write_finetune_jsonl,
)
from interprompt.synthetic import synthetic_posts

from strategies import cues


def test_default_separator(template):
    assert template.separator == "\n\nIntent:\n\n"
    assert len(template.separator) == 11


def test_both_factors_phrase(template):
    story = build_completion(Post("a", "x", 1, 1, "x", "x"), template)
    assert story.label_phrase == "both belong and burden"


def test_neither_uses_empty_token(template):
    story = build_completion(Post("a", "nice day", 0, 0), template)
    assert story.label_phrase == "neither belong nor burden"
    assert story.tbe_cue == story.pbu_cue == "none"


def test_tbe_only_serialization_by_hand(template):
    story = build_completion(Post("a", "I feel alone", 1, 0, tbe_cue="feel alone"), template)
    expected = (
        "This given sentence represents belong"
        "\nWords those indicate belong expression in the sentence: feel alone"
        "\nWords those indicate burden expression in the sentence: none"
    )
    assert story.serialized == expected


def test_length_accounting(template):
    post = Post("a", "I feel alone, a burden", 1, 1, "feel alone", "a burden")
    s = build_completion(post, template)
    parts = (template.rho1_prefix, s.label_phrase, template.rho2_prefix, s.tbe_cue, template.rho3_prefix, s.pbu_cue)
    assert len(s.serialized) == sum(map(len, parts))


def test_finetune_record_format(template):
    record = build_finetune_record(Post("a", "I am a burden", 0, 1, pbu_cue="I am a burden"), template)
    assert record.prompt == "I am a burden\n\nIntent:\n\n"
    assert record.completion.startswith(" This given sentence represents burden")
    assert record.completion.endswith("\n###\n")
    assert json.loads(record.to_json()) == {"prompt": record.prompt, "completion": record.completion}


def test_stop_sequence_in_text_rejected(template):
    with pytest.raises(PromptError):
        build_finetune_record(Post("a", "before\n###\nafter", 0, 0), template)


def test_record_count_matches_train_split(template):
    posts = synthetic_posts((700, 300, 600, 372), prefix="tr")
    assert len(posts) == 1972
    assert len(build_finetune_records(posts, template)) == 1972


def test_jsonl_round_trip(tmp_path, template, fixture_posts):
    records = build_finetune_records(fixture_posts, template)
    path = tmp_path / "ft.jsonl"
    assert write_finetune_jsonl(records, path) == len(fixture_posts)
    assert read_finetune_jsonl(path) == records


def test_zero_shot_prompt(template, fixture_posts):
    target = fixture_posts[0]
    prompt = build_nshot_prompt(target, [], template)
    assert prompt.startswith(template.instruction)
    assert prompt.endswith(target.text + template.separator)
    assert prompt.count(target.text) == 1
    assert count_exemplar_blocks(prompt, template) == 0
    assert template.stop_sequence not in prompt


@pytest.mark.parametrize("n", [0, 1, 8])
def test_exemplar_block_counts(template, fixture_posts, n):
    target, pool = fixture_posts[0], fixture_posts[1:]
    prompt = build_nshot_prompt(target, pool[:n], template)
    assert count_exemplar_blocks(prompt, template) == n
    assert prompt.count(template.stop_sequence) == n
    assert prompt.endswith(target.text + template.separator)


def test_one_shot_with_both_factors_exemplar(template, fixture_posts):
    exemplar = next(p for p in fixture_posts if p.labels == (1, 1))
    target = next(p for p in fixture_posts if p.labels == (0, 0))
    prompt = build_nshot_prompt(target, [exemplar], template)
    head, _, _ = prompt.rpartition(target.text)
    assert head.count("both belong and burden") == 1
    assert prompt.count("both belong and burden") == 1


def test_leak_rejected(template, fixture_posts):
    with pytest.raises(ExemplarLeakError):
        build_nshot_prompt(fixture_posts[0], fixture_posts[:2], template)


def test_non_canonical_count_warns(template, fixture_posts):
    with pytest.warns(NonCanonicalShotsWarning):
        prompt = build_nshot_prompt(fixture_posts[0], fixture_posts[1:4], template)
    assert count_exemplar_blocks(prompt, template) == 3
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_nshot_prompt(fixture_posts[0], fixture_posts[1:9], template)


def test_inference_prompt(template):
    assert inference_prompt(Post("a", "hi", 0, 0), template) == "hi\n\nIntent:\n\n"


def test_deterministic(template, fixture_posts):
    a = build_nshot_prompt(fixture_posts[0], fixture_posts[1:9], template)
    b = build_nshot_prompt(fixture_posts[0], fixture_posts[1:9], PromptTemplate())
    assert a == b


@pytest.mark.parametrize(
    "kwargs",
    [
        {"label_lexicon": {(0, 0): "a", (1, 0): "b", (0, 1): "c"}},
        {"label_lexicon": {(0, 0): "a", (1, 0): "A", (0, 1): "c", (1, 1): "d"}},
        {"stop_sequence": "\n"},
        {"rho2_prefix": "\n###\nWords: "},
        {"separator": ""},
        {"empty_cue_token": " "},
    ],
)
def test_invalid_templates(kwargs):
    with pytest.raises(PromptError):
        PromptTemplate(**kwargs)


def test_template_config_round_trip(template):
    section = template.to_config_section()
    assert PromptTemplate.from_config_section(section) == template
    custom = PromptTemplate(separator="\n\nAnswer:\n\n", empty_cue_token="n/a")
    assert PromptTemplate.from_config_section(custom.to_config_section()) == custom
    assert custom.digest() != template.digest()


@given(cues, cues)
def test_builder_output_is_exactly_reconstructible(tbe_cue, pbu_cue):
    template = PromptTemplate()
    for tbe, pbu in LABEL_PAIRS:
        post = Post("p", f"{tbe_cue} {pbu_cue}", tbe, pbu, tbe_cue if tbe else None, pbu_cue if pbu else None)
        s = build_completion(post, template)
        assert s.serialized == (template.rho1_prefix + s.label_phrase + template.rho2_prefix + s.tbe_cue
                                + template.rho3_prefix + s.pbu_cue)
