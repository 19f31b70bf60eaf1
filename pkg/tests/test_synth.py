import json
import statistics

import pytest

from biaslens.bias_detector import BiasClass, ClassifiedKeyword, DetectorConfig, detect_bias, run_detection
from biaslens.errors import ConfigInvalid
from biaslens.keyword_index import select_keywords
from biaslens.log_model import (
    CANONICAL_PAIRS,
    Action,
    AgeBucket,
    Gender,
    build_dataset,
    load_articles,
    load_events,
)
from biaslens.synth import (
    GroundTruth,
    PlantedBias,
    SynthConfig,
    TruthItem,
    default_vocabulary,
    evaluate_detection,
    generate_dataset,
    overall_score,
    simulate,
    split_users,
)
from conftest import small_config

MF, YM, MO, OY = CANONICAL_PAIRS
CLICK, LIKE = Action.CLICK, Action.LIKE


def test_split_users():
    cells = split_users(10_000)
    assert len(cells) == 6 and sum(cells.values()) == 10_000
    assert max(cells.values()) - min(cells.values()) <= 1


def test_default_vocabulary_places_planted_words():
    vocab = default_vocabulary(200, ["mother", "police"])
    assert len(vocab) == len(set(vocab)) == 200
    assert vocab.index("mother") == 10 and vocab.index("police") == 60


@pytest.mark.parametrize(
    "override, field",
    [
        ({"base_click_prob": 1.5}, "base_click_prob"),
        ({"like_given_click_prob": 0}, "like_given_click_prob"),
        ({"n_articles": {}}, "n_articles"),
        ({"planted_biases": [{"keyword": "x", "value": "male", "multiplier": 0}]}, "planted_biases"),
        ({"min_title_keywords": 7}, "min_title_keywords"),
        ({"colour": "red"}, "colour"),
    ],
)
def test_config_invalid(override, field):
    with pytest.raises(ConfigInvalid) as e:
        small_config(**override)
    assert field in e.value.problems


def test_config_round_trip():
    cfg = small_config()
    assert SynthConfig.from_dict(cfg.to_dict()) == cfg


def test_same_seed_byte_identical(tmp_path):
    cfg = small_config(n_articles={"society": 60}, n_users=600)
    a = generate_dataset(cfg, tmp_path / "a")
    b = generate_dataset(cfg, tmp_path / "b")
    for name in ("events.jsonl", "articles.jsonl", "ground_truth.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    c = generate_dataset(small_config(n_articles={"society": 60}, n_users=600, seed=4), tmp_path / "c")
    assert c.events_path.read_bytes() != a.events_path.read_bytes()
    assert a.n_events == b.n_events > 0


def test_files_parse_with_log_model(small_files):
    events = load_events(str(small_files / "events.jsonl"), strict=True)
    articles = load_articles(str(small_files / "articles.jsonl"), strict=True)
    assert len(events) > 0 and len(articles) == 600
    truth = json.loads((small_files / "ground_truth.json").read_text())
    assert truth == [{"action": "click", "axis": "gender", "keyword": "mother",
                      "multiplier": 3.0, "value": "female"}]


def test_titles_are_keyword_bags(small_sim):
    vocab = set(small_sim.config.words)
    for art in small_sim.articles:
        words = art.title.split()
        assert 2 <= len(words) <= 6 and len(set(words)) == len(words) and set(words) <= vocab


def test_likes_never_exceed_clicks(small_sim):
    for cat in ("politics", "society"):
        ds = build_dataset(small_sim.events, small_sim.articles, cat, min_clicks=0)
        assert ds.diagnostics.like_exceeds_click_cells == 0


def test_planted_keyword_in_enough_titles(small_sim):
    n = sum("mother" in a.title.split() for a in small_sim.articles)
    assert n >= 10


# ---------------------------------------------------------------- ground truth

def test_ground_truth_directions():
    truth = GroundTruth.from_planted([
        PlantedBias("mother", Gender.FEMALE, 3.0),
        PlantedBias("bike", AgeBucket.MIDDLE, 0.5),
        PlantedBias("noop", Gender.MALE, 1.0),
    ])
    clicks = {(i.keyword, i.pair.label, i.direction) for i in truth.items if i.action is CLICK}
    assert clicks == {
        ("mother", "male-female", Gender.FEMALE),
        ("bike", "young-middle", AgeBucket.YOUNG),
        ("bike", "middle-older", AgeBucket.OLDER),
    }
    assert {i for i in truth.items if i.action is LIKE} == {
        TruthItem(i.keyword, i.pair, i.direction, LIKE) for i in truth.items if i.action is CLICK
    }


def test_like_only_bias_stays_on_likes():
    truth = GroundTruth.from_planted([PlantedBias("kw", Gender.MALE, 2.0, LIKE)])
    assert {i.action for i in truth.items} == {LIKE}


# ---------------------------------------------------------------- scoring

TRUTH = GroundTruth.from_planted([PlantedBias(f"k{i}", Gender.FEMALE, 3.0) for i in range(10)])


def detected(keywords, toward=Gender.FEMALE):
    return [(k, MF, CLICK, toward) for k in keywords]


def test_exact_detection():
    s = evaluate_detection(detected([f"k{i}" for i in range(10)]), TRUTH)[(MF, CLICK)]
    assert (s.precision, s.recall) == (1.0, 1.0)


def test_empty_detection():
    s = evaluate_detection([], TRUTH)[(MF, CLICK)]
    assert s.recall == 0.0 and s.precision == 1.0 and s.zero_detections


def test_partial_detection():
    s = evaluate_detection(detected([f"k{i}" for i in range(8)] + ["x", "y"]), TRUTH)[(MF, CLICK)]
    assert (s.precision, s.recall) == (0.8, 0.8)


def test_wrong_direction_is_a_miss():
    s = overall_score(detected(["k0"], toward=Gender.MALE), TRUTH)
    assert s.true_positives == 0 and s.n_detected == 1


def test_scoring_accepts_classified_keywords():
    ck = ClassifiedKeyword("k0", MF, CLICK, "c", BiasClass.LOWER_INTERCEPT, Gender.FEMALE)
    unb = ClassifiedKeyword("k1", MF, CLICK, "c", BiasClass.UNBIASED)
    s = overall_score([ck, unb], TRUTH)
    assert (s.true_positives, s.n_detected, s.recall) == (1, 1, 0.1)


# ---------------------------------------------------------------- generator behaviour

def test_mother_detected_toward_female(society, small_sim):
    ds, idx = society
    out = detect_bias(ds, idx)
    score = evaluate_detection(out, small_sim.truth)[(MF, CLICK)]
    assert score.recall == 1.0


def _mother_deviation(multiplier, seed):
    cfg = small_config(seed=seed, n_users=1500, n_articles={"society": 250}, base_click_prob=0.08,
                       planted_biases=[{"keyword": "mother", "value": "female", "multiplier": multiplier}])
    sim = simulate(cfg)
    ds = build_dataset(sim.events, sim.articles, "society")
    idx = select_keywords(ds.catalog, top_n=60)
    cell = run_detection(ds, idx, [MF], DetectorConfig(r2_threshold=0.0)).cell(MF, CLICK)
    fits = {a.keyword: a for a in cell.analyses}
    mean = statistics.fmean(a.intercept for a in cell.analyses)
    return mean - fits["mother"].intercept


@pytest.mark.slow
def test_larger_multiplier_pushes_intercept_further():
    devs = [statistics.fmean(_mother_deviation(m, s) for s in range(10)) for m in (1.0, 1.5, 2.5, 4.0)]
    assert devs == sorted(devs)
    assert devs[-1] > devs[0] + 0.1
