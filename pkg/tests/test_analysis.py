import random
import re

import pytest

from deideval.analysis import (
    FpCategory,
    FpSample,
    GroundTruthLabel,
    Severity,
    build_context,
    correlate,
    ground_truth_cir,
    pearson,
    read_annotation_csv,
    sample_false_positives,
    spearman,
    tally_annotations,
    write_annotation_csv,
)
from deideval.errors import InputError
from deideval.scoring import TokenVerdict
from oracles import levenshtein_matrix, pearson_definitional, spearman_definitional


def labels(flags, doc_id="d"):
    return [GroundTruthLabel(doc_id, i, f) for i, f in enumerate(flags)]


def test_ground_truth_cir_values():
    assert ground_truth_cir(labels([False, False])) == 1.0
    assert ground_truth_cir(labels([True, True, True])) == 0.0
    assert ground_truth_cir(labels([True, False, False, False])) == 0.75


def test_ground_truth_cir_requires_labels():
    with pytest.raises(InputError):
        ground_truth_cir([])


def test_pearson_perfect_lines():
    x = [1.0, 2.0, 3.0, 4.0]
    assert pearson(x, [2 * v + 1 for v in x]) == pytest.approx(1.0)
    assert pearson(x, [-v for v in x]) == pytest.approx(-1.0)


def test_pearson_against_definitional_oracle():
    x = [1.0, 2.0, 4.0]
    y = [1.0, 3.0, 2.0]
    assert pearson(x, y) == pytest.approx(pearson_definitional(x, y), abs=1e-12)


def test_pearson_constant_vector_is_undefined():
    assert pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) is None


def test_pearson_validates_shape():
    with pytest.raises(InputError):
        pearson([1.0], [1.0])
    with pytest.raises(InputError):
        pearson([1.0, 2.0], [1.0])


def test_spearman_monotone_transform():
    x = [0.1, 0.5, 0.2, 0.9]
    y = [v**3 + 2 for v in x]  # strictly increasing map
    assert spearman(x, y) == pytest.approx(1.0)
    assert spearman(x, [-v for v in x]) == pytest.approx(-1.0)


def test_spearman_with_ties_matches_oracle():
    x = [1.0, 2.0, 2.0, 3.0]
    y = [4.0, 4.0, 5.0, 6.0]
    assert spearman(x, y) == pytest.approx(spearman_definitional(x, y), abs=1e-12)


def test_correlation_random_against_oracles():
    rng = random.Random(12)
    for _ in range(200):
        n = rng.randrange(3, 51)
        x = [rng.choice([0.0, 0.5, 1.0, rng.random()]) for _ in range(n)]
        y = [rng.choice([0.0, 0.5, 1.0, rng.random()]) for _ in range(n)]
        expect_p = pearson_definitional(x, y)
        expect_s = spearman_definitional(x, y)
        got_p = pearson(x, y)
        got_s = spearman(x, y)
        if expect_p is None:
            assert got_p is None
        else:
            assert got_p == pytest.approx(expect_p, abs=1e-9)
        if expect_s is None:
            assert got_s is None
        else:
            assert got_s == pytest.approx(expect_s, abs=1e-9)


def verdict(i, orig, deid, gold=False, predicted=None):
    if predicted is None:
        predicted = orig != deid
    return TokenVerdict(i, gold, predicted, orig, deid)


def doc_verdicts(words, changed_indices):
    return [
        verdict(i, w, "X" if i in changed_indices else w)
        for i, w in enumerate(words)
    ]


def test_sampling_clamps_to_pool():
    vs = doc_verdicts(["a", "b", "c", "d"], {0, 2, 3})
    samples = sample_false_positives([("f.txt", vs)], 500, seed=1)
    assert len(samples) == 3
    assert {s.original_token for s in samples} == {"a", "c", "d"}


def test_sampling_deterministic():
    vs = doc_verdicts([f"w{i}" for i in range(10)], set(range(10)))
    first = sample_false_positives([("f.txt", vs)], 2, seed=77)
    second = sample_false_positives([("f.txt", vs)], 2, seed=77)
    assert first == second
    assert len(first) == 2
    assert len({(s.file_name, s.original_token) for s in first}) == 2


def test_sampling_empty_pool_warns(caplog):
    vs = doc_verdicts(["a", "b"], set())
    with caplog.at_level("WARNING"):
        assert sample_false_positives([("f.txt", vs)], 5, seed=0) == []
    assert any("no false positives" in r.message for r in caplog.records)


def test_sampling_skips_gold_tokens():
    vs = [verdict(0, "Mary", "NAME", gold=True), verdict(1, "aspirin", "GONE")]
    samples = sample_false_positives([("f.txt", vs)], 10, seed=0)
    assert [s.original_token for s in samples] == ["aspirin"]


def test_sample_edit_distance_matches_dp_oracle():
    vs = [verdict(0, "aspirin", "")]
    [s] = sample_false_positives([("f.txt", vs)], 1, seed=0)
    assert s.edit_distance == levenshtein_matrix("aspirin", "") == 7
    assert s.category is FpCategory.UNKNOWN
    assert s.severity is Severity.NOT_APPLICABLE


def test_build_context_mid_document():
    words = ["one", "two", "three", "four", "five", "six"]
    vs = doc_verdicts(words, {3})
    assert build_context(vs, 3) == "… / two / three / four / X / five / six / …"


def test_build_context_document_start():
    vs = doc_verdicts(["alpha", "beta", "gamma"], {0})
    assert build_context(vs, 0) == "… / alpha / X / beta / gamma / …"


def test_build_context_single_token():
    vs = doc_verdicts(["only"], {0})
    assert build_context(vs, 0) == "… / only / X / …"


def test_build_context_regex_invariant():
    pattern = re.compile(r"^… / (.+ / ){1,5}…$")
    words = [f"w{i}" for i in range(7)]
    vs = doc_verdicts(words, set(range(7)))
    for i in range(len(words)):
        assert pattern.match(build_context(vs, i)), build_context(vs, i)


def test_build_context_index_range():
    with pytest.raises(InputError):
        build_context([], 0)


def sample_with(category, severity=Severity.NOT_APPLICABLE):
    return FpSample("f", 1, "a", "b", "… / a / b / …", category, severity)


def test_tally_matches_published_row():
    samples = (
        [sample_with(FpCategory.CLINICALLY_RELEVANT, Severity.LOW)] * 22
        + [sample_with(FpCategory.CLINICALLY_RELEVANT, Severity.HIGH)] * 67
        + [sample_with(FpCategory.CLINICALLY_IRRELEVANT)] * 168
        + [sample_with(FpCategory.PROVIDER_CLINIC_INFO)] * 180
        + [sample_with(FpCategory.INSENSITIVE_IDENTIFIER)] * 39
        + [sample_with(FpCategory.CORRECT_DEID_MISSED_BY_HUMAN)] * 23
        + [sample_with(FpCategory.UNKNOWN)] * 1
    )
    assert len(samples) == 500
    report = tally_annotations(samples)
    assert report.crc_display == "89 (18)"
    assert report.low == 22
    assert report.high == 67
    assert report.low + report.high == report.crc_count


def test_tally_all_unknown():
    report = tally_annotations([sample_with(FpCategory.UNKNOWN)] * 10)
    assert report.crc_count == 0
    assert report.crc_display == "0 (0)"


def test_tally_empty():
    report = tally_annotations([])
    assert report.total == 0
    assert report.low == report.high == 0
    assert report.crc_display == "0 (0)"


def test_tally_rounds_half_away_from_zero():
    samples = [sample_with(FpCategory.CLINICALLY_RELEVANT, Severity.LOW)] * 1 + [
        sample_with(FpCategory.UNKNOWN)
    ] * 39  # 1/40 = 2.5% -> 3
    assert tally_annotations(samples).crc_percent == 3


def test_fpsample_severity_invariant():
    with pytest.raises(InputError):
        FpSample("f", 1, "a", "b", "c", FpCategory.CLINICALLY_IRRELEVANT, Severity.HIGH)
    with pytest.raises(InputError):
        FpSample("f", 1, "a", "b", "c", FpCategory.CLINICALLY_RELEVANT, Severity.NOT_APPLICABLE)


def test_correlate_trivials():
    truth = {"a": 0.2, "b": 0.5, "c": 0.9}
    same = correlate(dict(truth), truth, "CIRE")
    assert same.pearson_r == pytest.approx(1.0)
    assert same.spearman_rho == pytest.approx(1.0)
    flipped = correlate({k: 1 - v for k, v in truth.items()}, truth)
    assert flipped.pearson_r == pytest.approx(-1.0)
    assert flipped.spearman_rho == pytest.approx(-1.0)


def test_correlate_reports_symmetric_difference():
    with pytest.raises(InputError) as err:
        correlate({"a": 1.0, "b": 0.0}, {"b": 1.0, "c": 0.0})
    assert "a" in str(err.value) and "c" in str(err.value)


def test_correlate_five_doc_fixture_matches_oracles():
    metric = {"d1": 0.9, "d2": 0.4, "d3": 0.7, "d4": 0.7, "d5": 0.1}
    truth = {"d1": 1.0, "d2": 0.5, "d3": 0.8, "d4": 0.6, "d5": 0.2}
    report = correlate(metric, truth, "CIRE")
    keys = sorted(metric)
    x = [metric[k] for k in keys]
    y = [truth[k] for k in keys]
    assert report.pearson_r == pytest.approx(pearson_definitional(x, y), abs=1e-12)
    assert report.spearman_rho == pytest.approx(spearman_definitional(x, y), abs=1e-12)
    assert report.n == 5


def test_annotation_csv_round_trip(tmp_path, fp_samples):
    path = tmp_path / "samples.csv"
    write_annotation_csv(path, fp_samples)
    content = path.read_text(encoding="utf-8")
    assert content.splitlines()[0] == (
        "file_name,edit_distance,original_token,deid_token,context,category,severity"
    )
    assert read_annotation_csv(path) == fp_samples


def test_annotation_csv_quotes_commas(tmp_path):
    tricky = FpSample("f,with,commas.txt", 2, 'quote"tok', "x", "… / a, b / x / …")
    path = tmp_path / "samples.csv"
    write_annotation_csv(path, [tricky])
    assert read_annotation_csv(path) == [tricky]


def test_annotation_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("wrong,header\n1,2\n")
    with pytest.raises(InputError):
        read_annotation_csv(path)
