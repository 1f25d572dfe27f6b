"""Participation scoring, paired Likert diffs, and the signed-rank test."""

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plumewatch.errors import ValidationError
from plumewatch.survey import (
    CSV_COLUMNS,
    InvalidResponseError,
    NoInformationError,
    SurveyResponse,
    average_ranks,
    participation_levels,
    read_responses_csv,
    run_study,
    validate_response,
    variable_scores,
    wilcoxon_right,
    write_study,
)

from oracles import wilcoxon_right_enumerated


def make_response(rid="r1", explore=(1, 0, 1, 1, 0), document=(1, 1, 0),
                  share=(0, 1, 0, 1), browsing=3, discussed=4, meetings=6,
                  before=None, after=None):
    before = before or {
        "awareness": (3, 4), "self_efficacy": (3, 3), "community_sense": (2, 3)
    }
    after = after or {
        "awareness": (4, 5), "self_efficacy": (4, 4), "community_sense": (3, 4)
    }
    return SurveyResponse(
        respondent_id=rid,
        explore_choices=tuple(bool(v) for v in explore),
        document_choices=tuple(bool(v) for v in document),
        share_choices=tuple(bool(v) for v in share),
        browsing=browsing,
        people_discussed=discussed,
        meetings=meetings,
        age_band="55-64",
        education_band="master",
        before=before,
        after=after,
    )


# --- participation + scores -----------------------------------------------


def test_participation_counts():
    assert participation_levels(make_response()) == (3, 2, 2)


def test_participation_bounds():
    none = make_response(explore=(0,) * 5, document=(0,) * 3, share=(0,) * 4)
    full = make_response(explore=(1,) * 5, document=(1,) * 3, share=(1,) * 4)
    assert participation_levels(none) == (0, 0, 0)
    assert participation_levels(full) == (5, 3, 4)


def test_variable_scores_arithmetic():
    r = make_response(before={"awareness": (3, 4), "self_efficacy": (1, 1),
                              "community_sense": (5, 5)},
                      after={"awareness": (4, 5), "self_efficacy": (1, 1),
                             "community_sense": (1, 1)})
    assert variable_scores(r, "awareness") == (3.5, 4.5, 1.0)
    assert variable_scores(r, "self_efficacy") == (1.0, 1.0, 0.0)
    assert variable_scores(r, "community_sense") == (5.0, 1.0, -4.0)


def test_variable_scores_incomplete_pair():
    r = make_response(after={"awareness": (4, None), "self_efficacy": (4, 4),
                             "community_sense": (3, 4)})
    with pytest.raises(InvalidResponseError):
        variable_scores(r, "awareness")


def test_validate_response_bounds():
    validate_response(make_response())
    with pytest.raises(InvalidResponseError):
        validate_response(make_response(browsing=6))
    with pytest.raises(InvalidResponseError):
        validate_response(make_response(meetings=13))
    with pytest.raises(InvalidResponseError):
        validate_response(make_response(before={
            "awareness": (0, 4), "self_efficacy": (3, 3), "community_sense": (2, 3)
        }))


# --- ranks --------------------------------------------------------------------


def test_average_ranks_plain():
    assert average_ranks([10.0, 30.0, 20.0]) == [1.0, 3.0, 2.0]


def test_average_ranks_ties():
    assert average_ranks([1.0, 2.0, 2.0, 3.0]) == [1.0, 2.5, 2.5, 4.0]
    assert average_ranks([5.0, 5.0, 5.0]) == [2.0, 2.0, 2.0]


# --- wilcoxon_right -------------------------------------------------------------


def test_wilcoxon_all_positive():
    result = wilcoxon_right([1.0, 2.0, 3.0])
    assert result.w_plus == 6.0
    assert result.p_right == 0.125  # 1 of 8 sign assignments reaches W+ = 6
    assert result.method == "exact"
    assert result.n_effective == 3


def test_wilcoxon_all_negative():
    result = wilcoxon_right([-1.0, -2.0, -3.0])
    assert result.w_plus == 0.0
    assert result.p_right == 1.0
    assert result.n_effective == 3


def test_wilcoxon_all_zero_is_no_information():
    with pytest.raises(NoInformationError):
        wilcoxon_right([0.0, 0.0, 0.0])


def test_wilcoxon_empty_rejected():
    with pytest.raises(ValidationError):
        wilcoxon_right([])


def test_wilcoxon_zeros_discarded_for_ranks_kept_for_mean():
    result = wilcoxon_right([0.0, 0.0, 1.0, 2.0])
    assert result.n_effective == 2
    assert result.w_plus == 3.0
    assert result.mean_diff == pytest.approx(0.75)


def test_wilcoxon_matches_enumeration_oracle():
    rng = random.Random(99)
    for _ in range(200):
        n = rng.randrange(1, 13)
        diffs = [rng.choice([-3, -2, -1, -0.5, 0.5, 1, 1.5, 2, 3]) for _ in range(n)]
        w_expect, p_expect, n_eff = wilcoxon_right_enumerated(diffs)
        result = wilcoxon_right(diffs)
        assert result.method == "exact"
        assert result.w_plus == pytest.approx(w_expect, abs=1e-12)
        assert result.n_effective == n_eff
        assert result.p_right == pytest.approx(p_expect, abs=1e-10)


def test_wilcoxon_with_heavy_ties_matches_oracle():
    diffs = [1, 1, 1, -1, -1, 2, 2, -2]
    w_expect, p_expect, _ = wilcoxon_right_enumerated(diffs)
    result = wilcoxon_right(diffs)
    assert result.w_plus == pytest.approx(w_expect)
    assert result.p_right == pytest.approx(p_expect, abs=1e-10)


def test_wilcoxon_normal_approx_near_exact():
    """Regression guard: approx within 0.02 of exact for n in 15..20.

    Uses continuous differences (distinct magnitudes); the 0.5 continuity
    correction is calibrated for the unit rank lattice, so heavily tied
    5-point data is out of scope for this bound.
    """
    from plumewatch.survey import _normal_right_tail

    rng = random.Random(5)
    for n in range(15, 21):
        for _ in range(30):
            diffs = [rng.uniform(-2, 3) for _ in range(n)]
            result = wilcoxon_right(diffs)
            assert result.method == "exact"
            magnitudes = [abs(d) for d in diffs if d != 0]
            ranks = average_ranks(magnitudes)
            approx = _normal_right_tail(result.w_plus, ranks, magnitudes)
            assert abs(result.p_right - approx) < 0.02


def test_wilcoxon_switches_to_normal_above_cutoff():
    rng = random.Random(8)
    diffs = [rng.choice([-2, -1, 1, 2, 3]) for _ in range(25)]
    result = wilcoxon_right(diffs)
    assert result.method == "normal-approx"
    assert 0.0 <= result.p_right <= 1.0


def test_wilcoxon_p_antitone_in_w():
    """Higher rank sums never raise the right-tail p."""
    from plumewatch.survey import _exact_right_tail

    ranks = [2, 2, 6, 8, 10, 3, 3]  # doubled ranks with ties
    total = sum(ranks)
    ps = [_exact_right_tail(ranks, w) for w in range(total + 2)]
    assert all(a >= b for a, b in zip(ps, ps[1:]))
    assert ps[0] == 1.0


@settings(max_examples=60, deadline=None)
@given(st.lists(
    st.sampled_from([-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0]),
    min_size=1, max_size=10,
))
def test_wilcoxon_negation_identity(diffs):
    """p(diffs) + p(-diffs) = 1 + P(W = observed) under the null."""
    from plumewatch.survey import _exact_right_tail

    right = wilcoxon_right(diffs)
    left = wilcoxon_right([-d for d in diffs])
    magnitudes = [abs(d) for d in diffs if d != 0]
    ranks = [int(round(2 * r)) for r in average_ranks(magnitudes)]
    w2 = int(round(2 * right.w_plus))
    point_mass = _exact_right_tail(ranks, w2) - _exact_right_tail(ranks, w2 + 1)
    assert right.p_right + left.p_right == pytest.approx(1.0 + point_mass, abs=1e-12)


def test_wilcoxon_ci_student_t():
    diffs = [1.0, 0.0, 2.0, -1.0, 0.5, 1.5]
    result = wilcoxon_right(diffs)
    # textbook check: mean +/- t(0.975, 5) * sd / sqrt(6)
    mean = sum(diffs) / 6
    sd = math.sqrt(sum((d - mean) ** 2 for d in diffs) / 5)
    assert result.mean_diff == pytest.approx(mean)
    assert result.ci95_half_width == pytest.approx(2.5705818356363228 * sd / math.sqrt(6), rel=1e-9)


def test_wilcoxon_zero_spread_ci():
    result = wilcoxon_right([1.0, 1.0, 1.0, 1.0])
    assert result.ci95_half_width == 0.0


# --- run_study ----------------------------------------------------------------------


def _cohort_plus_one(n=6):
    responses = []
    rng = random.Random(1)
    for k in range(n):
        base = {v: (rng.randrange(1, 4), rng.randrange(1, 4)) for v in
                ("awareness", "self_efficacy", "community_sense")}
        bumped = {v: (a + 1, b + 1) for v, (a, b) in base.items()}
        responses.append(make_response(rid=f"r{k}", before=base, after=bumped))
    return responses


def test_run_study_uniform_increase():
    n = 6
    result = run_study(_cohort_plus_one(n))
    for variable in ("awareness", "self_efficacy", "community_sense"):
        test = result.tests[variable]
        assert test is not None
        assert test.p_right == pytest.approx(1 / 2 ** n)  # exact minimum for n
        assert test.mean_diff == pytest.approx(1.0)


def test_run_study_no_information_variable():
    responses = []
    for k in range(5):
        before = {"awareness": (3, 3), "self_efficacy": (2, 3), "community_sense": (2, 2)}
        after = {"awareness": (3, 3), "self_efficacy": (3, 4), "community_sense": (3, 3)}
        responses.append(make_response(rid=f"r{k}", before=before, after=after))
    result = run_study(responses)
    assert result.tests["awareness"] is None
    assert result.tests["self_efficacy"] is not None


def test_run_study_excludes_invalid():
    responses = _cohort_plus_one(4)
    responses.append(make_response(rid="bad", browsing=9))
    result = run_study(responses)
    assert result.n_valid == 4 and result.n_excluded == 1


def test_run_study_needs_two_valid():
    with pytest.raises(ValidationError):
        run_study([make_response(), make_response(rid="bad", browsing=0)])


# --- CSV round trip ----------------------------------------------------------------


def _csv_row(rid, diffs=(1, 1, 1), incomplete=False):
    cells = {c: "" for c in CSV_COLUMNS}
    cells["respondent_id"] = rid
    for i in range(1, 6):
        cells[f"explore_{i}"] = "1" if i <= 3 else "0"
    for i in range(1, 4):
        cells[f"document_{i}"] = "1"
    for i in range(1, 5):
        cells[f"share_{i}"] = "0"
    cells.update(browsing="4", people_discussed="12", meetings="8",
                 age_band="45-54", education_band="bachelor")
    for variable, diff in zip(("awareness", "self_efficacy", "community_sense"), diffs):
        cells[f"{variable}_before_1"] = "2"
        cells[f"{variable}_before_2"] = "3"
        cells[f"{variable}_after_1"] = str(2 + diff)
        cells[f"{variable}_after_2"] = "" if incomplete else str(3 + diff)
    return ",".join(cells[c] for c in CSV_COLUMNS)


def test_read_responses_csv(tmp_path):
    path = tmp_path / "responses.csv"
    path.write_text("\n".join(
        [",".join(CSV_COLUMNS), _csv_row("a"), _csv_row("b", diffs=(0, 1, 2)),
         _csv_row("c", incomplete=True)]
    ))
    responses = read_responses_csv(path)
    assert len(responses) == 3
    assert participation_levels(responses[0]) == (3, 3, 0)
    result = run_study(responses)
    assert result.n_valid == 2 and result.n_excluded == 1


def test_read_responses_csv_missing_column(tmp_path):
    path = tmp_path / "broken.csv"
    path.write_text("respondent_id,browsing\na,3\n")
    with pytest.raises(ValidationError, match="missing columns"):
        read_responses_csv(path)


def test_write_study_outputs(tmp_path):
    result = run_study(_cohort_plus_one(5))
    write_study(tmp_path / "out", result)
    assert (tmp_path / "out" / "results.json").is_file()
    assert (tmp_path / "out" / "participation.csv").is_file()
    assert (tmp_path / "out" / "diffs.csv").is_file()
    import json

    payload = json.loads((tmp_path / "out" / "results.json").read_text())
    assert payload["n_valid"] == 5
    assert payload["tests"]["self_efficacy"]["method"] == "exact"
