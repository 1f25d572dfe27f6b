"""Survey scoring: participation levels, paired Likert differences, and the
right-tailed Wilcoxon signed-rank test.

Each attitude variable is asked as a two-question Likert set answered twice
(before/after); the variable score is the mean of each set and the paired
difference drives the test. Zero differences are discarded for the rank sum
(standard signed-rank practice) but kept for the mean and its Student-t
confidence interval, so the reported mean increase covers every respondent.

For n nonzero differences up to 20 the right-tail p-value is exact: the null
distribution enumerates every sign assignment of the observed (tie-averaged)
ranks. Above 20 a tie-corrected normal approximation with a 0.5 continuity
correction takes over.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from scipy.stats import t as student_t

from .errors import ValidationError

VARIABLES = ("awareness", "self_efficacy", "community_sense")
CHOICE_COUNTS = {"explore": 5, "document": 3, "share": 4}
EXACT_TEST_MAX_N = 20


class NoInformationError(ValidationError):
    """All paired differences are zero; the rank test carries no information."""


class InvalidResponseError(ValidationError):
    """A survey response is incomplete or violates its stated bounds."""


@dataclass(frozen=True)
class SurveyResponse:
    respondent_id: str
    explore_choices: tuple[bool, ...]
    document_choices: tuple[bool, ...]
    share_choices: tuple[bool, ...]
    browsing: int | None  # 1..5
    people_discussed: int | None  # >= 0
    meetings: int | None  # 0..12
    age_band: str
    education_band: str
    before: dict[str, tuple[int | None, int | None]]
    after: dict[str, tuple[int | None, int | None]]


def validate_response(response: SurveyResponse) -> None:
    r = response
    if len(r.explore_choices) != CHOICE_COUNTS["explore"]:
        raise InvalidResponseError(f"{r.respondent_id}: explore must have 5 choices")
    if len(r.document_choices) != CHOICE_COUNTS["document"]:
        raise InvalidResponseError(f"{r.respondent_id}: document must have 3 choices")
    if len(r.share_choices) != CHOICE_COUNTS["share"]:
        raise InvalidResponseError(f"{r.respondent_id}: share must have 4 choices")
    if r.browsing is None or not 1 <= r.browsing <= 5:
        raise InvalidResponseError(f"{r.respondent_id}: browsing outside 1..5")
    if r.people_discussed is None or r.people_discussed < 0:
        raise InvalidResponseError(f"{r.respondent_id}: people_discussed must be >= 0")
    if r.meetings is None or not 0 <= r.meetings <= 12:
        raise InvalidResponseError(f"{r.respondent_id}: meetings outside 0..12")
    for variable in VARIABLES:
        for phase, pairs in (("before", r.before), ("after", r.after)):
            if variable not in pairs:
                raise InvalidResponseError(f"{r.respondent_id}: missing {phase} {variable}")
            pair = pairs[variable]
            if len(pair) != 2 or any(v is None for v in pair):
                raise InvalidResponseError(
                    f"{r.respondent_id}: incomplete {phase} pair for {variable}"
                )
            if any(not 1 <= v <= 5 for v in pair):
                raise InvalidResponseError(
                    f"{r.respondent_id}: {phase} {variable} Likert outside 1..5"
                )


def participation_levels(response: SurveyResponse) -> tuple[int, int, int]:
    """Selected-choice counts for the explore/document/share questions."""
    return (
        sum(response.explore_choices),
        sum(response.document_choices),
        sum(response.share_choices),
    )


def variable_scores(response: SurveyResponse, variable: str) -> tuple[float, float, float]:
    """(before mean, after mean, after - before) for one attitude variable."""
    if variable not in VARIABLES:
        raise ValidationError(f"unknown variable {variable!r}")
    b = response.before.get(variable, ())
    a = response.after.get(variable, ())
    if len(b) != 2 or len(a) != 2 or None in b or None in a:
        raise InvalidResponseError(
            f"{response.respondent_id}: incomplete Likert pair for {variable}"
        )
    before = sum(b) / 2.0
    after = sum(a) / 2.0
    return before, after, after - before


# --- Wilcoxon signed-rank ----------------------------------------------------


@dataclass(frozen=True)
class TestResult:
    n_effective: int
    w_plus: float
    p_right: float
    method: str  # "exact" | "normal-approx"
    mean_diff: float
    ci95_half_width: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


def average_ranks(values: Sequence[float]) -> list[float]:
    """Ranks 1..n with tied values sharing their average rank."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        rank = (i + j + 2) / 2.0  # average of 1-based positions i+1..j+1
        for k in range(i, j + 1):
            ranks[order[k]] = rank
        i = j + 1
    return ranks


def _exact_right_tail(doubled_ranks: Sequence[int], doubled_w: int) -> float:
    """P(W+ >= w) over all 2^n sign assignments of the observed ranks.

    Works on 2x-scaled ranks so tie-averaged .5 ranks stay integral; counts
    are exact Python ints, so the returned float is correctly rounded.
    """
    total = sum(doubled_ranks)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled_ranks:
        for w in range(total, r - 1, -1):
            if counts[w - r]:
                counts[w] += counts[w - r]
    tail = sum(counts[max(doubled_w, 0):])
    return tail / (1 << len(doubled_ranks))


def _normal_right_tail(w_plus: float, ranks: Sequence[float], values: Sequence[float]) -> float:
    n = len(ranks)
    mean = n * (n + 1) / 4.0
    tie_term = 0.0
    seen: dict[float, int] = {}
    for v in values:
        seen[v] = seen.get(v, 0) + 1
    for count in seen.values():
        tie_term += count ** 3 - count
    variance = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0
    z = (w_plus - mean - 0.5) / math.sqrt(variance)
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def wilcoxon_right(diffs: Sequence[float]) -> TestResult:
    """Right-tailed Wilcoxon signed-rank test on paired differences.

    Zero differences are discarded before ranking; |diffs| are ranked with
    average ranks on ties; W+ sums the ranks of positive differences. The
    mean and its 95% Student-t half-width are over ALL differences, zeros
    included.
    """
    diffs = [float(d) for d in diffs]
    if not diffs:
        raise ValidationError("need at least one paired difference")
    nonzero = [d for d in diffs if d != 0.0]
    if not nonzero:
        raise NoInformationError("all paired differences are zero")

    magnitudes = [abs(d) for d in nonzero]
    ranks = average_ranks(magnitudes)
    w_plus = sum(r for r, d in zip(ranks, nonzero) if d > 0)
    n = len(nonzero)

    if n <= EXACT_TEST_MAX_N:
        doubled = [int(round(2 * r)) for r in ranks]
        p = _exact_right_tail(doubled, int(round(2 * w_plus)))
        method = "exact"
    else:
        p = _normal_right_tail(w_plus, ranks, magnitudes)
        method = "normal-approx"

    mean_diff = sum(diffs) / len(diffs)
    if len(diffs) > 1:
        var = sum((d - mean_diff) ** 2 for d in diffs) / (len(diffs) - 1)
        half = float(student_t.ppf(0.975, len(diffs) - 1)) * math.sqrt(var / len(diffs))
    else:
        half = math.nan
    return TestResult(
        n_effective=n,
        w_plus=w_plus,
        p_right=p,
        method=method,
        mean_diff=mean_diff,
        ci95_half_width=half,
    )


# --- whole-study driver --------------------------------------------------------


@dataclass
class StudyResult:
    n_responses: int
    n_valid: int
    n_excluded: int
    tests: dict[str, TestResult | None]  # None marks a no-information variable
    diffs: dict[str, list[float]]
    participation: list[tuple[str, int, int, int]]

    def to_json(self) -> dict:
        return {
            "n_responses": self.n_responses,
            "n_valid": self.n_valid,
            "n_excluded": self.n_excluded,
            "tests": {
                v: (t.to_json() if t is not None else {"no_information": True})
                for v, t in self.tests.items()
            },
            "diffs": self.diffs,
        }


def run_study(responses: Iterable[SurveyResponse]) -> StudyResult:
    """Score every valid response and test each variable for an increase.

    Invalid or incomplete responses are excluded and counted, mirroring how
    such surveys are cleaned before analysis.
    """
    responses = list(responses)
    valid: list[SurveyResponse] = []
    for response in responses:
        try:
            validate_response(response)
        except InvalidResponseError:
            continue
        valid.append(response)
    if len(valid) < 2:
        raise ValidationError(
            f"need at least 2 valid responses, got {len(valid)} of {len(responses)}"
        )

    diffs = {
        variable: [variable_scores(r, variable)[2] for r in valid]
        for variable in VARIABLES
    }
    tests: dict[str, TestResult | None] = {}
    for variable in VARIABLES:
        try:
            tests[variable] = wilcoxon_right(diffs[variable])
        except NoInformationError:
            tests[variable] = None
    return StudyResult(
        n_responses=len(responses),
        n_valid=len(valid),
        n_excluded=len(responses) - len(valid),
        tests=tests,
        diffs=diffs,
        participation=[(r.respondent_id, *participation_levels(r)) for r in valid],
    )


# --- CSV input / output ---------------------------------------------------------

_VARIABLE_COLUMNS = [
    f"{variable}_{phase}_{idx}"
    for variable in VARIABLES
    for phase in ("before", "after")
    for idx in (1, 2)
]

CSV_COLUMNS = (
    ["respondent_id"]
    + [f"explore_{i}" for i in range(1, 6)]
    + [f"document_{i}" for i in range(1, 4)]
    + [f"share_{i}" for i in range(1, 5)]
    + ["browsing", "people_discussed", "meetings", "age_band", "education_band"]
    + _VARIABLE_COLUMNS
)


def _opt_int(value: str | None) -> int | None:
    if value is None or value.strip() == "":
        return None
    try:
        return int(value)
    except ValueError:
        return None


def read_responses_csv(path: Path) -> list[SurveyResponse]:
    """One row per respondent; blank/garbled cells become incompleteness that
    validation later excludes rather than a hard parse failure."""
    rows = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in CSV_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValidationError(f"survey CSV missing columns: {', '.join(missing)}")
        for record in reader:
            rows.append(SurveyResponse(
                respondent_id=record["respondent_id"],
                explore_choices=tuple(
                    record[f"explore_{i}"].strip() == "1" for i in range(1, 6)
                ),
                document_choices=tuple(
                    record[f"document_{i}"].strip() == "1" for i in range(1, 4)
                ),
                share_choices=tuple(
                    record[f"share_{i}"].strip() == "1" for i in range(1, 5)
                ),
                browsing=_opt_int(record["browsing"]),
                people_discussed=_opt_int(record["people_discussed"]),
                meetings=_opt_int(record["meetings"]),
                age_band=record["age_band"],
                education_band=record["education_band"],
                before={
                    v: (_opt_int(record[f"{v}_before_1"]), _opt_int(record[f"{v}_before_2"]))
                    for v in VARIABLES
                },
                after={
                    v: (_opt_int(record[f"{v}_after_1"]), _opt_int(record[f"{v}_after_2"]))
                    for v in VARIABLES
                },
            ))
    return rows


def write_study(outdir: Path, result: StudyResult) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "results.json").write_text(json.dumps(result.to_json(), indent=2))
    with (outdir / "participation.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["respondent_id", "explore", "document", "share"])
        writer.writerows(result.participation)
    with (outdir / "diffs.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variable", "diff"])
        for variable, values in result.diffs.items():
            for value in values:
                writer.writerow([variable, value])
