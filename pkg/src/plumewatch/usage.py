"""Image-usage mining over the service's NCSA combined access log.

The pipeline distills raw log lines into per-view records carrying D, the
whole-day difference between the date a thumbnail was viewed and the date
its source imagery was captured, then aggregates those records into
histograms, per-user vectors, and a Pearson correlation matrix. Requests
from configured CIDRs (e.g. the operators' own network) are excluded before
anything is counted. Human- vs algorithm-origin images are told apart by the
``origin`` parameter every thumbnail URL carries.
"""

from __future__ import annotations

import csv
import ipaddress
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Iterable, Mapping
from zoneinfo import ZoneInfo

from .errors import ValidationError
from .thumbnails import SpecParseError, decode_url, encode_url

log = logging.getLogger(__name__)

THUMBNAIL_PREFIX = "/thumbnail?"
CREATION_PATH = "/api/thumbnail"

USER_VECTOR_COMPONENTS = (
    "n_created_hg", "n_viewed_hg", "n_datasets_hg", "n_viewed_ag", "n_datasets_ag",
)

_COMBINED_RE = re.compile(
    r'^(?P<ip>\S+) (?P<ident>\S+) (?P<user>\S+) \[(?P<time>[^\]]+)\] '
    r'"(?P<request>[^"]*)" (?P<status>\d{3}) (?P<size>\S+)'
    r'(?: "(?P<referer>[^"]*)" "(?P<agent>[^"]*)")?\s*$'
)
_TIME_FORMAT = "%d/%b/%Y:%H:%M:%S %z"


@dataclass(frozen=True)
class AccessLogEntry:
    ip: str
    request_time: datetime
    method: str
    path_and_query: str
    status: int
    user_agent: str


@dataclass(frozen=True)
class ImageView:
    image_key: str  # normalized thumbnail URL
    origin: str
    dataset_id: str
    dataset_date: date
    view_date: date
    D: int
    ip: str


@dataclass(frozen=True)
class UserVector:
    ip: str
    n_created_hg: int = 0
    n_viewed_hg: int = 0
    n_datasets_hg: int = 0
    n_viewed_ag: int = 0
    n_datasets_ag: int = 0

    def components(self) -> tuple[int, int, int, int, int]:
        return (self.n_created_hg, self.n_viewed_hg, self.n_datasets_hg,
                self.n_viewed_ag, self.n_datasets_ag)


@dataclass(frozen=True)
class UsageSummary:
    unique_viewed_hg: int = 0
    views_hg: int = 0
    unique_viewed_ag: int = 0
    views_ag: int = 0
    total_views: int = 0
    users_created_hg: int = 0
    users_viewed_hg: int = 0
    users_viewed_ag: int = 0
    total_users: int = 0

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ParseResult:
    entries: list[AccessLogEntry] = field(default_factory=list)
    skipped: int = 0


def parse_log(lines: Iterable[str]) -> ParseResult:
    """Parse NCSA combined (or common) log lines; malformed lines are counted,
    not fatal."""
    result = ParseResult()
    for raw in lines:
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        m = _COMBINED_RE.match(line)
        if not m:
            result.skipped += 1
            continue
        request = m.group("request").split()
        if len(request) < 2:
            result.skipped += 1
            continue
        try:
            when = datetime.strptime(m.group("time"), _TIME_FORMAT)
        except ValueError:
            result.skipped += 1
            continue
        result.entries.append(AccessLogEntry(
            ip=m.group("ip"),
            request_time=when,
            method=request[0],
            path_and_query=request[1],
            status=int(m.group("status")),
            user_agent=m.group("agent") or "-",
        ))
    return result


def is_view_entry(entry: AccessLogEntry) -> bool:
    return (
        entry.method == "GET"
        and 200 <= entry.status < 300
        and entry.path_and_query.startswith(THUMBNAIL_PREFIX)
    )


def is_creation_entry(entry: AccessLogEntry) -> bool:
    return (
        entry.method == "POST"
        and 200 <= entry.status < 300
        and entry.path_and_query.split("?", 1)[0] == CREATION_PATH
    )


def filter_excluded(
    entries: Iterable[AccessLogEntry], exclusion_cidrs: Iterable[str]
) -> list[AccessLogEntry]:
    networks = [ipaddress.ip_network(c) for c in exclusion_cidrs]
    if not networks:
        return list(entries)
    kept = []
    for entry in entries:
        try:
            addr = ipaddress.ip_address(entry.ip)
        except ValueError:
            kept.append(entry)  # unparsable ip cannot match a CIDR
            continue
        if not any(addr in net for net in networks):
            kept.append(entry)
    return kept


@dataclass
class DeriveResult:
    views: list[ImageView] = field(default_factory=list)
    undecodable: int = 0
    unknown_dataset: int = 0
    negative_d: int = 0


def derive_views(
    entries: Iterable[AccessLogEntry],
    exclusion_cidrs: Iterable[str],
    dataset_dates: Mapping[str, date],
    tz: str = "UTC",
) -> DeriveResult:
    """Distill candidate view entries into ImageView records.

    ``dataset_dates`` maps dataset id to its capture date. View dates are the
    request timestamps converted to the study timezone. Views that would have
    negative D (viewed before their dataset existed) are dropped with a
    data-integrity warning.
    """
    zone = ZoneInfo(tz)
    result = DeriveResult()
    for entry in filter_excluded(entries, exclusion_cidrs):
        if not is_view_entry(entry):
            continue
        try:
            spec = decode_url(entry.path_and_query)
        except SpecParseError:
            result.undecodable += 1
            continue
        if spec.dataset_id not in dataset_dates:
            result.unknown_dataset += 1
            continue
        dataset_date = dataset_dates[spec.dataset_id]
        view_date = entry.request_time.astimezone(zone).date()
        d = (view_date - dataset_date).days
        if d < 0:
            result.negative_d += 1
            log.warning(
                "view of %s on %s predates dataset date %s; dropped",
                spec.dataset_id, view_date, dataset_date,
            )
            continue
        result.views.append(ImageView(
            image_key=encode_url(spec),
            origin=spec.origin,
            dataset_id=spec.dataset_id,
            dataset_date=dataset_date,
            view_date=view_date,
            D=d,
            ip=entry.ip,
        ))
    return result


def summarize(
    views: Iterable[ImageView], creation_entries: Iterable[AccessLogEntry] = ()
) -> UsageSummary:
    views = list(views)
    hg = [v for v in views if v.origin == "human"]
    ag = [v for v in views if v.origin == "algorithm"]
    creators = {e.ip for e in creation_entries}
    viewers_hg = {v.ip for v in hg}
    viewers_ag = {v.ip for v in ag}
    return UsageSummary(
        unique_viewed_hg=len({v.image_key for v in hg}),
        views_hg=len(hg),
        unique_viewed_ag=len({v.image_key for v in ag}),
        views_ag=len(ag),
        total_views=len(views),
        users_created_hg=len(creators),
        users_viewed_hg=len(viewers_hg),
        users_viewed_ag=len(viewers_ag),
        total_users=len(creators | viewers_hg | viewers_ag),
    )


AXES = ("D", "dataset_date", "view_date")


def aggregate(
    views: Iterable[ImageView], axis: str, origin: str | None = None
) -> dict:
    """View-count histogram along one axis, dense over the observed range."""
    if axis not in AXES:
        raise ValidationError(f"axis must be one of {AXES}, got {axis!r}")
    if origin not in (None, "human", "algorithm"):
        raise ValidationError(f"origin filter must be human/algorithm/None, got {origin!r}")
    keys = [
        getattr(v, axis) for v in views
        if origin is None or v.origin == origin
    ]
    if not keys:
        return {}
    histogram: dict = {}
    if axis == "D":
        for k in range(min(keys), max(keys) + 1):
            histogram[k] = 0
    else:
        day = min(keys)
        while day <= max(keys):
            histogram[day] = 0
            day += timedelta(days=1)
    for k in keys:
        histogram[k] += 1
    return histogram


def user_vectors(
    views: Iterable[ImageView], creation_entries: Iterable[AccessLogEntry] = ()
) -> list[UserVector]:
    """Per-ip usage vectors over the five studied components, sorted by ip."""
    views = list(views)
    creations: dict[str, int] = {}
    for entry in creation_entries:
        creations[entry.ip] = creations.get(entry.ip, 0) + 1
    ips = sorted({v.ip for v in views} | set(creations))
    vectors = []
    for ip in ips:
        mine = [v for v in views if v.ip == ip]
        hg = [v for v in mine if v.origin == "human"]
        ag = [v for v in mine if v.origin == "algorithm"]
        vectors.append(UserVector(
            ip=ip,
            n_created_hg=creations.get(ip, 0),
            n_viewed_hg=len(hg),
            n_datasets_hg=len({v.dataset_id for v in hg}),
            n_viewed_ag=len(ag),
            n_datasets_ag=len({v.dataset_id for v in ag}),
        ))
    return vectors


def correlation_matrix(vectors: list[UserVector]) -> list[list[float | None]]:
    """Pearson r over users for every component pair.

    Symmetric with a unit diagonal; components with zero variance get their
    whole row/column marked undefined (None) instead of leaking NaN.
    """
    if len(vectors) < 2:
        raise ValidationError("correlation needs at least 2 user vectors")
    n = len(USER_VECTOR_COMPONENTS)
    columns = [[float(v.components()[j]) for v in vectors] for j in range(n)]
    means = [sum(col) / len(col) for col in columns]
    centered = [[x - means[j] for x in columns[j]] for j in range(n)]
    ss = [sum(x * x for x in col) for col in centered]

    matrix: list[list[float | None]] = [[None] * n for _ in range(n)]
    for i in range(n):
        if ss[i] == 0.0:
            continue
        matrix[i][i] = 1.0
        for j in range(i + 1, n):
            if ss[j] == 0.0:
                continue
            cov = sum(a * b for a, b in zip(centered[i], centered[j]))
            r = cov / (ss[i] ** 0.5 * ss[j] ** 0.5)
            matrix[i][j] = matrix[j][i] = r
    return matrix


# --- batch entry point --------------------------------------------------------


@dataclass
class AnalysisResult:
    summary: UsageSummary
    views: list[ImageView]
    vectors: list[UserVector]
    matrix: list[list[float | None]]
    parse_skipped: int
    undecodable: int
    unknown_dataset: int
    negative_d: int


def run_analysis(
    lines: Iterable[str],
    exclusion_cidrs: Iterable[str],
    dataset_dates: Mapping[str, date],
    tz: str = "UTC",
) -> AnalysisResult:
    parsed = parse_log(lines)
    kept = filter_excluded(parsed.entries, exclusion_cidrs)
    derived = derive_views(kept, (), dataset_dates, tz=tz)
    creations = [e for e in kept if is_creation_entry(e)]
    vectors = user_vectors(derived.views, creations)
    try:
        matrix = correlation_matrix(vectors)
    except ValidationError:
        matrix = [[None] * len(USER_VECTOR_COMPONENTS) for _ in USER_VECTOR_COMPONENTS]
    return AnalysisResult(
        summary=summarize(derived.views, creations),
        views=derived.views,
        vectors=vectors,
        matrix=matrix,
        parse_skipped=parsed.skipped,
        undecodable=derived.undecodable,
        unknown_dataset=derived.unknown_dataset,
        negative_d=derived.negative_d,
    )


def write_analysis(outdir: Path, result: AnalysisResult) -> None:
    """summary.json plus one dense histogram CSV per axis and origin."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    summary = {
        "summary": result.summary.to_json(),
        "correlation_components": list(USER_VECTOR_COMPONENTS),
        "correlation_matrix": result.matrix,
        "n_user_vectors": len(result.vectors),
        "parse_skipped": result.parse_skipped,
        "undecodable": result.undecodable,
        "unknown_dataset": result.unknown_dataset,
        "negative_d": result.negative_d,
    }
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2))
    for axis in AXES:
        for origin in ("human", "algorithm"):
            histogram = aggregate(result.views, axis, origin)
            path = outdir / f"hist_{axis}_{origin}.csv"
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow([axis.lower(), "views"])
                for key, count in histogram.items():
                    writer.writerow([key, count])
    with (outdir / "user_vectors.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ip", *USER_VECTOR_COMPONENTS])
        for vector in result.vectors:
            writer.writerow([vector.ip, *vector.components()])
