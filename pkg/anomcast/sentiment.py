"""Daily per-symbol sentiment scores in [-1, 1].

Scores come either from precomputed ``Date,Score`` files or from a lexicon scorer that
sums word valences and squashes the sum with ``s / sqrt(s**2 + alpha)``.
"""

import datetime
import logging
import math
import os
import re
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, List, Mapping, Optional

import numpy as np
import pandas as pd

from .core.exceptions import ParseError, ValidationError
from .core.series import SentimentSeries, _write_dated_values, read_dated_values
from .core.utility import data_path

logger = logging.getLogger(__name__)

ALPHA = 15.0
VALENCE_BOUND = 4.0

_TOKEN = re.compile(r"[^\W_]+(?:'[^\W_]+)?", re.UNICODE)


@dataclass(frozen=True)
class Lexicon:
    """Token -> valence mapping, valences in [-4, 4]."""

    entries: Mapping[str, float]

    def __post_init__(self):
        entries = {}
        for token, valence in dict(self.entries).items():
            token = token.strip().lower()
            assert token, """lexicon tokens must be non-empty"""
            assert token not in entries, """duplicate lexicon token {0!r}""".format(token)
            valence = float(valence)
            assert -VALENCE_BOUND <= valence <= VALENCE_BOUND, """valence of {0!r} outside [-4, 4]""".format(token)
            entries[token] = valence
        object.__setattr__(self, "entries", MappingProxyType(entries))

    def __len__(self):
        return len(self.entries)

    def __contains__(self, token):
        return token in self.entries

    def valence(self, token, default=0.0):
        return self.entries.get(token, default)

    def negated(self):
        return Lexicon({k: -v for k, v in self.entries.items()})


@dataclass(frozen=True)
class DailySentiment:
    symbol: str
    day: Optional[datetime.date]
    score: float
    comment_count: int

    def __post_init__(self):
        assert self.comment_count >= 0
        assert -1.0 <= self.score <= 1.0
        if self.comment_count == 0:
            assert self.score == 0.0, """a day without comments must score 0"""


# %% LEXICON


def load_lexicon(path):
    """ Reads a ``token<TAB>valence`` file. Blank lines and ``#`` comments are skipped. """
    entries = {}
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise ParseError("expected 'token<TAB>valence'", path=path, line=i)
            token = parts[0].strip().lower()
            try:
                valence = float(parts[1])
            except ValueError:
                raise ParseError("bad valence {0!r}".format(parts[1]), path=path, line=i)
            if not token:
                raise ValidationError("empty token", path=path, line=i)
            if token in entries:
                raise ValidationError("duplicate token {0!r}".format(token), path=path, line=i)
            if not -VALENCE_BOUND <= valence <= VALENCE_BOUND:
                raise ValidationError("valence {0} outside [-4, 4]".format(valence), path=path, line=i)
            entries[token] = valence
    return Lexicon(entries)


def default_lexicon():
    """ The small finance-flavoured lexicon bundled with the package """
    return load_lexicon(data_path("lexicon.tsv"))


def tokenize(text):
    return _TOKEN.findall(text.lower())


def lexicon_compound(text, lexicon, alpha=ALPHA):
    """ Compound score of a text

    Sums the valences of the lexicon tokens found in ``text`` and normalises the sum
    ``s`` to ``s / sqrt(s**2 + alpha)``. Text without known tokens scores 0.

    Args:
        text (str): free text
        lexicon (Lexicon): token valences
        alpha (float): normalisation constant, 15 by convention

    Returns:
        float: score in (-1, 1)
    """
    s = math.fsum(lexicon.valence(t) for t in tokenize(text))
    if s == 0.0:
        return 0.0
    return s / math.sqrt(s * s + alpha)


def daily_compound(comments, lexicon, symbol="", day=None):
    """ Scores one day of comments as a single concatenated text

    Returns:
        DailySentiment: score 0 with ``comment_count`` 0 for an empty list
    """
    comments = list(comments)
    if not comments:
        return DailySentiment(symbol, day, 0.0, 0)
    return DailySentiment(symbol, day, lexicon_compound(" ".join(comments), lexicon), len(comments))


# %% FILES


def load_scores(path, symbol=None):
    """ Reads a ``Date,Score`` sentiment CSV

    Scores outside [-1, 1] are rejected. Repeated dates keep the last row and log a
    warning. Rows are returned in date order.

    Args:
        path (str): CSV path
        symbol (str, optional): ticker; defaults to the file stem

    Raises:
        ParseError: malformed row, with its line number
        ValidationError: out-of-range score, with its line number
    """
    if symbol is None:
        symbol = os.path.splitext(os.path.basename(path))[0]
    dates, values = read_dated_values(path, "Score")
    scores: Dict[datetime.date, float] = {}
    for i, (d, v) in enumerate(zip(dates, values)):
        if not (np.isfinite(v) and -1.0 <= v <= 1.0):
            raise ValidationError("score {0!r} outside [-1, 1]".format(v), path=path, line=i + 2)
        if d in scores:
            logger.warning("%s:%d: duplicate sentiment date %s, keeping the last row", path, i + 2, d)
        scores[d] = v
    ordered = sorted(scores)
    return SentimentSeries(symbol, ordered, [scores[d] for d in ordered])


def save_scores(series, path):
    """ Writes a SentimentSeries as a ``Date,Score`` CSV that :func:`load_scores` reads back exactly """
    _write_dated_values(path, series.dates, series.values, "Score")


def load_comments(path):
    """ Reads JSON lines ``{date, symbol, body}`` into ``{symbol: {date: [body, ...]}}`` """
    try:
        frame = pd.read_json(path, lines=True, dtype=False)
    except ValueError as e:
        raise ParseError(str(e), path=path)
    if frame.empty:
        return {}
    for column in ("date", "symbol", "body"):
        if column not in frame.columns:
            raise ParseError("missing field {0!r}".format(column), path=path)
    grouped: Dict[str, Dict[datetime.date, List[str]]] = {}
    for i, row in enumerate(frame.itertuples(index=False), start=1):
        try:
            day = datetime.date.fromisoformat(str(row.date)[:10])
        except ValueError:
            raise ParseError("bad date {0!r}".format(row.date), path=path, line=i)
        grouped.setdefault(str(row.symbol), {}).setdefault(day, []).append(str(row.body))
    return grouped


def score_comments(comments_by_day, lexicon, symbol, dates):
    """ Builds a SentimentSeries on ``dates`` from per-day comment lists

    Days without comments score 0.
    """
    scores = [daily_compound(comments_by_day.get(d, []), lexicon, symbol, d).score for d in dates]
    return SentimentSeries(symbol, list(dates), scores)
