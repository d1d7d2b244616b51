"""Shared per-AS classification outcome."""

import enum


class Verdict(str, enum.Enum):
    CGN_POSITIVE = "cgn_positive"
    NEGATIVE = "negative"
    INSUFFICIENT = "insufficient"
