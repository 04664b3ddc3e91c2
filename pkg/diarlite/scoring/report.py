"""Per-recording score reports and dataset tables."""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from diarlite.scoring.der import DerResult
from diarlite.scoring.wer import CpwerResult
from diarlite.utils.formatters import format_percent

COLUMNS = [
    "recording",
    "condition",
    "ser",
    "miss",
    "fa",
    "der",
    "cpwer",
    "ref_speech_sec",
]
OVERALL = "overall"


@dataclass
class ScoreReport:
    """DER and, when transcripts are available, cpWER of one recording."""

    recording_id: str
    der: DerResult
    cpwer: Optional[CpwerResult] = None
    condition: Optional[str] = None
    counting: str = "estimated"

    def to_row(self) -> Dict[str, Any]:
        return {
            "recording": self.recording_id,
            "condition": self.condition,
            "ser": self.der.ser,
            "miss": self.der.miss,
            "fa": self.der.fa,
            "der": self.der.der,
            "cpwer": None if self.cpwer is None else self.cpwer.cpwer,
            "ref_speech_sec": self.der.total_ref_speech_sec,
        }

    def to_json(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "recording": self.recording_id,
            "condition": self.condition,
            "counting": self.counting,
            "frames": {
                "ser": self.der.ser_frames,
                "miss": self.der.miss_frames,
                "fa": self.der.fa_frames,
                "total": self.der.total_frames,
            },
            "ser": self.der.ser,
            "miss": self.der.miss,
            "fa": self.der.fa,
            "der": self.der.der,
            "ref_speech_sec": self.der.total_ref_speech_sec,
            "speaker_mapping": dict(self.der.mapping),
        }
        if self.cpwer is not None:
            payload["cpwer"] = {
                "rate": self.cpwer.cpwer,
                "errors": self.cpwer.errors,
                "substitutions": self.cpwer.counts.substitutions,
                "deletions": self.cpwer.counts.deletions,
                "insertions": self.cpwer.counts.insertions,
                "ref_words": self.cpwer.ref_words,
                "hyp_words": self.cpwer.hyp_words,
                "pairs": dict(self.cpwer.pairs),
                "unmatched_hyp": list(self.cpwer.unmatched_hyp),
            }
        return payload


def _overall(reports: Sequence[ScoreReport], label: str = OVERALL) -> Dict[str, Any]:
    """Time-weighted totals: frame counts and word errors are summed before dividing."""
    ser = sum(r.der.ser_frames for r in reports)
    miss = sum(r.der.miss_frames for r in reports)
    fa = sum(r.der.fa_frames for r in reports)
    total = sum(r.der.total_frames for r in reports)
    grid = reports[0].der.grid_sec if reports else 0.01
    pooled = DerResult(ser, miss, fa, total, grid)
    with_words = [r.cpwer for r in reports if r.cpwer is not None]
    cp: Optional[float] = None
    if with_words:
        errors = sum(c.errors for c in with_words)
        cp = 100.0 * errors / max(1, sum(c.ref_words for c in with_words))
    return {
        "recording": label,
        "condition": None,
        "ser": pooled.ser,
        "miss": pooled.miss,
        "fa": pooled.fa,
        "der": pooled.der,
        "cpwer": cp,
        "ref_speech_sec": pooled.total_ref_speech_sec,
    }


class ScoreTable:
    """Per-recording rows plus a pooled overall row."""

    def __init__(self, reports: Sequence[ScoreReport]) -> None:
        self.reports: List[ScoreReport] = sorted(reports, key=lambda r: r.recording_id)

    def frame(self) -> pd.DataFrame:
        rows = [r.to_row() for r in self.reports] + [_overall(self.reports)]
        return pd.DataFrame(rows, columns=COLUMNS)

    def by_condition(self) -> pd.DataFrame:
        """One pooled row per overlap condition."""
        groups: Dict[str, List[ScoreReport]] = {}
        for report in self.reports:
            groups.setdefault(report.condition or "-", []).append(report)
        rows = [_overall(items, label=cond) for cond, items in sorted(groups.items())]
        return pd.DataFrame(rows, columns=COLUMNS).drop(columns=["condition"])

    def overall(self) -> Dict[str, Any]:
        return _overall(self.reports)

    def to_text(self, group_by_condition: bool = False) -> str:
        """Fixed-width table with percentages to one decimal."""
        if group_by_condition:
            df = self.by_condition()
        else:
            df = self.frame().drop(columns=["condition"])
        formatters = {
            col: format_percent for col in ("ser", "miss", "fa", "der", "cpwer")
        }
        df = df.astype({"cpwer": float})
        text = df.to_string(
            index=False, formatters=formatters, float_format="{:.2f}".format
        )
        return text + "\n"

    def to_json(self) -> Dict[str, Any]:
        return {
            "recordings": [r.to_json() for r in self.reports],
            "overall": self.overall(),
        }
