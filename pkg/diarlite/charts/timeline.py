"""Reference versus hypothesis speaker timeline."""

from pathlib import Path
from typing import Sequence, Union

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from diarlite.pipeline.segments import DiarSegment, segments_by_speaker

_PALETTE = [
    "#e74c3c",
    "#3498db",
    "#2ecc71",
    "#f39c12",
    "#9b59b6",
    "#1abc9c",
    "#34495e",
    "#e67e22",
]


def plot_timeline(
    ref: Sequence[DiarSegment],
    hyp: Sequence[DiarSegment],
    path: Union[str, Path],
    title: str = "",
) -> Path:
    """One horizontal bar row per speaker, reference rows above hypothesis rows."""
    rows = [("ref", spk, segs) for spk, segs in segments_by_speaker(ref).items()]
    rows += [("hyp", spk, segs) for spk, segs in segments_by_speaker(hyp).items()]

    figure = Figure(figsize=(10, 1 + 0.5 * max(1, len(rows))), facecolor="white")
    FigureCanvasAgg(figure)
    ax = figure.add_subplot(111)
    ax.set_facecolor("#f8f9fa")
    ax.grid(True, alpha=0.3, linestyle="-", linewidth=0.5, axis="x")
    ax.set_axisbelow(True)

    if not rows:
        ax.text(
            0.5,
            0.5,
            "No segments",
            transform=ax.transAxes,
            ha="center",
            va="center",
            color="gray",
        )
    for i, (side, speaker, segments) in enumerate(reversed(rows)):
        color = _PALETTE[i % len(_PALETTE)]
        spans = [(s.start, s.duration) for s in segments]
        alpha = 0.8 if side == "ref" else 0.5
        ax.broken_barh(spans, (i - 0.4, 0.8), facecolors=color, alpha=alpha)
    ax.set_yticks(range(len(rows)))
    ax.set_yticklabels([f"{side}:{spk}" for side, spk, _ in reversed(rows)])
    ax.set_xlabel("Time (s)", fontsize=12)
    if title:
        ax.set_title(title)
    figure.tight_layout()

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    figure.savefig(target)
    return target
