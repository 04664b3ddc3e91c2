"""Training loss curve figure."""

from pathlib import Path
from typing import Union

import matplotlib.ticker as ticker
import pandas as pd
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from diarlite.errors import DataError

LOSS_COLUMNS = ("stage", "step", "nll", "time_ce", "total")
_COLORS = {"total": "#2c3e50", "nll": "#3498db", "time_ce": "#e74c3c"}


def _style(ax) -> None:
    ax.set_facecolor("#f8f9fa")
    ax.grid(True, alpha=0.3, linestyle="-", linewidth=0.5)
    ax.set_axisbelow(True)


def plot_loss_curve(losses: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Plot total, NLL and time-CE losses against the global step.

    Stage-2 steps continue after the last stage-1 step; a dashed line marks
    the boundary.

    Args:
        losses: Frame with ``stage``, ``step``, ``nll``, ``time_ce``, ``total``.
        path: Output image path; the format follows its suffix.

    Raises:
        DataError: If a column is missing or the frame is empty.
    """
    missing = [c for c in LOSS_COLUMNS if c not in losses.columns]
    if missing:
        raise DataError(f"Loss frame lacks columns {missing}")
    if losses.empty:
        raise DataError("No loss records to plot")

    frame = losses.sort_values(["stage", "step"]).reset_index(drop=True)
    stage1 = frame[frame["stage"] == 1]
    offset = int(stage1["step"].max()) if not stage1.empty else 0
    x = frame["step"] + (frame["stage"] == 2) * offset

    figure = Figure(figsize=(8, 6), facecolor="white")
    FigureCanvasAgg(figure)
    ax = figure.add_subplot(111)
    _style(ax)
    for column, color in _COLORS.items():
        ax.plot(x, frame[column], label=column, color=color, linewidth=1.2)
    if not stage1.empty and (frame["stage"] == 2).any():
        ax.axvline(offset, color="gray", linestyle="--", linewidth=1, label="stage 2")
    ax.set_xlabel("Step", fontsize=12)
    ax.set_ylabel("Loss per sample", fontsize=12)
    ax.xaxis.set_major_locator(ticker.MaxNLocator(integer=True))
    ax.legend(loc="upper right")
    figure.tight_layout()

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    figure.savefig(target)
    return target
