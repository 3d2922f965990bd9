"""
SVG figure of ln N(gt) curves, rendered with matplotlib's Agg backend.
CSV stays the authoritative output; this is display only.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from loguru import logger  # noqa: E402

from .errors import InvalidParameterError  # noqa: E402

FIG_SIZE = (7.2, 4.8)

# colour and line style advance together: solid, dashed, dash-dot, dotted
_COLOURS = ("#1f3a93", "#c0392b", "#27ae60", "#8e44ad")
_LINESTYLES = ("-", "--", "-.", ":")

RC_PARAMS: Dict[str, Any] = {
    "figure.figsize": FIG_SIZE,
    "font.family": "sans-serif",
    "font.size": 11,
    "axes.labelsize": 12,
    "legend.fontsize": 10,
    "lines.linewidth": 1.6,
    "axes.prop_cycle": matplotlib.cycler(color=_COLOURS) + matplotlib.cycler(linestyle=_LINESTYLES),
    # text stays text; fixed hash salt and no date keep reruns byte-identical
    "svg.fonttype": "none",
    "svg.hashsalt": "dicke-entanglement",
}


@dataclass(frozen=True)
class Curve:
    label: str
    x: Sequence[float]
    y: Sequence[float]


def curve_gid(k: int) -> str:
    return f"curve-{k}"


class SvgPlotter:
    def __init__(self, title: str = "", x_label: str = "gt", y_label: str = "ln N (bits)"):
        self.title = title
        self.x_label = x_label
        self.y_label = y_label

    def render(self, curves: Sequence[Curve]) -> str:
        if not curves:
            raise InvalidParameterError("nothing to plot: no curves given")
        with matplotlib.rc_context(RC_PARAMS):
            fig, ax = plt.subplots()
            try:
                for k, c in enumerate(curves):
                    ax.plot(np.asarray(c.x, dtype=float), np.asarray(c.y, dtype=float), label=c.label, gid=curve_gid(k))
                ax.set_xlabel(self.x_label)
                ax.set_ylabel(self.y_label)
                if self.title:
                    ax.set_title(self.title)
                top = max((float(np.max(c.y)) for c in curves if len(c.y)), default=0.0)
                ax.set_ylim(0.0, top * 1.05 if top > 0 else 1.0)
                ax.margins(x=0.0)
                ax.legend(loc="upper left", bbox_to_anchor=(1.02, 1.0), frameon=False)
                buf = io.BytesIO()
                fig.savefig(buf, format="svg", bbox_inches="tight", metadata={"Date": None})
            finally:
                plt.close(fig)
        return buf.getvalue().decode("utf-8")

    def write(self, curves: Sequence[Curve], path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.render(curves), encoding="utf-8")
        logger.info(f"[output] SVG written: {path}")
        return path
