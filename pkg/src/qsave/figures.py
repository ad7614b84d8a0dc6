"""Two-panel SVG figures: employed on the left, unemployed on the right.

Every figure embeds a JSON config comment right after the XML declaration so
an output file is traceable to the run that produced it.  Date metadata and
the SVG hash salt are pinned, making figure bytes deterministic.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def two_panel_figure(
    path: str | Path,
    assets,
    employed_curves: list[tuple[str, "np.ndarray"]],
    unemployed_curves: list[tuple[str, "np.ndarray"]],
    ylabel: str,
    title: str,
    meta: dict | None = None,
) -> None:
    """Plot labeled curves against assets for both income states and save SVG."""
    with plt.rc_context({"svg.hashsalt": "qsave"}):
        fig, axes = plt.subplots(1, 2, figsize=(10.0, 4.0), sharey=True)
        panels = ((axes[0], employed_curves, "employed"), (axes[1], unemployed_curves, "unemployed"))
        for ax, curves, name in panels:
            for label, values in curves:
                ax.plot(assets, values, label=label, linewidth=1.6)
            ax.set_title(name)
            ax.set_xlabel("assets")
            ax.grid(True, alpha=0.3)
            ax.legend(fontsize=8)
        axes[0].set_ylabel(ylabel)
        fig.suptitle(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    _inject_header(Path(path), meta or {})


def _inject_header(path: Path, meta: dict) -> None:
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    comment = "<!-- qsave " + json.dumps(meta, sort_keys=True) + " -->"
    lines.insert(1, comment)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_figure_header(path: str | Path) -> dict:
    """Recover the JSON config comment from a saved figure."""
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("<!-- qsave "):
            return json.loads(line[len("<!-- qsave "):-len(" -->")])
    raise ValueError(f"{path}: no qsave header comment found")
