"""Figures written next to the CSV/JSON outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from chronosim.timebase import PS_PER_S  # noqa: E402

RC = {
    "figure.figsize": (7.0, 4.0),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "savefig.bbox": "tight",
}

# largest unit whose value stays >= 1 for the series peak
_UNITS = [(1e9, "ms"), (1e6, "µs"), (1e3, "ns"), (1.0, "ps")]


def _unit(peak_ps: float) -> tuple[float, str]:
    for scale, name in _UNITS:
        if peak_ps >= scale:
            return scale, name
    return 1.0, "ps"


def _save(fig, path: Path) -> Path:
    # no timestamps in metadata so reruns produce the same bytes
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def render_run(report, out: Path) -> list[Path]:
    paths = []
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        peak = max((max(map(abs, r.series.errors_ps), default=0) for r in report.nodes.values()), default=0)
        scale, unit = _unit(peak)
        for name, res in report.nodes.items():
            t = np.asarray(res.series.times_ps) / PS_PER_S
            ax.plot(t, np.asarray(res.series.errors_ps) / scale, lw=0.8, label=f"{name} vs {res.reference}")
            if len(res.series) and res.steady.max_abs_error.ps:
                start = res.series.tail(report_fraction(report)).times_ps[0] / PS_PER_S
                ax.axvline(start, color="0.6", lw=0.6, ls="--")
        ax.set_xlabel("simulated time [s]")
        ax.set_ylabel(f"offset error [{unit}]")
        ax.set_title(f"{report.name}: {report.protocol}")
        ax.legend(loc="best")
        paths.append(_save(fig, out / "offset_error.png"))

        fig, ax = plt.subplots()
        drawn = False
        for name, res in report.nodes.items():
            pts = [(p.tau_s, p.adev) for p in res.full.adev if p.error is None and p.adev]
            if pts:
                tau, dev = zip(*pts)
                ax.loglog(tau, dev, marker="o", ms=3, lw=1, label=name)
                drawn = True
        ax.set_xlabel(r"averaging time $\tau$ [s]")
        ax.set_ylabel(r"overlapping Allan deviation $\sigma_y(\tau)$")
        if drawn:
            ax.legend(loc="best")
        else:
            ax.text(0.5, 0.5, "no non-zero Allan deviation points", ha="center", transform=ax.transAxes)
        paths.append(_save(fig, out / "adev.png"))
    return paths


def report_fraction(report) -> float:
    out = report.scenario.get("outputs", {}) if isinstance(report.scenario, dict) else {}
    return float(out.get("steady_state_fraction", 0.5))


def render_ranking(rows: Sequence, out: Path) -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        labels = [f"{r.name}\n{r.protocol}" for r in rows]
        values = [max(r.steady_max_abs_error_ps, 1) / PS_PER_S for r in rows]
        ax.bar(range(len(rows)), values, color="C0")
        ax.set_yscale("log")
        ax.set_xticks(range(len(rows)), labels)
        ax.set_ylabel("steady-state max |offset error| [s]")
        return _save(fig, Path(out) / "ranking.png")
