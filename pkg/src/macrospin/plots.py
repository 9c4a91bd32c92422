"""Figure rendering for the CLI report path: reads the CSV artifacts an
experiment just wrote and saves matplotlib figures next to them.

Opt-in via `macrospin ... --plot`; the CSV/JSON artifacts stay the canonical
(byte-reproducible) outputs, the PNGs are a convenience view of the same data.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

plt.rcParams.update(
    {
        "figure.figsize": (6.4, 4.2),
        "font.size": 9,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "savefig.dpi": 150,
        "savefig.bbox": "tight",
    }
)


def _read_csv(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    out = {}
    for name in reader.fieldnames:
        column = [r[name] for r in rows]
        try:
            out[name] = np.array([float(v) for v in column])
        except ValueError:
            out[name] = np.array(column)
    return out


def _save(fig, path: Path) -> Path:
    fig.savefig(path)
    plt.close(fig)
    return path


def _plot_map(csv_path: Path, out_path: Path, label: str) -> Path:
    data = _read_csv(csv_path)
    thetas = np.unique(data["theta"])
    phis = np.unique(data["phi"])
    grid = data["value"].reshape(thetas.size, phis.size)
    order = np.argsort(thetas)
    fig, ax = plt.subplots()
    mesh = ax.pcolormesh(phis, thetas[order], grid[order], shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label=label)
    ax.set_xlabel(r"$\varphi$ [rad]")
    ax.set_ylabel(r"$\vartheta$ [rad]")
    ax.invert_yaxis()
    return _save(fig, out_path)


def render_qmap(out_dir: Path) -> list[Path]:
    return [_plot_map(out_dir / "qmap.csv", out_dir / "qmap.png", "Q")]


def render_pround(out_dir: Path) -> list[Path]:
    return [_plot_map(out_dir / "pmap.csv", out_dir / "pmap.png", "P")]


def render_slots(out_dir: Path) -> list[Path]:
    figures = []
    for csv_path in sorted(out_dir.glob("slots_dm*.csv")):
        data = _read_csv(csv_path)
        centers = (data["m_lo"] + data["m_hi"]) / 2.0
        fig, ax = plt.subplots()
        width = (data["m_hi"] - data["m_lo"] + 1.0) * 0.85
        ax.bar(centers, data["p_exact"], width=width, alpha=0.6, label="exact (Born)")
        ax.step(
            np.concatenate([data["m_lo"] - 0.5, [data["m_hi"][-1] + 0.5]]),
            np.concatenate([data["p_approx"], [data["p_approx"][-1]]]),
            where="post",
            color="C3",
            label="Q band integral",
        )
        ax.set_xlabel(r"slot midpoint $\bar m$")
        ax.set_ylabel("probability")
        ax.legend()
        figures.append(_save(fig, csv_path.with_suffix(".png")))
    return figures


def render_catdecay(out_dir: Path) -> list[Path]:
    data = _read_csv(out_dir / "catdecay.csv")
    with open(out_dir / "summary.json") as fh:
        slope = json.load(fh)["derived"]["fitted_log_slope"]
    fig, ax = plt.subplots()
    ax.semilogy(data["j"], data["normalized_gap"], "o", ms=4, label="grid evaluation")
    ax.semilogy(
        data["j"],
        np.exp(slope * data["j"]) * data["normalized_gap"][0] / math.exp(slope * data["j"][0]),
        "-",
        lw=1,
        label=f"fit, slope = {slope:.4f}",
    )
    ax.set_xlabel("j")
    ax.set_ylabel(r"normalized cat gap $4\pi\,\mathrm{gap}/(2j+1)$")
    ax.legend()
    return [_save(fig, out_dir / "catdecay.png")]


def render_invasiveness(out_dir: Path) -> list[Path]:
    data = _read_csv(out_dir / "invasiveness.csv")
    fig, ax = plt.subplots()
    ax.loglog(data["delta_m"], np.maximum(data["value"], 1e-300), "o-", ms=4)
    ax.set_xlabel(r"$\Delta m$")
    ax.set_ylabel("invasiveness")
    return [_save(fig, out_dir / "invasiveness.png")]


def render_trajectory(out_dir: Path) -> list[Path]:
    data = _read_csv(out_dir / "trajectory.csv")
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6.4, 6.0))
    for comp, style in (("x", "-"), ("y", "--"), ("z", ":")):
        ax1.plot(data["t"], data[f"q{comp}"], style, color="C0", label=f"quantum {comp}")
        ax1.plot(data["t"], data[f"c{comp}"], style, color="C3", alpha=0.6, label=f"classical {comp}")
    ax1.set_ylabel("direction components")
    ax1.legend(ncol=2, fontsize=7)
    ax2.semilogy(data["t"], np.maximum(data["angle_err_rad"], 1e-18), "o-", ms=3, label="angle error [rad]")
    ax2.plot(data["t"], data["qlen"], "s-", ms=3, label=r"$|\langle J\rangle|/j$")
    ax2.set_xlabel("t")
    ax2.legend(fontsize=7)
    return [_save(fig, out_dir / "trajectory.png")]


def render_lg(out_dir: Path) -> list[Path]:
    data = _read_csv(out_dir / "lg.csv")
    fig, ax = plt.subplots()
    ax.plot(data["omega_tau"], data["K"], "o-", ms=4, label="K")
    ax.axhline(1.0, color="k", lw=1, ls="--", label="macrorealist bound")
    ax.axhline(1.5, color="C3", lw=1, ls=":", label="spin-1/2 quantum max")
    ax.set_xlabel(r"$\omega\tau$")
    ax.set_ylabel(r"$K = C_{12} + C_{23} - C_{13}$")
    ax.legend()
    return [_save(fig, out_dir / "lg.png")]


_RENDERERS = {
    "qmap": render_qmap,
    "slots": render_slots,
    "catdecay": render_catdecay,
    "invasiveness": render_invasiveness,
    "trajectory": render_trajectory,
    "lg": render_lg,
    "pround": render_pround,
}


def render(kind: str, out_dir) -> list[Path]:
    """Render the figures for an experiment's artifacts; returns their paths."""
    return _RENDERERS[kind](Path(out_dir))
