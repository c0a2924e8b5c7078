"""Static figures for ``rqhd-lab report``; rendered off-screen to PNG files."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _read_csv(path: Path) -> dict[str, list[float]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return {}
    return {k: [float(r[k]) for r in rows] for k in rows[0]}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_charge(data: dict[str, list[float]], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    q0 = data["charge"][0]
    ax.plot(data["t"], [(q - q0) / abs(q0) if q0 else q - q0 for q in data["charge"]])
    ax.set_xlabel("t")
    ax.set_ylabel("relative charge drift")
    return _save(fig, path)


def plot_norms(data: dict[str, list[float]], path: Path) -> Path:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 3.8))
    for key in ("psi_H4", "psit_H3", "psitt_H2", "Psi_H4", "Psit_H3", "Psitt_H2", "Phi_H4"):
        ax1.plot(data["t"], data[key], label=key)
    ax1.set_yscale("symlog", linthresh=1e-12)
    ax1.set_xlabel("t")
    ax1.legend(fontsize=7)
    ax2.plot(data["t"], data["min_n"])
    ax2.set_xlabel("t")
    ax2.set_ylabel("min n")
    return _save(fig, path)


def plot_convergence(data: dict[str, list[float]], summary: dict, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(data["param"], data["discrepancy"], "o-")
    order = summary.get("fitted_order")
    title = summary.get("kind", "")
    if order is not None:
        title += f"  (fitted order {order:.2f})"
    ax.set_title(title)
    ax.set_xlabel("parameter")
    ax.set_ylabel("sup-t L2 distance")
    return _save(fig, path)


def plot_iterations(diffs: list[float], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy(range(1, len(diffs) + 1), [max(d, 1e-300) for d in diffs], "o-")
    ax.set_xlabel("Picard sweep")
    ax.set_ylabel("sup-t H1 difference")
    return _save(fig, path)


def plot_discrepancy(data: dict[str, list[float]], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.semilogy(data["t"], [max(v, 1e-300) for v in data["distance"]])
    ax.set_xlabel("t")
    ax.set_ylabel("KG vs Picard L2 distance")
    return _save(fig, path)


def render_report(directory: str | Path) -> list[Path]:
    """Render a figure for every recognised output file in ``directory``."""
    d = Path(directory)
    made = []
    if (d / "charge.csv").exists():
        made.append(plot_charge(_read_csv(d / "charge.csv"), d / "charge.png"))
    if (d / "norm_history.csv").exists():
        made.append(plot_norms(_read_csv(d / "norm_history.csv"), d / "norms.png"))
    if (d / "discrepancy.csv").exists():
        made.append(plot_discrepancy(_read_csv(d / "discrepancy.csv"), d / "discrepancy.png"))
    if (d / "table.csv").exists():
        summary = json.loads((d / "summary.json").read_text()) if (d / "summary.json").exists() else {}
        made.append(plot_convergence(_read_csv(d / "table.csv"), summary, d / "convergence.png"))
    if (d / "iteration_report.jsonl").exists():
        first = (d / "iteration_report.jsonl").read_text().splitlines()[0]
        made.append(plot_iterations(json.loads(first)["successive_diffs"], d / "iterations.png"))
    return made
