"""Static figures rendered from benchmark CSV output.

Figures are artifacts, not an interactive surface: every function takes a
results file written by the bench harness and drops deterministic PNGs
into the requested directory.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd

METHOD_STYLE = {
    "naive": ("tab:orange", "o"),
    "matching": ("tab:purple", "s"),
    "gaps": ("tab:green", "D"),
    "known-w": ("tab:blue", "^"),
    "semi-analytic": ("tab:brown", "v"),
    "random-w": ("tab:gray", "x"),
    "equivalent-w": ("tab:olive", "*"),
    "consecutive-w": ("tab:cyan", "P"),
}


def _safe_name(text: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in text)


def _style(method: str):
    return METHOD_STYLE.get(method, ("black", "."))


def plot_results(csv_path, out_dir) -> list[Path]:
    """One L1-vs-sweep figure per model id; replications become error bars."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frame = pd.read_csv(csv_path, comment="#")
    frame = frame[frame["status"] == "ok"]
    if frame.empty:
        raise ValueError(f"{csv_path}: no successful rows to plot")
    written = []
    for model_id, by_model in frame.groupby("model_id", sort=True):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        swept = by_model["sweep_param"].fillna("").ne("").any()
        for method, part in by_model.groupby("method", sort=True):
            color, marker = _style(method)
            if swept:
                stats = part.groupby("sweep_value")["l1"].agg(["mean", "std"])
                ax.errorbar(
                    stats.index, stats["mean"], yerr=stats["std"].fillna(0.0),
                    label=method, color=color, marker=marker, capsize=3,
                )
            else:
                stats = part["l1"]
                ax.errorbar(
                    [0.0], [stats.mean()],
                    yerr=[stats.std() if len(stats) > 1 else 0.0],
                    label=method, color=color, marker=marker, capsize=3,
                )
        sweep_name = by_model["sweep_param"].dropna().replace("", pd.NA).dropna()
        ax.set_xlabel(sweep_name.iloc[0] if len(sweep_name) else "run")
        ax.set_ylabel("L1 error")
        ax.set_title(model_id)
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"results_{_safe_name(str(model_id))}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def plot_convergence(csv_path, out_dir) -> Path:
    """Joint log-likelihood per iteration for each method and step budget."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frame = pd.read_csv(csv_path, comment="#")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    dashes = ["-", "--", ":", "-."]
    step_values = sorted(frame["inner_steps"].unique())
    for (method, steps), part in frame.groupby(["method", "inner_steps"]):
        color, _ = _style(method)
        label = method if method == "gaps" else f"{method} ({steps} steps)"
        style = dashes[step_values.index(steps) % len(dashes)]
        ax.plot(part["iteration"], part["joint_loglik"], label=label,
                color=color, linestyle=style, alpha=0.9)
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean joint log-likelihood")
    ax.legend()
    fig.tight_layout()
    path = out_dir / "convergence.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
