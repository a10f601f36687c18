from pathlib import Path
from functools import partial
from typing import Dict, List, Optional
import logging

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from rich.console import Console  # noqa: E402
from rich.panel import Panel  # noqa: E402
from rich.table import Table  # noqa: E402
from rich.text import Text  # noqa: E402

logger = logging.getLogger(__name__)

console = Console()

MSE_COLUMNS = {"mse": "total", "mse_mu": "mu", "mse_alpha": "alpha", "mse_beta": "beta"}


def render_tasks_table(tasks: List[Dict]):
    """Numbered list of planned estimator tasks."""
    table = Table(show_header=False, box=None, expand=True)
    table.add_column("id", width=3, justify="right")
    table.add_column("estimator")
    table.add_column("mode")

    for t in tasks:
        table.add_row(str(t.get("id", "")), Text(t.get("estimator", ""), style="bold"),
                      Text(t.get("mode", ""), style="dim"))

    console.print(table)


def show_plan(tasks: List[Dict], n_sim: int, horizons) -> None:
    header = f"{len(tasks)} estimator tasks x {n_sim} replications x T in {list(horizons)}"
    console.print(Panel(Text(header, style="bold white"), style="grey37"))
    render_tasks_table(tasks)


def _fmt(x) -> str:
    return "" if x is None or (isinstance(x, float) and np.isnan(x)) else f"{x:.4g}"


def render_summary_table(summary: pd.DataFrame) -> None:
    table = Table(title="MSE per estimator")
    for col in ("estimator", "mode", "T", "ok", "failed", "MSE", "mu", "alpha", "beta"):
        table.add_column(col, justify="left" if col in ("estimator", "mode") else "right")
    for row in summary.itertuples(index=False):
        table.add_row(row.estimator, row.mode, f"{row.T:g}", str(row.n_ok), str(row.n_failed),
                      _fmt(row.mse), _fmt(row.mse_mu), _fmt(row.mse_alpha), _fmt(row.mse_beta))
    console.print(table)


def render_estimate(report: Dict) -> None:
    theta = report["theta"]
    lines = [f"{name} = {_fmt(theta[name])}" for name in ("mu", "alpha", "beta")]
    if report.get("kappa_hat") is not None:
        lines.append(f"kappa = {_fmt(report['kappa_hat'])}")
    if report.get("p_hat") is not None:
        lines.append(f"p = {_fmt(report['p_hat'])}")
    status = "converged" if report["converged"] else "not converged"
    title = f"{report['estimator']}/{report['mode']}: {report['n_events']} events on T={report['T']:g} ({status})"
    console.print(Panel("\n".join(lines), title=title))


def reference_line(T, mse) -> np.ndarray:
    """Slope -1 line through the first point of a log-log MSE curve."""
    T = np.asarray(T, dtype=np.float64)
    return float(np.asarray(mse)[0]) * T[0] / T


def _mse_figure(summary: pd.DataFrame, column: str, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    try:
        anchor = None
        for (estimator, mode), grp in summary.groupby(["estimator", "mode"], sort=False):
            grp = grp.sort_values("T")
            ok = np.isfinite(grp[column].to_numpy(dtype=float))
            if not ok.any():
                continue
            T, y = grp["T"].to_numpy(dtype=float)[ok], grp[column].to_numpy(dtype=float)[ok]
            ax.loglog(T, y, marker="o", label=f"{estimator} ({mode})")
            anchor = anchor if anchor is not None else (T, y)
        if anchor is not None:
            ax.loglog(anchor[0], reference_line(*anchor), "k--", linewidth=0.8, label="slope -1")
        ax.set_xlabel("T")
        ax.set_ylabel(f"MSE ({MSE_COLUMNS[column]})")
        ax.legend(fontsize="small")
        fig.tight_layout()
        fig.savefig(path, format="svg")
    finally:
        plt.close(fig)


def _selection_figure(selections: pd.DataFrame, T: float, path: Path) -> None:
    at_T = selections[selections["T"] == T]
    groups = list(at_T.groupby(["estimator", "mode"], sort=False))
    fig, axes = plt.subplots(len(groups), 2, figsize=(8, 2.5 * len(groups)), squeeze=False)
    try:
        for row, ((estimator, mode), grp) in enumerate(groups):
            kappa = grp.groupby("log2_kappa")["count"].sum()
            axes[row, 0].bar(kappa.index, kappa.to_numpy(), width=0.8)
            axes[row, 0].set_title(f"{estimator} ({mode}): log2 kappa", fontsize="small")
            p = grp.dropna(subset=["p_hat"]).groupby("p_hat")["count"].sum()
            if len(p):
                axes[row, 1].bar(p.index, p.to_numpy(), width=0.05)
                axes[row, 1].set_title(f"{estimator} ({mode}): p", fontsize="small")
            else:
                axes[row, 1].set_axis_off()
        fig.suptitle(f"selected hyperparameters, T = {T:g}")
        fig.tight_layout()
        fig.savefig(path, format="svg")
    finally:
        plt.close(fig)


def emit_plots(summary: pd.DataFrame, selections: Optional[pd.DataFrame], out_dir) -> List[Path]:
    """MSE-vs-T charts per parameter and overall, plus selection histograms per horizon, as SVG.

    Plotting problems are logged and skipped; the CSV outputs stand on their own.
    """
    if summary is None or summary.empty:
        logger.warning("no estimator results to plot")
        return []
    out = Path(out_dir)
    written = []
    jobs = [(partial(_mse_figure, summary, column), out / f"mse_{name}.svg") for column, name in MSE_COLUMNS.items()]
    if selections is not None and not selections.empty:
        for T in sorted(selections["T"].unique()):
            path = out / f"selections_T{T:g}.svg"
            jobs.append((partial(_selection_figure, selections, T), path))
    for draw, path in jobs:
        try:
            draw(path)
            written.append(path)
        except Exception as exc:
            logger.warning("could not draw %s: %s", path.name, exc)
    return written
