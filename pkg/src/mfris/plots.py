"""Figure rendering for summary tables."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_AXIS_LABELS = {
    "p_total_dbm": "Total power budget (dBm)",
    "n_elements": "Number of RIS elements",
}


def plot_summary(summary: list[dict], path: str, title: str | None = None) -> None:
    """Mean sum-rate versus the sweep variable, one curve per architecture,
    with one-standard-deviation error bars."""
    by_arch: dict[str, list[dict]] = {}
    for row in summary:
        if row["n_ok"] > 0:
            by_arch.setdefault(row["architecture"], []).append(row)

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    sweep_var = summary[0]["sweep_var"] if summary else ""
    for arch, rows in sorted(by_arch.items()):
        rows = sorted(rows, key=lambda r: r["sweep_value"])
        x = [r["sweep_value"] for r in rows]
        y = [r["mean_sum_rate"] for r in rows]
        err = [r["std_sum_rate"] for r in rows]
        ax.errorbar(x, y, yerr=err, marker="o", capsize=3, label=arch)
    ax.set_xlabel(_AXIS_LABELS.get(sweep_var, sweep_var))
    ax.set_ylabel("Sum rate (bits/s/Hz)")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
