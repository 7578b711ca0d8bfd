"""Figure rendering for the CLI report paths.

The delimited grid output remains the primary artifact; these helpers draw a
companion PNG next to it so a bound sweep can be inspected without a
plotting session.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_bound_grid(rows: list[dict], path: str | Path,
                      title: str = "Bounds on the policy mean") -> None:
    """Panel per sensitivity strength: center line plus shaded bound bands."""
    gammas = sorted({r["gamma"] for r in rows})
    policies = sorted({r["policy"] for r in rows})
    colors = {"pure": "tab:blue", "maximal": "tab:red", "monotone": "tab:green"}
    fig, axes = plt.subplots(1, len(gammas), figsize=(5.5 * len(gammas), 4.2),
                             sharey=True, squeeze=False)
    for ax, gamma in zip(axes[0], gammas):
        sub = [r for r in rows if r["gamma"] == gamma]
        deltas = sorted({r["delta"] for r in sub})
        tau = [next(r["tau"] for r in sub if r["delta"] == d) for d in deltas]
        ax.plot(deltas, tau, color="black", lw=1.4, label="center")
        for pol in policies:
            ps = [r for r in sub if r["policy"] == pol]
            ps.sort(key=lambda r: r["delta"])
            lo = [r["lower"] for r in ps]
            hi = [r["upper"] for r in ps]
            c = colors.get(pol, "tab:gray")
            ax.fill_between(deltas, lo, hi, color=c, alpha=0.18)
            ax.plot(deltas, lo, color=c, lw=1.0, label=pol)
            ax.plot(deltas, hi, color=c, lw=1.0)
        ax.set_title(f"strength = {gamma:g}")
        ax.set_xlabel("tilt delta")
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel("bounds on the policy mean")
    axes[0][0].legend(loc="upper left", fontsize=9)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
