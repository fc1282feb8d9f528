"""Matplotlib figure rendering for the CLI report paths.

Figures are written as SVG next to the delimited output.  matplotlib is
imported lazily with the Agg backend so the library itself never needs a
display; the file date metadata is suppressed for reproducible output
trees.
"""

from __future__ import annotations

import numpy as np

_SAVE_KW = {"metadata": {"Date": None}}


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def profile_figure(path, r, q, slope, c: float, eps: float):
    plt = _plt()
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    ax1.plot(r, q, lw=1.5)
    ax1.set_ylabel("q")
    ax1.set_title(f"optimal transition profile (c={c:g}, eps={eps:g})")
    ax2.plot(r, slope, lw=1.5, color="tab:orange")
    ax2.set_ylabel("q'")
    ax2.set_xlabel("signed distance r")
    for ax in (ax1, ax2):
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def sweep_figure(path, report, c: float):
    plt = _plt()
    eps = [rec.eps for rec in report.records]
    fig, ax = plt.subplots(figsize=(6, 4.2))
    ax.semilogx(eps, [rec.min_energy for rec in report.records],
                "o-", label="minimized")
    ax.semilogx(eps, [rec.profile_energy for rec in report.records],
                "s--", label="profile")
    if report.records:
        ax.axhline(report.records[-1].limit_energy, color="k", lw=1,
                   label="limit (line tension x perimeter)")
    ax.set_xlabel("eps")
    ax.set_ylabel("energy")
    ax.set_title(f"phase-separation energy vs eps (c={c:g})")
    ax.invert_xaxis()
    ax.grid(alpha=0.3, which="both")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def recovery_figure(path, pc, report, c: float):
    plt = _plt()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4.4))

    pts = pc.curve.points
    chi = pc.chi
    closed = np.vstack([pts, pts[:1]])
    chi_closed = np.append(chi, chi[0])
    for phase, color, label in ((0, "tab:blue", "phase 0"), (1, "tab:red", "phase 1")):
        mask = chi_closed == phase
        xy = np.where(mask[:, None], closed, np.nan)
        ax1.plot(xy[:, 0], xy[:, 1], color=color, lw=2, label=label)
    ax1.set_aspect("equal")
    ax1.set_title("curve with phase coloring")
    ax1.legend(loc="upper right", fontsize=8)

    if report.records:
        eps = [rec.eps for rec in report.records]
        ax2.semilogx(eps, [rec.total for rec in report.records], "o-",
                     label="rescaled energy")
        ax2.semilogx(eps, [rec.E_part for rec in report.records], "s--",
                     label="separation part")
        ax2.semilogx(eps, [rec.G_part for rec in report.records], "d--",
                     label="bending part")
        ax2.axhline(report.records[0].limit_quarter, color="k", lw=1,
                    label="limit (quarter elastica)")
        ax2.axhline(report.records[0].limit_half, color="gray", lw=1, ls=":",
                    label="limit (half elastica)")
        ax2.invert_xaxis()
    ax2.set_xlabel("eps")
    ax2.set_ylabel("energy")
    ax2.set_title(f"recovery energies vs eps (c={c:g})")
    ax2.grid(alpha=0.3, which="both")
    ax2.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
