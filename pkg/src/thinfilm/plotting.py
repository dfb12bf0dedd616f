"""Static figures for experiment reports (written to files, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def decay_figure(path, times, amplitudes, fit=None, target_mu=None, title="", raw=None):
    """Semilog plot of |amplitude| with the fitted and predicted slopes."""
    t = np.asarray(times, dtype=float)
    a = np.abs(np.asarray(amplitudes, dtype=float))
    fig, ax = plt.subplots(figsize=(6, 4))
    good = a > 0
    ax.semilogy(t[good], a[good], "o", ms=3, label="measured")
    if raw is not None:
        r = np.abs(np.asarray(raw, dtype=float))
        ax.semilogy(t[r > 0], r[r > 0], ".", ms=2, color="0.6", label="raw (no limit removed)")
    if fit is not None:
        t0, t1 = fit.window
        tt = np.linspace(t0, t1, 50)
        i0 = int(np.argmin(np.abs(t - t0)))
        ax.semilogy(tt, a[i0] * np.exp(-fit.exponent * (tt - t0)), "-",
                    label=f"fit: {fit.exponent:.3f}")
        if target_mu is not None:
            ax.semilogy(tt, a[i0] * np.exp(-target_mu * (tt - t0)), "--",
                        label=f"predicted: {target_mu}")
        ax.axvspan(t0, t1, color="0.9", zorder=0)
    ax.set_xlabel("t")
    ax.set_ylabel("|amplitude|")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path
