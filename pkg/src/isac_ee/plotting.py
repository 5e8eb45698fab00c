"""PNG figures written next to the CSV outputs. The CSV files remain the data contract."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 3.8),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
    "svg.hashsalt": "isac-ee",
}
# fixed metadata keeps repeated runs byte-identical
PNG_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata=PNG_META)
    plt.close(fig)


def beampattern_figure(path, angles, gains_w, target_angles=(), thresholds_w=()):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        dbm = 10.0 * np.log10(np.maximum(gains_w, 1e-30)) + 30.0
        ax.plot(angles, dbm, lw=1.2, label="beampattern")
        for i, (t, g) in enumerate(zip(target_angles, thresholds_w)):
            ax.axvline(t, color="0.5", ls=":", lw=0.8)
            ax.plot([t], [10.0 * np.log10(g) + 30.0], "rv", ms=5, label="target floor" if i == 0 else None)
        ax.set_xlim(-90, 90)
        ax.set_ylim(max(dbm.min(), dbm.max() - 60.0) - 2.0, dbm.max() + 3.0)
        ax.set_xlabel("angle (deg)")
        ax.set_ylabel("gain (dBm)")
        ax.legend(loc="lower center")
        _save(fig, path)


def convergence_figure(path, iters, t_values):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(iters, t_values, "o-", ms=3)
        ax.set_xlabel("SCA iteration")
        ax.set_ylabel("t (bit/s/Hz/W)")
        _save(fig, path)


def sweep_figure(path, param, values, ee, detection):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(values, ee, "o-", ms=3, color="C0")
        ax.set_xlabel(param)
        ax.set_ylabel("EE (bit/s/Hz/W)", color="C0")
        if np.any(np.isfinite(detection)):
            ax2 = ax.twinx()
            ax2.plot(values, detection, "s--", ms=3, color="C1")
            ax2.set_ylabel("detection probability", color="C1")
            ax2.grid(False)
        _save(fig, path)
