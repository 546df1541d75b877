"""Matplotlib figures for the report command (PNG, non-interactive backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "savefig.dpi": 120,
    "figure.figsize": (5.2, 3.8),
    # fixed metadata keeps repeated runs byte-stable
    "svg.hashsalt": "skyrmelab",
}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return Path(path)


def profile_figure(rho: np.ndarray, y: np.ndarray, oracle: np.ndarray | None, path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(rho, y, label="shooting")
        if oracle is not None:
            ax.plot(rho, oracle, "--", color="0.4", label="5(1-rho^2)/(5+3rho^2)")
        ax.set_xlabel("rho")
        ax.set_ylabel("y")
        ax.set_xlim(0.0, 1.0)
        ax.legend(frameon=False)
        return _save(fig, path)


def blowup_figure(t: np.ndarray, sup_grad: np.ndarray, exponent: float, amplitude: float,
                  path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        tau = np.abs(t)
        ax.loglog(tau, sup_grad, "o", ms=4, label="sup |v_r| in cone")
        if np.isfinite(exponent) and np.isfinite(amplitude):
            grid = np.geomspace(tau.min(), tau.max(), 50)
            ax.loglog(grid, amplitude * grid**exponent, "--", color="0.4",
                      label=f"fit {amplitude:.4f} |t|^{exponent:.3f}")
        ax.set_xlabel("|t|")
        ax.set_ylabel("sup |v_r|")
        ax.invert_xaxis()
        ax.legend(frameon=False)
        return _save(fig, path)


def phase_figure(y: np.ndarray, q: np.ndarray, path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(y, q)
        ax.plot([y[0]], [q[0]], "o", color="0.3", ms=4)
        ax.plot([y[-1]], [q[-1]], "s", color="0.3", ms=4)
        ax.set_xlabel("y")
        ax.set_ylabel("q = rho y'")
        return _save(fig, path)


def energy_figure(t: np.ndarray, energy: np.ndarray, flux: np.ndarray, path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(t, energy - energy[0], label="E(t) - E(-1)")
        ax.plot(t, flux, "--", label="accumulated flux")
        ax.set_xlabel("t")
        ax.legend(frameon=False)
        return _save(fig, path)
