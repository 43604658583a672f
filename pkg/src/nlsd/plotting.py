"""Static figure output (Agg backend, SVG files)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "nlsd"
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    # fixed metadata and hash salt keep repeated runs byte-identical
    fig.savefig(path, metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def plot_branch(out_dir, branch, va=None, cutoff=None) -> list[Path]:
    """Amplitude, power and FWHM against k; VA curves dashed, numerics solid."""
    out = Path(out_dir)
    k = branch.k
    panels = (("amplitude", branch.amplitude, "A"), ("power", branch.power, "P"), ("fwhm", branch.fwhm, "FWHM"))
    paths = []
    for name, y, label in panels:
        fig, ax = plt.subplots(figsize=(4.5, 3.4))
        ax.plot(k, y, "-", color="tab:blue", label="numerical")
        if va:
            kv = np.array([p.k for p in va])
            yv = {"amplitude": [p.A for p in va], "power": [p.P for p in va], "fwhm": [p.fwhm for p in va]}[name]
            ax.plot(kv, yv, "--", color="k", label="variational")
        if cutoff is not None:
            ax.axvline(cutoff, color="tab:red", ls=":")
        ax.set_xlabel("k")
        ax.set_ylabel(label)
        ax.legend(frameon=False)
        fig.tight_layout()
        paths.append(_save(fig, out / f"branch_{name}.svg"))
    return paths


def plot_lambda_curve(path, ks, top, cutoff=None):
    """Largest non-zero-mode eigenvalues lambda^2 against k."""
    fig, ax = plt.subplots(figsize=(4.5, 3.4))
    top = np.atleast_2d(np.asarray(top).T).T
    for j in range(top.shape[1]):
        ax.plot(ks, top[:, j], "-o", ms=2)
    ax.axhline(0.0, color="0.5", lw=0.8)
    if cutoff is not None:
        ax.axvline(cutoff, color="tab:red", ls=":")
    ax.set_xlabel("k")
    ax.set_ylabel(r"$\lambda^2$")
    fig.tight_layout()
    return _save(fig, path)


def plot_contour(path, result, title: str | None = None):
    """|q|(xi, eta) from the run snapshots."""
    eta = result.grid.eta
    xi = result.snapshot_xi
    z = np.abs(result.snapshot_values)
    fig, ax = plt.subplots(figsize=(4.5, 3.6))
    m = ax.pcolormesh(eta, xi, z, shading="auto", cmap="viridis", rasterized=True)
    fig.colorbar(m, ax=ax, label="|q|")
    ax.set_xlabel(r"$\eta$")
    ax.set_ylabel(r"$\xi$")
    if title:
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    return _save(fig, path)


def plot_observables(path, result):
    obs = result.observables
    fig, axes = plt.subplots(2, 1, figsize=(4.5, 4.6), sharex=True)
    axes[0].plot(obs["xi"], obs["peak_abs2"])
    axes[0].set_ylabel(r"max $|q|^2$")
    axes[1].plot(obs["xi"], obs["power"] / obs["power"][0] - 1.0)
    axes[1].set_ylabel(r"$P/P_0 - 1$")
    axes[1].set_xlabel(r"$\xi$")
    fig.tight_layout()
    return _save(fig, path)


def plot_profile(path, solution, mode=None):
    fig, ax = plt.subplots(figsize=(4.5, 3.4))
    ax.plot(solution.eta, solution.values, label="Q")
    if mode is not None:
        ax.plot(solution.eta, mode, label="v")
    ax.set_xlabel(r"$\eta$")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, path)
