"""Matplotlib figure rendering for the report paths (file output only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = {"dpi": 150, "bbox_inches": "tight"}


def price_fraction_wealth_figure(times, price, fraction, wealth, path: str) -> None:
    """Three stacked panels: asset price, optimal fraction, wealth."""
    fig, axes = plt.subplots(3, 1, figsize=(7, 7), sharex=True)
    axes[0].plot(times, price, color="tab:blue", lw=0.9)
    axes[0].set_ylabel("price")
    axes[1].plot(times, fraction, color="tab:orange", lw=0.9)
    axes[1].set_ylabel("optimal fraction")
    axes[2].plot(times, wealth, color="tab:green", lw=0.9)
    axes[2].set_ylabel("wealth")
    axes[2].set_xlabel("t")
    for ax in axes:
        ax.grid(alpha=0.3)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def structure_limits_figure(ns, closed_form, oracle, mc_means, mc_ses, path: str) -> None:
    ns = np.asarray(ns)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(ns, mc_means, yerr=3.0 * np.asarray(mc_ses), fmt="o",
                color="tab:green", capsize=3, label="Monte Carlo (3 SE)")
    ax.plot(ns, closed_form, "s", color="tab:blue", ms=9, mfc="none",
            label="closed form")
    ax.plot(ns, oracle, "x", color="tab:red", ms=7, label="stationary oracle")
    ax.set_xlabel("number of assets n")
    ax.set_ylabel("expected total fraction")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def dominance_figure(lambdas, growths, ses, analytic, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(lambdas, growths, yerr=3.0 * np.asarray(ses), fmt="o",
                color="tab:green", capsize=3, label="Monte Carlo (3 SE)")
    if analytic is not None:
        grid = np.linspace(min(lambdas), max(lambdas), 101)
        coeffs = np.polyfit(lambdas, analytic, 2)
        ax.plot(grid, np.polyval(coeffs, grid), color="tab:blue", lw=1,
                label="analytic growth")
    ax.set_xlabel("strategy scale")
    ax.set_ylabel("log-wealth growth per unit time")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def sensitivity_figure(labels, elasticities, path: str) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(labels, elasticities, color=["tab:blue", "tab:orange"])
    ax.axhline(0.0, color="black", lw=0.8)
    ax.set_ylabel("elasticity of the optimal fraction")
    ax.grid(alpha=0.3, axis="y")
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def leverage_figure(rhos, means, ses, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(rhos, means, yerr=3.0 * np.asarray(ses), fmt="o-",
                color="tab:purple", capsize=3)
    ax.set_xlabel("common correlation")
    ax.set_ylabel("mean gross leverage sum |f|")
    ax.grid(alpha=0.3)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def martingale_figure(times, z_means, z_ses, price_means, price_ses, s0, path: str) -> None:
    times = np.asarray(times)
    fig, axes = plt.subplots(2, 1, figsize=(6.5, 6), sharex=True)
    price_means = np.asarray(price_means)
    price_ses = np.asarray(price_ses)
    for i in range(price_means.shape[1]):
        axes[0].errorbar(times, price_means[:, i], yerr=3.0 * price_ses[:, i],
                         fmt="o-", capsize=3, label=f"asset {i + 1}")
        axes[0].axhline(s0[i], color="gray", lw=0.6, ls="--")
    axes[0].set_ylabel("mean discounted price")
    axes[0].legend()
    axes[1].errorbar(times, z_means, yerr=3.0 * np.asarray(z_ses), fmt="o-",
                     color="tab:red", capsize=3)
    axes[1].axhline(1.0, color="gray", lw=0.6, ls="--")
    axes[1].set_ylabel("mean density Z")
    axes[1].set_xlabel("t")
    for ax in axes:
        ax.grid(alpha=0.3)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
