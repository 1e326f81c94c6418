"""Figure rendering for the report-producing commands.

Every CSV-writing command can drop a PNG next to its data file; figures are
rendered headlessly and saved without software metadata so repeated runs
stay byte-identical.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_OPTS = {"dpi": 150, "metadata": {"Software": None}}


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def save_levels_figure(fields_mt, branches_ghz, path, title="Hyperfine level diagram"):
    """Branch energies (GHz) against longitudinal field (mT)."""
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    for branch in np.asarray(branches_ghz):
        ax.plot(fields_mt, branch, lw=0.9)
    ax.set_xlabel("magnetic field (mT)")
    ax.set_ylabel("level frequency (GHz)")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    _finish(fig, path)


def save_trace_figure(detuning_mhz, amplitude_db, phase_rad, delay_ns=None, path="trace.png"):
    """Stacked amplitude/phase (and optional delay) panels of one sweep."""
    nrows = 3 if delay_ns is not None else 2
    fig, axes = plt.subplots(nrows, 1, sharex=True, figsize=(7.0, 2.4 * nrows))
    axes[0].plot(detuning_mhz, amplitude_db, color="C0")
    axes[0].set_ylabel("amplitude (dB)")
    axes[1].plot(detuning_mhz, phase_rad, color="C1")
    axes[1].set_ylabel("phase (rad)")
    if delay_ns is not None:
        axes[2].plot(detuning_mhz, delay_ns, color="C2")
        axes[2].set_ylabel("delay (ns)")
    axes[-1].set_xlabel("probe detuning (MHz)")
    for ax in axes:
        ax.grid(True, alpha=0.3)
    _finish(fig, path)


def save_sweep_figure(x, columns, x_label, path):
    """One panel per derived quantity against the swept variable.

    ``columns`` maps axis labels to value arrays.
    """
    names = list(columns)
    fig, axes = plt.subplots(len(names), 1, sharex=True, figsize=(7.0, 1.9 * len(names)))
    if len(names) == 1:
        axes = [axes]
    for ax, name in zip(axes, names):
        ax.plot(x, columns[name], color="C0")
        ax.set_ylabel(name)
        ax.grid(True, alpha=0.3)
    axes[-1].set_xlabel(x_label)
    _finish(fig, path)


def save_fit_figure(trace, model_amp_db, model_phase, path):
    """Data and fitted model overlaid, amplitude and phase panels."""
    detuning_mhz = np.asarray(trace.frequency) * 1e-6
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(7.0, 5.0))
    axes[0].plot(detuning_mhz, trace.amplitude_db, "k.", ms=2.5, label="data")
    axes[0].plot(detuning_mhz, model_amp_db, "r-", lw=1.2, label="fit")
    axes[0].set_ylabel("amplitude (dB)")
    axes[0].legend(loc="best", fontsize=8)
    axes[1].plot(detuning_mhz, trace.phase_rad, "k.", ms=2.5)
    axes[1].plot(detuning_mhz, model_phase, "r-", lw=1.2)
    axes[1].set_ylabel("phase (rad)")
    axes[1].set_xlabel("probe detuning (MHz)")
    for ax in axes:
        ax.grid(True, alpha=0.3)
    _finish(fig, path)
