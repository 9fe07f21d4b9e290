"""Figure rendering for the CLI report paths.

Figures are written next to the delimited output with deterministic PNG
bytes (fixed dpi, no Software metadata) so report directories can be
compared byte for byte across runs.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_SAVEFIG = dict(dpi=120, format="png", metadata={"Software": None})


def _atomic_save(fig, path):
    tmp = f"{path}.tmp"
    fig.savefig(tmp, **_SAVEFIG)
    plt.close(fig)
    os.replace(tmp, path)


def save_design_figure(steps, snr, gamma_bits, path):
    """Sensor SNR schedule and per-step privacy loss."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.step(steps, snr, where="mid", color="tab:blue")
    ax1.set_ylabel("SNR$_t$")
    ax1.set_title("sensor signal-to-noise schedule")
    ax1.grid(alpha=0.3)
    ax2.fill_between(steps, gamma_bits, step="mid", alpha=0.4,
                     color="tab:orange")
    ax2.step(steps, gamma_bits, where="mid", color="tab:orange")
    ax2.set_xlabel("t")
    ax2.set_ylabel(r"$\gamma_t$ [bits]")
    ax2.set_title("per-step privacy loss")
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    _atomic_save(fig, path)


def save_sweep_figure(deltas, bits, feasible, path):
    """Privacy loss against the control performance budget."""
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    feas = [(d, b) for d, b, ok in zip(deltas, bits, feasible) if ok]
    if feas:
        ax.plot([d for d, _ in feas], [b for _, b in feas],
                marker="o", color="tab:blue")
    infeas = [d for d, ok in zip(deltas, feasible) if not ok]
    for d in infeas:
        ax.axvline(d, color="tab:red", alpha=0.3, linestyle=":")
    ax.set_xlabel(r"control budget $\delta$")
    ax.set_ylabel("privacy loss [bits]")
    ax.set_title("privacy / control-performance trade-off")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _atomic_save(fig, path)


def save_trace_figure(trace, path):
    """State trajectory against the cloud-side estimate (first coordinate)."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    T = trace.xhat.shape[0]
    ax.plot(range(1, T + 2), trace.x[:, 0], label="$X_t$", color="tab:blue")
    ax.plot(range(1, T + 1), trace.xhat[:, 0], label=r"$\hat X_t$",
            color="tab:orange", linestyle="--")
    ax.set_xlabel("t")
    ax.set_ylabel("state (first coordinate)")
    ax.set_title(f"closed-loop trajectory (seed {trace.seed})")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _atomic_save(fig, path)
