"""Figure emitters: accuracy vs input depth, and train/val loss curves.

Each figure is generated from a plain CSV so it can be regenerated without
re-running the experiment that produced it.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def plot_accuracy_vs_depth(sweep_csv: str | Path, out_path: str | Path) -> Path:
    """Bar chart of best validation macro-accuracy per input depth n."""
    ns, accs = [], []
    with open(sweep_csv, newline="") as f:
        for row in csv.DictReader(f):
            ns.append(int(row["n"]))
            accs.append(float(row["val_macro_accuracy"]))
    if not ns:
        raise ValueError(f"{sweep_csv}: no sweep rows")

    best = max(range(len(ns)), key=lambda i: accs[i])
    colors = ["tab:blue" if i != best else "navy" for i in range(len(ns))]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar([str(n) for n in ns], [a * 100 for a in accs], color=colors)
    ax.set_xlabel("input depth n")
    ax.set_ylabel("validation macro-accuracy (%)")
    ax.set_ylim(0, 100)
    out_path = Path(out_path)
    fig.savefig(out_path, bbox_inches="tight")
    plt.close(fig)
    return out_path


def plot_loss_curves(loss_csv: str | Path, out_path: str | Path) -> Path:
    """Train and validation loss per epoch from a training loss_curve.csv."""
    epochs, train_loss, val_loss = [], [], []
    with open(loss_csv, newline="") as f:
        for row in csv.DictReader(f):
            epochs.append(int(row["epoch"]))
            train_loss.append(float(row["train_loss"]))
            val_loss.append(float(row["val_loss"]))
    if not epochs:
        raise ValueError(f"{loss_csv}: no epochs recorded")

    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(epochs, train_loss, label="train")
    ax.plot(epochs, val_loss, label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("cross-entropy loss")
    ax.legend()
    out_path = Path(out_path)
    fig.savefig(out_path, bbox_inches="tight")
    plt.close(fig)
    return out_path
