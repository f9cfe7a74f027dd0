#!/usr/bin/env python3
"""Render figure analogues from workbench CSV output.

Reads only the documented CSV schemas (no physics is recomputed) and writes
one image per invocation:

    python plots/render.py --kind <name> --in <csv> --out <png>

Kinds: bits-curves, resources-curves, error-map, estimators, reset-demo,
dressed-fit, echo-fit.  Rendering is deterministic for identical inputs.
"""

import argparse
import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

matplotlib.rcParams.update({
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "plots",
})

PROTO_COLORS = {"ipe": "tab:blue", "kitaev": "tab:red"}
EXPERIMENT_MARKER = (55.0, 1.4)      # (coherence us, latency us)


class RenderError(ValueError):
    pass


def read_table(path):
    """CSV -> dict of column name -> list of parsed values."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise RenderError(f"{path}: no header row")
        rows = list(reader)
    if not rows:
        raise RenderError(f"{path}: no data rows")
    table = {name: [] for name in reader.fieldnames}
    for row in rows:
        for name in reader.fieldnames:
            value = row[name]
            try:
                value = float(value)
            except (TypeError, ValueError):
                pass
            table[name].append(value)
    return table


def need(table, columns, path):
    missing = [c for c in columns if c not in table]
    if missing:
        raise RenderError(f"{path}: missing columns {missing}")


def _finite(xs, ys):
    pairs = [(x, y) for x, y in zip(xs, ys)
             if isinstance(y, float) and np.isfinite(y) and y > 0]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def render_bits_curves(table, path):
    need(table, ["protocol", "m", "R", "median_error", "lower_bound"], path)
    fig, ax = plt.subplots(figsize=(5, 3.6))
    budgets = sorted({int(r) for r in table["R"]})
    styles = ["-o", "--s", ":^", "-.v"]
    for protocol in ("ipe", "kitaev"):
        for i, R in enumerate(budgets):
            sel = [j for j in range(len(table["m"]))
                   if table["protocol"][j] == protocol
                   and int(table["R"][j]) == R]
            ms = [table["m"][j] for j in sel]
            errs = [table["median_error"][j] for j in sel]
            ms, errs = _finite(ms, errs)
            if not ms:
                continue
            ax.semilogy(ms, errs, styles[i % len(styles)],
                        color=PROTO_COLORS[protocol], ms=4,
                        label=f"{protocol} R={R}")
    ms = sorted({m for m in table["m"]})
    bound = [next(table["lower_bound"][j] for j in range(len(table["m"]))
                  if table["m"][j] == m) for m in ms]
    ax.semilogy(ms, bound, "k-.", lw=1, label="1/2^(m+1) bound")
    ax.set_xlabel("bits m")
    ax.set_ylabel("median circular error")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    return fig


def render_resources_curves(table, path):
    need(table, ["protocol", "R", "best_m", "median_error"], path)
    fig, ax = plt.subplots(figsize=(5, 3.6))
    inset = ax.inset_axes([0.58, 0.58, 0.38, 0.38])
    for protocol in ("ipe", "kitaev"):
        sel = [j for j in range(len(table["R"]))
               if table["protocol"][j] == protocol]
        rs = [table["R"][j] for j in sel]
        errs = [table["median_error"][j] for j in sel]
        best = [table["best_m"][j] for j in sel]
        order = np.argsort(rs)
        rs = [rs[k] for k in order]
        errs = [errs[k] for k in order]
        best = [best[k] for k in order]
        ax.loglog(rs, errs, "-o", color=PROTO_COLORS[protocol], ms=4,
                  label=protocol)
        inset.semilogx(rs, best, "-o", color=PROTO_COLORS[protocol], ms=3)
    ax.set_xlabel("resources R")
    ax.set_ylabel("best median error over m")
    ax.legend(fontsize=8, loc="lower left")
    inset.set_ylabel("optimal m", fontsize=7)
    inset.tick_params(labelsize=6)
    inset.grid(alpha=0.3)
    fig.tight_layout()
    return fig


def render_error_map(table, path):
    need(table, ["t_us", "latency_us", "R", "ipe_median", "kitaev_median"],
         path)
    rs = sorted({int(r) for r in table["R"]})
    R = rs[0]
    sel = [j for j in range(len(table["R"])) if int(table["R"][j]) == R]
    ts = sorted({table["t_us"][j] for j in sel})
    lats = sorted({table["latency_us"][j] for j in sel})
    fig, axes = plt.subplots(1, 2, figsize=(7.5, 3.2), sharey=True)
    grids = {}
    for key in ("ipe_median", "kitaev_median"):
        grid = np.full((len(lats), len(ts)), np.nan)
        for j in sel:
            grid[lats.index(table["latency_us"][j]),
                 ts.index(table["t_us"][j])] = table[key][j]
        grids[key] = grid
    vmin = min(np.nanmin(g) for g in grids.values())
    vmax = max(np.nanmax(g) for g in grids.values())
    for ax, (key, title) in zip(
            axes, [("ipe_median", "adaptive"),
                   ("kitaev_median", "non-adaptive")]):
        mesh = ax.pcolormesh(
            ts, lats, grids[key],
            norm=matplotlib.colors.LogNorm(vmin=vmin, vmax=vmax),
            cmap="viridis", shading="nearest")
        ax.plot(*EXPERIMENT_MARKER, "ks", ms=7, mfc="none", mew=1.6)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("T1 = T2 (us)")
        ax.set_title(f"{title}, R={R}", fontsize=9)
        ax.grid(False)
    axes[0].set_ylabel("measurement+reset latency (us)")
    fig.colorbar(mesh, ax=axes, label="median error", fraction=0.04)
    return fig


def render_estimators(table, path):
    need(table, ["method", "R", "mean_error"], path)
    fig, ax = plt.subplots(figsize=(5, 3.6))
    methods = sorted({m for m in table["method"]})
    for method in methods:
        sel = [j for j in range(len(table["R"]))
               if table["method"][j] == method]
        rs = [table["R"][j] for j in sel]
        errs = [table["mean_error"][j] for j in sel]
        order = np.argsort(rs)
        ax.loglog([rs[k] for k in order], [errs[k] for k in order], "-o",
                  ms=3, label=method)
    ax.set_xlabel("resources R")
    ax.set_ylabel("mean circular error")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def render_reset_demo(table, path):
    need(table, ["cycle", "p1_reported", "p1_sampled"], path)
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    cycles = table["cycle"]
    ax.bar([c - 0.18 for c in cycles], table["p1_reported"], width=0.36,
           label="channel value")
    ax.bar([c + 0.18 for c in cycles], table["p1_sampled"], width=0.36,
           label="sampled")
    ax.set_yscale("log")
    ax.set_xlabel("measure/reset cycle")
    ax.set_ylabel("P(1)")
    ax.set_xticks([int(c) for c in cycles])
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def render_dressed_fit(table, path):
    need(table, ["amp_index", "delta_r_hz", "one_plus_x", "one_minus_y",
                 "fit_one_plus_x", "fit_one_minus_y"], path)
    amps = sorted({int(a) for a in table["amp_index"]})
    fig, axes = plt.subplots(1, len(amps), figsize=(3.6 * len(amps), 3.2),
                             sharey=True, squeeze=False)
    for col, amp in enumerate(amps):
        ax = axes[0][col]
        sel = [j for j in range(len(table["amp_index"]))
               if int(table["amp_index"][j]) == amp]
        dr = [table["delta_r_hz"][j] / 1e6 for j in sel]
        for key, fit_key, label, color in (
                ("one_plus_x", "fit_one_plus_x", "1+X", "tab:blue"),
                ("one_minus_y", "fit_one_minus_y", "1-Y", "tab:orange")):
            ax.plot(dr, [table[key][j] for j in sel], "o", ms=3,
                    color=color, label=f"{label} data")
            ax.plot(dr, [table[fit_key][j] for j in sel], "-",
                    color=color, lw=1, label=f"{label} fit")
        ax.set_xlabel("probe detuning (MHz)")
        ax.set_title(f"amplitude {amp}", fontsize=9)
        if col == 0:
            ax.set_ylabel("expectation value")
            ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def render_echo_fit(table, path):
    need(table, ["t_delay_s", "s_data", "s_fit"], path)
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    ts = [t * 1e6 for t in table["t_delay_s"]]
    ax.plot(ts, table["s_data"], "o", ms=3, label="data")
    ax.plot(ts, table["s_fit"], "-", lw=1.2, label="fit")
    ax.set_xlabel("delay after readout pulse (us)")
    ax.set_ylabel("echo signal S")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


RENDERERS = {
    "bits-curves": render_bits_curves,
    "resources-curves": render_resources_curves,
    "error-map": render_error_map,
    "estimators": render_estimators,
    "reset-demo": render_reset_demo,
    "dressed-fit": render_dressed_fit,
    "echo-fit": render_echo_fit,
}


def render(kind: str, in_path, out_path) -> None:
    if kind not in RENDERERS:
        raise RenderError(f"unknown kind {kind!r}; choose from "
                          f"{sorted(RENDERERS)}")
    table = read_table(in_path)
    fig = RENDERERS[kind](table, in_path)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, metadata={"Software": "plots/render.py"})
    plt.close(fig)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--kind", required=True, choices=sorted(RENDERERS))
    parser.add_argument("--in", dest="in_path", required=True)
    parser.add_argument("--out", dest="out_path", required=True)
    args = parser.parse_args(argv)
    try:
        render(args.kind, args.in_path, args.out_path)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
