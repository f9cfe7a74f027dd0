"""Command-line interface.

Every analysis subcommand accepts ``--config <json>``, ``--seed <int>``,
``--out <dir>``, ``--quick``, and ``--jobs <n>``, writes CSV files with a
header row, and drops a ``manifest.json`` capturing the config hash, master
seed, and tool version so outputs are byte-reproducible.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import click
import numpy as np

from .. import __version__
from ..sproc import (PhaseUnitaryDescriptor, SPProgram, assemble,
                     compile_ipe, emulate, parse_asm, read_program_file,
                     write_program_file)
from ..sproc.assembler import build_waveform_table
from . import runners
from .config import ExperimentConfig, load_config


def _fmt(value) -> str:
    if isinstance(value, float):          # includes numpy scalar subclasses
        return repr(float(value))
    return str(value)


def write_csv(path: Path, rows, fieldnames=None) -> None:
    if not rows:
        raise ValueError(f"refusing to write empty CSV {path}")
    fieldnames = fieldnames or list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in fieldnames])


def write_manifest(out_dir: Path, cfg: ExperimentConfig, command: str,
                   extra: dict | None = None) -> None:
    manifest = {
        "tool": "phasebench",
        "version": __version__,
        "command": command,
        "master_seed": cfg.master_seed,
        "quick": cfg.quick,
        "config_sha256": cfg.config_hash(),
    }
    if extra:
        manifest.update(extra)
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True),
                      default=None, help="JSON config file.")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="Master seed (overrides config).")(fn)
    fn = click.option("--out", "out_dir", type=click.Path(), default="results",
                      help="Output directory.")(fn)
    fn = click.option("--quick", is_flag=True, default=False,
                      help="CI-scale grids (100 phases).")(fn)
    fn = click.option("--jobs", type=int, default=1,
                      help="Worker processes for parallel cells.")(fn)
    return fn


def _build_cfg(config_path, seed, quick, jobs, **overrides) -> ExperimentConfig:
    ov = {"master_seed": seed, "jobs": jobs}
    ov.update(overrides)
    cfg = load_config(config_path, {k: v for k, v in ov.items()
                                    if v is not None})
    if quick:
        cfg = cfg.with_(quick=True)
    return cfg


def _prepare_out(out_dir) -> Path:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


@click.group()
@click.version_option(__version__)
def main():
    """Phase-estimation workbench: simulations, sweeps, fits, SP tools."""


def _single_protocol(protocol, config_path, seed, out_dir, quick, jobs,
                     bits, resources, phase):
    overrides = {}
    if bits:
        overrides["bits"] = tuple(bits)
    if resources:
        overrides["resources"] = tuple(resources)
    if phase:
        overrides["phase_list"] = tuple(phase)
    cfg = _build_cfg(config_path, seed, quick, jobs, **overrides)
    out = _prepare_out(out_dir)
    rows = runners.run_protocol_rows(cfg, protocols=(protocol,))
    write_csv(out / f"{protocol}_rows.csv", rows)
    write_csv(out / f"{protocol}_summary.csv", runners.summarize_bits(rows))
    write_manifest(out, cfg, protocol)
    click.echo(f"{protocol}: {len(rows)} rows -> {out}")


def _protocol_command(name):
    @main.command(name, help=f"Run the {name} protocol over the "
                             "configured (bits x resources x phases) grid.")
    @common_options
    @click.option("--bits", "-m", multiple=True, type=int,
                  help="Bit counts (repeatable).")
    @click.option("--resources", "-R", multiple=True, type=int,
                  help="Resource budgets (repeatable).")
    @click.option("--phase", multiple=True, type=float,
                  help="Explicit phases in [0,1) (repeatable).")
    def _cmd(config_path, seed, out_dir, quick, jobs, bits, resources, phase):
        _single_protocol(name, config_path, seed, out_dir, quick, jobs,
                         bits, resources, phase)
    return _cmd


_protocol_command("ipe")
_protocol_command("kitaev")


@main.command("sweep-bits")
@common_options
def sweep_bits_cmd(config_path, seed, out_dir, quick, jobs):
    """Error vs bit count at fixed resource budgets."""
    cfg = _build_cfg(config_path, seed, quick, jobs)
    out = _prepare_out(out_dir)
    rows, summary = runners.sweep_bits(cfg)
    write_csv(out / "bits_rows.csv", rows)
    write_csv(out / "bits_summary.csv", summary)
    write_manifest(out, cfg, "sweep-bits")
    click.echo(f"sweep-bits: {len(rows)} rows -> {out}")


@main.command("sweep-resources")
@common_options
def sweep_resources_cmd(config_path, seed, out_dir, quick, jobs):
    """Best-over-bits error vs resource budget."""
    cfg = _build_cfg(config_path, seed, quick, jobs)
    out = _prepare_out(out_dir)
    rows, summary = runners.sweep_resources(cfg)
    write_csv(out / "resources_rows.csv", rows)
    write_csv(out / "resources_summary.csv", summary)
    write_manifest(out, cfg, "sweep-resources")
    click.echo(f"sweep-resources: {len(summary)} cells -> {out}")


@main.command("error-map")
@common_options
def error_map_cmd(config_path, seed, out_dir, quick, jobs):
    """Median error over a coherence x latency grid."""
    cfg = _build_cfg(config_path, seed, quick, jobs)
    out = _prepare_out(out_dir)
    cells = runners.error_map(cfg)
    write_csv(out / "error_map.csv", cells)
    write_manifest(out, cfg, "error-map")
    click.echo(f"error-map: {len(cells)} cells -> {out}")


@main.command("estimators")
@common_options
def estimators_cmd(config_path, seed, out_dir, quick, jobs):
    """Noiseless shootout of the shot-combination estimators."""
    cfg = _build_cfg(config_path, seed, quick, jobs)
    out = _prepare_out(out_dir)
    rows, summary = runners.estimator_shootout(cfg)
    write_csv(out / "estimators_rows.csv", rows)
    write_csv(out / "estimators_summary.csv", summary)
    write_manifest(out, cfg, "estimators")
    click.echo(f"estimators: {len(summary)} cells -> {out}")


@main.command("reset-demo")
@common_options
def reset_demo_cmd(config_path, seed, out_dir, quick, jobs):
    """Repeated measurement-and-reset quality demo."""
    cfg = _build_cfg(config_path, seed, quick, jobs)
    out = _prepare_out(out_dir)
    rows = runners.reset_demo(cfg)
    write_csv(out / "reset_demo.csv", rows)
    write_manifest(out, cfg, "reset-demo")
    for r in rows:
        click.echo(f"cycle {r['cycle']}: P(1) = {r['p1_reported']:.5f} "
                   f"(sampled {r['p1_sampled']:.5f})")


@main.command("readout-fit")
@common_options
@click.option("--noise", type=float, default=0.0,
              help="Additive Gaussian noise on synthetic curves.")
def readout_fit_cmd(config_path, seed, out_dir, quick, jobs, noise):
    """Fit synthetic readout-characterization data and report parameters."""
    cfg = _build_cfg(config_path, seed, quick, jobs)
    out = _prepare_out(out_dir)
    result = runners.readout_fit_report(cfg, noise=noise)
    report, art = result["report"], result["artifacts"]
    with open(out / "readout_report.json", "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
    dressed_rows = []
    from ..readout_physics import dressed_dephasing_curves
    fit_model = art["model"].with_(chi=report["chi_over_2pi_hz"] * 2 * math.pi,
                                   kappa=report["kappa_over_2pi_hz"]
                                   * 2 * math.pi)
    for a, (px, my) in enumerate(art["curves"]):
        eps_fit = art["dressed"].params[f"epsilon_{a}"]
        fx, fy = dressed_dephasing_curves(art["sweep"],
                                          fit_model.with_(epsilon=eps_fit))
        for i, dr in enumerate(art["sweep"]):
            dressed_rows.append({
                "amp_index": a, "delta_r_hz": dr / (2 * math.pi),
                "one_plus_x": px[i], "one_minus_y": my[i],
                "fit_one_plus_x": fx[i], "fit_one_minus_y": fy[i]})
    write_csv(out / "dressed_curves.csv", dressed_rows)
    from ..readout_physics import ReadoutModel, echo_signal
    echo_fit_model = ReadoutModel(
        chi=fit_model.chi, kappa=fit_model.kappa,
        gamma2=-math.log(art["echo"].params["alpha_c"]) / 5e-6,
        n0=art["echo"].params["n0"], t_ramsey=5e-6)
    echo_rows = [{"t_delay_s": t, "s_data": s,
                  "s_fit": echo_signal(t, echo_fit_model)}
                 for t, s in zip(art["t_delay"], art["s_data"])]
    write_csv(out / "echo_curve.csv", echo_rows)
    write_manifest(out, cfg, "readout-fit", {"noise": noise})
    click.echo(f"chi/2pi = {report['chi_over_2pi_hz'] / 1e6:.4f} MHz, "
               f"kappa/2pi = {report['kappa_over_2pi_hz'] / 1e6:.4f} MHz, "
               f"n0_corrected = "
               f"{art['echo'].params['n0_corrected']:.3f}")


# ---------------------------------------------------------------------------
# sequence-processor tools
# ---------------------------------------------------------------------------

@main.command("sp-asm")
@click.argument("source", type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path(),
              help="Output binary program.")
def sp_asm_cmd(source, output):
    """Assemble a .qasm text file into a binary SP program."""
    text = Path(source).read_text()
    statements = parse_asm(text)
    program = assemble(statements, build_waveform_table(statements))
    write_program_file(output, program.instructions)
    Path(str(output) + ".wft.json").write_text(program.to_sidecar_json())
    click.echo(f"{len(program.instructions)} instructions "
               f"({program.usage_ratio():.2%} of the 64K store) -> {output}")


@main.command("sp-run")
@click.argument("binary", type=click.Path(exists=True))
@click.option("--seed", type=int, default=0, help="Base seed.")
@click.option("--shots", type=int, default=1, help="Independent runs.")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="JSON config supplying device noise.")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Optional CSV of per-shot readout bits.")
def sp_run_cmd(binary, seed, shots, config_path, out_path):
    """Emulate a binary SP program against the density-matrix backend."""
    instructions = read_program_file(binary)
    sidecar = Path(str(binary) + ".wft.json")
    if not sidecar.exists():
        raise click.ClickException(
            f"waveform sidecar {sidecar} not found; emulation needs the "
            "block-to-gate mapping written by sp-asm")
    program = SPProgram.from_sidecar_json(instructions, sidecar.read_text())
    device = load_config(config_path).device if config_path else None
    rows = []
    for s in range(shots):
        rng = np.random.default_rng(np.random.SeedSequence([seed, s]))
        result = emulate(program, device=device, rng=rng)
        rows.append({"shot": s,
                     "bits": "".join(str(b) for b in result.bits),
                     "cycles": result.cycles})
    if out_path:
        write_csv(Path(out_path), rows)
    tally: dict = {}
    for r in rows:
        tally[r["bits"]] = tally.get(r["bits"], 0) + 1
    for bits, count in sorted(tally.items()):
        click.echo(f"{bits or '(none)'}: {count}")


@main.command("sp-compile-ipe")
@click.option("--bits", "-m", type=int, required=True)
@click.option("--phase", type=float, required=True)
@click.option("-o", "--output", required=True, type=click.Path())
def sp_compile_ipe_cmd(bits, phase, output):
    """Compile the adaptive protocol into an SP branch-tree program."""
    program = compile_ipe(bits, PhaseUnitaryDescriptor(phase))
    write_program_file(output, program.instructions)
    Path(str(output) + ".wft.json").write_text(program.to_sidecar_json())
    click.echo(f"{len(program.instructions)} instructions "
               f"({program.usage_ratio():.2%} of the 64K store) -> {output}")


def sp_asm_entry():
    sp_asm_cmd(standalone_mode=True)


def sp_run_entry():
    sp_run_cmd(standalone_mode=True)


if __name__ == "__main__":
    main()
