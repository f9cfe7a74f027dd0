"""Sweep runners producing deterministic, seed-reproducible result rows.

Every task (protocol, bits, resources, phase index) gets its own rng derived
as SeedSequence([master, protocol id, m, R, phase index]), so rows are
byte-identical across reruns, worker counts, and execution order; tasks are
embarrassingly parallel and results are assembled in a fixed sort order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from functools import lru_cache

import numpy as np

from .. import qpe, readout_physics as rp
from ..noise_model import DeviceParams
from .config import ExperimentConfig

PROTOCOL_IDS = {"ipe": 1, "kitaev": 2}


def task_rng(master_seed: int, protocol: str, m: int, resources: int,
             phase_index: int) -> np.random.Generator:
    """Per-task generator; the documented, stable seeding scheme."""
    return np.random.default_rng(np.random.SeedSequence(
        [master_seed, PROTOCOL_IDS[protocol], m, resources, phase_index]))


def seed_tag(master_seed: int, protocol: str, m: int, resources: int,
             phase_index: int) -> str:
    return f"{master_seed}-{PROTOCOL_IDS[protocol]}-{m}-{resources}-" \
        f"{phase_index}"


@lru_cache(maxsize=16)
def _kernels(phase: float, m: int, device: DeviceParams) -> qpe.IpeKernels:
    return qpe.IpeKernels(phase, m, device)


@lru_cache(maxsize=262144)
def _born(phase: float, k: int, device: DeviceParams) -> tuple:
    return qpe.kitaev_born_probabilities(phase, k, device)


def _run_one(protocol: str, phase: float, phase_idx: int, m: int, R: int,
             device: DeviceParams, master_seed: int, estimator: str) -> dict:
    row = {
        "protocol": protocol, "m": m, "R": R, "phase_index": phase_idx,
        "phase": phase, "estimate": "", "circular_error": "",
        "shots_per_circuit": 0, "measurements_used": 0,
        "seed": seed_tag(master_seed, protocol, m, R, phase_idx),
        "skipped": 0,
    }
    try:
        shots = qpe.allocate_shots(qpe.ResourceBudget(R, m), protocol)
    except ValueError:
        row["skipped"] = 1
        return row
    rng = task_rng(master_seed, protocol, m, R, phase_idx)
    if protocol == "ipe":
        kern = _kernels(phase, m, device)
        shot_bits = [kern.run_shot(rng) for _ in range(shots)]
        est = qpe.ipe_estimate(shot_bits, estimator, m)
        err = qpe.circular_error(est.value, phase)
        used = shots * m
    else:
        alphas = []
        for k in range(1, m + 1):
            p0c, p0s = _born(phase, k, device)
            rep_c = qpe._reported_p0(p0c, device)
            rep_s = qpe._reported_p0(p0s, device)
            n0c = int(rng.binomial(shots, rep_c))
            n0s = int(rng.binomial(shots, rep_s))
            alphas.append(qpe.kitaev_alpha(n0c / shots, n0s / shots))
        est = qpe.kitaev_estimate(qpe.AlphaEstimates(tuple(alphas)))
        err = qpe.circular_error(est.value, phase)
        used = 2 * m * shots
    row.update(estimate=est.value, circular_error=err,
               shots_per_circuit=shots, measurements_used=used)
    return row


def _run_task(task) -> dict:
    return _run_one(*task)


def _execute(tasks, jobs: int) -> list:
    if jobs <= 1 or len(tasks) < 4:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        chunk = max(1, len(tasks) // (jobs * 8))
        return list(pool.map(_run_task, tasks, chunksize=chunk))


def _median_mean(values) -> tuple:
    arr = np.asarray(values, dtype=float)
    return float(np.median(arr)), float(np.mean(arr))


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def run_protocol_rows(cfg: ExperimentConfig, protocols=None) -> list:
    """Per-(protocol, m, R, phase) result rows over the config grid."""
    protocols = protocols or cfg.protocols()
    phases = cfg.phases()
    tasks = []
    for protocol in protocols:
        for m in cfg.bits:
            for idx, phase in enumerate(phases):
                for R in cfg.resources:
                    tasks.append((protocol, float(phase), idx, m, R,
                                  cfg.device, cfg.master_seed, cfg.estimator))
    rows = _execute(tasks, cfg.jobs)
    rows.sort(key=lambda r: (r["protocol"], r["m"], r["R"], r["phase_index"]))
    return rows


def summarize_bits(rows) -> list:
    """Median/mean error per (protocol, m, R) with the quantization bound."""
    cells: dict = {}
    for r in rows:
        cells.setdefault((r["protocol"], r["m"], r["R"]), []).append(r)
    out = []
    for (protocol, m, R), cell in sorted(cells.items()):
        ok = [r["circular_error"] for r in cell if not r["skipped"]]
        med, mean = _median_mean(ok) if ok else (float("nan"), float("nan"))
        out.append({
            "protocol": protocol, "m": m, "R": R,
            "n_phases": len(ok), "n_skipped": len(cell) - len(ok),
            "median_error": med, "mean_error": mean,
            "lower_bound": 1.0 / 2 ** (m + 1),
        })
    return out


def sweep_bits(cfg: ExperimentConfig) -> tuple:
    """Error-vs-bit-count sweep at fixed resource budgets."""
    rows = run_protocol_rows(cfg)
    return rows, summarize_bits(rows)


def summarize_resources(summary_bits) -> list:
    """Per (protocol, R): the best bit count and its median error."""
    best: dict = {}
    for s in summary_bits:
        if s["n_phases"] == 0 or math.isnan(s["median_error"]):
            continue
        key = (s["protocol"], s["R"])
        cur = best.get(key)
        if cur is None or s["median_error"] < cur["median_error"]:
            best[key] = {"protocol": s["protocol"], "R": s["R"],
                         "best_m": s["m"],
                         "median_error": s["median_error"],
                         "mean_error": s["mean_error"]}
    return [best[k] for k in sorted(best)]


def sweep_resources(cfg: ExperimentConfig) -> tuple:
    """Error-vs-resources sweep, minimized over the available bit counts."""
    rows, summary_bits = sweep_bits(cfg)
    return rows, summarize_resources(summary_bits)


def error_map(cfg: ExperimentConfig, return_rows: bool = False):
    """Coherence x latency grid of median errors (both protocols).

    Per cell the device uses a single T1 = T2 = T metric for both qubits
    and the cell's measurement+reset latency, with fixed assignment and
    reset errors; every cell reuses the same per-phase seeds, so the
    latency-independent protocol is exactly flat across a row.  With
    ``return_rows`` the per-phase error vectors are returned alongside the
    cell summaries, keyed by (protocol, t_us, latency_us, R).
    """
    em = cfg.error_map
    phases = cfg.phases()
    base = cfg.device
    cells = []
    for t_us in em.t_grid_us:
        for lat_us in em.latency_grid_us:
            device = replace(
                base, t1=(t_us * 1e-6,), t2=(t_us * 1e-6,),
                meas_reset_latency=lat_us * 1e-6,
                p_assign_1given0=em.p_assign, p_assign_0given1=em.p_assign,
                p_reset_excited=em.p_reset)
            cells.append((t_us, lat_us, device))
    out = []
    per_phase: dict = {}
    for t_us, lat_us, device in cells:
        for R in em.resources:
            errs = {}
            for protocol in ("ipe", "kitaev"):
                tasks = [(protocol, float(ph), idx, em.bits, R, device,
                          cfg.master_seed, cfg.estimator)
                         for idx, ph in enumerate(phases)]
                rows = _execute(tasks, cfg.jobs)
                vals = [r["circular_error"] for r in rows if not r["skipped"]]
                errs[protocol] = _median_mean(vals)
                per_phase[(protocol, t_us, lat_us, R)] = vals
            out.append({
                "t_us": t_us, "latency_us": lat_us, "R": R, "m": em.bits,
                "n_phases": len(phases),
                "ipe_median": errs["ipe"][0], "ipe_mean": errs["ipe"][1],
                "kitaev_median": errs["kitaev"][0],
                "kitaev_mean": errs["kitaev"][1],
                "median_difference": errs["ipe"][0] - errs["kitaev"][0],
            })
    if return_rows:
        return out, per_phase
    return out


def estimator_shootout(cfg: ExperimentConfig) -> tuple:
    """Noiseless error-vs-resources comparison of the four shot estimators
    plus the non-adaptive protocol as reference.

    All estimators consume the same shot set per (R, phase), so method
    differences are paired.
    """
    st = cfg.shootout
    m = st.bits
    device = DeviceParams.noiseless()
    n_ph = min(st.n_phases, 150) if cfg.quick else st.n_phases
    rng_ph = np.random.default_rng(
        np.random.SeedSequence([cfg.master_seed, 0x5400d0]))
    phases = rng_ph.random(n_ph)
    rows = []
    for R in st.resources:
        shots = R // m
        if shots < 1:
            continue
        kit_shots = R // (2 * m)
        for idx, phase in enumerate(phases):
            phase = float(phase)
            rng = task_rng(cfg.master_seed, "ipe", m, R, idx)
            kern = _kernels(phase, m, device)
            shot_bits = [kern.run_shot(rng) for _ in range(shots)]
            for method in qpe.IPE_METHODS:
                est = qpe.ipe_estimate(shot_bits, method, m)
                rows.append({"method": method, "R": R, "m": m,
                             "phase_index": idx, "phase": phase,
                             "error": qpe.circular_error(est.value, phase)})
            if kit_shots >= 1:
                krng = task_rng(cfg.master_seed, "kitaev", m, R, idx)
                rec = qpe.run_kitaev(phase, m, kit_shots, device, krng)
                rows.append({"method": "kitaev", "R": R, "m": m,
                             "phase_index": idx, "phase": phase,
                             "error": rec.circular_err})
    summary_cells: dict = {}
    for r in rows:
        summary_cells.setdefault((r["method"], r["R"]), []).append(r["error"])
    summary = []
    for (method, R), errs in sorted(summary_cells.items()):
        med, mean = _median_mean(errs)
        summary.append({"method": method, "R": R, "m": m,
                        "n_phases": len(errs), "mean_error": mean,
                        "median_error": med})
    return rows, summary


# ---------------------------------------------------------------------------
# repeated measurement and reset demo
# ---------------------------------------------------------------------------

def calibrate_reset_excitation(target_reported: float, p01: float,
                               p10: float) -> float:
    """Per-cycle excitation so the first cycle's reported P(1) matches.

    Starting from P(1) = 1/2 after the Hadamard, one cycle leaves true
    population x1 = (target - p10) / (1 - p01 - p10) once assignment errors
    are unfolded; the excitation then tops up the post-flip population
    y1 = (p01 + p10)/2 to x1.
    """
    x1 = (target_reported - p10) / (1.0 - p01 - p10)
    y1 = 0.5 * (p01 + p10)
    eps = (x1 - y1) / (1.0 - y1)
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"calibration infeasible: epsilon = {eps}")
    return eps


def _cycle_population(x: float, p01: float, p10: float, eps: float) -> float:
    """Exact excited population after one measure/flip/excite cycle."""
    y = x * p01 + (1.0 - x) * p10
    return y + (1.0 - y) * eps


def reset_demo(cfg: ExperimentConfig) -> list:
    """Hadamard followed by repeated measure-and-reset cycles.

    Emits, per cycle, the exact excited population and reported-1
    probability from the lumped cycle channel, a sampled estimate (the
    following measurement's reported fraction over ``shots`` runs), and the
    Hellinger-distance-derived reset error/fidelity.
    """
    rd = cfg.reset_demo
    p01, p10 = rd.p_assign_0given1, rd.p_assign_1given0
    eps = calibrate_reset_excitation(rd.target_single_cycle, p01, p10)
    shots = min(rd.shots, 5000) if cfg.quick else rd.shots

    # exact chain
    true_pop = [0.5]
    for _ in range(rd.cycles):
        true_pop.append(_cycle_population(true_pop[-1], p01, p10, eps))
    reported = [x * (1.0 - p01) + (1.0 - x) * p10 for x in true_pop]

    # sampled chain: classical per-shot trajectory of the same model
    rng = np.random.default_rng(
        np.random.SeedSequence([cfg.master_seed, 0x4e5e7]))
    counts = np.zeros(rd.cycles + 1, dtype=int)
    for _ in range(shots):
        excited = rng.random() < 0.5          # Hadamard then projective draw
        for j in range(rd.cycles + 1):
            rep = (rng.random() >= p01) if excited else (rng.random() < p10)
            counts[j] += rep
            if j == rd.cycles:
                break                          # final probe, no reset
            if rep:
                excited = not excited         # reported 1 gates the flip
            if not excited and rng.random() < eps:
                excited = True
    sampled = counts / shots

    out = []
    for j in range(rd.cycles + 1):
        p1 = true_pop[j]
        out.append({
            "cycle": j,
            "p1_true": p1,
            "p1_reported": reported[j],
            "p1_sampled": float(sampled[j]),
            "n_shots": shots,
            "hellinger_sq": rp.hellinger_sq([1.0 - p1, p1], [1.0, 0.0]),
            "reset_fidelity": rp.reset_fidelity(p1),
            "excitation_per_cycle": eps,
        })
    return out


# ---------------------------------------------------------------------------
# readout characterization on synthetic data
# ---------------------------------------------------------------------------

CHI_TRUE = 2.0 * math.pi * 2.9e6
KAPPA_TRUE = 2.0 * math.pi * 5.7e6
GAMMA2_TRUE = 1.0 / 41.92e-6
NBAR_TRUE = (0.04, 0.28)
DAC_VOLTS = (0.01, 0.025)
ECHO_CONTRAST_TRUE = 0.8
ECHO_N0_TRUE = 3.8
# amplitude whose photon number is 11 on the line through the two points
ALG_POWER_V2 = DAC_VOLTS[0] ** 2 + (11.0 - NBAR_TRUE[0]) \
    * (DAC_VOLTS[1] ** 2 - DAC_VOLTS[0] ** 2) / (NBAR_TRUE[1] - NBAR_TRUE[0])
ANHARMONICITY = -2.0 * math.pi * 343.1e6
QUBIT_MINUS_RESONATOR = 2.0 * math.pi * (5.3634e9 - 7.01325e9)


def readout_fit_report(cfg: ExperimentConfig, noise: float = 0.0) -> dict:
    """Synthesize the two calibration experiments at the reference device
    parameters, fit them, and assemble a JSON-ready report."""
    n_det = 25 if cfg.quick else 41
    sweep = 2.0 * math.pi * np.linspace(-12e6, 12e6, n_det)
    model = rp.ReadoutModel(chi=CHI_TRUE, kappa=KAPPA_TRUE,
                            gamma2=GAMMA2_TRUE, t_pulse=400e-9)
    rng = np.random.default_rng(
        np.random.SeedSequence([cfg.master_seed, 0x4ead]))
    scale = math.sqrt((KAPPA_TRUE / 2) ** 2 + CHI_TRUE ** 2)
    epsilons = [math.sqrt(nb) * scale for nb in NBAR_TRUE]
    curves = []
    for eps in epsilons:
        px, my = rp.dressed_dephasing_signal(sweep, model.with_(epsilon=eps))
        if noise > 0:
            px = px + rng.normal(scale=noise, size=px.shape)
            my = my + rng.normal(scale=noise, size=my.shape)
        curves.append((px, my))
    start = model.with_(chi=CHI_TRUE * 1.4, kappa=KAPPA_TRUE * 0.7,
                        epsilon=epsilons[0])
    dressed = rp.fit_dressed_dephasing(sweep, curves, start)
    chi_fit, kappa_fit = dressed.params["chi"], dressed.params["kappa"]

    echo_model = rp.ReadoutModel(
        chi=CHI_TRUE, kappa=KAPPA_TRUE, n0=ECHO_N0_TRUE,
        gamma2=-math.log(ECHO_CONTRAST_TRUE) / 5e-6, t_ramsey=5e-6)
    t_delay = np.linspace(0.0, 1.2e-6, 30 if cfg.quick else 60)
    s_data = rp.echo_signal(t_delay, echo_model)
    if noise > 0:
        s_data = s_data + rng.normal(scale=noise, size=s_data.shape)
    echo = rp.fit_photon_number(t_delay, s_data, chi_fit, kappa_fit)

    nbars = [dressed.params[f"nbar_{i}"] for i in range(len(NBAR_TRUE))]
    nbar_alg = rp.nbar_extrapolate([v ** 2 for v in DAC_VOLTS], nbars,
                                   ALG_POWER_V2)
    report = {
        "dressed_dephasing": dressed.to_records(),
        "photon_echo": echo.to_records(),
        "chi_over_2pi_hz": chi_fit / (2 * math.pi),
        "kappa_over_2pi_hz": kappa_fit / (2 * math.pi),
        "gate_length_correction": math.exp(kappa_fit * 30e-9),
        "nbar_at_algorithm_power": nbar_alg,
        "n_crit": rp.n_crit(ANHARMONICITY, QUBIT_MINUS_RESONATOR, chi_fit),
        "noise_level": noise,
    }
    artifacts = {
        "sweep": sweep, "curves": curves, "model": model,
        "epsilons": epsilons, "t_delay": t_delay, "s_data": s_data,
        "dressed": dressed, "echo": echo,
    }
    return {"report": report, "artifacts": artifacts}
