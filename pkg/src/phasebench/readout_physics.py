"""Dispersive-readout forward models, fitters, and matched-filter
discrimination on synthetic I/Q traces.

Sign conventions: the dispersive shift pulls the resonator by chi_e = +chi
with the qubit excited and chi_g = -chi in the ground state (full
peak-to-peak shift 2 chi).  The resonator response to a square drive pulse
of amplitude epsilon and detuning delta_r is

    alpha_i(t) = -i eps (1 - exp(-t D_i)) / D_i,   D_i = kappa/2 + i(delta_r + chi_i)

during the pulse (alpha_i(0) = 0) and decays as alpha_i(t_p) exp(-(t-t_p) D_i)
afterwards; continuity at the pulse edge is enforced.  The qubit then sees a
photon-dependent frequency shift and dephasing

    Omega(t) = (chi_g - chi_e) Re[alpha_g* alpha_e]
    Gamma(t) = (chi_g - chi_e) Im[alpha_g* alpha_e]

entering the equatorial Bloch equations

    dX/dt = -Omega Y - (gamma2 + Gamma) X
    dY/dt = +Omega X - (gamma2 + Gamma) Y

in the frame co-rotating with the Lamb-shifted qubit frequency.  Writing
Z = X + iY collapses them to dZ/dt = [-gamma2 + i(chi_g-chi_e) P(t)] Z with
P = alpha_g* alpha_e, whose integral has a closed form; the fitters use it,
while :func:`bloch_integrate` provides the direct fixed-step RK4 route used
to generate data and to cross-check the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize


# ---------------------------------------------------------------------------
# model containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReadoutModel:
    """Parameters of the dispersive-readout forward models (angular units)."""

    chi: float                   # rad/s dispersive half-shift
    kappa: float                 # rad/s resonator linewidth
    epsilon: float = 0.0         # rad/s drive amplitude
    delta_r: float = 0.0         # rad/s drive detuning from bare resonator
    gamma2: float = 0.0          # 1/s qubit dephasing rate
    t_pulse: float = 400e-9      # s drive pulse length
    phi0: float = -math.pi / 2   # rad initial echo phase
    n0: float = 0.0              # photons at pulse end (echo model)
    t_gate: float = 30e-9        # s single-qubit gate length
    t_ramsey: float = 5e-6       # s echo Ramsey delay

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.n0 < 0:
            raise ValueError("n0 must be non-negative")

    def chi_of(self, state: int) -> float:
        return self.chi if state == 1 else -self.chi

    def with_(self, **kwargs) -> "ReadoutModel":
        return replace(self, **kwargs)


@dataclass
class IQTraceSet:
    """Demodulated complex readout traces for one prepared qubit state."""

    sample_period: float
    traces: np.ndarray           # (n_traces, n_samples) complex
    label: int

    def __post_init__(self):
        self.traces = np.asarray(self.traces, dtype=complex)
        if self.traces.ndim != 2 or self.traces.shape[0] < 2:
            raise ValueError("need at least 2 equal-length traces")
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")


# ---------------------------------------------------------------------------
# resonator response and induced qubit dynamics
# ---------------------------------------------------------------------------

def resonator_alpha(t, state: int, model: ReadoutModel):
    """Resonator amplitude at time(s) t for qubit state 0 or 1."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    d = model.kappa / 2.0 + 1j * (model.delta_r + model.chi_of(state))
    during = -1j * model.epsilon * (1.0 - np.exp(-t * d)) / d
    edge = -1j * model.epsilon * (1.0 - np.exp(-model.t_pulse * d)) / d
    after = edge * np.exp(-(t - model.t_pulse) * d)
    out = np.where(t <= model.t_pulse, during, after)
    return out if out.ndim else complex(out)


def stark_and_dephasing(t, model: ReadoutModel):
    """(AC Stark shift Omega_ge, induced dephasing Gamma_ge) at time(s) t."""
    p = np.conj(resonator_alpha(t, 0, model)) * resonator_alpha(t, 1, model)
    pref = model.chi_of(0) - model.chi_of(1)       # = -2 chi
    omega = pref * np.real(p)
    gamma = pref * np.imag(p)
    if np.ndim(omega):
        return omega, gamma
    return float(omega), float(gamma)


def rk4_bloch(x0: float, y0: float, om: np.ndarray, ga: np.ndarray,
              dt: float):
    """Fixed-step RK4 on dX = -om Y - ga X, dY = om X - ga Y.

    ``om`` and ``ga`` are sampled on the half-step grid (2 n_steps + 1
    points, including both endpoints).
    """
    n_steps = (len(om) - 1) // 2
    xs = np.empty(n_steps + 1)
    ys = np.empty(n_steps + 1)
    xs[0], ys[0] = x0, y0

    def deriv(x, y, i):
        return -om[i] * y - ga[i] * x, om[i] * x - ga[i] * y

    for n in range(n_steps):
        i0, i1 = 2 * n, 2 * n + 1
        x, y = xs[n], ys[n]
        k1x, k1y = deriv(x, y, i0)
        k2x, k2y = deriv(x + dt / 2 * k1x, y + dt / 2 * k1y, i1)
        k3x, k3y = deriv(x + dt / 2 * k2x, y + dt / 2 * k2y, i1)
        k4x, k4y = deriv(x + dt * k3x, y + dt * k3y, i0 + 2)
        xs[n + 1] = x + dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        ys[n + 1] = y + dt / 6 * (k1y + 2 * k2y + 2 * k3y + k4y)
    return xs, ys


def bloch_integrate(x0: float, y0: float, model: ReadoutModel, t_end: float,
                    dt: float):
    """Fixed-step RK4 integration of the driven equatorial Bloch equations.

    Returns (ts, X, Y) including the initial point.  Raises if the step
    violates dt <= 1/(10 max(kappa, |Omega|_max)).
    """
    if dt <= 0 or t_end <= 0:
        raise ValueError("dt and t_end must be positive")
    n_steps = int(round(t_end / dt))
    ts = np.arange(n_steps + 1) * dt
    half = np.arange(2 * n_steps + 1) * (dt / 2.0)
    om, ga = stark_and_dephasing(half, model)
    om = np.atleast_1d(om)
    ga = np.atleast_1d(ga) + model.gamma2
    limit = 1.0 / (10.0 * max(model.kappa, float(np.max(np.abs(om))) or 1.0))
    if dt > limit * (1 + 1e-9):
        raise ValueError(
            f"step {dt} too large for stability; need dt <= {limit:.3e}")
    xs, ys = rk4_bloch(x0, y0, om, ga, dt)
    return ts, xs, ys


def _coherence_exponent(delta_r, model: ReadoutModel, t_delay: float):
    """Closed form of integral of P = alpha_g* alpha_e over drive + delay.

    Returns the complex exponent  -gamma2 t_end + i (chi_g - chi_e) Int(P),
    vectorized over delta_r.
    """
    delta_r = np.asarray(delta_r, dtype=float)
    dg = model.kappa / 2.0 + 1j * (delta_r - model.chi)
    de = model.kappa / 2.0 + 1j * (delta_r + model.chi)
    ag = -1j * model.epsilon / dg
    ae = -1j * model.epsilon / de
    tp = model.t_pulse

    def f(a, t):
        return (1.0 - np.exp(-a * t)) / a

    dgc = np.conj(dg)
    pref = np.conj(ag) * ae
    int_pulse = pref * (tp - f(dgc, tp) - f(de, tp) + f(dgc + de, tp))
    p_edge = pref * (1.0 - np.exp(-dgc * tp)) * (1.0 - np.exp(-de * tp))
    int_after = p_edge * f(dgc + de, t_delay)
    total = int_pulse + int_after
    return -model.gamma2 * (tp + t_delay) + 1j * (-2.0 * model.chi) * total


def dressed_dephasing_signal(delta_r_sweep, model: ReadoutModel,
                             t_delay: float = 500e-9,
                             dt: float | None = None):
    """Final (1+X, 1-Y) after the probe-modified Ramsey sequence.

    The qubit starts on the equator at (X, Y) = (1, 0), the resonator probe
    runs for ``model.t_pulse`` at each detuning in the sweep, and the state
    evolves for a further ``t_delay`` while the resonator rings down.
    Direct RK4 route; see :func:`dressed_dephasing_curves` for the
    closed-form equivalent used inside the fitters.
    """
    delta_r_sweep = np.asarray(delta_r_sweep, dtype=float)
    t_end = model.t_pulse + t_delay
    one_plus_x = np.empty(delta_r_sweep.shape)
    one_minus_y = np.empty(delta_r_sweep.shape)
    for i, dr in enumerate(delta_r_sweep):
        m = model.with_(delta_r=float(dr))
        if dt is None:
            om_max = float(np.max(np.abs(
                stark_and_dephasing(np.linspace(0, t_end, 257), m)[0])))
            step = 1.0 / (20.0 * max(m.kappa, om_max, 1.0))
        else:
            step = dt
        _, xs, ys = bloch_integrate(1.0, 0.0, m, t_end, step)
        one_plus_x[i] = 1.0 + xs[-1]
        one_minus_y[i] = 1.0 - ys[-1]
    return one_plus_x, one_minus_y


def dressed_dephasing_curves(delta_r_sweep, model: ReadoutModel,
                             t_delay: float = 500e-9):
    """Closed-form equivalent of :func:`dressed_dephasing_signal`."""
    z = np.exp(_coherence_exponent(np.asarray(delta_r_sweep, float),
                                   model, t_delay))
    return 1.0 + np.real(z), 1.0 - np.imag(z)


def nbar_midpoint(epsilon: float, chi: float, kappa: float) -> float:
    """Steady-state photons when driving halfway between the two peaks."""
    return epsilon ** 2 / ((kappa / 2.0) ** 2 + chi ** 2)


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

@dataclass
class FitResult:
    params: dict
    stderr: dict
    residual: float
    converged: bool

    def to_records(self) -> list:
        return [{"parameter": k, "value": v,
                 "stderr_proxy": self.stderr.get(k, float("nan")),
                 "residual": self.residual}
                for k, v in self.params.items()]


def _multistart_simplex(objective, starts, maxiter, early_stop=None):
    best = None
    converged = False
    for s0 in starts:
        res = minimize(objective, s0, method="Nelder-Mead",
                       options={"maxiter": maxiter, "xatol": 1e-10,
                                "fatol": 1e-14, "adaptive": True})
        if best is None or res.fun < best.fun:
            best = res
            converged = converged or res.success
        if early_stop is not None and best.fun <= early_stop:
            break
    # polish from the incumbent
    res = minimize(objective, best.x, method="Nelder-Mead",
                   options={"maxiter": maxiter, "xatol": 1e-12,
                            "fatol": 1e-16, "adaptive": True})
    if res.fun <= best.fun:
        best = res
        converged = converged or res.success
    return best, converged


def _stderr_proxy(objective, x, names, fun):
    """Gauss-Newton style covariance proxy from a finite-difference Hessian
    diagonal of the scalar least-squares objective."""
    out = {}
    dof = 1.0
    for i, name in enumerate(names):
        h = max(abs(x[i]) * 1e-4, 1e-9)
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        second = (objective(xp) - 2 * fun + objective(xm)) / h ** 2
        out[name] = math.sqrt(2.0 * max(fun, 1e-300) / dof / second) \
            if second > 0 else float("nan")
    return out


def fit_dressed_dephasing(delta_r, curves: Sequence, model: ReadoutModel,
                          t_delay: float = 500e-9, n_starts: int = 8,
                          maxiter: int = 2000) -> FitResult:
    """Simultaneous fit of chi, kappa, and one drive amplitude per sweep.

    ``curves`` holds one (one_plus_x, one_minus_y) pair per probe amplitude;
    at least two amplitudes are required.  Derivative-free simplex with
    multi-start on a log-spaced grid around the template model; reported
    ``nbar`` values are the steady-state midpoint photons of each fitted
    amplitude.
    """
    delta_r = np.asarray(delta_r, dtype=float)
    if len(curves) < 2:
        raise ValueError("need curves at two or more drive amplitudes")
    data = [np.concatenate([np.asarray(a, float), np.asarray(b, float)])
            for a, b in curves]
    n_amp = len(curves)
    scale = sum(float(np.sum(d ** 2)) for d in data)

    def objective(logp):
        chi, kappa = np.exp(logp[0]), np.exp(logp[1])
        eps = np.exp(logp[2:])
        total = 0.0
        for a in range(n_amp):
            m = model.with_(chi=chi, kappa=kappa, epsilon=float(eps[a]))
            px, my = dressed_dephasing_curves(delta_r, m, t_delay)
            resid = np.concatenate([px, my]) - data[a]
            total += float(resid @ resid)
        return total

    # crude per-amplitude epsilon guess from curve contrast at the template
    eps0 = [model.epsilon if model.epsilon > 0
            else 0.1 * math.sqrt((model.kappa / 2) ** 2 + model.chi ** 2)
            for _ in range(n_amp)]
    base = np.log([model.chi, model.kappa] + eps0)
    factors = [1.0, 0.5, 2.0, 0.25, 4.0]
    starts = []
    for i in range(n_starts):
        fc = factors[i % len(factors)]
        fk = factors[(i // len(factors)) % len(factors)]
        s = base.copy()
        s[0] += math.log(fc)
        s[1] += math.log(fk)
        starts.append(s)
    best, converged = _multistart_simplex(objective, starts, maxiter,
                                          early_stop=1e-18 * max(scale, 1.0))
    chi, kappa = float(np.exp(best.x[0])), float(np.exp(best.x[1]))
    eps = [float(v) for v in np.exp(best.x[2:])]
    params = {"chi": chi, "kappa": kappa}
    for a, e in enumerate(eps):
        params[f"epsilon_{a}"] = e
        params[f"nbar_{a}"] = nbar_midpoint(e, chi, kappa)
    names = ["chi", "kappa"] + [f"epsilon_{a}" for a in range(n_amp)]
    log_err = _stderr_proxy(objective, best.x, names, best.fun)
    stderr = {k: abs(params.get(k, 1.0)) * v for k, v in log_err.items()}
    return FitResult(params, stderr, float(best.fun), bool(converged))


# ---------------------------------------------------------------------------
# photon-number echo model
# ---------------------------------------------------------------------------

def echo_beta(chi: float, kappa: float) -> float:
    """Distinguishability parameter beta = 4 chi^2 / (kappa^2 + 4 chi^2)."""
    return 4.0 * chi ** 2 / (kappa ** 2 + 4.0 * chi ** 2)


def echo_signal(t_delay, model: ReadoutModel):
    """Echo contrast vs delay after the readout pulse.

    S = 1/2 [1 - alpha_c exp(-beta n(t)) cos(n(t) 2 chi kappa / (kappa^2 + 4 chi^2))]

    with n(t) = n0 exp(-kappa t) and contrast alpha_c = exp(-Gamma2 t_R).
    The cosine argument is kept in non-cancelled form so chi -> 0 is smooth.
    Warns outside the kappa t_R >> 1 regime where the model holds.
    """
    if model.kappa * model.t_ramsey < 5.0:
        import warnings
        warnings.warn("echo model assumes kappa * t_ramsey >> 1; "
                      f"got {model.kappa * model.t_ramsey:.2f}")
    t_delay = np.asarray(t_delay, dtype=float)
    alpha_c = math.exp(-model.gamma2 * model.t_ramsey)
    beta = echo_beta(model.chi, model.kappa)
    n_t = model.n0 * np.exp(-model.kappa * t_delay)
    cos_arg = n_t * 2.0 * model.chi * model.kappa / (
        model.kappa ** 2 + 4.0 * model.chi ** 2)
    s = 0.5 * (1.0 - alpha_c * np.exp(-beta * n_t) * np.cos(cos_arg))
    return s if s.ndim else float(s)


def fit_photon_number(t_delay, s_data, chi: float, kappa: float,
                      t_ramsey: float = 5e-6, t_gate: float = 30e-9,
                      maxiter: int = 4000) -> FitResult:
    """Two-parameter (contrast, n0) fit of the echo decay.

    chi and kappa come from the dressed-dephasing calibration and are held
    fixed.  The reported ``n0_corrected`` multiplies the fitted photon
    number by exp(kappa t_gate) to undo the finite-gate-length bias, and
    ``distinguishability`` is 4 beta n0.
    """
    t_delay = np.asarray(t_delay, dtype=float)
    s_data = np.asarray(s_data, dtype=float)
    base = ReadoutModel(chi=chi, kappa=kappa, t_ramsey=t_ramsey,
                        t_gate=t_gate)

    def objective(p):
        alpha_c, n0 = p
        if not 0.0 < alpha_c <= 1.0 or n0 < 0.0:
            return 1e6
        gamma2 = -math.log(alpha_c) / t_ramsey if alpha_c < 1.0 else 0.0
        m = base.with_(gamma2=gamma2, n0=n0)
        resid = echo_signal(t_delay, m) - s_data
        return float(resid @ resid)

    starts = [(a, n) for a in (0.5, 0.8, 0.95) for n in (1.0, 4.0, 10.0)]
    best, converged = _multistart_simplex(objective, starts, maxiter,
                                          early_stop=1e-22 * s_data.size)
    alpha_c, n0 = float(best.x[0]), float(best.x[1])
    corrected = n0 * math.exp(kappa * t_gate)
    params = {"alpha_c": alpha_c, "n0": n0, "n0_corrected": corrected,
              "distinguishability": 4.0 * echo_beta(chi, kappa) * n0}
    stderr = _stderr_proxy(objective, best.x, ["alpha_c", "n0"], best.fun)
    stderr["n0_corrected"] = stderr.get("n0", float("nan")) * math.exp(
        kappa * t_gate)
    return FitResult(params, stderr, float(best.fun), bool(converged))


def nbar_extrapolate(amplitudes_sq, nbars, target_amp_sq: float) -> float:
    """Linear photon-number-vs-power fit evaluated at a target power."""
    coef = np.polyfit(np.asarray(amplitudes_sq, float),
                      np.asarray(nbars, float), 1)
    return float(np.polyval(coef, target_amp_sq))


def n_crit(anharmonicity: float, detuning: float, chi: float) -> float:
    """Critical photon number |alpha Delta / (4 chi (Delta + alpha))|.

    ``detuning`` is qubit minus resonator frequency (rad/s), and the
    transmon anharmonicity is negative in the same units.
    """
    if chi == 0.0:
        raise ZeroDivisionError("n_crit diverges at chi = 0")
    if detuning + anharmonicity == 0.0:
        raise ZeroDivisionError("n_crit undefined at Delta + alpha = 0")
    return abs(anharmonicity * detuning
               / (4.0 * chi * (detuning + anharmonicity)))


# ---------------------------------------------------------------------------
# distribution distance
# ---------------------------------------------------------------------------

def hellinger_sq(p: Sequence[float], q: Sequence[float]) -> float:
    """Squared Hellinger distance 1/2 sum (sqrt(p_i) - sqrt(q_i))^2."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions differ in length")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("probabilities must be non-negative")
    for name, dist in (("P", p), ("Q", q)):
        if abs(dist.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} sums to {dist.sum()}, not 1")
    return float(0.5 * np.sum((np.sqrt(p) - np.sqrt(q)) ** 2))


def reset_fidelity(p_excited: float) -> float:
    """Bhattacharyya-squared fidelity of a reset against the ideal (1, 0)."""
    h2 = hellinger_sq([1.0 - p_excited, p_excited], [1.0, 0.0])
    return (1.0 - h2) ** 2


# ---------------------------------------------------------------------------
# matched-filter discrimination
# ---------------------------------------------------------------------------

def matched_filter(traces0: IQTraceSet, traces1: IQTraceSet):
    """Kernel (difference of mean traces) and midpoint threshold.

    Scores are Re <kernel, trace>; orientation puts prepared-0 traces above
    the threshold.
    """
    for ts in (traces0, traces1):
        if ts.traces.shape[0] < 100:
            raise ValueError("need at least 100 traces per label")
    if traces0.traces.shape[1] != traces1.traces.shape[1]:
        raise ValueError("trace lengths differ between labels")
    kernel = traces0.traces.mean(axis=0) - traces1.traces.mean(axis=0)
    if np.max(np.abs(kernel)) < 1e-15:
        raise ValueError("mean traces are identical; kernel is degenerate")
    s0 = project_scores(traces0.traces, kernel)
    s1 = project_scores(traces1.traces, kernel)
    threshold = 0.5 * (float(s0.mean()) + float(s1.mean()))
    return kernel, threshold


def project_scores(traces: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return np.real(traces @ kernel.conj())


def discriminate(trace: np.ndarray, kernel: np.ndarray,
                 threshold: float) -> int:
    trace = np.asarray(trace)
    if trace.shape != kernel.shape:
        raise ValueError("trace and kernel lengths differ")
    score = float(np.real(np.dot(trace, kernel.conj())))
    return 0 if score >= threshold else 1


def fisher_separation(scores0: np.ndarray, scores1: np.ndarray) -> float:
    """(mu0 - mu1)^2 / (var0 + var1) of the projected scores."""
    m0, m1 = float(np.mean(scores0)), float(np.mean(scores1))
    v0, v1 = float(np.var(scores0)), float(np.var(scores1))
    return (m0 - m1) ** 2 / (v0 + v1)


def assignment_error(sets: Sequence[IQTraceSet], kernel: np.ndarray,
                     threshold: float) -> float:
    """Misclassified fraction over all traces of the given labeled sets."""
    wrong = total = 0
    for ts in sets:
        bits = (project_scores(ts.traces, kernel) < threshold).astype(int)
        wrong += int(np.sum(bits != ts.label))
        total += bits.size
    return wrong / total


def synth_iq_traces(model: ReadoutModel, n_per_label: int,
                    noise_sigma: float, n_samples: int, sample_period: float,
                    rng: np.random.Generator,
                    t1: float | None = None) -> tuple:
    """Synthetic labeled trace sets: state-dependent mean trajectory plus
    white complex Gaussian noise per sample.

    With ``t1`` given, each prepared-1 trace relaxes at an exponential time
    and follows the ground-state trajectory from then on, which is what
    limits real assignment error at high separation.
    """
    ts = (np.arange(n_samples) + 0.5) * sample_period
    mean0 = resonator_alpha(ts, 0, model)
    mean1 = resonator_alpha(ts, 1, model)

    def noisy(mean, n):
        noise = rng.normal(scale=noise_sigma, size=(n, n_samples)) \
            + 1j * rng.normal(scale=noise_sigma, size=(n, n_samples))
        return mean[None, :] + noise

    traces0 = noisy(mean0, n_per_label)
    traces1 = noisy(mean1, n_per_label)
    if t1 is not None:
        decay_at = rng.exponential(t1, size=n_per_label)
        for i, td in enumerate(decay_at):
            flipped = ts >= td
            traces1[i, flipped] += mean0[flipped] - mean1[flipped]
    return (IQTraceSet(sample_period, traces0, 0),
            IQTraceSet(sample_period, traces1, 1))


def noise_sigma_for_separation(model: ReadoutModel, n_samples: int,
                               sample_period: float, target: float) -> float:
    """Per-sample noise sigma giving a requested Fisher separation.

    For kernel k = mean0 - mean1 the projected means differ by |k|^2 and
    each score variance is |k|^2 sigma^2, so the separation is
    |k|^2 / (2 sigma^2).
    """
    ts = (np.arange(n_samples) + 0.5) * sample_period
    k = resonator_alpha(ts, 0, model) - resonator_alpha(ts, 1, model)
    norm_sq = float(np.real(np.vdot(k, k)))
    return math.sqrt(norm_sq / (2.0 * target))
