"""Experiment driver: scenario configuration, Monte-Carlo loops, result files.

Every experiment is a pure function of (config, seed): per-trial random
streams are derived from the master seed by counter-based spawning, so any
trial is reproducible in isolation and reruns emit byte-identical CSV files.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import time
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .channel import ChannelSet, RicianParams, build_channel_set, identity_phase, \
    random_phase_vector
from .geometry import RisGeometry, UeState
from .objective import ObjectiveConfig, evaluate, occultation_penalty
from .optimizer import OptimizerConfig, optimize
from .sensing import ScanGrid, associate_and_score, locate_users, nmse
from .signals import generate_symbols, receive


class ConfigError(Exception):
    """Base class for scenario-configuration failures."""


class ConfigKeyError(ConfigError):
    """An unknown key appeared in a config file or override set."""


class ConfigValueError(ConfigError):
    """A config value is outside its allowed range."""


class ConfigFormatError(ConfigError):
    """A config file could not be parsed at all."""


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * np.log10(watt) + 30.0


@dataclass
class ScenarioConfig:
    """Full description of one simulated scenario (paper-parameter defaults)."""

    bs_antennas: int = 128
    n_h: int = 11
    n_v: int = 11
    k_users: int = 3
    t_slots: int = 1000
    wavelength: float = 0.3
    d_h: float = 0.15
    d_v: float = 0.15
    tx_power_dbm: float = 10.0
    noise_power_dbm: float = -104.0
    kappa: float = 2.0
    los_azimuth_deg: float = 30.0
    los_elevation_deg: float = 10.0
    rho: float = 0.5
    epsilon: float = 0.0
    azimuth_range_deg: tuple = (-60.0, 60.0)
    elevation_range_deg: tuple = (-60.0, 60.0)
    distance_range: tuple = (1.0, 20.0)
    min_separation_deg: float = 0.0
    modulation: str = "gaussian"
    seed: int = 0
    grid_azimuth_step_deg: float = 1.0
    grid_elevation_step_deg: float = 1.0
    grid_distance_min: float = 0.5
    grid_distance_max: float = 25.0
    grid_distance_step: float = 0.1
    max_iters: int = 500
    grad_tol: float = 1e-6
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    armijo_init_step: float = 1.0
    armijo_max_backtracks: int = 50

    def validate(self):
        positive = ("bs_antennas", "k_users", "t_slots", "wavelength", "d_h", "d_v",
                    "grid_azimuth_step_deg", "grid_elevation_step_deg",
                    "grid_distance_step", "max_iters", "min_separation_deg")
        for name in positive:
            value = getattr(self, name)
            low = 0.0 if name == "min_separation_deg" else None
            if low is None and value <= 0:
                raise ConfigValueError(f"{name}: must be positive, got {value}")
            if low is not None and value < low:
                raise ConfigValueError(f"{name}: must be nonnegative, got {value}")
        for name in ("n_h", "n_v"):
            value = getattr(self, name)
            if value <= 0 or value % 2 == 0:
                raise ConfigValueError(f"{name}: must be odd and positive, got {value}")
        for name in ("tx_power_dbm", "noise_power_dbm"):
            value = getattr(self, name)
            if not np.isfinite(value) or dbm_to_watt(value) <= 0:
                raise ConfigValueError(f"{name}: converted power must be positive "
                                       f"and finite, got {value} dBm")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigValueError(f"rho: must lie in [0, 1], got {self.rho}")
        if self.epsilon < 0:
            raise ConfigValueError(f"epsilon: must be nonnegative, got {self.epsilon}")
        if self.kappa < 0:
            raise ConfigValueError(f"kappa: must be nonnegative, got {self.kappa}")
        if self.modulation not in ("gaussian", "qpsk"):
            raise ConfigValueError(f"modulation: unknown value {self.modulation!r}")
        for name in ("azimuth_range_deg", "elevation_range_deg", "distance_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ConfigValueError(f"{name}: lower bound must be below upper, "
                                       f"got ({lo}, {hi})")
        if self.distance_range[0] <= 0:
            raise ConfigValueError("distance_range: distances must be positive")
        if not self.grid_distance_min < self.grid_distance_max:
            raise ConfigValueError("grid_distance_min must be below grid_distance_max")
        if self.grid_distance_min <= 0:
            raise ConfigValueError("grid_distance_min: must be positive")
        return self

    # derived pieces -----------------------------------------------------

    @property
    def n_ris(self) -> int:
        return self.n_h * self.n_v

    @property
    def tx_power_watt(self) -> float:
        return dbm_to_watt(self.tx_power_dbm)

    @property
    def noise_power_watt(self) -> float:
        return dbm_to_watt(self.noise_power_dbm)

    def geometry(self) -> RisGeometry:
        return RisGeometry(n_h=self.n_h, n_v=self.n_v, d_h=self.d_h, d_v=self.d_v,
                           wavelength=self.wavelength)

    def rician(self) -> RicianParams:
        return RicianParams(bs_antennas=self.bs_antennas, kappa=self.kappa,
                            los_azimuth=np.deg2rad(self.los_azimuth_deg),
                            los_elevation=np.deg2rad(self.los_elevation_deg))

    def objective_config(self, rho: float = None) -> ObjectiveConfig:
        return ObjectiveConfig(rho=self.rho if rho is None else rho,
                               epsilon=self.epsilon)

    def optimizer_config(self, seed: int = None) -> OptimizerConfig:
        return OptimizerConfig(max_iters=self.max_iters, grad_tol=self.grad_tol,
                               armijo_c=self.armijo_c, armijo_shrink=self.armijo_shrink,
                               armijo_init_step=self.armijo_init_step,
                               armijo_max_backtracks=self.armijo_max_backtracks,
                               seed=self.seed if seed is None else seed)

    def scan_grid(self) -> ScanGrid:
        return ScanGrid.default(
            azimuth_step_deg=self.grid_azimuth_step_deg,
            elevation_step_deg=self.grid_elevation_step_deg,
            distance_min=self.grid_distance_min,
            distance_max=self.grid_distance_max,
            distance_step=self.grid_distance_step,
            azimuth_range=tuple(np.deg2rad(self.azimuth_range_deg)),
            elevation_range=tuple(np.deg2rad(self.elevation_range_deg)),
        )

    def snapshot(self) -> dict:
        out = asdict(self)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out


PRESETS = {
    # full-scale setup from the reference scenario
    "paper": {},
    # small setup so full experiment sweeps run in minutes
    "desk": {
        "bs_antennas": 32,
        "n_h": 7,
        "n_v": 7,
        "k_users": 2,
        "t_slots": 500,
        "azimuth_range_deg": (-60.0, 60.0),
        "elevation_range_deg": (-45.0, 45.0),
        "min_separation_deg": 15.0,
    },
}


def parse_config(path=None, overrides: dict = None, preset: str = "paper") -> ScenarioConfig:
    """Build a validated ScenarioConfig from preset defaults, file, and overrides.

    Precedence: overrides (CLI flags) > config file > preset defaults.
    """
    if preset not in PRESETS:
        raise ConfigKeyError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    merged = dict(PRESETS[preset])
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigFormatError(f"cannot read config file {path}: {exc}") from exc
        try:
            loaded = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigFormatError(f"malformed JSON in {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigFormatError(f"config file {path} must hold a JSON object")
        merged.update(loaded)
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})

    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = sorted(set(merged) - known)
    if unknown:
        raise ConfigKeyError(f"unknown config keys: {', '.join(unknown)}")
    for name in ("azimuth_range_deg", "elevation_range_deg", "distance_range"):
        if name in merged:
            merged[name] = tuple(merged[name])
    try:
        config = ScenarioConfig(**merged)
    except (TypeError, ValueError) as exc:
        raise ConfigValueError(str(exc)) from exc
    return config.validate()


@dataclass
class ExperimentResult:
    experiment: str
    config: dict
    seed: int
    records: list
    summary: dict
    wall_clock: float


def trial_rng(master_seed: int, *key) -> np.random.Generator:
    """Independent random stream for one trial, derived by counter splitting."""
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed,
                                                        spawn_key=tuple(key)))


def sample_scene(config: ScenarioConfig, rng: np.random.Generator,
                 power_watt: float = None) -> list:
    """Draw K user positions subject to the pairwise angular-separation floor."""
    az_lo, az_hi = np.deg2rad(config.azimuth_range_deg)
    el_lo, el_hi = np.deg2rad(config.elevation_range_deg)
    r_lo, r_hi = config.distance_range
    min_sep = np.deg2rad(config.min_separation_deg)
    power = config.tx_power_watt if power_watt is None else power_watt
    for _ in range(10_000):
        az = rng.uniform(az_lo, az_hi, size=config.k_users)
        el = rng.uniform(el_lo, el_hi, size=config.k_users)
        sep_ok = True
        for i in range(config.k_users):
            for j in range(i + 1, config.k_users):
                gap = np.hypot(az[i] - az[j], el[i] - el[j])
                if gap < min_sep:
                    sep_ok = False
        if sep_ok:
            r = rng.uniform(r_lo, r_hi, size=config.k_users)
            return [UeState(r=float(r[k]), azimuth=float(az[k]), elevation=float(el[k]),
                            power=power) for k in range(config.k_users)]
    raise ConfigValueError("min_separation_deg: could not place users with the "
                           "requested separation")


def build_scene(config: ScenarioConfig, rng: np.random.Generator,
                power_watt: float = None):
    """One scene: user placements plus all synthesized channels."""
    ues = sample_scene(config, rng, power_watt)
    channels = build_channel_set(ues, config.geometry(), config.rician(),
                                 config.noise_power_watt, rng)
    return ues, channels


def _write_csv(path: Path, header: list, rows: list):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _write_snapshot(out_dir: Path, config: ScenarioConfig, extra: dict = None):
    snap = config.snapshot()
    if extra:
        snap.update(extra)
    with open(out_dir / "config_snapshot.json", "w") as fh:
        json.dump(snap, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sense_both_parties(config, channels, phase, block, grid):
    """Locate users as the BS (true phase) and the wiretapper (identity guess)."""
    results = {}
    for party, assumed in (("bs", phase), ("wt", identity_phase(channels.n_ris))):
        estimates, padded, aoa, dists = locate_users(
            block, config.k_users, channels.H, assumed, config.geometry(), grid)
        results[party] = {"estimates": estimates, "padded": padded,
                          "aoa": aoa, "dist": dists}
    return results


def _truth_array(ues) -> np.ndarray:
    return np.array([[ue.azimuth, ue.elevation, ue.r] for ue in ues])


def run_spectra(config: ScenarioConfig, out_dir) -> ExperimentResult:
    """One scene end to end: optimize the RIS, emit all four MUSIC spectra."""
    t0 = time.perf_counter()
    config.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = trial_rng(config.seed, 0)
    ues, channels = build_scene(config, rng)
    phase, trace = optimize(channels, config.objective_config(),
                            config.optimizer_config(seed=int(rng.integers(2**63))))
    block = receive(channels, phase,
                    generate_symbols(config.k_users, config.t_slots, channels.powers,
                                     config.modulation, rng), rng)
    grid = config.scan_grid()
    sensed = _sense_both_parties(config, channels, phase, block, grid)

    truth = _truth_array(ues)
    peak_records = []
    records = []
    for party in ("bs", "wt"):
        aoa = sensed[party]["aoa"]
        rows = [(float(az), float(el), float(aoa.values[i, j]))
                for i, az in enumerate(grid.azimuth)
                for j, el in enumerate(grid.elevation)]
        _write_csv(out_dir / f"{party}_aoa_spectrum.csv",
                   ["azimuth_rad", "elevation_rad", "value"], rows)
        dist_rows = []
        for user, spec in enumerate(sensed[party]["dist"]):
            dist_rows += [(user, float(r), float(v))
                          for r, v in zip(grid.distance, spec.values)]
        _write_csv(out_dir / f"{party}_distance_spectra.csv",
                   ["user", "distance_m", "value"], dist_rows)
        report = associate_and_score(sensed[party]["estimates"], truth,
                                     sensed[party]["padded"])
        for k in range(config.k_users):
            est = report.estimates[k]
            peak_records.append({
                "party": party, "user": k,
                "azimuth_rad": float(est[0]), "elevation_rad": float(est[1]),
                "distance_m": float(est[2]),
                "true_azimuth_rad": float(truth[k, 0]),
                "true_elevation_rad": float(truth[k, 1]),
                "true_distance_m": float(truth[k, 2]),
            })
            records.append({"party": party, "user": k,
                            **{p: float(v) for p, v in
                               zip(("sq_err_azimuth", "sq_err_elevation", "sq_err_distance"),
                                   (report.sq_errors["azimuth"][k],
                                    report.sq_errors["elevation"][k],
                                    report.sq_errors["distance"][k]))}})
    with open(out_dir / "peaks.json", "w") as fh:
        json.dump(peak_records, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_snapshot(out_dir, config, {"experiment": "spectra"})
    summary = {"final_objective": trace.objective[-1],
               "iterations": trace.n_iters}
    return ExperimentResult("spectra", config.snapshot(), config.seed, records,
                            summary, time.perf_counter() - t0)


def run_nmse_sweep(config: ScenarioConfig, powers_dbm, trials: int,
                   out_dir) -> ExperimentResult:
    """NMSE of both parties' estimates across a transmit-power sweep."""
    t0 = time.perf_counter()
    config.validate()
    powers_dbm = list(powers_dbm)
    if not powers_dbm:
        raise ConfigValueError("powers_dbm: at least one power point required")
    if trials < 1:
        raise ConfigValueError(f"trials: must be >= 1, got {trials}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = config.scan_grid()

    trial_rows = []
    records = []
    nmse_rows = []
    summary = {"bs": {}, "wt": {}}
    for pi, power_dbm in enumerate(powers_dbm):
        power_watt = dbm_to_watt(power_dbm)
        reports = {"bs": [], "wt": []}
        for t in range(trials):
            rng = trial_rng(config.seed, pi, t)
            ues, channels = build_scene(config, rng, power_watt)
            phase, _ = optimize(channels, config.objective_config(),
                                config.optimizer_config(seed=int(rng.integers(2**63))))
            block = receive(channels, phase,
                            generate_symbols(config.k_users, config.t_slots,
                                             channels.powers, config.modulation, rng),
                            rng)
            sensed = _sense_both_parties(config, channels, phase, block, grid)
            truth = _truth_array(ues)
            for party in ("bs", "wt"):
                report = associate_and_score(sensed[party]["estimates"], truth,
                                             sensed[party]["padded"])
                reports[party].append(report)
                for k in range(config.k_users):
                    trial_rows.append((float(power_dbm), t, party, k,
                                       float(truth[k, 0]), float(truth[k, 1]),
                                       float(truth[k, 2]),
                                       float(report.estimates[k, 0]),
                                       float(report.estimates[k, 1]),
                                       float(report.estimates[k, 2])))
        for party in ("bs", "wt"):
            values = nmse(reports[party])
            for parameter in ("azimuth", "elevation", "distance"):
                nmse_rows.append((float(power_dbm), party, parameter,
                                  float(values[parameter])))
                summary[party].setdefault(parameter, []).append(float(values[parameter]))
                records.append({"power_dbm": float(power_dbm), "party": party,
                                "parameter": parameter, "nmse": float(values[parameter])})

    _write_csv(out_dir / "nmse.csv", ["power_dbm", "party", "parameter", "nmse"],
               nmse_rows)
    _write_csv(out_dir / "trials.csv",
               ["power_dbm", "trial", "party", "user",
                "true_azimuth_rad", "true_elevation_rad", "true_distance_m",
                "est_azimuth_rad", "est_elevation_rad", "est_distance_m"],
               trial_rows)
    _write_snapshot(out_dir, config, {"experiment": "nmse",
                                      "powers_dbm": [float(p) for p in powers_dbm],
                                      "trials": trials})
    summary["powers_dbm"] = [float(p) for p in powers_dbm]
    return ExperimentResult("nmse", config.snapshot(), config.seed, records, summary,
                            time.perf_counter() - t0)


def run_rate_cdf(config: ScenarioConfig, trials: int, out_dir) -> ExperimentResult:
    """Empirical rate CDFs for optimized, random, and identity configurations."""
    t0 = time.perf_counter()
    config.validate()
    if trials < 1:
        raise ConfigValueError(f"trials: must be >= 1, got {trials}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    variants = ("optimized", "random", "identity")
    records = []
    for t in range(trials):
        rng = trial_rng(config.seed, t)
        ues, channels = build_scene(config, rng)
        phase_opt, _ = optimize(channels, config.objective_config(),
                                config.optimizer_config(seed=int(rng.integers(2**63))))
        phases = {"optimized": phase_opt,
                  "random": random_phase_vector(channels.n_ris, rng),
                  "identity": identity_phase(channels.n_ris)}
        for variant in variants:
            ev = evaluate(channels, phases[variant], config.objective_config(rho=1.0))
            rates = np.log2(1.0 + ev.per_user_sinr)
            records.append({"trial": t, "variant": variant,
                            "rate_max": float(np.max(rates)),
                            "rate_min": float(np.min(rates)),
                            "rate_mean": float(np.mean(rates)),
                            "rate_sum": float(np.sum(rates))})

    _write_csv(Path(out_dir) / "rate_records.csv",
               ["trial", "variant", "rate_max", "rate_min", "rate_mean", "rate_sum"],
               [(r["trial"], r["variant"], r["rate_max"], r["rate_min"],
                 r["rate_mean"], r["rate_sum"]) for r in records])

    cdf_rows = []
    summary = {}
    for variant in variants:
        summary[variant] = {}
        for stat in ("max", "min", "mean", "sum"):
            values = np.sort([r[f"rate_{stat}"] for r in records
                              if r["variant"] == variant])
            summary[variant][f"mean_rate_{stat}"] = float(np.mean(values))
            cdf_rows += [(variant, stat, float(v), (i + 1) / len(values))
                         for i, v in enumerate(values)]
    _write_csv(Path(out_dir) / "rate_cdf.csv",
               ["variant", "statistic", "value", "cdf"], cdf_rows)
    _write_snapshot(Path(out_dir), config, {"experiment": "rate_cdf", "trials": trials})
    return ExperimentResult("rate_cdf", config.snapshot(), config.seed, records,
                            summary, time.perf_counter() - t0)


def run_optimize(config: ScenarioConfig, out_dir) -> ExperimentResult:
    """Optimize a single scene and dump the phase vector plus iteration trace."""
    t0 = time.perf_counter()
    config.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = trial_rng(config.seed, 0)
    ues, channels = build_scene(config, rng)
    cfg_obj = config.objective_config()
    gamma_init_phase = identity_phase(channels.n_ris)
    gamma_before = occultation_penalty(channels, gamma_init_phase, cfg_obj)
    phase, trace = optimize(channels, cfg_obj,
                            config.optimizer_config(seed=int(rng.integers(2**63))))
    _write_csv(out_dir / "phase.csv", ["n", "real", "imag"],
               [(n, float(np.real(v)), float(np.imag(v)))
                for n, v in enumerate(phase)])
    trace.write_csv(out_dir / "trace.csv")
    _write_snapshot(out_dir, config, {"experiment": "optimize"})
    ev = evaluate(channels, phase, cfg_obj)
    summary = {"final_objective": ev.joint_value, "sum_rate": ev.sum_rate,
               "gamma": ev.gamma, "gamma_identity": gamma_before,
               "iterations": trace.n_iters, "converged": trace.converged,
               "stalled": trace.stalled}
    records = [summary]
    return ExperimentResult("optimize", config.snapshot(), config.seed, records,
                            summary, time.perf_counter() - t0)


def finite_difference_gradient(fun, phase: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central differences of a real objective over the real/imag embedding."""
    grad = np.zeros(phase.shape, dtype=complex)
    for n in range(phase.size):
        bump = np.zeros(phase.shape, dtype=complex)
        bump[n] = step
        d_re = (fun(phase + bump) - fun(phase - bump)) / (2.0 * step)
        d_im = (fun(phase + 1j * bump) - fun(phase - 1j * bump)) / (2.0 * step)
        grad[n] = d_re + 1j * d_im
    return grad


def random_gradcheck_instance(rng: np.random.Generator, m: int = 16, n: int = 25,
                              k: int = 2) -> ChannelSet:
    """Abstract O(1)-scale channels for gradient validation (no geometry needed)."""
    cn = lambda *shape: (rng.standard_normal(shape)
                         + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    a = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=(n, k)))
    return ChannelSet(H=cn(m, n), g=cn(n, k), A=a, noise_power=0.5,
                      powers=np.ones(k))


def run_gradcheck(instances: int = 20, rhos=(0.0, 0.5, 1.0), seed: int = 0,
                  m: int = 16, n: int = 25, k: int = 2,
                  step: float = 1e-6) -> ExperimentResult:
    """Compare the closed-form gradient against central finite differences.

    The primary check differentiates the objective with combiners frozen at
    the expansion point (the convention the closed form is derived under); a
    secondary diagnostic differentiates with refreshed combiners instead and
    reports how far that full derivative drifts.
    """
    t0 = time.perf_counter()
    from .objective import joint_objective, user_channels
    records = []
    rng = np.random.default_rng(seed)
    for i in range(instances):
        channels = random_gradcheck_instance(rng, m, n, k)
        phase = random_phase_vector(n, rng)
        for rho in rhos:
            cfg = ObjectiveConfig(rho=float(rho), epsilon=0.0)
            closed = evaluate(channels, phase, cfg).gradient
            v = user_channels(channels, phase)
            fixed_w = v / np.linalg.norm(v, axis=0)
            fd_fixed = finite_difference_gradient(
                lambda x: joint_objective(channels, x, cfg, combiners=fixed_w),
                phase, step)
            fd_full = finite_difference_gradient(
                lambda x: joint_objective(channels, x, cfg), phase, step)
            scale = np.linalg.norm(fd_fixed)
            records.append({
                "instance": i, "rho": float(rho),
                "rel_err_fixed": float(np.linalg.norm(closed - fd_fixed) / scale),
                "rel_err_full": float(np.linalg.norm(closed - fd_full) / scale),
            })
    worst_fixed = max(r["rel_err_fixed"] for r in records)
    summary = {"worst_rel_err_fixed": worst_fixed,
               "worst_rel_err_full": max(r["rel_err_full"] for r in records),
               "instances": instances, "rhos": [float(r) for r in rhos]}
    return ExperimentResult("gradcheck", {"m": m, "n": n, "k": k, "step": step},
                            seed, records, summary, time.perf_counter() - t0)
