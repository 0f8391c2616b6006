"""Parameter sweeps behind the three result figures, emitted as CSV reports."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import (CachingScenario, HofModel, average_caching_rate, caching_duration_cdf,
                       caching_duration_cdf_raw, caching_duration_quantile, caching_rate,
                       hof_probability)
from .config import ExperimentConfig
from .geometry import BeamLayout, coverage_probability, crossing_length
from .radio import LinkBudget, instantaneous_rate
from .sim.engine import run_trials
from .sim.validation import empirical_cdf, sample_caching_durations, simulate_single_cell_hof

Z95 = 1.959963984540054


@dataclass
class SweepReport:
    name: str
    axis: str
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([row[i] for row in self.rows], dtype=float)

    def to_csv(self, fh=None) -> str:
        """Write ``#`` metadata lines, a header and the data rows; returns the text."""
        buf = io.StringIO()
        for key in sorted(self.metadata):
            buf.write(f"# {key}={self.metadata[key]}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_cell(v) for v in row])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    return str(value)


def _metadata(cfg: ExperimentConfig, started: float, **extra) -> dict:
    meta = {"seed": cfg.seed, "config_hash": cfg.digest(), "version": __version__,
            "mode": cfg.mode, "wall_time_s": f"{time.perf_counter() - started:.3f}"}
    meta.update(extra)
    return meta


def trial_seeds(seed: int, n: int) -> list[int]:
    """``n`` distinct per-trial seeds derived from one base seed."""
    state = np.random.SeedSequence(seed).generate_state(n, dtype=np.uint64)
    return [int(s) for s in state]


def _beam(cfg: ExperimentConfig) -> BeamLayout:
    return BeamLayout(cfg["beam.count"], math.radians(cfg["beam.width_deg"]))


def _mmw_link(cfg: ExperimentConfig, channel) -> LinkBudget:
    return LinkBudget.for_channel(channel, cfg["mmw.tx_power_dbm"], cfg["mmw.bandwidth_ghz"] * 1e9,
                                  cfg["mmw.noise_psd_dbm_hz"], 2 * cfg["antenna.main_lobe_gain_db"])


# -- caching duration -------------------------------------------------------

def run_fig3(cfg: ExperimentConfig) -> SweepReport:
    """Caching-duration CDF per initial distance, analytic and sampled."""
    started = time.perf_counter()
    mode = cfg.mode
    cols = ["t0", "r"]
    if mode != "simulation":
        cols += ["F_analytic", "F_raw"]
    if mode != "analysis":
        cols += ["F_empirical"]
    if mode == "compare":
        cols += ["ks_stat"]
    report = SweepReport("fig3", "r", cols)
    beam = _beam(cfg)
    channel = cfg.path_loss["los"]
    link = _mmw_link(cfg, channel)
    speed = cfg["fig3.speed_kmh"] / 3.6
    max_gap = 0.0
    for i, r in enumerate(sorted(cfg["fig3.distances"])):
        # the CDF averages over headings, so any crossing heading defines the scenario
        sc = CachingScenario.from_relative_heading(r, speed, math.pi / 2, beam, link, channel)
        # t0 = 0 plus evenly spaced probability levels, which resolves the steep early rise
        levels = np.linspace(0.0, 0.99, cfg["fig3.grid_points"] - 1)
        grid = np.concatenate([[0.0], caching_duration_quantile(levels, sc)])
        analytic = caching_duration_cdf(grid, sc)
        raw = caching_duration_cdf_raw(grid, sc)
        max_gap = max(max_gap, float(np.max(raw - analytic)))
        if mode != "analysis":
            rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 3, i]))
            ecdf = empirical_cdf(sample_caching_durations(sc, cfg["fig3.samples"], rng))
            emp = ecdf(grid)
            ks = ecdf.ks_distance(lambda t: caching_duration_cdf(t, sc))
        for j, t0 in enumerate(grid):
            row = [float(t0), float(r)]
            if mode != "simulation":
                row += [float(analytic[j]), float(raw[j])]
            if mode != "analysis":
                row += [float(emp[j])]
            if mode == "compare":
                row += [ks]
            report.rows.append(tuple(row))
    report.metadata = _metadata(cfg, started, clamp_gap_max=format(max_gap, ".6g"))
    return report


# -- handover failures -----------------------------------------------------

def _ratio_ci(off: np.ndarray, on: np.ndarray) -> tuple[float, float]:
    """Relative reduction ``1 - mean(on)/mean(off)`` and its 95% half-width (delta method)."""
    n = off.size
    m_off, m_on = off.mean(), on.mean()
    if m_off == 0:
        return (0.0, 0.0) if m_on == 0 else (float("nan"), float("nan"))
    ratio = m_on / m_off
    if n < 2:
        return 1.0 - ratio, float("nan")
    cov = np.cov(np.vstack([on, off]), ddof=1)
    var = (cov[0, 0] - 2 * ratio * cov[0, 1] + ratio**2 * cov[1, 1]) / (n * m_off**2)
    return 1.0 - ratio, Z95 * math.sqrt(max(var, 0.0))


def _half_width(x: np.ndarray) -> float:
    return Z95 * float(np.std(x, ddof=1)) / math.sqrt(x.size) if x.size > 1 else float("nan")


def run_fig4(cfg: ExperimentConfig) -> SweepReport:
    """Average HOFs per MUE and run, with and without caching, per speed."""
    started = time.perf_counter()
    mode = cfg.mode
    cols = ["speed"]
    if mode != "analysis":
        cols += ["hof_off", "hof_on", "relative_reduction", "ci", "hof_off_ci", "hof_on_ci",
                 "hof_rate_off", "hof_rate_on", "attempts_off", "attempts_on"]
    if mode != "simulation":
        cols += ["hof_analytic"]
    if mode == "compare":
        cols += ["hof_single_cell", "discrepancy"]
    report = SweepReport("fig4", "speed", cols)
    n = cfg.trials
    seeds = trial_seeds(cfg.seed, n)
    for i, kmh in enumerate(sorted(cfg["experiment.speeds_kmh"])):
        speed = kmh / 3.6
        sim_cfg = cfg.sim_config(speed)
        row = [float(kmh)]
        if mode != "analysis":
            results = run_trials(sim_cfg, seeds * 2, [False] * n + [True] * n, workers=cfg.workers,
                                 chunk_size=2 * n if cfg.workers == 1 else max(1, n // cfg.workers))
            off, on = results[:n], results[n:]
            hof_off = np.array([r.hof_per_mue for r in off])
            hof_on = np.array([r.hof_per_mue for r in on])
            red, ci = _ratio_ci(hof_off, hof_on)
            att_off = sum(r.attempts for r in off)
            att_on = sum(r.attempts for r in on)
            row += [float(hof_off.mean()), float(hof_on.mean()), red, ci, _half_width(hof_off),
                    _half_width(hof_on), sum(r.hof_count for r in off) / max(1, att_off),
                    sum(r.hof_count for r in on) / max(1, att_on), att_off, att_on]
        if mode != "simulation":
            model = HofModel(sim_cfg.cell_radius, sim_cfg.ho.mts)
            analytic = hof_probability(speed, model)
            row += [analytic]
        if mode == "compare":
            rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 4, i]))
            single, _ = simulate_single_cell_hof(speed, sim_cfg.cell_radius, sim_cfg.ho.mts,
                                                 1000 * n, rng, sim_cfg.dt)
            row += [single, single - analytic]
        report.rows.append(tuple(row))
    report.metadata = _metadata(cfg, started, trials=n, confidence=0.95)
    return report


# -- caching rate -----------------------------------------------------------

def path_averaged_rate(sc: CachingScenario, steps: int) -> float:
    """Mean instantaneous rate over equally spaced points of the in-beam path."""
    length = crossing_length(sc.position, sc.direction, sc.beam, sc.beam_index)
    s = (np.arange(steps) + 0.5) / steps * length
    x = sc.position.x + s * math.cos(sc.direction)
    y = sc.position.y + s * math.sin(sc.direction)
    return float(np.mean(instantaneous_rate(np.hypot(x, y), sc.link, sc.channel)))


def run_fig5(cfg: ExperimentConfig) -> SweepReport:
    """Average caching rate against initial distance for several headings."""
    started = time.perf_counter()
    mode = cfg.mode
    cols = ["r", "theta_u"]
    if mode != "simulation":
        cols += ["rate_los", "rate_nlos", "crossing_rate_los", "crossing_rate_nlos"]
    if mode != "analysis":
        cols += ["crossing_rate_los_sim", "crossing_rate_nlos_sim"]
    if mode == "compare":
        cols += ["discrepancy"]
    report = SweepReport("fig5", "r", cols)
    beam = _beam(cfg)
    coverage = coverage_probability(beam)
    speed = cfg["fig5.speed_kmh"] / 3.6
    pl = cfg.path_loss
    links = {band: _mmw_link(cfg, pl[band]) for band in ("los", "nlos")}
    for r in sorted(cfg["fig5.distances"]):
        for theta_deg in sorted(cfg["fig5.theta_u_deg"]):
            # leading edge of beam 0 sits at the beam width, so theta_u equals theta_hat
            th = math.radians(theta_deg)
            sc = {band: CachingScenario.from_relative_heading(r, speed, th, beam, links[band], pl[band])
                  for band in ("los", "nlos")}
            row = [float(r), float(theta_deg)]
            if mode != "simulation":
                rc = {band: caching_rate(sc[band]) for band in sc}
                row += [average_caching_rate(sc["los"], coverage),
                        average_caching_rate(sc["nlos"], coverage), rc["los"], rc["nlos"]]
            if mode != "analysis":
                sim = {band: path_averaged_rate(sc[band], cfg["fig5.path_steps"]) for band in sc}
                row += [sim["los"], sim["nlos"]]
            if mode == "compare":
                row += [max(abs(sim[b] - rc[b]) / rc[b] for b in sc)]
            report.rows.append(tuple(row))
    report.metadata = _metadata(cfg, started, coverage=format(coverage, ".12g"))
    return report


FIGURES = {"fig3": run_fig3, "fig4": run_fig4, "fig5": run_fig5}
