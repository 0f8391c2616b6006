"""Discrete-time mobility simulator with an RSS-driven handover state machine.

State is held as arrays indexed ``(row, mue)`` or ``(row, mue, cell)`` where a
row is one independent trial. Every row owns its random streams, so a trial's
result does not depend on which other trials share the batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from ..analysis import TrafficModel
from ..errors import ConfigError
from ..geometry import BeamLayout
from ..radio import (AntennaPattern, Band, LinkBudget, PathLossParams, radius_at_rss,
                     sample_interference_gain)
from .topology import NetworkTopology, generate_topology

# random numbers are drawn in fixed-size blocks so batching never changes a stream
_SHADOW_BLOCK = 32
_EPS = 1e-9


class HoState(IntEnum):
    SEARCHING = 0
    TTT_PENDING = 1
    EXECUTING = 2
    MUTED = 3


# plain ints: comparing arrays against enum members is markedly slower
_SEARCHING, _TTT, _EXECUTING, _MUTED = (int(s) for s in HoState)


@dataclass(frozen=True)
class HoParams:
    search_period: float = 0.2
    ttt: float = 0.16
    hysteresis: float = 3.0
    filter_window: float = 0.2
    mts: float = 1.0
    rss_threshold: float = -80.0
    execution_delay: float = 0.05
    measurement_period: float = 0.04
    # "entry": time-of-stay counts from entering the cell; "handover": from completing the HO
    stay_clock: str = "handover"

    def __post_init__(self):
        for name in ("search_period", "ttt", "filter_window", "mts", "measurement_period"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.hysteresis < 0 or self.execution_delay < 0:
            raise ConfigError("hysteresis and execution_delay must be non-negative")
        if self.stay_clock not in ("entry", "handover"):
            raise ConfigError(f"stay_clock must be 'entry' or 'handover', got {self.stay_clock!r}")


def _default_uw_channel():
    return PathLossParams(2e9, 1.0, 3.5, 4.0, Band.MICROWAVE)


def _default_los():
    return PathLossParams(73e9, 1.0, 2.0, 0.0, Band.MMW_LOS)


def _default_nlos():
    return PathLossParams(73e9, 1.0, 3.5, 0.0, Band.MMW_NLOS)


@dataclass(frozen=True)
class SimConfig:
    num_sbs: int = 50
    area_radius: float = 500.0
    min_intercell_distance: float = 30.0
    n_beams: int = 3
    beam_width: float = math.radians(10.0)
    num_mues: int = 20
    duration: float = 60.0
    dt: float = 0.01
    speed: float = 60.0 / 3.6
    caching: bool = True
    uw_channel: PathLossParams = field(default_factory=_default_uw_channel)
    uw_tx_power: float = 10.0
    uw_bandwidth: float = 20e6
    mmw_los: PathLossParams = field(default_factory=_default_los)
    mmw_nlos: PathLossParams = field(default_factory=_default_nlos)
    mmw_tx_power: float = 30.0
    mmw_bandwidth: float = 5e9
    noise_psd: float = -174.0
    antenna: AntennaPattern = field(default_factory=AntennaPattern)
    los_probability: float = 1.0
    interference: bool = False
    # "serving": cache only over the µW-serving SBS's beams; "any": over any SBS's beams
    cache_source: str = "any"
    traffic: TrafficModel = field(default_factory=TrafficModel)
    ho: HoParams = field(default_factory=HoParams)

    def __post_init__(self):
        limit = min(self.ho.search_period, self.ho.ttt) / 10.0
        if not 0 < self.dt <= limit + 1e-15:
            raise ConfigError(f"dt must lie in (0, {limit:g}] for the configured T_s and TTT")
        if self.duration < 0:
            raise ConfigError("duration must be non-negative")
        if self.num_mues < 1:
            raise ConfigError("num_mues must be positive")
        if not self.speed > 0:
            raise ConfigError("speed must be positive")
        if self.cache_source not in ("serving", "any"):
            raise ConfigError(f"cache_source must be 'serving' or 'any', got {self.cache_source!r}")
        if not 0.0 <= self.los_probability <= 1.0:
            raise ConfigError("los_probability must lie in [0, 1]")

    @property
    def uw_link(self) -> LinkBudget:
        return LinkBudget.for_channel(self.uw_channel, self.uw_tx_power, self.uw_bandwidth,
                                      self.noise_psd)

    def mmw_link(self, channel: PathLossParams) -> LinkBudget:
        return LinkBudget.for_channel(channel, self.mmw_tx_power, self.mmw_bandwidth,
                                      self.noise_psd, 2.0 * self.antenna.main_lobe_gain)

    @property
    def cell_radius(self) -> float:
        """Radius where the mean microwave RSS meets the serving threshold."""
        return radius_at_rss(self.ho.rss_threshold, self.uw_link, self.uw_channel)

    @property
    def beam(self) -> BeamLayout:
        return BeamLayout(self.n_beams, self.beam_width, 0.0, self.cell_radius)

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)


@dataclass
class ExperimentResult:
    seed: int
    caching: bool
    num_mues: int
    duration: float
    ho_count: int = 0
    attempts: int = 0
    hof_count: int = 0
    censored: int = 0
    cache_fill_samples: list = field(default_factory=list)
    time_of_stay_samples: list = field(default_factory=list)

    @property
    def hof_rate(self) -> float:
        return self.hof_count / max(1, self.attempts)

    @property
    def hof_per_mue(self) -> float:
        return self.hof_count / self.num_mues


@dataclass(frozen=True)
class TraceEvent:
    time: float
    row: int
    mue: int
    kind: str
    cell: int
    value: float

    def line(self) -> str:
        return f"{self.time:.6f} {self.mue} {self.kind} {self.cell} {self.value:.6g}"


def seed_streams(seed: int):
    """Independent generators for topology, MUE init, shadowing, respawn, interference."""
    children = np.random.SeedSequence(seed).spawn(5)
    return [np.random.default_rng(c) for c in children]


def circle_crossing_fraction(qx, qy, ddx, ddy, radius, entering):
    """Fraction of a step at which a segment crosses a circle centred at the origin.

    ``(qx, qy)`` is the start point relative to the centre, ``(ddx, ddy)`` the
    step displacement. Entering crossings take the first root, exits the second.
    """
    a = ddx * ddx + ddy * ddy
    b = 2.0 * (qx * ddx + qy * ddy)
    c = qx * qx + qy * qy - radius * radius
    root = np.sqrt(np.maximum(b * b - 4.0 * a * c, 0.0))
    s = np.where(entering, -b - root, -b + root) / (2.0 * a)
    return np.clip(s, 0.0, 1.0)


def backward_entry_distance(qx, qy, cos_h, sin_h, radius):
    """Distance back along the heading to where a point inside a circle entered it."""
    proj = qx * cos_h + qy * sin_h
    c = qx * qx + qy * qy - radius * radius
    return proj + np.sqrt(np.maximum(proj * proj - c, 0.0))


class Simulation:
    """A batch of independent trials advanced in lock-step."""

    def __init__(self, config: SimConfig, seeds, caching=None, trace=False,
                 topologies: list[NetworkTopology] | None = None):
        self.cfg = cfg = config
        self.seeds = [int(s) for s in seeds]
        nb = len(self.seeds)
        if nb == 0:
            raise ConfigError("at least one seed is required")
        if caching is None:
            caching = [cfg.caching] * nb
        self.caching = np.asarray(caching, dtype=bool).reshape(nb)
        self.trace = trace
        self.events: list[TraceEvent] = []

        uniq = sorted(set(self.seeds))
        self._row_of_seed = {s: i for i, s in enumerate(uniq)}
        self._uniq_index = np.array([self._row_of_seed[s] for s in self.seeds])
        streams = {s: seed_streams(s) for s in uniq}
        self._shadow_rng = [streams[s][2] for s in uniq]
        self._respawn_rng = [streams[s][3] for s in uniq]
        # interferer draws depend on the row's own caching, so each row gets its own copy
        self._interf_rng = [seed_streams(s)[4] for s in self.seeds]

        a = cfg.cell_radius
        self.cell_radius = a
        if topologies is None:
            topo_by_seed = {s: generate_topology(streams[s][0], cfg.num_sbs, cfg.area_radius,
                                                 cfg.min_intercell_distance, cfg.beam,
                                                 cfg.uw_link)
                            for s in uniq}
            topologies = [topo_by_seed[s] for s in self.seeds]
        if len(topologies) != nb:
            raise ConfigError("one topology per seed is required")
        self.topologies = topologies
        k = topologies[0].num_sbs
        if any(t.num_sbs != k for t in topologies):
            raise ConfigError("all topologies in a batch need the same number of SBSs")
        self.num_cells = k
        self.sx = np.stack([t.positions[:, 0] for t in topologies])
        self.sy = np.stack([t.positions[:, 1] for t in topologies])
        self.base_az = np.stack([t.base_azimuths for t in topologies])

        u = cfg.num_mues
        shape = (nb, u)
        px = np.empty(shape)
        py = np.empty(shape)
        heading = np.empty(shape)
        phase = np.empty(shape)
        los = np.empty((nb, u, k), dtype=bool)
        init_cache = {}
        for s in uniq:
            rng = streams[s][1]
            rad = cfg.area_radius * np.sqrt(rng.random(u))
            ang = rng.uniform(0, 2 * math.pi, u)
            init_cache[s] = (rad * np.cos(ang), rad * np.sin(ang),
                             rng.uniform(0, 2 * math.pi, u),
                             rng.uniform(0, cfg.ho.search_period, u),
                             rng.random((u, k)) < cfg.los_probability)
        for row, s in enumerate(self.seeds):
            px[row], py[row], heading[row], phase[row], los[row] = init_cache[s]
        self.px, self.py = px, py
        self.cos_h, self.sin_h = np.cos(heading), np.sin(heading)
        self.next_search = phase
        self.los = los

        self.time = 0.0
        self.step_index = 0
        self.sample_every = max(1, int(round(cfg.ho.measurement_period / cfg.dt)))
        self.window = max(1, int(round(cfg.ho.filter_window / (self.sample_every * cfg.dt))))
        self.n_taken = 0
        self.rss_buf = np.zeros((self.window, nb, u, k))
        self.rss_sum = np.zeros((nb, u, k))
        self.n_samples = np.zeros(shape, dtype=np.int64)

        self.serving = np.full(shape, -1, dtype=np.int64)
        self.state = np.full(shape, int(HoState.SEARCHING), dtype=np.int8)
        self.candidate = np.full(shape, -1, dtype=np.int64)
        self.ttt_elapsed = np.zeros(shape)
        self.exec_elapsed = np.zeros(shape)
        self.time_in_cell = np.zeros(shape)
        self.cache = np.zeros(shape)
        self.episode_bits = np.zeros(shape)

        self.attempt_open = np.zeros((nb, u, k), dtype=bool)
        self.inside = np.zeros((nb, u, k), dtype=bool)
        self.entry_time = np.zeros((nb, u, k))
        self.exit_time = np.full((nb, u, k), -np.inf)
        self.ttt_start = np.zeros(shape)
        self._place_inside(np.ones(shape, dtype=bool))

        self.results = [ExperimentResult(s, bool(c), u, cfg.duration)
                        for s, c in zip(self.seeds, self.caching)]

        # radio constants
        uw = cfg.uw_channel
        self._uw_const = cfg.uw_tx_power - uw.intercept_db
        self._uw_half_exp = 5.0 * uw.exponent
        self._uw_r0sq = uw.reference_distance ** 2
        self._mmw = {}
        for flag, ch in ((True, cfg.mmw_los), (False, cfg.mmw_nlos)):
            link = cfg.mmw_link(ch)
            coef = link.beta * 10 ** ((link.tx_power - 30) / 10) * link.combined_gain
            self._mmw[flag] = (coef, ch.exponent, ch.reference_distance, ch.shadowing_std,
                               link.noise_power_w)
        self._qb = cfg.traffic.playback_bitrate
        full = (nb, u, k)
        self._flat_base = np.arange(nb * u).reshape(nb, u) * k
        self._row_base = np.repeat(np.arange(nb)[:, None] * k, u, axis=1)
        self._buf = {name: np.empty(full) for name in ("dx", "dy", "d2", "tmp", "filt")}
        self._buf["inside"] = np.empty(full, dtype=bool)
        self._buf["changed"] = np.empty(full, dtype=bool)
        self._block = None
        self._block_pos = _SHADOW_BLOCK

    def place_mues(self, x, y, heading):
        """Move MUEs to explicit positions and headings (broadcast over rows and MUEs)."""
        shape = self.px.shape
        self.px = np.array(np.broadcast_to(x, shape), dtype=float)
        self.py = np.array(np.broadcast_to(y, shape), dtype=float)
        h = np.broadcast_to(heading, shape)
        self.cos_h, self.sin_h = np.cos(h), np.sin(h)
        self.exit_time[...] = -np.inf
        self._place_inside(np.ones(shape, dtype=bool))

    # -- helpers ------------------------------------------------------------

    def _emit(self, kind, rows, mues, cells, values, times=None):
        if not self.trace:
            return
        rows = np.atleast_1d(rows)
        mues = np.atleast_1d(mues)
        cells = np.broadcast_to(np.atleast_1d(cells), rows.shape)
        values = np.broadcast_to(np.atleast_1d(values), rows.shape)
        times = np.broadcast_to(np.atleast_1d(self.time if times is None else times), rows.shape)
        for t, r, m, c, v in zip(times, rows, mues, cells, values):
            self.events.append(TraceEvent(float(t), int(r), int(m), kind, int(c), float(v)))

    def _place_inside(self, mask):
        """Recompute cell membership for MUEs in ``mask`` without emitting crossings."""
        rows, mues = np.nonzero(mask)
        if rows.size == 0:
            return
        qx = self.px[rows, mues][:, None] - self.sx[rows]
        qy = self.py[rows, mues][:, None] - self.sy[rows]
        a = self.cell_radius
        inside = qx * qx + qy * qy <= a * a
        back = backward_entry_distance(qx, qy, self.cos_h[rows, mues][:, None],
                                       self.sin_h[rows, mues][:, None], a)
        self.inside[rows, mues] = inside
        self.entry_time[rows, mues] = np.where(inside, self.time - back / self.cfg.speed, 0.0)

    def _shadow_block(self):
        if self._block_pos >= _SHADOW_BLOCK:
            u, k = self.cfg.num_mues, self.num_cells
            draws = [rng.standard_normal((_SHADOW_BLOCK, u, k), dtype=np.float32)
                     for rng in self._shadow_rng]
            mmw = [rng.standard_normal((_SHADOW_BLOCK, u)) for rng in self._shadow_rng]
            self._block = (np.stack(draws, axis=1)[:, self._uniq_index],
                           np.stack(mmw, axis=1)[:, self._uniq_index])
            self._block_pos = 0
        uw, mmw = self._block[0][self._block_pos], self._block[1][self._block_pos]
        self._block_pos += 1
        return uw, mmw

    def _resolve(self, rows, mues, cells, tos, times):
        """Close attempts whose target cell was just left."""
        mts = self.cfg.ho.mts
        failed = tos < mts - _EPS
        for r, t, f in zip(rows, tos, failed):
            res = self.results[r]
            res.time_of_stay_samples.append(float(t))
            if f:
                res.hof_count += 1
        if self.trace:
            self._emit("hof", rows[failed], mues[failed], cells[failed], tos[failed], times[failed])
            ok = ~failed
            self._emit("ho_success", rows[ok], mues[ok], cells[ok], tos[ok], times[ok])

    def _censor(self, mask, now):
        """Settle open attempts of MUEs in ``mask`` whose visit is cut short."""
        open_ = self.attempt_open & mask[..., None]
        rows, mues, cells = np.nonzero(open_)
        if rows.size:
            so_far = now - self.entry_time[rows, mues, cells]
            done = self.inside[rows, mues, cells] & (so_far >= self.cfg.ho.mts - _EPS)
            if done.any():
                self._resolve(rows[done], mues[done], cells[done], so_far[done],
                              np.full(int(done.sum()), now))
            for r in rows[~done]:
                self.results[r].censored += 1
                self.results[r].attempts -= 1
        self.attempt_open[open_] = False

    def _respawn(self, mask, now):
        self._censor(mask, now)
        self._close_episodes(mask)
        rows, mues = np.nonzero(mask)
        r_area = self.cfg.area_radius
        for urow, rng in enumerate(self._respawn_rng):
            # draw for every row using this seed; identical rows receive identical draws
            sel = self._uniq_index[rows] == urow
            if not sel.any():
                continue
            # one draw pair per departing MUE, in (row-independent) MUE order
            m_sel = mues[sel]
            order = np.unique(m_sel)
            phi = rng.uniform(0, 2 * math.pi, order.size)
            turn = rng.uniform(-math.pi / 2, math.pi / 2, order.size)
            lookup = {m: i for i, m in enumerate(order)}
            for r, m in zip(rows[sel], m_sel):
                i = lookup[m]
                self.px[r, m] = r_area * (1 - 1e-9) * math.cos(phi[i])
                self.py[r, m] = r_area * (1 - 1e-9) * math.sin(phi[i])
                h = phi[i] + math.pi + turn[i]
                self.cos_h[r, m], self.sin_h[r, m] = math.cos(h), math.sin(h)
        self.serving[mask] = -1
        self.state[mask] = _SEARCHING
        self.candidate[mask] = -1
        self.ttt_elapsed[mask] = 0.0
        self.exec_elapsed[mask] = 0.0
        self.time_in_cell[mask] = 0.0
        self.cache[mask] = 0.0
        self.exit_time[mask] = -np.inf
        self.rss_buf[:, mask] = 0.0
        self.rss_sum[mask] = 0.0
        self.n_samples[mask] = 0
        self._buf["filt"][mask] = -np.inf
        self._place_inside(mask)
        self._emit("respawn", rows, mues, -1, 0.0, now)

    def _close_episodes(self, ended):
        rows, mues = np.nonzero(ended & (self.episode_bits > 0))
        for r, m in zip(rows, mues):
            self.results[r].cache_fill_samples.append(float(self.episode_bits[r, m]))
        if rows.size:
            self._emit("cache_fill", rows, mues, self.serving[rows, mues],
                       self.episode_bits[rows, mues])
        self.episode_bits[ended] = 0.0

    def _take(self, arr3, idx):
        """``arr3[b, u, idx[b, u]]`` with negative indices mapped to cell 0."""
        return arr3.reshape(-1)[self._flat_base + np.maximum(idx, 0)]

    # -- main loop ------------------------------------------------------------

    def step(self) -> list[TraceEvent]:
        """Advance every trial by one time step; returns the trace events it produced."""
        cfg, ho = self.cfg, self.cfg.ho
        dt = cfg.dt
        n_before = len(self.events)
        t0 = self.time
        self.step_index += 1
        t1 = self.step_index * dt
        self.time = t1
        v = cfg.speed

        px0, py0 = self.px, self.py
        ddx, ddy = v * dt * self.cos_h, v * dt * self.sin_h
        self.px, self.py = px0 + ddx, py0 + ddy
        gone = self.px ** 2 + self.py ** 2 > cfg.area_radius ** 2
        if gone.any():
            self._respawn(gone, t1)
            # respawned MUEs start this step at their new spot
            px0 = np.where(gone, self.px, px0)
            py0 = np.where(gone, self.py, py0)

        # cell membership and time-of-stay bookkeeping
        # large temporaries are slow to allocate, so the hot path writes into buffers
        buf = self._buf
        dx = np.subtract(self.px[..., None], self.sx[:, None, :], out=buf["dx"])
        dy = np.subtract(self.py[..., None], self.sy[:, None, :], out=buf["dy"])
        d2 = np.multiply(dx, dx, out=buf["d2"])
        d2 += np.multiply(dy, dy, out=buf["tmp"])
        a = self.cell_radius
        inside = np.less_equal(d2, a * a, out=buf["inside"])
        changed = np.not_equal(inside, self.inside, out=buf["changed"])
        if changed.any():
            r, m, c = np.nonzero(changed)
            entering = inside[r, m, c]
            qx = px0[r, m] - self.sx[r, c]
            qy = py0[r, m] - self.sy[r, c]
            frac = circle_crossing_fraction(qx, qy, ddx[r, m], ddy[r, m], a, entering)
            t_cross = t0 + frac * dt
            self.entry_time[r[entering], m[entering], c[entering]] = t_cross[entering]
            ex = ~entering
            rx, mx, cx = r[ex], m[ex], c[ex]
            tos = t_cross[ex] - self.entry_time[rx, mx, cx]
            self.exit_time[rx, mx, cx] = t_cross[ex]
            was_open = self.attempt_open[rx, mx, cx]
            if was_open.any():
                self._resolve(rx[was_open], mx[was_open], cx[was_open], tos[was_open],
                              t_cross[ex][was_open])
            self.attempt_open[rx, mx, cx] = False
            if self.trace:
                self._emit("enter", r[entering], m[entering], c[entering], 0.0, t_cross[entering])
                self._emit("exit", rx, mx, cx, tos, t_cross[ex])
            buf["inside"], self.inside = self.inside, inside

        # L1 samples at the measurement period, L3 moving average over the filter window
        filt = buf["filt"]
        if (self.step_index - 1) % self.sample_every == 0:
            # shadowing is redrawn per measurement and held in between
            z_uw, self._z_mmw = self._shadow_block()
            slot = self.n_taken % self.window
            self.n_taken += 1
            rss = self.rss_buf[slot]
            self.rss_sum -= rss
            np.maximum(d2, self._uw_r0sq, out=rss)
            np.log10(rss, out=rss)
            rss *= -self._uw_half_exp
            rss += self._uw_const
            if cfg.uw_channel.shadowing_std > 0:
                rss += np.multiply(z_uw, cfg.uw_channel.shadowing_std, out=buf["tmp"])
            self.rss_sum += rss
            self.n_samples += 1
            # respawned MUEs restart their filter, hence the per-MUE sample count
            np.divide(self.rss_sum, np.minimum(self.n_samples, self.window)[..., None], out=filt)

        # caching inside an SBS's beams, playback drain
        if cfg.cache_source == "serving":
            srv = self.serving
        else:
            # the closest SBS is the only one whose disk can hold the MUE in practice
            srv = np.argmin(d2, axis=2)
        has = srv >= 0
        sdx = self._take(dx, srv)
        sdy = self._take(dy, srv)
        in_cell = has & self._take(inside, srv)
        az = np.arctan2(sdy, sdx)
        base = self.base_az.reshape(-1)[self._row_base + np.maximum(srv, 0)]
        rel = np.mod(base - az, 2 * math.pi / cfg.n_beams)
        in_beam = in_cell & (rel <= cfg.beam_width)
        accrue = in_beam & self.caching[:, None]
        if accrue.any():
            los = self._take(self.los, srv)
            dist2 = sdx * sdx + sdy * sdy
            bits = np.zeros_like(self.cache)
            for flag in (True, False):
                sel = accrue & (los == flag)
                if not sel.any():
                    continue
                coef, alpha, r0, xi, noise = self._mmw[flag]
                d = np.sqrt(np.maximum(dist2[sel], r0 * r0))
                gain = coef * d ** (-alpha)
                if xi > 0:
                    gain = gain * 10 ** (-xi * self._z_mmw[sel] / 10)
                interf = self._interference(sel, dx, dy, srv, flag) if cfg.interference else 0.0
                bits[sel] = cfg.mmw_bandwidth * np.log2(1 + gain / (noise + interf)) * dt
            before = self.cache
            self.cache = np.where(accrue, np.minimum(self.cache + bits, cfg.traffic.cache_capacity),
                                  self.cache)
            self.episode_bits += self.cache - before
        self._close_episodes(~accrue & (self.episode_bits > 0))
        self.cache = np.maximum(self.cache - self._qb * dt, 0.0)

        self._advance_fsm(filt, inside, t1)
        self.time_in_cell += dt
        return self.events[n_before:]

    def _interference(self, sel, dx, dy, srv, flag):
        coef, alpha, r0, _, _ = self._mmw[flag]
        rows, mues = np.nonzero(sel)
        d = np.sqrt(np.maximum(dx[rows, mues] ** 2 + dy[rows, mues] ** 2, r0 * r0))
        # link coef already carries G_max^2; rescale to the drawn lobe gains
        main2 = 10 ** (2 * self.cfg.antenna.main_lobe_gain / 10)
        gains = np.empty_like(d)
        for i, r in enumerate(rows):
            gains[i] = sample_interference_gain(self._interf_rng[r],
                                                self.cfg.antenna, d.shape[1])
        power = coef / main2 * gains * d ** (-alpha)
        power[np.arange(rows.size), srv[rows, mues]] = 0.0
        return power.sum(axis=1)

    def _advance_fsm(self, filt, inside, now):
        cfg, ho = self.cfg, self.cfg.ho
        dt = cfg.dt
        st = self.state
        srv = self.serving
        thr = ho.rss_threshold
        serving_level = np.where(srv >= 0, self._take(filt, srv), -np.inf)

        muted_now = self.caching[:, None] & (self.cache > self._qb * ho.ttt)
        go_mute = muted_now & (st <= _TTT)
        leave_mute = (st == _MUTED) & ~muted_now
        if self.trace:
            self._emit("mute", *np.nonzero(go_mute), -1, 0.0)
            self._emit("unmute", *np.nonzero(leave_mute), -1, 0.0)
        st[go_mute] = _MUTED
        self.candidate[go_mute] = -1
        st[leave_mute] = _SEARCHING

        # executing handovers complete after the execution delay
        execs = st == _EXECUTING
        self.exec_elapsed[execs] += dt
        done = execs & (self.exec_elapsed >= ho.execution_delay - _EPS)
        if done.any():
            self._complete_handover(done, inside, now)

        # time-to-trigger
        pend = st == _TTT
        if pend.any():
            cand_level = self._take(filt, self.candidate)
            holds = (cand_level >= thr) & (cand_level > serving_level + ho.hysteresis)
            abort = pend & ~holds
            st[abort] = _SEARCHING
            self.candidate[abort] = -1
            keep = pend & holds
            self.ttt_elapsed[keep] += dt
            fire = keep & (self.ttt_elapsed >= ho.ttt - _EPS)
            st[fire] = _EXECUTING
            self.exec_elapsed[fire] = 0.0
            if self.trace:
                self._emit("ttt_abort", *np.nonzero(abort), -1, 0.0)
                self._emit("ho_trigger", *np.nonzero(fire), self.candidate[fire], 0.0)
            if ho.execution_delay <= 0 and fire.any():
                self._complete_handover(fire, inside, now)

        # periodic cell search
        due = now >= self.next_search - _EPS
        self.next_search[due] += ho.search_period
        search = due & (st == _SEARCHING)
        rows, mues = np.nonzero(search)
        if rows.size:
            levels = filt[rows, mues]
            best = np.argmax(levels, axis=1)
            best_level = levels[np.arange(rows.size), best]
            cur = srv[rows, mues]
            cur_level = serving_level[rows, mues]
            qualifies = (best_level >= thr) & (best != cur)
            trigger = qualifies & (best_level > cur_level + ho.hysteresis)
            fallback = ~trigger & (cur >= 0) & (cur_level < thr - ho.hysteresis) & ~qualifies
            tr, tm = rows[trigger], mues[trigger]
            st[tr, tm] = _TTT
            self.candidate[tr, tm] = best[trigger]
            self.ttt_elapsed[tr, tm] = 0.0
            self.ttt_start[tr, tm] = now
            srv[rows[fallback], mues[fallback]] = -1
            if self.trace:
                self._emit("ttt_start", tr, tm, best[trigger], best_level[trigger])
                self._emit("fallback_mbs", rows[fallback], mues[fallback], -1, 0.0)

    def _complete_handover(self, done, inside, now):
        rows, mues = np.nonzero(done)
        cells = self.candidate[rows, mues]
        self.serving[rows, mues] = cells
        self.state[rows, mues] = _SEARCHING
        self.candidate[rows, mues] = -1
        self.time_in_cell[rows, mues] = 0.0
        for r in rows:
            self.results[r].ho_count += 1
        # an MUE still outside the target either heads into it (the attempt waits for
        # the visit) or has already passed it (the stay ended before the handover did)
        qx = self.sx[rows, cells] - self.px[rows, mues]
        qy = self.sy[rows, cells] - self.py[rows, mues]
        ahead = qx * self.cos_h[rows, mues] + qy * self.sin_h[rows, mues]
        miss = np.abs(qx * self.sin_h[rows, mues] - qy * self.cos_h[rows, mues])
        upcoming = (ahead > 0) & (miss < self.cell_radius)
        valid = inside[rows, mues, cells] | upcoming
        new = valid & ~self.attempt_open[rows, mues, cells]
        for r in rows[new]:
            self.results[r].attempts += 1
        self.attempt_open[rows[new], mues[new], cells[new]] = True
        if self.cfg.ho.stay_clock == "handover":
            now_in = new & inside[rows, mues, cells]
            self.entry_time[rows[now_in], mues[now_in], cells[now_in]] = now
        # too late: the visit ended while this handover was already being prepared;
        # a handover towards a cell that was neither visited nor approached is no attempt
        late = ~valid & (self.exit_time[rows, mues, cells] >= self.ttt_start[rows, mues] - _EPS)
        if late.any():
            for r in rows[late]:
                self.results[r].attempts += 1
            lr, lm, lc = rows[late], mues[late], cells[late]
            self._resolve(lr, lm, lc, np.zeros(lr.size), np.full(lr.size, now))
        self._emit("ho_complete", rows, mues, cells, 0.0)

    def run(self) -> list[ExperimentResult]:
        n_steps = int(round(self.cfg.duration / self.cfg.dt))
        for _ in range(n_steps):
            self.step()
        self.finish()
        return self.results

    def finish(self):
        everyone = np.ones_like(self.serving, dtype=bool)
        self._censor(everyone, self.time)
        self._close_episodes(everyone)


def run_trial(config: SimConfig, seed: int, caching=None, trace=False) -> ExperimentResult:
    """Simulate ``config.num_mues`` MUEs for ``config.duration`` seconds."""
    sim = Simulation(config, [seed], caching=None if caching is None else [caching], trace=trace)
    return sim.run()[0]


def _run_chunk(args):
    config, seeds, caching = args
    return Simulation(config, seeds, caching).run()


def run_trials(config: SimConfig, seeds, caching=None, workers: int = 1,
               chunk_size: int = 100) -> list[ExperimentResult]:
    """Run many trials; chunks go to worker processes when ``workers > 1``.

    Results come back in seed order and do not depend on chunking or workers.
    """
    seeds = list(seeds)
    if caching is None:
        caching = [config.caching] * len(seeds)
    caching = list(caching)
    jobs = [(config, seeds[i:i + chunk_size], caching[i:i + chunk_size])
            for i in range(0, len(seeds), chunk_size)]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    return [res for part in parts for res in part]
