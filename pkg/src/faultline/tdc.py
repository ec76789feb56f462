"""Behavioral model of a tapped-delay-line TDC voltage sensor.

A clock edge launched into an N-tap delay line after an initial delay D0
travels ``(T_clk - D0) / tap_delay`` taps before the capture registers sample
it.  Supply droop slows each tap by ``1 + alpha * dV``, so fewer taps are
reached and the Hamming weight of the captured thermometer code drops.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

PRESETS = {"radiate": 50.0, "softfault": 75.0, "hardfault": 125.0}  # mV
DEFAULT_ATTENUATION = 0.2
_BLOCK = 4096  # jitter is drawn per block of sample indices


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class TdcConfig:
    taps: int = 128
    tap_delay_ps: float = 25.0
    clock_ps: float = 5000.0
    initial_delay_ps: float | None = None
    alpha_per_mv: float = 0.004
    jitter_ps: float = 5.0
    oversampling: int = 4
    droop_slows: bool = True

    def __post_init__(self):
        if self.taps < 2:
            raise ValueError("taps must be >= 2")
        if self.tap_delay_ps <= 0 or self.clock_ps <= 0:
            raise ValueError("tap delay and clock period must be positive")
        if self.jitter_ps < 0:
            raise ValueError("jitter must be non-negative")
        if self.oversampling < 1:
            raise ValueError("oversampling must be >= 1")
        d0 = self.initial_delay_ps
        if d0 is not None and not 0 < d0 < self.clock_ps:
            raise ValueError(f"initial delay {d0} ps outside (0, {self.clock_ps})")

    @property
    def calibrated(self) -> bool:
        return self.initial_delay_ps is not None

    @property
    def baseline(self) -> float:
        return self.taps / 2


@dataclass(frozen=True)
class TdcSample:
    t: float  # core cycles
    hw: int
    taps: int = 128
    sensor: int = 0

    @property
    def raw(self) -> int:
        """Captured code as an N-bit integer, MSB first: hw ones then zeros."""
        return ((1 << self.hw) - 1) << (self.taps - self.hw)

    @property
    def bits(self) -> str:
        return format(self.raw, f"0{self.taps}b")


def is_thermometer(raw: int, taps: int) -> bool:
    bits = format(raw, f"0{taps}b")
    return len(bits) == taps and "01" not in bits


def hamming_weights(cfg: TdcConfig, dv_mv, jitter_ps) -> np.ndarray:
    """Vectorised tap count for arrays of disturbance and jitter values."""
    if not cfg.calibrated:
        raise CalibrationError("sensor is not calibrated")
    sign = 1.0 if cfg.droop_slows else -1.0
    scale = cfg.tap_delay_ps * (1.0 + sign * cfg.alpha_per_mv * np.asarray(dv_mv, dtype=float))
    slack = cfg.clock_ps - cfg.initial_delay_ps + np.asarray(jitter_ps, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.floor(slack / scale + 0.5)  # round half up
    k = np.where(scale > 0, k, cfg.taps)  # a non-positive delay means the edge runs off the end
    return np.clip(k, 0, cfg.taps).astype(np.int64)


def sample(cfg: TdcConfig, dv_mv: float, rng: np.random.Generator, t: float = 0.0,
           sensor: int = 0) -> TdcSample:
    jitter = rng.normal(0.0, cfg.jitter_ps) if cfg.jitter_ps > 0 else 0.0
    hw = int(hamming_weights(cfg, dv_mv, jitter))
    return TdcSample(t, hw, cfg.taps, sensor)


def _mean_hw(cfg: TdcConfig, d0: float, jitter: np.ndarray) -> float:
    return float(hamming_weights(replace(cfg, initial_delay_ps=d0), 0.0, jitter).mean())


def calibrate(cfg: TdcConfig, samples: int = 1000, seed: int = 0, tol_ps: float = 1e-4) -> TdcConfig:
    """Find the initial delay that centres the mean Hamming weight on N/2.

    Bisection runs on a fixed set of jitter draws, so the mean HW is a
    deterministic nonincreasing function of D0.  The lowest D0 whose mean is
    at most N/2 and the highest whose mean is at least N/2 bound a plateau;
    its midpoint is returned.
    """
    if samples < 100:
        raise ValueError("calibration needs at least 100 samples")
    half = cfg.taps / 2
    if half * cfg.tap_delay_ps >= cfg.clock_ps:
        raise CalibrationError(
            f"target HW {half:g} unreachable: {half:g} taps x {cfg.tap_delay_ps} ps "
            f">= clock period {cfg.clock_ps} ps")
    rng = np.random.default_rng(seed)
    jitter = rng.normal(0.0, cfg.jitter_ps, samples) if cfg.jitter_ps > 0 else np.zeros(samples)

    def search(pred) -> float:
        # smallest d in (0, T) with pred(d) true, pred monotone false -> true
        lo, hi = 0.0, cfg.clock_ps
        while hi - lo > tol_ps:
            mid = (lo + hi) / 2
            if pred(mid):
                hi = mid
            else:
                lo = mid
        return hi

    low = search(lambda d: _mean_hw(cfg, d, jitter) <= half)
    high = search(lambda d: _mean_hw(cfg, d, jitter) < half)
    d0 = (low + high) / 2
    d0 = min(max(d0, tol_ps), cfg.clock_ps - tol_ps)
    out = replace(cfg, initial_delay_ps=d0)
    mean = _mean_hw(cfg, d0, jitter)
    if abs(mean - half) > 1:
        raise CalibrationError(f"calibration settled at mean HW {mean:.3f}, outside N/2 +- 1")
    return out


# -- disturbance traces ---------------------------------------------------------

@dataclass(frozen=True)
class Pulse:
    t_start: float
    t_end: float
    dv_mv: float
    scope: str = "all"  # sensor index as text, or "all"

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError(f"pulse must have t_start < t_end, got {self.t_start}..{self.t_end}")
        if self.scope != "all" and not str(self.scope).isdigit():
            raise ValueError(f"pulse scope must be a sensor index or 'all', got {self.scope!r}")
        object.__setattr__(self, "scope", str(self.scope))

    def amplitude(self, sensor: int, attenuation: float) -> float:
        if self.scope == "all" or int(self.scope) == sensor:
            return self.dv_mv
        return self.dv_mv * attenuation


def resolve_amplitude(value) -> float:
    if isinstance(value, str):
        if value in PRESETS:
            return PRESETS[value]
        return float(value)
    return float(value)


@dataclass(frozen=True)
class DisturbanceTrace:
    pulses: tuple = ()
    seed: int = 0

    def __post_init__(self):
        pulses = tuple(sorted(self.pulses, key=lambda p: (p.t_start, p.t_end)))
        for a, b in zip(pulses, pulses[1:]):
            if b.t_start < a.t_end:
                raise ValueError(f"pulses overlap: {a} and {b}")
        object.__setattr__(self, "pulses", pulses)

    def dv(self, t: np.ndarray, sensor: int, attenuation: float = DEFAULT_ATTENUATION) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for p in self.pulses:
            out[(t >= p.t_start) & (t < p.t_end)] = p.amplitude(sensor, attenuation)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_start_cycles", "t_end_cycles", "dv_mv", "sensor_scope"])
        for p in self.pulses:
            w.writerow([_num(p.t_start), _num(p.t_end), _num(p.dv_mv), p.scope])
        return buf.getvalue()


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def parse_trace_csv(text: str, seed: int = 0) -> DisturbanceTrace:
    pulses = []
    for row in csv.reader(io.StringIO(text)):
        if not row or row[0].strip().startswith("#"):
            continue
        if row[0].strip() == "t_start_cycles":
            continue
        if len(row) not in (3, 4):
            raise ValueError(f"bad trace row {row!r}")
        scope = row[3].strip() if len(row) == 4 else "all"
        pulses.append(Pulse(float(row[0]), float(row[1]), resolve_amplitude(row[2].strip()), scope))
    return DisturbanceTrace(tuple(pulses), seed)


# -- sensor array ------------------------------------------------------------------

class SensorArray:
    """Several calibrated sensors sampled on a shared clock.

    Sample ``n`` of every sensor is taken at ``t = n / oversampling`` core
    cycles.  Jitter depends only on (seed, sensor, n), so a stream is the
    same however it is chunked.
    """

    def __init__(self, cfg: TdcConfig, trace: DisturbanceTrace = DisturbanceTrace(), count: int = 2,
                 attenuation: float = DEFAULT_ATTENUATION, seed: int | None = None):
        if not cfg.calibrated:
            raise CalibrationError("sensor array needs a calibrated config")
        self.cfg = cfg
        self.trace = trace
        self.count = count
        self.attenuation = attenuation
        self.seed = trace.seed if seed is None else seed
        self._cache: dict[tuple[int, int], np.ndarray] = {}

    def _jitter_block(self, sensor: int, block: int) -> np.ndarray:
        key = (sensor, block)
        if key not in self._cache:
            if len(self._cache) > 64:
                self._cache.clear()
            if self.cfg.jitter_ps > 0:
                rng = np.random.default_rng([self.seed, sensor, block])
                self._cache[key] = rng.normal(0.0, self.cfg.jitter_ps, _BLOCK)
            else:
                self._cache[key] = np.zeros(_BLOCK)
        return self._cache[key]

    def jitter(self, sensor: int, start: int, stop: int) -> np.ndarray:
        parts = []
        n = start
        while n < stop:
            block, off = divmod(n, _BLOCK)
            take = min(_BLOCK - off, stop - n)
            parts.append(self._jitter_block(sensor, block)[off:off + take])
            n += take
        return np.concatenate(parts) if parts else np.zeros(0)

    def index_at(self, cycle: float) -> int:
        """First sample index at or after ``cycle``."""
        return math.ceil(cycle * self.cfg.oversampling)

    def times(self, start: int, stop: int) -> np.ndarray:
        return np.arange(start, stop, dtype=float) / self.cfg.oversampling

    def hw(self, sensor: int, start: int, stop: int) -> np.ndarray:
        t = self.times(start, stop)
        return hamming_weights(self.cfg, self.trace.dv(t, sensor, self.attenuation), self.jitter(sensor, start, stop))

    def samples(self, sensor: int, start: int, stop: int) -> list[TdcSample]:
        t = self.times(start, stop)
        return [TdcSample(float(ti), int(h), self.cfg.taps, sensor) for ti, h in zip(t, self.hw(sensor, start, stop))]


def write_sample_dump(fh, array: SensorArray, start: int, stop: int) -> None:
    """CSV ``t,sensor,hw`` for sample indices [start, stop) of every sensor."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "sensor", "hw"])
    t = array.times(start, stop)
    hws = [array.hw(s, start, stop) for s in range(array.count)]
    for i, ti in enumerate(t):
        for s in range(array.count):
            w.writerow([_num(ti), s, int(hws[s][i])])


# -- detection --------------------------------------------------------------------

@dataclass(frozen=True)
class DetectorConfig:
    threshold: int = 8
    persistence: int = 3

    def __post_init__(self):
        if self.threshold < 1 or self.persistence < 1:
            raise ValueError("threshold and persistence must be >= 1")


@dataclass(frozen=True)
class Alert:
    t: float
    sensor: int | str
    peak_deviation: float


@dataclass
class Detector:
    """Persistence-filtered threshold detector for one sensor.

    Fires once when the deviation from baseline stays at or above the
    threshold for ``persistence`` consecutive samples, then stays quiet until
    ``persistence`` consecutive in-band samples re-arm it.
    """

    config: DetectorConfig = field(default_factory=DetectorConfig)
    baseline: float = 64.0
    tag: int | str = 0
    armed: bool = True
    run: int = 0
    quiet: int = 0
    peak: float = 0.0

    def feed(self, t: float, hw: int) -> Alert | None:
        dev = abs(hw - self.baseline)
        if dev >= self.config.threshold:
            self.quiet = 0
            self.run += 1
            self.peak = max(self.peak, dev)
            if self.armed and self.run >= self.config.persistence:
                self.armed = False
                return Alert(t, self.tag, self.peak)
            return None
        self.run = 0
        self.peak = 0.0
        if not self.armed:
            self.quiet += 1
            if self.quiet >= self.config.persistence:
                self.armed = True
                self.quiet = 0
        return None

    def feed_array(self, t: np.ndarray, hw: np.ndarray) -> list[Alert]:
        """Fold a block of samples; in-band stretches are skipped in bulk."""
        alerts: list[Alert] = []
        deviating = np.abs(hw - self.baseline) >= self.config.threshold
        i, n = 0, len(hw)
        while i < n:
            if self.armed and self.run == 0:
                rest = deviating[i:]
                if not rest.any():
                    break
                i += int(np.argmax(rest))
            alert = self.feed(float(t[i]), int(hw[i]))
            if alert is not None:
                alerts.append(alert)
            i += 1
        return alerts


def detect(stream: Iterable[TdcSample], det: DetectorConfig = DetectorConfig(),
           baseline: float = 64.0, tag: int | str | None = None) -> list[Alert]:
    alerts = []
    detectors: dict = {}
    for s in stream:
        key = s.sensor if tag is None else tag
        d = detectors.setdefault(key, Detector(det, baseline, key))
        a = d.feed(s.t, s.hw)
        if a is not None:
            alerts.append(a)
    return alerts


def run_sensors(array: SensorArray, det: DetectorConfig, cycles: float) -> tuple[list[Alert], dict[int, np.ndarray]]:
    """Sample every sensor over [0, cycles) and return alerts plus HW arrays."""
    stop = array.index_at(cycles)
    alerts: list[Alert] = []
    hws = {}
    t = array.times(0, stop)
    for s in range(array.count):
        hws[s] = array.hw(s, 0, stop)
        alerts += Detector(det, array.cfg.baseline, s).feed_array(t, hws[s])
    alerts.sort(key=lambda a: (a.t, str(a.sensor)))
    return alerts, hws


def summarize(hws: Sequence[int]) -> dict:
    a = np.asarray(hws)
    return {"samples": int(a.size), "mean": float(a.mean()) if a.size else 0.0,
            "min": int(a.min()) if a.size else 0, "max": int(a.max()) if a.size else 0}
