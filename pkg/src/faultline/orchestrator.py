"""Housekeeping controller: sense, interrupt, diagnose, recover.

The controller owns a global cycle clock.  The core runs in chunks bounded
by the next scheduled event and by the first sensor alert; an alert pauses
the core at an instruction boundary, a sanity check localises the faulty
ALU units, and the controller either swaps in a pre-generated program
variant or relocates logic on the fabric and reruns the original program.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Mapping

from . import benchmarks as bm
from . import emulator as em
from . import fabric as fb
from . import resynth as rs
from . import tdc
from .asm import DATA_BASE, TEXT_BASE, Directive, Instruction, Label, Program, Section


class Phase(str, Enum):
    RUNNING = "RUNNING"
    ALERT = "ALERT"
    DIAGNOSING = "DIAGNOSING"
    SOFT_RECOVERY = "SOFT_RECOVERY"
    HARD_RECOVERY = "HARD_RECOVERY"
    RECOVERED = "RECOVERED"
    FAILED = "FAILED"


LEGAL = {
    Phase.RUNNING: {Phase.ALERT},
    Phase.ALERT: {Phase.DIAGNOSING},
    Phase.DIAGNOSING: {Phase.SOFT_RECOVERY, Phase.HARD_RECOVERY, Phase.RUNNING},
    Phase.SOFT_RECOVERY: {Phase.RECOVERED, Phase.HARD_RECOVERY},
    Phase.HARD_RECOVERY: {Phase.RECOVERED, Phase.FAILED},
    Phase.RECOVERED: {Phase.RUNNING},
    Phase.FAILED: set(),
}


class IllegalTransition(RuntimeError):
    pass


class ScenarioError(ValueError):
    pass


# -- sanity check ---------------------------------------------------------------

M32 = 0xFFFFFFFF
_A0, _A1, _A2, _A7 = 10, 11, 12, 17

# (op, a, b); expected values come from the host oracle
GOLDEN: dict[str, list[tuple[str, int, int]]] = {
    "MUL": [("mul", 6, 7), ("mul", 0x12345678, 1), ("mul", 1, 0x9ABCDEF0), ("mul", 0, M32),
            ("mul", M32, M32), ("mul", M32, 2), ("mul", 0x10000, 0x10000), ("mul", 12345, 6789),
            ("mul", 0x80000000, 3)],
    "ADD": [("add", 2, 2), ("add", 0x12345678, 0), ("add", 0, 0), ("add", M32, 1),
            ("add", 0x7FFFFFFF, 1), ("add", M32, M32), ("add", 0x55555555, 0xAAAAAAAA),
            ("add", 1234, 5678), ("sub", 10, 3)],
    "SHIFT": [("sll", 1, 31), ("sll", 0x12345678, 0), ("srl", 0x12345678, 0), ("sll", M32, 1),
              ("srl", M32, 4), ("sra", 0x80000000, 31), ("sra", 0x7FFFFFF0, 4), ("srl", 0x80000000, 31),
              ("sll", 0x0F0F0F0F, 4)],
    "AND": [("and", 0xF0, 0x3C), ("and", 0x12345678, M32), ("and", M32, M32), ("and", 0, M32),
            ("and", 0x55555555, 0xAAAAAAAA), ("and", M32, 1), ("and", 0x80000000, M32),
            ("and", 0xDEADBEEF, 0x0FF00FF0)],
    "OR": [("or", 0x12345678, 0), ("or", 0, 0), ("or", M32, 0), ("or", 0x55555555, 0xAAAAAAAA),
           ("or", 0xF0, 0x0F), ("or", 0x80000000, 1), ("or", M32, M32), ("or", 0xDEAD0000, 0xBEEF)],
    "XOR": [("xor", 0x12345678, 0), ("xor", 0x12345678, M32), ("xor", M32, M32), ("xor", 0, 0),
            ("xor", 0x55555555, 0xAAAAAAAA), ("xor", 0xF0, 0xFF), ("xor", 0x80000000, 1),
            ("xor", 0xDEADBEEF, 0xDEADBEEF)],
}

# branch vectors: (mnemonic, a, b, expect_taken)
BRANCH_VECTORS = [
    ("beq", 5, 5, True), ("beq", 1, 2, False), ("bne", 5, 5, False), ("bne", 0, M32, True),
    ("blt", M32, 1, True), ("blt", 0x80000000, 0x7FFFFFFF, True), ("bge", 3, 3, True),
    ("bltu", M32, 1, False), ("bgeu", 0, M32, False), ("bltu", 0x7FFFFFFF, 0x80000000, True),
]


@dataclass(frozen=True)
class SanityReport:
    units: dict  # unit -> "pass" | "fail"
    vectors: dict  # unit -> number of vectors run
    addressing: str  # "pass" | "fail": loads, jalr and branch comparisons
    cycles: int

    @property
    def failed(self) -> frozenset[str]:
        return frozenset(u for u, v in self.units.items() if v == "fail")

    @property
    def clean(self) -> bool:
        return not self.failed and self.addressing == "pass"

    def to_dict(self) -> dict:
        return {"units": dict(self.units), "vectors": dict(self.vectors),
                "addressing": self.addressing, "cycles": self.cycles}


def _one_op(op: str) -> Program:
    return Program((Section(".text"), Label("main"),
                    Instruction(op, rd=_A0, rs1=_A1, rs2=_A2), Instruction("ecall")))


def _branch_program(op: str) -> Program:
    return Program((Section(".text"), Label("main"),
                    Instruction(op, rs1=_A1, rs2=_A2, target="taken"),
                    Instruction("ecall"),
                    Label("taken"), Instruction("ecall")))


def _load_program() -> Program:
    return Program((Section(".text"), Label("main"),
                    Instruction("lw", rd=_A0, rs1=_A1, imm=4), Instruction("ecall"),
                    Section(".data"), Label("golden"), Directive(".word", (0x11111111, 0x2468ACE1))))


def _jalr_program() -> Program:
    return Program((Section(".text"), Label("main"),
                    Instruction("jalr", rd=0, rs1=_A1, imm=8), Instruction("ecall"),
                    Instruction("ecall")))


_PROGRAMS: dict[str, Program] = {}


def _cached(key: str, build) -> Program:
    if key not in _PROGRAMS:
        _PROGRAMS[key] = build()
    return _PROGRAMS[key]


def _probe(p: Program, regs: Mapping[int, int], faults: em.FaultConfig) -> tuple[em.MachineState, int]:
    s = em.load(p)
    for r, v in regs.items():
        s.regs[r] = v & M32
    s.regs[_A7] = em.EXIT_SYSCALL
    res = em.run(s, faults, max_cycles=64)
    return s, res.cycles


def sanity_check(faults: em.FaultConfig) -> SanityReport:
    """Run golden vectors for each unit plus the addressing path.

    Each vector is a two-instruction program ``op a0, a1, a2; ecall`` with
    operands preset by the harness, so no other ALU unit is exercised.
    A trap or a wrong ``a0`` marks the unit as failed.
    """
    units, vectors = {}, {}
    cycles = 0
    for unit in em.UNITS:
        ok = True
        for op, a, b in GOLDEN[unit]:
            s, c = _probe(_cached(op, lambda op=op: _one_op(op)), {_A1: a, _A2: b}, faults)
            cycles += c
            want = em._oracle_compute(op, a, b)
            if not s.halted or s.trap is not None or s.reg(_A0) != want:
                ok = False
        units[unit] = "pass" if ok else "fail"
        vectors[unit] = len(GOLDEN[unit])

    addr_ok = True
    s, c = _probe(_cached("lw", _load_program), {_A1: DATA_BASE}, faults)
    cycles += c
    addr_ok &= s.trap is None and s.exit_code == 0x2468ACE1
    s, c = _probe(_cached("jalr", _jalr_program), {_A1: TEXT_BASE}, faults)
    cycles += c
    addr_ok &= s.trap is None and s.pc == TEXT_BASE + 8
    for op, a, b, taken in BRANCH_VECTORS:
        p = _cached(op, lambda op=op: _branch_program(op))
        s, c = _probe(p, {_A1: a, _A2: b}, faults)
        cycles += c
        landed = s.addresses["taken"] if taken else s.addresses["taken"] - 4
        addr_ok &= s.trap is None and s.pc == landed
    vectors["addressing"] = 2 + len(BRANCH_VECTORS)
    return SanityReport(units, vectors, "pass" if addr_ok else "fail", cycles)


# -- scenarios ----------------------------------------------------------------------

@dataclass(frozen=True)
class UnitFaultEvent:
    cycle: int
    unit: str
    fault: em.Fault


@dataclass(frozen=True)
class DamageEvent:
    cycle: int
    rect: fb.Rect | None = None
    target: str | None = None  # placement name, resolved when the event fires


@dataclass(frozen=True)
class Scenario:
    benchmark: str
    trace: tdc.DisturbanceTrace = tdc.DisturbanceTrace()
    unit_faults: tuple = ()
    damage: tuple = ()
    noise_seed: int = 0
    calibration_seed: int = 0
    max_cycles: int = 5_000_000
    grid: tuple = (40, 60)
    tile_luts: int = 50
    tile_ffs: int = 100
    us_per_tile: float = 1.0
    clock_mhz: float = 200.0
    tdc_config: tdc.TdcConfig = tdc.TdcConfig()
    sensors: int = 2
    attenuation: float = tdc.DEFAULT_ATTENUATION
    detector: tdc.DetectorConfig = tdc.DetectorConfig()
    uart_latency: int = 0
    chunk_cycles: int = 4096
    name: str = ""

    def __post_init__(self):
        bm.canonical_name(self.benchmark)
        if self.max_cycles <= 0 or self.chunk_cycles <= 0:
            raise ScenarioError("max_cycles and chunk_cycles must be positive")
        if self.uart_latency < 0:
            raise ScenarioError("uart latency must be non-negative")
        events = list(self.unit_faults) + list(self.damage)
        for e in events:
            if e.cycle < 0:
                raise ScenarioError(f"event at negative cycle {e.cycle}")
        for seq in (self.unit_faults, self.damage):
            if list(seq) != sorted(seq, key=lambda e: e.cycle):
                raise ScenarioError("events must be time-ordered")


def _require(d: Mapping, key: str):
    if key not in d:
        raise ScenarioError(f"missing field {key!r}")
    return d[key]


def scenario_from_dict(d: Mapping[str, Any], seed: int | None = None) -> Scenario:
    """Build a Scenario from its JSON form; ``seed`` overrides the noise seed."""
    known = {"name", "benchmark", "trace", "unit_faults", "damage", "seeds", "seed", "max_cycles",
             "fabric", "tdc", "detector", "uart_latency_cycles", "chunk_cycles"}
    extra = set(d) - known
    if extra:
        raise ScenarioError(f"unknown scenario fields {sorted(extra)}")
    try:
        seeds = d.get("seeds", {})
        if isinstance(seeds, int):
            seeds = {"noise": seeds}
        noise = int(seeds.get("noise", d.get("seed", 0)))
        if seed is not None:
            noise = seed
        pulses = []
        for p in d.get("trace", []):
            amp = p.get("dv_mv", p.get("preset"))
            if amp is None:
                raise ScenarioError("trace pulse needs dv_mv or preset")
            pulses.append(tdc.Pulse(float(_require(p, "t_start")), float(_require(p, "t_end")),
                                    tdc.resolve_amplitude(amp), str(p.get("scope", "all"))))
        faults = []
        for f in d.get("unit_faults", []):
            unit, fault = em.fault_from_fields(f)
            faults.append(UnitFaultEvent(int(_require(f, "cycle")), unit, fault))
        damage = []
        for x in d.get("damage", []):
            if "rect" in x:
                damage.append(DamageEvent(int(_require(x, "cycle")), rect=fb.Rect(*map(int, x["rect"]))))
            elif "target" in x:
                damage.append(DamageEvent(int(_require(x, "cycle")), target=str(x["target"])))
            else:
                raise ScenarioError("damage event needs rect or target")
        fab = dict(d.get("fabric", {}))
        grid = fb.parse_grid(fab.pop("grid", "40x60"))
        tcfg = dict(d.get("tdc", {}))
        sensors = int(tcfg.pop("sensors", 2))
        attenuation = float(tcfg.pop("attenuation", tdc.DEFAULT_ATTENUATION))
        return Scenario(
            benchmark=str(_require(d, "benchmark")),
            trace=tdc.DisturbanceTrace(tuple(pulses), noise),
            unit_faults=tuple(sorted(faults, key=lambda e: e.cycle)),
            damage=tuple(sorted(damage, key=lambda e: e.cycle)),
            noise_seed=noise,
            calibration_seed=int(seeds.get("calibration", 0)),
            max_cycles=int(d.get("max_cycles", 5_000_000)),
            grid=grid,
            tile_luts=int(fab.pop("tile_luts", 50)),
            tile_ffs=int(fab.pop("tile_ffs", 100)),
            us_per_tile=float(fab.pop("us_per_tile", 1.0)),
            clock_mhz=float(fab.pop("clock_mhz", 200.0)),
            tdc_config=tdc.TdcConfig(**tcfg),
            sensors=sensors,
            attenuation=attenuation,
            detector=tdc.DetectorConfig(**d.get("detector", {})),
            uart_latency=int(d.get("uart_latency_cycles", 0)),
            chunk_cycles=int(d.get("chunk_cycles", 4096)),
            name=str(d.get("name", "")),
        )
    except (TypeError, KeyError) as exc:
        raise ScenarioError(f"malformed scenario: {exc}") from None


def load_scenario(text: str, seed: int | None = None) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from None
    return scenario_from_dict(data, seed)


# -- the controller ----------------------------------------------------------------

@dataclass
class ScenarioReport:
    scenario: str
    benchmark: str
    final_phase: str
    outcome: str
    correct: bool
    exit_code: int | None
    expected_exit_code: int
    total_cycles: int
    recovery_overhead_cycles: int
    alerts: list = field(default_factory=list)
    queued_alerts: list = field(default_factory=list)
    sanity_reports: list = field(default_factory=list)
    variants: list = field(default_factory=list)
    relocations: list = field(default_factory=list)
    transitions: list = field(default_factory=list)
    placements: dict = field(default_factory=dict)
    damaged_overlap: int = 0
    seeds: dict = field(default_factory=dict)
    log: list = field(default_factory=list)

    def to_json(self) -> str:
        d = asdict(self)
        d.pop("log")
        return json.dumps(d, sort_keys=True, indent=2) + "\n"

    def log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cycle", "event", "detail"])
        w.writerows(self.log)
        return buf.getvalue()


def _alert_dict(a: tdc.Alert, source: str = "sensor") -> dict:
    return {"t": a.t, "sensor": a.sensor, "peak_deviation": a.peak_deviation, "source": source}


class Controller:
    """Single-threaded event loop driving one scenario."""

    def __init__(self, sc: Scenario):
        self.sc = sc
        self.name = bm.canonical_name(sc.benchmark)
        self.variants = bm.variants(self.name)
        self.requirements = {v: rs.required_units(v, p, implicit=False) for v, p in self.variants.items()}
        self.footprints = dict(fb.REFERENCE_FOOTPRINTS)
        self.grid, self.ids = fb.build(sc.grid[0], sc.grid[1], sc.tile_luts, sc.tile_ffs, sc.us_per_tile,
                                       self.footprints)
        cfg = tdc.calibrate(sc.tdc_config, 1000, sc.calibration_seed)
        self.sensors = tdc.SensorArray(cfg, sc.trace, sc.sensors, sc.attenuation, sc.noise_seed)
        self.detectors = [tdc.Detector(sc.detector, cfg.baseline, s) for s in range(sc.sensors)]
        self.next_sample = 0
        self.clock = 0
        self.phase = Phase.RUNNING
        self.faults = em.FaultConfig()
        self.known_faulty: frozenset[str] = frozenset()
        self.variant = "V1"
        self.state = self._load("V1")
        self.events = sorted([(e.cycle, 0, i, e) for i, e in enumerate(sc.unit_faults)]
                             + [(e.cycle, 1, i, e) for i, e in enumerate(sc.damage)], key=lambda x: x[:3])
        self.overhead = 0
        self.report = ScenarioReport(
            scenario=sc.name, benchmark=self.name, final_phase="", outcome="", correct=False,
            exit_code=None, expected_exit_code=bm.expected(self.name).exit_code, total_cycles=0,
            recovery_overhead_cycles=0, variants=["V1"],
            seeds={"noise": sc.noise_seed, "calibration": sc.calibration_seed})
        self.log(0, "start", f"benchmark={self.name} variant=V1 D0={cfg.initial_delay_ps:.4f}ps")

    # bookkeeping

    def log(self, cycle, event: str, detail: str = "") -> None:
        self.report.log.append([int(cycle), event, detail])

    def goto(self, phase: Phase, why: str = "") -> None:
        if phase not in LEGAL[self.phase]:
            raise IllegalTransition(f"{self.phase.value} -> {phase.value}")
        self.report.transitions.append([self.clock, self.phase.value, phase.value])
        self.log(self.clock, "phase", f"{self.phase.value}->{phase.value}" + (f" ({why})" if why else ""))
        self.phase = phase

    def _load(self, variant: str) -> em.MachineState:
        self.variant = variant
        return em.load(self.variants[variant])

    def spend(self, cycles: int, what: str) -> None:
        """Advance the clock for controller work, sampling sensors meanwhile."""
        if cycles <= 0:
            return
        self.log(self.clock, "overhead", f"{what} {cycles} cycles")
        self.clock += cycles
        self.overhead += cycles
        self._sense_until(self.clock, stop_at_first=False)

    # sensing

    def _sense_until(self, cycle: float, stop_at_first: bool) -> list[tdc.Alert]:
        """Fold sensor samples taken before ``cycle``.

        With ``stop_at_first`` the fold halts at the end of the core cycle in
        which the first alert fires, and the coalesced alerts are returned;
        otherwise every alert is queued.
        """
        stop = self.sensors.index_at(cycle)
        start = self.next_sample
        if stop <= start:
            return []
        t = self.sensors.times(start, stop)
        hws = [self.sensors.hw(s, start, stop) for s in range(self.sensors.count)]
        cut = stop - start
        if stop_at_first:
            first = None
            for s, d in enumerate(self.detectors):
                probe = copy.copy(d)
                for a in probe.feed_array(t, hws[s]):
                    i = int(round((a.t - t[0]) * self.sensors.cfg.oversampling))
                    first = i if first is None else min(first, i)
                    break
            if first is not None:
                os_ = self.sensors.cfg.oversampling
                cycle_end = (math.floor(t[first]) + 1) * os_ - start
                cut = min(cut, cycle_end)
        alerts: list[tdc.Alert] = []
        for s, d in enumerate(self.detectors):
            alerts += d.feed_array(t[:cut], hws[s][:cut])
        self.next_sample = start + cut
        alerts.sort(key=lambda a: (a.t, str(a.sensor)))
        if not stop_at_first or self.phase is not Phase.RUNNING:
            for a in alerts:
                self.report.queued_alerts.append(_alert_dict(a))
                self.log(a.t, "alert-queued", f"sensor={a.sensor} peak={a.peak_deviation:g} phase={self.phase.value}")
            return []
        return alerts

    # events

    def _fire_events(self) -> None:
        while self.events and self.events[0][0] <= self.clock:
            _, kind, _, e = self.events.pop(0)
            if kind == 0:
                self.faults = self.faults.with_fault(e.unit, e.fault)
                f = e.fault
                detail = f.kind
                if f.kind == "stuck_at":
                    detail = f"stuck_at bit={f.bit} value={f.value}"
                elif f.kind == "wrong_result":
                    detail = f"wrong_result mask={f.mask:#010x}"
                self.log(self.clock, "unit-fault", f"{e.unit} {detail} scope={f.scope}")
            else:
                rect = e.rect
                if rect is None:
                    if e.target not in self.ids:
                        raise ScenarioError(f"damage target {e.target!r} is not a placement")
                    rect = self.grid.placements[self.ids[e.target]].rect
                hit = self.grid.damage(rect)
                names = [self.grid.placements[p].footprint for p in hit]
                self.log(self.clock, "damage", f"rect={rect.as_list()} affected={','.join(names) or '-'}")

    # main loop

    def run(self) -> ScenarioReport:
        sc = self.sc
        while True:
            self._fire_events()
            if self.clock >= sc.max_cycles:
                return self._finish(Phase.FAILED, "cycle budget exhausted")
            horizon = min(self.clock + sc.chunk_cycles, sc.max_cycles)
            if self.events:
                horizon = min(horizon, max(self.events[0][0], self.clock + 1))
            alerts = self._sense_until(horizon, stop_at_first=self.phase is Phase.RUNNING)
            if alerts:
                horizon = max(math.ceil(alerts[0].t), self.clock)
            budget = horizon - self.clock
            if budget > 0:
                res = em.run(self.state, self.faults, max_cycles=budget)
                self.clock += res.cycles
                if res.reason != "cycle-limit":
                    done = self._on_halt(res, alerts)
                    if done is not None:
                        return done
                    continue
            if alerts:
                done = self._on_alert(alerts, "sensor")
                if done is not None:
                    return done

    def _on_halt(self, res: em.RunResult, alerts: list) -> ScenarioReport | None:
        s = self.state
        if self.phase is Phase.RUNNING and res.reason == "trap":
            self.log(self.clock, "trap", f"{res.trap} pc={s.pc:#x}")
            a = tdc.Alert(float(self.clock), "trap", 0.0)
            return self._on_alert(alerts + [a], "trap")
        for a in alerts:
            self.log(a.t, "alert-after-halt", f"sensor={a.sensor} peak={a.peak_deviation:g}")
        correct = bm.check(self.name, s)
        what = f"exit={s.exit_code}" if res.reason == "ecall-exit" else f"trap {res.trap}"
        self.log(self.clock, "complete", f"variant={self.variant} {what} correct={correct}")
        if self.phase is Phase.RUNNING:
            return self._finish(Phase.RUNNING, "completed" if correct else "completed-incorrect")
        if correct:
            self.goto(Phase.RECOVERED)
            return self._finish(Phase.RECOVERED, "recovered")
        if self.phase is Phase.SOFT_RECOVERY:
            return self._hard_recovery("variant run incorrect")
        self.goto(Phase.FAILED, "rerun incorrect after reconfiguration")
        return self._finish(Phase.FAILED, "rerun incorrect")

    def _on_alert(self, alerts: list, source: str) -> ScenarioReport | None:
        for a in alerts:
            src = "trap" if a.sensor == "trap" else "sensor"
            self.report.alerts.append(_alert_dict(a, src))
            self.log(a.t, "alert", f"source={src} sensor={a.sensor} peak={a.peak_deviation:g}")
        self.goto(Phase.ALERT, "NMI")
        snapshot = self.state.copy()
        self.log(self.clock, "snapshot", f"pc={snapshot.pc:#x} retired={snapshot.retired}")
        self.spend(self.sc.uart_latency, "uart")
        self.goto(Phase.DIAGNOSING)
        report = sanity_check(self.faults)
        self.report.sanity_reports.append(report.to_dict())
        fails = ",".join(sorted(report.failed)) or "-"
        self.log(self.clock, "sanity", f"fail={fails} addressing={report.addressing}")
        self.spend(report.cycles, "sanity-check")
        if report.clean:
            if snapshot.halted:
                self.goto(Phase.RUNNING, "clean check after trap; restart")
                self.state = self._load(self.variant)
                return None
            self.goto(Phase.RUNNING, "near-miss")
            self.log(self.clock, "near-miss", f"resume pc={snapshot.pc:#x}")
            self.state = snapshot
            return None
        self.known_faulty = self.known_faulty | report.failed
        if report.addressing == "fail":
            return self._hard_recovery("address path faulty")
        choice = rs.select_variant(self.known_faulty, self.requirements)
        self.log(self.clock, "select", f"faulty={','.join(sorted(self.known_faulty))} variant={choice}")
        if choice == rs.UNRECOVERABLE:
            return self._hard_recovery("no software variant avoids the faulty units")
        self.goto(Phase.SOFT_RECOVERY)
        self.spend(self.sc.uart_latency, "uart")
        self.state = self._load(choice)
        self.report.variants.append(choice)
        self.log(self.clock, "swap", f"variant={choice} restart from entry")
        return None

    def _hard_recovery(self, why: str) -> ScenarioReport | None:
        self.goto(Phase.HARD_RECOVERY, why)
        self.spend(self.sc.uart_latency, "uart")
        pids = self.grid.affected()
        if self.ids["alu"] not in pids:
            pids.append(self.ids["alu"])
        for pid in pids:
            old = self.grid.placements[pid]
            try:
                new, cost = self.grid.relocate(pid, self.footprints)
            except fb.NoFitError as exc:
                self.log(self.clock, "relocate-failed", f"{old.footprint}: {exc}")
                self.goto(Phase.FAILED, "no fit")
                return self._finish(Phase.FAILED, "relocation no-fit")
            cycles = cost.cycles(self.sc.clock_mhz)
            self.report.relocations.append({
                "placement": old.footprint, "from": old.rect.as_list(), "to": new.rect.as_list(),
                "tiles": cost.tiles, "time_us": cost.time_us, "cycles": cycles})
            self.log(self.clock, "relocate", f"{old.footprint} {old.rect.as_list()}->{new.rect.as_list()} "
                                             f"tiles={cost.tiles}")
            self.spend(cycles, "reconfiguration")
        self.faults = em.FaultConfig()
        self.known_faulty = frozenset()
        self.state = self._load("V1")
        self.report.variants.append("V1")
        self.log(self.clock, "rerun", "variant=V1 on relocated logic")
        return None

    def _finish(self, phase: Phase, outcome: str) -> ScenarioReport:
        if phase is Phase.FAILED and self.phase is not Phase.FAILED:
            self.report.transitions.append([self.clock, self.phase.value, "FAILED"])
            self.log(self.clock, "phase", f"{self.phase.value}->FAILED ({outcome})")
            self.phase = Phase.FAILED
        r = self.report
        s = self.state
        r.final_phase = phase.value
        r.outcome = outcome
        r.exit_code = s.exit_code if s.halted else None
        r.correct = bool(s.halted and bm.check(self.name, s))
        r.total_cycles = int(self.clock)
        r.recovery_overhead_cycles = int(self.overhead)
        r.placements = {p.footprint: p.rect.as_list() for p in self.grid.placements.values()}
        r.damaged_overlap = int(sum(self.grid.damaged[p.rect.tiles()].sum() for p in self.grid.placements.values()))
        self.log(self.clock, "end", f"phase={phase.value} outcome={outcome} correct={r.correct}")
        return r


def run_scenario(sc: Scenario) -> ScenarioReport:
    return Controller(sc).run()
