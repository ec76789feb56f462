"""Overhead study: code size and fault-free cycles of every variant."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import benchmarks as bm
from . import emulator as em
from .asm import code_size_bytes, data_bytes, text_bytes
from .resynth import VARIANTS

COLUMNS = ("benchmark", "variant", "code_bytes", "data_bytes", "cycles", "instructions", "correct")


class BenchError(RuntimeError):
    pass


@dataclass(frozen=True)
class BenchResult:
    benchmark: str
    variant: str
    code_bytes: int
    data_bytes: int
    cycles: int
    instructions: int
    correct: bool

    @property
    def memory_bytes(self) -> int:
        return self.code_bytes + self.data_bytes

    def row(self) -> list:
        return [self.benchmark, self.variant, self.code_bytes, self.data_bytes, self.cycles,
                self.instructions, "true" if self.correct else "false"]


def measure(name: str, variant: str, cost: em.CostModel = em.DEFAULT_COST,
            max_cycles: int = 50_000_000) -> BenchResult:
    name = bm.canonical_name(name)
    p = bm.variants(name)[variant]
    s = em.load(p)
    res = em.run(s, cost=cost, max_cycles=max_cycles)
    return BenchResult(name, variant, text_bytes(p), data_bytes(p), res.cycles, res.retired,
                       res.reason == "ecall-exit" and bm.check(name, s))


def bench(suite: Iterable[str] = bm.NAMES, cost: em.CostModel = em.DEFAULT_COST,
          strict: bool = True) -> list[BenchResult]:
    """All variants of each benchmark, sorted by (benchmark, variant).

    With ``strict`` an incorrect fault-free row raises :class:`BenchError`,
    since its overhead figures would be meaningless.
    """
    names = sorted({bm.canonical_name(n) for n in suite})
    if not names:
        raise BenchError("empty benchmark suite")
    results = [measure(n, v, cost) for n in names for v in VARIANTS]
    bad = [f"{r.benchmark}/{r.variant}" for r in results if not r.correct]
    if strict and bad:
        raise BenchError(f"variants disagree with the oracle: {', '.join(bad)}")
    return results


def to_csv(results: Sequence[BenchResult]) -> str:
    if not results:
        raise BenchError("no results to emit")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in sorted(results, key=lambda r: (r.benchmark, r.variant)):
        w.writerow(r.row())
    return buf.getvalue()


def emit(results: Sequence[BenchResult], path) -> None:
    text = to_csv(results)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def overheads(results: Sequence[BenchResult]) -> dict:
    """Per benchmark: added bytes and cycle ratio of each variant relative to V1."""
    out: dict = {}
    base = {r.benchmark: r for r in results if r.variant == "V1"}
    for r in results:
        b = base.get(r.benchmark)
        if b is None:
            continue
        out.setdefault(r.benchmark, {})[r.variant] = {
            "added_bytes": r.memory_bytes - b.memory_bytes,
            "cycle_ratio": r.cycles / b.cycles,
        }
    return out


def memory_delta(name: str, variant: str) -> int:
    v = bm.variants(name)
    return code_size_bytes(v[variant]) - code_size_bytes(v["V1"])
