"""Sample-size planning: Cochran's formula with finite population correction,
and proportional allocation over strata."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

Number = Union[int, float]


class SamplingError(ValueError):
    pass


def cochran_sample_size(Z: float, e: float, p: float, N: Number = math.inf) -> tuple[float, int]:
    """``(n0, n)``: large-population size and its finite-population-corrected ceiling."""
    if not Z > 0:
        raise SamplingError("Z must be positive")
    if not 0 < e < 1:
        raise SamplingError("margin e must lie in (0, 1)")
    if not 0 < p < 1:
        raise SamplingError("proportion p must lie in (0, 1)")
    if not (N == math.inf or (float(N).is_integer() and N >= 1)):
        raise SamplingError("population N must be a positive integer or infinite")
    n0 = Z * Z * p * (1 - p) / (e * e)
    exact = n0 if N == math.inf else n0 / (1 + (n0 - 1) / N)
    # the epsilon keeps float noise from pushing an exact integer up by one
    n = math.ceil(exact - 1e-9)
    if N != math.inf:
        n = min(n, int(N))
    return n0, n


def stratified_allocation(n: int, strata: Sequence[tuple[str, int]]) -> list[tuple[str, int, int]]:
    """Proportional largest-remainder allocation, clamped to stratum sizes.

    Ties on the remainder go to the larger stratum, then to the earlier one.
    """
    sizes = [size for _, size in strata]
    if n < 0 or any(s < 0 for s in sizes):
        raise SamplingError("sizes must be non-negative")
    total = sum(sizes)
    if n > total:
        raise SamplingError(f"cannot draw {n} items from a population of {total}")
    if n == 0:
        return [(sid, size, 0) for sid, size in strata]
    quotas = [Fraction(n * s, total) for s in sizes]
    alloc = [math.floor(q) for q in quotas]
    order = sorted(range(len(sizes)), key=lambda i: (-(quotas[i] - alloc[i]), -sizes[i], i))
    for i in order[: n - sum(alloc)]:
        alloc[i] += 1
    # proportional allocation never exceeds N_i, but keep the clamp for safety
    spill = 0
    for i, s in enumerate(sizes):
        if alloc[i] > s:
            spill += alloc[i] - s
            alloc[i] = s
    for i in order:
        if not spill:
            break
        room = min(sizes[i] - alloc[i], spill)
        alloc[i] += room
        spill -= room
    return [(sid, size, a) for (sid, size), a in zip(strata, alloc)]


@dataclass(frozen=True)
class SamplePlan:
    Z: float
    e: float
    p: float
    N: Number
    n0: float
    n: int
    allocations: tuple[tuple[str, int, int], ...] = ()

    def to_json(self) -> dict:
        return {
            "Z": self.Z, "e": self.e, "p": self.p,
            "N": None if self.N == math.inf else self.N,
            "n0": round(self.n0, 6), "n": self.n,
            "allocations": [{"stratum": s, "N_i": size, "n_i": k} for s, size, k in self.allocations],
        }

    def to_text(self) -> str:
        lines = [f"n0={self.n0:.2f}", f"N={'inf' if self.N == math.inf else self.N}", f"n={self.n}"]
        if self.allocations:
            width = max(len(s) for s, _, _ in self.allocations)
            lines.append("")
            lines.append(f"{'stratum'.ljust(width)}  {'N_i':>8}  {'n_i':>6}")
            for s, size, k in self.allocations:
                lines.append(f"{s.ljust(width)}  {size:>8}  {k:>6}")
        return "\n".join(lines) + "\n"


def plan_sample(Z: float, e: float, p: float, N: Number = math.inf,
                strata: Sequence[tuple[str, int]] = ()) -> SamplePlan:
    """Size the sample, then allocate it over ``strata`` when given.

    With strata and an infinite ``N``, the population is the sum of stratum sizes.
    """
    if strata and N == math.inf:
        N = sum(size for _, size in strata)
    n0, n = cochran_sample_size(Z, e, p, N)
    allocations = stratified_allocation(n, strata) if strata else []
    return SamplePlan(Z, e, p, N, n0, n, tuple(allocations))


def read_strata(text: str) -> list[tuple[str, int]]:
    """Strata CSV: ``stratum,size`` rows; a header row is optional."""
    rows = []
    for i, row in enumerate(csv.reader(io.StringIO(text))):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 2:
            raise SamplingError(f"strata row {i + 1}: expected `stratum,size`")
        name, size = row[0].strip(), row[1].strip()
        if i == 0 and not size.lstrip("-").isdigit():
            continue  # header
        try:
            rows.append((name, int(size)))
        except ValueError:
            raise SamplingError(f"strata row {i + 1}: size {size!r} is not an integer") from None
    return rows
