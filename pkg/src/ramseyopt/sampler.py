"""Shot-noise simulation: binomial draws of +-1 measurement outcomes whose
mean is the model expectation.

Draws are keyed hierarchically by (seed, experiment, qubit, entry) so adding
entries or qubits never perturbs other entries' streams, and results are
bit-identical regardless of execution order or thread count.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParseError, UnphysicalModelError
from .fisher import MeasurementPlan
from .signal import Quadrature, RamseyModel, expectation

_MEAN_SLACK = 1e-6


@dataclass(frozen=True)
class SampleRecord:
    time: float
    quadrature: Quadrature
    shots: int
    empirical_mean: float

    def __post_init__(self):
        if self.shots < 1:
            raise DomainError("shots must be positive")
        # mean must be attainable from integer +-1 counts
        n2 = self.empirical_mean * self.shots + self.shots
        if abs(n2 - round(n2)) > _MEAN_SLACK or round(n2) % 2 != 0:
            raise DomainError(
                f"mean {self.empirical_mean} unattainable with {self.shots} shots")
        if not 0 <= round(n2) <= 2 * self.shots:
            raise DomainError("empirical mean outside [-1, 1]")


@dataclass(frozen=True)
class SampleSet:
    records: tuple
    seed: int
    model_descriptor: str

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    def mean_at(self, quadrature: Quadrature) -> float:
        """Shot-weighted mean over all records of one quadrature."""
        rs = [r for r in self.records if r.quadrature is quadrature]
        if not rs:
            raise DomainError(f"no {quadrature} records in sample set")
        total = sum(r.shots for r in rs)
        return sum(r.empirical_mean * r.shots for r in rs) / total


def entry_rng(seed: int, experiment: int, qubit: int, entry: int) -> np.random.Generator:
    key = (seed % (1 << 64), experiment, qubit, entry)
    return np.random.default_rng(np.random.SeedSequence(key))


def _draw(model: RamseyModel, record_key, time: float, quadrature: Quadrature,
          shots: int) -> float:
    f = float(expectation(model, quadrature, time))
    if abs(f) > 1 + 1e-12:
        raise UnphysicalModelError(
            f"expectation {f:.6f} outside [-1, 1]; amplitude/offset values "
            "do not describe a physical state")
    p = min(max((1.0 + f) / 2.0, 0.0), 1.0)
    rng = entry_rng(*record_key)
    n_plus = int(rng.binomial(shots, p))
    return (2 * n_plus - shots) / shots


def sample(model: RamseyModel, measurement: MeasurementPlan, seed: int,
           experiment: int = 0, qubit: int = 0) -> SampleSet:
    """Simulate every plan entry with independent binomial shot noise."""
    records = []
    for idx, e in enumerate(measurement.entries):
        mean = _draw(model, (seed, experiment, qubit, idx), e.time,
                     e.quadrature, e.shots)
        records.append(SampleRecord(e.time, e.quadrature, e.shots, mean))
    return SampleSet(tuple(records), seed, repr(model))


def sample_values(values, shots: int, seed: int,
                  experiment: int = 0, qubit: int = 0) -> np.ndarray:
    """Empirical means for precomputed expectation values (one entry each)."""
    values = np.asarray(values, dtype=float)
    if np.abs(values).max(initial=0.0) > 1 + 1e-12:
        raise UnphysicalModelError("expectation values outside [-1, 1]")
    out = np.empty(len(values))
    for idx, f in enumerate(values):
        p = min(max((1.0 + f) / 2.0, 0.0), 1.0)
        rng = entry_rng(seed, experiment, qubit, idx)
        out[idx] = (2 * int(rng.binomial(shots, p)) - shots) / shots
    return out


# ---------------------------------------------------------------------------
# serialization

def write_sample_csv(ss: SampleSet, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# seed = {ss.seed}\n")
        fh.write(f"# model = {ss.model_descriptor}\n")
        fh.write("time,quadrature,shots,mean\n")
        for r in ss.records:
            fh.write(f"{r.time!r},{r.quadrature},{r.shots},{r.empirical_mean!r}\n")


def read_sample_csv(path) -> SampleSet:
    seed, model = 0, ""
    records = []
    with open(path) as fh:
        lines = fh.readlines()
    header_seen = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            key = key.strip()
            try:
                if key == "seed":
                    seed = int(value)
                elif key == "model":
                    model = value.strip()
            except ValueError as err:
                raise ParseError(str(err), line=lineno) from None
            continue
        if not header_seen:
            if line != "time,quadrature,shots,mean":
                raise ParseError("expected header time,quadrature,shots,mean",
                                 line=lineno)
            header_seen = True
            continue
        try:
            t, q, n, m = line.split(",")
            records.append(SampleRecord(float(t), Quadrature(q), int(n), float(m)))
        except (ValueError, DomainError) as err:
            raise ParseError(str(err), line=lineno) from None
    if not header_seen:
        raise ParseError("missing header line", line=len(lines))
    return SampleSet(tuple(records), seed, model)


def write_sample_json(ss: SampleSet, path) -> None:
    payload = {
        "seed": ss.seed,
        "model": ss.model_descriptor,
        "records": [
            {"time": r.time, "quadrature": str(r.quadrature),
             "shots": r.shots, "mean": r.empirical_mean}
            for r in ss.records],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def read_sample_json(path) -> SampleSet:
    try:
        with open(path) as fh:
            payload = json.load(fh)
        records = tuple(
            SampleRecord(float(r["time"]), Quadrature(r["quadrature"]),
                         int(r["shots"]), float(r["mean"]))
            for r in payload["records"])
        return SampleSet(records, int(payload["seed"]), str(payload["model"]))
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as err:
        raise ParseError(f"bad sample json: {err}") from None
