"""Figure specifications.

A FigureSpec names one input results file (a CSV plus its JSON sidecar),
the kind of figure to draw from it, and the output image path.  Validation
here covers only the spec itself; file-level checks (hash agreement,
required columns, non-empty data) happen at load time in io.py.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import SpecError


class FigureKind(enum.Enum):
    RmseVsBudget = "rmse-vs-budget"
    Robustness = "robustness"
    CrosstalkScaling = "crosstalk-scaling"
    ShotRatio = "shot-ratio"
    CrbLandscape = "crb-landscape"


# Which parameter column to draw when the spec does not say.  The first
# three are Monte Carlo sweeps keyed by fitted parameter; shot-ratio rows
# carry the deterministic split under a single fixed name.
_DEFAULT_PARAM = {
    FigureKind.RmseVsBudget: "omega",
    FigureKind.Robustness: "omega",
    FigureKind.CrosstalkScaling: "J",
    FigureKind.ShotRatio: "shot_ratio",
}

_IMAGE_SUFFIXES = (".png", ".svg", ".pdf")


@dataclass(frozen=True)
class FigureSpec:
    kind: FigureKind
    csv: str
    out: str
    sidecar: str | None = None  # default: the csv path with a .json suffix
    param: str | None = None  # parameter column; None picks the kind default
    title: str | None = None
    xlabel: str | None = None
    ylabel: str | None = None
    dpi: int = 150

    def __post_init__(self):
        if not self.csv:
            raise SpecError("csv input path must be non-empty")
        if not self.out:
            raise SpecError("out image path must be non-empty")
        suffix = Path(self.out).suffix.lower()
        if suffix not in _IMAGE_SUFFIXES:
            raise SpecError(
                f"out must end in one of {', '.join(_IMAGE_SUFFIXES)}, "
                f"got {self.out!r}")
        if self.dpi <= 0:
            raise SpecError("dpi must be positive")
        if self.kind is FigureKind.CrbLandscape and self.param is not None:
            raise SpecError("crb-landscape has no parameter column to select")

    @property
    def sidecar_path(self) -> Path:
        if self.sidecar is not None:
            return Path(self.sidecar)
        return Path(self.csv).with_suffix(".json")

    @property
    def effective_param(self) -> str | None:
        if self.kind is FigureKind.CrbLandscape:
            return None
        return self.param if self.param is not None else _DEFAULT_PARAM[self.kind]


_SPEC_KEYS = tuple(f.name for f in fields(FigureSpec))


def spec_from_json(blob: dict, kind: FigureKind) -> FigureSpec:
    """Build a FigureSpec from a parsed JSON block for a known kind.

    The block may repeat the kind (as its enum value string), in which case
    it must agree with the subcommand; unknown keys are rejected rather
    than ignored so stale specs fail loudly.
    """
    if not isinstance(blob, dict):
        raise SpecError("figure spec must be a JSON object")
    unknown = sorted(set(blob) - set(_SPEC_KEYS))
    if unknown:
        raise SpecError(f"unknown figure spec keys: {', '.join(unknown)}")
    values = dict(blob)
    declared = values.pop("kind", None)
    if declared is not None and declared != kind.value:
        raise SpecError(
            f"spec file declares kind {declared!r} but the command is "
            f"{kind.value!r}")
    if "dpi" in values:
        try:
            values["dpi"] = int(values["dpi"])
        except (TypeError, ValueError):
            raise SpecError(f"dpi must be an integer, got {values['dpi']!r}")
    for name in ("csv", "out", "sidecar", "param", "title", "xlabel",
                 "ylabel"):
        if name in values and values[name] is not None \
                and not isinstance(values[name], str):
            raise SpecError(f"{name} must be a string")
    missing = [name for name in ("csv", "out") if name not in values]
    if missing:
        raise SpecError(f"figure spec requires: {', '.join(missing)}")
    return FigureSpec(kind=kind, **values)
