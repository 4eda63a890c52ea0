"""
Slice and multiplier accounting for the reservoir on a Virtex-II Pro class
device (23616 slices).

Linear model: 77 slices per membrane, 4 per synapse. The membrane figure is
the single-neuron measurement (85 slices, two synapses) minus the 8 slices
attributed to its two synapses.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

DEVICE_SLICES = 23616
MEMBRANE_SLICES = 77
SYNAPSE_SLICES = 4


class Design(enum.Enum):
    PROPOSED = "proposed"
    TRADITIONAL = "traditional"


@dataclass(frozen=True)
class ResourceEstimate:
    slices: int
    multipliers: int
    design: Design
    device_slices: int = DEVICE_SLICES
    synapse_slices: int = 0

    @property
    def utilization(self) -> float:
        return self.slices / self.device_slices


@dataclass(frozen=True)
class CostModel:
    membrane_slices: int = MEMBRANE_SLICES
    synapse_slices: int = SYNAPSE_SLICES
    device_slices: int = DEVICE_SLICES

    def estimate(self, neurons: int, synapses: int, design: Design = Design.PROPOSED) -> ResourceEstimate:
        if neurons < 1:
            raise ValueError("neurons must be >= 1")
        if synapses < 0:
            raise ValueError("synapses must be >= 0")
        design = Design(design)
        syn = self.synapse_slices * synapses
        mult = neurons if design is Design.PROPOSED else neurons + synapses
        return ResourceEstimate(self.membrane_slices * neurons + syn, mult, design,
                                self.device_slices, syn)


def estimate(neurons: int, synapses: int, design: Design = Design.PROPOSED,
             model: CostModel | None = None) -> ResourceEstimate:
    return (model or CostModel()).estimate(neurons, synapses, design)


# (description, neurons, synapses, design, quantity, reference value)
REFERENCE_POINTS = (
    ("1 neuron, 2 synapses: slices", 1, 2, Design.PROPOSED, "slices", 85),
    ("8 neurons, 16 synapses: slices", 8, 16, Design.PROPOSED, "slices", 680),
    ("8 neurons, 16 synapses: multipliers", 8, 16, Design.PROPOSED, "multipliers", 8),
    ("8 neurons, 16 synapses, traditional: multipliers", 8, 16, Design.TRADITIONAL, "multipliers", 24),
    ("100 synapses: synapse slices", 1, 100, Design.PROPOSED, "synapse_slices", 400),
)


@dataclass(frozen=True)
class FitRow:
    description: str
    expected: int
    got: int

    @property
    def ok(self) -> bool:
        return self.expected == self.got


def fit_check(model: CostModel | None = None) -> list[FitRow]:
    model = model or CostModel()
    rows = []
    for desc, n, s, design, qty, value in REFERENCE_POINTS:
        est = model.estimate(n, s, design)
        rows.append(FitRow(desc, value, getattr(est, qty)))
    return rows


def format_report(estimates, sep: str = ",") -> str:
    lines = [sep.join(["design", "neurons", "synapses", "slices", "multipliers",
                       "device_slices", "utilization_pct"])]
    for (n, s), e in estimates:
        lines.append(sep.join([e.design.value, str(n), str(s), str(e.slices), str(e.multipliers),
                               str(e.device_slices), f"{100 * e.utilization:.3f}"]))
    return "\n".join(lines) + "\n"
