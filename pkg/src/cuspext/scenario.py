"""Scenario = cusp profile + construction choice; the unit every report refers to."""
from dataclasses import dataclass, field
import json
import math

from .cusp import DyadicCells
from .profiles import CardioidProfile, PowerProfile
from .squeeze import SqueezeParams, squeezed_factory

EXP_J_CAP = 14


@dataclass(frozen=True)
class Scenario:
    s: float = 1.5
    j0: int = 6
    construction: str = "simple"
    squeeze: SqueezeParams = field(default_factory=SqueezeParams)
    cardioid: bool = False

    def __post_init__(self):
        if self.construction not in ("simple", "squeezed"):
            raise ValueError(f"unknown construction {self.construction!r}")
        if not self.cardioid and not self.s > 1:
            raise ValueError("cusp degree must satisfy s > 1")
        if int(self.j0) < 3:
            raise ValueError("j0 must be at least 3")

    @property
    def profile(self):
        return CardioidProfile() if self.cardioid else PowerProfile(float(self.s))

    @property
    def degree(self):
        return 1.5 if self.cardioid else float(self.s)

    @property
    def first_cell(self):
        # the cardioid's cusp cells must cover x in [-2^-j0, 0)
        return math.ceil(self.j0 / 2) if self.cardioid else int(self.j0)

    def cells(self):
        fac = squeezed_factory(self.squeeze) if self.construction == "squeezed" else None
        return DyadicCells(self.profile, self.first_cell, fac)

    def check_j(self, j):
        if j < self.first_cell:
            raise ValueError(f"cell index {j} below the first cell {self.first_cell}")
        if self.construction == "squeezed" and self.squeeze.mode == "exp" and j > EXP_J_CAP:
            raise ValueError(f"exp-mode squeeze supports j <= {EXP_J_CAP}")

    def descriptor(self):
        d = {"s": self.degree, "j0": int(self.j0), "construction": self.construction,
             "cardioid": self.cardioid}
        if self.construction == "squeezed":
            d["delta"] = self.squeeze.descriptor()
        return d

    def to_json(self):
        return json.dumps(self.descriptor(), sort_keys=True)

    @classmethod
    def from_descriptor(cls, d):
        sq = d.get("delta", {"mode": "exp"})
        return cls(s=float(d.get("s", 1.5)), j0=int(d.get("j0", 6)),
                   construction=d.get("construction", "simple"),
                   squeeze=SqueezeParams(sq.get("mode", "exp"), float(sq.get("p", 2.0))),
                   cardioid=bool(d.get("cardioid", False)))
