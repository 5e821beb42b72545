"""Per-step energy bookkeeping for a single trajectory."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

LEDGER_COLUMNS = ("t", "dt", "energy", "ito_increment", "ito_correction", "entropy_rate", "sup_u", "min_rho", "lam")


@dataclass
class EnergyLedger:
    """One row per accepted step.

    ``energy`` is h^d sum_K eta(U_K) after the step. ``ito_increment`` is the
    realised left-point sum_k (h^d sum_K Psi_k . u_K) dW_k, ``ito_correction``
    is dt h^d sum_K 1/2 sum_k |Psi_k|^2 / rho_K, and ``entropy_rate`` is
    dt h^d sum_K eta'(U_K) . drift_K, all evaluated at the left end point.
    ``sup_u`` and ``lam`` belong to the left state, ``min_rho`` to the new one.
    """

    energy0: float
    rows: list = field(default_factory=list)

    def append(self, **values):
        self.rows.append(tuple(float(values[c]) for c in LEDGER_COLUMNS))

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        j = LEDGER_COLUMNS.index(name)
        return np.array([r[j] for r in self.rows], dtype=float)

    def as_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float).reshape(len(self.rows), len(LEDGER_COLUMNS))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("energy0", repr(float(self.energy0))))
        w.writerow(LEDGER_COLUMNS)
        for r in self.rows:
            w.writerow([repr(v) for v in r])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EnergyLedger":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0][0] != "energy0" or tuple(rows[1]) != LEDGER_COLUMNS:
            raise ValueError("not an energy ledger CSV")
        ledger = cls(float(rows[0][1]))
        ledger.rows = [tuple(float(v) for v in r) for r in rows[2:]]
        return ledger
