"""Business-case arithmetic: hours, FTE, benefits, payback."""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction
from pathlib import Path

from .datafiles import data_path

DEFAULT_SECONDS_SAVED = 30
DEFAULT_FTE_ANNUAL_HOURS = 1650

PAYBACK_NEVER = "never"


@dataclass(frozen=True)
class ROIInputs:
    apps_per_year: int
    docs_per_app: int
    seconds_saved_per_doc: int = DEFAULT_SECONDS_SAVED
    officer_hourly_cost: Decimal = Decimal(0)
    annual_system_cost: Decimal = Decimal(0)
    one_off_cost: Decimal = Decimal(0)
    fte_annual_hours: int = DEFAULT_FTE_ANNUAL_HOURS

    def __post_init__(self) -> None:
        numbers = (
            self.apps_per_year, self.docs_per_app, self.seconds_saved_per_doc,
            self.officer_hourly_cost, self.annual_system_cost, self.one_off_cost,
        )
        if any(v < 0 for v in numbers):
            raise ValueError("ROI inputs must be non-negative")
        if self.fte_annual_hours <= 0:
            raise ValueError("fte_annual_hours must be positive")


@dataclass(frozen=True)
class ROIOutputs:
    annual_hours_saved: Decimal
    fte_unlocked: Decimal
    gross_benefit: Decimal
    net_benefit: Decimal
    payback_months: Decimal | str

    def to_payload(self) -> dict:
        payback = self.payback_months if isinstance(self.payback_months, str) else str(self.payback_months)
        return {
            "annual_hours_saved": str(self.annual_hours_saved),
            "fte_unlocked": str(self.fte_unlocked),
            "gross_benefit": str(self.gross_benefit),
            "net_benefit": str(self.net_benefit),
            "payback_months": payback,
        }


def _round2(value: Fraction) -> Decimal:
    return (Decimal(value.numerator) / Decimal(value.denominator)).quantize(
        Decimal("0.01"), rounding=ROUND_HALF_EVEN
    )


def compute_roi(inputs: ROIInputs) -> ROIOutputs:
    """Exact fractions internally, two fractional digits round-half-even on output."""
    hours = Fraction(inputs.apps_per_year * inputs.docs_per_app * inputs.seconds_saved_per_doc, 3600)
    fte = hours / inputs.fte_annual_hours
    rate = Fraction(inputs.officer_hourly_cost)
    gross = hours * rate
    net = gross - Fraction(inputs.annual_system_cost)
    one_off = Fraction(inputs.one_off_cost)
    if net > 0:
        payback: Decimal | str = _round2(12 * one_off / net)
    else:
        payback = PAYBACK_NEVER
    return ROIOutputs(
        annual_hours_saved=_round2(hours),
        fte_unlocked=_round2(fte),
        gross_benefit=_round2(gross),
        net_benefit=_round2(net),
        payback_months=payback,
    )


def load_scenario(name_or_path: str | Path) -> ROIInputs:
    """Scenario files carry the ROI inputs; currency fields as strings or numbers."""
    candidate = Path(name_or_path)
    source = candidate if candidate.suffix == ".json" and candidate.exists() else data_path("scenarios", f"{name_or_path}.json")
    raw = json.loads(source.read_text(encoding="utf-8"))
    return ROIInputs(
        apps_per_year=int(raw["apps_per_year"]),
        docs_per_app=int(raw["docs_per_app"]),
        seconds_saved_per_doc=int(raw.get("seconds_saved_per_doc", DEFAULT_SECONDS_SAVED)),
        officer_hourly_cost=Decimal(str(raw.get("officer_hourly_cost", 0))),
        annual_system_cost=Decimal(str(raw.get("annual_system_cost", 0))),
        one_off_cost=Decimal(str(raw.get("one_off_cost", 0))),
        fte_annual_hours=int(raw.get("fte_annual_hours", DEFAULT_FTE_ANNUAL_HOURS)),
    )


def inputs_from_payload(payload: dict) -> ROIInputs:
    """Service-facing constructor with the same coercions as scenario files."""
    return ROIInputs(
        apps_per_year=int(payload["apps_per_year"]),
        docs_per_app=int(payload["docs_per_app"]),
        seconds_saved_per_doc=int(payload.get("seconds_saved_per_doc", DEFAULT_SECONDS_SAVED)),
        officer_hourly_cost=Decimal(str(payload.get("officer_hourly_cost", 0))),
        annual_system_cost=Decimal(str(payload.get("annual_system_cost", 0))),
        one_off_cost=Decimal(str(payload.get("one_off_cost", 0))),
        fte_annual_hours=int(payload.get("fte_annual_hours", DEFAULT_FTE_ANNUAL_HOURS)),
    )
