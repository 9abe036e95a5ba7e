"""Token pricing tables and exact USD cost accounting.

Rates are quoted per one million tokens. All arithmetic uses
:class:`decimal.Decimal`, so cost is exact and additive: splitting a usage
record across sessions never changes the total. Display rounding (cents,
half-up) happens only at the formatting boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Union

from .backends import TokenUsage
from .errors import ForgekitError

_MILLION = Decimal(1_000_000)


class PricingError(ForgekitError):
    pass


@dataclass(frozen=True)
class PricingEntry:
    model: str
    input_per_m: Decimal
    cache_read_per_m: Decimal
    output_per_m: Decimal
    cache_write_per_m: Optional[Decimal] = None  # absent: billed at input rate

    def __post_init__(self) -> None:
        rates = [self.input_per_m, self.cache_read_per_m, self.output_per_m]
        if self.cache_write_per_m is not None:
            rates.append(self.cache_write_per_m)
        if any(r < 0 for r in rates):
            raise ValueError("rates must be >= 0")


def account_cost(usage: TokenUsage, price: PricingEntry) -> Decimal:
    """Exact USD cost of a usage record under one pricing entry."""
    cw_rate = price.cache_write_per_m if price.cache_write_per_m is not None else price.input_per_m
    total = (
        Decimal(usage.input) * price.input_per_m
        + Decimal(usage.cache_write) * cw_rate
        + Decimal(usage.cache_read) * price.cache_read_per_m
        + Decimal(usage.output) * price.output_per_m
    )
    return total / _MILLION


def format_usd(amount: Decimal) -> str:
    """Render to cents, rounding half-up."""
    return str(amount.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def _to_rate(value) -> Optional[Decimal]:
    if value is None:
        return None
    if isinstance(value, Decimal):
        return value
    return Decimal(str(value))


def load_pricing(document: Union[str, Path, Mapping, list]) -> list[PricingEntry]:
    """Parse a pricing document (path, JSON text, or parsed structure).

    The document is either a list of entries or ``{"models": [...]}``; each
    entry carries model, input_per_m, cache_read_per_m, output_per_m, and an
    optional cache_write_per_m. Model names must be unique.
    """
    if isinstance(document, (str, Path)):
        text = Path(document).read_text(encoding="utf-8") if Path(str(document)).exists() else str(document)
        try:
            document = json.loads(text, parse_float=Decimal)
        except ValueError as exc:
            raise PricingError(f"unparseable pricing document: {exc}") from exc
    rows = document.get("models", []) if isinstance(document, Mapping) else document
    entries: list[PricingEntry] = []
    seen: set[str] = set()
    for row in rows:
        try:
            entry = PricingEntry(
                model=row["model"],
                input_per_m=_to_rate(row["input_per_m"]),
                cache_read_per_m=_to_rate(row["cache_read_per_m"]),
                output_per_m=_to_rate(row["output_per_m"]),
                cache_write_per_m=_to_rate(row.get("cache_write_per_m")),
            )
        except (KeyError, ArithmeticError, TypeError) as exc:
            raise PricingError(f"bad pricing row {row!r}: {exc}") from exc
        if entry.model in seen:
            raise PricingError(f"duplicate model: {entry.model}")
        seen.add(entry.model)
        entries.append(entry)
    return entries


def default_pricing() -> list[PricingEntry]:
    """The shipped rate table (current provider list prices per 1M tokens).

    Tiered providers appear as one entry per tier (prompt-size tiers, cache
    TTL variants); selecting the tier is backend configuration.
    """
    text = resources.files("forgekit.data").joinpath("pricing_default.json").read_text("utf-8")
    return load_pricing(json.loads(text, parse_float=Decimal))


def pricing_table(entries: list[PricingEntry]) -> dict[str, PricingEntry]:
    return {e.model: e for e in entries}
