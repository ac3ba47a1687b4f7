"""Predicted and empirical counts of integral points of bounded height on
wonderful compactifications of split adjoint groups."""

from wondercount.root_data import CartanType, RootDatum, build_root_datum, pairing
from wondercount.geometry import (
    AsymptoticInvariants,
    DivisorChoice,
    PicClass,
    PlaceSet,
    anticanonical,
    character_group_order,
    invariants,
    log_anticanonical,
)

__version__ = "0.1.0"

__all__ = [
    "AsymptoticInvariants",
    "CartanType",
    "DivisorChoice",
    "PicClass",
    "PlaceSet",
    "RootDatum",
    "anticanonical",
    "build_root_datum",
    "character_group_order",
    "invariants",
    "log_anticanonical",
    "pairing",
]
