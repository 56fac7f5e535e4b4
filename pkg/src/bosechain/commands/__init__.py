"""Commands package."""

from . import ground_scan, perturb, quench, transfer_check, validate, version

__all__ = ["ground_scan", "perturb", "quench", "transfer_check", "validate", "version"]
