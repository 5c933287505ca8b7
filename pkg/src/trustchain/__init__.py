"""SBOM verifiable credentials with selective disclosure, anchored on a
simulated permissioned ledger."""

__version__ = "0.1.0"
