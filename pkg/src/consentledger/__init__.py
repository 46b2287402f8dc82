"""Consent-management ledger engine.

A key-value ledger with MVCC validation, a hash-chained block log, an
execute-order-validate pipeline, consent/role contracts over three
alternative world-state key designs, audit/replay tooling, and a
benchmark harness with a CSV-emitting CLI.
"""

from consentledger.keys import ConsentFact, WorldStateDesign

__all__ = ["ConsentFact", "WorldStateDesign"]
