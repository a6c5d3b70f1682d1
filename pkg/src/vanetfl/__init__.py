"""Federated learning for vehicular networks with oracle-verified secure
aggregation, a hash-chained provenance ledger and a BAN-logic checker."""

__version__ = "0.1.0"
