"""LDPC-coded DCO-OFDM link simulator with neural-network-aided BICM receivers."""

__version__ = "0.1.0"
