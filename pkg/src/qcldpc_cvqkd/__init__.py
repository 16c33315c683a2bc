"""Limited-precision layered QC-LDPC decoding for CV-QKD reconciliation."""

__version__ = "0.1.0"
