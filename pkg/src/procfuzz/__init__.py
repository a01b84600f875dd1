"""CSR-transition coverage guided fuzzing of RISC-V processor models."""

__version__ = "0.1.0"
