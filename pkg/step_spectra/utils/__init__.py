"""Utility modules for the step-spectra toolkit."""

from step_spectra.utils.tables import ResultTable, config_hash, read_table, write_table

__all__ = ["ResultTable", "config_hash", "read_table", "write_table"]
