"""Data package: series ingestion, run configuration and artifact files."""
