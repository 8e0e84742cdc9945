"""Bundled corpus specs, one JSON file per public HAR dataset."""
