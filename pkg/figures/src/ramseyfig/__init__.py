"""Figure rendering for Ramsey-schedule benchmark result files.

This package consumes the producer's documented file formats (CSV with a
spec-hash header line plus a JSON sidecar) and nothing else; it never
imports the toolkit that generated the data.
"""

__version__ = "0.1.0"
