"""Reading the benchmark results contract.

The producer writes every results CSV with a first line of the form
`# spec_hash = <sha256 of the canonical run specification>` and repeats
the same hash in a JSON sidecar next to it.  This reader checks that the
two agree before handing any data over; recomputing the hash from the
specification is the producer's business, not ours.
"""

from __future__ import annotations

import csv
import json

from .errors import ResultFileError

_HASH_PREFIX = "# spec_hash = "

# Column contracts, by file family.
HARNESS_COLUMNS = ("strategy", "grid_param", "grid_value", "param", "rmse",
                   "crb", "trials", "failures")
LANDSCAPE_COLUMNS = ("t1", "t2", "crb_trace")


def read_csv_hash(path) -> str:
    try:
        with open(path) as fh:
            first = fh.readline()
    except OSError as err:
        raise ResultFileError(f"cannot read {path}: {err}") from err
    if not first.startswith(_HASH_PREFIX):
        raise ResultFileError(
            f"{path} lacks the '# spec_hash = ' header line")
    return first[len(_HASH_PREFIX):].strip()


def load_sidecar(path) -> dict:
    try:
        with open(path) as fh:
            blob = json.load(fh)
    except OSError as err:
        raise ResultFileError(f"cannot read sidecar {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ResultFileError(
            f"sidecar {path} is not valid JSON: {err}") from err
    if not isinstance(blob, dict) or "spec_hash" not in blob:
        raise ResultFileError(f"sidecar {path} lacks a spec_hash field")
    return blob


def load_results(csv_path, sidecar_path, required_columns):
    """Hash-checked rows plus sidecar for one results file.

    Returns (rows, sidecar) where rows is a list of dicts keyed by column
    name with every value still a string; callers convert what they plot.
    """
    file_hash = read_csv_hash(csv_path)
    sidecar = load_sidecar(sidecar_path)
    if str(sidecar["spec_hash"]) != file_hash:
        raise ResultFileError(
            f"spec_hash mismatch: {csv_path} carries {file_hash[:12]}..., "
            f"sidecar {sidecar_path} carries "
            f"{str(sidecar['spec_hash'])[:12]}...")
    with open(csv_path, newline="") as fh:
        fh.readline()  # hash line, already validated
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ResultFileError(f"{csv_path} has no column header")
        missing = [c for c in required_columns if c not in reader.fieldnames]
        if missing:
            raise ResultFileError(
                f"{csv_path} lacks required columns: {', '.join(missing)}")
        rows = list(reader)
    if not rows:
        raise ResultFileError(f"{csv_path} contains no data rows")
    for i, row in enumerate(rows):
        if any(row.get(c) in (None, "") for c in required_columns):
            raise ResultFileError(
                f"{csv_path} data row {i + 1} is incomplete")
    return rows, sidecar
