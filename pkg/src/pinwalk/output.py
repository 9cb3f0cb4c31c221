"""Deterministic CSV/JSON writers shared by the CLI and the test suite.

Floats are rendered with ``repr`` (shortest round-trip form), line endings
are LF, separators are commas and the header row is mandatory, so identical
inputs always produce identical bytes.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

__all__ = ["format_value", "write_csv", "write_json", "write_sidecar", "read_csv"]


def format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, fieldnames, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(fieldnames)
        for row in rows:
            if isinstance(row, dict):
                wr.writerow([format_value(row[k]) for k in fieldnames])
            else:
                wr.writerow([format_value(v) for v in row])


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_sidecar(out_path, command: str, config: dict) -> None:
    """Drop `<file>.meta.json` next to an output file.

    The sidecar embeds the fully resolved configuration, so running the same
    command with ``--config <sidecar>`` reproduces the file byte for byte.
    """
    write_json(
        str(out_path) + ".meta.json",
        {"command": command, "config": config, "output": os.path.basename(str(out_path))},
    )


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
