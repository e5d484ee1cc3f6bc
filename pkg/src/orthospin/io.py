"""Result rows, provenance and atomic file output."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from datetime import datetime, timezone

from . import __version__
from .rng import RNG_ID

CSV_COLUMNS = ("model", "n", "beta", "estimator", "value", "std_err", "num_samples", "seed",
               "rng_id", "model_hash", "version")


def make_row(spec, estimator, value, *, n="", beta="", std_err="", num_samples="", seed=""):
    return {
        "model": json.dumps(spec.to_dict(), sort_keys=True, separators=(",", ":")),
        "n": n,
        "beta": beta,
        "estimator": estimator,
        "value": value,
        "std_err": std_err,
        "num_samples": num_samples,
        "seed": seed,
        "rng_id": RNG_ID,
        "model_hash": spec.digest(),
        "version": __version__,
    }


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def manifest(config: dict):
    return {
        "config": config,
        "rng_id": RNG_ID,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_results(path, rows, config, fmt="csv"):
    """Write the rows in ``fmt``. CSV gets a sibling ``.manifest.json``; JSON embeds it.

    Returns the list of files written.
    """
    man = manifest(config)
    if fmt == "csv":
        atomic_write(path, rows_to_csv(rows))
        side = os.path.splitext(os.fspath(path))[0] + ".manifest.json"
        atomic_write(side, json.dumps(man, indent=2, sort_keys=True) + "\n")
        return [os.fspath(path), side]
    if fmt == "json":
        atomic_write(path, json.dumps({"manifest": man, "rows": rows}, indent=2) + "\n")
        return [os.fspath(path)]
    raise ValueError(f"unknown format {fmt!r}")
