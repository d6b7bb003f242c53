"""Waterfall-plot data: base value, per-feature Shapley values and explained output per probe state."""

from __future__ import annotations

import csv

import numpy as np

from xrlslice.explain import FEATURES, explain_arrays

COLUMNS = ("probe", "base_value", *(f"shap_{f}" for f in FEATURES), "fx",
           *(f"value_{f}" for f in FEATURES))


def export_waterfall(net, probe_states, background, chunk_prb: int, normalizer=None) -> list[dict]:
    """One row per probe state.  ``value_*`` columns hold denormalized features when a normalizer is given."""
    probe_states = np.atleast_2d(np.asarray(probe_states, dtype=np.float64))
    shap, base, fx = explain_arrays(net, probe_states, background, chunk_prb)
    raw = normalizer.denormalize(probe_states) if normalizer is not None else probe_states
    rows = []
    for k in range(probe_states.shape[0]):
        row = {"probe": k, "base_value": float(base[k])}
        row.update({f"shap_{f}": float(shap[k, l]) for l, f in enumerate(FEATURES)})
        row["fx"] = float(fx[k])
        row.update({f"value_{f}": float(raw[k, l]) for l, f in enumerate(FEATURES)})
        rows.append(row)
    return rows


def dominant_feature(rows: list[dict]) -> str:
    """Feature with the largest mean absolute Shapley value over the exported rows."""
    mean_abs = [np.mean([abs(r[f"shap_{f}"]) for r in rows]) for f in FEATURES]
    return FEATURES[int(np.argmax(mean_abs))]


def write_waterfall_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def read_waterfall_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: (int(v) if k == "probe" else float(v)) for k, v in row.items()}
                for row in csv.DictReader(fh)]
