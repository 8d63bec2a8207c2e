"""Per-slot records, aggregate tables, and file emission.

The per-slot CSV column order is a documented contract:

    slot,scheme,sum_rate_bps_hz,kl_worst,kl_nominal,trace_c_prior,
    trace_c_post,delta_aw,delta_rw,p_comm_w,p_sense_w,p_fa,p_md,status,
    outer_iters,wall_ms

Floats are emitted with repr so identical records always produce identical
bytes; the run manifest echoes the resolved scenario, seed and versions.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelSet
from .driver import BeamformingSolution
from .scenario import ScenarioConfig

SLOT_CSV_COLUMNS = [
    "slot",
    "scheme",
    "sum_rate_bps_hz",
    "kl_worst",
    "kl_nominal",
    "trace_c_prior",
    "trace_c_post",
    "delta_aw",
    "delta_rw",
    "p_comm_w",
    "p_sense_w",
    "p_fa",
    "p_md",
    "status",
    "outer_iters",
    "wall_ms",
]


@dataclass
class SlotRecord:
    """Metrics of one optimized slot plus the objects needed to re-derive them."""

    slot: int
    scheme: str
    sum_rate_bps_hz: float
    kl_worst: float
    kl_nominal: float
    trace_c_prior: float
    trace_c_post: float
    delta_aw: float
    delta_rw: float
    p_comm_w: float
    p_sense_w: float
    p_fa: float
    p_md: float
    status: str
    outer_iters: int
    wall_ms: float
    # non-CSV payload for recomputation and tests
    solution: BeamformingSolution | None = None
    channels: ChannelSet | None = None
    h_aw_true: np.ndarray | None = None
    h_rw_true: np.ndarray | None = None

    def csv_row(self) -> list[str]:
        out = []
        for col in SLOT_CSV_COLUMNS:
            val = getattr(self, col)
            if isinstance(val, float):
                out.append(repr(val))
            else:
                out.append(str(val))
        return out

    def comparable_fields(self) -> tuple:
        """All CSV metrics except wall time (which is not reproducible)."""
        return tuple(
            getattr(self, col) for col in SLOT_CSV_COLUMNS if col != "wall_ms"
        )


def _write_csv(path: str, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def emit_results(
    records: list[SlotRecord],
    out_dir: str,
    formats: tuple[str, ...] = ("csv",),
    scenario: ScenarioConfig | None = None,
    seed: int | None = None,
    sweep_tables: dict[str, list[dict]] | None = None,
) -> list[str]:
    """Write the per-slot table, the run manifest, and per-figure aggregates.

    Returns the list of file paths written.  Emission is deterministic: the
    same records produce byte-identical files.
    """
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []

    def emit(path: str, header: list[str], rows: list[list[str]]) -> None:
        _write_csv(path, header, rows)
        written.append(path)

    path = os.path.join(out_dir, "slots.csv")
    emit(path, SLOT_CSV_COLUMNS, [r.csv_row() for r in records])

    if "json" in formats:
        jpath = os.path.join(out_dir, "slots.json")
        payload = [
            {col: getattr(r, col) for col in SLOT_CSV_COLUMNS} for r in records
        ]
        with open(jpath, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
        written.append(jpath)

    manifest = {
        "seed": seed,
        "n_records": len(records),
        "schemes": sorted({r.scheme for r in records}),
        "versions": _versions(),
    }
    if scenario is not None:
        manifest["scenario"] = scenario.to_dict()
    mpath = os.path.join(out_dir, "manifest.json")
    with open(mpath, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(mpath)

    # ---- per-figure aggregates derivable from slot records ----
    by_scheme: dict[str, list[SlotRecord]] = {}
    for r in records:
        by_scheme.setdefault(r.scheme, []).append(r)

    conv_rows = []
    for scheme, recs in sorted(by_scheme.items()):
        for r in recs:
            if r.solution is None:
                continue
            for it, val in enumerate(r.solution.trace):
                conv_rows.append([scheme, str(r.slot), str(it), repr(float(val))])
    emit(
        os.path.join(out_dir, "convergence_trace.csv"),
        ["scheme", "slot", "iteration", "sum_rate_bps_hz"],
        conv_rows,
    )

    kl_rows = []
    for scheme, recs in sorted(by_scheme.items()):
        values = np.sort([r.kl_nominal for r in recs])
        for i, v in enumerate(values):
            kl_rows.append([scheme, repr(float(v)), repr((i + 1) / len(values))])
    emit(
        os.path.join(out_dir, "kl_cdf.csv"),
        ["scheme", "kl_nominal", "cdf"],
        kl_rows,
    )

    det_rows = []
    for scheme, recs in sorted(by_scheme.items()):
        fa = np.sort([r.p_fa for r in recs])
        md = np.sort([r.p_md for r in recs])
        for i in range(len(fa)):
            det_rows.append(
                [
                    scheme,
                    repr(float(fa[i])),
                    repr(float(md[i])),
                    repr((i + 1) / len(fa)),
                ]
            )
    emit(
        os.path.join(out_dir, "detector_cdf.csv"),
        ["scheme", "p_fa", "p_md", "cdf"],
        det_rows,
    )

    emit(
        os.path.join(out_dir, "rate_vs_slot.csv"),
        ["scheme", "slot", "sum_rate_bps_hz"],
        [
            [s, str(r.slot), repr(r.sum_rate_bps_hz)]
            for s, recs in sorted(by_scheme.items())
            for r in recs
        ],
    )
    emit(
        os.path.join(out_dir, "mse_vs_slot.csv"),
        ["scheme", "slot", "trace_c_prior", "trace_c_post"],
        [
            [s, str(r.slot), repr(r.trace_c_prior), repr(r.trace_c_post)]
            for s, recs in sorted(by_scheme.items())
            for r in recs
        ],
    )
    emit(
        os.path.join(out_dir, "power_split.csv"),
        ["scheme", "slot", "p_comm_w", "p_sense_w"],
        [
            [s, str(r.slot), repr(r.p_comm_w), repr(r.p_sense_w)]
            for s, recs in sorted(by_scheme.items())
            for r in recs
        ],
    )

    if sweep_tables:
        for name, rows in sweep_tables.items():
            if not rows:
                continue
            header = sorted(rows[0].keys())
            emit(
                os.path.join(out_dir, f"{name}.csv"),
                header,
                [
                    [
                        repr(row[h]) if isinstance(row[h], float) else str(row[h])
                        for h in header
                    ]
                    for row in rows
                ],
            )
    return written


def _versions() -> dict[str, str]:
    import clarabel
    import scipy

    return {
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "clarabel": getattr(clarabel, "__version__", "unknown"),
    }
