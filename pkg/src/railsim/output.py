"""CSV persistence and gnuplot script emission.

Numbers are written with ``repr``, which round-trips float64 exactly, so a
rewritten file is byte-identical for identical trajectories and reparsing
recovers the in-memory values bit for bit.  Lines are LF-terminated and the
decimal separator is '.'.
"""

from __future__ import annotations

import os

from .integrate import TimeSeries

CSV_HEADER = "t,z1,z1dot,z2,z2dot,zk,zkdot,phi,phidot,eta1,eta2,eta3,eta4"

SWEEP_HEADER = ("speed_kmh,speed_ms,omega,par_seq_max_diff,"
                "amp_z1,amp_z1dot,amp_z2,amp_z2dot,amp_zk,amp_zkdot,"
                "amp_phi,amp_phidot,oracle_rel_err,status")

KMH_PER_MS = 3.6

# trace colours: wagon body red, bogie 1 blue, bogie 2 green
_BODY_TRACES = (("carcass", "red", 6), ("bogie 1", "blue", 2), ("bogie 2", "green", 4))


def format_value(v) -> str:
    return repr(float(v))


def write_timeseries_csv(series: TimeSeries, path) -> None:
    """Write time, states and the four wheel displacements."""
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for i in range(len(series)):
            row = [series.times[i], *series.states[i], *series.forcings[i, :4]]
            fh.write(",".join(format_value(v) for v in row) + "\n")


def write_sweep_csv(rows: list[dict], path) -> None:
    """One summary row per sweep speed."""
    columns = SWEEP_HEADER.split(",")
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(SWEEP_HEADER + "\n")
        for row in rows:
            cells = []
            for col in columns:
                v = row.get(col, "")
                cells.append(v if isinstance(v, str) else format_value(v))
            fh.write(",".join(cells) + "\n")


def emit_plot(series: TimeSeries, csv_path, script_path, kind: str) -> str:
    """Write a self-contained gnuplot script plotting the CSV.

    ``timeseries`` draws the three body displacements against time;
    ``phase`` draws displacement-versus-velocity loops, one panel per body.
    """
    if len(series) == 0:
        raise ValueError("cannot plot an empty series")
    if kind not in ("timeseries", "phase"):
        raise ValueError(f"unknown plot kind {kind!r}")

    csv_name = os.path.basename(str(csv_path))
    png_name = os.path.splitext(os.path.basename(str(script_path)))[0] + ".png"
    lines = [
        "# gnuplot script; run with: gnuplot <this file>",
        "set datafile separator ','",
        "set terminal pngcairo size 1280,720",
        f"set output '{png_name}'",
        "set grid",
    ]
    if kind == "timeseries":
        lines += [
            "set xlabel 'time [s]'",
            "set ylabel 'displacement [m]'",
        ]
        plots = []
        for label, colour, col in _BODY_TRACES:
            plots.append(f"'{csv_name}' skip 1 using 1:{col} with lines "
                         f"lc rgb '{colour}' title '{label}'")
        lines.append("plot " + ", \\\n     ".join(plots))
    else:
        lines += [
            "set xlabel 'displacement [m]'",
            "set ylabel 'velocity [m/s]'",
            "set multiplot layout 1,3",
        ]
        for label, colour, col in _BODY_TRACES:
            lines.append(f"set title '{label} phase diagram'")
            lines.append(f"plot '{csv_name}' skip 1 using {col}:{col + 1} "
                         f"with lines lc rgb '{colour}' title '{label}'")
        lines.append("unset multiplot")

    with open(script_path, "w", encoding="ascii", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    return str(script_path)
