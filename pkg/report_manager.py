"""
This module writes the files a scenario run produces: CSV traces and spectra,
static SVG plots and the JSON summary.
"""

import csv
import json
import os

import matplotlib
from matplotlib.figure import Figure
import numpy as np

from errors import InvalidParameter

matplotlib.rcParams["svg.hashsalt"] = "ngdSim"


def _format(value):
    return f"{float(value):.12e}"


class ReportManager:
    """Writes run outputs below out_dir and remembers every path it wrote."""

    def __init__(self, out_dir, output_manager):
        self.out_dir = out_dir
        self.output_manager = output_manager
        self.written = []

    def _path(self, relative):
        path = os.path.join(self.out_dir, relative)
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        self.written.append(path)
        self.output_manager.debug(f"Writing {path}")
        return path

    def _write_rows(self, relative, header, rows):
        with open(self._path(relative), "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)

    def write_signals_csv(self, relative, signals):
        """
        Time-series CSV: a time_s column, then one column per named signal.

        Args:
            relative (str): File name below out_dir.
            signals (dict): Signal name -> SampledSignal; all must share sampling.
        """
        first = next(iter(signals.values()))
        for name, signal in signals.items():
            if len(signal) != len(first) or signal.dt != first.dt or signal.t0 != first.t0:
                raise InvalidParameter("signals", name, "must share t0, dt and length")
        columns = [first.times] + [signal.samples for signal in signals.values()]
        rows = ([_format(v) for v in row] for row in zip(*columns))
        self._write_rows(relative, ["time_s"] + list(signals), rows)

    def write_spectrum_csv(self, relative, spectrum):
        columns = (
            spectrum.grid.omega,
            spectrum.magnitude,
            spectrum.phase_unwrapped,
            spectrum.group_delay,
        )
        rows = ([_format(v) for v in row] for row in zip(*columns))
        self._write_rows(relative, ["omega_rad_s", "magnitude", "phase_rad", "group_delay_s"], rows)

    def write_sweep_csv(self, relative, parameter_path, rows):
        """One row per swept value; metric columns are the union over all rows, sorted."""
        metrics = sorted({key for row in rows for key in row["metrics"]})
        table = []
        for row in rows:
            cells = [_format(row["value"])]
            for key in metrics:
                value = row["metrics"].get(key)
                cells.append("" if value is None else _format(value))
            table.append(cells)
        self._write_rows(relative, [parameter_path] + metrics, table)

    def write_trace_svg(self, relative, signals, title):
        """Overlay of the named signals against time in milliseconds."""
        figure = Figure(figsize=(8, 4.5))
        axes = figure.add_subplot(1, 1, 1)
        for name, signal in signals.items():
            axes.plot(signal.times * 1e3, signal.samples, label=name, linewidth=1.2)
        axes.set_xlabel("time (ms)")
        axes.set_ylabel("voltage (V)")
        axes.set_title(title)
        axes.grid(True, alpha=0.3)
        axes.legend()
        self._save(figure, relative)

    def write_bode_svg(self, relative, spectrum, title, reconstructed=None):
        """Magnitude and phase pair; reconstructed overlays a minimum-phase estimate."""
        figure = Figure(figsize=(8, 6))
        magnitude_axes, phase_axes = figure.subplots(2, 1, sharex=True)
        omega = spectrum.grid.omega
        magnitude_db = 20 * np.log10(np.maximum(spectrum.magnitude, np.finfo(float).tiny))
        magnitude_axes.plot(omega, magnitude_db, linewidth=1.2)
        magnitude_axes.set_ylabel("|T| (dB)")
        magnitude_axes.set_title(title)
        phase_axes.plot(omega, spectrum.phase_unwrapped, label="measured", linewidth=1.2)
        if reconstructed is not None:
            phase_axes.plot(omega, reconstructed, "--", label="minimum phase", linewidth=1.2)
            phase_axes.legend()
        phase_axes.set_ylabel("phase (rad)")
        phase_axes.set_xlabel("omega (rad/s)")
        if spectrum.grid.spacing == "logarithmic":
            magnitude_axes.set_xscale("log")
        for axes in (magnitude_axes, phase_axes):
            axes.grid(True, alpha=0.3)
        self._save(figure, relative)

    def _save(self, figure, relative):
        figure.tight_layout()
        figure.savefig(self._path(relative), format="svg", metadata={"Date": None})

    def write_summary(self, relative, summary):
        with open(self._path(relative), "w", encoding="utf-8") as f:
            json.dump(summary, f, indent=2, sort_keys=True)
            f.write("\n")
