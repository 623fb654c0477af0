"""CSV artifacts for experiment reports.

Files written to the output directory:

``report.csv``          one row per n with the aggregate statistics of each method
``errors_<n>.csv``      per-simulation relative errors, iterations and stop causes
``boxplot_<n>.csv``     quartiles, whiskers and outliers per method
``solution_<n>.csv``    mean reconstruction next to the exact solution and one
                        noisy sample (1-D); for 2-D fields the mean
                        reconstruction as a row-major matrix, with
                        ``exact_solution.csv`` and ``noisy_sample_<n>.csv``
                        alongside

Numbers use ``.`` as decimal separator and ``%.4e`` scientific notation, so
output bytes depend only on the results.
"""

import csv
import os

import numpy as np

from .operators import Grid1D

__all__ = ["fmt", "write_report", "write_field", "format_table", "write_residuals"]


def fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if np.isnan(v):
        return "nan"
    return "%.4e" % v


def _writer(path):
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def write_field(path, field, header):
    """Row-major 2-D field with a leading ``# ...`` comment line."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {header}\n")
        for row in np.atleast_2d(field):
            fh.write(",".join(fmt(float(v)) for v in row) + "\n")


def write_report(report, outdir):
    """Write every report file into ``outdir`` (created if missing); returns the paths."""
    os.makedirs(outdir, exist_ok=True)
    spec = report.spec
    paths = []

    path = os.path.join(outdir, "report.csv")
    fh, w = _writer(path)
    with fh:
        cols = ["mean_iterations", "rms_error", "emergency_stops", "failures"]
        w.writerow(["n", "n_sims"] + [f"{m}:{c}" for m in report.methods for c in cols])
        for n in spec.n_list:
            row = [n, spec.n_sims]
            for method in report.methods:
                s = report.summary(n, method)
                row += ["%.1f" % s.mean_iterations, fmt(s.rms_error), s.emergency_stops, s.failures]
            w.writerow(row)
    paths.append(path)

    for n in spec.n_list:
        path = os.path.join(outdir, f"errors_{n}.csv")
        fh, w = _writer(path)
        with fh:
            w.writerow(["sim", "method", "error", "iterations", "stop_cause"])
            for method in report.methods:
                s = report.summary(n, method)
                for sim, (e, it, cause) in enumerate(zip(s.errors, s.iterations, s.stop_causes)):
                    w.writerow([sim, method, fmt(float(e)), int(it), cause])
        paths.append(path)

        path = os.path.join(outdir, f"boxplot_{n}.csv")
        fh, w = _writer(path)
        with fh:
            w.writerow(["method", "min", "q1", "median", "q3", "max",
                        "whisker_low", "whisker_high", "n_outliers", "outliers"])
            for method in report.methods:
                b = report.summary(n, method).box
                if b is None:
                    continue
                w.writerow([method, fmt(b.min), fmt(b.q1), fmt(b.median), fmt(b.q3), fmt(b.max),
                            fmt(b.whisker_low), fmt(b.whisker_high), len(b.outliers),
                            ";".join(fmt(o) for o in b.outliers)])
        paths.append(path)

        path = os.path.join(outdir, f"solution_{n}.csv")
        if report.shape is None:
            nodes = Grid1D(spec.m).nodes
            fh, w = _writer(path)
            with fh:
                w.writerow(["s", "x_true"] + [f"mean_{m}" for m in report.methods] + ["noisy_sample"])
                means = [report.summary(n, m).mean_x for m in report.methods]
                for i, s in enumerate(nodes):
                    row = [fmt(float(s)), fmt(float(report.x_true[i]))]
                    row += [fmt(float(mx[i])) if mx is not None else "nan" for mx in means]
                    row.append(fmt(float(report.noisy_samples[n][i])))
                    w.writerow(row)
            paths.append(path)
        else:
            header = f"N={spec.N},alpha={spec.alpha:g},T={spec.T:g}"
            mean_x = report.summary(n).mean_x
            if mean_x is not None:
                write_field(path, mean_x.reshape(report.shape), header)
                paths.append(path)
            sample = os.path.join(outdir, f"noisy_sample_{n}.csv")
            write_field(sample, report.noisy_samples[n].reshape(report.shape), header)
            paths.append(sample)

    if report.shape is not None:
        path = os.path.join(outdir, "exact_solution.csv")
        write_field(path, report.x_true.reshape(report.shape),
                    f"N={spec.N},alpha={spec.alpha:g},T={spec.T:g}")
        paths.append(path)
    return paths


def write_residuals(path, residuals, threshold):
    """Residual history with columns ``t, residual, threshold``."""
    fh, w = _writer(path)
    with fh:
        w.writerow(["t", "residual", "threshold"])
        for t, r in enumerate(residuals):
            w.writerow([t, fmt(r), fmt(threshold)])


def format_table(report):
    """Plain-text per-n aggregate table."""
    lines = [f"{'n':>8}  {'method':<14}{'iterations':>12}  {'rel. error':>11}  {'emergency':>9}  {'failed':>6}"]
    for n in report.spec.n_list:
        for method in report.methods:
            s = report.summary(n, method)
            lines.append(f"{n:>8}  {method:<14}{s.mean_iterations:>12.1f}  {fmt(s.rms_error):>11}  "
                         f"{s.emergency_stops:>9}  {s.failures:>6}")
    return "\n".join(lines)
