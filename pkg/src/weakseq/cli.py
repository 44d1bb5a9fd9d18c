"""Command-line front end: ``simulate``, ``analyze``, ``oracle-check`` and ``plotdata``.

Exit codes: 0 success, 1 usage or configuration error, 2 analysis failure
(artifacts that could be produced are still written), 3 oracle tolerance
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from weakseq import __version__
from weakseq.analysis import (
    MomentTable,
    estimate_moments,
    estimate_moments_from_photons,
    fit_moments,
    peak_report,
    spectrum2d,
)
from weakseq.config import ExperimentConfig, from_dict, load_config, preset_path
from weakseq.correlations import enumerate_exact_moments, moment_predict_times
from weakseq.errors import (
    ConfigurationError,
    ContractError,
    FitError,
    NoiseFloorError,
    WeakSeqError,
)
from weakseq.measurement import simulate_ensemble
from weakseq.targets import QuantumSpins

EXIT_OK, EXIT_CONFIG, EXIT_FIT, EXIT_ORACLE = 0, 1, 2, 3
RECORD_HEADER = "shot_index,t_seconds,sigma,photon_count"
MC_SIGMAS = 3.0
PERT_THIRD_TOL = 0.05
PERT_MEAN_TOL = 1e-3
ZERO_FLOOR = 1e-12  # moments below this are round-off of an exact zero


class _Usage(Exception):
    pass


# -- file helpers -------------------------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _provenance(cfg: ExperimentConfig, command: str, **extra) -> dict:
    return {"command": command, "config_hash": cfg.config_hash, "seed": cfg.seed,
            "weakseq_version": __version__, **extra}


def _resolve_config(arg: str | None) -> ExperimentConfig:
    if arg is None:
        raise _Usage("--config is required")
    p = Path(arg)
    if not p.exists() and not p.suffix:
        p = preset_path(arg)
    return load_config(p)


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if args.seed is not None and not (0 <= args.seed < 2**64):
        raise ConfigurationError("--seed must be an unsigned 64-bit integer")
    if args.workers is not None and args.workers < 1:
        raise ConfigurationError("--workers must be positive")
    if args.seed is None and args.workers is None:
        return cfg
    return cfg.with_overrides(seed=args.seed, workers=args.workers)


# -- simulate -------------------------------------------------------------------

def _record_csv(rec) -> str:
    times = rec.times
    counts = rec.photon_counts
    rows = [RECORD_HEADER]
    for i, (t, s) in enumerate(zip(times, rec.outcomes)):
        c = "" if counts is None else str(int(counts[i]))
        rows.append(f"{i},{t:.15e},{int(s)},{c}")
    return "\n".join(rows) + "\n"


def cmd_simulate(cfg: ExperimentConfig, out: Path) -> int:
    rec_dir = out / "records"
    rec_dir.mkdir(parents=True, exist_ok=True)
    recs = simulate_ensemble(cfg.target, cfg.shot, cfg.seed, cfg.n_trajectories,
                             readout=cfg.readout, back_action=cfg.back_action,
                             workers=cfg.workers)
    width = max(6, len(str(cfg.n_trajectories - 1)))
    names = []
    for i, rec in enumerate(recs):
        name = f"traj_{i:0{width}d}.csv"
        _atomic_write(rec_dir / name, _record_csv(rec))
        names.append(name)
    meta = _provenance(cfg, "simulate", config={k: v for k, v in cfg.raw.items() if k != "workers"},
                       n_trajectories=cfg.n_trajectories, n_shots=cfg.shot.n_shots,
                       record_files=len(names), units={"t_seconds": "s"})
    _atomic_write(out / "metadata.json", _dump(meta))
    return EXIT_OK


# -- analyze --------------------------------------------------------------------

def _read_records(rec_dir: Path, photons: bool) -> list[np.ndarray]:
    files = sorted(rec_dir.glob("traj_*.csv"))
    if not files:
        raise ContractError(f"no record files in {rec_dir}")
    col = 3 if photons else 2
    out = []
    for f in files:
        lines = f.read_text().splitlines()
        if not lines or lines[0] != RECORD_HEADER:
            raise ContractError(f"{f.name}: missing or wrong header")
        try:
            out.append(np.array([float(ln.split(",")[col]) for ln in lines[1:]]))
        except (IndexError, ValueError) as exc:
            raise ContractError(f"{f.name}: malformed row ({exc})") from exc
    return out


def _moments_csv(table: MomentTable) -> str:
    rows = ["p,q,value,stderr"]
    fmt = lambda v: "" if v is None or not np.isfinite(v) else f"{v:.10e}"  # noqa: E731
    rows.append(f"0,0,{fmt(table.mean_sigma)},{fmt(table.mean_err)}")
    for p in range(1, table.max_p + 1):
        e = None if table.err2 is None else table.err2[p - 1]
        rows.append(f"{p},0,{fmt(table.s2[p - 1])},{fmt(e)}")
    for p in range(1, table.max_p + 1):
        for q in range(1, table.max_q + 1):
            e = None if table.err3 is None else table.err3[p - 1, q - 1]
            rows.append(f"{p},{q},{fmt(table.s3[p - 1, q - 1])},{fmt(e)}")
    return "\n".join(rows) + "\n"


def _spectrum_csv(grid) -> str:
    rows = ["nu_ij,nu_jk,re,im,mag"]
    v = grid.values
    for i, a in enumerate(grid.nu_ij):
        for j, b in enumerate(grid.nu_jk):
            z = v[i, j]
            rows.append(f"{a:.10e},{b:.10e},{z.real:.10e},{z.imag:.10e},{abs(z):.10e}")
    return "\n".join(rows) + "\n"


def cmd_analyze(cfg: ExperimentConfig, records_dir: Path, out: Path) -> int:
    rec_dir = records_dir / "records" if (records_dir / "records").is_dir() else records_dir
    photons = cfg.readout is not None
    series = _read_records(rec_dir, photons)
    an = cfg.analysis
    kw = dict(t_c=cfg.shot.t_c, block=an.block, n_boot=an.n_boot, seed=cfg.seed)
    if photons:
        table = estimate_moments_from_photons(series, cfg.readout, an.max_p, an.max_q, **kw)
    else:
        table = estimate_moments(series, an.max_p, an.max_q, **kw)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "moments.csv", _moments_csv(table))

    status = EXIT_OK
    fit_doc, gamma = None, 0.0
    try:
        fit = fit_moments(table, cfg.shot.theta, nu0_hint=cfg.target.nu0)
        gamma = fit.gamma_fit
        fit_doc = json.loads(fit.to_json())
        fit_doc.update(status="ok", nu0_fit_hz=fit.nu0_fit / (2 * np.pi))
    except FitError as exc:
        status = EXIT_FIT
        fit_doc = {"status": "failed", "error": str(exc), "diagnostics": exc.diagnostics}
    _atomic_write(out / "fit.json", _dump(fit_doc))

    grid = spectrum2d(table, an.zero_pad_factor)
    _atomic_write(out / "spectrum.csv", _spectrum_csv(grid))
    try:
        rep = peak_report(grid, cfg.target.nu0, gamma=gamma)
        peaks = json.loads(rep.to_json())
        peaks["status"] = "ok"
    except NoiseFloorError as exc:
        status = EXIT_FIT
        peaks = {"status": "failed", "error": str(exc)}
    _atomic_write(out / "peaks.json", _dump(peaks))
    prov = _provenance(cfg, "analyze", records=str(rec_dir), n_records=len(series),
                       path="photon_counts" if photons else "outcomes",
                       spectrum_units="rad/s", outputs=["moments.csv", "fit.json",
                                                        "spectrum.csv", "peaks.json"])
    _atomic_write(out / "provenance.json", _dump(prov))
    return status


# -- oracle-check -------------------------------------------------------------------

def _row(kind, idx, exact, mc=None, se=None, pert=None):
    row = {"moment": kind, "shots": list(idx), "exact": float(exact)}
    if mc is not None:
        diff = float(mc - exact)
        row.update(monte_carlo=float(mc), stderr=float(se), deviation=diff)
        row["mc_pass"] = bool(abs(diff) <= MC_SIGMAS * se) if se > 0 else bool(abs(diff) <= 1e-12)
    if pert is not None:
        if max(abs(exact), abs(pert)) < ZERO_FLOOR:
            rel = 0.0
        else:
            rel = abs(pert - exact) / abs(exact) if exact else float("inf")
        row.update(perturbative=float(pert), relative_deviation=rel)
    return row


def oracle_report(cfg: ExperimentConfig) -> dict:
    """Exact enumeration against Monte Carlo and against the perturbative moments."""
    model, shot = cfg.target, cfg.shot
    if not isinstance(model, QuantumSpins):
        raise ConfigurationError("oracle-check needs a quantum_spins target")
    if shot.n_shots > 4 or model.n_spins > 2:
        raise ConfigurationError("oracle-check is limited to n_shots <= 4 and n_spins <= 2")
    if not cfg.back_action:
        raise ConfigurationError("oracle-check compares the full back-action model only")
    ex = enumerate_exact_moments(model, shot)
    recs = simulate_ensemble(model, shot, cfg.seed, cfg.n_trajectories, workers=cfg.workers)
    x = np.stack([r.outcomes for r in recs]).astype(float)
    n_traj = len(x)
    d = x - x.mean(axis=0)
    t = shot.times
    se = lambda v: float(np.std(v, ddof=1) / np.sqrt(n_traj)) if n_traj > 1 else float("inf")  # noqa: E731
    rows = []
    n = shot.n_shots
    for i in range(n):
        rows.append(_row("first", (i,), ex.mean[i], x[:, i].mean(), se(x[:, i]),
                         moment_predict_times(model, shot, [t[i]]).value))
    for i in range(n):
        for j in range(i + 1, n):
            v = d[:, i] * d[:, j]
            rows.append(_row("second", (i, j), ex.second[i, j], v.mean(), se(v),
                             moment_predict_times(model, shot, [t[i], t[j]]).value))
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                v = d[:, i] * d[:, j] * d[:, k]
                rows.append(_row("third", (i, j, k), ex.third[i, j, k], v.mean(), se(v),
                                 moment_predict_times(model, shot, [t[i], t[j], t[k]]).value))
    for r in rows:
        tol = {"first": PERT_MEAN_TOL, "third": PERT_THIRD_TOL}.get(r["moment"])
        if tol is not None:
            r["perturbative_tolerance"] = tol
            r["perturbative_pass"] = bool(r["relative_deviation"] <= tol)
    passed = all(r["mc_pass"] for r in rows) and all(
        r.get("perturbative_pass", True) for r in rows)
    return {"pass": passed, "n_trajectories": n_traj, "mc_sigmas": MC_SIGMAS, "rows": rows}


def cmd_oracle_check(cfg: ExperimentConfig, out: Path) -> int:
    report = oracle_report(cfg)
    report["provenance"] = _provenance(cfg, "oracle-check")
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "report.json", _dump(report))
    return EXIT_OK if report["pass"] else EXIT_ORACLE


# -- plotdata ---------------------------------------------------------------------

def _read_spectrum(path: Path):
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ContractError(f"cannot read {path}: {exc}") from exc
    if not lines or lines[0].strip() != "nu_ij,nu_jk,re,im,mag":
        raise ContractError(f"{path.name}: missing spectrum header")
    rows = []
    for n, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 5:
            raise ContractError(f"{path.name}: line {n}: expected 5 columns")
        try:
            rows.append([float(v) for v in parts])
        except ValueError as exc:
            raise ContractError(f"{path.name}: line {n}: {exc}") from exc
    if not rows:
        raise ContractError(f"{path.name}: no spectrum rows")
    arr = np.array(rows)
    a, ia = np.unique(arr[:, 0], return_inverse=True)
    b, ib = np.unique(arr[:, 1], return_inverse=True)
    if len(arr) != len(a) * len(b):
        raise ContractError(f"{path.name}: rows do not form a complete rectangular grid")
    mag = np.full((len(a), len(b)), np.nan)
    mag[ia, ib] = arr[:, 4]
    if np.isnan(mag).any():
        raise ContractError(f"{path.name}: duplicate or missing grid points")
    return a, b, mag


def plot_tables(a, b, mag) -> dict:
    """Tab-separated grid plus diagonal and anti-diagonal slices."""
    grid = ["nu_ij\\nu_jk\t" + "\t".join(f"{v:.10e}" for v in b)]
    for i, v in enumerate(a):
        grid.append(f"{v:.10e}\t" + "\t".join(f"{m:.10e}" for m in mag[i]))
    diag, anti = ["nu_ij\tnu_jk\tmag"], ["nu_ij\tnu_jk\tmag"]
    for i, v in enumerate(a):
        j = int(np.argmin(np.abs(b - v)))
        k = int(np.argmin(np.abs(b + v)))
        diag.append(f"{v:.10e}\t{b[j]:.10e}\t{mag[i, j]:.10e}")
        anti.append(f"{v:.10e}\t{b[k]:.10e}\t{mag[i, k]:.10e}")
    return {"grid.tsv": "\n".join(grid) + "\n",
            "diagonal.tsv": "\n".join(diag) + "\n",
            "antidiagonal.tsv": "\n".join(anti) + "\n"}


def cmd_plotdata(spectrum: Path, out: Path) -> int:
    tables = plot_tables(*_read_spectrum(spectrum))
    out.mkdir(parents=True, exist_ok=True)
    for name, text in tables.items():
        _atomic_write(out / name, text)
    return EXIT_OK


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="weakseq", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="JSON config path or preset name (gaussian, ac, spin1, spinN)")
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--workers", type=int, default=None, help="worker processes")

    common(sub.add_parser("simulate", help="simulate trajectories and write records"))
    p = sub.add_parser("analyze", help="moments, spectrum, peaks and fit from records")
    p.add_argument("records", type=Path, help="directory written by simulate")
    common(p, config_required=False)
    common(sub.add_parser("oracle-check", help="exact enumeration vs Monte Carlo and theory"))
    p = sub.add_parser("plotdata", help="gridded text files from spectrum.csv")
    p.add_argument("spectrum", type=Path)
    common(p, config_required=False)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.command == "plotdata":
            return cmd_plotdata(args.spectrum, args.out)
        if args.command == "analyze" and args.config is None:
            meta_path = args.records / "metadata.json"
            if not meta_path.exists():
                raise _Usage("analyze needs --config or a metadata.json next to the records")
            cfg = from_dict(json.loads(meta_path.read_text())["config"])
        else:
            cfg = _resolve_config(args.config)
        cfg = _apply_overrides(cfg, args)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out)
        if args.command == "analyze":
            return cmd_analyze(cfg, args.records, args.out)
        return cmd_oracle_check(cfg, args.out)
    except (_Usage, ConfigurationError) as exc:
        print(f"weakseq: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ContractError, FitError, NoiseFloorError) as exc:
        print(f"weakseq: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG if args.command == "plotdata" else EXIT_FIT
    except (WeakSeqError, OSError) as exc:
        print(f"weakseq: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
