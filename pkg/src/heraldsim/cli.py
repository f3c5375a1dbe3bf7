"""Command-line front end: ``heraldsim <subcommand> --config FILE [--seed N] [--out DIR] [--pulses N]``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .builders import (
    dispersion_model, pump_envelope, reference_jsa, reference_weights, source_model,
    switch_network, truncated_weights,
)
from .config import RunConfig, env_overrides, load_config
from .dispersion import bandwidth_nm_to_omega, omega_to_wavelength, wavelength_to_omega
from .errors import ConfigError, DegenerateInputError, DomainError, EstimatorError, GridMismatchError
from .estimators import CountSummary, car_multiplexed, car_single, g2_heralded, g2_marginal
from .io import config_hash, file_hash, provenance, read_csv, read_jsi, write_csv, write_json, write_jsi
from .jsa import FrequencyGrid, build_jsa, default_grid, operating_point, phasematching_contour
from .multiplex import SwitchNetwork, enhancement_factor, exact_mux_distribution, run_multiplexed, run_single_source
from .schmidt import cooperativity, schmidt_decompose, schmidt_report
from .statistics import SourceModel
from .tomography import grid_aligned_seeds, reconstruct_jsi, reconstruction_error

STREAMS_PER_POINT = 256


class ArtifactError(RuntimeError):
    pass


def _nm(omega) -> float:
    return float(omega_to_wavelength(omega)) * 1e9


def _check_csv(path: Path, rows: int | None = None) -> Path:
    _, header, body = read_csv(path)
    if not header or (rows is not None and len(body) != rows):
        raise ArtifactError(f"{path}: expected {rows} data rows, found {len(body)}")
    return path


def _estimate_cells(fn, c):
    try:
        e = fn(c)
        return [e.value, e.error]
    except EstimatorError:
        return [None, None]


# ---------------------------------------------------------------------------
# subcommands


def cmd_jsa(cfg: RunConfig, args) -> list[Path]:
    out, prov = cfg.output_dir, _prov(cfg)
    jsa = reference_jsa(cfg)
    written = list(write_jsi(out / "jsi.csv", jsa, prov, {"pump": cfg["pump"], "fibre": cfg["fibre"]}))
    _check_csv(written[0], jsa.grid.signal_points)

    model = dispersion_model(cfg)
    scan = cfg["pump"].get("contour_scan_nm", {"start": 880.0, "stop": 1180.0, "points": 301})
    lams = np.linspace(scan["start"], scan["stop"], scan["points"]) * 1e-9
    pieces = phasematching_contour(model, wavelength_to_omega(lams))
    rows = []
    for n, piece in enumerate(pieces):
        for p, s, i in zip(piece.pump, piece.signal, piece.idler):
            rows.append([n, int(piece.closed), float(p), float(s), float(i), _nm(p), _nm(s), _nm(i)])
    header = ["loop", "closed", "pump_rad_s", "signal_rad_s", "idler_rad_s", "pump_nm", "signal_nm", "idler_nm"]
    written.append(_check_csv(write_csv(out / "contour.csv", header, rows, prov), len(rows)))
    return written


def cmd_schmidt(cfg: RunConfig | None, args) -> list[Path]:
    src = Path(args.jsi_file)
    if not src.exists():
        raise ConfigError(f"no such JSI file: {src}")
    jsa = read_jsi(src)
    report = schmidt_report(jsa)
    report["input"] = src.name
    report["amplitude_from_intensity_only"] = True
    out = Path(args.out) if getattr(args, "out", None) else (cfg.output_dir if cfg else src.parent)
    seed = cfg.seed if cfg else None
    prov = provenance(file_hash(src), seed)
    return [write_json(out / f"{src.stem}.schmidt.json", report, prov)]


def cmd_sweep_g2m(cfg: RunConfig, args) -> list[Path]:
    out, prov = cfg.output_dir, _prov(cfg)
    sw = cfg["pump"].get("bandwidth_sweep_nm") or {"start": 2.0, "stop": 40.0, "points": 20}
    bws = np.linspace(sw["start"], sw["stop"], sw["points"])
    mc = cfg["sweep_g2m"]["monte_carlo"]
    mu = cfg["sweep_g2m"]["mean_pairs"]
    s_cfg = cfg["schmidt"]
    rows = []
    for n, bw in enumerate(bws):
        d = schmidt_decompose(reference_jsa(cfg, float(bw)))
        k = cooperativity(d, s_cfg["weight_cutoff"])
        row = [float(bw), bandwidth_nm_to_omega(float(bw), cfg["pump"]["wavelength_nm"]), k, 1.0 / k, 1.0 + 1.0 / k]
        if mc:
            w = truncated_weights(d.weights, s_cfg["weight_cutoff"], s_cfg["max_modes"])
            src = SourceModel(w, mu, rep_rate=cfg["source"]["rep_rate_hz"])
            rec = run_single_source(src, SwitchNetwork(1, 0.0, 0.0, 0.0), cfg.pulses, cfg.seed, stream=n)
            row += _estimate_cells(g2_marginal, CountSummary.from_record(rec, src.rep_rate))
        else:
            row += [None, None]
        rows.append(row)
    purities = [r[3] for r in rows]
    best = int(np.argmax(purities))
    for n, r in enumerate(rows):
        r.append(int(n == best))
    header = ["pump_rms_bandwidth_nm", "pump_rms_bandwidth_rad_s", "K", "purity", "g2m_predicted",
              "g2m_monte_carlo", "g2m_monte_carlo_err", "is_maximum"]
    return [_check_csv(write_csv(out / "sweep_g2m.csv", header, rows, prov), len(rows))]


def _mux_records(cfg, src, net, n, exact):
    if exact:
        pulses = cfg.pulses
        single = exact_mux_distribution([src], net.single_path(), cfg["multiplex"]["cutoff"], pulses)
        mux = exact_mux_distribution([src] * net.n_sources, net, cfg["multiplex"]["cutoff"], pulses)
        return single, mux
    base = n * STREAMS_PER_POINT
    single = run_single_source(src, net, cfg.pulses, cfg.seed, stream=base)
    mux = run_multiplexed([src] * net.n_sources, net, cfg.pulses, cfg.seed,
                          streams=[base + k for k in range(net.n_sources)])
    return single, mux


def cmd_multiplex(cfg: RunConfig, args) -> list[Path]:
    out, prov = cfg.output_dir, _prov(cfg)
    net = switch_network(cfg)
    if net.n_sources < 2:
        raise ConfigError("multiplex needs at least two sources (network.sources)")
    weights = reference_weights(cfg) if cfg["source"]["weights"] == "reference" else cfg["source"]["weights"]
    exact = cfg["multiplex"]["method"] == "exact"
    rows, records = [], []
    for n, mu in enumerate(cfg["multiplex"]["mean_pairs_sweep"]):
        src = source_model(cfg, weights, mean_pairs=mu)
        single, mux = _mux_records(cfg, src, net, n, exact)
        try:
            enh = enhancement_factor(mux, single)
        except EstimatorError:
            enh = None
        for label, rec in (("single", single), ("multiplexed", mux)):
            c = CountSummary.from_record(rec, src.rep_rate)
            car = car_multiplexed if rec.n_sources >= 2 else car_single
            rows.append([label, mu, rec.n_sources, c.rate("H"), c.rate("HI")]
                        + _estimate_cells(car, c) + _estimate_cells(g2_heralded, c)
                        + _estimate_cells(g2_marginal, c) + [enh if label == "multiplexed" else None])
            records.append({"configuration": label, "mean_pairs": mu, "record": rec.to_dict(),
                            "summary": c.to_dict()})
    header = ["configuration", "mean_pairs", "sources", "herald_rate_per_s", "coincidence_rate_per_s",
              "car", "car_err", "g2h", "g2h_err", "g2m", "g2m_err", "enhancement"]
    csv_path = _check_csv(write_csv(out / "multiplex.csv", header, rows, prov), len(rows))
    meta = {"method": cfg["multiplex"]["method"], "pulses": cfg.pulses, "network": cfg["network"], "runs": records}
    return [csv_path, write_json(out / "multiplex.json", meta, prov)]


def _common_grid(model, pumps, points, signal_factor, idler_factor) -> FrequencyGrid:
    """One grid covering the operating points of all pump settings."""
    grids = [default_grid(model, p, points, signal_factor, idler_factor) for p in pumps]
    lo_s = min(g.signal_axis[0] for g in grids)
    hi_s = max(g.signal_axis[-1] for g in grids)
    lo_i = min(g.idler_axis[0] for g in grids)
    hi_i = max(g.idler_axis[-1] for g in grids)
    wlo, whi = model.window
    lo_s, hi_s = max(lo_s, wlo), min(hi_s, whi)
    lo_i, hi_i = max(lo_i, wlo), min(hi_i, whi)
    return FrequencyGrid(0.5 * (lo_s + hi_s), hi_s - lo_s, points, 0.5 * (lo_i + hi_i), hi_i - lo_i, points)


def cmd_tomography(cfg: RunConfig, args) -> list[Path]:
    out, prov = cfg.output_dir, _prov(cfg)
    t = cfg["tomography"]
    lam = cfg["pump"]["wavelength_nm"]
    osa = bandwidth_nm_to_omega(t["osa_resolution_nm"], lam) if t["osa_resolution_nm"] > 0 else 0.0
    jsa = reference_jsa(cfg)
    k_true = cooperativity(schmidt_decompose(jsa.magnitude()))
    written, metrics = [], {"K_true_magnitude": k_true, "strides": [], "pump_settings": []}
    for stride in t["strides"]:
        rec = reconstruct_jsi(jsa, grid_aligned_seeds(jsa, stride), osa)
        rj = rec.as_jsa()
        k_rec = cooperativity(schmidt_decompose(rj))
        metrics["strides"].append({
            "stride": stride, "seed_count": int(rec.seeds.size), "l2_error": reconstruction_error(jsa, rec),
            "K_reconstructed": k_rec, "K_relative_difference": k_rec / k_true - 1.0,
        })
        p = write_jsi(out / f"tomography_stride{stride}.csv", rj, prov, {"sweep": rec.metadata()})
        written += [_check_csv(p[0], rj.grid.signal_points), p[1]]

    if t["pump_wavelengths_nm"]:
        model = dispersion_model(cfg)
        pumps = [pump_envelope(cfg, wavelength_nm=w) for w in t["pump_wavelengths_nm"]]
        g = cfg["grid"]
        grid = _common_grid(model, pumps, g["points"], g["signal_factor"], g["idler_factor"])
        for w, p in zip(t["pump_wavelengths_nm"], pumps):
            pj = build_jsa(model, p, grid)
            rec = reconstruct_jsi(pj, grid.idler_axis, osa)
            ps, pi = rec.peak()
            ws0, wi0 = operating_point(model, p.center)
            metrics["pump_settings"].append({
                "pump_wavelength_nm": w, "peak_signal_nm": _nm(ps), "peak_idler_nm": _nm(pi),
                "phasematched_signal_nm": _nm(ws0), "phasematched_idler_nm": _nm(wi0),
            })
            f = write_jsi(out / f"tomography_pump{w:g}nm.csv", rec.as_jsa(), prov, {"sweep": rec.metadata()})
            written += [_check_csv(f[0], grid.signal_points), f[1]]
    written.append(write_json(out / "tomography.json", metrics, prov))
    return written


COMMANDS = {
    "jsa": cmd_jsa,
    "schmidt": cmd_schmidt,
    "sweep-g2m": cmd_sweep_g2m,
    "multiplex": cmd_multiplex,
    "tomography": cmd_tomography,
}


def _prov(cfg: RunConfig) -> dict:
    # the output location does not change results, so it stays out of the hash
    data = {k: v for k, v in cfg.data.items() if k != "output_dir"}
    return provenance(config_hash(data), cfg.seed)


def _add_common(p: argparse.ArgumentParser) -> None:
    s = argparse.SUPPRESS
    p.add_argument("--config", default=s, help="YAML run configuration")
    p.add_argument("--seed", type=int, default=s, help="64-bit RNG seed (overrides the config)")
    p.add_argument("--out", default=s, help="output directory (overrides the config)")
    p.add_argument("--pulses", type=int, default=s, help="pulses per Monte Carlo run")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heraldsim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"heraldsim {__version__}")
    _add_common(parser)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("jsa", help="joint spectral intensity and phasematching contour")
    _add_common(p)
    p.add_argument("--pump-bandwidth", type=float, default=None, metavar="NM",
                   help="pump RMS bandwidth in nm (overrides the config)")
    p = sub.add_parser("schmidt", help="Schmidt analysis of a JSI CSV file")
    _add_common(p)
    p.add_argument("jsi_file")
    p = sub.add_parser("sweep-g2m", help="predicted (and simulated) g2_m versus pump bandwidth")
    _add_common(p)
    p = sub.add_parser("multiplex", help="single versus multiplexed source over a mean-pair sweep")
    _add_common(p)
    p = sub.add_parser("tomography", help="stimulated emission tomography of the reference JSA")
    _add_common(p)
    return parser


def _resolve_config(args) -> RunConfig | None:
    env = env_overrides()
    path = getattr(args, "config", None) or env.get("config")
    if path is None:
        if args.command == "schmidt":
            return None
        raise ConfigError("no configuration given (use --config or HERALDSIM_CONFIG)")
    cfg = load_config(path)
    over = {
        "seed": getattr(args, "seed", None) if getattr(args, "seed", None) is not None else env.get("seed"),
        "output_dir": getattr(args, "out", None) or env.get("out"),
        "pulses": getattr(args, "pulses", None) if getattr(args, "pulses", None) is not None else env.get("pulses"),
    }
    if getattr(args, "pump_bandwidth", None) is not None:
        over["pump.rms_bandwidth_nm"] = args.pump_bandwidth
    return cfg.with_overrides(**over)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        written = COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"heraldsim: configuration error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, DegenerateInputError, GridMismatchError, EstimatorError, ArtifactError, ValueError) as exc:
        print(f"heraldsim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for p in written:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
