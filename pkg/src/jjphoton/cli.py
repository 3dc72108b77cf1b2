"""Command-line experiment runner.

    jjphoton <command> [--config cfg.json] [--seed N] [--out DIR] [--threads K]

Commands: iv, sweep-bias, sweep-temp, distribution, fit-rate, pat, demo-paper.
Outputs are staged in a hidden directory inside ``--out`` and moved into
place only when the command succeeds, followed by ``manifest.json``.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
from pathlib import Path
import shutil
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .constants import e as E_CHARGE
from .detector import calibrate_bias, simulate_event_level, sweep_bias
from .errors import ConfigError, NumericalError, ParameterError
from .events import format_float
from .pat import DarkIvModel, default_probe_voltage, extract_step_current, first_step_onset, \
    photon_voltage, synthetic_pat_experiment, tien_gordon_iv
from .ratefit import RateData, contribution_crossover, fit, model_rate
from .seeding import derive_rng, derive_seed
from .source import CavityMode, SourceConfig
from .stats import fano_factor, fit_exponential, interval_stats, ks_exponential, waiting_time_histogram

log = logging.getLogger("jjphoton")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format_float(x)


def _json_clean(obj):
    """Replace non-finite floats by strings so output is strict JSON."""
    if isinstance(obj, dict):
        return {k: _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class OutputStage:
    """Collects outputs in a staging directory and publishes them atomically
    per file on ``commit``. Nothing is written outside ``out_dir``."""

    def __init__(self, out_dir: Path, cfg_hash: str):
        self.out_dir = Path(out_dir)
        self.cfg_hash = cfg_hash
        self._created = not self.out_dir.exists()
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.stage = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.out_dir))
        self.files: dict[str, int] = {}

    def _path(self, name: str) -> Path:
        p = self.stage / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def csv(self, name: str, header, rows) -> None:
        lines = [f"# manifest: {self.cfg_hash}", ",".join(header)]
        n = 0
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
            n += 1
        self._path(name).write_text("\n".join(lines) + "\n")
        self.files[name] = n

    def csv_text(self, name: str, text: str) -> None:
        """Pre-rendered CSV whose first line is the manifest comment."""
        self._path(name).write_text(text)
        self.files[name] = sum(1 for ln in text.splitlines() if ln and not ln.startswith("#")) - 1

    def json(self, name: str, doc) -> None:
        text = json.dumps(_json_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"
        self._path(name).write_text(text)
        self.files[name] = text.count("\n")

    def commit(self, command: str, elapsed: float) -> None:
        (self.stage / "timing.log").write_text(f"command={command} wall_time_s={elapsed:.3f}\n")
        self.files["timing.log"] = 1
        entries = []
        for name in sorted(self.files):
            data = (self.stage / name).read_bytes()
            entry = {"path": name, "rows": self.files[name]}
            if name != "timing.log":
                entry["sha256"] = hashlib.sha256(data).hexdigest()
            entries.append(entry)
        manifest = {
            "tool": "jjphoton",
            "version": __version__,
            "command": command,
            "config_hash": self.cfg_hash,
            "files": entries,
        }
        (self.stage / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        for name in sorted(self.files) + ["manifest.json"]:
            dest = self.out_dir / name
            dest.parent.mkdir(parents=True, exist_ok=True)
            os.replace(self.stage / name, dest)
        shutil.rmtree(self.stage, ignore_errors=True)

    def abort(self) -> None:
        shutil.rmtree(self.stage, ignore_errors=True)
        if self._created:
            shutil.rmtree(self.out_dir, ignore_errors=True)


# -- commands -----------------------------------------------------------------


def _dark_model(cfg: ExperimentConfig, gap_V: float, sec: dict | None = None) -> DarkIvModel:
    sec = sec or {}
    R_N = cfg.junction.R_N
    R_sg = sec.get("R_sg") or 100.0 * R_N
    return DarkIvModel(gap=0.5 * gap_V * E_CHARGE, R_N=R_N, R_sg=R_sg, w=sec.get("width_V", 0.5e-6))


def cmd_iv(cfg: ExperimentConfig, out: OutputStage, prefix: str = "") -> dict:
    """Dark and pumped IV curves plus step currents at the probe voltage."""
    sec = cfg.section("iv")
    dark = _dark_model(cfg, sec["gap_V"], sec)
    V = np.linspace(-sec["v_max"], sec["v_max"], sec["n_points"])
    f = sec["f"]
    V_probe = sec["V_probe"] if sec["V_probe"] is not None else default_probe_voltage(dark.gap_voltage, f)
    steps = []
    for k, alpha in enumerate(sec["alphas"]):
        iv = tien_gordon_iv(dark, f, alpha, V)
        out.csv_text(f"{prefix}iv_{k:02d}.csv", iv.to_csv(comment=f"manifest: {out.cfg_hash}"))
        steps.append((alpha, extract_step_current(iv, V_probe)))
    out.csv(f"{prefix}step_currents.csv", ["alpha", "step_current_A"], steps)
    summary = {
        "frequency_Hz": f,
        "photon_voltage_V": photon_voltage(f),
        "gap_voltage_V": dark.gap_voltage,
        "step_onset_V": first_step_onset(dark.gap_voltage, f),
        "V_probe_V": V_probe,
        "curves": [{"file": f"{prefix}iv_{k:02d}.csv", "alpha": a} for k, a in enumerate(sec["alphas"])],
    }
    out.json(f"{prefix}iv_summary.json", summary)
    return summary


def _crossover(modes) -> dict | None:
    active = [m for m in modes if m.eta > 0]
    if len(active) < 2:
        return None
    try:
        T = contribution_crossover(active[0], active[1])
    except ParameterError as exc:
        return {"crossover_K": None, "note": str(exc)}
    return {"crossover_K": T, "modes": [[m.f, m.Q, m.eta] for m in active[:2]]}


def cmd_sweep_temp(cfg: ExperimentConfig, out: OutputStage, prefix: str = "") -> dict:
    """Rate versus cavity temperature with optional synthetic noise and fit."""
    sec = cfg.section("sweep_temp")
    T = np.asarray(sec["temps"], dtype=float)
    modes = cfg.modes
    eta = [m.eta for m in modes]
    true = (np.asarray(model_rate(T, modes, eta, cfg.source.dark_rate), dtype=float)
            if modes else np.full(T.size, cfg.source.dark_rate))
    rel = sec["rel_noise"]
    rng = derive_rng(cfg.master_seed, "sweep-temp")
    noisy = true * (1.0 + rel * rng.standard_normal(T.size)) if rel > 0 else true.copy()
    noisy = np.maximum(noisy, 1e-12)
    err = max(rel, 1e-3) * true
    out.csv(f"{prefix}rate_vs_temp.csv", ["temp_K", "rate_Hz", "rate_err_Hz"], zip(T, noisy, err))
    result = {"crossover": _crossover(modes), "true_rate_Hz": true.tolist()}
    out.json(f"{prefix}crossover.json", result["crossover"] or {"crossover_K": None})
    if sec["fit"] and modes:
        fr = _run_fit(cfg, RateData(T, noisy, err))
        out.json(f"{prefix}fit_result.json", fr.to_dict())
        result["fit"] = fr.to_dict()
    return result


def _run_fit(cfg: ExperimentConfig, data: RateData):
    sec = cfg.section("fit_rate")
    res = fit(data, cfg.modes, tuple(sec["eta_bounds"]), tuple(sec["dark_bounds"]))
    if not all(np.isfinite(res.params)):
        raise NumericalError("rate fit produced non-finite parameters")
    return res


def cmd_fit_rate(cfg: ExperimentConfig, out: OutputStage, prefix: str = "") -> dict:
    """Fit a ``temp_K,rate_Hz,rate_err_Hz`` table to the mode model."""
    path = cfg.section("fit_rate")["data"]
    if not path:
        raise ConfigError("fit-rate needs fit_rate.data (path to a rate CSV)")
    if not cfg.modes:
        raise ConfigError("fit-rate needs at least one cavity mode")
    try:
        data = RateData.from_csv(path)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read rate data {path}: {exc}") from None
    res = _run_fit(cfg, data)
    out.json(f"{prefix}fit_result.json", res.to_dict())
    model = model_rate(data.T, cfg.modes, res.eta, res.r_dc)
    out.csv(f"{prefix}fit_curve.csv", ["temp_K", "rate_Hz", "rate_err_Hz", "model_Hz"],
            zip(data.T, data.rate, data.rate_err, np.atleast_1d(model)))
    return res.to_dict()


def _distribution_source(cfg: ExperimentConfig) -> SourceConfig:
    model = cfg.section("distribution")["stats_model"]
    modes = cfg.modes
    if model != "from-modes":
        modes = tuple(CavityMode(m.f, m.Q, m.eta, model, m.tau_int) for m in modes)
    return SourceConfig(modes, cfg.source.dark_rate, cfg.source.T)


def cmd_distribution(cfg: ExperimentConfig, out: OutputStage, prefix: str = "") -> dict:
    """Event record, waiting-time histogram and interval statistics."""
    sec = cfg.section("distribution")
    source = _distribution_source(cfg)
    stream = simulate_event_level(source, cfg.detector, sec["duration"],
                                  derive_seed(cfg.master_seed, "distribution"))
    out.csv_text(f"{prefix}events.csv", stream.to_csv(comment=f"manifest: {out.cfg_hash}"))
    st = interval_stats(stream, n_bootstrap=sec["n_bootstrap"],
                        seed=derive_rng(cfg.master_seed, "bootstrap"))
    hist = waiting_time_histogram(stream, sec["binning"], sec["n_bins"])
    out.csv_text(f"{prefix}histogram.csv", hist.to_csv(comment=f"manifest: {out.cfg_hash}"))
    expo = fit_exponential(stream)
    doc = {
        "n_events": len(stream),
        "duration_s": stream.duration,
        "counts_by_label": stream.counts_by_label(),
        "interval_stats": st.to_dict(),
        "exponential_fit": {"tau_s": expo.tau, "ks_distance": expo.goodness},
    }
    dead = cfg.detector.dead_time
    if dead > 0:
        # recorded intervals are dead time plus an exponential residual
        doc["interval_stats_minus_dead_time"] = interval_stats(stream, dead_time=dead).to_dict()
    if st.n_events > 10:
        ks = ks_exponential(stream.intervals() - dead)
        doc["ks_exponential"] = {"statistic": ks.statistic, "pvalue": ks.pvalue, "method": ks.method,
                                 "dead_time_subtracted_s": dead}
    window = sec["fano_window"] or 10.0 * st.mean
    if stream.duration >= 20 * window:
        doc["fano"] = {"window_s": window, "value": fano_factor(stream, window)}
    out.json(f"{prefix}distribution_stats.json", doc)
    return doc


def cmd_sweep_bias(cfg: ExperimentConfig, out: OutputStage, prefix: str = "") -> dict:
    """Switching rate versus bias at several cavity temperatures."""
    sec = cfg.section("sweep_bias")
    if not cfg.modes:
        raise ConfigError("sweep-bias needs at least one cavity mode")
    cal = calibrate_bias(cfg.junction, sec["bias"], cfg.modes, sec["T_junction"], cfg.escape,
                         trials=sec["trials"], seed=derive_seed(cfg.master_seed, "sweep-bias"),
                         sde_cfg=cfg.sde, workers=cfg.threads)
    table = sweep_bias(cal, cfg.modes, sec["temps"])
    out.csv(f"{prefix}sweep_bias.csv", ["bias_ratio", "temp_K", "rate_Hz", "rate_err_Hz"], table.rows())
    header = ["bias_ratio", "dark_rate_Hz"]
    for k in range(len(cfg.modes)):
        header += [f"p_mode{k}", f"p_mode{k}_err"]
    rows = []
    for b, i in enumerate(cal.bias):
        row = [i, cal.dark_rate[b]]
        for k in range(len(cfg.modes)):
            row += [cal.prob[b, k], cal.prob_err[b, k]]
        rows.append(row)
    out.csv(f"{prefix}bias_calibration.csv", header, rows)
    k = table.optimal_bias_index()
    hot, cold = int(np.argmax(table.temps)), int(np.argmin(table.temps))
    summary = {
        "optimal_bias": float(table.bias[k]),
        "rate_cold_Hz": float(table.rate[k, cold]),
        "rate_hot_Hz": float(table.rate[k, hot]),
        "hot_over_cold": float(table.rate[k, hot] / table.rate[k, cold]),
        "T_cold_K": float(table.temps[cold]),
        "T_hot_K": float(table.temps[hot]),
    }
    out.json(f"{prefix}sweep_bias_summary.json", summary)
    return summary


def cmd_pat(cfg: ExperimentConfig, out: OutputStage, prefix: str = "") -> dict:
    """Synthetic PAT spectroscopy of each configured cavity resonance."""
    sec = cfg.section("pat")
    dark = _dark_model(cfg, sec["gap_V"], cfg.section("iv"))
    fits = []
    for k, cav in enumerate(sec["cavities"]):
        f0, Q = cav["f0"], cav["Q"]
        half = 0.5 * sec["span_linewidths"] * f0 / Q
        freqs = f0 + np.linspace(-half, half, sec["n_freq"])
        ex = synthetic_pat_experiment(f0, Q, dark, sec["alpha_ref"], sec["source_power_dB"], freqs=freqs)
        out.csv(f"{prefix}pat_calibration_{k}.csv", ["power_dB", "step_current_A"],
                zip(ex.calib_powers, ex.calib_currents))
        out.csv_text(f"{prefix}pat_response_{k}.csv", ex.response.to_csv(comment=f"manifest: {out.cfg_hash}"))
        r = ex.response
        fits.append({
            "input": {"f0_Hz": f0, "Q": Q},
            "recovered": {"f0_Hz": r.f0, "Q": r.Q},
            "identifiable": r.identifiable,
            "fit_rms_dB": r.fit_rms_db,
            "V_probe_V": ex.V_probe,
            "calibration": ex.calibration.to_dict(),
        })
    doc = {"cavities": fits}
    out.json(f"{prefix}pat_fit.json", doc)
    return doc


def cmd_demo_paper(cfg: ExperimentConfig, out: OutputStage, prefix: str = "") -> dict:
    """All dataset families in one run, each in its own subdirectory."""
    return {
        "iv": cmd_iv(cfg, out, "iv/"),
        "sweep_temp": cmd_sweep_temp(cfg, out, "sweep_temp/"),
        "distribution": cmd_distribution(cfg, out, "distribution/"),
        "sweep_bias": cmd_sweep_bias(cfg, out, "sweep_bias/"),
        "pat": cmd_pat(cfg, out, "pat/"),
    }


COMMANDS = {
    "iv": cmd_iv,
    "sweep-bias": cmd_sweep_bias,
    "sweep-temp": cmd_sweep_temp,
    "distribution": cmd_distribution,
    "fit-rate": cmd_fit_rate,
    "pat": cmd_pat,
    "demo-paper": cmd_demo_paper,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jjphoton", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config (defaults used when omitted)")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--threads", type=int, help="Monte Carlo worker threads")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=fn.__doc__.split("\n")[0])
    return parser


def run(command: str, cfg: ExperimentConfig) -> dict:
    """Run one command with a loaded config, publishing its outputs."""
    stage = OutputStage(cfg.output_dir, cfg.config_hash())
    t0 = time.perf_counter()
    try:
        stage.json("config.json", {k: v for k, v in cfg.raw.items() if k not in ("output_dir", "threads")})
        result = COMMANDS[command](cfg, stage)
        stage.commit(command, time.perf_counter() - t0)
    except BaseException:
        stage.abort()
        raise
    return result


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be >= 0", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, master_seed=args.seed, output_dir=args.out, threads=args.threads)
        log.info("running %s, config hash %s", args.command, cfg.config_hash())
        run(args.command, cfg)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
