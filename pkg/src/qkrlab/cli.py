"""
Command-line front end.

    qkrlab rates    --protocol bb84 --q 0.07
    qkrlab figure   --id 2 --step 0.01 --out fig2.csv
    qkrlab simulate --protocol qkr4 --m 4096 --qber 0.03 --q-predict 0.05 --trials 100
    qkrlab sweep    --protocol qkr4 --q-grid 0.01:0.10:0.01 --trials 50 --out sweep.csv

Every flag can also come from a JSON file given with ``--config``; keys are
the flag names in snake_case. Flags override the file, which overrides the
built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from qkrlab.accounting import aggregate, run_sweep, run_trials
from qkrlab.channel import InterceptResend
from qkrlab.coding import ECC_MODES
from qkrlab.entropy_rates import (
    DomainError,
    Protocol,
    figure_data,
    key_sharing_rate,
    qber_grid,
    qkr_recycling_rate,
)
from qkrlab.protocols import ConfigError, TrialParams

DEFAULTS: dict[str, Any] = {
    "format": None,
    "out": None,
    "clamp_negative": False,
    "emit_ledgers": False,
    "workers": 1,
    "seed": 0,
    "q": None,
    "q_range": None,
    "q_predict": None,
    "step": 0.01,
    "m": 4096,
    "qber": 0.0,
    "trials": 10,
    "ecc": "ideal",
    "mac_bits": 32,
    "eavesdropper": "none",
    "eve_fraction": 1.0,
    "eve_bases": None,
    "qber_source": "decoder",
    "qkd_postprocessing": "analytic",
    "sample_fraction": 0.0,
    "segregate_failures": False,
    "no_recycle_on_reject": False,
    "q_grid": None,
    "q_predict_grid": None,
}

SWEEP_COLUMNS = ("q", "q_predict", "empirical_rate", "stderr", "analytic_rate", "acceptance")


class UsageError(Exception):
    pass


def fmt(x: Optional[float]) -> str:
    """12 significant digits; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    return f"{x:.12g}"


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    text = str(text).strip()
    try:
        if ":" in text:
            start, stop, step = (float(p) for p in text.split(":"))
            return qber_grid(start, stop, step)
        return sorted({float(p) for p in text.split(",") if p.strip()})
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}: {exc}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with default values for any flag")
    p.add_argument("--out", help="write output here instead of standard output")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--clamp-negative", action="store_true", default=None,
                   help="clamp negative rates to 0 (presentation only)")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)


def _sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--protocol", type=str)
    p.add_argument("--m", type=int, help="message bits (QKR) or qubits sent (QKD)")
    p.add_argument("--trials", type=int)
    p.add_argument("--q-predict", type=float)
    p.add_argument("--ecc", choices=ECC_MODES)
    p.add_argument("--mac-bits", type=int, choices=(8, 16, 32, 64))
    p.add_argument("--eavesdropper", choices=("none", "intercept-resend"))
    p.add_argument("--eve-fraction", type=float)
    p.add_argument("--eve-bases", type=int, choices=(2, 3))
    p.add_argument("--qber-source", choices=("decoder", "channel"))
    p.add_argument("--qkd-postprocessing", choices=("analytic", "concrete"))
    p.add_argument("--sample-fraction", type=float)
    p.add_argument("--segregate-failures", action="store_true", default=None,
                   help="leave rejected QKR trials out of mean rates")
    p.add_argument("--no-recycle-on-reject", action="store_true", default=None,
                   help="treat u and K_b as consumed when Bob rejects")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qkrlab", description="QKR / QKD key-sharing-rate laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rates", help="closed-form rates at one q or over a range")
    _common(p)
    p.add_argument("--protocol", type=str)
    p.add_argument("--q", type=float)
    p.add_argument("--q-range", help="start:stop:step")
    p.add_argument("--q-predict", type=float, help="QKR prediction (default: q)")

    p = sub.add_parser("figure", help="curve data behind figures 1-5")
    _common(p)
    p.add_argument("--id", type=int, dest="figure_id")
    p.add_argument("--step", type=float)

    p = sub.add_parser("simulate", help="Monte Carlo trials at one operating point")
    _common(p)
    _sim_flags(p)
    p.add_argument("--qber", type=float)
    p.add_argument("--emit-ledgers", action="store_true", default=None)

    p = sub.add_parser("sweep", help="Monte Carlo trials over a q (and q_predict) grid")
    _common(p)
    _sim_flags(p)
    p.add_argument("--q-grid", help="start:stop:step or comma list")
    p.add_argument("--q-predict-grid", help="omit for q_predict = q")
    return parser


def resolve(args: argparse.Namespace) -> dict[str, Any]:
    """Merge flags over the config file over DEFAULTS."""
    file_cfg: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must hold a JSON object")
        file_cfg = {k.replace("-", "_"): v for k, v in file_cfg.items()}
    cfg = dict(DEFAULTS)
    cfg.update(file_cfg)
    for key, val in vars(args).items():
        if val is not None and key != "config":
            cfg[key] = val
    return cfg


def _require(cfg: dict, *keys: str) -> None:
    for k in keys:
        if cfg.get(k) is None:
            raise UsageError(f"missing --{k.replace('_', '-')}")


def _emit(text: str, cfg: dict, stdout) -> None:
    if cfg.get("out"):
        try:
            Path(cfg["out"]).write_text(text)
        except OSError as exc:
            raise UsageError(f"cannot write {cfg['out']}: {exc}") from None
    else:
        stdout.write(text)


def _csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _clamp(x: Optional[float], cfg: dict) -> Optional[float]:
    if x is None or not cfg["clamp_negative"]:
        return x
    return max(0.0, x)


def cmd_rates(cfg: dict, stdout) -> None:
    _require(cfg, "protocol")
    protocol = Protocol.parse(cfg["protocol"])
    if cfg.get("q_range"):
        qs = parse_grid(cfg["q_range"])
    elif cfg.get("q") is not None:
        qs = [float(cfg["q"])]
    else:
        raise UsageError("give --q or --q-range")
    rows = []
    for q in qs:
        rate = _clamp(key_sharing_rate(protocol, q, cfg.get("q_predict")), cfg)
        if protocol.is_qkr:
            qp = q if cfg.get("q_predict") is None else float(cfg["q_predict"])
            recyc = 0.0 if q > qp else qkr_recycling_rate(q, protocol)
            rows.append({"q": q, "q_predict": qp, "rate": rate, "recycling_rate": recyc})
        else:
            rows.append({"q": q, "rate": rate})
    if (cfg["format"] or "csv") == "json":
        _emit(json.dumps({"protocol": protocol.value, "rows": rows}, indent=2) + "\n", cfg, stdout)
        return
    header = list(rows[0])
    _emit(_csv(header, [[fmt(r[h]) for h in header] for r in rows]), cfg, stdout)


def cmd_figure(cfg: dict, stdout) -> None:
    _require(cfg, "figure_id")
    try:
        curves = figure_data(int(cfg["figure_id"]), float(cfg["step"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if (cfg["format"] or "csv") == "json":
        doc = {
            "figure": int(cfg["figure_id"]),
            "series": [
                {"name": c.name, "protocol": c.protocol.value, "q_predict": c.q_predict,
                 "points": [[q, _clamp(v, cfg)] for q, v in c.points]}
                for c in curves
            ],
        }
        _emit(json.dumps(doc, indent=2) + "\n", cfg, stdout)
        return
    rows = [[c.name, fmt(q), fmt(_clamp(v, cfg))] for c in curves for q, v in c.points]
    _emit(_csv(("series", "q", "value"), rows), cfg, stdout)


def _template(cfg: dict, q: float) -> TrialParams:
    _require(cfg, "protocol")
    protocol = Protocol.parse(cfg["protocol"])
    eve = None
    if cfg["eavesdropper"] == "intercept-resend":
        eve = InterceptResend(float(cfg["eve_fraction"]), int(cfg["eve_bases"] or protocol.num_bases))
    qp = cfg.get("q_predict")
    return TrialParams(
        protocol=protocol,
        m=int(cfg["m"]),
        q_channel=float(q),
        q_predict=(float(qp) if qp is not None else float(q)) if protocol.is_qkr else None,
        ecc_mode=cfg["ecc"],
        mac_bits=int(cfg["mac_bits"]),
        eavesdropper=eve,
        master_seed=int(cfg["seed"]),
        qber_source=cfg["qber_source"],
        recycle_on_reject=not cfg["no_recycle_on_reject"],
        qkd_postprocessing=cfg["qkd_postprocessing"],
        sample_fraction=float(cfg["sample_fraction"]),
    )


def _echo(cfg: dict) -> dict:
    skip = {"command", "out", "format", "figure_id", "step", "q", "q_range", "workers"}
    return {k: v for k, v in sorted(cfg.items()) if k not in skip}


def _sweep_row(s) -> list[str]:
    return [fmt(s.q), fmt(s.q_predict), fmt(s.mean_rate), fmt(s.stderr), fmt(s.analytic_rate), fmt(s.acceptance)]


def cmd_simulate(cfg: dict, stdout) -> None:
    template = _template(cfg, cfg["qber"])
    ledgers = run_trials(template, int(cfg["trials"]), int(cfg["workers"]))
    summary = aggregate(ledgers, include_failures=not cfg["segregate_failures"])
    if cfg["format"] == "csv":
        _emit(_csv(SWEEP_COLUMNS, [_sweep_row(summary)]), cfg, stdout)
        return
    doc: dict[str, Any] = {"config": _echo(cfg), "summary": summary.to_dict()}
    if cfg["emit_ledgers"]:
        doc["ledgers"] = [lg.to_dict() for lg in ledgers]
    _emit(json.dumps(doc, indent=2) + "\n", cfg, stdout)


def cmd_sweep(cfg: dict, stdout) -> None:
    _require(cfg, "q_grid")
    template = _template(cfg, 0.0)
    qps = parse_grid(cfg["q_predict_grid"]) if cfg.get("q_predict_grid") else None
    if qps is None and cfg.get("q_predict") is not None and template.protocol.is_qkr:
        qps = [float(cfg["q_predict"])]
    summaries = run_sweep(
        template,
        parse_grid(cfg["q_grid"]),
        qps,
        trials=int(cfg["trials"]),
        workers=int(cfg["workers"]),
        include_failures=not cfg["segregate_failures"],
    )
    if cfg["format"] == "json":
        doc = {"config": _echo(cfg), "points": [s.to_dict() for s in summaries]}
        _emit(json.dumps(doc, indent=2) + "\n", cfg, stdout)
        return
    _emit(_csv(SWEEP_COLUMNS, [_sweep_row(s) for s in summaries]), cfg, stdout)


COMMANDS = {"rates": cmd_rates, "figure": cmd_figure, "simulate": cmd_simulate, "sweep": cmd_sweep}


def main(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        if cfg["workers"] < 1:
            raise UsageError("--workers must be >= 1")
        COMMANDS[args.command](cfg, stdout)
    except (UsageError, DomainError, ConfigError, ValueError) as exc:
        print(f"qkrlab {args.command}: error: {exc}", file=stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
