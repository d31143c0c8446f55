"""Command-line front end: ``ptsdim simulate | flops | validate``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import __version__
from .channel import ConfigError
from .config import load_config
from .simkit import BerRecord, Calibration, SimConfig, flops_aar, flops_min_power, simulate
from .validation import run_checks

log = logging.getLogger("ptsdim")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
CSV_FIELDS = ("snr_db", "ber", "bit_errors", "bits_sent", "mean_tx_power", "mean_residual",
              "mean_active_antennas")


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def records_csv(records: Sequence[BerRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for rec in records:
        writer.writerow([repr(float(rec.snr_db)), repr(rec.ber), rec.bit_errors, rec.bits_sent,
                         repr(rec.mean_tx_power), repr(rec.mean_residual),
                         repr(rec.mean_active_antennas)])
    return buf.getvalue()


def curve_paths(output: Path, names: Sequence[str]) -> Dict[str, Path]:
    """One CSV per curve; a single curve writes to ``output`` itself."""
    if len(names) == 1:
        return {names[0]: output}
    return {n: output.with_name(f"{output.stem}_{n}{output.suffix or '.csv'}") for n in names}


def manifest_path(output: Path) -> Path:
    return output.with_name(output.name + ".manifest.json")


def build_manifest(curves: List[Dict], seed: int, started: str, finished: str) -> Dict:
    return {"tool": "ptsdim", "version": __version__, "seed": seed,
            "started": started, "finished": finished, "curves": curves}


def load_manifest(path) -> Dict:
    """Read a manifest back into config, calibration and record objects."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    for curve in data["curves"]:
        curve["config"] = SimConfig.from_dict(curve["config"])
        curve["calibration"] = Calibration(**curve["calibration"])
        curve["records"] = [BerRecord.from_dict(r) for r in curve["records"]]
    return data


def _overrides(args) -> Dict:
    return {"seed": args.seed} if getattr(args, "seed", None) is not None else {}


def cmd_simulate(args) -> int:
    curves = load_config(args.config, _overrides(args))
    output = Path(args.output)
    paths = curve_paths(output, [name for name, _ in curves])
    started = datetime.now(timezone.utc).isoformat()
    entries = []
    for name, cfg in curves:
        log.info("curve %s: mode=%s, %d SNR points", name, cfg.tx_mode, len(cfg.snr_grid_db))
        result = simulate(cfg, workers=args.workers)
        for rec in result.records:
            log.info("  %s snr=%.2f dB ber=%.3e (%d errors / %d bits)", name, rec.snr_db, rec.ber,
                     rec.bit_errors, rec.bits_sent)
        entries.append({"name": name, "csv": paths[name].name, "config": cfg.to_dict(),
                        "calibration": vars(result.calibration),
                        "calibration_constant": result.calibration.constant,
                        "records": [r.to_dict() for r in result.records]})
    finished = datetime.now(timezone.utc).isoformat()
    seed = curves[0][1].seed
    # everything is computed before the first file is written
    for entry, (name, _) in zip(entries, curves):
        recs = [BerRecord.from_dict(r) for r in entry["records"]]
        _atomic_write(paths[name], records_csv(recs))
    manifest = build_manifest(entries, seed, started, finished)
    _atomic_write(manifest_path(output), json.dumps(manifest, indent=2, default=list) + "\n")
    for name in paths:
        print(f"{name}: {paths[name]}")
    return EXIT_OK


def cmd_flops(args) -> int:
    curves = load_config(args.config)
    cfg0 = curves[0][1]
    base = flops_min_power(cfg0.n_u, cfg0.n_rx, cfg0.n_tx)
    rows = []
    seen = set()
    for name, cfg in curves:
        if cfg.aar is None:
            continue
        n_on = args.n_on if args.n_on is not None else cfg.aar.n_on
        q = args.q if args.q is not None else cfg.aar.q_max
        if (n_on, q) in seen:
            continue
        seen.add((n_on, q))
        aar = flops_aar(cfg.n_u, cfg.n_rx, cfg.n_tx, n_on, q)
        rows.append({"curve": name, "n_on": n_on, "q": q, "aar": aar,
                     "ratio": float(f"{aar / base:.6g}")})
    if not rows and (args.n_on is not None):
        q = args.q if args.q is not None else 100
        aar = flops_aar(cfg0.n_u, cfg0.n_rx, cfg0.n_tx, args.n_on, q)
        rows.append({"curve": "cli", "n_on": args.n_on, "q": q, "aar": aar,
                     "ratio": float(f"{aar / base:.6g}")})
    if args.json:
        print(json.dumps({"min_power": base, "aar": rows}))
        return EXIT_OK
    print(f"min_power flops: {base:.10g}")
    for row in rows:
        print(f"aar flops ({row['curve']}, n_on={row['n_on']}, Q={row['q']}): {row['aar']:.10g}"
              f"  ratio aar/min_power: {row['ratio']:.6g}")
    return EXIT_OK


def cmd_validate(args) -> int:
    results = run_checks()
    ok = all(r.passed for r in results)
    if args.json:
        print(json.dumps({"passed": ok, "checks": [vars(r) for r in results]}))
    else:
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<20} {r.detail} ({r.seconds:.2f}s)")
    return EXIT_OK if ok else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptsdim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run BER sweeps described by a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--output", required=True, help="CSV path (per-curve suffixes when several)")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("flops", help="print the analytical FLOP counts")
    p.add_argument("--config", required=True)
    p.add_argument("--n-on", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("validate", help="run the fast invariant suite")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
