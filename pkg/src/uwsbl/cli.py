"""Command-line entry point: ``uwsbl <command> --config FILE --out DIR``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .experiments import (
    ConfigError,
    NoiseSpec,
    run_crlb_validation,
    run_heatmaps,
    run_mismatch_sweep,
    run_occlusion_sweep,
    run_snr_sweep,
)

RUNNERS = {
    "snr-sweep": run_snr_sweep,
    "mismatch-sweep": run_mismatch_sweep,
    "occlusion-sweep": run_occlusion_sweep,
    "crlb-validate": run_crlb_validation,
}

NOISE_HELP = (
    "recorded noise file: interleaved real/imaginary float64 samples, raw "
    "little-endian binary or text (.csv/.txt). The record is normalized to unit "
    "variance and consecutive blocks of N*L samples feed successive trials"
)


def _add_common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", required=config_required, type=Path, help="TOML experiment file")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--threads", type=int, help="worker processes (default: config value or 1)")
    p.add_argument("--trials", type=int, help="override the trial count")
    p.add_argument("--noise-file", type=Path, help=NOISE_HELP)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uwsbl",
        description="Semi-blind underwater source localization: Monte-Carlo experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("snr-sweep", "RMS miss distance vs SNR"),
        ("mismatch-sweep", "RMS miss distance vs channel mismatch epsilon"),
        ("occlusion-sweep", "RMS miss distance vs direct-path attenuation beta"),
        ("crlb-validate", "SBL estimates against the CRLB confidence ellipsoid"),
        ("heatmap", "objective maps over a fixed-depth plane"),
    ]:
        _add_common(sub.add_parser(name, help=helptext, description=helptext))
    st = sub.add_parser("selftest", help="run built-in consistency checks")
    st.add_argument("--cases", type=int, default=20, help="random instances per check (default 20)")
    st.add_argument("--seed", type=int, default=0)
    return parser


def _apply_overrides(config, args):
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.threads is not None:
        changes["threads"] = args.threads
    if args.noise_file is not None:
        changes["noise"] = NoiseSpec(config.noise.convention, config.noise.snr_db, str(args.noise_file))
    return replace(config, **changes) if changes else config


def _selftest(args) -> int:
    from .selfcheck import run_all

    ok = True
    for res in run_all(args.cases, args.seed):
        status = "PASS" if res.passed else "FAIL"
        print(f"{status}  {res.name}: worst relative error {res.worst:.3e} "
              f"(tolerance {res.tolerance:.0e}, {res.cases} cases)")
        ok &= res.passed
    return 0 if ok else 1


def main(argv=None) -> int:
    from .config import load_config

    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return _selftest(args)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _apply_overrides(load_config(args.config), args)
        if args.command == "heatmap":
            maps = run_heatmaps(config, args.out)
            for est, m in maps.items():
                x, y, z = m.maximizer
                print(f"{est}: maximizer ({x:.3f}, {y:.3f}, {z:.3f})")
            return 0
        report = RUNNERS[args.command](config)
        report.write(args.out)
    except ConfigError as exc:
        print(f"uwsbl: configuration error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"uwsbl: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for row in report.summary():
        value = "" if row["value"] is None else f"{row['variable']}={row['value']:g} "
        print(f"{value}{row['estimator']}: rms {row['rms']:.4g} m "
              f"({row['successes']}/{row['trials']} ok)")
    if report.extra:
        print(f"coverage {report.extra['coverage']:.3f}, rms/sqrt(trace) "
              f"{report.extra['rms_over_sqrt_trace']:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
