"""Command-line interface: ``ququart {protocol,scan,simulate,reconstruct}``.

Settings resolve as defaults < ``--config`` JSON < explicit flags. Exit codes:
0 success, 1 domain failure (incomplete protocol, no counts, no convergence),
2 usage or input error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .errors import NoCounts, TomographyError
from .optics import PREPARATION_PLATE_MM, DispersionModel, prepare_product_state
from .protocol import ProtocolSpec, b_matrix, completeness, instrument_matrix
from .reconstruction import MLEOptions, mle_reconstruct
from .scan import LOSS_STEP_MM, LOSS_TRIALS, MAP_H1_RANGE, MAP_H2_RANGE, find_optimum, scan_info_loss, scan_ratio
from .simulation import read_counts_csv, run_virtual_experiment, sidecar_json, subtract_accidentals
from .states import PureQuquart, basis_state, fidelity, parse_state

log = logging.getLogger("ququart")

OPTIMAL_PLATES_MM = (0.988, 0.836)

COMMON_DEFAULTS = {
    "seed": 0,
    "out": ".",
    "threads": 1,
    "lambda_s_nm": 702.0,
    "lambda_i_nm": 605.0,
    "dispersion": {"model": "quartz-sellmeier"},
    "schedule": "standard-144",
}

COMMAND_DEFAULTS = {
    "protocol": {},
    "scan": {
        "kind": "ratio",
        "h1_range": list(MAP_H1_RANGE[:2]),
        "h2_range": list(MAP_H2_RANGE[:2]),
        "step": None,
        "events": 32_000,
        "trials": LOSS_TRIALS,
        "state": None,
    },
    "simulate": {
        "plate1_mm": OPTIMAL_PLATES_MM[0],
        "plate2_mm": OPTIMAL_PLATES_MM[1],
        "events": 32_000,
        "state": None,
        "prepare_alpha_deg": None,
        "singles": None,
        "window_s": 3e-9,
        "exposure_s": None,
    },
    "reconstruct": {
        "counts": None,
        "protocol": None,
        "reference": None,
        "reference_alpha_deg": None,
    },
}


class UsageError(Exception):
    pass


def _spec_flags(p: argparse.ArgumentParser, thickness: bool = True) -> None:
    if thickness:
        p.add_argument("--plate1", dest="plate1_mm", type=float, help="Wp1 thickness, mm")
        p.add_argument("--plate2", dest="plate2_mm", type=float, help="Wp2 thickness, mm")
    p.add_argument("--lambda-s", dest="lambda_s_nm", type=float, help="signal wavelength, nm")
    p.add_argument("--lambda-i", dest="lambda_i_nm", type=float, help="idler wavelength, nm")
    p.add_argument("--dispersion", choices=["quartz-sellmeier", "fixed-delta-n"])
    p.add_argument("--delta-n", dest="delta_n", type=float, help="birefringence for fixed-delta-n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", type=str, help="output directory")
    common.add_argument("--threads", type=int)
    common.add_argument("-q", "--quiet", action="store_true", help="log warnings only")

    parser = argparse.ArgumentParser(prog="ququart", description="Biphoton ququart tomography toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("protocol", parents=[common], help="export a protocol and its completeness report")
    _spec_flags(p)

    p = sub.add_parser("scan", parents=[common], help="ratio or information-loss map over plate thicknesses")
    _spec_flags(p, thickness=False)
    p.add_argument("--kind", choices=["ratio", "loss"])
    p.add_argument("--h1-range", dest="h1_range", type=float, nargs=2, metavar=("MIN", "MAX"))
    p.add_argument("--h2-range", dest="h2_range", type=float, nargs=2, metavar=("MIN", "MAX"))
    p.add_argument("--step", type=float, help="grid step in mm for both plates")
    p.add_argument("--events", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--state", help="true state for --kind loss, e.g. '0,0,0,1'")

    p = sub.add_parser("simulate", parents=[common], help="virtual coincidence-count experiment")
    _spec_flags(p)
    p.add_argument("--protocol", help="protocol JSON (overrides plate flags)")
    p.add_argument("--state", help="true state as four complex amplitudes, e.g. '1,0,0,1j'")
    p.add_argument("--prepare-alpha", dest="prepare_alpha_deg", type=float,
                   help=f"prepare the true state with the {PREPARATION_PLATE_MM} mm plate at this angle (deg)")
    p.add_argument("--events", type=int, help="expected total coincidences")
    p.add_argument("--singles", type=float, nargs=2, metavar=("N1", "N2"), help="singles rates, 1/s")
    p.add_argument("--window", dest="window_s", type=float, help="coincidence window, s")
    p.add_argument("--exposure", dest="exposure_s", type=float, help="exposure per setting, s")

    p = sub.add_parser("reconstruct", parents=[common], help="maximum-likelihood state estimate from counts")
    p.add_argument("--counts", help="counts CSV")
    p.add_argument("--protocol", help="protocol JSON")
    p.add_argument("--reference", help="reference state, e.g. '0,0,0,1'")
    p.add_argument("--reference-alpha", dest="reference_alpha_deg", type=float,
                   help=f"reference state prepared with the {PREPARATION_PLATE_MM} mm plate at this angle (deg)")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(COMMON_DEFAULTS)
    cfg.update(COMMAND_DEFAULTS[args.command])
    if args.config is not None:
        try:
            cfg.update(json.loads(args.config.read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("config", "quiet", "command")}
    disp_name = flags.pop("dispersion", None)
    delta_n = flags.pop("delta_n", None)
    if disp_name is not None or delta_n is not None:
        disp = dict(cfg.get("dispersion") or {})
        if disp_name is not None:
            disp = {"model": disp_name}
        if delta_n is not None:
            disp["delta_n"] = delta_n
        cfg["dispersion"] = disp
    cfg.update(flags)
    cfg["command"] = args.command
    return cfg


def _degrees(value: float) -> float:
    return value * math.pi / 180.0


def _spec_from_config(cfg: dict) -> ProtocolSpec:
    for key in ("plate1_mm", "plate2_mm"):
        if cfg.get(key) is None:
            raise UsageError(f"missing plate thickness: --{key.split('_')[0]} (or '{key}' in config)")
    try:
        return ProtocolSpec.from_dict(cfg)
    except (TomographyError, ValueError, TypeError) as exc:
        raise UsageError(f"invalid protocol: {exc}") from exc


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


def _state_from(text, alpha_deg, cfg) -> PureQuquart | None:
    if text is not None:
        if isinstance(text, dict):
            return PureQuquart.from_dict(text)
        return parse_state(str(text))
    if alpha_deg is not None:
        return prepare_product_state(
            PREPARATION_PLATE_MM,
            _degrees(float(alpha_deg)),
            float(cfg["lambda_s_nm"]),
            float(cfg["lambda_i_nm"]),
            DispersionModel.from_config(cfg.get("dispersion")),
        )
    return None


def cmd_protocol(cfg: dict) -> int:
    spec = _spec_from_config(cfg)
    out = Path(cfg["out"])
    x = instrument_matrix(spec)
    report = completeness(b_matrix(x))
    _write(out, "protocol.json", spec.to_json() + "\n")
    _write(out, "completeness.csv", report.to_csv())
    print(f"settings={spec.m} rank={report.rank} ratio={report.ratio:.6g} complete={str(report.complete).lower()}")
    return 0 if report.complete else 1


def cmd_scan(cfg: dict) -> int:
    kind = cfg["kind"]
    if kind not in ("ratio", "loss"):
        raise UsageError(f"--kind must be ratio or loss, got {kind!r}")
    step = cfg.get("step")
    if step is None:
        step = MAP_H1_RANGE[2] if kind == "ratio" else LOSS_STEP_MM
    try:
        h1_range = (float(cfg["h1_range"][0]), float(cfg["h1_range"][1]), float(step))
        h2_range = (float(cfg["h2_range"][0]), float(cfg["h2_range"][1]), float(step))
    except (TypeError, ValueError, IndexError) as exc:
        raise UsageError(f"bad ranges: {exc}") from exc
    if not step > 0 or h1_range[1] < h1_range[0] or h2_range[1] < h2_range[0] or min(h1_range[0], h2_range[0]) <= 0:
        raise UsageError("ranges need 0 < min <= max and step > 0")
    dispersion = DispersionModel.from_config(cfg.get("dispersion"))
    wavelengths = (float(cfg["lambda_s_nm"]), float(cfg["lambda_i_nm"]))
    threads = int(cfg["threads"])
    if kind == "ratio":
        grid = scan_ratio(h1_range, h2_range, None, wavelengths, dispersion, threads=threads)
    else:
        state = _state_from(cfg.get("state"), None, cfg) or basis_state(3)
        if int(cfg["events"]) <= 0 or int(cfg["trials"]) < 1:
            raise UsageError("--events must be positive and --trials at least 1")
        grid = scan_info_loss(
            h1_range, h2_range, None, state, int(cfg["events"]), int(cfg["trials"]), int(cfg["seed"]),
            wavelengths, dispersion, threads=threads,
        )
    out = Path(cfg["out"])
    _write(out, f"scan_{kind}.csv", grid.to_csv())
    _write(out, f"scan_{kind}.json", grid.metadata_json() + "\n")
    h1, h2, value = find_optimum(grid)
    print(f"h1={h1:.6g} h2={h2:.6g} value={value:.6g}")
    return 0


def _load_protocol(path) -> ProtocolSpec:
    try:
        return ProtocolSpec.from_json(Path(path).read_text())
    except (OSError, json.JSONDecodeError, TomographyError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot load protocol {path}: {exc}") from exc


def cmd_simulate(cfg: dict) -> int:
    spec = _load_protocol(cfg["protocol"]) if cfg.get("protocol") else _spec_from_config(cfg)
    try:
        state = _state_from(cfg.get("state"), cfg.get("prepare_alpha_deg"), cfg)
    except (TomographyError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"malformed state: {exc}") from exc
    if state is None:
        raise UsageError("provide the true state with --state or --prepare-alpha")
    events = int(cfg["events"])
    if events <= 0:
        raise UsageError(f"--events must be positive, got {events}")
    ds = run_virtual_experiment(state, spec, events, int(cfg["seed"]))
    if cfg.get("singles") is not None:
        if cfg.get("exposure_s") is None:
            raise UsageError("--singles needs --exposure")
        n1, n2 = cfg["singles"]
        ds = subtract_accidentals(ds, float(n1), float(n2), float(cfg["window_s"]), float(cfg["exposure_s"]))
    out = Path(cfg["out"])
    _write(out, "protocol.json", spec.to_json() + "\n")
    _write(out, "counts.csv", ds.to_csv(spec))
    meta = json.loads(sidecar_json(ds))
    meta["true_state"] = state.to_dict()
    _write(out, "counts.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"settings={spec.m} total_counts={int(ds.counts.sum())} seed={ds.seed}")
    return 0


def cmd_reconstruct(cfg: dict) -> int:
    if not cfg.get("counts") or not cfg.get("protocol"):
        raise UsageError("reconstruct needs --counts and --protocol")
    spec = _load_protocol(cfg["protocol"])
    counts_path = Path(cfg["counts"])
    try:
        counts = read_counts_csv(counts_path.read_text())
    except (OSError, TomographyError, ValueError) as exc:
        raise UsageError(f"cannot read counts {counts_path}: {exc}") from exc
    if counts.size != spec.m:
        raise UsageError(f"counts file has {counts.size} settings, protocol has {spec.m}")
    sidecar = counts_path.with_suffix(".json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        if meta.get("spec_hash") not in (None, spec.spec_hash()):
            raise UsageError(f"counts were recorded with protocol {meta['spec_hash']}, not {spec.spec_hash()}")
    try:
        reference = _state_from(cfg.get("reference"), cfg.get("reference_alpha_deg"), cfg)
    except (TomographyError, ValueError) as exc:
        raise UsageError(f"malformed reference state: {exc}") from exc
    try:
        result = mle_reconstruct(instrument_matrix(spec), counts, MLEOptions(seed=int(cfg["seed"])))
    except NoCounts as exc:
        print(f"error: NoCounts: {exc}", file=sys.stderr)
        return 1
    _write(Path(cfg["out"]), "result.json", json.dumps(result.to_dict(reference), indent=2, sort_keys=True) + "\n")
    if reference is not None:
        print(f"fidelity={fidelity(result.estimate, reference):.6f}")
    if not result.converged:
        print("error: NotConverged: maximum iterations reached", file=sys.stderr)
        return 1
    if not result.identifiable:
        print("error: protocol is incomplete; estimate is ambiguous", file=sys.stderr)
        return 1
    return 0


COMMANDS = {
    "protocol": cmd_protocol,
    "scan": cmd_scan,
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        log.info("resolved config: %s", json.dumps(cfg, sort_keys=True, default=str))
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except TomographyError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
