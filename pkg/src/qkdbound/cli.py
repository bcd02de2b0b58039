"""Command-line harness: parameter sweeps, simulation runs and counts-file bounding.

Subcommands:
  sweep     evaluate key rates over a (protocol, loss, imperfection) grid -> CSV
  simulate  run the seeded Monte Carlo protocol -> versioned counts document
  bound     apply the bound pipeline to a counts document -> report

Configuration precedence is command line > config file (JSON) > defaults;
defaults follow the standard benchmark parameters (delta=0.063, Delta=0.03,
p_d=1e-8, f=1.16). Exit codes: 0 success, 2 configuration error, 3 I/O error,
4 computation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import Dict, List, Optional, Sequence, Tuple

from . import __version__
from .bounds import (
    EmptySiftedKey,
    ObservedStatistics,
    TagCounts,
    evaluate_point,
)
from .coeffs import SingularSystem
from .simulator import (
    CHANNEL_MODEL_ID,
    ChannelParams,
    RunConfig,
    simulate_asymptotic,
    simulate_finite,
)
from .source import (
    ProtocolProbs,
    SETTINGS_BB84,
    SETTINGS_THREE_STATE,
    SourceSpec,
)

COUNTS_SCHEMA = "qkdbound-counts/1"
RNG_ID = "numpy-default-rng-pcg64"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_COMPUTE = 4


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class IoError(OSError):
    """Input/output failure with a user-supplied path."""


class SchemaError(ConfigError):
    """Counts document does not match the expected schema."""


# ---------------------------------------------------------------------------
# Configuration plumbing.

_DEFAULTS = {
    "protocol": "bb84",
    "loss_start": 0.0,
    "loss_end": 60.0,
    "loss_step": 5.0,
    "epsilon_u": [0.0],
    "delta": [0.063],
    "cap_delta": [0.03],
    "lc": [0],
    "pd": 1e-8,
    "f": 1.16,
    "mode": "asymptotic",
    "n": 1_000_000,
    "seed": 1,
    "loss_db": 20.0,
}


def _float_list(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {text!r}: {exc}") from exc


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad integer list {text!r}: {exc}") from exc


def _load_config_file(path: Optional[str]) -> Dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path}: top level must be an object")
    unknown = set(data) - set(_DEFAULTS)
    if unknown:
        raise ConfigError(f"config file {path}: unknown fields {sorted(unknown)}")
    return data


def _resolve(args: argparse.Namespace) -> Dict:
    """Merge CLI flags over config-file values over defaults."""
    cfg = dict(_DEFAULTS)
    cfg.update(_load_config_file(getattr(args, "config", None)))
    for key in _DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    for key in ("epsilon_u", "delta", "cap_delta", "lc"):
        if not isinstance(cfg[key], list):
            cfg[key] = [cfg[key]]
        if not cfg[key]:
            raise ConfigError(f"{key} list must be nonempty")
    for key in ("epsilon_u", "delta", "cap_delta"):
        cfg[key] = [float(v) for v in cfg[key]]
    cfg["lc"] = [int(v) for v in cfg["lc"]]
    if cfg["protocol"] not in ("bb84", "three-state", "both"):
        raise ConfigError(f"unknown protocol {cfg['protocol']!r}")
    if cfg["mode"] not in ("asymptotic", "finite"):
        raise ConfigError(f"unknown mode {cfg['mode']!r}")
    if cfg["loss_step"] <= 0:
        raise ConfigError("loss step must be positive")
    if cfg["loss_end"] < cfg["loss_start"]:
        raise ConfigError("empty loss grid: end before start")
    return cfg


def _loss_grid(cfg: Dict) -> List[float]:
    grid = []
    loss = cfg["loss_start"]
    # inclusive endpoint with float-noise slack of half a step
    while loss <= cfg["loss_end"] + cfg["loss_step"] * 0.5:
        grid.append(round(loss, 12))
        loss += cfg["loss_step"]
    if not grid:
        raise ConfigError("empty loss grid")
    return grid


def _protocols(cfg: Dict) -> List[str]:
    if cfg["protocol"] == "both":
        return ["bb84", "three_state"]
    return [cfg["protocol"].replace("-", "_")]


def _default_probs(protocol: str) -> ProtocolProbs:
    settings = SETTINGS_BB84 if protocol == "bb84" else SETTINGS_THREE_STATE
    return ProtocolProbs.uniform(settings)


def _open_out(path: Optional[str]):
    if path is None or path == "-":
        return sys.stdout, False
    try:
        return open(path, "w", encoding="utf-8", newline=""), True
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _sci(x: float) -> str:
    return f"{x:.8e}"


# ---------------------------------------------------------------------------
# sweep

def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    losses = _loss_grid(cfg)
    rows = []
    for protocol in _protocols(cfg):
        probs = _default_probs(protocol)
        for loss in losses:
            for eps in cfg["epsilon_u"]:
                for delta in cfg["delta"]:
                    for cap in cfg["cap_delta"]:
                        for lc in cfg["lc"]:
                            spec = SourceSpec(delta=delta, Delta=cap,
                                              epsilon_u=eps,
                                              correlation_length=lc)
                            ch = ChannelParams(loss_db=loss, p_d=cfg["pd"],
                                               f=cfg["f"])
                            if cfg["mode"] == "asymptotic":
                                stats = simulate_asymptotic(
                                    spec, probs, ch, protocol=protocol)
                            else:
                                run = RunConfig(
                                    n=int(cfg["n"]),
                                    seed=int(cfg["seed"]) + len(rows),
                                    l_c=lc, protocol=protocol, probs=probs)
                                stats = simulate_finite(run, spec, ch)
                            report = evaluate_point(stats, probs, spec,
                                                    protocol, cfg["f"])
                            rows.append((
                                protocol, loss, eps, delta, cap, lc,
                                report.y_z, report.e_bit, report.e_ph_u,
                                report.rate))
    out, should_close = _open_out(args.out)
    try:
        out.write(f"# qkdbound {__version__} sweep\n")
        out.write(f"# channel_model: {CHANNEL_MODEL_ID}\n")
        out.write(f"# mode: {cfg['mode']}\n")
        if cfg["mode"] == "finite":
            out.write(f"# n: {cfg['n']} base_seed: {cfg['seed']} rng: {RNG_ID}\n")
        out.write(f"# pd: {cfg['pd']!r} f: {cfg['f']!r}\n")
        writer = csv.writer(out)
        writer.writerow(["protocol", "loss_db", "epsilon_u", "delta", "Delta",
                         "l_c", "Y_Z", "e_bit", "e_ph_u", "rate"])
        for row in rows:
            writer.writerow(list(row[:6]) + [_sci(v) for v in row[6:]])
    finally:
        if should_close:
            out.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate

def _counts_document(cfg: Dict, protocol: str, spec: SourceSpec,
                     ch: ChannelParams, probs: ProtocolProbs,
                     stats: ObservedStatistics) -> Dict:
    return {
        "schema": COUNTS_SCHEMA,
        "generator": RNG_ID,
        "channel_model": CHANNEL_MODEL_ID,
        "protocol": protocol,
        "mode": "finite",
        "n": stats.n,
        "seed": int(cfg["seed"]),
        "l_c": int(cfg["lc"][0]),
        "probs": {"p_za": probs.p_za, "p_zb": probs.p_zb, "p_j": probs.p_j},
        "source": {"delta": spec.delta, "Delta": spec.Delta,
                   "epsilon_u": spec.epsilon_u,
                   "correlation_length": spec.correlation_length},
        "channel": {"loss_db": ch.loss_db, "p_d": ch.p_d,
                    "theta_mis": ch.theta_mis, "f": ch.f},
        "per_tag": [
            {"w": t.w, "n_w": t.n_w,
             "n_x": {j: list(t.n_x[j]) for j in t.n_x},
             "n_det_z": t.n_det_z, "n_err_z": t.n_err_z}
            for t in stats.per_tag
        ],
    }


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    if cfg["protocol"] == "both":
        raise ConfigError("simulate needs a single protocol, not 'both'")
    protocol = _protocols(cfg)[0]
    probs = _default_probs(protocol)
    lc = int(cfg["lc"][0])
    spec = SourceSpec(delta=cfg["delta"][0], Delta=cfg["cap_delta"][0],
                      epsilon_u=cfg["epsilon_u"][0], correlation_length=lc)
    ch = ChannelParams(loss_db=cfg["loss_db"], p_d=cfg["pd"], f=cfg["f"])
    run = RunConfig(n=int(cfg["n"]), seed=int(cfg["seed"]), l_c=lc,
                    protocol=protocol, probs=probs)
    stats = simulate_finite(run, spec, ch)
    doc = _counts_document(cfg, protocol, spec, ch, probs, stats)
    out, should_close = _open_out(args.out)
    try:
        json.dump(doc, out, indent=2, sort_keys=True)
        out.write("\n")
    finally:
        if should_close:
            out.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# bound

def _require(doc: Dict, key: str):
    if key not in doc:
        raise SchemaError(f"counts document missing field {key!r}")
    return doc[key]


def load_counts(path: str) -> Tuple[Dict, ObservedStatistics, ProtocolProbs]:
    """Parse and validate a counts document; rebuild the statistics."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read counts file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} line {exc.lineno}: {exc.msg}") from exc
    if _require(doc, "schema") != COUNTS_SCHEMA:
        raise SchemaError(f"unsupported schema {doc['schema']!r}")
    p = _require(doc, "probs")
    probs = ProtocolProbs(p_za=_require(p, "p_za"), p_zb=_require(p, "p_zb"),
                          p_j=dict(_require(p, "p_j")))
    per_tag = [
        TagCounts(w=int(_require(t, "w")), n_w=int(_require(t, "n_w")),
                  n_x={j: (int(v[0]), int(v[1]))
                       for j, v in _require(t, "n_x").items()},
                  n_det_z=int(_require(t, "n_det_z")),
                  n_err_z=int(_require(t, "n_err_z")))
        for t in _require(doc, "per_tag")
    ]
    if not per_tag:
        raise SchemaError("counts document has no tag blocks")
    settings = set(per_tag[0].n_x)
    totals = {j: (sum(t.n_x[j][0] for t in per_tag),
                  sum(t.n_x[j][1] for t in per_tag)) for j in settings}
    stats = ObservedStatistics.from_counts(
        n=int(_require(doc, "n")), n_x=totals,
        n_det_z=sum(t.n_det_z for t in per_tag),
        n_err_z=sum(t.n_err_z for t in per_tag),
        probs=probs, per_tag=per_tag)
    return doc, stats, probs


def cmd_bound(args: argparse.Namespace) -> int:
    doc, stats, probs = load_counts(args.counts)
    src = _require(doc, "source")
    spec = SourceSpec(delta=src["delta"], Delta=src["Delta"],
                      epsilon_u=src["epsilon_u"],
                      correlation_length=src["correlation_length"])
    protocol = _require(doc, "protocol")
    f = _require(doc, "channel")["f"]
    report = evaluate_point(stats, probs, spec, protocol, f)
    lines = [
        f"protocol: {protocol}",
        f"Y_Z:    {_sci(report.y_z)}",
        f"e_bit:  {_sci(report.e_bit)}",
        f"e_ph_u: {_sci(report.e_ph_u)}",
        f"rate:   {_sci(report.rate)}",
    ]
    if report.e_ph_u_per_tag is not None:
        for w, e in enumerate(report.e_ph_u_per_tag):
            lines.append(f"e_ph_u[tag {w}]: {_sci(e)}")
    text = "\n".join(lines) + "\n"
    out, should_close = _open_out(args.out)
    try:
        out.write(text)
    finally:
        if should_close:
            out.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing / entry point

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--protocol", choices=["bb84", "three-state", "both"])
    p.add_argument("--epsilon-u", dest="epsilon_u", type=_float_list,
                   help="comma-separated list of side-channel weights")
    p.add_argument("--delta", type=_float_list,
                   help="systematic phase deviation(s), radians")
    p.add_argument("--cap-delta", dest="cap_delta", type=_float_list,
                   help="phase fluctuation half-width(s) Delta, radians")
    p.add_argument("--lc", type=_int_list, help="correlation length(s)")
    p.add_argument("--pd", type=float, help="dark-count probability")
    p.add_argument("--f", type=float, help="error-correction efficiency")
    p.add_argument("--mode", choices=["asymptotic", "finite"])
    p.add_argument("--n", type=int, help="rounds per finite run")
    p.add_argument("--seed", type=int, help="RNG seed (finite mode)")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", help="output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qkdbound",
        description="Secret-key-rate lower bounds for qubit QKD with "
                    "imperfect sources")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="key rates over a parameter grid (CSV)")
    p.add_argument("--loss-start", dest="loss_start", type=float)
    p.add_argument("--loss-end", dest="loss_end", type=float)
    p.add_argument("--loss-step", dest="loss_step", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="seeded protocol run (counts document)")
    p.add_argument("--loss-db", dest="loss_db", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bound", help="bound a counts document")
    p.add_argument("counts", help="counts document (JSON)")
    p.add_argument("--out", help="output path (default stdout)")
    p.set_defaults(func=cmd_bound)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, (SingularSystem, EmptySiftedKey)):
            print(f"computation error: {exc}", file=sys.stderr)
            return EXIT_COMPUTE
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ArithmeticError as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
