"""Command-line front end: solve | converge | stability-scan | ap-limit.

Options may also come from a key=value config file (same keys as the long
flags); values given on the command line win.  Exit code 0 covers completed
runs including flagged instability demos; bad arguments exit nonzero.
"""

import argparse
import sys

from .harness import MODES, ExperimentSpec, run

_BOOL_KEYS = {"no-bh", "force-dt", "continuum-moments"}


def _parse_list(text, cast):
    items = [s for s in text.replace(" ", "").split(",") if s]
    if not items:
        raise ValueError("empty list")
    return tuple(cast(s) for s in items)


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_config_file(path):
    """Flat key = value file; '#' starts a comment."""
    values = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line without '=': {line!r}")
            key, raw = (part.strip() for part in line.split("=", 1))
            values[key] = raw
    return values


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mmdg",
        description="Kinetic transport solver (micro-macro DG) and experiment drivers",
    )
    sub = parser.add_subparsers(dest="mode", required=True, metavar="|".join(MODES))
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", default=None, help="key=value file with these options")
        p.add_argument("--model", choices=("telegraph", "slab"), default=None)
        p.add_argument("--nv", type=int, default=None, help="velocity nodes (slab, even)")
        p.add_argument("--k", dest="degree", type=int, choices=range(5), default=None)
        p.add_argument("--cells", default=None, help="comma list of cell counts")
        p.add_argument("--eps", default=None, help="comma list of eps values")
        p.add_argument("--dt", default=None, help="time step, or 'auto'")
        p.add_argument("--flux", choices=("alt-lr", "alt-rl", "central"), default=None)
        p.add_argument("--no-bh", action="store_const", const=True, default=None)
        p.add_argument("--safety", type=float, default=None, help="fraction of dt_stab")
        p.add_argument("--c0", type=float, default=None)
        p.add_argument("--tmax", type=float, default=None)
        p.add_argument("--ic", default=None, help="initial condition name")
        p.add_argument("--out", default=None, help="CSV output path")
        p.add_argument(
            "--force-dt",
            action="store_const",
            const=True,
            default=None,
            help="run the given dt even beyond the stable step (instability demos)",
        )
        p.add_argument("--continuum-moments", action="store_const", const=True, default=None)
    return parser


def _merge(cli_value, file_values, key, cast):
    if cli_value is not None:
        return cli_value
    if key in file_values:
        raw = file_values[key]
        if key in _BOOL_KEYS:
            return _parse_bool(raw)
        return cast(raw)
    return None


def build_spec(args):
    file_values = read_config_file(args.config) if args.config else {}
    unknown = set(file_values) - {
        "model", "nv", "k", "cells", "eps", "dt", "flux", "no-bh", "safety",
        "c0", "tmax", "ic", "out", "force-dt", "continuum-moments",
    }
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")

    def pick(cli_value, key, cast=str):
        return _merge(cli_value, file_values, key, cast)

    dt_raw = pick(args.dt, "dt")
    if dt_raw in (None, "auto"):
        dt = None
    else:
        dt = float(dt_raw)
    kwargs = {}
    for key, value in (
        ("model", pick(args.model, "model")),
        ("nv", pick(args.nv, "nv", int)),
        ("degree", pick(args.degree, "k", int)),
        ("cells", pick(args.cells and _parse_list(args.cells, int), "cells",
                       lambda s: _parse_list(s, int))),
        ("eps", pick(args.eps and _parse_list(args.eps, float), "eps",
                     lambda s: _parse_list(s, float))),
        ("flux", pick(args.flux, "flux")),
        ("safety", pick(args.safety, "safety", float)),
        ("c0", pick(args.c0, "c0", float)),
        ("tmax", pick(args.tmax, "tmax", float)),
        ("ic", pick(args.ic, "ic")),
        ("out", pick(args.out, "out")),
    ):
        if value is not None:
            kwargs[key] = value
    no_bh = pick(args.no_bh, "no-bh")
    if no_bh is not None:
        kwargs["include_bh"] = not no_bh
    force_dt = pick(args.force_dt, "force-dt")
    if force_dt is not None:
        kwargs["force_dt"] = force_dt
    continuum = pick(args.continuum_moments, "continuum-moments")
    if continuum is not None:
        kwargs["continuum_moments"] = continuum
    return ExperimentSpec(mode=args.mode, dt=dt, **kwargs).validate()


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = build_spec(args)
        result = run(spec)
    except (ValueError, OSError) as exc:
        print(f"mmdg: error: {exc}", file=sys.stderr)
        return 2
    if result.diverged:
        print(f"instability flagged at step {result.diverge_step}", file=sys.stderr)
    if spec.out:
        print(spec.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
