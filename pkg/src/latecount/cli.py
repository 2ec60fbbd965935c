"""Command-line entry point.

Subcommands::

    latecount run       full three-prong report (JSON) plus optional choropleth CSV
    latecount sweep     parameter sweep of E[h] and E[gh] for one scope unit (CSV)
    latecount fairwin   prong-1 probability for given half-time counts
    latecount synth     write the synthetic fixture CSVs

Exit codes: 0 success, 1 data error, 2 config error, 3 numeric degeneracy.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, synthetic
from .analysis import (
    COUNTRY,
    Inputs,
    RunConfig,
    emit_choropleth,
    emit_sweep,
    report_json,
    run_analysis,
    run_sweep,
)
from .errors import ConfigError, DataError, DegenerateError
from .fairwin import fair_win_probability
from .geodata import Placement, load_settlements
from .inference import ResampleMode
from .model import Form

EXIT_OK, EXIT_DATA, EXIT_CONFIG, EXIT_DEGENERATE = 0, 1, 2, 3

log = logging.getLogger("latecount")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _form_list(text: str) -> list[str]:
    names = [v.strip() for v in text.split(",") if v.strip()]
    valid = {f.value for f in Form}
    bad = [n for n in names if n not in valid]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown form(s) {bad}; choose from {sorted(valid)}")
    return names


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latecount", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="three-prong analysis", parents=[common])
    run.add_argument("--config", type=Path, help="JSON config; flags given here override it")
    run.add_argument("--settlements", type=Path)
    run.add_argument("--tallies", type=Path)
    run.add_argument("--nvc", type=_int_list, help="e.g. 1,3,5")
    run.add_argument("--placement", choices=[s.value for s in Placement])
    run.add_argument("--form", type=_form_list, help="comma-separated forms, e.g. linear,exp1")
    run.add_argument("--scope", choices=["per-region", "country", "both"])
    run.add_argument("--mode", choices=[m.value for m in ResampleMode])
    run.add_argument("--sample-size", type=int)
    run.add_argument("--replicates", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--c", type=float, dest="c")
    run.add_argument("--min-population", type=int)
    run.add_argument("--unweighted", action="store_true", help="unweighted share fits")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", type=Path, help="report path (default stdout)")
    run.add_argument("--choropleth", type=Path, help="also write region,nvc,form,p_conjecture CSV")
    run.add_argument("--choropleth-prong", type=int, choices=[2, 3], default=3)

    sw = sub.add_parser("sweep", help="E[h], E[gh] over default parameter grids", parents=[common])
    sw.add_argument("--settlements", type=Path, required=True)
    sw.add_argument("--nvc", type=int, default=1)
    sw.add_argument("--placement", choices=[s.value for s in Placement], default=Placement.TOP_POPULATION.value)
    sw.add_argument("--form", type=_form_list, default=["linear", "exp1", "exp2"])
    sw.add_argument("--region", default=COUNTRY, help="region id, or 'country' (default)")
    sw.add_argument("--points", type=int, default=41)
    sw.add_argument("--out", type=Path)

    fw = sub.add_parser("fairwin", help="prong-1 probability from half-time counts", parents=[common])
    fw.add_argument("v_H", type=int)
    fw.add_argument("v_N", type=int)
    fw.add_argument("--other", type=int, default=0)
    fw.add_argument("--convention", choices=["two-candidate", "raw"], default="two-candidate")

    sy = sub.add_parser("synth", help="write the synthetic fixture", parents=[common])
    sy.add_argument("directory", type=Path)
    sy.add_argument("--seed", type=int, default=synthetic.DEFAULT_SEED)
    return p


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge the JSON config file (if any) with command-line flags; flags win."""
    data: dict = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        base = args.config.parent
        for key in ("settlements_path", "tallies_path"):
            if key in data and not Path(data[key]).is_absolute():
                data[key] = str(base / data[key])
    plan = dict(data.get("plan") or {})
    overrides = {
        "settlements_path": args.settlements,
        "tallies_path": args.tallies,
        "nvc": args.nvc,
        "placement": args.placement,
        "forms": args.form,
        "scope": args.scope,
        "c": args.c,
        "min_population": args.min_population,
    }
    for key, value in overrides.items():
        if value is not None:
            data[key] = str(value) if isinstance(value, Path) else value
    if args.unweighted:
        data["weighted"] = False
    for key, value in (("mode", args.mode), ("sample_size", args.sample_size),
                       ("replicates", args.replicates), ("seed", args.seed)):
        if value is not None:
            plan[key] = value
    if plan:
        data["plan"] = plan
    return RunConfig.from_dict(data)


def _write(text: str, dest: Optional[Path]) -> None:
    if dest is None:
        sys.stdout.write(text)
    else:
        dest.write_text(text, encoding="utf-8")


def _cmd_run(args) -> int:
    config = build_config(args)
    report = run_analysis(config, workers=args.workers)
    _write(report_json(report), args.out)
    if args.choropleth is not None:
        emit_choropleth(report, "region", args.choropleth_prong, dest=args.choropleth)
    if report["degenerate"]:
        log.error("degenerate distance distributions encountered; see cell notes")
        return EXIT_DEGENERATE
    return EXIT_OK


def _cmd_sweep(args) -> int:
    regions = load_settlements(args.settlements)
    inputs = Inputs(tuple(regions), (), {})
    rows = run_sweep(inputs, args.form, args.nvc, unit=args.region, placement=args.placement, points=args.points)
    _write(emit_sweep(rows), args.out)
    flagged = sum(r.flag for r in rows)
    log.info("%d of %d grid points flagged", flagged, len(rows))
    return EXIT_OK


def _cmd_fairwin(args) -> int:
    p = fair_win_probability(args.v_H, args.v_N, v_other=args.other, convention=args.convention)
    print(json.dumps({"log10": p.log10_value, "value": str(p), "asymptotic": p.asymptotic}))
    return EXIT_OK


def _cmd_synth(args) -> int:
    for path in synthetic.write_fixture(args.directory, seed=args.seed):
        print(path)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    handlers = {"run": _cmd_run, "sweep": _cmd_sweep, "fairwin": _cmd_fairwin, "synth": _cmd_synth}
    try:
        return handlers[args.command](args)
    except DataError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except DegenerateError as exc:
        log.error("numeric degeneracy: %s", exc)
        return EXIT_DEGENERATE
    except ValueError as exc:
        # remaining ValueErrors come from argument values (plan sizes, forms)
        log.error("config error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
