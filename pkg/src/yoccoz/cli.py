"""Command-line surface: portrait / verify / moduli / plot.

All JSON output is deterministic for a fixed configuration: keys are
sorted, floats are printed at 17 significant digits, and no timestamps or
environment data enter the documents.  CSV and SVG are derived artifacts.

Exit codes: 0 success, 2 usage or invalid input, 3 numeric failure,
4 hypothesis (bounded combinatorics) not satisfied.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import sys
from pathlib import Path
from typing import Optional

from .angles import Angle, PortraitError, validate_portrait
from .dynamics import QuadraticMap, find_center
from .modulus import (
    HypothesisFailure,
    bigon_distance,
    piece_modulus,
    transfer_default_configuration,
    transfer_report,
)
from .puzzle import PuzzleError, build_puzzle
from .registry import run_verification
from .renorm import (
    NotSatisfied,
    alpha_puzzle,
    build_nest,
    find_dividing_cycles,
    molecule_check,
)

USAGE_ERROR, NUMERIC_ERROR, HYPOTHESIS_ERROR = 2, 3, 4


def format_float(x: float) -> str:
    if x != x:
        return "NaN"
    if x in (float("inf"), float("-inf")):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    return format(x, ".17g")


def dump_json(obj, indent: int = 0) -> str:
    """Deterministic JSON: sorted keys, 17 significant digits for floats."""
    pad = " " * indent
    if isinstance(obj, dict):
        items = ",\n".join(
            f'{pad}  "{k}": {dump_json(obj[k], indent + 2).lstrip()}' for k in sorted(obj)
        )
        return f"{pad}{{\n{items}\n{pad}}}" if obj else f"{pad}{{}}"
    if isinstance(obj, (list, tuple)):
        items = ",\n".join(f"{pad}  {dump_json(v, indent + 2).lstrip()}" for v in obj)
        return f"{pad}[\n{items}\n{pad}]" if len(obj) else f"{pad}[]"
    if isinstance(obj, bool):
        return pad + ("true" if obj else "false")
    if obj is None:
        return pad + "null"
    if isinstance(obj, float):
        return pad + format_float(obj)
    if isinstance(obj, int):
        return pad + str(obj)
    if isinstance(obj, complex):
        return pad + f"[{format_float(obj.real)}, {format_float(obj.imag)}]"
    s = str(obj).replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
    return f'{pad}"{s}"'


def _parse_complex(s: str) -> complex:
    if "," in s:
        re_s, im_s = s.split(",", 1)
        return complex(float(re_s), float(im_s))
    return complex(float(s), 0.0)


def _parse_bounds(s: str) -> tuple[int, int, int]:
    parts = [int(x) for x in s.split(",")]
    if len(parts) != 3:
        raise ValueError("bounds must be R,Q,N")
    return tuple(parts)  # type: ignore[return-value]


def load_config_file(path: str) -> dict:
    """key=value configuration lines; '#' starts a comment."""
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line: {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


class RunConfig:
    """Resolved run parameters; flags override the config file."""

    def __init__(self, args):
        file_cfg = load_config_file(args.config) if getattr(args, "config", None) else {}

        def pick(flag_name, file_key, default, conv):
            v = getattr(args, flag_name, None)
            if v is not None:
                return v if not isinstance(v, str) else conv(v)
            if file_key in file_cfg:
                return conv(file_cfg[file_key])
            return default

        self.c = pick("c", "c", None, _parse_complex)
        self.bounds = pick("bounds", "bounds", (4, 4, 4), _parse_bounds)
        self.max_depth = int(pick("max_depth", "max_depth", 16, int))
        self.resolution = int(pick("resolution", "resolution", 512, int))
        self.landing_tol = float(pick("landing_tol", "landing_tol", 1e-8, float))
        self.cluster_tol = float(pick("cluster_tol", "cluster_tol", 1e-6, float))
        self.newton_tol = float(pick("newton_tol", "newton_tol", 1e-12, float))
        self.out_dir = pick("out", "out", None, str)
        self.seed_grid = int(pick("seed_grid", "seed_grid", 8, int))
        self.max_time = int(pick("max_time", "max_time", 4096, int))
        if not (self.resolution and 64 <= self.resolution <= 4096 and (self.resolution & (self.resolution - 1)) == 0):
            raise ValueError("resolution must be a power of two between 64 and 4096")
        for t in (self.landing_tol, self.cluster_tol, self.newton_tol):
            if not t > 0:
                raise ValueError("tolerances must be positive")

    def map(self) -> QuadraticMap:
        if self.c is None:
            raise ValueError("parameter c is required (--c RE,IM)")
        return QuadraticMap(self.c, newton_tol=self.newton_tol)

    def to_json_dict(self) -> dict:
        return {
            "c": None if self.c is None else [self.c.real, self.c.imag],
            "bounds": list(self.bounds),
            "max_depth": self.max_depth,
            "resolution": self.resolution,
            "landing_tol": self.landing_tol,
            "cluster_tol": self.cluster_tol,
            "newton_tol": self.newton_tol,
            "seed_grid": self.seed_grid,
            "max_time": self.max_time,
        }

    def digest(self) -> str:
        return hashlib.sha256(dump_json(self.to_json_dict()).encode()).hexdigest()[:16]


class _Out:
    """Output sink: stdout by default, files under --out with a manifest."""

    def __init__(self, out_dir: Optional[str]):
        self.dir = Path(out_dir) if out_dir else None
        self.files: list[str] = []
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def emit(self, name: str, text: str, to_stdout: bool = False):
        if self.dir:
            (self.dir / name).write_text(text)
            self.files.append(name)
        if to_stdout or not self.dir:
            sys.stdout.write(text if text.endswith("\n") else text + "\n")

    def finish(self, config: RunConfig):
        if self.dir:
            manifest = {"config": config.to_json_dict(), "config_hash": config.digest(), "files": sorted(self.files)}
            (self.dir / "manifest.json").write_text(dump_json(manifest) + "\n")


def cmd_portrait(args) -> int:
    try:
        if args.angles:
            try:
                classes = [[Angle(a) for a in cl.split(",") if a] for cl in args.angles.split(";")]
                portrait = validate_portrait(classes)
            except (PortraitError, ValueError, ZeroDivisionError) as e:
                sys.stdout.write(dump_json({"error": str(e), "type": type(e).__name__}) + "\n")
                return USAGE_ERROR
            sys.stdout.write(dump_json(portrait.to_json_dict()) + "\n")
            return 0
        if args.c is not None and args.period:
            m = QuadraticMap(_parse_complex(args.c))
            found = find_dividing_cycles(m, args.period)
            doc = {
                "c": [m.c.real, m.c.imag],
                "cycles": [
                    {
                        "portrait": portrait.to_json_dict(),
                        "point": [pp.location.real, pp.location.imag],
                        "period": pp.period,
                        "multiplier_abs": abs(pp.multiplier),
                    }
                    for pp, portrait in found
                ],
            }
            sys.stdout.write(dump_json(doc) + "\n")
            return 0
        sys.stderr.write("portrait: give --angles or --c with --period\n")
        return USAGE_ERROR
    except (PuzzleError, NotSatisfied) as e:
        sys.stdout.write(dump_json({"error": str(e), "type": type(e).__name__}) + "\n")
        return NUMERIC_ERROR


def cmd_verify(args) -> int:
    try:
        config = RunConfig(args)
        m = config.map()
    except ValueError as e:
        sys.stderr.write(f"verify: {e}\n")
        return USAGE_ERROR
    out = _Out(config.out_dir)
    try:
        report = run_verification(m, config.bounds, max_time=config.max_time)
    except PuzzleError as e:
        sys.stdout.write(dump_json({"error": str(e), "type": type(e).__name__}) + "\n")
        return NUMERIC_ERROR
    doc = report.to_json_dict()
    doc["config_hash"] = config.digest()
    out.emit("verify.json", dump_json(doc) + "\n", to_stdout=True)
    if config.out_dir and report.decision.satisfied:
        from .svgplot import julia_puzzle_svg

        data = report.decision.witness
        puz = alpha_puzzle(m, data)
        marks = {"a": data.alpha_point.location, "a'": -data.alpha_point.location}
        out.emit("puzzle.svg", julia_puzzle_svg(puz, min(4, config.max_depth), marks))
    out.finish(config)
    return 0


def _moduli_table(config: RunConfig) -> dict:
    m = config.map()
    decision = molecule_check(m, config.bounds)
    if not decision.satisfied:
        raise NotSatisfied("molecule", decision.reason or "not satisfied")
    data = decision.witness
    puz = alpha_puzzle(m, data, max_depth=max(config.max_depth, data.lam + 2))
    nest = build_nest(m, data, max_time=config.max_time, puzzle=puz)
    rows = []
    for i in range(len(nest.levels) - 1):
        est = piece_modulus(puz, nest.levels[i], nest.levels[i + 1], config.resolution)
        rows.append(
            {
                "pair": f"E{i}/E{i + 1}",
                "value": est.value,
                "refinement_delta": est.refinement_delta,
                "resolution": est.resolution,
            }
        )
    if nest.terminated:
        proxy = nest.little_julia_proxy()
        est = piece_modulus(puz, nest.levels[-1], proxy, config.resolution)
        rows.append(
            {
                "pair": f"E{len(nest.levels) - 1}/K_proxy",
                "value": est.value,
                "refinement_delta": est.refinement_delta,
                "resolution": est.resolution,
            }
        )
    bigon_piece = puz.critical_piece(1).at_equipotential(min(3, data.nest_base_depth))
    alpha = data.alpha_point.location
    big = bigon_distance(puz, bigon_piece, alpha, -alpha, config.resolution)
    transfer: dict = {}
    try:
        Y, Z, times = transfer_default_configuration(puz, data, nest)
        transfer = transfer_report(m, data, nest, puz, Y, Z, times, resolution=config.resolution)
    except HypothesisFailure as e:
        transfer = {"hypothesis_failure": str(e), "bullet": e.bullet}
    return {
        "c": [m.c.real, m.c.imag],
        "bounds": list(config.bounds),
        "parameters": data.to_json_dict(),
        "nest": {
            "height_chi": nest.height_chi,
            "return_times": nest.return_times,
            "level_depths": [p.depth for p in nest.levels],
            "terminated": nest.terminated,
        },
        "moduli": rows,
        "bigon_distance": big.to_json_dict(),
        "transfer": transfer,
        "label": "all moduli are plane-domain approximations",
    }


def _moduli_csv(doc: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["pair", "value", "refinement_delta", "resolution"])
    for row in doc["moduli"]:
        w.writerow([row["pair"], format(row["value"], ".17g"),
                    format(row["refinement_delta"], ".17g"), row["resolution"]])
    b = doc["bigon_distance"]
    w.writerow(["bigon_distance", format(b["value"], ".17g"),
                format(b["refinement_delta"], ".17g"), b["resolution"]])
    return buf.getvalue()


def cmd_moduli(args) -> int:
    try:
        config = RunConfig(args)
        config.map()
    except ValueError as e:
        sys.stderr.write(f"moduli: {e}\n")
        return USAGE_ERROR
    out = _Out(config.out_dir)
    try:
        doc = _moduli_table(config)
    except NotSatisfied as e:
        sys.stderr.write(f"moduli: molecule condition not satisfied: {e}\n")
        return HYPOTHESIS_ERROR
    except (PuzzleError, HypothesisFailure) as e:
        sys.stdout.write(dump_json({"error": str(e), "type": type(e).__name__}) + "\n")
        return NUMERIC_ERROR
    doc["config_hash"] = config.digest()
    out.emit("moduli.json", dump_json(doc) + "\n", to_stdout=True)
    out.emit("moduli.csv", _moduli_csv(doc))
    out.finish(config)
    return 0


def cmd_plot(args) -> int:
    try:
        config = RunConfig(args)
    except ValueError as e:
        sys.stderr.write(f"plot: {e}\n")
        return USAGE_ERROR
    out = _Out(config.out_dir)
    wrote = False
    try:
        if args.molecule:
            from .svgplot import molecule_svg

            out.emit("molecule.svg", molecule_svg(args.period_bound or 6))
            wrote = True
        if args.julia:
            from .svgplot import julia_puzzle_svg

            m = config.map()
            depth = args.puzzle_depth if args.puzzle_depth is not None else 2
            decision = molecule_check(m, config.bounds)
            if decision.satisfied:
                puz = alpha_puzzle(m, decision.witness)
                marks = {
                    "a": decision.witness.alpha_point.location,
                    "a'": -decision.witness.alpha_point.location,
                }
            else:
                cycles = find_dividing_cycles(m, max(2, config.bounds[0]))
                if not cycles:
                    sys.stderr.write("plot: no dividing cycle to draw the puzzle from\n")
                    return HYPOTHESIS_ERROR
                puz = build_puzzle(m, cycles[0][1])
                marks = {}
            out.emit("julia.svg", julia_puzzle_svg(puz, depth, marks))
            wrote = True
    except (PuzzleError, ValueError) as e:
        sys.stderr.write(f"plot: {e}\n")
        return NUMERIC_ERROR
    if not wrote:
        sys.stderr.write("plot: nothing to draw (use --julia and/or --molecule)\n")
        return USAGE_ERROR
    out.finish(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="yoccoz",
        description="Puzzles, bounded renormalization combinatorics, and "
        "discrete conformal moduli for quadratic polynomials",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--c", help="parameter as RE,IM (or a real number)")
    common.add_argument("--bounds", type=_parse_bounds, help="R,Q,N combinatorics bounds")
    common.add_argument("--max-depth", dest="max_depth", type=int)
    common.add_argument("--resolution", type=int)
    common.add_argument("--out", dest="out")
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--landing-tol", dest="landing_tol", type=float)
    common.add_argument("--cluster-tol", dest="cluster_tol", type=float)
    common.add_argument("--newton-tol", dest="newton_tol", type=float)
    common.add_argument("--max-time", dest="max_time", type=int)
    common.add_argument("--seed-grid", dest="seed_grid", type=int)

    p = sub.add_parser("portrait", parents=[common], help="validate or compute ray portraits")
    p.add_argument("--angles", help='classes as "1/3,2/3;..." (semicolon separated)')
    p.add_argument("--period", type=int, help="search dividing cycles up to this period")
    p.set_defaults(func=cmd_portrait)

    v = sub.add_parser("verify", parents=[common], help="run the structural check registry")
    v.set_defaults(func=cmd_verify)

    mo = sub.add_parser("moduli", parents=[common], help="nest moduli and inequality tables")
    mo.set_defaults(func=cmd_moduli)

    pl = sub.add_parser("plot", parents=[common], help="emit SVG pictures")
    pl.add_argument("--julia", action="store_true")
    pl.add_argument("--molecule", action="store_true")
    pl.add_argument("--puzzle-depth", dest="puzzle_depth", type=int)
    pl.add_argument("--period-bound", dest="period_bound", type=int)
    pl.set_defaults(func=cmd_plot)
    return ap


def _merge_negative_values(argv: list[str]) -> list[str]:
    """Join `--c -1.75,0` into `--c=-1.75,0` so argparse does not read the
    negative number as an option."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok == "--c" and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"--c={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv: Optional[list[str]] = None) -> int:
    ap = build_parser()
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        args = ap.parse_args(_merge_negative_values(argv))
    except SystemExit as e:
        return USAGE_ERROR if e.code not in (0, None) else 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
