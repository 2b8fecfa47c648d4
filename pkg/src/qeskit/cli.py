"""Command-line interface: ``qeskit catalog|build|verify|chain|export``.

Exit codes: 0 success, 2 usage/parse/schema error, 3 validation failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Sequence

import jsonschema
import numpy as np

from . import catalog as cat
from . import chains as ch
from . import expr as ex
from . import solver as so
from .grid import Grid
from .smooth import SignSchedule
from .states import NonNormalizableError, QesModel, build_qes_model
from .superpot import GeneratorError, GeneratorSpec, construct, potential, validate_generator

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_VERIFY = 4
SCHEMA_VERSION = 1
GAP_NAMES = ("eps", "eps1", "epsilon", "epsilon1")
CONTINUUM_MARGIN = 1e-3

_POSITIVE = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "qeskit run configuration",
    "type": "object",
    "required": ["schema_version", "generator"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "generator": {
            "type": "object",
            "additionalProperties": False,
            "oneOf": [
                {"required": ["catalog"], "not": {"required": ["expression"]}},
                {"required": ["expression", "epsilon", "epsilon1"], "not": {"required": ["catalog"]}},
            ],
            "properties": {
                "catalog": {"type": "string"},
                "expression": {"type": "string"},
                "epsilon": {"type": "number"},
                "epsilon1": {"type": "number"},
                "params": {"type": "object", "additionalProperties": {"type": "number"}},
                "x0": {"type": "number"},
                "sign_schedule": {
                    "type": "object",
                    "required": ["breaks", "signs"],
                    "additionalProperties": False,
                    "properties": {
                        "breaks": {"type": "array", "items": {"type": "number"}},
                        "signs": {"type": "array", "items": {"enum": [1, -1]}},
                    },
                },
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "half_width": {"anyOf": [_POSITIVE, {"type": "null"}]},
                "points": {"type": "integer", "minimum": 3},
                "adaptive": {"type": "boolean"},
            },
        },
        "verification": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tolerances": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {k: _POSITIVE for k in ("eigenvalue", "zero_mode", "residual", "gram", "overlap")},
                },
                "richardson": {"type": "boolean"},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"format": {"enum": ["csv", "json"]}, "path": {"type": "string"}},
        },
    },
}

MODEL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "qeskit model",
    "type": "object",
    "required": ["schema_version", "kind", "config", "energies", "available", "grid"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "kind": {"const": "model"},
        "config": CONFIG_SCHEMA,
        "energies": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
        "available": {"type": "array", "items": {"enum": [0, 1, 2]}},
        "grid": {
            "type": "object",
            "required": ["half_width", "points"],
            "properties": {"half_width": _POSITIVE, "points": {"type": "integer", "minimum": 3}},
        },
        "validation": {"type": ["object", "null"]},
        "metadata": {"type": "object"},
        "samples": {"type": ["string", "null"]},
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "qeskit verification report",
    "type": "object",
    "required": ["schema_version", "kind", "passed", "verdicts", "eigenvalues"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "kind": {"const": "report"},
        "passed": {"type": "boolean"},
        "verdicts": {"type": "object", "additionalProperties": {"type": "boolean"}},
        "eigenvalues": {"type": "array", "items": {"type": "number"}},
    },
}


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


# -- files ------------------------------------------------------------------------------


def atomic_write(path: str | os.PathLike, text: str) -> Path:
    """Write via a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, data: dict, schema: dict | None = None) -> Path:
    text = json.dumps(data, indent=2, default=_json_default) + "\n"
    if schema is not None:
        jsonschema.validate(json.loads(text), schema)
    return atomic_write(path, text)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def read_json(path, schema: dict) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise CliError(f"no such file: {path}") from None
    except json.JSONDecodeError as err:
        raise CliError(f"{path}: invalid JSON ({err})") from None
    try:
        jsonschema.validate(data, schema)
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise CliError(f"{path}: schema error at {where}: {err.message}") from None
    return data


def samples_csv(columns: dict[str, np.ndarray]) -> str:
    """CSV with a header row and 17 significant digits per value."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
    lines = [",".join(names)]
    lines.extend(",".join(f"{v:.17g}" for v in row) for row in data)
    return "\n".join(lines) + "\n"


def model_columns(model: QesModel) -> dict[str, np.ndarray]:
    cols = {"x": model.grid.x, "V": model.potential}
    for n, s in enumerate(model.states):
        if s is not None:
            cols[f"psi{n}"] = s
    return cols


# -- configuration ----------------------------------------------------------------------


def _assignments(items: Sequence[str]) -> dict[str, float]:
    out = {}
    for item in items:
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise CliError(f"expected name=value, got {item!r}")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise CliError(f"{key}: not a number: {val!r}") from None
    return out


def config_from_args(args) -> dict:
    """RunConfig from --config, a positional catalog name or model file, or --expr."""
    target = getattr(args, "target", None)
    assignments = list(getattr(args, "assign", []) or [])
    if target and "=" in target:
        assignments.insert(0, target)
        target = None
    if args.config:
        cfg = read_json(args.config, CONFIG_SCHEMA)
    elif target and target.endswith(".json"):
        data = read_json(target, {"type": "object"})
        if data.get("kind") == "model":
            cfg = read_json(target, MODEL_SCHEMA)["config"]
        else:
            cfg = read_json(target, CONFIG_SCHEMA)
    elif getattr(args, "expr", None):
        if args.epsilon is None or args.epsilon1 is None:
            raise CliError("--expr needs --epsilon and --epsilon1")
        gen = {"expression": args.expr, "epsilon": args.epsilon, "epsilon1": args.epsilon1, "params": _assignments(assignments)}
        if args.x0 is not None:
            gen["x0"] = args.x0
        cfg = {"schema_version": SCHEMA_VERSION, "generator": gen}
        assignments = []
    elif target:
        cfg = {"schema_version": SCHEMA_VERSION, "generator": {"catalog": target}}
    else:
        raise CliError("nothing to build: give a catalog name, a JSON file, --config or --expr")
    cfg = json.loads(json.dumps(cfg))
    if assignments:
        cfg["generator"].setdefault("params", {}).update(_assignments(assignments))
    grid = cfg.setdefault("grid", {})
    if getattr(args, "grid_points", None) is not None:
        grid["points"] = args.grid_points
    if getattr(args, "half_width", None) is not None:
        grid["half_width"] = args.half_width
    if getattr(args, "tolerance", None) is not None:
        cfg.setdefault("verification", {}).setdefault("tolerances", {})["eigenvalue"] = args.tolerance
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as err:
        raise CliError(f"invalid configuration: {err.message}") from None
    return cfg


def expression_spec(gen: dict) -> GeneratorSpec:
    params = dict(gen.get("params", {}))
    e, e1 = float(gen["epsilon"]), float(gen["epsilon1"])
    try:
        u = ex.parse(gen["expression"], set(params) | set(GAP_NAMES))
    except ex.ExprSyntaxError as err:
        raise CliError(f"cannot parse U: {err}") from None
    bound = {"eps": e, "eps1": e1, "epsilon": e, "epsilon1": e1}
    bound.update(params)
    used = ex.parameters(u)
    extra = {}
    if gen.get("sign_schedule"):
        sched = gen["sign_schedule"]
        extra["sign_schedule"] = SignSchedule(tuple(sched["breaks"]), tuple(sched["signs"]))
    if gen.get("x0") is not None:
        extra["x0"] = gen["x0"]
    try:
        return GeneratorSpec(u, e, e1, {k: bound[k] for k in used}, description=gen["expression"], **extra)
    except (ValueError, GeneratorError) as err:
        raise CliError(str(err), EXIT_VALIDATION) from None


def build_from_config(cfg: dict, force: bool = False, out=None):
    """(validation report or None, QesModel, GeneratorSpec or None) for a RunConfig."""
    out = out or sys.stdout
    gen, grid = cfg["generator"], cfg.get("grid", {})
    points = grid.get("points", 4001)
    if points % 2 == 0:
        raise CliError("grid points must be odd")
    half_width = grid.get("half_width")
    if "catalog" in gen:
        name = gen["catalog"]
        if name not in cat.names():
            raise CliError(f"unknown catalog entry {name!r}; known: {', '.join(cat.names())}")
        try:
            verdict = cat.check_constraints(name, gen.get("params"))
        except cat.CatalogError as err:
            raise CliError(str(err)) from None
        if not verdict.passed and not force:
            print(verdict.describe(), file=out)
            raise CliError(f"{name}: parameter constraints violated", EXIT_VALIDATION)
        spec = None
        try:
            spec, _ = cat.instantiate(name, verdict.params, enforce=not force)
            report, model = cat.build_model(name, verdict.params, points, half_width, enforce=not force, force=force)
        except GeneratorError as err:
            if spec is not None:
                _print_report(spec, out)
            raise CliError(str(err), EXIT_VALIDATION) from None
        except (cat.CatalogError, NonNormalizableError, ValueError) as err:
            raise CliError(str(err), EXIT_VALIDATION) from None
        return report, model, spec
    spec = expression_spec(gen)
    try:
        report, wp, wpt, triple = construct(spec, force=force)
        model = build_qes_model(
            triple, wp, wpt, half_width=half_width, points=points, adaptive=grid.get("adaptive", True),
            metadata={"expression": gen["expression"]},
        )
    except GeneratorError as err:
        _print_report(spec, out)
        raise CliError(str(err), EXIT_VALIDATION) from None
    except (NonNormalizableError, ValueError) as err:
        raise CliError(str(err), EXIT_VALIDATION) from None
    return report, model, spec


def _print_report(spec: GeneratorSpec, out):
    try:
        print(validate_generator(spec).format(), file=out)
    except GeneratorError as err:
        print(f"validation could not run: {err}", file=out)


def tolerances_from(cfg: dict) -> so.Tolerances:
    ver = cfg.get("verification", {})
    return so.Tolerances(**ver.get("tolerances", {}), richardson=ver.get("richardson", True))


def model_document(cfg: dict, report, model: QesModel, samples: str | None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "model",
        "config": cfg,
        "energies": list(model.energies),
        "available": model.available,
        "grid": {"half_width": model.grid.half_width, "points": model.grid.points},
        "validation": report.to_dict() if report is not None else None,
        "metadata": model.metadata,
        "samples": samples,
    }


# -- commands ---------------------------------------------------------------------------


def cmd_catalog(args) -> int:
    if args.action == "list":
        for name in cat.names():
            entry = cat.get(name)
            params = ", ".join(f"{p.name}={p.default:g}" for p in entry.params)
            print(f"{name:12s} {params}")
        return EXIT_OK
    if not args.name:
        raise CliError("catalog show needs an entry name")
    if args.name not in cat.names():
        raise CliError(f"unknown catalog entry {args.name!r}; known: {', '.join(cat.names())}")
    d = cat.get(args.name).describe()
    print(d["name"])
    print(f"  {d['doc']}")
    print("  parameters:")
    for p in d["params"]:
        print(f"    {p['name']} (default {p['default']:g}) {p['doc']}".rstrip())
    print("  constraints:")
    for c in d["constraints"]:
        print(f"    {c}")
    return EXIT_OK


def cmd_build(args) -> int:
    cfg = config_from_args(args)
    report, model, _ = build_from_config(cfg, args.force)
    if report is not None:
        print(report.format())
    out = Path(args.out)
    atomic_write(out / "samples.csv", samples_csv(model_columns(model)))
    write_json(out / "model.json", model_document(cfg, report, model, "samples.csv"), MODEL_SCHEMA)
    print(f"energies: {', '.join(f'{e:.12g}' for e in model.energies)}")
    print(f"normalizable states: {model.available}; grid L={model.grid.half_width:g} N={model.grid.points}")
    print(f"wrote {out / 'model.json'} and {out / 'samples.csv'}")
    if report is not None and not report.passed:
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = config_from_args(args)
    stored = None
    if args.target and args.target.endswith(".json"):
        doc = read_json(args.target, {"type": "object"})
        if doc.get("kind") == "model":
            stored = doc
    _, model, _ = build_from_config(cfg, args.force)
    if stored is not None and not np.allclose(stored["energies"], model.energies, rtol=1e-12, atol=1e-12):
        raise CliError("stored energies do not match the rebuilt model")
    try:
        report = so.verify_model(model, tolerances_from(cfg), seed=args.seed)
    except so.SolverError as err:
        print(f"verification failed: {err}", file=sys.stderr)
        return EXIT_VERIFY
    print(report.format())
    print(f"bound_states={report.bound_states}")
    if args.out:
        doc = {"schema_version": SCHEMA_VERSION, "kind": "report", "config": cfg, **report.to_dict()}
        write_json(args.out, doc, REPORT_SCHEMA)
        print(f"wrote {args.out}")
    return EXIT_OK if report.passed else EXIT_VERIFY


def _source_levels(h: ch.Hierarchy, count: int, limit: float) -> list[float]:
    """Levels E_m of a hierarchy (partial sums of positive gaps) below ``limit``."""
    levels, e = [0.0], 0.0
    for m in range(count):
        gap = h[m][1]
        if not gap > 0 or not math.isfinite(gap):
            break
        e += gap
        if e >= limit - CONTINUUM_MARGIN:
            break
        levels.append(e)
    return levels


def _chain_grid(args, source: str) -> Grid:
    if source == "oscillator":
        hw = args.half_width or 12.0 / math.sqrt(args.epsilon)
        return Grid(hw, args.grid_points or 4001)
    # Morse wells rise like exp(-2x) on the left and levels near the threshold decay slowly on the right
    hw = args.half_width or 32.0
    return Grid(hw, args.grid_points or 8001, center=hw - 4.0)


def _bound_levels(v: np.ndarray, grid: Grid, vfn, k: int, seed: int) -> list[float]:
    k = max(1, min(k, 10))
    vals, _ = so.spectrum(vfn, grid, k, seed)
    edge = min(v[0], v[-1])
    return [float(e) for e in vals if e < edge - CONTINUUM_MARGIN]


def cmd_chain(args) -> int:
    if args.steps < 0:
        raise CliError("--steps must be non-negative")
    src = args.source
    out = Path(args.out)
    summary: dict = {"schema_version": SCHEMA_VERSION, "kind": "chain", "source": src, "steps": []}
    if src in ("oscillator", "morse"):
        if not args.epsilon > 0:
            raise CliError("--epsilon must be positive")
        h0 = ch.oscillator_hierarchy(args.epsilon) if src == "oscillator" else ch.morse_hierarchy(args.epsilon)
        g = _chain_grid(args, src)
        summary["epsilon"] = args.epsilon
        try:
            steps = ch.iterate_chain(src, args.steps, args.epsilon)
        except ch.ChainError as err:
            raise CliError(str(err), EXIT_VALIDATION) from None
    elif src.endswith(".json"):
        if args.steps > 1:
            raise CliError("a built model supports a single chain step")
        cfg = read_json(src, MODEL_SCHEMA)["config"]
        _, model, spec = build_from_config(cfg)
        if spec is None:
            raise CliError("this model has no generator to chain from", EXIT_VALIDATION)
        _, wp, wpt, triple = construct(spec)
        h0 = ch.triple_hierarchy(triple)
        g = model.grid
        try:
            steps = [ch.chain_step(h0, 1, (g.x[0], g.x[-1]))] if args.steps else []
        except ch.ChainError as err:
            raise CliError(str(err), EXIT_VALIDATION) from None
    else:
        raise CliError(f"unknown chain source {src!r}; use oscillator, morse or a model JSON file")

    x = g.x
    w0 = h0[0][0]
    v0 = potential(w0, -1)
    atomic_write(out / "step0.csv", samples_csv({"x": x, "V": v0(x)}))
    summary["steps"].append({"index": 0, "samples": "step0.csv"})
    all_ok = True
    for st in steps:
        k = st.index
        vm, vp = st.v_plus, st.v_minus
        vm_x, vp_x = vm(x), vp(x)
        cols = {"x": x, "V_minus": vm_x, "V_plus": vp_x}
        try:
            cols["zero_mode"] = ch.partner_ground_state(st.calw, g)
        except NonNormalizableError:
            pass
        entry = {
            "index": k,
            "gaps": list(st.gaps),
            "removable_points": list(st.removable_points),
            "repair_radius": st.calw.radius,
            "samples": f"step{k}.csv",
        }
        closed = None
        try:
            if src == "oscillator":
                closed = ch.oscillator_chain_potential(k, args.epsilon, x)
            elif src == "morse" and k <= 2:
                closed = ch.morse_chain_potential(k, args.epsilon, x)[0]
        except ch.MorseDenominatorError as err:
            raise CliError(str(err), EXIT_VALIDATION) from None
        if closed is not None:
            cols["V_minus_closed"] = closed
            entry["closed_form_max_discrepancy"] = float(np.max(np.abs(closed - vm_x)))
        if src in ("oscillator", "morse"):
            limit = float(min(vm_x[0], vm_x[-1]))
            source_levels = _source_levels(h0, 2 * k + 4, limit)
            expected = [0.0] + source_levels[2 * k + 1 :][:3]
        else:
            expected = None
        levels = _bound_levels(vm_x, g, vm, len(expected) if expected else 3, args.seed)
        entry["levels"] = levels
        if expected is not None:
            entry["expected_levels"] = expected
            ok = len(levels) >= len(expected) and all(
                abs(a - b) <= 5e-4 * max(1.0, abs(b)) for a, b in zip(levels, expected)
            )
            entry["levels_match"] = ok
            all_ok &= ok
        atomic_write(out / f"step{k}.csv", samples_csv(cols))
        summary["steps"].append(entry)
        line = f"step {k}: levels {', '.join(f'{e:.8g}' for e in levels)}"
        if expected is not None:
            line += f" (expected {', '.join(f'{e:.8g}' for e in expected)})"
        if "closed_form_max_discrepancy" in entry:
            line += f"; closed form max |diff| {entry['closed_form_max_discrepancy']:.3e}"
        print(line)
    write_json(out / "chain.json", summary)
    print(f"wrote {out / 'chain.json'}")
    return EXIT_OK if all_ok else EXIT_VERIFY


def cmd_export(args) -> int:
    cfg = config_from_args(args)
    _, model, _ = build_from_config(cfg, args.force)
    cols = model_columns(model)
    if args.format == "json":
        doc = {"schema_version": SCHEMA_VERSION, "kind": "samples", "energies": list(model.energies), "columns": {k: v.tolist() for k, v in cols.items()}}
        write_json(args.out, doc)
    else:
        atomic_write(args.out, samples_csv(cols))
    print(f"wrote {args.out} ({model.grid.points} rows, columns {', '.join(cols)})")
    return EXIT_OK


# -- parser -----------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, target: bool = True):
    if target:
        p.add_argument("target", nargs="?", help="catalog entry name, config JSON or model JSON")
        p.add_argument("assign", nargs="*", metavar="name=value", help="parameter overrides")
        p.add_argument("--config", help="RunConfig JSON file")
        p.add_argument("--expr", help="inline generator U(x)")
        p.add_argument("--epsilon", type=float, help="first gap for --expr")
        p.add_argument("--epsilon1", type=float, help="second gap for --expr")
        p.add_argument("--x0", type=float, help="known zero of U for --expr")
        p.add_argument("--force", action="store_true", help="build even if the generator fails validation")
    p.add_argument("--grid-points", type=int, help="odd number of grid points")
    p.add_argument("--half-width", type=float, help="grid half width L")
    p.add_argument("--seed", type=int, default=42, help="random seed (default 42)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qeskit", description="Quasi-exactly solvable potentials from supersymmetric hierarchies.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("catalog", help="list or show catalog entries")
    p.add_argument("action", choices=["list", "show"])
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("build", help="construct a model and write model.json + samples.csv")
    _common(p)
    p.add_argument("--out", default="qeskit-out", help="output directory")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("verify", help="check a model against the finite-difference oracle")
    _common(p)
    p.add_argument("--tolerance", type=float, help="relative eigenvalue tolerance")
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("chain", help="exactly solvable partner chain")
    p.add_argument("source", help="oscillator, morse or a model JSON file")
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--out", default="qeskit-chain", help="output directory")
    _common(p, target=False)
    p.set_defaults(func=cmd_chain)

    p = sub.add_parser("export", help="write grid samples of a model")
    _common(p)
    p.add_argument("--out", required=True, help="output file")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_OK if err.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except CliError as err:
        print(f"qeskit: error: {err}", file=sys.stderr)
        return err.code
    except ex.ExprError as err:
        print(f"qeskit: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
