"""Batch front-end.

Usage::

    sphereplane energy --rho 0.5 --material perfect-magnetic
    sphereplane f0 --rho 0.74 --material const --eps 8 --mu 10
    sphereplane scan --var rho --from 0.1 --to 0.8 --points 15 --scan-command f0
    sphereplane --config run.cfg --threads 4

Every flag can also be given in a config file, one ``key = value`` per line,
with the key spelled as the long flag without its leading dashes (``rho``,
``omega-p``, ``rel-tol``, ...) and the subcommand under ``command``.  Blank
lines and ``#`` comments are ignored.  Flags override file values.

Output is CSV with the fixed header

    rho,R,L,T,material,params,quantity,value,err,l_max,terms,converged

or a JSON array of objects with those keys plus ``reason``, which is empty
unless the evaluation raised.  ``params`` is ``name=value`` pairs joined by
``;``.  Exit status is 0 on success, 1 if any record failed to converge or
raised, and 2 on a usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import asymptotics, spectrum
from .errors import CasimirError
from .materials import MaterialModel, Tag
from .roundtrip import Geometry
from .spectrum import NumericsConfig

COMMANDS = ("energy", "free-energy", "f0", "n3", "asymptote", "scan")
POINT_COMMANDS = COMMANDS[:-1]
ASYMPTOTE_KINDS = ("large-sep", "f0", "n3", "pfa", "pfa-high-t")
HEADER = ("rho", "R", "L", "T", "material", "params", "quantity", "value", "err",
          "l_max", "terms", "converged")

# flag name -> MaterialModel field
_MATERIAL_FLAGS = {"eps": "eps0", "mu": "mu0", "omega-p": "Omega_p", "omega-m": "Omega_m"}
_MATERIAL_DEFAULTS = {Tag.PlasmaEps: {"mu0": 1.0}, Tag.PlasmaMu: {"eps0": 1.0}}
# flag name -> NumericsConfig field
_NUMERICS_FLAGS = {"rel-tol": "rel_tol", "l-max": "l_max_override", "quad-panels": "quad_panels",
                   "matsubara-cap": "matsubara_cap", "fit-h": "fit_stencil_h",
                   "fit-degree": "fit_degree", "l-max-cap": "l_max_cap"}
_INT_KEYS = {"points", "threads", "l-max", "quad-panels", "matsubara-cap", "fit-degree", "l-max-cap"}
_FLOAT_KEYS = {"rho", "R", "L", "T", "from", "to", "eps", "mu", "omega-p", "omega-m",
               "rel-tol", "fit-h"}
_STR_KEYS = {"command", "material", "var", "scan-command", "kind", "format", "output"}
KEYS = _STR_KEYS | _INT_KEYS | _FLOAT_KEYS


class UsageError(Exception):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class ScanAxis:
    variable: str
    start: float
    stop: float
    points: int

    def grid(self):
        return [float(v) for v in np.linspace(self.start, self.stop, self.points)]


@dataclass(frozen=True)
class OutputSpec:
    format: str = "csv"
    path: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    command: str
    geometry: Geometry
    material: MaterialModel
    temperature: Optional[float] = None
    scan: Optional[ScanAxis] = None
    # the per-point command when command == "scan"
    scan_command: Optional[str] = None
    asymptote_kind: str = "large-sep"
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    output: OutputSpec = field(default_factory=OutputSpec)
    threads: int = 1


# --- parsing ---------------------------------------------------------------------

def _convert(key, raw):
    if key not in KEYS:
        raise UsageError(key, "unknown key")
    if key in _STR_KEYS:
        return raw
    try:
        value = int(raw) if key in _INT_KEYS else float(raw)
    except ValueError:
        kind = "an integer" if key in _INT_KEYS else "a real number"
        raise UsageError(key, f"expected {kind}, got {raw!r}") from None
    if key in _FLOAT_KEYS and not math.isfinite(value):
        raise UsageError(key, f"must be finite, got {raw!r}")
    return value


def read_config_text(text: str) -> dict:
    """Parse the flat ``key = value`` format into a dict of typed values."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise UsageError(key, f"repeated on line {lineno}")
        values[key] = _convert(key, raw)
    return values


def _build_parser():
    p = argparse.ArgumentParser(
        prog="sphereplane",
        description="Casimir energy of a magnetodielectric sphere above a conducting plane.",
        epilog="Any flag may also be set in --config as 'name = value'.")
    # defaults stay None so that only explicit flags override the config file;
    # the effective defaults are listed in the help strings
    p.add_argument("command", nargs="?", choices=COMMANDS, default=None)
    p.add_argument("--config", metavar="PATH", help="flat key = value run file")
    g = p.add_argument_group("geometry (give --rho or --R; L defaults to 1)")
    g.add_argument("--rho", type=float, help="R/L")
    g.add_argument("--R", type=float, help="sphere radius")
    g.add_argument("--L", type=float, help="plane to sphere-centre distance (default 1)")
    g.add_argument("--T", type=float, help="temperature; needed by free-energy and pfa-high-t")
    m = p.add_argument_group("material")
    m.add_argument("--material", "--model", dest="material", choices=[t.value for t in Tag],
                   help="sphere response (default perfect-conductor)")
    m.add_argument("--eps", type=float, help="permittivity, const and plasma-mu (default 1)")
    m.add_argument("--mu", type=float, help="permeability, const and plasma-eps (default 1)")
    m.add_argument("--omega-p", type=float, help="electric plasma frequency times R")
    m.add_argument("--omega-m", type=float, help="magnetic plasma frequency times R")
    s = p.add_argument_group("scan")
    s.add_argument("--var", choices=("rho", "T"), help="scanned variable")
    s.add_argument("--from", type=float, help="first grid value")
    s.add_argument("--to", type=float, help="last grid value")
    s.add_argument("--points", type=int, help="number of grid points")
    s.add_argument("--scan-command", "--command", dest="scan_command", choices=POINT_COMMANDS,
                   help="quantity evaluated at each grid point")
    p.add_argument("--kind", choices=ASYMPTOTE_KINDS,
                   help="closed form used by asymptote (default large-sep)")
    n = p.add_argument_group("numerics")
    n.add_argument("--rel-tol", type=float, help="target relative accuracy (default 1e-8)")
    n.add_argument("--l-max", type=int, help="fixed multipole cutoff instead of the adaptive one")
    n.add_argument("--quad-panels", type=int, help="quadrature panels (default 8)")
    n.add_argument("--matsubara-cap", type=int, help="max Matsubara terms (default 100000)")
    n.add_argument("--fit-h", type=float, help="N3 fit stencil spacing (default 0.01)")
    n.add_argument("--fit-degree", type=int, help="N3 fit degree (default 5)")
    n.add_argument("--l-max-cap", type=int, help="upper bound on l_max (default 300)")
    o = p.add_argument_group("output")
    o.add_argument("--format", choices=("csv", "json"), help="default csv")
    o.add_argument("--output", metavar="PATH", help="default stdout")
    o.add_argument("--threads", type=int, help="worker threads for scans (default 1)")
    return p


def _flag_values(ns) -> dict:
    values = {}
    for key, value in vars(ns).items():
        if key == "config" or value is None:
            continue
        values[key.replace("_", "-")] = value
    return values


def _material(values) -> MaterialModel:
    tag = Tag(values.get("material", Tag.PerfectConductor.value))
    kwargs = dict(_MATERIAL_DEFAULTS.get(tag, {}))
    for flag, name in _MATERIAL_FLAGS.items():
        if flag in values:
            kwargs[name] = values[flag]
    needed = {
        Tag.ConstantEpsMu: ("eps0", "mu0"), Tag.PlasmaEps: ("Omega_p",),
        Tag.PlasmaMu: ("Omega_m",), Tag.PlasmaBoth: ("Omega_p", "Omega_m"),
    }.get(tag, ())
    flag_of = {v: k for k, v in _MATERIAL_FLAGS.items()}
    for name in needed:
        if name not in kwargs:
            raise UsageError(flag_of[name], f"required for material {tag.value}")
    try:
        return MaterialModel(tag, **kwargs)
    except CasimirError as exc:
        bad = next((flag_of[n] for n in kwargs if n in str(exc)), "material")
        raise UsageError(bad, str(exc)) from None


def _geometry(values) -> Geometry:
    L = values.get("L", 1.0)
    if "rho" in values and "R" in values:
        raise UsageError("rho", "give either rho or R, not both")
    if "rho" not in values and "R" not in values:
        raise UsageError("rho", "geometry needs rho or R")
    try:
        if "rho" in values:
            return Geometry.from_rho(values["rho"], L)
        return Geometry(values["R"], L)
    except CasimirError as exc:
        raise UsageError("rho" if "rho" in values else "R", str(exc)) from None


def _numerics(values) -> NumericsConfig:
    kwargs = {name: values[flag] for flag, name in _NUMERICS_FLAGS.items() if flag in values}
    try:
        return NumericsConfig(**kwargs)
    except CasimirError as exc:
        bad = next((f for f, n in _NUMERICS_FLAGS.items() if n in str(exc)), "numerics")
        raise UsageError(bad, str(exc)) from None


def _needs_temperature(command, kind):
    return command == "free-energy" or (command == "asymptote" and kind == "pfa-high-t")


def build_config(values: dict) -> RunConfig:
    """Validate a merged key/value dict into a :class:`RunConfig`."""
    for key in values:
        if key not in KEYS:
            raise UsageError(key, "unknown key")
    command = values.get("command")
    if command is None:
        raise UsageError("command", f"missing; choose one of {', '.join(COMMANDS)}")
    if command not in COMMANDS:
        raise UsageError("command", f"unknown command {command!r}")
    kind = values.get("kind", "large-sep")
    if kind not in ASYMPTOTE_KINDS:
        raise UsageError("kind", f"unknown asymptote kind {kind!r}")
    fmt = values.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise UsageError("format", f"expected csv or json, got {fmt!r}")
    threads = values.get("threads", 1)
    if threads < 1:
        raise UsageError("threads", "must be at least 1")

    scan_keys = ("var", "from", "to", "points", "scan-command")
    scan = None
    point_command = command
    if command == "scan":
        for key in scan_keys:
            if key not in values:
                raise UsageError(key, "required by scan")
        point_command = values["scan-command"]
        if point_command not in POINT_COMMANDS:
            raise UsageError("scan-command", f"unknown command {point_command!r}")
        if values["var"] not in ("rho", "T"):
            raise UsageError("var", f"expected rho or T, got {values['var']!r}")
        if values["points"] < 1:
            raise UsageError("points", "must be at least 1")
        scan = ScanAxis(values["var"], float(values["from"]), float(values["to"]),
                        int(values["points"]))
    else:
        for key in scan_keys:
            if key in values:
                raise UsageError(key, "only valid with the scan command")

    values = dict(values)
    if scan is not None and scan.variable == "rho":
        if "rho" in values or "R" in values:
            raise UsageError("rho", "set by the scan axis")
        values["rho"] = scan.start
    temperature = values.get("T")
    if scan is not None and scan.variable == "T":
        if temperature is not None:
            raise UsageError("T", "set by the scan axis")
        if not _needs_temperature(point_command, kind):
            raise UsageError("var", f"{point_command} does not depend on T")
        if min(scan.start, scan.stop) <= 0.0:
            raise UsageError("from", "temperatures must be positive")
    elif _needs_temperature(point_command, kind):
        if temperature is None:
            raise UsageError("T", f"required by {point_command}")
        if temperature <= 0.0:
            raise UsageError("T", "must be positive")
    elif temperature is not None:
        raise UsageError("T", f"not used by {point_command}")
    if scan is not None and scan.variable == "rho":
        if not (0.0 < min(scan.start, scan.stop) and max(scan.start, scan.stop) < 1.0):
            raise UsageError("from", "rho grid must lie in (0, 1)")

    material = _material(values)
    for flag in _MATERIAL_FLAGS:
        name = _MATERIAL_FLAGS[flag]
        if flag in values and getattr(material, name) is None:
            raise UsageError(flag, f"not used by material {material.tag.value}")

    if "rho" in values and command == "scan":
        geometry = Geometry(values["rho"] * values.get("L", 1.0), values.get("L", 1.0))
    else:
        geometry = _geometry(values)
    if command != "asymptote" and "kind" in values:
        if not (command == "scan" and point_command == "asymptote"):
            raise UsageError("kind", "only valid with asymptote")

    return RunConfig(
        command=command, geometry=geometry, material=material, temperature=temperature,
        scan=scan, scan_command=point_command if command == "scan" else None,
        asymptote_kind=kind, numerics=_numerics(values),
        output=OutputSpec(fmt, values.get("output")), threads=int(threads))


def parse_config(argv=None, text: Optional[str] = None) -> RunConfig:
    """Flags in ``argv`` over the run file named by ``--config`` (or ``text``) over defaults.

    Raises
    ------
    UsageError
        Naming the offending key.
    """
    parser = _build_parser()
    ns = parser.parse_args(list(argv) if argv is not None else [])
    values = {}
    if ns.config is not None:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError("config", str(exc)) from None
    if text is not None:
        values.update(read_config_text(text))
    values.update(_flag_values(ns))
    return build_config(values)


def render(config: RunConfig) -> str:
    """The run file that :func:`parse_config` maps back to ``config``."""
    lines = [f"command = {config.command}"]
    geo = config.geometry
    if config.scan is None or config.scan.variable != "rho":
        lines.append(f"R = {geo.R!r}")
    lines.append(f"L = {geo.L!r}")
    if config.temperature is not None:
        lines.append(f"T = {config.temperature!r}")
    lines.append(f"material = {config.material.tag.value}")
    flag_of = {v: k for k, v in _MATERIAL_FLAGS.items()}
    for name, value in config.material.params().items():
        lines.append(f"{flag_of[name]} = {value!r}")
    if config.scan is not None:
        s = config.scan
        lines += [f"var = {s.variable}", f"from = {s.start!r}", f"to = {s.stop!r}",
                  f"points = {s.points}", f"scan-command = {config.scan_command}"]
    point = config.scan_command or config.command
    if point == "asymptote":
        lines.append(f"kind = {config.asymptote_kind}")
    for flag, name in _NUMERICS_FLAGS.items():
        value = getattr(config.numerics, name)
        if value is not None:
            lines.append(f"{flag} = {value!r}")
    lines.append(f"format = {config.output.format}")
    if config.output.path is not None:
        lines.append(f"output = {config.output.path}")
    lines.append(f"threads = {config.threads}")
    return "\n".join(lines) + "\n"


# --- evaluation --------------------------------------------------------------------

def _record(geometry, material, T, quantity, value=None, err=None, l_max=None,
            terms=None, converged=False, reason=""):
    params = ";".join(f"{k}={v!r}" for k, v in material.params().items())
    return {"rho": geometry.rho, "R": geometry.R, "L": geometry.L, "T": T,
            "material": material.tag.value, "params": params, "quantity": quantity,
            "value": value, "err": err, "l_max": l_max, "terms": terms,
            "converged": bool(converged), "reason": reason}


def _from_result(base, quantity, result):
    return [base(quantity, result.value, result.err_estimate, result.l_max_used,
                 result.nodes_or_terms, result.converged)]


def _asymptote(base, kind, geometry, material, T):
    rho, R, L = geometry.rho, geometry.R, geometry.L
    if kind == "large-sep":
        series = asymptotics.large_sep_coefficients(material)
        return [base("E0_series", asymptotics.large_sep_energy(material, rho, L), None, None,
                     len(series.terms), True)]
    if kind == "f0":
        return [base("F0_series", asymptotics.f0_large_sep(material, rho), None, None, 1, True)]
    if kind == "n3":
        series = asymptotics.n3_expansion(material)
        return [base("N3_series", asymptotics.n3_series(material, rho), None, None,
                     len(series.terms), True)]
    if kind == "pfa":
        return [base("E0_pfa", asymptotics.pfa_em(material, geometry.d, R), None, None, 2, True)]
    return [base("F_pfa_high_t", asymptotics.pfa_high_t(material, geometry.d, R, T),
                 None, None, 1, True)]


_QUANTITY = {"energy": "E0", "free-energy": "F", "f0": "F0", "n3": "N3",
             "asymptote": "asymptote"}


def evaluate(command: str, geometry: Geometry, material: MaterialModel, T: Optional[float],
             numerics: NumericsConfig, kind: str = "large-sep") -> list:
    """Records for one evaluation point; engine errors become failed records."""
    def base(*args):
        return _record(geometry, material, T, *args)

    try:
        if command == "energy":
            return _from_result(base, "E0", spectrum.casimir_energy_T0(geometry, material, numerics))
        if command == "free-energy":
            return _from_result(base, "F", spectrum.free_energy(geometry, material, T, numerics))
        if command == "f0":
            return _from_result(base, "F0",
                                spectrum.f0_classical_result(geometry, material, numerics))
        if command == "n3":
            c = spectrum.low_temp_coefficients(geometry, material, numerics)
            ok = c.fit_residual <= 1e-3 * abs(c.n3) * c.stencil_h ** 3
            return [base("N1", c.n1, c.fit_residual, c.l_max_used, numerics.fit_degree, ok),
                    base("N3", c.n3, c.fit_residual, c.l_max_used, numerics.fit_degree, ok)]
        return _asymptote(base, kind, geometry, material, T)
    except CasimirError as exc:
        quantity = _QUANTITY[command] if command != "asymptote" else f"asymptote:{kind}"
        return [_record(geometry, material, T, quantity,
                        reason=f"{type(exc).__name__}: {exc}")]


def _points(config: RunConfig):
    if config.scan is None:
        return [(config.geometry, config.temperature)]
    if config.scan.variable == "rho":
        L = config.geometry.L
        return [(Geometry(rho * L, L), config.temperature) for rho in config.scan.grid()]
    return [(config.geometry, T) for T in config.scan.grid()]


def compute(config: RunConfig) -> list:
    """All records in grid order; the result does not depend on ``config.threads``."""
    command = config.scan_command or config.command

    def one(point):
        geometry, T = point
        return evaluate(command, geometry, config.material, T, config.numerics,
                        config.asymptote_kind)

    points = _points(config)
    if config.threads == 1 or len(points) == 1:
        chunks = [one(p) for p in points]
    else:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            chunks = list(pool.map(one, points))
    return [rec for chunk in chunks for rec in chunk]


# --- output --------------------------------------------------------------------------

def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_records(records, fmt: str = "csv") -> str:
    if fmt == "json":
        clean = [{k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                  for k, v in rec.items()} for rec in records]
        return json.dumps(clean, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for rec in records:
        writer.writerow([_cell(rec[key] if not (isinstance(rec[key], float)
                                                and not math.isfinite(rec[key])) else None)
                         for key in HEADER])
    return buf.getvalue()


def run(config: RunConfig, stdout=None, stderr=None) -> int:
    """Evaluate, emit and return the exit status."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    records = compute(config)
    text = format_records(records, config.output.format)
    if config.output.path is None:
        stdout.write(text)
    else:
        with open(config.output.path, "w", encoding="utf-8") as fh:
            fh.write(text)
    failed = False
    for i, rec in enumerate(records):
        if rec["reason"]:
            stderr.write(f"record {i} ({rec['quantity']}, rho={rec['rho']!r}): {rec['reason']}\n")
        failed = failed or not rec["converged"]
    return 1 if failed else 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_config(argv)
    except UsageError as exc:
        sys.stderr.write(f"sphereplane: error: {exc}\n")
        return 2
    except SystemExit as exc:  # argparse
        return int(exc.code or 0)
    return run(config)


def entry_point():
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
