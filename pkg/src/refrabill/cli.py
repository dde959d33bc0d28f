"""Command-line front end.

Configuration comes from an optional TOML file with sections ``[curve]``,
``[params]`` and ``[run]``; command-line flags override file values.
Exit codes: 0 success, 1 configuration or usage error, 2 inadmissible
domain, 3 solver failure, 4 early termination of the dynamics.
"""

from __future__ import annotations

import argparse
import copy
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import analysis
from .arcs import ArcError
from .dynamics import (
    EnergyShellError,
    SurfaceState,
    replay,
    state_from_angle,
    trace,
    validate_state,
)
from .export import write_csv, write_json
from .geometry import GeometryError, PlateauWarning, build_boundary, find_central_configurations
from .model import BilliardParams, ParamsError, check_pairing
from .shooting import (
    InadmissibleWordError,
    RealizationError,
    miranda_check,
    multi_start,
    realize_fixed_ends,
    realize_periodic,
    uniqueness_check,
)
from .words import InadmissibleDomainError, build_interval_system, is_admissible, is_symmetric, parse_word

EXIT_OK, EXIT_CONFIG, EXIT_INADMISSIBLE, EXIT_SOLVER, EXIT_DYNAMICS = 0, 1, 2, 3, 4

DEFAULT_H_GRID = [float(h) for h in np.geomspace(1.0, 1000.0, 8)]
DEFAULT_SCAN_WORDS = ["1,2", "1,2,2,1", "1,2,1,4"]

DEFAULTS: dict = {
    "curve": {"family": "ellipse", "center": [0.0, 0.0]},
    "params": {"omega2": 1.0, "mu": 1.0, "calE": 2.0, "h": 100.0, "h_grid": DEFAULT_H_GRID},
    "run": {
        "output": "refrabill-out",
        "half_width": None,
        "words": [],
        "word": None,
        "mode": "periodic",
        "xi_a": None,
        "xi_b": None,
        "check": True,
        "seed": 0,
        "seeds": 0,
        "xi": None,
        "alpha": 0.0,
        "v": None,
        "seed_word": None,
        "steps": 10,
        "back_steps": 0,
        "permissive": False,
        "cc": [],
        "i": 1,
        "j": 2,
        "pads": [2, 4, 6],
        "bridges": [""],
        "samples_per_arc": 100,
        "density": 5,
    },
}

CURVE_KEYS = {"family", "a", "b", "c0", "cos", "sin", "center"}
CURVE_DEFAULTS = {
    "ellipse": {"a": 1.5, "b": 1.0},
    "polar_fourier": {"c0": 1.0, "cos": [], "sin": []},
}


class ConfigError(ValueError):
    """Invalid configuration or command-line usage."""


# ---------------------------------------------------------------------------
# configuration


def _merge(base: dict, extra: dict, where: str) -> None:
    for section, values in extra.items():
        if section not in base:
            raise ConfigError(f"unknown section [{section}] in {where}")
        if not isinstance(values, dict):
            raise ConfigError(f"section [{section}] must be a table")
        allowed = CURVE_KEYS if section == "curve" else set(base[section])
        for k, v in values.items():
            if k not in allowed:
                raise ConfigError(f"unknown key {section}.{k} in {where}")
            base[section][k] = v


def _parse_value(text: str) -> Any:
    try:
        return tomllib.loads(f"x = {text}")["x"]
    except tomllib.TOMLDecodeError:
        return text


def resolve_config(path: str | None, overrides: dict, sets: Sequence[str] = ()) -> dict:
    """Defaults, then the file, then ``--set section.key=value``, then flags."""
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        _merge(cfg, data, path)
    extra: dict = {}
    for item in sets:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        key, val = item.split("=", 1)
        sec, k = key.split(".", 1)
        extra.setdefault(sec, {})[k] = _parse_value(val)
    _merge(cfg, extra, "--set")
    _merge(cfg, {s: {k: v for k, v in d.items() if v is not None} for s, d in overrides.items()}, "flags")
    fam = cfg["curve"]["family"]
    if fam not in CURVE_DEFAULTS:
        raise ConfigError(f"unknown curve family {fam!r}")
    for k, v in CURVE_DEFAULTS[fam].items():
        cfg["curve"].setdefault(k, v)
    return cfg


def _params(cfg: dict) -> BilliardParams:
    p = cfg["params"]
    try:
        return BilliardParams(float(p["omega2"]), float(p["mu"]), float(p["calE"]), float(p["h"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _curve(cfg: dict):
    try:
        return build_boundary(dict(cfg["curve"]))
    except (GeometryError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid curve: {exc}") from exc


def _system(cfg: dict, curve):
    hw = cfg["run"]["half_width"]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PlateauWarning)
        return build_interval_system(curve, half_width=None if hw is None else float(hw))


def _words(cfg: dict) -> list[tuple[int, ...]]:
    raw = cfg["run"]["words"] or ([cfg["run"]["word"]] if cfg["run"]["word"] else [])
    return [parse_word(w) if isinstance(w, str) else tuple(int(s) for s in w) for w in raw]


def _out(cfg: dict) -> Path:
    out = Path(cfg["run"]["output"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _report(cfg: dict, command: str, body: dict, status: str) -> dict:
    return {"command": command, "status": status, "config": cfg, **body}


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("REFRABILL_THREADS", "1")))
    except ValueError:
        return 1


def _print(text: str) -> None:
    sys.stdout.write(text + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_ccs(cfg: dict) -> int:
    curve = _curve(cfg)
    out = _out(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ccs = find_central_configurations(curve)
    plateau = any(issubclass(w.category, PlateauWarning) for w in caught)
    body: dict = {
        "length": curve.length,
        "central_configurations": [
            {"xi_bar": c.xi_bar, "kind": c.kind, "second_derivative": c.second_derivative, "lsc": c.lsc_ok, "radius": c.radius}
            for c in ccs
        ],
        "plateau": plateau,
    }
    _print(f"{'#':>3} {'xi_bar':>14} {'kind':>12} {'r2':>12} {'LSC':>5}")
    for k, c in enumerate(ccs, start=1):
        _print(f"{k:>3} {c.xi_bar:>14.8f} {c.kind:>12} {c.second_derivative:>12.5g} {str(c.lsc_ok):>5}")
    try:
        system = _system(cfg, curve)
    except InadmissibleDomainError as exc:
        body["admissible"] = False
        body["reason"] = str(exc)
        _print(f"inadmissible: {exc}")
        write_json(out / "ccs.json", _report(cfg, "ccs", body, "inadmissible"))
        return EXIT_INADMISSIBLE
    body["admissible"] = True
    body["system"] = system.to_dict()
    for s in system.symbols:
        _print(f"NA({s}) = {sorted(system.na[s])}")
    write_json(out / "ccs.json", _report(cfg, "ccs", body, "ok"))
    return EXIT_OK


def cmd_realize(cfg: dict) -> int:
    curve, params = _curve(cfg), _params(cfg)
    run = cfg["run"]
    words = _words(cfg)
    if len(words) != 1:
        raise ConfigError("realize needs exactly one word")
    word = words[0]
    mode = run["mode"]
    if mode not in ("periodic", "fixed_ends"):
        raise ConfigError(f"unknown mode {mode!r}")
    out = _out(cfg)
    try:
        system = _system(cfg, curve)
    except InadmissibleDomainError as exc:
        _print(f"inadmissible: {exc}")
        write_json(out / "realize.json", _report(cfg, "realize", {"reason": str(exc)}, "inadmissible"))
        return EXIT_INADMISSIBLE
    if not is_admissible(word, system, periodic=mode == "periodic"):
        raise ConfigError(f"word {word} is not admissible for this interval system")
    xa = xb = None
    if mode == "fixed_ends":
        xa = run["xi_a"] if run["xi_a"] is not None else system.center(word[0])
        xb = run["xi_b"] if run["xi_b"] is not None else system.center(word[-1])
    tag = "-".join(map(str, word))
    body: dict = {"word": list(word), "mode": mode, "symmetry": is_symmetric(word).describe() if mode == "periodic" else None}
    report = None
    try:
        if run["check"]:
            report = miranda_check(system, params, word, mode, xa, xb, density=int(run["density"]))
            body["miranda"] = report.to_dict()
        if mode == "periodic":
            conc = realize_periodic(system, params, word)
        else:
            conc = realize_fixed_ends(system, params, word, xa, xb)
    except (RealizationError, ArcError, InadmissibleWordError) as exc:
        body["error"] = {"type": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, RealizationError):
            body["error"].update(best_residual=exc.best_residual, best_xi=exc.best_xi, iterations=exc.iterations)
        write_json(out / f"realize-{tag}-diagnostics.json", _report(cfg, "realize", body, "solver_failure"))
        _print(f"solver failure: {exc}")
        return EXIT_SOLVER
    conc.miranda = report
    body["realization"] = conc.to_dict()
    body["replay"] = replay(curve, params, conc).to_dict()
    if int(run["seeds"]) > 0:
        starts = multi_start(system, params, word, int(run["seeds"]), int(run["seed"]), mode, xa, xb)
        sols = [s.xi.tolist() for s in starts if not isinstance(s, Exception)]
        body["multi_start"] = {"converged": len(sols), "seeds": int(run["seeds"]), "solutions": sols}
        if mode == "periodic":
            body["uniqueness"] = uniqueness_check(system, params, word).to_dict()
    write_json(out / f"realize-{tag}.json", _report(cfg, "realize", body, "ok"))
    write_csv(
        out / f"realize-{tag}.csv",
        ("s", "x", "y", "vx", "vy", "regime", "crossing"),
        conc.trajectory_rows(int(run["samples_per_arc"])),
    )
    _print(f"realized {tag}: max Snell residual {conc.max_snell:.3e}, collisions {conc.collision}")
    return EXIT_OK


def cmd_simulate(cfg: dict) -> int:
    curve, params = _curve(cfg), _params(cfg)
    run = cfg["run"]
    out = _out(cfg)
    try:
        system = _system(cfg, curve)
    except InadmissibleDomainError as exc:
        _print(f"inadmissible: {exc}")
        return EXIT_INADMISSIBLE
    if run["seed_word"]:
        word = parse_word(run["seed_word"]) if isinstance(run["seed_word"], str) else tuple(run["seed_word"])
        try:
            conc = realize_periodic(system, params, word)
        except (RealizationError, InadmissibleWordError) as exc:
            _print(f"cannot realize seed word: {exc}")
            return EXIT_SOLVER
        xi0, v0 = conc.initial_state()
        state = SurfaceState(xi0, v0)
    else:
        if run["xi"] is None:
            raise ConfigError("simulate needs xi (or seed_word)")
        xi = float(run["xi"])
        if run["v"] is not None:
            state = SurfaceState(xi, np.asarray(run["v"], dtype=float))
        else:
            try:
                state = state_from_angle(curve, params, xi, float(run["alpha"]))
            except EnergyShellError as exc:
                raise ConfigError(str(exc)) from exc
        try:
            validate_state(curve, params, state)
        except EnergyShellError as exc:
            raise ConfigError(str(exc)) from exc
    res = trace(curve, params, system, state, int(run["steps"]), int(run["back_steps"]), bool(run["permissive"]))
    terminated = res.forward_error is not None or res.backward_error is not None
    write_json(out / "simulate.json", _report(cfg, "simulate", {"trace": res.to_dict()}, "terminated" if terminated else "ok"))
    write_csv(out / "simulate.csv", ("s", "x", "y", "vx", "vy", "regime", "crossing"), res.rows(int(run["samples_per_arc"])))
    _print("window: " + ",".join(map(str, res.window.symbols)))
    if terminated:
        err = res.forward_error or res.backward_error
        _print(f"terminated at step {err.step}: {err}")
        return EXIT_DYNAMICS
    return EXIT_OK


def _scan_one(args: tuple) -> analysis.ThresholdReport:
    cfg, h = args
    curve = _curve(cfg)
    system = _system(cfg, curve)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", analysis.GeometryWarning)
        return analysis.threshold_scan(curve, _params(cfg), system, _words(cfg), [h], miranda_density=int(cfg["run"]["density"]))


def cmd_scan(cfg: dict) -> int:
    if not cfg["run"]["words"]:
        cfg["run"]["words"] = list(DEFAULT_SCAN_WORDS)
    curve = _curve(cfg)
    out = _out(cfg)
    try:
        system = _system(cfg, curve)
    except InadmissibleDomainError as exc:
        _print(f"inadmissible: {exc}")
        return EXIT_INADMISSIBLE
    words = _words(cfg)
    for w in words:
        if not is_admissible(w, system):
            raise ConfigError(f"scan word {w} is not admissible")
    hs = sorted(float(h) for h in cfg["params"]["h_grid"])
    workers = min(_threads(), len(hs))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_scan_one, [(cfg, h) for h in hs]))
        rows = [r for p in parts for r in p.rows]
        details = {h: d for p in parts for h, d in p.details.items()}
    else:
        full = analysis.threshold_scan(curve, _params(cfg), system, words, hs, miranda_density=int(cfg["run"]["density"]))
        rows, details = full.rows, full.details
    crits = list(dict.fromkeys(c for _, c, _ in rows))
    thresholds = {c: analysis.smallest_monotone_threshold(hs, [ok for _, cc, ok in rows if cc == c]) for c in crits}
    violations = {c: analysis.monotonicity_violations(hs, [ok for _, cc, ok in rows if cc == c]) for c in crits}
    rep = analysis.ThresholdReport(hs, rows, thresholds, violations, details, analysis.euclidean_change_sign(system))
    write_json(out / "scan.json", _report(cfg, "scan", rep.to_dict(), "ok"))
    header, *body = rep.csv_rows()
    write_csv(out / "scan.csv", header, body)
    for c in crits:
        _print(f"{c:>12}: threshold {thresholds[c]}, non-monotone at {violations[c]}")
    return EXIT_OK


def cmd_saddle(cfg: dict) -> int:
    curve, params = _curve(cfg), _params(cfg)
    out = _out(cfg)
    try:
        system = _system(cfg, curve)
    except InadmissibleDomainError as exc:
        _print(f"inadmissible: {exc}")
        write_json(out / "saddle.json", _report(cfg, "saddle", {"reason": str(exc)}, "inadmissible"))
        return EXIT_INADMISSIBLE
    idx = [int(k) for k in (cfg["run"]["cc"] or system.symbols)]
    reports, code = [], EXIT_OK
    for k in idx:
        try:
            r = analysis.saddle_spectrum(curve, params, system, k)
            reports.append(r.to_dict())
            _print(f"cc {k}: {r.classification}, eigenvalues {np.round(r.eigenvalues, 8)}, det {r.determinant:.8f}")
        except analysis.DegenerateConfigurationError as exc:
            reports.append({"cc_index": k, "error": str(exc)})
            code = max(code, EXIT_INADMISSIBLE)
        except analysis.FixedPointDriftError as exc:
            reports.append({"cc_index": k, "error": str(exc)})
            code = max(code, EXIT_SOLVER)
    write_json(out / "saddle.json", _report(cfg, "saddle", {"reports": reports}, "ok" if code == EXIT_OK else "failed"))
    write_csv(
        out / "saddle.csv",
        ("cc", "h", "classification", "lambda1", "lambda2", "determinant"),
        [
            (r["cc_index"], params.h, r["classification"], r["eigenvalues"][0][0], r["eigenvalues"][1][0], r["determinant"])
            for r in reports
            if "classification" in r
        ],
    )
    return code


def cmd_heteroclinic(cfg: dict) -> int:
    curve, params = _curve(cfg), _params(cfg)
    run = cfg["run"]
    out = _out(cfg)
    try:
        system = _system(cfg, curve)
    except InadmissibleDomainError as exc:
        _print(f"inadmissible: {exc}")
        return EXIT_INADMISSIBLE
    i, j = int(run["i"]), int(run["j"])
    bridges = [parse_word(b) if b else () for b in run["bridges"]]
    rows, reports = [], []
    try:
        sad = analysis.saddle_spectrum(curve, params, system, j)
    except analysis.AnalysisError as exc:
        _print(f"saddle spectrum failed: {exc}")
        return EXIT_SOLVER
    for br in bridges:
        for pad in run["pads"]:
            try:
                rep = analysis.heteroclinic_realize(curve, params, system, i, j, int(pad), br)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            except (RealizationError, ArcError) as exc:
                _print(f"realization failed for bridge {br}, pad {pad}: {exc}")
                write_json(out / "heteroclinic-diagnostics.json", _report(cfg, "heteroclinic", {"error": str(exc)}, "solver_failure"))
                return EXIT_SOLVER
            reports.append(rep.to_dict())
            rows.append((",".join(map(str, br)), int(pad), rep.tail_distance, rep.decay_rate, 1.0 / sad.expansion))
            _print(f"bridge {br or '()'} pad {pad}: tail distance {rep.tail_distance:.3e}, rate {rep.decay_rate:.5g}")
    body = {"saddle": sad.to_dict(), "contraction": 1.0 / sad.expansion, "runs": reports}
    write_json(out / "heteroclinic.json", _report(cfg, "heteroclinic", body, "ok"))
    write_csv(out / "heteroclinic.csv", ("bridge", "pad", "tail_distance", "decay_rate", "contraction"), rows)
    return EXIT_OK


COMMANDS = {
    "ccs": cmd_ccs,
    "realize": cmd_realize,
    "simulate": cmd_simulate,
    "scan": cmd_scan,
    "saddle": cmd_saddle,
    "heteroclinic": cmd_heteroclinic,
}


# ---------------------------------------------------------------------------
# argument parsing


def _floats(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s.strip()]


def _ints(text: str) -> list[int]:
    return [int(s) for s in text.split(",") if s.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with [curve], [params], [run]")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override one config value")
    common.add_argument("--out", dest="output", help="output directory")
    common.add_argument("--h", type=float, help="energy jump")
    common.add_argument("--half-width", type=float, help="interval half-width")

    parser = argparse.ArgumentParser(prog="refrabill", description="Refraction billiard engine.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ccs", parents=[common], help="central configurations and interval system")

    p = sub.add_parser("realize", parents=[common], help="realize a word")
    p.add_argument("--word")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--periodic", dest="mode", action="store_const", const="periodic")
    g.add_argument("--fixed-ends", dest="mode", action="store_const", const="fixed_ends")
    p.add_argument("--xi-a", type=float)
    p.add_argument("--xi-b", type=float)
    p.add_argument("--no-check", dest="check", action="store_const", const=False)
    p.add_argument("--seeds", type=int, help="multi-start seeds (0 disables)")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("simulate", parents=[common], help="iterate the return map")
    p.add_argument("--xi", type=float)
    p.add_argument("--alpha", type=float, help="angle from the outward normal")
    p.add_argument("--v", type=_floats, help="velocity vx,vy")
    p.add_argument("--seed-word", help="start from the realized periodic word")
    p.add_argument("--steps", type=int)
    p.add_argument("--back-steps", type=int)
    p.add_argument("--permissive", action="store_const", const=True)

    p = sub.add_parser("scan", parents=[common], help="threshold scan over h")
    p.add_argument("--h-grid", type=_floats)
    p.add_argument("--words", help="semicolon-separated word literals")

    p = sub.add_parser("saddle", parents=[common], help="saddle spectra of homothetic fixed points")
    p.add_argument("--cc", type=_ints, help="configuration indices")

    p = sub.add_parser("heteroclinic", parents=[common], help="padded heteroclinic realizations")
    p.add_argument("--i", type=int)
    p.add_argument("--j", type=int)
    p.add_argument("--pads", type=_ints)
    p.add_argument("--bridges", help="semicolon-separated bridge words (empty allowed)")
    return parser


def _overrides(ns: argparse.Namespace) -> dict:
    run_keys = [
        "output", "half_width", "mode", "xi_a", "xi_b", "check", "seeds", "seed", "xi", "alpha", "v",
        "seed_word", "steps", "back_steps", "permissive", "cc", "i", "j", "pads",
    ]
    run = {k: getattr(ns, k) for k in run_keys if hasattr(ns, k)}
    if getattr(ns, "word", None):
        run["words"] = [ns.word]
    if getattr(ns, "words", None):
        run["words"] = [w for w in ns.words.split(";") if w.strip()]
    if getattr(ns, "bridges", None) is not None:
        run["bridges"] = [b.strip() for b in ns.bridges.split(";")]
    params = {"h": ns.h, "h_grid": getattr(ns, "h_grid", None)}
    return {"run": run, "params": params}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = resolve_config(ns.config, _overrides(ns), ns.set)
        params = _params(cfg)
        if ns.command != "ccs":
            check_pairing(params, _curve(cfg))
        return COMMANDS[ns.command](cfg)
    except (ConfigError, ParamsError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except InadmissibleDomainError as exc:
        sys.stderr.write(f"inadmissible: {exc}\n")
        return EXIT_INADMISSIBLE


if __name__ == "__main__":
    sys.exit(main())
