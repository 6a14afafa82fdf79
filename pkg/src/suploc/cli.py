"""Command-line front end.

Commands::

    suploc exact     --model triangle:period=1 --T 2 -o law.json
    suploc estimate  --model ou --T 1 --n 100000 --bins 40 --seed 7 -o est.json
    suploc check     --law law.json --suite thm31
    suploc reproduce prop41 -o out/

Models are given as ``kind:key=val,key=val``.  Values may be plain
numbers or arithmetic using ``T`` (the window length), ``pi`` and
``sqrt``.  Kinds:

``triangle``  period
``sawtooth``  t, tau, r, k, R (optional), T (defaults to the window)
``waveform``  path (JSON waveform file)
``twowave``   period1, period2, amp2 (default 1), form (gaussian|amplitude-phase)
``ou``        grid_step (default 1e-3)

Exit codes: 0 success, 1 internal error, 2 usage or parameter error,
3 a check or target failed.
"""

from __future__ import annotations

import argparse
import ast
import json
import math
import operator
import os
import sys
from dataclasses import dataclass, field, fields

from . import _io
from .errors import ConstructionError, DataError, ParameterError, SuplocError
from .estimate import DensityEstimate, histogram, mc_tau_sample
from .experiments import DEFAULTS, EXPERIMENTS, run_dichotomy, run_ou_endpoints, run_prop41, run_prop42_left, run_prop42_right
from .models import (
    OrnsteinUhlenbeckModel,
    PhaseShiftModel,
    PiecewiseLinearWaveform,
    RngSpec,
    SawtoothCombParams,
    TwoWaveGaussianModel,
    build_sawtooth_comb,
    build_triangle,
)
from .theory import (
    ExactLaw,
    check_bound_estimate,
    check_thm31,
    check_thm32a,
    exact_tau_law_phase,
    format_reports,
    reports_to_dict,
)

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_FAIL = 0, 1, 2, 3

PHASE_KINDS = ("triangle", "sawtooth", "waveform")
SUITES = ("thm31", "thm32a", "bound-general", "bound-symmetric", "all")


class UsageError(SuplocError):
    pass


# --------------------------------------------------------------------------
# model spec mini-grammar
# --------------------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}
_FUNCS = {"sqrt": math.sqrt}


def eval_number(text: str, names: dict | None = None) -> float:
    """Evaluate a numeric literal or simple arithmetic expression."""
    env = {"pi": math.pi, "e": math.e}
    env.update(names or {})

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Name) and node.id in env:
            if env[node.id] is None:
                raise ParameterError(f"{node.id} is not set")
            return float(env[node.id])
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1:
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ParameterError(f"cannot evaluate {text!r}")

    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except SyntaxError as exc:
        raise ParameterError(f"cannot evaluate {text!r}") from exc


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    params: dict

    @classmethod
    def parse(cls, text: str) -> "ModelSpec":
        kind, _, rest = text.partition(":")
        kind = kind.strip()
        if kind not in PHASE_KINDS + ("twowave", "ou"):
            raise ParameterError(f"unknown model kind {kind!r}")
        params = {}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, eq, val = item.partition("=")
            if not eq or not key.strip():
                raise ParameterError(f"malformed model parameter {item!r}")
            params[key.strip()] = val.strip()
        return cls(kind, params)

    @property
    def is_phase(self) -> bool:
        return self.kind in PHASE_KINDS

    def _num(self, key, T, default=None, required=True):
        if key not in self.params:
            if default is not None or not required:
                return default
            raise ParameterError(f"model {self.kind} needs {key}=")
        return eval_number(self.params[key], {"T": T})

    def waveform(self, T: float | None) -> PiecewiseLinearWaveform:
        if self.kind == "triangle":
            return build_triangle(self._num("period", T))
        if self.kind == "sawtooth":
            k = self._num("k", T)
            params = SawtoothCombParams(
                t=self._num("t", T),
                T=self._num("T", T, default=T),
                tau=self._num("tau", T),
                r=self._num("r", T),
                k=int(k) if float(k).is_integer() else k,
                R=self._num("R", T, required=False),
            )
            return build_sawtooth_comb(params)
        if self.kind == "waveform":
            path = self.params.get("path")
            if not path:
                raise ParameterError("waveform model needs path=")
            try:
                return PiecewiseLinearWaveform.from_dict(_io.load(path))
            except (OSError, json.JSONDecodeError) as exc:
                raise ParameterError(f"cannot read waveform {path}: {exc}") from exc
        raise ParameterError("exact law unavailable for this model")

    def model(self, T: float | None):
        if self.is_phase:
            return PhaseShiftModel(self.waveform(T))
        if self.kind == "twowave":
            form = self.params.get("form", "gaussian")
            return TwoWaveGaussianModel(
                self._num("period1", T), self._num("period2", T), self._num("amp2", T, default=1.0), form, window=T
            )
        return OrnsteinUhlenbeckModel(self._num("grid_step", T, default=1e-3))


# --------------------------------------------------------------------------
# run configuration
# --------------------------------------------------------------------------


@dataclass
class RunConfig:
    command: str
    model: str | None = None
    T: float | None = None
    n: int | None = None
    bins: int = 40
    seed: int | None = None
    ci_level: float = 0.99
    output: str | None = None
    side: str = "leftmost"
    threads: int = 1
    grid_step: float | None = None
    law: str | None = None
    estimate: str | None = None
    suite: str = "all"
    experiment: str | None = None
    eps: list | None = None
    pairs: list | None = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_sources(cls, args: argparse.Namespace) -> "RunConfig":
        """Config file values, overridden by any flag given on the command line."""
        doc = {}
        if getattr(args, "config", None):
            try:
                doc = _io.load(args.config)
            except (OSError, json.JSONDecodeError) as exc:
                raise ParameterError(f"cannot read config {args.config}: {exc}") from exc
            if not isinstance(doc, dict):
                raise ParameterError("config file must hold a JSON object")
        names = {f.name for f in fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ParameterError(f"unknown config keys {sorted(unknown)}")
        values = dict(doc)
        for key, val in vars(args).items():
            if key in names and val is not None:
                values[key] = val
        values["command"] = args.command
        return cls(**values)


def _rng(config: RunConfig) -> RngSpec:
    if config.seed is None:
        rng = RngSpec.from_entropy()
        config.seed = rng.seed
        print(f"seed: {rng.seed}", file=sys.stderr)
        return rng
    return RngSpec(config.seed)


def _require(config: RunConfig, *keys):
    for key in keys:
        if getattr(config, key) is None:
            raise UsageError(f"--{key} is required for {config.command}")


def _write_json(doc, path):
    if path:
        _io.dump(doc, path)
    else:
        sys.stdout.write(_io.dumps(doc))


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_exact(config: RunConfig) -> int:
    _require(config, "model", "T")
    spec = ModelSpec.parse(config.model)
    if not spec.is_phase:
        raise ParameterError("exact law unavailable for this model")
    law = exact_tau_law_phase(spec.waveform(config.T), config.T, config.side)
    _write_json(law.to_dict(), config.output)
    return EXIT_OK


def cmd_estimate(config: RunConfig) -> int:
    _require(config, "model", "T", "n")
    spec = ModelSpec.parse(config.model)
    model = spec.model(config.T)
    rng = _rng(config)
    sample = mc_tau_sample(model, config.T, int(config.n), rng, config.side, config.grid_step, max(1, int(config.threads)))
    # only pure grid paths need a band around the endpoints
    atom_tol = sample.grid_step * 0.5 if spec.kind == "ou" else 0.0
    est = histogram(sample, config.T, int(config.bins), atom_tol, config.ci_level)
    if config.output:
        stem, _ = os.path.splitext(config.output)
        est.write(config.output, stem + ".csv")
    else:
        sys.stdout.write(_io.dumps(est.to_dict()))
    return EXIT_OK


def _load_input(config: RunConfig):
    if (config.law is None) == (config.estimate is None):
        raise UsageError("give exactly one of --law or --estimate")
    path = config.law or config.estimate
    try:
        doc = _io.load(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParameterError(f"cannot read {path}: {exc}") from exc
    if config.law is not None:
        return ExactLaw.from_dict(doc)
    return DensityEstimate.from_dict(doc)


def cmd_check(config: RunConfig) -> int:
    if config.suite not in SUITES:
        raise UsageError(f"--suite must be one of {SUITES}")
    obj = _load_input(config)
    reports = []
    suite = config.suite
    if suite in ("thm31", "all"):
        pairs = [tuple(p) for p in config.pairs] if config.pairs else None
        reports += check_thm31(obj, pairs=pairs, eps=config.eps)
    if suite in ("thm32a", "all"):
        reports.append(check_thm32a(obj))
    for name, bound in (("bound-general", "general"), ("bound-symmetric", "symmetric")):
        if suite == name:
            if not isinstance(obj, DensityEstimate):
                raise UsageError(f"--suite {name} needs --estimate")
            reports += check_bound_estimate(obj, bound)
    print(format_reports(reports))
    if config.output:
        _io.dump(reports_to_dict(reports), config.output)
    return EXIT_OK if all(r.passed or r.skipped for r in reports) else EXIT_FAIL


def cmd_reproduce(config: RunConfig) -> int:
    exp = config.experiment
    if exp not in EXPERIMENTS:
        raise UsageError(f"experiment must be one of {EXPERIMENTS}")
    params = dict(DEFAULTS[exp])
    if config.T is not None:
        params["T"] = config.T
    if config.n is not None and "n" in params:
        params["n"] = int(config.n)
    for key, val in config.extra.items():
        if key not in params:
            raise ParameterError(f"unknown parameter {key!r} for {exp}")
        params[key] = val
    threads = max(1, int(config.threads))
    if exp == "prop41":
        result = run_prop41(**params)
    elif exp == "prop42-left":
        result = run_prop42_left(rng=_rng(config), threads=threads, **params)
    elif exp == "prop42-right":
        result = run_prop42_right(rng=_rng(config), threads=threads, **params)
    elif exp == "ou-endpoints":
        result = run_ou_endpoints(rng=_rng(config), threads=threads, **params)
    else:
        T = params["T"]
        waveform = ModelSpec.parse(config.model).waveform(T) if config.model else None
        result = run_dichotomy(waveform, T, params["n"], _rng(config))
    print(format_reports(result.reports))
    if "classification" in result.achieved:
        print(f"classification: {result.achieved['classification']}")
    if config.output:
        result.write(config.output)
    return EXIT_OK if result.passed else EXIT_FAIL


COMMANDS = {"exact": cmd_exact, "estimate": cmd_estimate, "check": cmd_check, "reproduce": cmd_reproduce}


def _parse_set(items):
    out = {}
    for item in items or []:
        key, eq, val = item.partition("=")
        if not eq:
            raise ParameterError(f"--set expects key=value, got {item!r}")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = eval_number(val)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="suploc", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, mc=False):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--model", help="model spec kind:key=val,...")
        p.add_argument("--T", type=float, help="window length")
        p.add_argument("--side", choices=("leftmost", "rightmost"))
        p.add_argument("-o", "--output", help="output path")
        if mc:
            p.add_argument("--n", type=int, help="number of paths")
            p.add_argument("--seed", type=int, help="random seed (drawn and printed if omitted)")
            p.add_argument("--threads", type=int, help="worker threads")
            p.add_argument("--ci-level", dest="ci_level", type=float)
            p.add_argument("--grid-step", dest="grid_step", type=float)

    p = sub.add_parser("exact", help="exact law of a phase-shift model")
    common(p)
    p = sub.add_parser("estimate", help="Monte Carlo density estimate")
    common(p, mc=True)
    p.add_argument("--bins", type=int)
    p = sub.add_parser("check", help="run inequality checks on a law or estimate")
    p.add_argument("--config")
    p.add_argument("--law")
    p.add_argument("--estimate")
    p.add_argument("--suite", choices=SUITES)
    p.add_argument("--eps", type=float, nargs="+")
    p.add_argument("--pair", dest="pairs", type=float, nargs=2, action="append")
    p.add_argument("-o", "--output")
    p = sub.add_parser("reproduce", help="rerun an experiment with its default parameters")
    p.add_argument("experiment", choices=EXPERIMENTS)
    common(p, mc=True)
    p.add_argument("--set", dest="set_items", action="append", metavar="KEY=VALUE", help="override an experiment parameter")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = RunConfig.from_sources(args)
        if getattr(args, "set_items", None):
            config.extra.update(_parse_set(args.set_items))
        return COMMANDS[args.command](config)
    except (UsageError, ParameterError, DataError, ConstructionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SuplocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - reported, not raised
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
