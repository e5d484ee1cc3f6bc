"""Command-line front end.

CSV columns (one row per reported number):

  model        canonical model JSON
  n            system size (empty for N -> infinity quantities)
  beta         inverse temperature
  estimator    what the value is, e.g. free_energy_limit, quenched_phi
  value        the number
  std_err      Monte Carlo standard error, or the tolerance for validate checks
  num_samples  Monte Carlo sample count
  seed         master seed
  rng_id       random generator algorithm
  model_hash   sha256 prefix of the model JSON
  version      package version

Exit codes: 0 ok, 1 validation failure, 2 configuration error, 3 numerical
domain error. The default output directory is taken from $ORTHOSPIN_OUTPUT_DIR.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field

from . import io, models, montecarlo, spectral, variational
from .errors import DomainError, NoTransitionError, OrthospinError

COMMANDS = ("limit", "variational", "beta0", "quenched", "annealed", "scan", "validate")
OUTPUT_ENV = "ORTHOSPIN_OUTPUT_DIR"
EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_DOMAIN = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    model: dict = field(default_factory=lambda: {"kind": "sk"})
    beta_grid: list = field(default_factory=lambda: [0.3])
    n_list: list = field(default_factory=lambda: [16])
    num_samples: int = 50
    seed: int = 0
    output_path: str | None = None
    format: str = "csv"
    workers: int | None = None
    interval: list = field(default_factory=lambda: [0.5, 4.0])
    criterion: str = "unique"

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"command: unknown command {self.command!r}")
        try:
            self.spec = models.ModelSpec.from_dict(self.model)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"model: {exc}") from None
        if not self.beta_grid or any(not math.isfinite(b) or b < 0 for b in self.beta_grid):
            raise ConfigError("beta: values must be finite and nonnegative")
        if any(b >= a for a, b in zip(self.beta_grid[1:], self.beta_grid)):
            raise ConfigError("beta_grid: must be strictly increasing")
        if not self.n_list or any(n < 2 for n in self.n_list):
            raise ConfigError("n: every size must be at least 2")
        if self.command in ("quenched", "scan") and max(self.n_list) > montecarlo.ENUMERATION_CAP:
            raise ConfigError(f"n_list: exceeds the enumeration cap {montecarlo.ENUMERATION_CAP}")
        if self.num_samples < 2 and self.command in ("annealed", "scan"):
            raise ConfigError("num_samples: need at least 2")
        if self.num_samples < 1:
            raise ConfigError("num_samples: must be positive")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format: must be csv or json, got {self.format!r}")
        if len(self.interval) != 2 or not 0 <= self.interval[0] < self.interval[1]:
            raise ConfigError("interval: need 0 <= lo < hi")
        if self.criterion not in ("unique", "global"):
            raise ConfigError("criterion: must be unique or global")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers: must be positive")
        return self

    def to_dict(self):
        out = asdict(self)
        out.pop("output_path")
        return out


# -- commands --------------------------------------------------------------------

def _profile(spec, closed_form=True):
    return spectral.TransformProfile(models.limiting_measure(spec), closed_form=closed_form)


def _cmd_limit(cfg):
    profile = _profile(cfg.spec)
    return [io.make_row(cfg.spec, "free_energy_limit", spectral.free_energy_limit(profile, b),
                        beta=b) for b in cfg.beta_grid]


def _cmd_variational(cfg):
    rf = variational.RateFunction(_profile(cfg.spec))
    rows = []
    for b in cfg.beta_grid:
        sol = variational.maximize_psi(rf, b)
        rows += [io.make_row(cfg.spec, "psi_max", sol.psi_value, beta=b),
                 io.make_row(cfg.spec, "x_star", sol.x_star, beta=b),
                 io.make_row(cfg.spec, "y_star", sol.y_star, beta=b)]
    return rows


def _cmd_beta0(cfg):
    rf = variational.RateFunction(_profile(cfg.spec))
    b0 = variational.beta_zero(rf, tuple(cfg.interval), criterion=cfg.criterion)
    return [io.make_row(cfg.spec, f"beta_zero_{cfg.criterion}", b0)]


def _cmd_quenched(cfg):
    rows = []
    for n in cfg.n_list:
        for b in cfg.beta_grid:
            est = montecarlo.quenched_free_energy(cfg.spec, n, b, cfg.num_samples, cfg.seed,
                                                  workers=cfg.workers)
            common = dict(n=n, beta=b, num_samples=cfg.num_samples, seed=cfg.seed)
            rows.append(io.make_row(cfg.spec, "quenched_phi", est.mean, std_err=est.std_err,
                                    **common))
            rows.append(io.make_row(cfg.spec, "quenched_phi_expected_d", est.expected_mean,
                                    std_err=est.expected_std_err, **common))
    return rows


def _cmd_annealed(cfg):
    measure = models.limiting_measure(cfg.spec)
    rows = []
    for n in cfg.n_list:
        for b in cfg.beta_grid:
            est = montecarlo.annealed_moments(measure, n, b, cfg.num_samples, cfg.seed,
                                              workers=cfg.workers)
            common = dict(n=n, beta=b, num_samples=cfg.num_samples, seed=cfg.seed)
            rows.append(io.make_row(cfg.spec, "annealed_first_rate", est.log_first_moment_rate,
                                    std_err=est.std_errs[0], **common))
            rows.append(io.make_row(cfg.spec, "annealed_second_rate", est.log_second_moment_rate,
                                    std_err=est.std_errs[1], **common))
    return rows


def _cmd_scan(cfg):
    rows = []
    for b in cfg.beta_grid:
        for r in montecarlo.concentration_scan(cfg.spec, b, cfg.n_list, cfg.num_samples, cfg.seed,
                                               workers=cfg.workers):
            rows.append(io.make_row(cfg.spec, "phi_std", r["std"], n=r["n"], beta=b,
                                    std_err=r["std_se"], num_samples=r["num_samples"],
                                    seed=cfg.seed))
    return rows


def validation_checks(cfg):
    """Cross-checks of closed forms, numeric pipeline and enumeration. Yields (name, error, tol)."""
    spec = cfg.spec
    closed = _profile(spec)
    numeric = _profile(spec, closed_form=False)
    rf = variational.RateFunction(closed)
    for b in cfg.beta_grid:
        if b == 0 or not 2.0 * b < closed.h_max:
            continue
        yield (f"closed_vs_numeric_limit@{b}",
               abs(closed.free_energy(b) - numeric.free_energy(b)), 1e-8)
        yield f"variational_identity@{b}", abs(variational.identity_gap(rf, b)), 1e-8
        try:
            window_ok = 2.0 * spectral.beta_window(closed, b).zeta < 1.0
        except DomainError:
            window_ok = False
        if window_ok:
            sol = variational.maximize_psi(rf, b)
            yield f"psi_max_vs_2I@{b}", abs(sol.psi_value - 2.0 * closed.free_energy(b)), 1e-6
    n = min(cfg.n_list[0], 10)
    coupling = models.sample_coupling(spec, n, cfg.seed)
    o = montecarlo.sample_haar(n, cfg.seed)
    for b in cfg.beta_grid:
        err = abs(montecarlo.exact_log_partition(coupling.d_values, o, b)
                  - montecarlo.naive_log_partition(coupling.d_values, o, b))
        yield f"gray_vs_naive@n={n},beta={b}", err, 1e-12


def _cmd_validate(cfg):
    rows = []
    failed = 0
    for name, err, tol in validation_checks(cfg):
        ok = err < tol
        failed += not ok
        rows.append(io.make_row(cfg.spec, name, err, std_err=tol))
        print(f"{'PASS' if ok else 'FAIL'} {name} error={err:.3e} tol={tol:.0e}")
    return rows, failed


HANDLERS = {
    "limit": _cmd_limit,
    "variational": _cmd_variational,
    "beta0": _cmd_beta0,
    "quenched": _cmd_quenched,
    "annealed": _cmd_annealed,
    "scan": _cmd_scan,
}


# -- argument handling --------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="orthospin",
        description=__doc__.split("\n\n")[0],
        epilog=__doc__.split("\n\n", 1)[1],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, formatter_class=argparse.RawDescriptionHelpFormatter,
                           epilog=__doc__.split("\n\n", 1)[1])
        p.add_argument("--model", help='model JSON, e.g. \'{"kind":"rom","p":0.5}\' (default sk)')
        p.add_argument("--beta", type=float, nargs="+", dest="beta_grid",
                       help="one inverse temperature or a strictly increasing grid")
        p.add_argument("--n", type=int, nargs="+", dest="n_list", help="system size(s)")
        p.add_argument("--num-samples", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--interval", type=float, nargs=2, help="beta0 search interval")
        p.add_argument("--criterion", choices=("unique", "global"),
                       help="beta0 predicate (default unique)")
        p.add_argument("--output", dest="output_path",
                       help=f"output file (default ${OUTPUT_ENV}/<command>.<format>)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--workers", type=int, help="parallel workers (default: all cores)")
        p.add_argument("--config", help="JSON file of RunConfig fields; supersedes flags")
    return parser


def config_from_args(args):
    values = {k: v for k, v in vars(args).items() if v is not None and k != "config"}
    if "model" in values:
        try:
            values["model"] = json.loads(values["model"])
        except json.JSONDecodeError as exc:
            raise ConfigError(f"model: invalid JSON ({exc.msg})") from None
    if args.config:
        try:
            with open(args.config) as fh:
                overrides = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {args.config!r} ({exc})") from None
        if "beta" in overrides:
            b = overrides.pop("beta")
            overrides["beta_grid"] = b if isinstance(b, list) else [b]
        if "n" in overrides:
            n = overrides.pop("n")
            overrides["n_list"] = n if isinstance(n, list) else [n]
        unknown = set(overrides) - set(RunConfig.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"config: unknown field(s) {sorted(unknown)}")
        values.update(overrides)
    try:
        return RunConfig(**values).validate()
    except TypeError as exc:
        raise ConfigError(f"config: {exc}") from None


def run(cfg: RunConfig):
    """Dispatch one configured run. Returns ``(exit_code, files_written)``."""
    if cfg.workers is None:
        cfg.workers = montecarlo.default_workers()
    failed = 0
    if cfg.command == "validate":
        rows, failed = _cmd_validate(cfg)
    else:
        rows = HANDLERS[cfg.command](cfg)
        for row in rows:
            parts = [f"{row['estimator']}={row['value']:.12g}"]
            parts += [f"{k}={row[k]}" for k in ("n", "beta") if row[k] != ""]
            if row["std_err"] != "":
                parts.append(f"std_err={row['std_err']:.3g}")
            print(" ".join(parts))
    path = cfg.output_path or os.path.join(os.environ.get(OUTPUT_ENV, "."),
                                           f"{cfg.command}.{cfg.format}")
    files = io.write_results(path, rows, cfg.to_dict(), cfg.format)
    return (EXIT_VALIDATION if failed else EXIT_OK), files


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"orthospin: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        code, _ = run(cfg)
    except (DomainError, NoTransitionError) as exc:
        print(f"orthospin: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OrthospinError as exc:
        print(f"orthospin: numerical error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return code


if __name__ == "__main__":
    sys.exit(main())
