"""Command-line interface: test real data, simulate processes, re-run grids.

Three subcommands:

* ``test``      run the robust no-predictability test on a y,x CSV;
* ``simulate``  write one simulated dataset as CSV;
* ``reproduce`` re-run a published size grid or a power curve.

Option values resolve as flags > TOML config file > built-in defaults, and
the resolved configuration is echoed before results.  Exit codes: 0 success,
1 runtime error, 2 rejection under ``--gate``, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .core import (
    BandwidthSpec,
    DEFAULT_LEVELS,
    KernelSpec,
    PredrobustError,
    RegressionSample,
    Seed,
    TooShort,
    VOL_TRUE,
    VolatilityPath,
    build_sample,
)
from .dgp import (
    BreakVol,
    ConstantVol,
    ContinuousDgpConfig,
    DiscreteDgpConfig,
    GarchVol,
    GbmVol,
    RegimeVol,
    SAMPLING_DAILY,
    SAMPLING_MONTHLY,
    simulate_continuous,
    simulate_discrete,
    write_dataset_csv,
)
from .inference import ols_t_stat, tau_oracle, tau_sigma_hat
from .montecarlo import (
    McConfig,
    reproduce_table,
    run_power,
    write_power_svg,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_GATE = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class ParseError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse with the conventional 64 exit status for usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# config file support
# ---------------------------------------------------------------------------

def _load_toml(path: str) -> dict:
    try:
        import tomllib as toml_mod  # Python >= 3.11
    except ImportError:
        try:
            import tomli as toml_mod
        except ImportError:
            raise PredrobustError(
                "TOML config support needs the tomli package on this Python"
            )
    try:
        with open(path, "rb") as fh:
            return toml_mod.load(fh)
    except FileNotFoundError:
        raise PredrobustError(f"config file not found: {path}")
    except toml_mod.TOMLDecodeError as exc:
        raise PredrobustError(f"config file {path} is not valid TOML: {exc}")


def _resolve(args, section: str, defaults: dict) -> dict:
    """Flags > TOML [section] > defaults; returns the merged option dict."""
    table = {}
    if args.config:
        raw = _load_toml(args.config)
        table = raw.get(section, {})
        unknown = set(table) - set(defaults)
        if unknown:
            raise UsageError(
                f"unknown key(s) in [{section}] of {args.config}: "
                + ", ".join(sorted(unknown))
            )
    merged = {}
    for key, fallback in defaults.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
        elif key in table:
            merged[key] = table[key]
        else:
            merged[key] = fallback
    return merged


def _echo_config(section: str, options: dict) -> None:
    parts = " ".join(f"{k}={_show(v)}" for k, v in options.items())
    print(f"config [{section}]: {parts}")


def _show(value) -> str:
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


# ---------------------------------------------------------------------------
# test subcommand
# ---------------------------------------------------------------------------

TEST_DEFAULTS = {
    "kernel": "epanechnikov",
    "bandwidth": None,
    "bandwidth_rate": [1.0, 1.0 / 3.0],
    "demean": "recursive",
    "methods": ["tau_sigma_hat"],
    "levels": list(DEFAULT_LEVELS),
    "diagnostics": "",
    "gate": False,
}


def _read_columns(path: str):
    """y, x, and (if present) true_vol columns from a headed CSV."""
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise PredrobustError(f"input file not found: {path}")
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(f"{path}: empty file, expected a y,x header row")
        fields = [f.strip() for f in reader.fieldnames]
        missing = {"y", "x"} - set(fields)
        if missing:
            raise ParseError(
                f"{path}: header must include y and x columns, "
                f"missing {', '.join(sorted(missing))}"
            )
        has_vol = "true_vol" in fields
        ys, xs, vols = [], [], []
        for row in reader:
            line = reader.line_num
            for key, dest in (("y", ys), ("x", xs)) + (
                (("true_vol", vols),) if has_vol else ()
            ):
                text = (row.get(key) or "").strip()
                try:
                    dest.append(float(text))
                except ValueError:
                    raise ParseError(
                        f"{path}:{line}: column {key!r} has non-numeric "
                        f"value {text!r}"
                    )
    if not ys:
        raise TooShort(f"{path}: no data rows")
    return (
        np.asarray(ys),
        np.asarray(xs),
        np.asarray(vols) if has_vol else None,
    )


def _demean_predictor(sample: RegressionSample) -> RegressionSample:
    """Replace each instrument with its deviation from the mean of earlier
    predictor levels; the response stays raw (the first pair is dropped
    because its instrument has no history)."""
    counts = np.arange(1, sample.T + 1, dtype=np.float64)
    run_mean = np.cumsum(sample.x_lag) / counts
    return RegressionSample(
        y=sample.y[1:], x_lag=sample.x_lag[1:] - run_mean[:-1]
    )


def cmd_test(args) -> int:
    opts = _resolve(args, "test", TEST_DEFAULTS)
    _echo_config("test", opts)

    raw_y, raw_x, true_vol = _read_columns(args.input)
    sample = build_sample(raw_y, raw_x)
    vol_values = None if true_vol is None else true_vol[1:]
    if opts["demean"] not in ("none", "recursive"):
        raise UsageError(f"--demean must be none or recursive, got {opts['demean']!r}")
    if opts["demean"] == "recursive":
        sample = _demean_predictor(sample)
        if vol_values is not None:
            vol_values = vol_values[1:]

    kernel = _kernel_from_name(opts["kernel"])
    if opts["bandwidth"] is not None:
        bandwidth = BandwidthSpec.explicit(float(opts["bandwidth"]))
    else:
        c, alpha = (float(v) for v in opts["bandwidth_rate"])
        bandwidth = BandwidthSpec.rate(c=c, alpha=alpha)
    levels = tuple(float(v) for v in opts["levels"])
    h = bandwidth.resolve(sample.T)

    print(f"observations: {len(raw_y)} rows, {sample.T} usable pairs")
    print(f"bandwidth: h={h:.4f} (T={sample.T})")

    outcomes = {}
    for method in opts["methods"]:
        if method == "tau_sigma_hat":
            outcome = tau_sigma_hat(
                sample,
                kernel=kernel,
                bandwidth=bandwidth,
                levels=levels,
                allow_non_lipschitz=(kernel.family == "uniform"),
            )
        elif method == "ols_t":
            outcome = ols_t_stat(sample, levels=levels)
        elif method == "tau_oracle":
            if vol_values is None:
                raise UsageError(
                    "tau_oracle needs a true_vol column in the input CSV"
                )
            outcome = tau_oracle(
                sample,
                VolatilityPath(values=vol_values, kind=VOL_TRUE),
                levels=levels,
            )
        else:
            raise UsageError(f"unknown method {method!r}")
        outcomes[method] = outcome
        decisions = "  ".join(
            f"reject@{lv:g}={'yes' if rej else 'no'}"
            for lv, rej in outcome.rejected_at.items()
        )
        print(
            f"{method}: stat={outcome.statistic:+.6f} "
            f"p={outcome.p_value:.6f}  {decisions}"
        )

    if opts["diagnostics"]:
        _write_diagnostics(opts["diagnostics"], outcomes)
        print(f"diagnostics written to {opts['diagnostics']}")

    if opts["gate"]:
        primary = levels[0]
        gated = any(o.rejected_at[primary] for o in outcomes.values())
        if gated:
            print(f"gate: rejected at the {primary:g} level")
            return EXIT_GATE
        print(f"gate: not rejected at the {primary:g} level")
    return EXIT_OK


def _kernel_from_name(name: str) -> KernelSpec:
    try:
        return {
            "epanechnikov": KernelSpec.epanechnikov,
            "quartic": KernelSpec.quartic,
            "uniform": KernelSpec.uniform,
        }[name]()
    except KeyError:
        raise UsageError(f"unknown kernel {name!r}")


def _write_diagnostics(path: str, outcomes: dict) -> None:
    outcome = outcomes.get("tau_sigma_hat")
    if outcome is None or not outcome.diagnostics:
        raise UsageError("--diagnostics requires the tau_sigma_hat method")
    vol = outcome.diagnostics["volatility"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "r", "sigma_hat"])
        T = len(vol)
        for t in range(1, T + 1):
            writer.writerow([t, repr((t - 1) / T), repr(float(vol.values[t - 1]))])


# ---------------------------------------------------------------------------
# simulate subcommand
# ---------------------------------------------------------------------------

SIMULATE_DEFAULTS = {
    "model": "cnst",
    "family": "",
    "T": 0,
    "years": 0,
    "kappa": 0.0,
    "beta_bar": 0.0,
    "sigma0": 1.0,
    "sigma1": 4.0,
    "garch_alpha": 0.0,
    "garch_beta": 0.0,
    "garch_raw": False,
    "gbm_squared": False,
    "sampling": SAMPLING_MONTHLY,
    "seed": None,
    "out": "",
}

_DISCRETE_MODELS = ("cnst", "sb", "garch")
_CONTINUOUS_MODELS = ("cnst", "sb", "gbm", "rs")


def cmd_simulate(args) -> int:
    opts = _resolve(args, "simulate", SIMULATE_DEFAULTS)

    if not opts["out"]:
        raise UsageError("--out is required")
    model = opts["model"]
    family = opts["family"]
    if not family:
        family = "continuous" if model in ("gbm", "rs") else "discrete"
    if family not in ("discrete", "continuous"):
        raise UsageError(f"--family must be discrete or continuous, got {family!r}")

    seed = opts["seed"]
    seed_note = ""
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (2**63))
        seed_note = " (chosen randomly; pass --seed to reproduce)"
    seed = int(seed)

    if family == "discrete":
        if model not in _DISCRETE_MODELS:
            raise UsageError(f"model {model!r} is not a discrete-time model")
        if opts["T"] <= 0:
            raise UsageError("--T is required for discrete-time simulation")
        vol = _discrete_vol(model, opts)
        config = DiscreteDgpConfig(
            T=int(opts["T"]),
            beta_bar=float(opts["beta_bar"]),
            kappa_bar=float(opts["kappa"]),
            vol_model=vol,
            garch_raw_innovation=bool(opts["garch_raw"]),
        )
        _echo_config("simulate", {**opts, "seed": seed})
        dataset = simulate_discrete(config, Seed(seed))
    else:
        if model not in _CONTINUOUS_MODELS:
            raise UsageError(f"model {model!r} is not a continuous-time model")
        if opts["years"] <= 0:
            raise UsageError("--years is required for continuous-time simulation")
        vol = _continuous_vol(model, opts)
        config = ContinuousDgpConfig(
            years=int(opts["years"]),
            beta_bar=float(opts["beta_bar"]),
            kappa_bar=float(opts["kappa"]),
            vol_model=vol,
            sampling=opts["sampling"],
        )
        _echo_config("simulate", {**opts, "seed": seed})
        dataset = simulate_continuous(config, Seed(seed))

    write_dataset_csv(dataset, opts["out"])
    T = dataset.sample.T
    print(f"seed: {seed}{seed_note}")
    print(f"wrote {T + 1} rows to {opts['out']}")

    if model == "sb":
        y = dataset.sample.y
        cut = int(0.8 * len(y))
        early = float(np.var(y[:cut]))
        late = float(np.var(y[cut:]))
        if early > 0:
            expected = (float(opts["sigma1"]) / float(opts["sigma0"])) ** 2
            print(
                f"variance ratio after/before break: {late / early:.2f} "
                f"(expect about {expected:.0f})"
            )
    return EXIT_OK


def _discrete_vol(model, opts):
    if model == "cnst":
        return ConstantVol()
    if model == "sb":
        return BreakVol(sigma0=float(opts["sigma0"]), sigma1=float(opts["sigma1"]))
    if opts["garch_alpha"] <= 0 and opts["garch_beta"] <= 0:
        raise UsageError("--garch-alpha (and optionally --garch-beta) required")
    return GarchVol(alpha=float(opts["garch_alpha"]), beta=float(opts["garch_beta"]))


def _continuous_vol(model, opts):
    if model == "cnst":
        return ConstantVol()
    if model == "sb":
        return BreakVol(sigma0=float(opts["sigma0"]), sigma1=float(opts["sigma1"]))
    if model == "gbm":
        return GbmVol(squared_diffusion=bool(opts["gbm_squared"]))
    return RegimeVol(sigma0=float(opts["sigma0"]), sigma1=float(opts["sigma1"]))


# ---------------------------------------------------------------------------
# reproduce subcommand
# ---------------------------------------------------------------------------

REPRODUCE_DEFAULTS = {
    "table": 0,
    "power": [],
    "model": "",
    "kappa": 0.0,
    "T": 0,
    "reps": 10_000,
    "seed": 0,
    "workers": None,
    "models": [],
    "out": "",
    "report": "",
    "chart": "",
}


def cmd_reproduce(args) -> int:
    opts = _resolve(args, "reproduce", REPRODUCE_DEFAULTS)
    if opts["reps"] < 100:
        raise UsageError(f"--reps must be at least 100, got {opts['reps']}")
    table_mode = bool(opts["table"])
    # --power takes either three inline values (MODEL KAPPA T) or no values,
    # in which case the design comes from --model/--kappa/--T
    power_mode = getattr(args, "power", None) is not None or bool(opts["power"])
    if table_mode == power_mode:
        raise UsageError("exactly one of --table or --power is required")
    _echo_config("reproduce", opts)

    if table_mode:
        report = reproduce_table(
            opts["table"],
            reps=int(opts["reps"]),
            master_seed=int(opts["seed"]),
            workers=opts["workers"],
            models=tuple(opts["models"]) or None,
        )
        text = report.markdown()
        if opts["report"]:
            with open(opts["report"], "w") as fh:
                fh.write(text + "\n")
            print(f"deviation report written to {opts['report']}")
        else:
            print(text)
        if opts["out"]:
            report.size_table.to_csv(opts["out"])
            print(f"size table written to {opts['out']}")
        return EXIT_OK

    inline = list(opts["power"])
    if inline:
        if len(inline) != 3:
            raise UsageError(
                "--power takes MODEL KAPPA T inline, or no values with "
                "--model/--kappa/--T flags"
            )
        model, kappa, T = inline
    else:
        model, kappa, T = opts["model"], opts["kappa"], opts["T"]
        if not model or int(T) <= 0:
            raise UsageError("--power needs --model and --T (plus optional --kappa)")
    kappa = float(kappa)
    T = int(T)
    dgp = _power_dgp(str(model), kappa, T)
    config = McConfig(
        dgp=dgp,
        reps=int(opts["reps"]),
        methods=("tau_sigma_hat", "ols_t"),
        levels=(0.05,),
        master_seed=int(opts["seed"]),
        workers=opts["workers"],
    )
    curve = run_power(config)
    rates = curve.rates("tau_sigma_hat")
    grid = curve.beta_grid
    print("size-adjusted power, tau_sigma_hat, level 0.05:")
    for b, r in zip(grid, rates):
        print(f"  beta_bar={b:5.1f}  reject={r:6.2f}%")
    if opts["out"]:
        curve.to_csv(opts["out"])
        print(f"power curve written to {opts['out']}")
    if opts["chart"]:
        write_power_svg(curve, opts["chart"])
        print(f"chart written to {opts['chart']}")
    return EXIT_OK


def _power_dgp(model: str, kappa: float, T: int):
    discrete = {
        "cnst": ConstantVol(),
        "sb": BreakVol(),
        "arch-0.5773": GarchVol(alpha=0.5773),
        "arch-0.7325": GarchVol(alpha=0.7325),
        "igarch-0.9-0.1": GarchVol(alpha=0.9, beta=0.1),
        "igarch-0.1-0.9": GarchVol(alpha=0.1, beta=0.9),
    }
    if model in discrete:
        return DiscreteDgpConfig(
            T=T,
            kappa_bar=kappa,
            vol_model=discrete[model],
            garch_raw_innovation=isinstance(discrete[model], GarchVol),
        )
    continuous = {
        "gbm": GbmVol(),
        "gbm-alt": GbmVol(squared_diffusion=True),
        "rs": RegimeVol(),
    }
    if model in continuous:
        if T % 12 != 0:
            raise UsageError(
                f"continuous-model T must be a multiple of 12 (monthly), got {T}"
            )
        return ContinuousDgpConfig(
            years=T // 12, kappa_bar=kappa, vol_model=continuous[model]
        )
    raise UsageError(f"unknown model {model!r} for power")


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(
        prog="predrobust",
        description="Volatility-robust predictability testing",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_test = sub.add_parser(
        "test", help="test a y,x CSV for predictability",
        description=(
            "Run the robust no-predictability test on a CSV with y and x "
            "header columns.  By default the predictor is recursively "
            "demeaned (each lag against the mean of its own past); the "
            "response is left untouched."
        ),
    )
    p_test.add_argument("input", help="CSV file with y and x columns")
    p_test.add_argument("--config", help="TOML config file")
    p_test.add_argument(
        "--kernel", choices=("epanechnikov", "quartic", "uniform")
    )
    p_test.add_argument("--bandwidth", type=float, help="explicit h in (0,1)")
    p_test.add_argument(
        "--bandwidth-rate", dest="bandwidth_rate", nargs=2, type=float,
        metavar=("C", "ALPHA"), help="h = C * T^(-ALPHA)",
    )
    p_test.add_argument("--demean", choices=("none", "recursive"))
    p_test.add_argument(
        "--methods", nargs="+",
        choices=("tau_sigma_hat", "ols_t", "tau_oracle"),
    )
    p_test.add_argument("--levels", nargs="+", type=float)
    p_test.add_argument("--diagnostics", help="write the volatility path CSV here")
    p_test.add_argument(
        "--gate", action="store_const", const=True,
        help="exit 2 when the first level rejects",
    )
    p_test.set_defaults(func=cmd_test)

    p_sim = sub.add_parser(
        "simulate", help="write one simulated dataset as CSV"
    )
    p_sim.add_argument("--config", help="TOML config file")
    p_sim.add_argument(
        "--model", choices=("cnst", "sb", "garch", "gbm", "rs")
    )
    p_sim.add_argument("--family", choices=("discrete", "continuous"))
    p_sim.add_argument("--T", type=int, dest="T", help="discrete sample size")
    p_sim.add_argument("--years", type=int, help="continuous span in years")
    p_sim.add_argument("--kappa", type=float, help="local-to-unity drift")
    p_sim.add_argument("--beta-bar", dest="beta_bar", type=float)
    p_sim.add_argument("--sigma0", type=float, help="pre-break / low-state volatility")
    p_sim.add_argument("--sigma1", type=float, help="post-break / high-state volatility")
    p_sim.add_argument("--garch-alpha", dest="garch_alpha", type=float)
    p_sim.add_argument("--garch-beta", dest="garch_beta", type=float)
    p_sim.add_argument(
        "--garch-raw", dest="garch_raw", action="store_const", const=True,
        help="drive the variance recursion with raw innovations",
    )
    p_sim.add_argument(
        "--gbm-squared", dest="gbm_squared", action="store_const", const=True,
        help="use the squared diffusion coefficient variant",
    )
    p_sim.add_argument("--sampling", choices=(SAMPLING_MONTHLY, SAMPLING_DAILY))
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--out", help="output CSV path")
    p_sim.set_defaults(func=cmd_simulate)

    p_rep = sub.add_parser(
        "reproduce", help="re-run a published size grid or power curve"
    )
    p_rep.add_argument("--config", help="TOML config file")
    p_rep.add_argument("--table", type=int, choices=(1, 2))
    p_rep.add_argument(
        "--power", nargs="*", metavar="MODEL KAPPA T",
        help=(
            "power curve for one design: --power cnst 0 600, or the "
            "spelled-out form --power --model cnst --kappa 0 --T 600"
        ),
    )
    p_rep.add_argument("--model", help="design model label for --power")
    p_rep.add_argument("--kappa", type=float, help="design drift for --power")
    p_rep.add_argument("--T", type=int, dest="T", help="design size for --power")
    p_rep.add_argument("--reps", type=int)
    p_rep.add_argument("--seed", type=int)
    p_rep.add_argument("--workers", type=int)
    p_rep.add_argument(
        "--models", nargs="+", help="restrict the grid to these model labels"
    )
    p_rep.add_argument("--out", help="write the table/curve CSV here")
    p_rep.add_argument("--report", help="write the markdown report here")
    p_rep.add_argument("--chart", help="write a power-curve SVG here")
    p_rep.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"predrobust: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"predrobust: parse error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except PredrobustError as exc:
        print(f"predrobust: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
