#!/usr/bin/env python3
"""
Heavy-tail concentration bounds from the command line.

Examples:
    python heavytail.py bound --tail subexp --k 1 --mean 1 --m 100 --t 10 --beta 0.5
    python heavytail.py cbeta --tail subweibull --alpha 2 --c-alpha 1 --L 10000 --beta 0.5
    python heavytail.py tmax --tail subweibull --alpha 2 --c-alpha 1 --m 100 --beta 0.5 --c-method constant --c-value 1
    python heavytail.py experiment experiments/acceptance.yaml
    python heavytail.py ldcheck --tail polynomial --gamma 3 --a 0.3 --p 1 --m-grid 100,1000

Exit codes: 0 success, 1 numerical or domination failure, 2 usage error.
"""

import functools
import json
import logging
import sys

import click

from utils.concentration import bound as concentration_bound
from utils.concentration import bound_to_dict, default_beta, solve_t_max, subweibull_t_max
from utils.config_manager import SEED_ENV, ConfigManager, to_jsonable
from utils.errors import HeavyTailError
from utils.experiment_manager import ExperimentManager
from utils.large_deviation import DeviationSequence, ld_poly_limit, ld_ratio, ld_result_frame, ld_summary
from utils.montecarlo import MonteCarloConfig
from utils.tail_model import ReferenceDistribution, TailFamily, TailFunction, load_tabulated_csv
from utils.truncation import PROVIDERS, all_estimates, constant_c_provider

TAILS = ("subexp", "subweibull", "polynomial", "tabulated")
UNIT_BETA = click.FloatRange(0.0, 1.0, min_open=True)


def tail_options(func):
    """Family selection and parameters shared by the evaluation commands."""
    options = [
        click.option("--tail", "tail", type=click.Choice(TAILS), required=True, help="Tail family."),
        click.option("--k", type=click.FloatRange(0.0, min_open=True), help="SubExponential rate."),
        click.option("--mean", type=float, help="EX override for the SubExponential closed form."),
        click.option("--alpha", type=click.FloatRange(1.0), help="SubWeibull shape."),
        click.option("--c-alpha", type=click.FloatRange(0.0, min_open=True), help="SubWeibull coefficient."),
        click.option("--gamma", type=click.FloatRange(2.0, min_open=True), help="Polynomial exponent."),
        click.option("--table", type=click.Path(exists=True, dir_okay=False), help="t,I CSV for tabulated tails."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def c_options(func):
    func = click.option("--c-value", type=click.FloatRange(0.0, min_open=True),
                        help="Value for --c-method constant.")(func)
    func = click.option("--c-method", type=click.Choice(["exact", "ratio", "closed", "constant"]),
                        default=None, help="c_{L,beta} provider (default: closed, constant for tables).")(func)
    return func


def _require(name, value, tail):
    if value is None:
        raise click.UsageError(f"--{name.replace('_', '-')} is required for --tail {tail}")
    return value


def build_family(tail, k=None, alpha=None, c_alpha=None, gamma=None, table=None, **_):
    """Return (distribution or None, tail function) for the CLI flags."""
    if tail == "subexp":
        k = _require("k", k, tail)
        return ReferenceDistribution.exponential(k), TailFunction.sub_exponential(k)
    if tail == "subweibull":
        alpha, c_alpha = _require("alpha", alpha, tail), _require("c_alpha", c_alpha, tail)
        return ReferenceDistribution.weibull(alpha, c_alpha), TailFunction.sub_weibull(alpha, c_alpha)
    if tail == "polynomial":
        gamma = _require("gamma", gamma, tail)
        return ReferenceDistribution.pareto(gamma), TailFunction.polynomial(gamma)
    return None, load_tabulated_csv(_require("table", table, tail))


def build_provider(d, f, c_method, c_value, mean=None):
    if c_method is None:
        c_method = "constant" if d is None else "closed"
    if c_method == "constant":
        return constant_c_provider(_require("c_value", c_value, "<any> --c-method constant"))
    if d is None:
        raise click.UsageError(f"--c-method {c_method} needs a reference distribution; use --c-method constant")
    if c_method == "closed":
        return PROVIDERS["closed"](d, f, mean=mean)
    return PROVIDERS[c_method](d, f)


def numerical_errors(func):
    """Map library errors to exit code 1 with the error class name."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except HeavyTailError as e:
            click.echo(f"❌ {type(e).__name__}: {e}", err=True)
            sys.exit(1)
    return wrapper


def emit(payload):
    click.echo(json.dumps(to_jsonable(payload), indent=2))


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Log numerical diagnostics to stderr.")
def cli(verbose):
    """Concentration and large-deviation bounds for heavy-tailed i.i.d. sums."""
    if verbose:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@tail_options
@c_options
@click.option("--m", type=click.IntRange(1), required=True, help="Number of summands.")
@click.option("--t", type=click.FloatRange(0.0), required=True, help="Deviation per summand.")
@click.option("--beta", type=UNIT_BETA, help="Tilt fraction in (0, 1].")
@numerical_errors
def bound(m, t, beta, c_method, c_value, **family):
    """Evaluate P(S_m - E S_m > m t) <= bound."""
    d, f = build_family(**family)
    beta = default_beta(f) if beta is None else beta
    provider = build_provider(d, f, c_method, c_value, mean=family.get("mean"))
    result = bound_to_dict(concentration_bound(f, provider, m, t, beta))
    result["tail"] = f.describe()
    result["c_method"] = provider.name
    emit(result)


@cli.command()
@tail_options
@click.option("--L", "L", type=click.FloatRange(0.0, min_open=True), required=True, help="Truncation level.")
@click.option("--beta", type=UNIT_BETA, required=True, help="Tilt fraction in (0, 1].")
@numerical_errors
def cbeta(L, beta, **family):
    """Every applicable c_{L,beta} estimate side by side."""
    d, f = build_family(**family)
    if d is None:
        raise click.UsageError("cbeta needs a reference distribution (not --tail tabulated)")
    emit({
        "tail": f.describe(),
        "distribution": d.describe(),
        "L": L,
        "beta": beta,
        "estimates": all_estimates(d, f, L, beta, mean=family.get("mean")),
    })


@cli.command()
@tail_options
@c_options
@click.option("--m", type=click.IntRange(1), required=True, help="Number of summands.")
@click.option("--beta", type=UNIT_BETA, help="Tilt fraction in (0, 1].")
@numerical_errors
def tmax(m, beta, c_method, c_value, **family):
    """Solve for the regime boundary t_max."""
    d, f = build_family(**family)
    beta = default_beta(f) if beta is None else beta
    provider = build_provider(d, f, c_method, c_value, mean=family.get("mean"))
    payload = {
        "tail": f.describe(),
        "m": m,
        "beta": beta,
        "c_method": provider.name,
        "t_max": solve_t_max(f, provider, m, beta),
    }
    if provider.name == "constant" and f.family is TailFamily.SUB_WEIBULL and f.alpha > 1:
        payload["closed_form_t_max"] = subweibull_t_max(f.alpha, f.c_alpha, c_value, beta, m)
    emit(payload)


@cli.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--output-dir", type=click.Path(file_okay=False), help="Overrides run.output_dir.")
def experiment(config_path, output_dir):
    """Run the domination and LD experiments in a YAML config."""
    result = ExperimentManager(ConfigManager()).run_config(config_path, output_dir=output_dir)
    if result.get("error"):
        click.echo(f"❌ {result['error']}", err=True)
        sys.exit(2)
    click.echo(f"📄 Outputs in {result['output_dir']} (seed {result['seed']})", err=True)
    if not result["success"]:
        click.echo(f"❌ First failing experiment: {result['failed']}", err=True)
        sys.exit(1)


@cli.command()
@tail_options
@click.option("--a", type=click.FloatRange(0.0, min_open=True), required=True, help="Scale of gamma_m.")
@click.option("--p", type=float, required=True, help="Power of m in gamma_m.")
@click.option("--q", type=float, default=0.0, show_default=True, help="Power of log m in gamma_m.")
@click.option("--m-grid", required=True, help="Comma-separated m values.")
@click.option("--beta", type=UNIT_BETA, help="Tilt fraction for the rare-event screen.")
@click.option("--n-samples", type=click.IntRange(1), default=100_000, show_default=True)
@click.option("--batch-size", type=click.IntRange(1), default=100_000, show_default=True)
@click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=0, envvar=SEED_ENV, show_default=True)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), help="Write per-point rows here.")
@numerical_errors
def ldcheck(a, p, q, m_grid, beta, n_samples, batch_size, seed, csv_path, **family):
    """Measure the large-deviation ratio over an m grid."""
    try:
        grid = [int(x) for x in m_grid.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter("expected comma-separated integers", param_hint="--m-grid")
    d, f = build_family(**family)
    if d is None:
        raise click.UsageError("ldcheck samples from a reference distribution (not --tail tabulated)")
    s = DeviationSequence(a, p, q)
    mc = MonteCarloConfig(n_samples=n_samples, seed=seed, batch_size=min(batch_size, n_samples))
    if f.family is TailFamily.POLYNOMIAL:
        result = ld_poly_limit(f.gamma, s, grid, d, mc, beta=beta)
    else:
        result = ld_ratio(d, f, s, grid, mc, beta=beta)
    if csv_path:
        ConfigManager().write_csv(ld_result_frame(result), csv_path)
    emit({"sequence": s.describe(), "seed": seed, "n_samples": n_samples, **ld_summary(result)})


if __name__ == "__main__":
    cli()
