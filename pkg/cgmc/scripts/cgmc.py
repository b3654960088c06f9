#!/usr/bin/env python
"""
``cgmc``
========

Runs the coarse-grained Monte Carlo experiments described by a configuration file and
writes their results as CSV files.

::

    cgmc simulate --config experiments/island.cfg --workers 8
    cgmc compare --config experiments/weak_error.cfg --seed 7 --out runs/errors
    cgmc exit-times --config experiments/exit_times.cfg
    cgmc mean-field --config experiments/hysteresis.cfg
    cgmc oracle-check --out runs/oracle


:author: Athanasios Anastasiou
:date: Oct 2026
"""
import functools
import logging

import click

from ..config import load_config
from ..exceptions import CGMCError, ConfigError
from ..harness import cmd_compare, cmd_exit_times, cmd_mean_field, cmd_oracle_check, cmd_simulate


def experiment_options(fn):
    """
    Options shared by every command that runs a configured experiment.
    """
    @click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False),
                  help="The experiment configuration file")
    @click.option("--seed", type=click.IntRange(min=0), default=None, help="Overrides run.master_seed")
    @click.option("--workers", type=click.IntRange(min=1), default=1, envvar="CGMC_WORKERS", show_default=True,
                  help="Worker processes for the realizations (env CGMC_WORKERS)")
    @click.option("--time-step", type=click.Choice(["paper", "exponential"]), default=None,
                  help="Overrides run.time_step_mode")
    @click.option("--out", type=click.Path(file_okay=False), default=None, help="Overrides outputs.directory")
    @click.pass_context
    @functools.wraps(fn)
    def wrapper(ctx, config_path, seed, workers, time_step, out, **kwargs):
        try:
            config = load_config(config_path).with_overrides(master_seed=seed, time_step_mode=time_step,
                                                             directory=out)
        except ConfigError as e:
            for an_error in e.errors:
                click.echo(f"{config_path}: {an_error}", err=True)
            ctx.exit(2)
        try:
            written = fn(config, workers, **kwargs)
        except CGMCError as e:
            click.echo(f"Error: {e}", err=True)
            ctx.exit(1)
        for a_path in written:
            click.echo(str(a_path))
    return wrapper


@click.group()
@click.option("-v", "--verbose", count=True, help="Repeat for more detail")
def cgmc(verbose):
    """
    Coarse-grained kinetic Monte Carlo for adsorption and desorption on a 1-D lattice.
    """
    level = logging.WARNING if verbose == 0 else (logging.INFO if verbose == 1 else logging.DEBUG)
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")


@cgmc.command()
@experiment_options
def simulate(config, workers):
    """
    Coverage time series (and snapshots) for every coarse-graining level and realization.
    """
    return cmd_simulate(config, workers)


@cgmc.command()
@experiment_options
def compare(config, workers):
    """
    Weak and strong errors of the coarse levels against the microscopic process.
    """
    return cmd_compare(config, workers)


@cgmc.command("exit-times")
@experiment_options
def exit_times(config, workers):
    """
    Exit time statistics and histograms per coarse-graining level.
    """
    return cmd_exit_times(config, workers)


@cgmc.command("mean-field")
@experiment_options
def mean_field(config, workers):
    """
    Mean field equilibrium coverages over a range of fields.
    """
    return cmd_mean_field(config)


@cgmc.command("oracle-check")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Directory for oracle_check.json")
@click.pass_context
def oracle_check(ctx, out):
    """
    Exact checks of detailed balance and stationarity on tiny lattices.
    """
    try:
        checks, path = cmd_oracle_check(out)
    except CGMCError as e:
        click.echo(f"Error: {e}", err=True)
        ctx.exit(1)
    for a_check in checks:
        click.echo(f"{'PASS' if a_check.passed else 'FAIL'} {a_check.name}: {a_check.value:.3g}")
    if path is not None:
        click.echo(str(path))
    if not all(c.passed for c in checks):
        ctx.exit(1)


if __name__ == "__main__":
    cgmc()
