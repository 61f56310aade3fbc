"""
`fixtures`: built-in complexes and clouds with their expected invariants.
"""
import logging
from typing import Optional

import click

from services.fixture_service import FIXTURES, list_fixtures, write_fixture

logger = logging.getLogger(__name__)


@click.command("fixtures")
@click.option("--list", "show_list", is_flag=True, help="List fixture names")
@click.option("--name", type=click.Choice(list_fixtures()), help="Fixture to write")
@click.option("--all", "write_all", is_flag=True, help="Write every fixture")
@click.option("--out", type=click.Path(file_okay=False), help="Output directory")
@click.pass_context
def fixtures_command(ctx, show_list: bool, name: Optional[str], write_all: bool, out: Optional[str]):
    """Emit homology fixtures for external verification."""
    if show_list:
        for fixture_name in list_fixtures():
            click.echo(f"{fixture_name}\t{FIXTURES[fixture_name].kind}\t{FIXTURES[fixture_name].description}")
        return

    names = list_fixtures() if write_all else [name] if name else []
    if not names:
        raise click.UsageError("Pass --list, --name NAME or --all")

    out_dir = out or ctx.obj["run_config"]["out_dir"]
    for fixture_name in names:
        paths = write_fixture(fixture_name, out_dir)
        click.echo(f"{fixture_name}: {paths['data']}")
