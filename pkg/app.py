import logging
from typing import Optional

import click
from dotenv import load_dotenv

# Import commands and utilities
from commands.analyze_commands import analyze_command
from commands.compare_commands import compare_command
from commands.fixture_commands import fixtures_command
from commands.solve_commands import solve_command
from utils.logging_config import setup_logging

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)


def create_cli() -> click.Group:
    """Application factory for the topo-meta command line."""

    @click.group()
    @click.option("--log-level", help="Override TOPO_META_LOG_LEVEL")
    @click.pass_context
    def cli(ctx, log_level: Optional[str]):
        """Topological VNS/EM metaheuristics and persistence analysis of solution archives."""
        # Load and validate configuration
        from config import Config
        config = Config()
        config_status = config.validate()

        # Setup logging first
        level = log_level or (config.LOG_LEVEL if config_status["valid"] else "INFO")
        setup_logging(level, config.LOG_DIR)

        if not config_status["valid"]:
            for issue in config_status["issues"]:
                click.echo(f"Error: {issue}", err=True)
            ctx.exit(2)

        ctx.obj = {"config": config, "run_config": config_status["run_config"]}

    # Register commands
    cli.add_command(solve_command)
    cli.add_command(analyze_command)
    cli.add_command(compare_command)
    cli.add_command(fixtures_command)

    return cli


def main():
    create_cli()(prog_name="topo-meta")


if __name__ == "__main__":
    main()
