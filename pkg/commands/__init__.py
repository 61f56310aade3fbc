"""Command-line subcommands and their shared error handling."""
import functools
import json
import logging

import click

from utils.errors import (ArchiveFormatError, ComplexError, ConfigurationError,
                          IncompatibleEncodingError, InstanceFormatError)

logger = logging.getLogger(__name__)

EXIT_FAILED_CELLS = 1
EXIT_BAD_CONFIG = 2
EXIT_BAD_INPUT = 3


def report_errors(func):
    """Turn domain errors into a one-line diagnostic and the documented exit status."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (InstanceFormatError, ArchiveFormatError) as e:
            logger.error(f"Unreadable input: {e}")
            click.echo(f"Error: {e}", err=True)
            click.get_current_context().exit(EXIT_BAD_INPUT)
        except (ConfigurationError, IncompatibleEncodingError, ComplexError) as e:
            logger.error(f"Invalid configuration: {e}")
            click.echo(f"Error: {e}", err=True)
            click.get_current_context().exit(EXIT_BAD_CONFIG)

    return wrapper


def parse_overrides(pairs) -> dict:
    """KEY=VALUE pairs; values are read as JSON, falling back to plain strings."""
    values = {}
    for pair in pairs:
        key, sep, raw = pair.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"Override {pair!r} is not of the form KEY=VALUE")
        try:
            values[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            values[key.strip()] = raw
    return values
