"""Command-line interface: validate, compile, disasm, serve, run."""

from sbpm.cli.main import main

__all__ = ["main"]
