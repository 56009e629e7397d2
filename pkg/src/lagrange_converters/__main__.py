"""Entry point for running as python -m lagrange_converters."""

from lagrange_converters.cli import main

main()
