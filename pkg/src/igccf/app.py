# Copyright (c) 2025 knguyen1
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.

"""Application entrypoint for the ``igccf`` command line."""

from __future__ import annotations

import logging
import sys

from igccf.cli.commands import COMMANDS, EXIT_FAILURE, EXIT_USAGE
from igccf.cli.parser import build_parser, collect_overrides
from igccf.core.config import load_config
from igccf.core.errors import ConfigError, IGCCFError, UnknownKeysError

logger = logging.getLogger("igccf")


def configure_logging(*, verbose: bool = False, quiet: bool = False) -> None:
    """Send log records to stderr at the requested verbosity."""
    level = logging.DEBUG if verbose else logging.ERROR if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def main(argv: list[str] | None = None) -> int:
    """Run one ``igccf`` command.

    Parameters
    ----------
    argv:
        Command-line arguments without the program name. If ``None``,
        ``sys.argv[1:]`` is used.

    Returns
    -------
    int
        ``0`` on success, ``1`` on a runtime failure, ``2`` on a usage or
        configuration error.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage and 0 after --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    configure_logging(verbose=args.verbose, quiet=args.quiet)
    try:
        config = load_config(args.config, collect_overrides(args))
        return COMMANDS[args.command](args, config)
    except (ConfigError, UnknownKeysError) as exc:
        sys.stderr.write(f"igccf {args.command}: {exc}\n")
        return EXIT_USAGE
    except (IGCCFError, OSError, ValueError) as exc:
        logger.debug("command_failed", exc_info=True, extra={"command": args.command})
        sys.stderr.write(f"igccf {args.command}: {exc}\n")
        return EXIT_FAILURE


if __name__ == "__main__":  # pragma: no cover - manual launch convenience
    raise SystemExit(main())
