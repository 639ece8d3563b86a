"""
nsflow console entry point
"""

import sys
from typing import List, Optional

import click
import orjson
import typer
from pydantic import ValidationError

from nsflow.cli.commands import app
from nsflow.core.exceptions import NsflowError
from nsflow.core.logging import log


def _diagnostic(payload: dict) -> None:
    sys.stderr.write(orjson.dumps(payload, option=orjson.OPT_SORT_KEYS).decode() + "\n")


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run the command line and map failures to exit codes

    NsflowError subclasses carry their own code; schema failures exit 2;
    click usage errors keep click's code. Diagnostics go to stderr as JSON.
    """
    command = typer.main.get_command(app)
    try:
        command.main(args=argv, prog_name="nsflow", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.exceptions.Abort:
        return 1
    except NsflowError as e:
        log.debug(f"{e.kind}: {e.detail}")
        _diagnostic(e.to_dict())
        return e.exit_code
    except ValidationError as e:
        detail = {"errors": e.errors(include_url=False)}
        _diagnostic({"error": "validation", "detail": "problem file is invalid", "context": detail})
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
