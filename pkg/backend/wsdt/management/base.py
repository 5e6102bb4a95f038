import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from ..exceptions import ConfigurationError, WSDTError

logger = logging.getLogger(__name__)

MAX_SEED = 2**64 - 1


def seed_type(value):
    """argparse type for --seed: an unsigned 64-bit integer."""
    seed = int(value)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be in [0, 2^64), got {value}")
    return seed


class WSDTCommand(BaseCommand):
    """
    Base for the WSDT verbs.

    Subclasses implement ``run``; library errors become CommandError with
    the exit code their class declares (2 usage/config, 3 numerical).
    """

    def handle(self, *args, **options):
        try:
            return self.run(*args, **options)
        except WSDTError as exc:
            logger.error(f"{self.__module__.rsplit('.', 1)[-1]} failed: {exc}")
            raise CommandError(str(exc), returncode=exc.exit_code) from exc

    def run(self, *args, **options):
        raise NotImplementedError("subclasses of WSDTCommand must provide a run() method")

    def output_dir(self, path):
        """Create (if needed) and return the declared output directory."""
        out = Path(path)
        if out.exists() and not out.is_dir():
            raise ConfigurationError(f"--out {out} exists and is not a directory")
        out.mkdir(parents=True, exist_ok=True)
        return out
