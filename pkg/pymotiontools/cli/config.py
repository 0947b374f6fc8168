"""Run configuration files and the shared plumbing of the command line tools"""

import argparse
import sys

from ..errors import CheckpointError, ConfigError, DataError, NumericError, ParseError, ShapeError
from ..training.trainer import TrainConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

TRUE_WORDS = ("true", "1", "yes", "t", "y")
FALSE_WORDS = ("false", "0", "no", "f", "n")


def _coerce(key: str, text: str, kind):
    """Convert a configuration value to the type of its TrainConfig field."""

    if kind is bool:
        word = text.lower()
        if word in TRUE_WORDS:
            return True
        if word in FALSE_WORDS:
            return False
        raise ConfigError(f"Key '{key}' expects a boolean, got '{text}'")
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"Key '{key}' expects a value of type {kind.__name__}, got '{text}'") from None


class RunConfig:
    """
    key=value configuration of a training run.

    One pair per line, "#" starts a comment and blank lines are skipped.
    Keys are the TrainConfig fields. Values given on the command line override
    those of the file.

    Parameters
    ----------
    values : dict, optional
        Already typed values.

    Examples
    --------
    A configuration file could read::

        # tiny model
        C = 16
        steps = 500
        loss = exp

    >>> rc = RunConfig.from_file("tiny.cfg").merged({"seed": 3})
    >>> config = rc.train_config()
    """

    def __init__(self, values: dict = None):

        self.values = {}
        if values:
            types = TrainConfig.field_types()
            for key, value in values.items():
                if key not in types:
                    raise ConfigError(f"Unknown configuration key '{key}'")
                self.values[key] = value

    @classmethod
    def from_text(cls, text: str, source: str = "<config>"):

        types = TrainConfig.field_types()
        values = {}
        for line_number, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}, line {line_number}: expected key=value, got '{line}'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in types:
                raise ConfigError(f"{source}, line {line_number}: unknown configuration key '{key}'")
            values[key] = _coerce(key, value, types[key])
        return cls(values)

    @classmethod
    def from_file(cls, path: str):
        with open(path, "rb") as f:
            raw = f.read()
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ConfigError(f"{path}: byte {e.start} is not valid UTF-8") from None
        return cls.from_text(text, source=path)

    def merged(self, overrides: dict):
        """New configuration where every non-None override replaces the file value."""

        values = dict(self.values)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig(values)

    def train_config(self) -> TrainConfig:
        return TrainConfig(**self.values)


class CliParser(argparse.ArgumentParser):
    """Argument parser that exits with the usage error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def exit_code(exc: BaseException) -> int:
    """Process exit code of an exception raised by a command."""

    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    if isinstance(exc, (ParseError, DataError, CheckpointError, ShapeError, OSError)):
        return EXIT_DATA
    if isinstance(exc, ConfigError):
        return EXIT_USAGE
    raise exc


def run_guarded(command, log) -> int:
    """Run a command, logging a known error and turning it into its exit code."""

    try:
        command()
    except (NumericError, ParseError, DataError, CheckpointError, ShapeError, OSError, ConfigError) as e:
        log.write("error", f"{type(e).__name__}: {e}")
        return exit_code(e)
    return EXIT_OK
