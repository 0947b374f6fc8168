""" Module that contains classes for logging messages during training and evaluation"""

import logging
import sys
import os
from mpi4py import MPI
from mpi4py.MPI import Wtime as time

USE_COLORS = os.getenv("PYMOTIONTOOLS_USE_COLORS", "False").lower() in ("true", "1", "t")
DEBUG = os.getenv("PYMOTIONTOOLS_DEBUG", "False").lower() in ("true", "1", "t")
HIDE = os.getenv("PYMOTIONTOOLS_HIDE_LOG", "False").lower() in ("true", "1", "t")

RANK0_LEVELS = ("debug", "info", "warning")


# Modified from https://stackoverflow.com/questions/384076/how-can-i-color-python-logging-output
class CustomFormatter(logging.Formatter):
    """Custom formatter for the log messages"""

    grey = "\x1b[38;20m"
    yellow = "\x1b[33;20m"
    red = "\x1b[31;20m"
    bold_red = "\x1b[31;1m"
    reset = "\x1b[0m"
    formatt = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    FORMATS_colored = {
        logging.DEBUG: grey + formatt + reset,
        logging.INFO: grey + formatt + reset,
        logging.WARNING: yellow + formatt + reset,
        logging.ERROR: red + formatt + reset,
        logging.CRITICAL: bold_red + formatt + reset,
    }

    def format(self, record):

        if USE_COLORS:
            log_fmt = self.FORMATS_colored.get(record.levelno)
        else:
            log_fmt = self.formatt
        formatter = logging.Formatter(log_fmt)
        return formatter.format(record)


class Logger:
    """
    Class that takes charge of logging messages.

    Messages below error level are only written by rank 0 so that runs
    launched with ``mpirun`` do not repeat every line once per rank.

    Parameters
    ----------
    level : int, optional
        Logging level. INFO by default. Overridden by the
        PYMOTIONTOOLS_DEBUG and PYMOTIONTOOLS_HIDE_LOG environment variables.
    comm : MPI.Comm, optional
        Communicator used to find the rank. MPI.COMM_WORLD if not given.
    module_name : str, optional
        Name of the underlying logging.Logger.

    Examples
    --------
    >>> from mpi4py import MPI
    >>> from pymotiontools.monitoring.logger import Logger
    >>> log = Logger(comm=MPI.COMM_WORLD, module_name="train")
    >>> log.tic()
    >>> log.write("info", "Starting")
    >>> log.toc()
    """

    def __init__(self, level=None, comm=None, module_name=None):

        if level is None:
            level = logging.INFO
        if DEBUG:
            level = logging.DEBUG
        if HIDE:
            level = logging.CRITICAL

        if comm is None:
            comm = MPI.COMM_WORLD
        self.comm = comm
        self.time = None

        if module_name:
            logger = logging.getLogger(module_name)
        else:
            logger = logging.getLogger(__name__)

        logger.setLevel(level)

        if not logger.handlers:
            ch = logging.StreamHandler(sys.stdout)
            ch.setLevel(level)
            ch.setFormatter(CustomFormatter())
            logger.addHandler(ch)

        logger.propagate = False

        self.log = logger

    def tic(self):
        """Store the current time."""

        self.time = time()

    def toc(self):
        """Write elapsed time since the last call to tic."""

        self.write("info", f"Elapsed time: {time() - self.time}s")

    def write(self, level, message):
        """
        Write a message in the log.

        Parameters
        ----------
        level : str
            One of "debug", "info", "warning", "error", "critical".
        message : str
            Text to write.
        """
        if level in RANK0_LEVELS and self.comm.Get_rank() != 0:
            return

        if level == "debug":
            self.log.debug(message)
        elif level == "info":
            self.log.info(message)
        elif level == "warning":
            self.log.warning(message)
        elif level == "error":
            self.log.error(message)
        elif level == "critical":
            self.log.critical(message)
        else:
            raise ValueError(f"Unknown log level: {level}")
