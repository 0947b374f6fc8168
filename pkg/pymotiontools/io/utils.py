"""Utilities for I/O operations"""

import os
import tempfile


def atomic_write(path: str, content):
    """
    Write a file so that readers see either the old or the complete new content.

    The content goes to a temporary file in the same directory, which then
    replaces the target.

    Parameters
    ----------
    path : str
        Destination.
    content : str or bytes
        Text is written as UTF-8.
    """

    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)

    mode = "wb" if isinstance(content, (bytes, bytearray)) else "w"
    encoding = None if mode == "wb" else "utf-8"

    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp_", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, encoding=encoding, newline="" if encoding else None) as f:
            f.write(content)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
