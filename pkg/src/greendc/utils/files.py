import logging
import os
import tempfile


logger = logging.getLogger(__name__)


def safe_filename(filename: str, replace_with: str = '_') -> str:
    """
    Replace problematic characters (e.g., '/' or '#') considering Windows/Linux based OSes

    Args:
        filename: a filename
        replace_with: the character to be replaced with

    Returns:
        a string that can be used as filename
    """
    for c in ('/', '\\', '#', ':', '*', '?', '"', '<', '>', '|', '\n'):
        filename = filename.replace(c, replace_with)
    return filename

def atomic_write(path: str, content: str, encoding: str = 'utf-8') -> None:
    """
    Write ``content`` to a temporary file of the destination folder, then rename it to ``path``.
    Readers never see a partially written file.
    """
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=folder, prefix='.' + os.path.basename(path), suffix='.tmp')
    try:
        with os.fdopen(fd, 'w', encoding=encoding, newline='') as f:
            f.write(content)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
