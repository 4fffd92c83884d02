import os

import pytest

from cobble import faults


@pytest.fixture(autouse=True)
def _clear_faults():
    """No fault plan leaks across tests."""
    faults.clear_plan()
    yield
    faults.clear_plan()


@pytest.fixture()
def fast_dir(tmp_path_factory):
    """Scratch directory on tmpfs when available, for I/O-heavy tests."""
    if os.path.isdir("/dev/shm") and os.access("/dev/shm", os.W_OK):
        import tempfile

        d = tempfile.mkdtemp(dir="/dev/shm")
        yield d
        import shutil

        shutil.rmtree(d, ignore_errors=True)
    else:
        yield str(tmp_path_factory.mktemp("fast"))
