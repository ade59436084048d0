import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fidtrack import _kernels


@pytest.fixture(scope="session", autouse=True)
def compiled_kernels():
    """Compile (or load cached) numba kernels once, outside timed tests."""
    _kernels.warm_up()
