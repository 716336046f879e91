import numpy as np
import pytest
from scipy import ndimage


def textured(shape, seed=0, sigma=1.5):
    rng = np.random.default_rng(seed)
    img = ndimage.gaussian_filter(rng.random(shape), sigma)
    return (img - img.min()) / (img.max() - img.min())


@pytest.fixture
def texture():
    return textured((120, 200), seed=3)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda l: int(l.split(".")[0].split()[-1])):
        terminalreporter.write_line(line)
