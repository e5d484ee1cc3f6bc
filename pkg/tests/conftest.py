import pytest

from orthospin import RateFunction, SpectralMeasure, TransformProfile

FAMILIES = {
    "sk": SpectralMeasure.semicircle,
    "rom": lambda: SpectralMeasure.two_point(0.5),
    "hopfield": lambda: SpectralMeasure.marchenko_pastur(2.0),
}


@pytest.fixture(scope="session")
def profiles():
    return {name: TransformProfile(make()) for name, make in FAMILIES.items()}


@pytest.fixture(scope="session")
def rates(profiles):
    return {name: RateFunction(p) for name, p in profiles.items()}


@pytest.fixture
def report(capsys):
    """Print a one-line verdict to the terminal, then assert it."""

    def emit(label, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        assert ok, f"{label}: {detail}"

    return emit
