import numpy as np
import pytest

from piezobeam import BeamSpec, ModalBasis, PiezoSpec, assemble


@pytest.fixture(scope="session")
def beam():
    return BeamSpec()


@pytest.fixture(scope="session")
def beam_undamped():
    return BeamSpec(zeta_flex=(0.0, 0.0), zeta_tors=(0.0, 0.0))


@pytest.fixture(scope="session")
def piezo():
    return PiezoSpec()


@pytest.fixture(scope="session")
def basis2(beam):
    return ModalBasis.build(2, beam.L)


@pytest.fixture(scope="session")
def mats(beam, piezo, basis2):
    return assemble(beam, piezo, basis2)


@pytest.fixture(scope="session")
def mats_bare(beam, basis2):
    return assemble(beam, None, basis2)


@pytest.fixture(scope="session")
def mats_undamped(beam_undamped, piezo, basis2):
    return assemble(beam_undamped, piezo, basis2)


def trapezoid_panels(breakpoints, total_points):
    """Composite trapezoid grids split at the given breakpoints.

    Yields one (x, w) pair per panel so callers can evaluate one-sided limits
    of piecewise section properties; points are spread proportionally to
    panel length.  Independent brute-force oracle for the Gauss assembly path.
    """
    panels = []
    spans = list(zip(breakpoints[:-1], breakpoints[1:]))
    total_len = sum(b - a for a, b in spans)
    for a, b in spans:
        if b - a <= 0:
            continue
        m = max(2, int(round(total_points * (b - a) / total_len)))
        x = np.linspace(a, b, m)
        w = np.full(m, (b - a) / (m - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        panels.append((x, w))
    return panels
