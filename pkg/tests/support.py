"""Shared scenario constants for the test suite."""

from lindchord.systems import CoupledPairParams, coupled_pair

BEAT_TIMES = (1.0, 3.0, 6.0)
BEAT_GAMMAS = (0.0, 0.25)


def beating_system(gamma: float):
    return coupled_pair(CoupledPairParams(1.0, 1.0, 0.5, gamma, "matrix"))

# (number, title, passed, detail) per acceptance criterion, filled by test_acceptance
ACCEPTANCE_RESULTS = []
