"""Shared fixtures: the SI-scale parameter sets used across modules and a
fast abstract-unit environment for distribution-level engine tests."""

import pytest

from nanosim import EnvironmentParams, Linear, StaticPointSource, Vec2


@pytest.fixture
def si_params() -> EnvironmentParams:
    """The baseline SI-scale single-agent environment (trajectory-figure set)."""
    return EnvironmentParams(
        P=1e-19, D=1e-10, t_star=1e4, b=1e11,
        alpha=2e-5, epsilon=2e-5, phi_max=0.01,
        x_star=Vec2(0.0, 0.0), x0=Vec2(0.005, 0.0), n=1,
    )


@pytest.fixture
def si_field(si_params) -> StaticPointSource:
    p = si_params
    return StaticPointSource(P=p.P, D=p.D, t_star=p.t_star, x_star=p.x_star)


@pytest.fixture
def abstract_params() -> EnvironmentParams:
    """Abstract-unit environment where biased hitting takes tens of steps.

    Paired with a Linear(slope=-1) field and b = 1 this gives constant
    heading-noise variance sigma^2 = 1 everywhere, so walks are cheap and the
    step distribution is position-independent.
    """
    return EnvironmentParams(
        P=1.0, D=1.0, t_star=1.0, b=1.0, alpha=1.0, epsilon=1.0,
        phi_max=30.0, x_star=Vec2(0.0, 0.0), x0=Vec2(8.0, 0.0), n=1,
    )


@pytest.fixture
def abstract_field() -> Linear:
    return Linear(slope=-1.0)
