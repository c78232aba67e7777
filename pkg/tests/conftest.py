"""Shared fixtures: enumerated balls and exact profile tables are expensive,
so they are computed once per session and reused across modules."""

from __future__ import annotations

import pytest

from walklab import groups
from walklab.kernels import Kernel


@pytest.fixture(scope="session")
def z1():
    return groups.z_lattice(1)


@pytest.fixture(scope="session")
def z2():
    return groups.z_lattice(2)


@pytest.fixture(scope="session")
def z3():
    return groups.z_lattice(3)


@pytest.fixture(scope="session")
def ll():
    return groups.lamplighter(2, 1)


@pytest.fixture(scope="session")
def z1_ball12(z1):
    return groups.enumerate_ball(z1, 12)


@pytest.fixture(scope="session")
def z2_ball11(z2):
    return groups.enumerate_ball(z2, 11)


@pytest.fixture(scope="session")
def ll_ball11(ll):
    return groups.enumerate_ball(ll, 11)


@pytest.fixture(scope="session")
def ll_ball14(ll):
    return groups.enumerate_ball(ll, 14)


@pytest.fixture(scope="session")
def z1_kernel(z1):
    return Kernel.uniform(z1)


@pytest.fixture(scope="session")
def z2_kernel(z2):
    return Kernel.uniform(z2)


@pytest.fixture(scope="session")
def ll_kernel(ll):
    return Kernel.uniform(ll)


@pytest.fixture(scope="session")
def z1_exact_profiles(z1_ball12, z1_kernel):
    from walklab.profiles import profile_exact_small

    return profile_exact_small(z1_ball12, z1_kernel, 10)


@pytest.fixture(scope="session")
def z2_exact_profiles(z2_ball11, z2_kernel):
    from walklab.profiles import profile_exact_small

    return profile_exact_small(z2_ball11, z2_kernel, 10)


@pytest.fixture(scope="session")
def ll_exact_profiles(ll_ball11, ll_kernel):
    from walklab.profiles import profile_exact_small

    return profile_exact_small(ll_ball11, ll_kernel, 10)
