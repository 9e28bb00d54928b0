"""Shared fixtures: converged reference waves and their Bloch scans.

Session-scoped so the expensive Newton solves and eigensolves are paid
once across the suite.
"""

import pytest

from modulon import (ModelSpec, NonlinearitySpec, SymbolSpec,
                     model_for_symbol, refine_newton, small_amplitude_wave)
from modulon.bloch import fit_band, scan_bloch


@pytest.fixture(scope="session")
def whitham_model():
    return model_for_symbol(SymbolSpec("whitham"))


@pytest.fixture(scope="session")
def whitham_wave(whitham_model):
    seed = small_amplitude_wave(whitham_model, a=0.05, N=64)
    return refine_newton(whitham_model, seed, fix_amplitude=0.05,
                         fix_a_const=0.0)


@pytest.fixture(scope="session")
def whitham_k2_model():
    return model_for_symbol(SymbolSpec("whitham"), kappa=2.0)


@pytest.fixture(scope="session")
def whitham_k2_wave(whitham_k2_model):
    seed = small_amplitude_wave(whitham_k2_model, a=0.05, N=96)
    return refine_newton(whitham_k2_model, seed, fix_amplitude=0.05,
                         fix_a_const=0.0)


@pytest.fixture(scope="session")
def whitham_k2_spectrum(whitham_k2_model, whitham_k2_wave):
    return scan_bloch(whitham_k2_model, whitham_k2_wave, k_count=48, N=96)


@pytest.fixture(scope="session")
def whitham_k2_curve(whitham_k2_spectrum):
    return fit_band(whitham_k2_spectrum)


@pytest.fixture(scope="session")
def bbm2_model():
    return model_for_symbol(SymbolSpec("bbm_linear"), kappa=2.0)


@pytest.fixture(scope="session")
def bbm2_wave(bbm2_model):
    seed = small_amplitude_wave(bbm2_model, a=0.05, N=96)
    return refine_newton(bbm2_model, seed, fix_amplitude=0.05, fix_a_const=0.0)


@pytest.fixture(scope="session")
def bbm2_spectrum(bbm2_model, bbm2_wave):
    return scan_bloch(bbm2_model, bbm2_wave, k_count=48, N=96)


@pytest.fixture(scope="session")
def gkdv3_model():
    return ModelSpec("kdv_type", SymbolSpec("fractional", m=2.0),
                     NonlinearitySpec("minus_power", p=3.0))


@pytest.fixture(scope="session")
def gkdv3_wave(gkdv3_model):
    seed = small_amplitude_wave(gkdv3_model, a=0.1, N=64)
    return refine_newton(gkdv3_model, seed, fix_amplitude=0.1, fix_a_const=0.0)


@pytest.fixture(scope="session")
def constant_wave_factory():
    """Zero traveling wave u = 0 at speed c for any model."""
    from modulon import TravelingWave, zero_field

    def make(model, c=0.9, N=64):
        return TravelingWave(model, zero_field(1, N), c=c, a_const=0.0,
                             amplitude=0.0, residual=0.0, converged=True)

    return make
