import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gaudin import build_system, field_params
from gaudin.errors import ConfigError, DuplicateEpsilon, EmptySystem

reals = st.floats(-10, 10, allow_nan=False)


def test_two_site_system():
    s = build_system([0.0, 1.0], (0, 0, 1))
    assert s.n == 2 and s.dim == 4


def test_four_site_system():
    s = build_system([0, 1, 2.3, 3.1], (0.3, 0.4, 0.5))
    assert s.n == 4
    assert s.epsilons == (0.0, 1.0, 2.3, 3.1)


def test_duplicate_epsilon():
    with pytest.raises(DuplicateEpsilon):
        build_system([0.0, 0.0], (1, 0, 0))


def test_near_duplicate_respects_gap_tol():
    with pytest.raises(DuplicateEpsilon):
        build_system([0.0, 1e-10], (1, 0, 0))
    assert build_system([0.0, 1e-10], (1, 0, 0), gap_tol=1e-12).n == 2


def test_empty_system():
    with pytest.raises(EmptySystem):
        build_system([], (1, 0, 0))


def test_bad_field():
    with pytest.raises(ConfigError):
        build_system([0.0], (1, 0))
    with pytest.raises(ConfigError):
        build_system([0.0], (np.nan, 0, 0))


def test_field_params_transverse():
    p = field_params(build_system([0.0], (1, 0, 0)))
    assert p.b_plus == 1 and p.b_perp_sq == 1 and p.b_mag == 1


def test_field_params_longitudinal():
    p = field_params(build_system([0.0], (0, 0, 1)))
    assert p.b_plus == 0 and p.b_perp_sq == 0 and p.b_mag == 1


def test_field_params_oblique():
    p = field_params(build_system([0.0], (0.3, 0.4, 0.5)))
    assert p.b_perp_sq == pytest.approx(0.25, abs=1e-15)
    assert p.b_mag == pytest.approx(np.sqrt(0.5), abs=1e-15)
    assert p.b_plus == complex(0.3, 0.4)


def test_couplings_are_antisymmetric():
    s = build_system([0.0, 1.0, 2.5], (0, 0, 1))
    c = s.couplings
    assert np.allclose(c, -c.T)
    assert np.all(np.diag(c) == 0)
    assert c[0, 1] == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        c[0, 1] = 5.0


@given(bx=reals, by=reals, bz=reals)
def test_field_invariants(bx, by, bz):
    p = build_system([0.0], (bx, by, bz)).params
    assert p.b_plus == np.conj(p.b_minus)
    assert abs(p.b_perp_sq - abs(p.b_plus) ** 2) <= 1e-12 * max(1, p.b_perp_sq)
    assert abs(p.b_mag**2 - p.b_z**2 - p.b_perp_sq) <= 1e-13 * max(1.0, p.b_mag**2)


@given(bx=reals, by=reals, bz=reals)
def test_field_params_is_pure(bx, by, bz):
    s = build_system([0.0, 1.0], (bx, by, bz))
    assert field_params(s) == field_params(s)
