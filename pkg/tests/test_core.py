import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from demtrack import Domain, ProcessSpec, boundary_distance, check_initial_condition
from demtrack.processes import balls_in_bins_spec

BOX = Domain(t_lo=-0.1, t_hi=2.0, lo=(0.05,), hi=(1.1,))


def faces(domain, point):
    t, ys = point[0], point[1:]
    out = [t - domain.t_lo, domain.t_hi - t]
    for y, a, b in zip(ys, domain.lo, domain.hi):
        out += [y - a, b - y]
    return out


def test_boundary_distance_example():
    # independent oracle: enumerate all 2(a+1) face distances
    assert faces(BOX, (0.0, 1.0)) == [0.1, 2.0, 0.95, pytest.approx(0.1)]
    assert BOX.boundary_distance((0.0, 1.0)) == pytest.approx(0.1, rel=1e-12)


def test_boundary_distance_on_face_is_zero():
    assert BOX.boundary_distance((-0.1, 0.5)) == 0.0


def test_boundary_distance_outside_is_negative():
    assert BOX.boundary_distance((3.0, 0.5)) == pytest.approx(-1.0)
    assert not BOX.contains((3.0, 0.5))


def test_boundary_distance_dimension_mismatch():
    with pytest.raises(ValueError):
        BOX.boundary_distance((0.0, 0.5, 0.5))


def test_module_level_alias():
    assert boundary_distance(BOX, (0.0, 1.0)) == BOX.boundary_distance((0.0, 1.0))


def test_domain_validation():
    with pytest.raises(ValueError):
        Domain(t_lo=1.0, t_hi=0.0, lo=(0.0,), hi=(1.0,))
    with pytest.raises(ValueError):
        Domain(t_lo=0.0, t_hi=1.0, lo=(1.0,), hi=(1.0,))
    with pytest.raises(ValueError):
        Domain(t_lo=0.0, t_hi=math.inf, lo=(0.0,), hi=(1.0,))
    with pytest.raises(ValueError):
        Domain(t_lo=0.0, t_hi=1.0, lo=(0.0, 0.0), hi=(1.0,))


boxes = st.integers(min_value=1, max_value=3).flatmap(
    lambda a: st.tuples(
        st.floats(-5, 0, allow_nan=False), st.floats(0.1, 5),
        st.lists(st.tuples(st.floats(-5, 4.8), st.floats(0.1, 5)), min_size=a, max_size=a),
    )
)


def _mk_domain(draw):
    t_lo, t_span, ranges = draw
    return Domain(
        t_lo=t_lo,
        t_hi=t_lo + t_span,
        lo=tuple(lo for lo, _ in ranges),
        hi=tuple(lo + span for lo, span in ranges),
    )


@given(boxes, st.data())
@settings(max_examples=100)
def test_boundary_distance_is_1_lipschitz(drawn, data):
    dom = _mk_domain(drawn)
    coords = st.floats(-10, 10, allow_nan=False)
    p = data.draw(st.tuples(*([coords] * (dom.dim + 1))))
    q = data.draw(st.tuples(*([coords] * (dom.dim + 1))))
    gap = max(abs(x - y) for x, y in zip(p, q))
    assert abs(dom.boundary_distance(p) - dom.boundary_distance(q)) <= gap + 1e-12


@given(boxes, st.data())
@settings(max_examples=100)
def test_inner_ball_stays_inside(drawn, data):
    # any point with boundary distance > r contains its l-inf ball of radius r
    dom = _mk_domain(drawn)
    coords = st.floats(-10, 10, allow_nan=False)
    p = data.draw(st.tuples(*([coords] * (dom.dim + 1))))
    d = dom.boundary_distance(p)
    if d <= 1e-9:
        return
    r = 0.999 * d
    for signs in data.draw(
        st.lists(
            st.tuples(*([st.sampled_from((-1.0, 0.0, 1.0))] * (dom.dim + 1))),
            min_size=4, max_size=4,
        )
    ):
        corner = tuple(x + s * r for x, s in zip(p, signs))
        assert dom.contains(corner)


class TestInitialCondition:
    def setup_method(self):
        self.spec, _ = balls_in_bins_spec(1000, lam=0.01)

    def test_exact_anchor(self):
        assert check_initial_condition(self.spec, (1000,))

    def test_offset_at_equality_passes(self):
        assert check_initial_condition(self.spec, (1000 + 10,))  # lam*n = 10

    def test_offset_beyond_tolerance_fails(self):
        assert not check_initial_condition(self.spec, (1000 + 20,))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            check_initial_condition(self.spec, (1000, 1))


def test_spec_validation():
    dom = Domain(t_lo=-0.1, t_hi=1.0, lo=(0.0,), hi=(1.0,))
    drift = lambda t, y: -np.asarray(y)
    good = dict(n=10, drift=drift, L=1.0, delta=0.0, beta=1.0, lam=0.1,
                y_hat=(0.5,), domain=dom)
    ProcessSpec(**good)
    for key, bad in [("lam", 0.0), ("beta", 0.0), ("n", 0), ("delta", -1.0),
                     ("L", -0.5), ("y_hat", (2.0,)), ("y_hat", (0.5, 0.5))]:
        with pytest.raises(ValueError):
            ProcessSpec(**{**good, key: bad})
