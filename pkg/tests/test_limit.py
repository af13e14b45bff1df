import io
import math
import random

import pytest

from lawdon import (
    AnisotropyMetric,
    ConfigError,
    ConvexBodyK,
    FieldVector,
    LimitParams,
    classify,
    eval_F,
    hc1,
    minimize_F_oracle,
    phase_diagram_sweep,
    project_onto_K_shifted,
    write_sweep_csv,
)
from lawdon.limit import SWEEP_CSV_HEADER


def params(alpha, lam, h_ex):
    return LimitParams(alpha=alpha, metric=AnisotropyMetric(lam), h_ex=FieldVector(*h_ex))


def sample_body_point(body, rng):
    """Rejection-sample a point of K, covering cylinder and caps."""
    span_r = body.R + body.b
    span_z = body.z0 + body.b
    while True:
        u = FieldVector(
            rng.uniform(-span_r, span_r),
            rng.uniform(-span_r, span_r),
            rng.uniform(-span_z, span_z),
        )
        if body.contains(u):
            return u


# ---------------------------------------------------------------- frozen values


def test_eval_F_frozen_example():
    p = params(0.5, 1.0, (0.0, 0.0, 0.0))
    assert eval_F(FieldVector(0.0, 0.0, 1.0), p) == pytest.approx(1.0, abs=1e-15)


def test_projection_frozen_example():
    # Strong planar field, isotropic: the origin projects onto the cylinder
    # side of the shifted body, pulling H* back by exactly the radius 1/4.
    p = params(0.5, 1.0, (10.0, 0.0, 0.0))
    h_star = project_onto_K_shifted(p)
    assert h_star.h1 == pytest.approx(9.75, abs=1e-12)
    assert h_star.h2 == pytest.approx(0.0, abs=1e-15)
    assert h_star.h3 == pytest.approx(0.0, abs=1e-15)


def test_hc1_endpoints():
    for alpha, lam in [(0.5, 1.0), (0.3, 2.0), (0.7, 0.5), (0.05, 4.0), (0.95, 0.25)]:
        m = AnisotropyMetric(lam)
        assert hc1(0.0, alpha, m) == pytest.approx(alpha / (2 * lam), abs=1e-10)
        assert hc1(math.pi / 2, alpha, m) == pytest.approx(0.5, abs=1e-10)


def test_hc1_frozen_isotropic_values():
    m = AnisotropyMetric(1.0)
    assert hc1(0.0, 0.5, m) == pytest.approx(0.25, abs=1e-12)
    assert hc1(math.pi / 2, 0.5, m) == pytest.approx(0.5, abs=1e-12)


# ------------------------------------------------------- projection, by oracle


def test_projection_is_member_and_variationally_optimal():
    """The defining property of a projection onto a convex set:

    the foot lies in the set and <w - foot, k - foot> <= 0 for every k in
    the set.  Checked against rejection-sampled members, independently of
    the case analysis inside the implementation.
    """
    rng = random.Random(7)
    for _ in range(60):
        alpha = rng.uniform(0.05, 0.95)
        lam = math.exp(rng.uniform(math.log(0.2), math.log(5.0)))
        h_ex = FieldVector(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3))
        p = params(alpha, lam, tuple(h_ex))
        query = FieldVector(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3))
        proj = project_onto_K_shifted(p, query)
        body = ConvexBodyK.from_params(alpha, AnisotropyMetric(lam))
        foot = proj - h_ex
        w = query - h_ex
        assert body.contains(foot, tol=1e-9)
        resid = w - foot
        for _ in range(40):
            k = sample_body_point(body, rng)
            slack = resid.dot(k - foot)
            assert slack <= 1e-9 * (1 + w.norm()) ** 2


def test_projection_support_function_certificate():
    """Membership of the foot certified through the supporting-halfspace form
    -U.V + z0 |V3| + (alpha/2) ||V||_g >= 0, an oracle that never references
    the cylinder/cap case split."""
    rng = random.Random(11)
    for _ in range(40):
        alpha = rng.uniform(0.05, 0.95)
        lam = math.exp(rng.uniform(math.log(0.2), math.log(5.0)))
        body = ConvexBodyK.from_params(alpha, AnisotropyMetric(lam))
        p = params(alpha, lam, (rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)))
        foot = project_onto_K_shifted(p) - p.h_ex
        for _ in range(60):
            v = FieldVector(rng.gauss(0, 1), rng.gauss(0, 1), rng.gauss(0, 1))
            assert body.support_slack(foot, v, alpha) >= -1e-10 * (1 + v.norm())


def test_interior_query_is_fixed_point():
    p = params(0.4, 1.5, (0.05, -0.02, 0.1))
    # h_ex is small enough that the origin-shifted query lies inside K.
    body = ConvexBodyK.from_params(0.4, AnisotropyMetric(1.5))
    assert body.contains(-p.h_ex)
    h_star = project_onto_K_shifted(p)
    assert (h_star - FieldVector(0, 0, 0)).norm() <= 1e-15


def test_duality_identity_random_instances():
    rng = random.Random(3)
    for _ in range(200):
        alpha = rng.uniform(0.05, 0.95)
        lam = math.exp(rng.uniform(math.log(0.2), math.log(5.0)))
        mag = rng.uniform(0, 10)
        u = [rng.gauss(0, 1) for _ in range(3)]
        n = math.hypot(*u) or 1.0
        h_ex = tuple(mag * x / n for x in u)
        p = params(alpha, lam, h_ex)
        res = classify(p)
        # F(H*) = |H_ex|^2/2 - |H*|^2/2 exactly at the optimum
        assert res.duality_gap <= 1e-8 * (1 + mag**2)


def test_oracle_agrees_with_projection_spot_checks():
    rng = random.Random(17)
    for _ in range(25):
        alpha = rng.uniform(0.05, 0.95)
        lam = math.exp(rng.uniform(math.log(0.2), math.log(5.0)))
        mag = rng.uniform(0, 10)
        u = [rng.gauss(0, 1) for _ in range(3)]
        n = math.hypot(*u) or 1.0
        p = params(alpha, lam, tuple(mag * x / n for x in u))
        h_proj = project_onto_K_shifted(p)
        h_direct, f_direct = minimize_F_oracle(p, tol=1e-9)
        assert (h_proj - h_direct).norm() <= 1e-6
        assert f_direct == pytest.approx(eval_F(h_proj, p), abs=1e-9 * (1 + mag**2))


# ----------------------------------------------------------------- hc1 and regimes


def bisect_onset(alpha, lam, theta, iters=60):
    """Independent hc1: bisection on the Meissner indicator |H*| > 0."""
    m = AnisotropyMetric(lam)
    lo, hi = 0.0, 4.0 * max(1.0, 1.0 / lam)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        h_ex = FieldVector(mid * math.cos(theta), 0.0, mid * math.sin(theta))
        res = classify(LimitParams(alpha=alpha, metric=m, h_ex=h_ex))
        if res.h_star.norm() > 1e-12:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("alpha,lam", [(0.5, 1.0), (0.3, 2.5), (0.8, 0.6)])
def test_hc1_matches_projection_bisection(alpha, lam):
    for theta in [0.0, 0.35, 0.8, 1.2, math.pi / 2]:
        closed = hc1(theta, alpha, AnisotropyMetric(lam))
        onset = bisect_onset(alpha, lam, theta)
        assert onset == pytest.approx(closed, rel=1e-6, abs=1e-9)


def test_hc1_branches_join_continuously():
    for alpha, lam in [(0.5, 1.0), (0.35, 2.0), (0.6, 0.7)]:
        theta_star = math.atan(lam * (1 - alpha) / alpha)
        m = AnisotropyMetric(lam)
        below = hc1(theta_star - 1e-9, alpha, m)
        above = hc1(theta_star + 1e-9, alpha, m)
        assert below == pytest.approx(above, rel=1e-6)


def test_hc1_input_validation():
    m = AnisotropyMetric(1.0)
    with pytest.raises(ConfigError):
        hc1(-0.2, 0.5, m)
    with pytest.raises(ConfigError):
        hc1(2.0, 0.5, m)
    with pytest.raises(ConfigError):
        hc1(0.3, 1.2, m)


def test_meissner_below_onset():
    rng = random.Random(23)
    for _ in range(40):
        alpha = rng.uniform(0.1, 0.9)
        lam = math.exp(rng.uniform(math.log(0.3), math.log(3.0)))
        theta = rng.uniform(0, math.pi / 2)
        mag = 0.9 * hc1(theta, alpha, AnisotropyMetric(lam))
        p = params(alpha, lam, (mag * math.cos(theta), 0.0, mag * math.sin(theta)))
        res = classify(p)
        assert res.regime == "Meissner"
        assert res.h_star.norm() <= 1e-12
        assert res.energy == pytest.approx(0.5 * mag**2, rel=1e-12, abs=1e-15)


def lockin_window(alpha, lam, theta):
    """True flat-field window: onset at hc1, exit when the vertical pullback
    leaves the cylinder band, at magnitude (1-alpha)/(2 sin theta)."""
    lo = alpha / (2 * lam * math.cos(theta))
    hi = (1 - alpha) / (2 * math.sin(theta))
    return lo, hi


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_lockin_window_geometry(lam):
    alpha = 0.5
    theta = 0.3
    assert math.tan(theta) < lam * (1 - alpha) / alpha  # window exists
    lo, hi = lockin_window(alpha, lam, theta)
    assert lo < hi

    def classify_at(mag):
        return classify(
            params(alpha, lam, (mag * math.cos(theta), 0.0, mag * math.sin(theta)))
        )

    inside = classify_at(lo + 0.5 * (hi - lo))
    assert inside.regime == "LockIn"
    assert abs(inside.h_star.h3) <= 1e-12
    assert inside.h_star.horizontal_norm() > 0

    near_exit = classify_at(lo + 0.99 * (hi - lo))
    assert near_exit.regime == "LockIn"

    # Just beyond the geometric threshold the internal field tilts out of the
    # plane.  For lam != 1 this pins the lam-free exit magnitude: a spurious
    # 1/lam in the threshold would misclassify this point.
    beyond = classify_at(hi * 1.05)
    assert beyond.regime == "Tilted"
    assert abs(beyond.h_star.h3) > 1e-12


def test_no_lockin_beyond_critical_angle():
    for alpha, lam in [(0.5, 1.0), (0.4, 0.5), (0.7, 2.0)]:
        theta_c = math.atan(lam * (1 - alpha) / alpha)
        theta = min(theta_c * 1.2, math.pi / 2 * 0.999)
        for mag in [0.05, 0.3, 1.0, 3.0, 10.0]:
            res = classify(
                params(alpha, lam, (mag * math.cos(theta), 0.0, mag * math.sin(theta)))
            )
            assert res.regime != "LockIn"


# ----------------------------------------------------------------- sweep + CSV


def test_sweep_order_and_csv_roundtrip():
    thetas = [0.0, 0.5, 1.0]
    mags = [0.1, 0.6]
    rows = phase_diagram_sweep(0.5, AnisotropyMetric(1.2), thetas, mags)
    assert len(rows) == 6
    assert [r.theta for r in rows] == [0.0, 0.0, 0.5, 0.5, 1.0, 1.0]
    assert [r.magnitude for r in rows] == [0.1, 0.6, 0.1, 0.6, 0.1, 0.6]

    buf = io.StringIO()
    write_sweep_csv(rows, buf)
    text = buf.getvalue()
    lines = text.strip().split("\n")
    assert lines[0] == SWEEP_CSV_HEADER
    assert len(lines) == 7
    # 17 significant digits must round-trip exactly
    for line, row in zip(lines[1:], rows):
        parts = line.split(",")
        assert float(parts[0]) == row.theta
        assert float(parts[5]) == row.h_star.h1
        assert float(parts[10]) == row.duality_gap
        assert parts[8] == row.regime

    buf2 = io.StringIO()
    write_sweep_csv(rows, buf2)
    assert buf2.getvalue() == text  # deterministic, byte-identical


def test_limit_params_validation():
    with pytest.raises(ConfigError):
        params(0.0, 1.0, (0, 0, 0))
    with pytest.raises(ConfigError):
        params(1.0, 1.0, (0, 0, 0))
    with pytest.raises(ConfigError):
        params(0.5, 1.0, (float("inf"), 0, 0))
