import numpy as np
import pytest

from amx.errors import DomainError, ModelError
from amx.metric import (IsotropicPowerLaw, Kasner, Tabulated,
                        constant_anisotropic, evaluate_metric,
                        kasner_constraint_check, load_tabulated_csv)


def test_isotropic_power_law_linear():
    ms = evaluate_metric(IsotropicPowerLaw(r0=1.0, p=1.0, t_ref=1.0), 2.0)
    assert ms.A == (2.0, 2.0, 2.0)
    assert ms.H == (0.5, 0.5, 0.5)
    assert ms.sqrt_minus_g == 8.0


def test_kasner_at_reference_time():
    ms = evaluate_metric(Kasner(2 / 3, 2 / 3, -1 / 3), 1.0)
    assert ms.A == (1.0, 1.0, 1.0)
    assert ms.H == pytest.approx((2 / 3, 2 / 3, -1 / 3), abs=0.0)
    assert ms.sqrt_minus_g == 1.0


def test_tabulated_matches_generator():
    # generator A_i(t) = t^2 sampled on 9 knots; the spline is exact on
    # quadratics, so interpolation error is pure roundoff
    t = np.linspace(1.0, 2.0, 9)
    a = t**2
    model = Tabulated(t, a, a, a)
    ms = evaluate_metric(model, 1.5)
    assert ms.A == pytest.approx((2.25, 2.25, 2.25), abs=1e-6)
    assert ms.H == pytest.approx((4 / 3, 4 / 3, 4 / 3), abs=1e-4)


def test_kasner_constraint_examples():
    assert kasner_constraint_check(2 / 3, 2 / 3, -1 / 3) == pytest.approx((0.0, 0.0), abs=1e-15)
    assert kasner_constraint_check(1.0, 0.0, 0.0) == (0.0, 0.0)
    assert kasner_constraint_check(0.5, 0.5, 0.5) == pytest.approx((0.5, -0.25), abs=1e-15)


def test_volume_factor_is_product():
    rng = np.random.default_rng(3)
    model = Kasner(0.9, -0.2, 0.3)
    for t in rng.uniform(0.2, 8.0, 50):
        ms = evaluate_metric(model, float(t))
        assert ms.sqrt_minus_g == ms.A[0] * ms.A[1] * ms.A[2]
        for ad, a, h in zip(ms.Adot, ms.A, ms.H):
            assert h == ad / a


@pytest.mark.parametrize("model", [
    IsotropicPowerLaw(r0=2.0, p=0.7, t_ref=1.5),
    Kasner(2 / 3, 2 / 3, -1 / 3),
    Kasner(0.9, -0.2, 0.3, t_ref=2.0),
])
def test_parametric_derivatives_match_finite_differences(model):
    for t in (0.5, 1.0, 3.0, 9.0):
        h = 1e-5 * t
        ms = evaluate_metric(model, t)
        lo = evaluate_metric(model, t - h)
        hi = evaluate_metric(model, t + h)
        for i in range(3):
            fd = (hi.A[i] - lo.A[i]) / (2.0 * h)
            assert ms.Adot[i] == pytest.approx(fd, rel=1e-6)


def test_isotropic_equals_equal_exponent_kasner():
    iso = IsotropicPowerLaw(r0=1.0, p=0.4, t_ref=1.0)
    kas = Kasner(0.4, 0.4, 0.4, t_ref=1.0)
    for t in (0.3, 1.0, 2.7, 11.0):
        a = evaluate_metric(iso, t)
        b = evaluate_metric(kas, t)
        assert a == b


def test_power_law_rejects_singularity():
    with pytest.raises(DomainError):
        evaluate_metric(IsotropicPowerLaw(1.0, 1.0), 0.0)
    with pytest.raises(DomainError):
        evaluate_metric(Kasner(2 / 3, 2 / 3, -1 / 3), -1.0)


def test_tabulated_domain_and_validation():
    t = np.linspace(1.0, 2.0, 9)
    model = Tabulated(t, t, t, t)
    with pytest.raises(DomainError):
        evaluate_metric(model, 0.5)
    with pytest.raises(ModelError):
        Tabulated(t[:3], t[:3], t[:3], t[:3])  # too few knots
    bad = t.copy()
    bad[4] = bad[3]
    with pytest.raises(ModelError):
        Tabulated(bad, t, t, t)
    with pytest.raises(ModelError):
        Tabulated(t, -t, t, t)


def test_tabulated_interpolation_undershoot_is_model_error():
    t = np.linspace(0.0, 4.0, 5)
    a = np.array([5.0, 0.01, 5.0, 0.01, 5.0])  # spline dips below zero
    model = Tabulated(t, a, a, a)
    with pytest.raises(ModelError):
        evaluate_metric(model, 0.666)


def test_constant_anisotropic_is_exactly_static():
    model = constant_anisotropic((2.0, 3.0, 4.0), (1.0, 10.0))
    for t in (1.0, 4.567, 10.0):
        ms = evaluate_metric(model, t)
        assert ms.A == (2.0, 3.0, 4.0)
        assert ms.Adot == (0.0, 0.0, 0.0)


def test_csv_roundtrip(tmp_path):
    t = np.linspace(1.0, 2.0, 6)
    path = tmp_path / "bg.csv"
    lines = ["t,a1,a2,a3"] + [f"{tv},{tv**2},{2*tv},{3.0}" for tv in t]
    path.write_text("\n".join(lines) + "\n")
    model = load_tabulated_csv(path)
    ms = evaluate_metric(model, 1.5)
    assert ms.A[0] == pytest.approx(2.25, abs=1e-12)
    assert ms.A[1] == pytest.approx(3.0, abs=1e-12)
    assert ms.A[2] == pytest.approx(3.0, abs=1e-12)

    (tmp_path / "bad.csv").write_text("time,a,b,c\n1,1,1,1\n")
    with pytest.raises(ModelError):
        load_tabulated_csv(tmp_path / "bad.csv")
