import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tfkan import autodiff as ad
from tfkan.autodiff import ShapeError
from tfkan.kan import KanStack, KnotGrid
from tfkan.spectral import (
    Spectrum,
    complex_linear_combine,
    domain_detransform,
    domain_transform,
)

from oracles import dft_ref, finite_diff_wrt, idft_ref, max_rel_err


def _transform_1d(x):
    return domain_transform(ad.constant(np.asarray(x, dtype=float)), axis=0)


def test_hand_dft_values():
    spec = _transform_1d([1.0, 2.0, 3.0, 4.0])
    got = spec.re.value + 1j * spec.im.value
    np.testing.assert_allclose(got, [10, -2 + 2j, -2], atol=1e-12)
    np.testing.assert_allclose(got, dft_ref([1, 2, 3, 4]), atol=1e-12)


def test_constant_signal_has_only_dc():
    spec = _transform_1d(np.full(8, 2.5))
    assert abs(spec.re.value[0] - 2.5 * 8) < 1e-12
    assert np.abs(spec.re.value[1:]).max() < 1e-12
    assert np.abs(spec.im.value).max() < 1e-12


@pytest.mark.parametrize("length", [4, 7, 96])
def test_round_trip(length):
    rng = np.random.default_rng(length)
    for _ in range(10):
        x = rng.normal(size=length)
        spec = _transform_1d(x)
        back = domain_detransform(spec, axis=0)
        assert np.abs(back.value - x).max() < 1e-9


def test_transform_output_matches_oracle_batch():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(3, 10, 2))
    spec = domain_transform(ad.constant(x), axis=1)
    for b in range(3):
        for c in range(2):
            ref = dft_ref(x[b, :, c])
            np.testing.assert_allclose(spec.re.value[b, :, c], ref.real, atol=1e-9)
            np.testing.assert_allclose(spec.im.value[b, :, c], ref.imag, atol=1e-9)


def test_dc_only_spectrum_gives_constant_signal():
    length = 6
    re = np.zeros(4)
    re[0] = length
    spec = complex_linear_combine(ad.constant(re), ad.constant(np.zeros(4)), length)
    out = domain_detransform(spec, axis=0)
    np.testing.assert_allclose(out.value, np.ones(length), atol=1e-12)


def test_zero_spectrum_gives_zero_signal():
    spec = complex_linear_combine(ad.constant(np.zeros(4)), ad.constant(np.zeros(4)), 6)
    assert (domain_detransform(spec, axis=0).value == 0).all()


@pytest.mark.parametrize("length", [6, 9])
def test_detransform_matches_inverse_dft_oracle(length):
    rng = np.random.default_rng(length)
    bins = length // 2 + 1
    re, im = rng.normal(size=bins), rng.normal(size=bins)
    spec = complex_linear_combine(ad.constant(re), ad.constant(im), length)
    got = domain_detransform(spec, axis=0).value
    np.testing.assert_allclose(got, idft_ref(re, im, length), atol=1e-9)


def test_linearity():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=12), rng.normal(size=12)
    a, b = 2.5, -1.25
    lhs = _transform_1d(a * x + b * y)
    rx, ry = _transform_1d(x), _transform_1d(y)
    np.testing.assert_allclose(
        lhs.re.value, a * rx.re.value + b * ry.re.value, atol=1e-9
    )
    np.testing.assert_allclose(
        lhs.im.value, a * rx.im.value + b * ry.im.value, atol=1e-9
    )


@given(st.integers(min_value=2, max_value=64), st.integers(min_value=0, max_value=2**31))
@settings(max_examples=40, deadline=None)
def test_parseval_and_round_trip_property(length, seed):
    x = np.random.default_rng(seed).normal(size=length)
    spec = _transform_1d(x)
    power = spec.re.value**2 + spec.im.value**2
    total = power[0] + 2 * power[1 : (length + 1) // 2].sum()
    if length % 2 == 0:
        total += power[-1]
    assert abs((x**2).sum() - total / length) < 1e-8
    back = domain_detransform(spec, axis=0)
    assert np.abs(back.value - x).max() < 1e-9


def test_transform_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    x = ad.parameter(rng.normal(size=8))

    def build():
        spec = domain_transform(x, axis=0)
        return ad.add(ad.reduce_sum(ad.mul(spec.re, spec.re)),
                      ad.reduce_sum(ad.mul(spec.im, ad.constant(np.arange(5.0)))))

    grads = ad.backward(build())
    fd = finite_diff_wrt(lambda: float(build().value), x.value)
    assert max_rel_err(grads[x], fd) < 1e-4


def test_re_bin_gradient_matches_finite_differences():
    x = ad.parameter(np.random.default_rng(3).normal(size=6))
    grads = ad.backward(domain_transform(x, axis=0).re[1])
    fd = finite_diff_wrt(lambda: float(np.fft.rfft(x.value).real[1]), x.value)
    assert max_rel_err(grads[x], fd) < 1e-6


@pytest.mark.parametrize("length", [6, 9])
def test_detransform_gradient_matches_finite_differences(length):
    rng = np.random.default_rng(length)
    bins = length // 2 + 1
    re = ad.parameter(rng.normal(size=bins))
    im = ad.parameter(rng.normal(size=bins))
    w = rng.normal(size=length)

    def build():
        spec = complex_linear_combine(re, im, length)
        return ad.reduce_sum(ad.mul(domain_detransform(spec, axis=0), ad.constant(w)))

    grads = ad.backward(build())
    for node in (re, im):
        fd = finite_diff_wrt(lambda: float(build().value), node.value)
        assert max_rel_err(grads[node], fd) < 1e-4
    # a real reconstruction cannot see these imaginary parts
    assert grads[im][0] == 0.0
    if length % 2 == 0:
        assert grads[im][-1] == 0.0


def test_loss_through_transform_pair_gradcheck():
    rng = np.random.default_rng(4)
    x = ad.parameter(rng.normal(size=(2, 8)))
    w = rng.normal(size=(2, 8))

    def build():
        spec = domain_transform(x, axis=1)
        z = complex_linear_combine(ad.mul(spec.re, spec.re), spec.im, 8)
        return ad.reduce_sum(ad.mul(domain_detransform(z, axis=1), ad.constant(w)))

    grads = ad.backward(build())
    fd = finite_diff_wrt(lambda: float(build().value), x.value)
    assert max_rel_err(grads[x], fd) < 1e-4


def test_transform_of_real_signal_has_real_dc_and_nyquist():
    x = np.random.default_rng(5).normal(size=10)
    spec = _transform_1d(x)
    assert spec.im.value[0] == 0.0
    assert spec.im.value[-1] == 0.0  # Nyquist, even length
    assert spec.re.value.shape[0] == 10 // 2 + 1


def test_pack_and_detransform_round_trip():
    x = np.random.default_rng(6).normal(size=9)
    spec = _transform_1d(x)
    packed = complex_linear_combine(spec.re, spec.im, 9)
    assert packed.re is spec.re and packed.im is spec.im
    back = domain_detransform(packed, axis=0)
    assert np.abs(back.value - x).max() < 1e-9


def test_contract_errors():
    with pytest.raises(ValueError, match=">= 2"):
        domain_transform(ad.constant(np.ones(1)), axis=0)
    with pytest.raises(ShapeError):
        Spectrum(ad.constant(np.zeros(3)), ad.constant(np.zeros(4)), 6)
    bad = complex_linear_combine(ad.constant(np.zeros(3)), ad.constant(np.zeros(3)), 12)
    with pytest.raises(ValueError, match="bins"):
        domain_detransform(bad, axis=0)


def test_frequency_branch_preserves_spectral_support():
    # With spline coefficients zeroed a KAN maps zero to zero, so bins that
    # are empty in the input stay empty after the branch round trip.
    length = 16
    t = np.arange(length)
    x = np.sin(2 * np.pi * 2 * t / length)[None, :, None] * np.ones((1, 1, 3))
    grid = KnotGrid.uniform(2, 1)
    net = KanStack([3, 4, 3], grid, np.random.default_rng(0))
    for _, p in net.parameters():
        if p.name.endswith("w_spline"):
            p.value[...] = 0
    spec = domain_transform(ad.constant(x), axis=1)
    z = complex_linear_combine(net(spec.re), net(spec.im), length)
    recon = domain_detransform(z, axis=1)
    out_spec = np.fft.rfft(recon.value, axis=1)
    in_support = np.abs(np.fft.rfft(x, axis=1)).sum(axis=(0, 2)) > 1e-9
    out_support = np.abs(out_spec).sum(axis=(0, 2)) > 1e-9
    assert not np.any(out_support & ~in_support)
