import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import lowlight.nn_core as nn
from lowlight.errors import BadRangeError, FormatError
from lowlight.image_io import ColorSpace, PlanarImage
from lowlight.nn_core import grad_check_fn, net_forward
from lowlight.sci_model import (
    CascadeTrace,
    cascade_arrays,
    cascade_forward,
    infer,
    init_weights,
    load_weights,
    save_weights,
    sci_loss,
    weights_astype,
)

from util import (
    assert_fd_point_is_interior,
    dark_photo,
    gray_image,
    interior_check_weights,
    interior_luma,
)


def zero_weights(in_channels=1, hidden=4):
    w = init_weights(in_channels, hidden, seed=0)
    for layer in w.h_theta + w.k_vartheta:
        layer.kernel.values[:] = 0.0
        layer.bias.values[:] = 0.0
    return w


def random_luma(h, w, seed):
    rng = np.random.default_rng(seed)
    return PlanarImage(ColorSpace.GRAY, rng.random((1, h, w), dtype=np.float32))


class TestCascadeForward:
    def test_zero_weights_constant_input(self):
        trace = cascade_forward(gray_image(5, 6, 0.25), zero_weights(), 3)
        for st_ in trace.stages:
            assert not st_.u.any()
            assert np.all(st_.x == 0.25)
            assert np.all(st_.z == 1.0)

    def test_zero_weights_black_input(self):
        trace = cascade_forward(gray_image(4, 4, 0.0), zero_weights(), 2)
        assert np.all(trace.stages[0].x == 1e-3)  # illumination floor
        assert np.all(trace.stages[0].z == 0.0)

    def test_rejects_out_of_range(self):
        bad = PlanarImage(ColorSpace.GRAY, np.full((1, 2, 2), 1.5, dtype=np.float32))
        with pytest.raises(BadRangeError):
            cascade_forward(bad, zero_weights(), 1)

    def test_stage_input_resets_toward_observation(self):
        w = init_weights(hidden_channels=8, seed=4)
        y = random_luma(10, 12, seed=2)
        trace = cascade_forward(y, w, 3)
        for st_ in trace.stages:
            assert st_.v.shape == trace.y.shape
        assert trace.stages[0].v is trace.y  # v_0 = y

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_ranges_hold_for_random_weights(self, seed):
        w = init_weights(hidden_channels=4, seed=seed)
        y = random_luma(9, 7, seed=seed + 1)
        trace = cascade_forward(y, w, 3)
        for st_ in trace.stages:
            assert st_.x.min() >= w.epsilon and st_.x.max() <= 1.0
            assert st_.z.min() >= 0.0 and st_.z.max() <= 1.0
            assert np.isfinite(st_.x).all() and np.isfinite(st_.z).all()
            # division by an illumination <= 1 cannot darken
            assert np.all(st_.z >= trace.y - 1e-6)


class TestInfer:
    def test_matches_cascade_stage_zero_bitwise(self):
        for seed in range(6):
            w = init_weights(hidden_channels=6, seed=seed)
            y = random_luma(11, 8, seed=100 + seed)
            out = infer(y, w)
            for stages in (1, 3, 5):
                trace = cascade_forward(y, w, stages)
                assert np.array_equal(out.data[None], trace.stages[0].z)

    def test_zero_weights_quarter_gray(self):
        out = infer(gray_image(3, 3, 0.25), zero_weights())
        assert np.all(out.data == 1.0)

    def test_saturated_input_unchanged(self):
        out = infer(gray_image(3, 3, 1.0), zero_weights())
        assert np.all(out.data == 1.0)

    def test_weight_sharing_every_stage_uses_live_weights(self):
        # recomputing each stage's residual from the shared weights must
        # reproduce the trace bit for bit
        w = init_weights(hidden_channels=4, seed=9)
        trace = cascade_forward(random_luma(6, 6, seed=3), w, 4)
        for st_ in trace.stages:
            again = net_forward(st_.v, w.h_theta)
            assert np.array_equal(again, st_.u)


class TestSciLoss:
    def test_fidelity_zero_with_zero_weights(self):
        # u = 0 so x = v exactly (interior values): fidelity term vanishes
        y = PlanarImage(ColorSpace.GRAY,
                        np.random.default_rng(1).uniform(0.2, 0.8, (1, 8, 8)).astype(np.float32))
        trace = cascade_forward(y, zero_weights(), 3)
        fid_only, _ = sci_loss(trace, alpha=1.0, beta=0.0, compute_grads=False)
        assert fid_only == 0.0

    def test_smoothness_zero_on_constant_plane(self):
        trace = cascade_forward(gray_image(8, 8, 0.4), zero_weights(), 3)
        smooth_only, _ = sci_loss(trace, alpha=0.0, beta=2.0, compute_grads=False)
        assert smooth_only == 0.0

    def test_loss_decomposes_linearly_in_weights(self):
        w = init_weights(hidden_channels=4, seed=2)
        y = random_luma(8, 8, seed=4)
        trace = cascade_forward(y, w, 3)
        full, _ = sci_loss(trace, alpha=1.0, beta=2.0, compute_grads=False)
        fid, _ = sci_loss(trace, alpha=1.0, beta=0.0, compute_grads=False)
        smooth, _ = sci_loss(trace, alpha=0.0, beta=2.0, compute_grads=False)
        assert full == pytest.approx(fid + smooth, rel=1e-12)

    def test_gradients_match_finite_differences(self):
        w64 = weights_astype(interior_check_weights(), np.float64)
        y = interior_luma(8, 8, seed=2)
        trace = cascade_arrays(y, w64, 3)
        assert_fd_point_is_interior(trace)
        params = [t.values for t in w64.parameters()]
        err = grad_check_fn(lambda: sci_loss(cascade_arrays(y, w64, 3)), params, step=1e-5)
        assert err < 1e-4

    def test_corrupted_backward_detected(self, monkeypatch):
        real = nn.conv2d_backward

        def broken(grad_out, x, layer, relu_mask=None):
            gx, gk, gb = real(grad_out, x, layer, relu_mask)
            return gx, gk + 0.05, gb
        w64 = weights_astype(interior_check_weights(), np.float64)
        y = interior_luma(8, 8, seed=2)
        params = [t.values for t in w64.parameters()]

        def compute():
            monkeypatch.setattr(nn, "conv2d_backward", broken)
            try:
                return sci_loss(cascade_arrays(y, w64, 3))
            finally:
                monkeypatch.setattr(nn, "conv2d_backward", real)
        assert grad_check_fn(compute, params, step=1e-5) > 1e-2

    def test_forward_only_skips_gradients(self):
        trace = cascade_forward(random_luma(6, 6, 1), init_weights(hidden_channels=4, seed=1), 2)
        loss, grads = sci_loss(trace, compute_grads=False)
        assert grads is None
        assert loss > 0.0


class TestCheckpointIo:
    def test_roundtrip_bit_identical(self, tmp_path):
        w = init_weights(in_channels=1, hidden_channels=16, epsilon=2e-3, seed=31)
        path = tmp_path / "w.sciw"
        save_weights(w, path)
        back = load_weights(path)
        assert back.in_channels == 1
        assert back.hidden_channels == 16
        assert back.epsilon == pytest.approx(2e-3)
        for a, b in zip(w.h_theta + w.k_vartheta, back.h_theta + back.k_vartheta):
            assert a.activation == b.activation
            np.testing.assert_array_equal(a.kernel.values, b.kernel.values)
            np.testing.assert_array_equal(a.bias.values, b.bias.values)

    def test_roundtrip_rgb_mode(self, tmp_path):
        w = init_weights(in_channels=3, hidden_channels=8, seed=5)
        path = tmp_path / "rgb.sciw"
        save_weights(w, path)
        assert load_weights(path).in_channels == 3

    def test_truncated_file(self, tmp_path):
        w = init_weights(hidden_channels=4, seed=0)
        path = tmp_path / "t.sciw"
        save_weights(w, path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(FormatError, match="truncated"):
            load_weights(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.sciw"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(FormatError, match="magic"):
            load_weights(path)

    def test_mismatched_shape_table_names_layer(self, tmp_path):
        w = init_weights(hidden_channels=4, seed=0)
        path = tmp_path / "bad.sciw"
        save_weights(w, path)
        blob = bytearray(path.read_bytes())
        # corrupt layer 1's in-channel count (header is 10 bytes, 9 per table row)
        entry = 10 + 9 + 2
        blob[entry:entry + 2] = (99).to_bytes(2, "little")
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="layer 1"):
            load_weights(path)

    def test_trailing_garbage(self, tmp_path):
        w = init_weights(hidden_channels=4, seed=0)
        path = tmp_path / "g.sciw"
        save_weights(w, path)
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(FormatError, match="trailing"):
            load_weights(path)


def test_rgb_mode_cascade_runs():
    w = init_weights(in_channels=3, hidden_channels=4, seed=8)
    img = dark_photo(12, 10, seed=1)
    out = infer(img, w)
    assert out.space is ColorSpace.RGB
    assert out.data.shape == img.data.shape
    assert np.all(out.data >= img.data - 1e-6)
