import json

import numpy as np
import pytest

from headfield import tensor as T
from headfield.errors import ManifestError, ParameterError
from headfield.latents import (
    LatentRegistry,
    LatentState,
    interpolate,
    transfer_expression,
)
from headfield.tensor import Tensor

DIMS = {"id": 6, "exp": 5, "alb": 4, "ill": 3}


def frame_keys(subjects=2, expressions=3, lightings=2):
    return [
        (f"s{s}", f"e{e}", f"l{c}")
        for s in range(subjects)
        for e in range(expressions)
        for c in range(lightings)
    ]


def random_state(rng, dims=DIMS, dtype=np.float32):
    return LatentState(*(Tensor(rng.standard_normal(dims[a]).astype(dtype))
                         for a in ("id", "exp", "alb", "ill")))


class TestRegistry:
    def test_sharing_counts(self):
        reg = LatentRegistry.create(frame_keys(2, 3, 2), DIMS)
        assert len(reg.id_codes) == 2
        assert len(reg.exp_codes) == 6
        assert len(reg.alb_codes) == 2
        assert len(reg.ill_codes) == 2

    def test_shared_objects_not_copies(self):
        reg = LatentRegistry.create(frame_keys(), DIMS)
        a = reg.state_for("s0", "e0", "l0")
        b = reg.state_for("s0", "e1", "l1")
        assert a.z_id is b.z_id
        assert a.z_alb is b.z_alb
        assert a.z_exp is not b.z_exp
        c = reg.state_for("s0", "e0", "l1")
        assert a.z_exp is c.z_exp  # same expression under different lighting

    def test_seeded_init_deterministic(self):
        r1 = LatentRegistry.create(frame_keys(), DIMS, init_seed=5)
        r2 = LatentRegistry.create(frame_keys(), DIMS, init_seed=5)
        for name in r1.params():
            assert np.array_equal(r1.params()[name].data, r2.params()[name].data)

    def test_sigma_zero_gives_zero_codes(self):
        reg = LatentRegistry.create(frame_keys(), DIMS, init_sigma=0.0)
        for t in reg.params().values():
            np.testing.assert_array_equal(t.data, 0.0)

    def test_initial_codes_frozen(self):
        reg = LatentRegistry.create(frame_keys(), DIMS, init_seed=1)
        snap = reg.initial["id/s0"]
        with pytest.raises(ValueError):
            snap[0] = 99.0
        reg.id_codes["s0"].data[0] += 1.0  # learnable moves, snapshot does not
        assert reg.initial["id/s0"][0] != reg.id_codes["s0"].data[0]

    def test_file_init_and_dim_conflict(self, tmp_path):
        reg = LatentRegistry.create(frame_keys(1, 1, 1), DIMS, init_seed=2)
        payload = {name: t.data.tolist() for name, t in reg.params().items()}
        good = tmp_path / "codes.json"
        good.write_text(json.dumps(payload))
        back = LatentRegistry.create(frame_keys(1, 1, 1), DIMS, init_file=str(good))
        for name in payload:
            np.testing.assert_allclose(back.params()[name].data, payload[name], rtol=1e-6)

        payload["id/s0"] = [0.0] * (DIMS["id"] + 1)
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(payload))
        with pytest.raises(ManifestError):
            LatentRegistry.create(frame_keys(1, 1, 1), DIMS, init_file=str(bad))

    def test_missing_key_in_file(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("{}")
        with pytest.raises(ManifestError):
            LatentRegistry.create(frame_keys(1, 1, 1), DIMS, init_file=str(path))

    def test_unknown_frame_key(self):
        reg = LatentRegistry.create(frame_keys(1, 1, 1), DIMS)
        with pytest.raises(ParameterError):
            reg.state_for("s9", "e0", "l0")

    def test_shared_gradient_is_sum_of_per_frame_gradients(self):
        # two "frames" of one subject: batch gradient into the shared id
        # code equals the sum of isolated per-frame gradients
        dims = DIMS
        reg = LatentRegistry.create(frame_keys(1, 2, 1), dims, dtype=np.float64,
                                    init_seed=3)
        rng = np.random.default_rng(4)
        w1 = Tensor(rng.standard_normal((dims["id"], 4)))
        w2 = Tensor(rng.standard_normal((dims["exp"], 4)))

        def frame_loss(state):
            h = T.add(T.matmul(T.reshape(state.z_id, (1, dims["id"])), w1),
                      T.matmul(T.reshape(state.z_exp, (1, dims["exp"])), w2))
            return T.squared_norm(T.sin(h))

        s0 = reg.state_for("s0", "e0", "l0")
        s1 = reg.state_for("s0", "e1", "l0")
        batch = T.add(frame_loss(s0), frame_loss(s1))
        batch.backward()
        batch_grad = s0.z_id.grad.copy()

        per_frame = []
        for state in (s0, s1):
            state.z_id.grad = None
            state.z_exp.grad = None
            frame_loss(state).backward()
            per_frame.append(state.z_id.grad.copy())
            state.z_id.grad = None
        from headfield.gradcheck import relative_error

        assert relative_error(batch_grad, per_frame[0] + per_frame[1]) < 1e-12

    def test_tensor_round_trip(self):
        reg = LatentRegistry.create(frame_keys(), DIMS, init_seed=6)
        tensors = reg.export_tensors()
        back = LatentRegistry.from_tensors(DIMS, np.float32, reg.keys(), tensors)
        for name, t in reg.params().items():
            assert np.array_equal(back.params()[name].data, t.data)
            assert np.array_equal(back.initial[name], reg.initial[name])


class TestInterpolate:
    def test_t0_returns_a_unchanged(self):
        rng = np.random.default_rng(7)
        a, b = random_state(rng), random_state(rng)
        out = interpolate(a, b, "exp", 0.0)
        for attr in ("id", "exp", "alb", "ill"):
            assert np.array_equal(out.get(attr).data, a.get(attr).data)

    def test_t1_takes_b_attribute_only(self):
        rng = np.random.default_rng(8)
        a, b = random_state(rng), random_state(rng)
        out = interpolate(a, b, "exp", 1.0)
        assert np.array_equal(out.z_exp.data, b.z_exp.data)
        for attr in ("id", "alb", "ill"):
            assert np.array_equal(out.get(attr).data, a.get(attr).data)

    def test_midpoint_elementwise_average(self):
        rng = np.random.default_rng(9)
        a, b = random_state(rng), random_state(rng)
        out = interpolate(a, b, "alb", 0.5)
        np.testing.assert_allclose(out.z_alb.data, (a.z_alb.data + b.z_alb.data) / 2,
                                   rtol=1e-6)

    def test_inputs_not_mutated(self):
        rng = np.random.default_rng(10)
        a, b = random_state(rng), random_state(rng)
        snap_a = {k: a.get(k).data.copy() for k in ("id", "exp", "alb", "ill")}
        interpolate(a, b, "ill", 0.7)
        for k, v in snap_a.items():
            assert np.array_equal(a.get(k).data, v)

    def test_t_range_enforced_with_escape_hatch(self):
        rng = np.random.default_rng(11)
        a, b = random_state(rng), random_state(rng)
        with pytest.raises(ParameterError):
            interpolate(a, b, "exp", 1.5)
        out = interpolate(a, b, "exp", 1.5, extrapolate=True)
        assert out.z_exp.shape == a.z_exp.shape

    def test_unknown_attribute(self):
        rng = np.random.default_rng(12)
        with pytest.raises(ParameterError):
            interpolate(random_state(rng), random_state(rng), "pose", 0.5)


class TestTransfer:
    def test_self_transfer_identity(self):
        rng = np.random.default_rng(13)
        target = random_state(rng)
        (out,) = transfer_expression(target, [target])
        for attr in ("id", "exp", "alb", "ill"):
            assert np.array_equal(out.get(attr).data, target.get(attr).data)

    def test_non_expression_attributes_bit_exact(self):
        rng = np.random.default_rng(14)
        target = random_state(rng)
        seq = [random_state(rng) for _ in range(4)]
        outs = transfer_expression(target, seq)
        for out, src in zip(outs, seq):
            assert np.array_equal(out.z_id.data, target.z_id.data)
            assert np.array_equal(out.z_alb.data, target.z_alb.data)
            assert np.array_equal(out.z_ill.data, target.z_ill.data)
            assert np.array_equal(out.z_exp.data, src.z_exp.data)

    def test_dim_mismatch(self):
        rng = np.random.default_rng(15)
        target = random_state(rng)
        bad = LatentState(target.z_id, Tensor(np.zeros(9)), target.z_alb, target.z_ill)
        with pytest.raises(ParameterError):
            transfer_expression(target, [bad])


class TestDocs:
    def test_doc_round_trip_field_names(self):
        rng = np.random.default_rng(16)
        state = random_state(rng)
        doc = state.to_doc()
        assert sorted(doc) == ["z_alb", "z_exp", "z_id", "z_ill"]
        back = LatentState.from_doc(doc)
        for attr in ("id", "exp", "alb", "ill"):
            np.testing.assert_allclose(back.get(attr).data, state.get(attr).data,
                                       rtol=1e-6)

    def test_missing_field_rejected(self):
        with pytest.raises(ParameterError, match="z_ill"):
            LatentState.from_doc({"z_id": [0], "z_exp": [0], "z_alb": [0]})
