import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from firecast.autodiff import (
    AdamState,
    CheckpointError,
    GraphError,
    NonFiniteError,
    ParamStore,
    Tensor,
    adam_step,
    avg_pool2d,
    backward,
    bce_loss,
    check_gradients,
    conv2d,
    deconv2d,
    linear,
    log,
    lstm_cell,
    no_grad,
    sgd_step,
    sigmoid,
    tanh,
)

from oracles import conv2d_naive, deconv2d_naive, lstm_cell_naive

TOL = 1e-4


def rand(rng, *shape, requires_grad=True, name=None):
    return Tensor(rng.standard_normal(shape), requires_grad=requires_grad, name=name)


def weighted_sum(t, seed=99):
    w = np.random.default_rng(seed).standard_normal(t.shape)
    return (t * w).sum()


# -- golden examples ------------------------------------------------------------

def test_conv_identity_kernel():
    x = np.random.default_rng(0).standard_normal((1, 4, 5))
    y = conv2d(Tensor(x), Tensor(np.ones((1, 1, 1, 1))), Tensor(np.zeros(1)))
    np.testing.assert_array_equal(y.data, x)


def test_conv_all_ones_3x3_sums_to_45():
    x = np.arange(1, 10, dtype=np.float64).reshape(1, 3, 3)
    y = conv2d(Tensor(x), Tensor(np.ones((1, 1, 3, 3))))
    assert y.shape == (1, 1, 1) and y.data.item() == 45.0


def test_conv_stride_two_shape():
    y = conv2d(Tensor(np.ones((1, 5, 5))), Tensor(np.ones((2, 1, 3, 3))), stride=2, padding=1)
    assert y.shape == (2, 3, 3)


def test_conv_shape_errors_list_expected_and_got():
    with pytest.raises(ValueError, match="expected 2 input channels, got 3"):
        conv2d(Tensor(np.ones((3, 4, 4))), Tensor(np.ones((1, 2, 3, 3))))
    with pytest.raises(ValueError, match="larger than padded input"):
        conv2d(Tensor(np.ones((1, 2, 2))), Tensor(np.ones((1, 1, 3, 3))))
    with pytest.raises(ValueError, match="bias"):
        conv2d(Tensor(np.ones((1, 4, 4))), Tensor(np.ones((2, 1, 3, 3))), Tensor(np.ones(3)))
    with pytest.raises(ValueError):
        deconv2d(Tensor(np.ones((3, 4, 4))), Tensor(np.ones((2, 1, 3, 3))))


def test_deconv_identity_and_stamp():
    x = np.random.default_rng(1).standard_normal((1, 3, 4))
    y = deconv2d(Tensor(x), Tensor(np.ones((1, 1, 1, 1))))
    np.testing.assert_array_equal(y.data, x)
    y = deconv2d(Tensor(np.ones((1, 1, 1))), Tensor(np.ones((1, 1, 2, 2))), stride=2)
    np.testing.assert_array_equal(y.data, np.ones((1, 2, 2)))


def test_deconv_output_extent():
    y = deconv2d(Tensor(np.ones((2, 3, 3))), Tensor(np.ones((2, 4, 3, 3))), stride=2, padding=1)
    assert y.shape == (4, 5, 5)
    y = deconv2d(Tensor(np.ones((2, 3, 3))), Tensor(np.ones((2, 4, 3, 3))), stride=2, padding=1, output_padding=1)
    assert y.shape == (4, 6, 6)


def test_lstm_zero_weights():
    z = lambda *s: Tensor(np.zeros(s))
    h, c = lstm_cell(z(1, 3), z(1, 2), z(1, 2), z(8, 3), z(8, 2), z(8))
    np.testing.assert_array_equal(h.data, 0)
    np.testing.assert_array_equal(c.data, 0)
    h, c = lstm_cell(z(1, 3), z(1, 2), Tensor(np.full((1, 2), 2.0)), z(8, 3), z(8, 2), z(8))
    np.testing.assert_allclose(c.data, 1.0, rtol=0, atol=1e-15)
    np.testing.assert_allclose(h.data, 0.5 * math.tanh(1.0), rtol=0, atol=1e-15)
    assert h.data[0, 0] == pytest.approx(0.38079, abs=1e-5)


@pytest.mark.parametrize("d_in", [1, 4, 9])
def test_lstm_output_dims_independent_of_input(d_in):
    rng = np.random.default_rng(d_in)
    h, c = lstm_cell(rand(rng, 2, d_in), rand(rng, 2, 3), rand(rng, 2, 3), rand(rng, 12, d_in), rand(rng, 12, 3), rand(rng, 12))
    assert h.shape == c.shape == (2, 3)


def test_lstm_dim_mismatch():
    z = lambda *s: Tensor(np.zeros(s))
    with pytest.raises(ValueError):
        lstm_cell(z(1, 3), z(1, 2), z(1, 2), z(8, 4), z(8, 2), z(8))
    with pytest.raises(ValueError):
        lstm_cell(z(1, 3), z(1, 2), z(1, 2), z(8, 3), z(6, 2), z(8))


def test_bce_golden_values():
    assert bce_loss(Tensor([0.5]), [1.0]).item() == pytest.approx(math.log(2), abs=1e-9)
    assert bce_loss(Tensor([0.5]), [0.0]).item() == pytest.approx(math.log(2), abs=1e-9)
    perfect = bce_loss(Tensor([1.0, 0.0, 1.0]), [1.0, 0.0, 1.0]).item()
    assert 0 <= perfect <= 1.1e-7
    with pytest.raises(ValueError):
        bce_loss(Tensor([0.5, 0.5]), [1.0])


def test_bce_weights_multiply_summands():
    p = Tensor([0.5, 0.25])
    plain = bce_loss(p, [1.0, 0.0]).item()
    weighted = bce_loss(p, [1.0, 0.0], weight=[2.0, 0.0]).item()
    assert weighted == pytest.approx(math.log(2))
    assert plain == pytest.approx(0.5 * (math.log(2) - math.log(0.75)))


def test_backward_simple_sums():
    P = ParamStore()
    a = P.add("a", [1.0, -2.0, 3.0])
    b = P.add("unused", [5.0])
    backward(a.sum(), P)
    np.testing.assert_array_equal(a.grad, 1.0)
    np.testing.assert_array_equal(b.grad, 0.0)
    backward((a * a).sum(), P)
    np.testing.assert_array_equal(a.grad, [2.0, -4.0, 6.0])


def test_backward_without_forward_is_error():
    with pytest.raises(GraphError):
        Tensor([1.0], requires_grad=True).backward()
    t = Tensor([1.0, 2.0], requires_grad=True)
    loss = (t * 3.0).sum()
    loss.backward()
    with pytest.raises(GraphError):
        loss.backward()


def test_nan_is_detected():
    with pytest.raises(NonFiniteError):
        log(Tensor([-1.0]))
    with pytest.raises(NonFiniteError):
        Tensor([1.0]) * np.inf


def test_no_grad_records_nothing():
    t = Tensor([1.0], requires_grad=True)
    with no_grad():
        y = (t * 2.0).sum()
    assert not y.requires_grad
    with pytest.raises(GraphError):
        y.backward()


def test_broadcast_bias_gradient():
    rng = np.random.default_rng(0)
    x, W, b = rand(rng, 4, 3), rand(rng, 2, 3), rand(rng, 2)
    errs = check_gradients(lambda: weighted_sum(linear(x, W, b)), [x, W, b])
    assert max(errs.values()) < 1e-7


# -- oracle equivalence -----------------------------------------------------------

def _conv_cases():
    for c, o, h, w, k, s, p in itertools.product((1, 2), (1, 3), (1, 3, 5), (2, 5), (1, 2, 3), (1, 2), (0, 1)):
        if k <= h + 2 * p and k <= w + 2 * p:
            yield c, o, h, w, k, s, p


def test_conv2d_matches_naive_loops():
    rng = np.random.default_rng(7)
    n = 0
    for c, o, h, w, k, s, p in _conv_cases():
        x = rng.standard_normal((2, c, h, w))
        K = rng.standard_normal((o, c, k, k))
        b = rng.standard_normal(o)
        got = conv2d(Tensor(x), Tensor(K), Tensor(b), s, p).data
        assert np.max(np.abs(got - conv2d_naive(x, K, b, s, p))) <= 1e-12
        n += 1
    assert n > 100


def test_deconv2d_matches_naive_loops():
    rng = np.random.default_rng(8)
    n = 0
    for c, o, h, w, k, s, p in itertools.product((1, 2), (1, 3), (1, 2, 5), (1, 4), (1, 2, 3), (1, 2), (0, 1)):
        for op in range(s):
            ho = (h - 1) * s - 2 * p + k + op
            wo = (w - 1) * s - 2 * p + k + op
            if ho < 1 or wo < 1:
                continue
            x = rng.standard_normal((2, c, h, w))
            K = rng.standard_normal((c, o, k, k))
            b = rng.standard_normal(o)
            got = deconv2d(Tensor(x), Tensor(K), Tensor(b), s, p, op).data
            assert np.max(np.abs(got - deconv2d_naive(x, K, b, s, p, op))) <= 1e-12
            n += 1
    assert n > 100


@pytest.mark.parametrize("d_in, d_h, n", [(1, 1, 1), (3, 2, 2), (5, 5, 3), (5, 4, 1)])
def test_lstm_matches_naive_loops(d_in, d_h, n):
    rng = np.random.default_rng(d_in * 10 + d_h)
    x, h, c = rng.standard_normal((n, d_in)), rng.standard_normal((n, d_h)), rng.standard_normal((n, d_h))
    W, U, b = rng.standard_normal((4 * d_h, d_in)), rng.standard_normal((4 * d_h, d_h)), rng.standard_normal(4 * d_h)
    hn, cn = lstm_cell(Tensor(x), Tensor(h), Tensor(c), Tensor(W), Tensor(U), Tensor(b))
    he, ce = lstm_cell_naive(x, h, c, W, U, b)
    assert np.max(np.abs(hn.data - he)) <= 1e-12
    assert np.max(np.abs(cn.data - ce)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 5), st.integers(1, 5), st.integers(1, 3),
       st.integers(1, 2), st.integers(0, 1), st.integers(0, 2**31))
def test_conv_deconv_adjointness(c, o, h, w, k, s, p, seed):
    if k > h + 2 * p or k > w + 2 * p:
        return
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((c, h, w))
    K = rng.standard_normal((o, c, k, k))
    y_shape = conv2d(Tensor(x), Tensor(K), stride=s, padding=p).shape
    y = rng.standard_normal(y_shape)
    ho = (y_shape[1] - 1) * s - 2 * p + k
    wo = (y_shape[2] - 1) * s - 2 * p + k
    xt = deconv2d(Tensor(y), Tensor(K), stride=s, padding=p, output_padding=(h - ho, w - wo)).data
    lhs = float(np.sum(conv2d(Tensor(x), Tensor(K), stride=s, padding=p).data * y))
    rhs = float(np.sum(x * xt))
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


# -- finite-difference gradient checks ---------------------------------------------

def test_gradcheck_conv2d():
    rng = np.random.default_rng(0)
    x, K, b = rand(rng, 2, 2, 6, 5, name="x"), rand(rng, 3, 2, 3, 3, name="k"), rand(rng, 3, name="b")
    errs = check_gradients(lambda: weighted_sum(conv2d(x, K, b, 2, 1)), [x, K, b])
    assert max(errs.values()) < TOL, errs


def test_gradcheck_deconv2d():
    rng = np.random.default_rng(1)
    x, K, b = rand(rng, 2, 2, 3, 4, name="x"), rand(rng, 2, 3, 3, 3, name="k"), rand(rng, 3, name="b")
    errs = check_gradients(lambda: weighted_sum(deconv2d(x, K, b, 2, 1, (1, 0))), [x, K, b])
    assert max(errs.values()) < TOL, errs


def test_gradcheck_lstm_cell():
    rng = np.random.default_rng(2)
    ts = [rand(rng, 2, 4, name="x"), rand(rng, 2, 3, name="h"), rand(rng, 2, 3, name="c"),
          rand(rng, 12, 4, name="W"), rand(rng, 12, 3, name="U"), rand(rng, 12, name="b")]

    def loss():
        h, c = lstm_cell(*ts)
        return weighted_sum(h, 1) + weighted_sum(c, 2)

    errs = check_gradients(loss, ts)
    assert max(errs.values()) < TOL, errs


def test_gradcheck_bce_and_pointwise():
    rng = np.random.default_rng(3)
    z = rand(rng, 3, 4, name="z")
    label = (rng.uniform(size=(3, 4)) > 0.5).astype(float)
    weight = rng.uniform(0, 2, size=(3, 4))
    errs = check_gradients(lambda: bce_loss(sigmoid(z), label, weight), [z])
    assert errs["z"] < TOL
    errs = check_gradients(lambda: weighted_sum(tanh(z) * sigmoid(z)), [z])
    assert errs["z"] < TOL
    p = Tensor(rng.uniform(0.05, 0.95, size=(3, 4)), requires_grad=True, name="p")
    errs = check_gradients(lambda: bce_loss(p, label), [p])
    assert errs["p"] < TOL


def test_gradcheck_avg_pool():
    rng = np.random.default_rng(4)
    x = rand(rng, 2, 2, 5, 4, name="x")
    assert check_gradients(lambda: weighted_sum(avg_pool2d(x, 2)), [x])["x"] < TOL


def test_gradcheck_full_ulstm():
    from firecast.grid import Indicator
    from firecast.model import UlstmConfig, build_ulstm

    cfg = UlstmConfig(channels=(Indicator.TEMPERATURE, Indicator.DEW_POINT), T=3, rows=8, cols=8,
                      encoder_widths=(3, 4), hidden=5, seed=1)
    model = build_ulstm(cfg)
    rng = np.random.default_rng(5)
    x = rng.standard_normal((2, 3, 2, 8, 8))
    y = (rng.uniform(size=(2, 8, 8)) > 0.7).astype(float)
    params = list(model.params.values())
    errs = check_gradients(lambda: bce_loss(model.forward(x), y), params, max_entries=12)
    assert max(errs.values()) < TOL, errs


# -- optimizers -------------------------------------------------------------------

def _store(values):
    P = ParamStore()
    P.add("w", values)
    return P


def test_sgd_step():
    P = _store([1.0, 2.0])
    P["w"].grad = np.array([0.5, -1.0])
    sgd_step(P, 0.1)
    np.testing.assert_allclose(P["w"].data, [0.95, 2.1])


def test_zero_gradient_leaves_params():
    for step in (lambda P: sgd_step(P, 0.1), lambda P: adam_step(P, 0.1, AdamState())):
        P = _store([1.0, 2.0])
        P.zero_grad()
        step(P)
        np.testing.assert_array_equal(P["w"].data, [1.0, 2.0])


def test_adam_first_step_magnitude_is_lr():
    P = _store([1.0, -3.0, 0.2])
    P["w"].grad = np.array([0.3, -20.0, 1e-3])
    adam_step(P, 0.01, AdamState())
    np.testing.assert_allclose(P["w"].data - [1.0, -3.0, 0.2], [-0.01, 0.01, -0.01], rtol=1e-4)


def test_missing_gradient_is_error():
    P = _store([1.0])
    with pytest.raises(RuntimeError):
        sgd_step(P, 0.1)
    with pytest.raises(RuntimeError):
        adam_step(P, 0.1, AdamState())


def test_optimizer_steps_are_deterministic():
    def run():
        rng = np.random.default_rng(0)
        P = ParamStore()
        P.uniform("w", (3, 4), 4, rng)
        x = np.random.default_rng(1).standard_normal((5, 4))
        state = AdamState()
        for _ in range(5):
            backward(weighted_sum(linear(Tensor(x), P["w"])), P)
            adam_step(P, 0.01, state)
        return P["w"].data.tobytes()

    assert run() == run()


# -- checkpoints -----------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    P = ParamStore(np.float32)
    rng = np.random.default_rng(0)
    P.uniform("a", (2, 3), 3, rng)
    P.uniform("b", (4,), 4, rng)
    P.save(tmp_path)
    assert (tmp_path / "params.bin").read_bytes()[:8] == b"WFCKPT01"
    Q = ParamStore.load(tmp_path)
    assert Q.names() == ["a", "b"] and Q.dtype == np.float32
    for k in P:
        assert Q[k].data.tobytes() == P[k].data.tobytes()


def test_checkpoint_corruption(tmp_path):
    P = _store([1.0, 2.0])
    P.save(tmp_path)
    blob = tmp_path / "params.bin"
    blob.write_bytes(b"BADMAGIC" + blob.read_bytes()[8:])
    with pytest.raises(CheckpointError):
        ParamStore.load(tmp_path)
    with pytest.raises(CheckpointError):
        ParamStore.load(tmp_path / "nowhere")


def test_param_names_unique_and_ordered():
    P = ParamStore()
    for name in ("z", "a", "m"):
        P.add(name, [0.0])
    assert P.names() == ["z", "a", "m"]
    with pytest.raises(KeyError):
        P.add("a", [1.0])
