import numpy as np
import pytest

from pvrnn_sandbox import coding as cd
from pvrnn_sandbox import network as nw
from pvrnn_sandbox import training as tr
from pvrnn_sandbox.regression import RegressionEngine


def small_config():
    return nw.NetworkConfig(
        layers=(nw.LayerSpec(d_units=12, z_units=2, timescale=2.0),
                nw.LayerSpec(d_units=6, z_units=1, timescale=10.0)),
        output_dims=2, bins_per_dim=9, meta_w=0.001)


def toy_coding():
    limits = np.array([[-1.0, 1.0], [-1.0, 1.0]])
    return cd.SoftmaxCoding.from_limits(limits, 9, 25.0)


def toy_sequence(T=40):
    t = np.arange(T) / 8.0
    values = np.stack([0.6 * np.sin(2 * np.pi * t / 5.0),
                       0.5 * np.cos(2 * np.pi * t / 5.0) - 0.2], axis=1)
    return values


@pytest.fixture(scope="module")
def trained():
    coding = toy_coding()
    values = toy_sequence()
    targets = np.stack([coding_encode(values, coding)])
    state, _ = tr.train(targets, small_config(),
                        tr.CognitiveProfile.named("moderate"),
                        epochs=800, seed=0, sequence_names=["s"])
    return state, coding, values, targets[0]


def coding_encode(values, coding):
    return np.stack([cd.encode_posture(v, coding) for v in values])


def make_engine(state, coding, **kw):
    args = dict(window=10, inner_epochs=15, w=1e-5, alpha=0.1, seed=0)
    args.update(kw)
    return RegressionEngine(state.params, state.config, coding, **args)


class TestWindow:
    def test_buffer_grows_then_caps(self, trained):
        state, coding, values, evid = trained
        eng = make_engine(state, coding, inner_epochs=1)
        for i in range(15):
            eng.step(evid[i])
            assert eng.buffer_len == min(i + 1, 10)

    def test_shape_validation(self, trained):
        state, coding, _, _ = trained
        eng = make_engine(state, coding)
        with pytest.raises(ValueError, match="shape"):
            eng.step(np.zeros((3, 9)))

    def test_constructor_validation(self, trained):
        state, coding, _, _ = trained
        with pytest.raises(ValueError):
            make_engine(state, coding, window=0)
        with pytest.raises(ValueError):
            make_engine(state, coding, inner_epochs=0)

    def test_seed_intent_prefills(self, trained):
        state, coding, _, evid = trained
        eng = make_engine(state, coding)
        a_mu = [a[0, :5] for a in state.a_mu]
        a_sig = [a[0, :5] for a in state.a_sig]
        eng.seed_intent(a_mu, a_sig, evid[:5])
        assert eng.buffer_len == 5
        for k, a in enumerate(eng.a_mu):
            assert a.shape == (1, 5, state.config.layers[k].z_units)
            assert np.array_equal(a[0], a_mu[k])

    def test_seed_intent_truncates_to_window(self, trained):
        state, coding, _, evid = trained
        eng = make_engine(state, coding, window=6)
        a_mu = [a[0, :20] for a in state.a_mu]
        a_sig = [a[0, :20] for a in state.a_sig]
        eng.seed_intent(a_mu, a_sig, evid[:20])
        assert eng.buffer_len == 6


class TestDeterminism:
    def test_same_seed_bit_identical(self, trained):
        state, coding, _, evid = trained
        outs = []
        for _ in range(2):
            eng = make_engine(state, coding, seed=42)
            thetas = [eng.step(evid[i])[0] for i in range(8)]
            outs.append(np.stack(thetas))
        assert np.array_equal(outs[0], outs[1])

    def test_different_seed_differs(self, trained):
        state, coding, _, evid = trained
        a = make_engine(state, coding, seed=1)
        b = make_engine(state, coding, seed=2)
        ta = np.stack([a.step(evid[i])[0] for i in range(5)])
        tb = np.stack([b.step(evid[i])[0] for i in range(5)])
        assert not np.array_equal(ta, tb)


class TestTracking:
    def test_prediction_tracks_trained_sequence(self, trained):
        state, coding, values, evid = trained
        eng = make_engine(state, coding)
        a_mu = [a[0, :10] for a in state.a_mu]
        a_sig = [a[0, :10] for a in state.a_sig]
        eng.seed_intent(a_mu, a_sig, evid[:10])
        errs = []
        T = values.shape[0]
        for i in range(10, 10 + 25):
            theta_net, _ = eng.step(evid[i % T])
            errs.append(np.abs(theta_net - values[(i + 1) % T]).mean())
        assert np.mean(errs[-10:]) < 0.15

    def test_error_shrinks_relative_to_frozen_prior(self, trained):
        # regression with updates must beat the same engine with no updates
        state, coding, values, evid = trained
        T = values.shape[0]

        def run(inner_epochs):
            eng = make_engine(state, coding, inner_epochs=inner_epochs)
            errs = []
            for i in range(30):
                theta_net, _ = eng.step(evid[i % T])
                errs.append(np.abs(theta_net - values[(i + 1) % T]).mean())
            return np.mean(errs[-10:])

        # inner_epochs=1 with alpha=0 ~ frozen window
        eng0 = make_engine(state, coding, inner_epochs=1, alpha=0.0)
        errs0 = []
        for i in range(30):
            theta_net, _ = eng0.step(evid[i % T])
            errs0.append(np.abs(theta_net - values[(i + 1) % T]).mean())
        assert run(15) < np.mean(errs0[-10:])


class TestSnapshot:
    def test_snapshot_contents(self, trained):
        state, coding, _, evid = trained
        eng = make_engine(state, coding)
        _, snap = eng.step(evid[0])
        assert snap.t == 0
        cfg = state.config
        assert len(snap.d) == cfg.n_layers
        for k, l in enumerate(cfg.layers):
            assert snap.d[k].shape == (l.d_units,)
            assert snap.mu_p[k].shape == (l.z_units,)
            assert np.all(snap.sig_p[k] > 0)
            assert np.all(snap.sig_q[k] > 0)
        doc = snap.to_dict()
        assert set(doc) == {"t", "d", "mu_p", "sig_p", "mu_q", "sig_q"}
        _, snap2 = eng.step(evid[1])
        assert snap2.t == 1
