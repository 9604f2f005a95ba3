import numpy as np
import pytest

import ethlab as el


@pytest.fixture(scope="session")
def ising8():
    """L=8 chain at the chaotic defaults with the site-0 Z observable."""
    h = el.build_mixed_field_ising(el.SpinChainParams(n_sites=8))
    spec = el.eigendecompose(h)
    z0 = el.build_local_observable(
        el.LocalObservableSpec(sites=(0,), paulis="Z"), 8)
    a = el.to_eigenbasis(z0, spec)
    return {"h": h, "spec": spec, "z0": z0, "a": a}


@pytest.fixture(scope="session")
def ising10():
    h = el.build_mixed_field_ising(el.SpinChainParams(n_sites=10))
    spec = el.eigendecompose(h)
    z0 = el.build_local_observable(
        el.LocalObservableSpec(sites=(0,), paulis="Z"), 10)
    a = el.to_eigenbasis(z0, spec)
    return {"h": h, "spec": spec, "z0": z0, "a": a}


@pytest.fixture(scope="session")
def synth2000():
    """Flat-spectrum synthetic operator, S = log(D), decay rate 0.25."""
    spec = el.synth_spectrum(el.SynthSpectrumParams(
        dim=2000, dos_shape="flat", bandwidth=4.0, seed=11))
    ent = el.EntropyModel.constant(np.log(2000), spec.eigenvalues[0],
                                   spec.eigenvalues[-1])
    env = el.EnvelopeSpec(form="exp_decay", gamma=0.25, f0=1.0)
    op = el.synth_eth_operator(spec, ent, env, seed=42)
    return {"spec": spec, "entropy": ent, "envelope": env, "op": op}
