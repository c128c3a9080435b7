"""
From raw session to discriminant features
=========================================

A synthetic 25 s recording is reduced to one 5000-sample window, passed
through three frozen kernels with ReLU, and compressed with a single-level
Coiflet-1 transform.
"""

import numpy as np

from eegalps import dataset as ds
from eegalps.conv import forward, init_kernels
from eegalps.wavelet import coiflet1, dwt_single_level, extract_features

# a 10 Hz "Red" recording at the headset's 506 records per second
meta = ds.SessionMeta("S1", "Color", "Visible", "Red", 1)
session = ds.generate_synthetic_session(ds.SignalSpec(frequency=10), seed=0, meta=meta)
print("records per second:", np.bincount(session.seconds)[:5], "...")

# keep the ten most attentive seconds, 500 records each
window = ds.build_window(session)
print("selected seconds:", window.seconds)
print("window length:", len(window.samples))

# frozen kernels drawn once in (0, 1)
kernels = init_kernels(3, 10, seed=1)
fmap = forward(window.samples / window.samples.std(), kernels)
print("feature map:", fmap.shape)

# the approximation half of the transform keeps the low band
f = coiflet1()
print("filter taps:", np.round(f.h, 4))
c = dwt_single_level(fmap[0])
print("approx/detail lengths:", len(c.approx), len(c.detail))
print("energy in approximation: %.3f" % ((c.approx ** 2).sum() / (fmap[0] ** 2).sum()))

features = extract_features(fmap)
print("feature vector:", features.shape)
