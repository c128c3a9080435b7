"""
Evolved discriminant vs. a small trained CNN
============================================

Sixty windows of 10 Hz and 20 Hz tones in noise are split 80/20. The
proposed model evolves a symbolic discriminant over wavelet features; the
standard model learns its kernels and a dense softmax layer by gradient
descent. Settings are kept short so the script runs in under a minute.
"""

import numpy as np

from eegalps import baseline, dataset as ds, metrics, pipeline, sda

labels = ds.LABELS["Color"]
sessions = []
for subject in range(6):
    for session in range(1, 6):
        for i, label in enumerate(labels):
            meta = ds.SessionMeta(f"S{subject + 1}", "Color", "Visible", label, session)
            spec = ds.SignalSpec(frequency=10 if i == 0 else 20)
            sessions.append(ds.generate_synthetic_session(spec, [subject, session, i], meta))
windows = ds.build_windows(sessions)
split = ds.split_train_test(windows, "80/20", seed=3)


def arrays(ws):
    return np.array([w.samples for w in ws]), pipeline.label_indices([w.label for w in ws], labels)


X_train, y_train = arrays(split.train)
X_test, y_test = arrays(split.test)
print(f"{len(X_train)} training and {len(X_test)} test windows")

###############################################################################
# Proposed model: 100 generations of a 100-member age-layered population

cfg = sda.AlpsConfig(population_size=100, max_generations=100, seed=3)
proposed = pipeline.fit_proposed(X_train, y_train, cfg, labels)
print("best training MSE:", round(proposed.best_mse, 4))
print("discriminant:", sda.to_text(proposed.program))

###############################################################################
# Standard model: full-batch gradient descent on the squared error

standard = baseline.train(X_train, y_train, baseline.TrainConfig(learning_rate=0.004, epochs=300, seed=3),
                          labels, input_scale=float(X_train.std()))
print("final training loss:", round(standard.losses[-1], 4))

###############################################################################
# Both models are scored on the same held-out windows

for name, model in (("proposed", proposed), ("standard", standard)):
    cm = metrics.accumulate(zip(model.predict(X_test).tolist(), y_test.tolist()), positive=0)
    rep = metrics.report(cm, labels, {"model": name}, allow_undefined=True)
    print(metrics.format_report(rep))
