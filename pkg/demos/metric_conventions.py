"""
Exact metrics vs. printed figures
=================================

Comparison tables often round accuracy but cut precision and recall to two
decimals, then take the F-measure from the already-cut values. Exact and
printed figures can differ in the second decimal.
"""

from eegalps.metrics import ConfusionMatrix, metrics, published_figures

# counts in windows; each window holds 5000 records
cases = {
    "tones, proposed": ConfusionMatrix(tp=5, fp=0, fn=1, tn=6),
    "arrows, standard": ConfusionMatrix(tp=4, fp=4, fn=2, tn=2),
}

for name, cm in cases.items():
    exact = metrics(cm)
    shown = published_figures(cm)
    print(name, "records:", cm.scaled())
    for key in exact:
        print(f"  {key:<10} exact {exact[key]:.4f}   printed {shown[key]}")
