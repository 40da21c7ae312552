"""EEG working-memory functional-connectivity analysis pipeline.

Preprocessing, spherical/head harmonic decomposition, PLI and CPTE
connectivity matrices, thresholded graph metrics, and random-forest
classification, with a synthetic coupled-signal cohort generator for
desk-scale validation.
"""

__version__ = "0.1.0"
